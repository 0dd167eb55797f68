#include "clusterflow/labels.hpp"

#include <algorithm>
#include <iterator>

namespace clusterflow {

LabelSet make_label_set(std::vector<LabelId> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

LabelSet intersect(const LabelSet& a, const LabelSet& b) {
    LabelSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool shares_label(const LabelSet& a, const LabelSet& b) {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            return true;
        }
    }
    return false;
}

LabelId LabelTable::intern(std::string_view key) {
    std::string k(key);
    if (auto it = index_.find(k); it != index_.end()) {
        return it->second;
    }
    const auto id = static_cast<LabelId>(keys_.size());
    keys_.push_back(k);
    index_.emplace(std::move(k), id);
    return id;
}

std::optional<LabelId> LabelTable::find(std::string_view key) const {
    if (auto it = index_.find(std::string(key)); it != index_.end()) {
        return it->second;
    }
    return std::nullopt;
}

void LabelTable::set_display_name(std::string_view key, std::string name) {
    names_[std::string(key)] = std::move(name);
}

const std::string& LabelTable::display_name(LabelId id) const {
    const std::string& k = key(id);
    if (auto it = names_.find(k); it != names_.end()) {
        return it->second;
    }
    return k;
}

} // namespace clusterflow
