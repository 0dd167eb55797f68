#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clusterflow {

using LabelId = std::uint32_t;

/// Sorted, duplicate-free list of label ids.
using LabelSet = std::vector<LabelId>;

LabelSet make_label_set(std::vector<LabelId> ids);
LabelSet intersect(const LabelSet& a, const LabelSet& b);
bool shares_label(const LabelSet& a, const LabelSet& b);

/**
 * Interns label keys (e.g. "n11939491") to dense ids, and optionally maps
 * keys to human-readable names (e.g. "daisy").
 */
class LabelTable {
public:
    LabelId intern(std::string_view key);
    std::optional<LabelId> find(std::string_view key) const;
    const std::string& key(LabelId id) const { return keys_.at(id); }
    std::size_t size() const noexcept { return keys_.size(); }
    const std::vector<std::string>& keys() const noexcept { return keys_; }

    void set_display_name(std::string_view key, std::string name);
    /// Human-readable name if one was registered, else the key.
    const std::string& display_name(LabelId id) const;
    const std::map<std::string, std::string>& display_names() const noexcept { return names_; }

    friend bool operator==(const LabelTable& a, const LabelTable& b) {
        return a.keys_ == b.keys_ && a.names_ == b.names_;
    }

private:
    std::vector<std::string> keys_;
    std::unordered_map<std::string, LabelId> index_;
    std::map<std::string, std::string> names_;
};

} // namespace clusterflow
