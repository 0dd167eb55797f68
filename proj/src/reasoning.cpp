#include "clusterflow/reasoning.hpp"

#include "clusterflow/errors.hpp"

#include <algorithm>
#include <numeric>

namespace clusterflow {

namespace {

std::map<ItemPair, LabelSet> pairwise_shared(std::span<const Activation> items) {
    std::map<ItemPair, LabelSet> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = i + 1; j < items.size(); ++j) {
            out[{i, j}] = shared_labels(items[i], items[j]);
        }
    }
    return out;
}

LabelSet common_to_all(std::span<const Activation> items) {
    LabelSet common = items.front().labels;
    for (const auto& a : items.subspan(1)) {
        common = intersect(common, a.labels);
    }
    return common;
}

std::vector<std::size_t> isolated_items(std::span<const Activation> items) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        bool alone = true;
        for (std::size_t j = 0; j < items.size() && alone; ++j) {
            alone = i == j || !shares_label(items[i].labels, items[j].labels);
        }
        if (alone) {
            out.push_back(i);
        }
    }
    return out;
}

// Incomplete items switch the micro tree to partial-dimensional boxes.
ClusterTree micro_tree(std::span<const Activation> items, const BuildConfig& config) {
    BuildConfig cfg = config;
    const bool incomplete = std::any_of(items.begin(), items.end(),
                                        [](const Activation& a) { return !a.features.complete(); });
    if (incomplete) {
        cfg.box_mode = BoxMode::PartialDimensional;
    }
    return build(items, cfg);
}

} // namespace

std::string_view to_string(RelationKind k) noexcept {
    switch (k) {
    case RelationKind::Set: return "Set";
    case RelationKind::SSD: return "SSD";
    case RelationKind::Antiset: return "Antiset";
    case RelationKind::Partial: return "Partial";
    }
    return "?";
}

LabelSet shared_labels(const Activation& a, const Activation& b) {
    return intersect(a.labels, b.labels);
}

RelationKind relation_from_labels(std::span<const Activation> items) {
    if (items.size() < 2) {
        throw ArityError("relation_from_labels: need at least 2 items");
    }
    if (!common_to_all(items).empty()) {
        return RelationKind::Set;
    }
    std::size_t sharing_pairs = 0;
    for (const auto& [pair, labels] : pairwise_shared(items)) {
        sharing_pairs += labels.empty() ? 0 : 1;
    }
    if (sharing_pairs == 0) {
        return RelationKind::Antiset;
    }
    if (items.size() == 3 && sharing_pairs == 1) {
        return RelationKind::SSD;
    }
    return RelationKind::Partial;
}

TripleVerdict classify_triple(std::span<const Activation> items, const BuildConfig& config) {
    if (items.size() != 3) {
        throw ArityError("classify_triple: expected 3 items, got " + std::to_string(items.size()));
    }
    const ClusterTree tree = micro_tree(items, config);
    const Cluster& root = tree.root();

    TripleVerdict v;
    v.rejects = tree.rejects().size();
    v.c0_status = root.status;
    v.shared = pairwise_shared(items);

    const auto pure_pairs = std::count_if(root.children.begin(), root.children.end(), [](const Cluster& c) {
        return c.status == ClusterStatus::Pure && c.members.size() == 2;
    });
    if (root.status == ClusterStatus::Pure && v.rejects == 0) {
        v.kind = RelationKind::Set;
    } else if (v.rejects == items.size()) {
        v.kind = RelationKind::Antiset;
    } else if (v.rejects == 1 && pure_pairs == 1) {
        v.kind = RelationKind::SSD;
        v.odd_one_out = tree.rejects().front();
    } else {
        v.kind = RelationKind::Partial;
    }

    const RelationKind expected = relation_from_labels(items);
    if (v.kind != expected) {
        throw InvariantError("classify_triple: tree structure gives " + std::string(to_string(v.kind)) +
                             " but the label sets give " + std::string(to_string(expected)));
    }

    for (const auto& [pair, labels] : v.shared) {
        v.pair_ranking.push_back(pair);
    }
    std::stable_sort(v.pair_ranking.begin(), v.pair_ranking.end(), [&](const ItemPair& a, const ItemPair& b) {
        return v.shared.at(a).size() > v.shared.at(b).size();
    });

    std::vector<std::size_t> similarity(items.size(), 0);
    for (const auto& [pair, labels] : v.shared) {
        similarity[pair.first] += labels.size();
        similarity[pair.second] += labels.size();
    }
    const std::size_t least = *std::min_element(similarity.begin(), similarity.end());
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (similarity[i] == least) {
            v.least_similar.push_back(i);
        }
    }
    return v;
}

GroupVerdict generalize_n(std::span<const Activation> items, const BuildConfig& config) {
    if (items.size() < 2) {
        throw ArityError("generalize_n: need at least 2 items, got " + std::to_string(items.size()));
    }
    const ClusterTree tree = micro_tree(items, config);

    GroupVerdict v;
    v.shared = pairwise_shared(items);
    v.rejects = isolated_items(items);
    const auto& pooled = tree.rejects();
    if (!std::includes(pooled.begin(), pooled.end(), v.rejects.begin(), v.rejects.end())) {
        throw InvariantError("generalize_n: an isolated item was not rejected by the tree");
    }
    const RelationKind rel = relation_from_labels(items);
    v.kind = rel == RelationKind::SSD ? RelationKind::Partial : rel;

    std::map<LabelId, std::vector<std::size_t>> carriers;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (LabelId l : items[i].labels) {
            carriers[l].push_back(i);
        }
    }
    for (const auto& [label, group] : carriers) {
        if (group.size() > v.largest_pure_group.size()) {
            v.largest_pure_group = group;
        }
    }
    return v;
}

} // namespace clusterflow
