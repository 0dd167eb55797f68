#pragma once

#include "clusterflow/tree.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace clusterflow {

/**
 * Set: all items share a label. SSD (same-same-different): exactly one pair
 * shares a label and the third item shares nothing. Antiset: no pair shares a
 * label. Partial: any other overlap pattern, which only multi-label items can
 * produce (e.g. a chain a~b, b~c with nothing common to all three).
 */
enum class RelationKind { Set, SSD, Antiset, Partial };

std::string_view to_string(RelationKind k) noexcept;

using ItemPair = std::pair<std::size_t, std::size_t>;

struct TripleVerdict {
    RelationKind kind = RelationKind::Partial;
    std::optional<std::size_t> odd_one_out; ///< SSD: the rejected item
    /// Items with the smallest summed pairwise intersection; several on ties.
    std::vector<std::size_t> least_similar;
    std::size_t rejects = 0;
    ClusterStatus c0_status = ClusterStatus::Mixed;
    std::map<ItemPair, LabelSet> shared;
    /// Pairs by descending intersection size, ties by pair index.
    std::vector<ItemPair> pair_ranking;
};

LabelSet shared_labels(const Activation& a, const Activation& b);

/**
 * Builds a micro cluster tree over exactly three items and reads the verdict
 * off its structure. Throws ArityError unless `items.size() == 3`.
 */
TripleVerdict classify_triple(std::span<const Activation> items, const BuildConfig& config = {});

/// Verdict straight from label-set algebra, without building a tree.
RelationKind relation_from_labels(std::span<const Activation> items);

struct GroupVerdict {
    RelationKind kind = RelationKind::Partial; ///< Set, Antiset or Partial
    std::vector<std::size_t> largest_pure_group; ///< largest group sharing one label
    std::vector<std::size_t> rejects;            ///< items sharing no label with any other
    std::map<ItemPair, LabelSet> shared;
};

/// Verdict over n >= 2 items. Throws ArityError for n < 2.
GroupVerdict generalize_n(std::span<const Activation> items, const BuildConfig& config = {});

} // namespace clusterflow
