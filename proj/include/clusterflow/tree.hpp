#pragma once

#include "clusterflow/geometry.hpp"
#include "clusterflow/labels.hpp"
#include "clusterflow/seeding.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clusterflow {

/// One data point: a feature vector, its labels and where it came from.
struct Activation {
    Vector features;
    LabelSet labels; ///< sorted, non-empty
    std::string source_id;
};

Activation make_activation(Vector features, std::vector<LabelId> labels, std::string source_id);

enum class ClusterStatus { Pure, Mixed, IrreducibleMixed };

std::string_view to_string(ClusterStatus s) noexcept;
ClusterStatus parse_cluster_status(std::string_view name);

/**
 * A tree node. `members` are indices into the training set the tree was
 * built from. A node is Pure when the label sets of its members intersect;
 * `common_labels` holds that intersection.
 */
struct Cluster {
    BoundingBox box;
    std::vector<std::size_t> members;
    std::vector<Cluster> children;
    ClusterStatus status = ClusterStatus::Mixed;
    LabelSet common_labels;
    std::map<LabelId, std::size_t> label_histogram;
    DimStats stats;

    bool is_leaf() const noexcept { return children.empty(); }

    friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct BuildConfig {
    MetricKind metric = MetricKind::L2;
    BoxMode box_mode = BoxMode::Full;
    double expand_fraction = 0.10;
    SeedConfig seed_config;
    std::size_t batch_size = 4096;
    std::size_t max_depth = 32;
    std::uint64_t rng_seed = 0;
    unsigned threads = 1; ///< worker cap; 0 means hardware concurrency

    void validate() const;

    friend bool operator==(const BuildConfig& a, const BuildConfig& b) {
        return a.metric == b.metric && a.box_mode == b.box_mode && a.expand_fraction == b.expand_fraction &&
               a.seed_config.algorithm == b.seed_config.algorithm && a.seed_config.k == b.seed_config.k &&
               a.seed_config.k_max == b.seed_config.k_max && a.seed_config.max_iters == b.seed_config.max_iters &&
               a.seed_config.tolerance == b.seed_config.tolerance && a.batch_size == b.batch_size &&
               a.max_depth == b.max_depth && a.rng_seed == b.rng_seed;
    }
};

struct TreeSummary {
    std::size_t nodes = 0;
    std::size_t depth = 0;      ///< root alone has depth 0
    std::size_t top_width = 0;  ///< children of the world cluster
    std::size_t leaves = 0;
    std::size_t pure = 0;
    std::size_t mixed = 0;
    std::size_t irreducible = 0;
    std::size_t rejects = 0;
};

/// A built model. Immutable once constructed.
class ClusterTree {
public:
    ClusterTree(Cluster root, BuildConfig config, DimStats global_stats, LabelTable labels,
                std::vector<std::string> sources, std::vector<std::size_t> rejects);

    const Cluster& root() const noexcept { return root_; }
    const BuildConfig& config() const noexcept { return config_; }
    const DimStats& global_stats() const noexcept { return global_stats_; }
    const LabelTable& labels() const noexcept { return labels_; }
    std::size_t dim() const noexcept { return global_stats_.dim(); }

    /// Source id of every training activation, by training index.
    const std::vector<std::string>& sources() const noexcept { return sources_; }

    /// Training indices that went through the singleton pool.
    const std::vector<std::size_t>& rejects() const noexcept { return rejects_; }

    TreeSummary summary() const;

    friend bool operator==(const ClusterTree&, const ClusterTree&) = default;

private:
    Cluster root_;
    BuildConfig config_;
    DimStats global_stats_;
    LabelTable labels_;
    std::vector<std::string> sources_;
    std::vector<std::size_t> rejects_;
};

/// Preorder walk. `id` is the preorder index, which is also the node id.
void for_each_node(const Cluster& root,
                   const std::function<void(const Cluster& node, std::size_t depth, std::size_t id)>& fn);

// ---------------------------------------------------------------------------
// Build stages. `build()` is the entry point; the stages are exposed so they
// can be exercised in isolation.

struct BuildContext {
    std::span<const Activation> data;
    const BuildConfig& config;
    const DimStats& stats; ///< global statistics of `data`
};

/// Recomputes histogram, common labels and Pure/Mixed status from `members`.
void update_labels(Cluster& c, std::span<const Activation> data);

struct SeedResult {
    std::vector<Cluster> clusters; ///< one per flat cluster, box expanded
    std::vector<std::size_t> singletons; ///< members none of whose labels has >= 2 members
};

/**
 * Per-label flat clustering over `members`. Each activation joins the run of
 * every label it carries; labels with a single member are not run. A nonzero
 * `forced_k` runs fixed-k seeding instead of the configured choice of k.
 */
SeedResult build_level1(const BuildContext& ctx, std::span<const std::size_t> members, std::uint64_t salt = 0,
                        std::size_t forced_k = 0);

/**
 * The world cluster: the tight hull of the level-1 members plus `extra`
 * points, expanded by the configured fraction. Level-1 clusters become its
 * children.
 */
Cluster build_world(const BuildContext& ctx, std::span<const Cluster> level1, std::span<const std::size_t> extra);

struct Allocation {
    std::vector<Cluster> clusters;
    std::vector<std::size_t> unallocated;
};

/// Attach radius used by `allocate`: fraction * mean metric diagonal of `boxes`.
double attach_radius(const BuildContext& ctx, std::span<const BoundingBox> boxes);

/**
 * Places `points` into sibling boxes. Boxes sharing a contained point are
 * merged (repeatedly, to a fixpoint); points in no box are attached to the
 * nearest box within the attach radius. The result does not depend on the
 * batch size or on point order.
 */
Allocation allocate(const BuildContext& ctx, std::vector<BoundingBox> boxes, std::span<const std::size_t> points);

/**
 * Splits a Mixed cluster recursively. Members whose labels all occur once in
 * the cluster are moved to `pool`. If the configured seeding reproduces the
 * cluster, fixed k = 2, 4, 8, ... is tried per label, up to half the cluster
 * size. A cluster that still cannot be split, or that is at `max_depth`,
 * becomes an IrreducibleMixed leaf.
 */
void refine(const BuildContext& ctx, Cluster& cluster, std::size_t depth, std::vector<std::size_t>& pool);

/// Throws EmptyDatasetError, DimensionError, LabelError or MissingDataError.
ClusterTree build(std::span<const Activation> dataset, const BuildConfig& config, LabelTable labels = {});

} // namespace clusterflow
