#include "clusterflow/tree.hpp"

#include "clusterflow/errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <deque>
#include <iterator>
#include <limits>
#include <numeric>
#include <utility>

namespace clusterflow {

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // Keeps the smaller index as the representative.
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        if (b < a) {
            std::swap(a, b);
        }
        parent_[b] = a;
        return true;
    }

private:
    std::vector<std::size_t> parent_;
};

BoundingBox tight_box(const BuildContext& ctx, std::span<const std::size_t> members) {
    BoundingBox box(ctx.config.box_mode, ctx.stats.dim());
    for (std::size_t m : members) {
        box.extend(ctx.data[m].features);
    }
    return box;
}

std::vector<std::size_t> set_difference(std::span<const std::size_t> all, std::vector<std::size_t> remove) {
    std::sort(remove.begin(), remove.end());
    std::vector<std::size_t> sorted(all.begin(), all.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> out;
    std::set_difference(sorted.begin(), sorted.end(), remove.begin(), remove.end(), std::back_inserter(out));
    return out;
}

// Caps the seeding config so that every flat cluster can hold two points on
// average and k never exceeds the distinct point count.
// A nonzero `forced_k` replaces the configured choice of k.
SeedConfig capped_seed_config(const SeedConfig& base, std::span<const Vector> points, std::uint64_t seed,
                              std::size_t forced_k) {
    SeedConfig sc = base;
    sc.rng_seed = seed;
    const std::size_t half = std::max<std::size_t>(1, points.size() / 2);
    if (forced_k > 0) {
        if (sc.algorithm == SeedAlgorithm::DetK) {
            sc.algorithm = SeedAlgorithm::KMeansPP;
        }
        sc.k = forced_k;
    }
    if (sc.algorithm == SeedAlgorithm::DetK) {
        sc.k_max = std::min(sc.k_max, half);
    } else {
        sc.k = std::min({sc.k, half, distinct_count(points)});
    }
    return sc;
}

void collect_nodes(Cluster& node, std::vector<Cluster*>& out) {
    out.push_back(&node);
    for (auto& child : node.children) {
        collect_nodes(child, out);
    }
}

Cluster* deepest_internal_container(Cluster& root, const Vector& v) {
    Cluster* node = &root;
    for (;;) {
        Cluster* next = nullptr;
        for (auto& child : node->children) {
            if (!child.is_leaf() && child.box.contains(v)) {
                next = &child;
                break;
            }
        }
        if (next == nullptr) {
            return node;
        }
        node = next;
    }
}

// Pooled singletons, in ascending index order: join the nearest Pure leaf that
// shares a label when it is within the attach radius and the widened box
// swallows no point of a foreign label; otherwise become a one-point leaf
// under the deepest internal node containing them.
void run_final_batch(const BuildContext& ctx, Cluster& root, std::span<const std::size_t> pool) {
    if (pool.empty()) {
        return;
    }
    const BuildConfig& cfg = ctx.config;
    std::vector<Cluster*> nodes;
    collect_nodes(root, nodes);

    std::vector<Cluster*> pure_leaves;
    std::vector<BoundingBox> leaf_boxes;
    for (Cluster* n : nodes) {
        if (n != &root && n->is_leaf() && n->status == ClusterStatus::Pure) {
            pure_leaves.push_back(n);
            leaf_boxes.push_back(n->box);
        }
    }
    const double radius = attach_radius(ctx, leaf_boxes);

    // New leaves live here until every singleton is placed so that pointers
    // into the existing tree stay valid.
    std::deque<std::pair<Cluster*, Cluster>> created;
    std::vector<Cluster*> candidates = pure_leaves;

    for (std::size_t s : pool) {
        const Activation& act = ctx.data[s];
        Cluster* best = nullptr;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Cluster* leaf : candidates) {
            if (!shares_label(leaf->common_labels, act.labels)) {
                continue;
            }
            double d = 0.0;
            try {
                d = point_to_box_distance(act.features, leaf->box, cfg.metric, &ctx.stats);
            } catch (const NoSharedSubspaceError&) {
                continue;
            }
            if (d < best_dist) {
                best_dist = d;
                best = leaf;
            }
        }

        if (best != nullptr && best_dist <= radius) {
            BoundingBox widened = best->box;
            widened.extend(act.features);
            const LabelSet common = intersect(best->common_labels, act.labels);
            bool foreign = false;
            for (std::size_t j = 0; j < ctx.data.size() && !foreign; ++j) {
                const Activation& other = ctx.data[j];
                foreign = j != s && !shares_label(other.labels, common) && widened.contains(other.features) &&
                          !best->box.contains(other.features);
            }
            if (!foreign) {
                best->box = std::move(widened);
                best->members.push_back(s);
                best->common_labels = common;
                continue;
            }
        }

        Cluster leaf;
        BoundingBox box(cfg.box_mode, ctx.stats.dim());
        box.extend(act.features);
        leaf.box = box.expanded(cfg.expand_fraction, ctx.stats);
        leaf.members = {s};
        update_labels(leaf, ctx.data);
        Cluster* parent = deepest_internal_container(root, act.features);
        created.emplace_back(parent, std::move(leaf));
        candidates.push_back(&created.back().second);
    }

    for (auto& [parent, leaf] : created) {
        parent->children.push_back(std::move(leaf));
    }
}

// Bottom-up: internal members become the union of child members, boxes grow
// to cover members, and labels, status and statistics are recomputed.
void finalize(const BuildContext& ctx, Cluster& node) {
    if (!node.is_leaf()) {
        std::vector<std::size_t> members;
        for (auto& child : node.children) {
            finalize(ctx, child);
            members.insert(members.end(), child.members.begin(), child.members.end());
        }
        node.members = std::move(members);
    }
    std::sort(node.members.begin(), node.members.end());
    node.members.erase(std::unique(node.members.begin(), node.members.end()), node.members.end());

    DimStats stats(ctx.stats.dim());
    for (std::size_t m : node.members) {
        node.box.extend(ctx.data[m].features);
        stats.add(ctx.data[m].features);
    }
    node.stats = std::move(stats);
    update_labels(node, ctx.data);
    if (node.is_leaf() && node.status == ClusterStatus::Mixed) {
        node.status = ClusterStatus::IrreducibleMixed;
    }
}

void validate_dataset(std::span<const Activation> data, const BuildConfig& cfg) {
    if (data.empty()) {
        throw EmptyDatasetError("build: empty dataset");
    }
    const std::size_t dim = data.front().features.dim();
    if (dim == 0) {
        throw DimensionError("build: activations have no features");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Activation& a = data[i];
        if (a.features.dim() != dim) {
            throw DimensionError("build: activation " + std::to_string(i) + " has dimension " +
                                 std::to_string(a.features.dim()) + ", expected " + std::to_string(dim));
        }
        if (a.labels.empty()) {
            throw LabelError("build: activation " + std::to_string(i) + " has no labels");
        }
        if (!std::is_sorted(a.labels.begin(), a.labels.end()) ||
            std::adjacent_find(a.labels.begin(), a.labels.end()) != a.labels.end()) {
            throw LabelError("build: activation " + std::to_string(i) + " has an unsorted label set");
        }
        if (cfg.box_mode != BoxMode::PartialDimensional && !a.features.complete()) {
            throw MissingDataError("build: activation " + std::to_string(i) +
                                   " has missing entries; use partial-dimensional boxes");
        }
    }
}

} // namespace

// ---------------------------------------------------------------- small types

Activation make_activation(Vector features, std::vector<LabelId> labels, std::string source_id) {
    Activation a{std::move(features), make_label_set(std::move(labels)), std::move(source_id)};
    if (a.labels.empty()) {
        throw LabelError("activation '" + a.source_id + "' has no labels");
    }
    return a;
}

std::string_view to_string(ClusterStatus s) noexcept {
    switch (s) {
    case ClusterStatus::Pure: return "pure";
    case ClusterStatus::Mixed: return "mixed";
    case ClusterStatus::IrreducibleMixed: return "irreducible";
    }
    return "?";
}

ClusterStatus parse_cluster_status(std::string_view name) {
    if (name == "pure") return ClusterStatus::Pure;
    if (name == "mixed") return ClusterStatus::Mixed;
    if (name == "irreducible") return ClusterStatus::IrreducibleMixed;
    throw ParseError("unknown cluster status '" + std::string(name) + "'");
}

void BuildConfig::validate() const {
    seed_config.validate();
    if (!(expand_fraction >= 0.0)) throw ConfigError("build config: expand_fraction must be >= 0");
    if (batch_size < 1) throw ConfigError("build config: batch_size must be >= 1");
    if (max_depth < 1) throw ConfigError("build config: max_depth must be >= 1");
}

ClusterTree::ClusterTree(Cluster root, BuildConfig config, DimStats global_stats, LabelTable labels,
                         std::vector<std::string> sources, std::vector<std::size_t> rejects)
    : root_(std::move(root)),
      config_(std::move(config)),
      global_stats_(std::move(global_stats)),
      labels_(std::move(labels)),
      sources_(std::move(sources)),
      rejects_(std::move(rejects)) {}

TreeSummary ClusterTree::summary() const {
    TreeSummary s;
    s.top_width = root_.children.size();
    s.rejects = rejects_.size();
    for_each_node(root_, [&](const Cluster& node, std::size_t depth, std::size_t) {
        ++s.nodes;
        s.depth = std::max(s.depth, depth);
        s.leaves += node.is_leaf() ? 1 : 0;
        switch (node.status) {
        case ClusterStatus::Pure: ++s.pure; break;
        case ClusterStatus::Mixed: ++s.mixed; break;
        case ClusterStatus::IrreducibleMixed: ++s.irreducible; break;
        }
    });
    return s;
}

void for_each_node(const Cluster& root,
                   const std::function<void(const Cluster& node, std::size_t depth, std::size_t id)>& fn) {
    std::size_t next_id = 0;
    std::function<void(const Cluster&, std::size_t)> walk = [&](const Cluster& node, std::size_t depth) {
        fn(node, depth, next_id++);
        for (const auto& child : node.children) {
            walk(child, depth + 1);
        }
    };
    walk(root, 0);
}

// ---------------------------------------------------------------- build stages

void update_labels(Cluster& c, std::span<const Activation> data) {
    c.label_histogram.clear();
    c.common_labels.clear();
    bool first = true;
    for (std::size_t m : c.members) {
        const LabelSet& labels = data[m].labels;
        for (LabelId l : labels) {
            ++c.label_histogram[l];
        }
        c.common_labels = first ? labels : intersect(c.common_labels, labels);
        first = false;
    }
    c.status = c.common_labels.empty() ? ClusterStatus::Mixed : ClusterStatus::Pure;
}

SeedResult build_level1(const BuildContext& ctx, std::span<const std::size_t> members, std::uint64_t salt,
                        std::size_t forced_k) {
    std::map<LabelId, std::vector<std::size_t>> by_label;
    for (std::size_t m : members) {
        for (LabelId l : ctx.data[m].labels) {
            by_label[l].push_back(m);
        }
    }

    SeedResult out;
    for (std::size_t m : members) {
        const auto& labels = ctx.data[m].labels;
        const bool alone = std::all_of(labels.begin(), labels.end(),
                                       [&](LabelId l) { return by_label[l].size() < 2; });
        if (alone) {
            out.singletons.push_back(m);
        }
    }

    std::vector<std::pair<LabelId, std::vector<std::size_t>>> runs;
    for (auto& [label, idx] : by_label) {
        if (idx.size() >= 2) {
            runs.emplace_back(label, std::move(idx));
        }
    }

    const BuildConfig& cfg = ctx.config;
    std::vector<std::vector<Cluster>> per_run(runs.size());
    detail::parallel_for(0, runs.size(), cfg.threads, [&](std::size_t r) {
        const auto& [label, idx] = runs[r];
        std::vector<Vector> points;
        points.reserve(idx.size());
        for (std::size_t m : idx) {
            points.push_back(ctx.data[m].features);
        }
        const std::uint64_t seed = detail::mix_seed(detail::mix_seed(cfg.rng_seed, salt), label);
        const FlatClustering flat = clusterflow::seed(points, capped_seed_config(cfg.seed_config, points, seed, forced_k));

        std::vector<std::vector<std::size_t>> groups(flat.k());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            groups[flat.assignment[i]].push_back(idx[i]);
        }
        for (auto& g : groups) {
            Cluster c;
            c.box = tight_box(ctx, g).expanded(cfg.expand_fraction, ctx.stats);
            c.members = std::move(g);
            update_labels(c, ctx.data);
            per_run[r].push_back(std::move(c));
        }
    });
    for (auto& v : per_run) {
        std::move(v.begin(), v.end(), std::back_inserter(out.clusters));
    }
    return out;
}

Cluster build_world(const BuildContext& ctx, std::span<const Cluster> level1, std::span<const std::size_t> extra) {
    Cluster world;
    BoundingBox hull(ctx.config.box_mode, ctx.stats.dim());
    for (const auto& c : level1) {
        for (std::size_t m : c.members) {
            hull.extend(ctx.data[m].features);
            world.members.push_back(m);
        }
    }
    for (std::size_t m : extra) {
        hull.extend(ctx.data[m].features);
        world.members.push_back(m);
    }
    std::sort(world.members.begin(), world.members.end());
    world.members.erase(std::unique(world.members.begin(), world.members.end()), world.members.end());
    world.box = hull.expanded(ctx.config.expand_fraction, ctx.stats);
    world.children.assign(level1.begin(), level1.end());
    update_labels(world, ctx.data);
    return world;
}

double attach_radius(const BuildContext& ctx, std::span<const BoundingBox> boxes) {
    if (boxes.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& b : boxes) {
        total += b.diagonal(ctx.config.metric, &ctx.stats);
    }
    return ctx.config.expand_fraction * total / static_cast<double>(boxes.size());
}

Allocation allocate(const BuildContext& ctx, std::vector<BoundingBox> boxes, std::span<const std::size_t> points) {
    const BuildConfig& cfg = ctx.config;
    const double radius = attach_radius(ctx, boxes);
    std::vector<std::vector<std::size_t>> containing(points.size());

    auto compute_containment = [&] {
        for (std::size_t start = 0; start < points.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(points.size(), start + cfg.batch_size);
            detail::parallel_for(start, stop, cfg.threads, [&](std::size_t i) {
                const Vector& v = ctx.data[points[i]].features;
                containing[i].clear();
                for (std::size_t b = 0; b < boxes.size(); ++b) {
                    if (boxes[b].contains(v)) {
                        containing[i].push_back(b);
                    }
                }
            });
        }
    };

    for (;;) {
        compute_containment();

        // Point-witnessed overlap merges sibling boxes.
        UnionFind uf(boxes.size());
        bool merged = false;
        for (const auto& c : containing) {
            for (std::size_t j = 1; j < c.size(); ++j) {
                merged |= uf.unite(c.front(), c[j]);
            }
        }
        if (merged) {
            std::vector<BoundingBox> next;
            std::vector<std::size_t> slot(boxes.size(), boxes.size());
            for (std::size_t b = 0; b < boxes.size(); ++b) {
                const std::size_t root = uf.find(b);
                if (slot[root] == boxes.size()) {
                    slot[root] = next.size();
                    next.push_back(boxes[b]);
                } else {
                    next[slot[root]].merge(boxes[b]);
                }
            }
            boxes = std::move(next);
            continue;
        }

        // Uncontained points: attach to the nearest box within the radius.
        std::vector<std::pair<std::size_t, std::size_t>> extensions; // (box, point slot)
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!containing[i].empty()) {
                continue;
            }
            const Vector& v = ctx.data[points[i]].features;
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = boxes.size();
            for (std::size_t b = 0; b < boxes.size(); ++b) {
                try {
                    const double d = point_to_box_distance(v, boxes[b], cfg.metric, &ctx.stats);
                    if (d < best) {
                        best = d;
                        arg = b;
                    }
                } catch (const NoSharedSubspaceError&) {
                }
            }
            if (arg < boxes.size() && best <= radius) {
                extensions.emplace_back(arg, i);
            }
        }
        if (extensions.empty()) {
            break;
        }
        for (const auto& [b, i] : extensions) {
            boxes[b].extend(ctx.data[points[i]].features);
        }
    }

    Allocation out;
    std::vector<Cluster> clusters(boxes.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (containing[i].empty()) {
            out.unallocated.push_back(points[i]);
        } else {
            clusters[containing[i].front()].members.push_back(points[i]);
        }
    }
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        if (clusters[b].members.empty()) {
            continue;
        }
        clusters[b].box = std::move(boxes[b]);
        std::sort(clusters[b].members.begin(), clusters[b].members.end());
        update_labels(clusters[b], ctx.data);
        out.clusters.push_back(std::move(clusters[b]));
    }
    std::sort(out.unallocated.begin(), out.unallocated.end());
    return out;
}

void refine(const BuildContext& ctx, Cluster& cluster, std::size_t depth, std::vector<std::size_t>& pool) {
    update_labels(cluster, ctx.data);
    if (cluster.status == ClusterStatus::Pure) {
        return;
    }
    if (depth >= ctx.config.max_depth || cluster.members.empty()) {
        cluster.status = ClusterStatus::IrreducibleMixed;
        return;
    }

    // When the configured seeding reproduces the cluster (e.g. one box per
    // label and the boxes overlap), force finer splits before giving up.
    const std::uint64_t salt = detail::mix_seed(depth, cluster.members.front());
    const std::size_t k_limit = std::max<std::size_t>(1, cluster.members.size() / 2);
    SeedResult seeds;
    Allocation alloc;
    for (std::size_t forced = 0;; forced = forced == 0 ? 2 : forced * 2) {
        if (forced > k_limit) {
            cluster.status = ClusterStatus::IrreducibleMixed;
            return;
        }
        seeds = build_level1(ctx, cluster.members, detail::mix_seed(salt, forced), forced);
        if (seeds.clusters.empty()) {
            cluster.status = ClusterStatus::IrreducibleMixed;
            return;
        }
        std::vector<BoundingBox> boxes;
        boxes.reserve(seeds.clusters.size());
        for (auto& c : seeds.clusters) {
            boxes.push_back(std::move(c.box));
        }
        alloc = allocate(ctx, std::move(boxes), set_difference(cluster.members, seeds.singletons));
        const bool reproduced =
            alloc.clusters.size() == 1 && alloc.clusters.front().members.size() == cluster.members.size();
        if (!reproduced) {
            break;
        }
    }

    pool.insert(pool.end(), seeds.singletons.begin(), seeds.singletons.end());
    pool.insert(pool.end(), alloc.unallocated.begin(), alloc.unallocated.end());
    cluster.children = std::move(alloc.clusters);
    for (auto& child : cluster.children) {
        refine(ctx, child, depth + 1, pool);
    }
}

ClusterTree build(std::span<const Activation> dataset, const BuildConfig& config, LabelTable labels) {
    config.validate();
    validate_dataset(dataset, config);

    DimStats stats(dataset.front().features.dim());
    for (const auto& a : dataset) {
        stats.add(a.features);
    }
    const BuildContext ctx{dataset, config, stats};

    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);

    SeedResult level1 = build_level1(ctx, all, 0);
    std::vector<std::size_t> pool = level1.singletons;
    Cluster root = build_world(ctx, level1.clusters, pool);

    std::vector<BoundingBox> boxes;
    for (auto& c : level1.clusters) {
        boxes.push_back(c.box);
    }
    Allocation alloc = allocate(ctx, std::move(boxes), set_difference(all, pool));
    pool.insert(pool.end(), alloc.unallocated.begin(), alloc.unallocated.end());
    root.children = std::move(alloc.clusters);

    std::vector<std::vector<std::size_t>> child_pools(root.children.size());
    detail::parallel_for(0, root.children.size(), config.threads,
                         [&](std::size_t i) { refine(ctx, root.children[i], 1, child_pools[i]); });
    for (auto& p : child_pools) {
        pool.insert(pool.end(), p.begin(), p.end());
    }
    std::sort(pool.begin(), pool.end());

    update_labels(root, dataset);
    run_final_batch(ctx, root, pool);
    finalize(ctx, root);

    std::vector<std::string> sources;
    sources.reserve(dataset.size());
    for (const auto& a : dataset) {
        sources.push_back(a.source_id);
    }
    return ClusterTree(std::move(root), config, std::move(stats), std::move(labels), std::move(sources),
                       std::move(pool));
}

} // namespace clusterflow
