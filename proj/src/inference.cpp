#include "clusterflow/inference.hpp"

#include "clusterflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>

namespace clusterflow {

namespace {

struct LeafRef {
    const Cluster* node;
    std::size_t id;
    std::size_t depth;
    std::vector<std::size_t> path; // root .. node
};

std::vector<LeafRef> collect_leaves(const Cluster& root) {
    std::vector<LeafRef> out;
    std::vector<std::size_t> path;
    std::size_t next_id = 0;
    auto walk = [&](auto&& self, const Cluster& node, std::size_t depth) -> void {
        const std::size_t id = next_id++;
        path.push_back(id);
        if (node.is_leaf() && depth > 0) {
            out.push_back({&node, id, depth, path});
        }
        for (const auto& child : node.children) {
            self(self, child, depth + 1);
        }
        path.pop_back();
    };
    walk(walk, root, 0);
    return out;
}

// Log-volume of a box; inactive dimensions span the whole observed range.
double log_volume(const BoundingBox& box, const DimStats& stats) {
    double v = 0.0;
    for (std::size_t d = 0; d < box.dim(); ++d) {
        const double extent = box.active(d) ? box.hi(d) - box.lo(d) : stats.range(d);
        v += std::log(std::max(extent, stats.epsilon(d)));
    }
    return v;
}

std::vector<RankedLabel> rank(const std::map<LabelId, double>& weights, const LabelTable& labels,
                              std::size_t top_k) {
    std::vector<RankedLabel> out;
    for (const auto& [l, w] : weights) {
        out.push_back({l, w});
    }
    std::sort(out.begin(), out.end(), [&](const RankedLabel& a, const RankedLabel& b) {
        if (a.confidence != b.confidence) {
            return a.confidence > b.confidence;
        }
        if (a.label < labels.size() && b.label < labels.size()) {
            return labels.key(a.label) < labels.key(b.label);
        }
        return a.label < b.label;
    });
    if (out.size() > top_k) {
        out.resize(top_k);
    }
    return out;
}

void add_histogram_shares(std::map<LabelId, double>& acc, const Cluster& c, double weight) {
    double total = 0.0;
    for (const auto& [l, n] : c.label_histogram) {
        total += static_cast<double>(n);
    }
    if (total <= 0.0) {
        return;
    }
    for (const auto& [l, n] : c.label_histogram) {
        acc[l] += weight * static_cast<double>(n) / total;
    }
}

} // namespace

double Guess::top_confidence() const {
    if (out_of_world || ranked.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return ranked.front().confidence;
}

Guess guess(const ClusterTree& tree, const Vector& v, const GuessOptions& options) {
    if (v.dim() != tree.dim()) {
        throw DimensionError("guess: vector has dimension " + std::to_string(v.dim()) + ", tree has " +
                             std::to_string(tree.dim()));
    }
    Guess g;
    if (!tree.root().box.contains(v)) {
        g.out_of_world = true;
        g.source = GuessSource::OutOfWorld;
        return g;
    }
    const MetricKind metric = options.metric.value_or(tree.config().metric);
    const DimStats& stats = tree.global_stats();
    const std::vector<LeafRef> leaves = collect_leaves(tree.root());

    // Most specific containing leaf, Pure leaves first.
    const LeafRef* best_pure = nullptr;
    const LeafRef* best_mixed = nullptr;
    double pure_vol = std::numeric_limits<double>::infinity();
    double mixed_vol = std::numeric_limits<double>::infinity();
    for (const auto& leaf : leaves) {
        if (!leaf.node->box.contains(v)) {
            continue;
        }
        const double vol = log_volume(leaf.node->box, stats);
        if (leaf.node->status == ClusterStatus::Pure) {
            if (vol < pure_vol) {
                pure_vol = vol;
                best_pure = &leaf;
            }
        } else if (best_mixed == nullptr || leaf.depth > best_mixed->depth ||
                   (leaf.depth == best_mixed->depth && vol < mixed_vol)) {
            mixed_vol = vol;
            best_mixed = &leaf;
        }
    }

    std::map<LabelId, double> weights;
    if (best_pure != nullptr) {
        const auto& common = best_pure->node->common_labels;
        for (LabelId l : common) {
            weights[l] = 1.0 / static_cast<double>(common.size());
        }
        g.containing_path = best_pure->path;
        g.source = GuessSource::PureLeaf;
    } else if (best_mixed != nullptr) {
        add_histogram_shares(weights, *best_mixed->node, 1.0);
        g.containing_path = best_mixed->path;
        g.source = GuessSource::MixedLeaf;
    } else {
        std::vector<std::pair<double, const LeafRef*>> near;
        for (const auto& leaf : leaves) {
            try {
                near.emplace_back(point_to_box_distance(v, leaf.node->box, metric, &stats), &leaf);
            } catch (const NoSharedSubspaceError&) {
            }
        }
        std::stable_sort(near.begin(), near.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        if (near.size() > options.n_near) {
            near.resize(options.n_near);
        }
        double norm = 0.0;
        for (const auto& [d, leaf] : near) {
            norm += 1.0 / (d + kWeightEpsilon);
        }
        for (const auto& [d, leaf] : near) {
            add_histogram_shares(weights, *leaf->node, (1.0 / (d + kWeightEpsilon)) / norm);
        }
        g.containing_path = {0};
        g.source = GuessSource::NearestLeaves;
    }
    g.ranked = rank(weights, tree.labels(), options.top_k);
    return g;
}

ConfidenceHistogram confidence_histogram(std::span<const Guess> guesses, std::span<const double> thresholds) {
    if (guesses.empty()) {
        throw EmptyInputError("confidence_histogram: no guesses");
    }
    ConfidenceHistogram h;
    h.total = guesses.size();
    const double n = static_cast<double>(guesses.size());
    std::size_t nan = 0;
    for (const auto& g : guesses) {
        nan += std::isnan(g.top_confidence()) ? 1 : 0;
    }
    h.nan_fraction = static_cast<double>(nan) / n;
    for (double t : thresholds) {
        std::size_t above = 0;
        for (const auto& g : guesses) {
            above += g.top_confidence() > t ? 1 : 0; // NaN compares false
        }
        h.above.emplace_back(t, static_cast<double>(above) / n);
    }
    return h;
}

void write_confidence_table(std::ostream& os, const ConfidenceHistogram& h) {
    os << "condition\tfraction_percent\n";
    os << std::fixed << std::setprecision(1);
    for (const auto& [t, f] : h.above) {
        os << "p > " << std::setprecision(2) << t << '\t' << std::setprecision(1) << 100.0 * f << '\n';
    }
    os << "p = NaN\t" << 100.0 * h.nan_fraction << '\n';
    os.unsetf(std::ios_base::floatfield);
}

void write_assignments(std::ostream& os, const ClusterTree& tree, std::span<const Activation> inputs,
                       std::span<const Guess> guesses) {
    os << "source_id\tlabels\tconfidences\tout_of_world\n";
    const auto old_precision = os.precision(6);
    for (std::size_t i = 0; i < guesses.size(); ++i) {
        const Guess& g = guesses[i];
        os << inputs[i].source_id << '\t';
        for (std::size_t r = 0; r < g.ranked.size(); ++r) {
            os << (r ? ";" : "") << tree.labels().key(g.ranked[r].label);
        }
        os << '\t';
        if (g.out_of_world) {
            os << "NaN";
        }
        for (std::size_t r = 0; r < g.ranked.size(); ++r) {
            os << (r ? ";" : "") << g.ranked[r].confidence;
        }
        os << '\t' << (g.out_of_world ? "true" : "false") << '\n';
    }
    os.precision(old_precision);
}

} // namespace clusterflow
