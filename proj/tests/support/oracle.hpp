#pragma once

// Brute-force reference for guess(): enumerates every leaf directly, with no
// shared code from the library's inference path.

#include "clusterflow/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace cftest {

struct OracleGuess {
    bool out_of_world = false;
    std::map<clusterflow::LabelId, double> weights;
};

inline OracleGuess oracle_guess(const clusterflow::ClusterTree& tree, const clusterflow::Vector& v,
                                std::size_t n_near = 3) {
    using namespace clusterflow;
    OracleGuess out;
    if (!tree.root().box.contains(v)) {
        out.out_of_world = true;
        return out;
    }
    struct Leaf {
        const Cluster* c;
        std::size_t depth;
    };
    std::vector<Leaf> leaves;
    auto walk = [&](auto&& self, const Cluster& c, std::size_t depth) -> void {
        if (c.children.empty()) {
            if (depth > 0) leaves.push_back({&c, depth});
            return;
        }
        for (const auto& ch : c.children) self(self, ch, depth + 1);
    };
    walk(walk, tree.root(), 0);

    const DimStats& st = tree.global_stats();
    auto volume = [&](const BoundingBox& b) {
        double lv = 0;
        for (std::size_t d = 0; d < b.dim(); ++d) {
            const double w = b.active(d) ? b.hi(d) - b.lo(d) : st.range(d);
            lv += std::log(std::max(w, st.epsilon(d)));
        }
        return lv;
    };
    auto shares = [](const Cluster& c, double weight, std::map<LabelId, double>& acc) {
        double n = 0;
        for (const auto& [l, k] : c.label_histogram) n += static_cast<double>(k);
        for (const auto& [l, k] : c.label_histogram) acc[l] += weight * static_cast<double>(k) / n;
    };

    const Leaf* pure = nullptr;
    const Leaf* mixed = nullptr;
    for (const auto& leaf : leaves) {
        if (!leaf.c->box.contains(v)) continue;
        if (leaf.c->status == ClusterStatus::Pure) {
            if (!pure || volume(leaf.c->box) < volume(pure->c->box)) pure = &leaf;
        } else if (!mixed || leaf.depth > mixed->depth ||
                   (leaf.depth == mixed->depth && volume(leaf.c->box) < volume(mixed->c->box))) {
            mixed = &leaf;
        }
    }
    if (pure) {
        for (auto l : pure->c->common_labels) out.weights[l] = 1.0 / static_cast<double>(pure->c->common_labels.size());
        return out;
    }
    if (mixed) {
        shares(*mixed->c, 1.0, out.weights);
        return out;
    }

    const MetricKind metric = tree.config().metric;
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        // Clamp gap per active, present, constraining dimension.
        std::vector<double> gap;
        for (std::size_t d = 0; d < v.dim(); ++d) {
            const auto& b = leaves[i].c->box;
            if (!b.active(d) || !v.present(d)) continue;
            if (b.mode() == BoxMode::LowerDimensional && v.value(d) == 0.0) {
                gap.push_back(0.0);
                continue;
            }
            double g = std::max({b.lo(d) - v.value(d), v.value(d) - b.hi(d), 0.0});
            if (metric == MetricKind::Mahalanobis) g /= st.stddev(d);
            gap.push_back(g);
        }
        if (gap.empty()) continue;
        double d = 0;
        switch (metric) {
        case MetricKind::L0: for (double g : gap) d += g != 0.0; break;
        case MetricKind::L1: for (double g : gap) d += g; break;
        case MetricKind::Linf: for (double g : gap) d = std::max(d, g); break;
        default: for (double g : gap) d += g * g; d = std::sqrt(d); break;
        }
        dist.emplace_back(d, i);
    }
    std::sort(dist.begin(), dist.end());
    dist.resize(std::min(dist.size(), n_near));
    double z = 0;
    for (const auto& [d, i] : dist) z += 1.0 / (d + 1e-12);
    for (const auto& [d, i] : dist) shares(*leaves[i].c, (1.0 / (d + 1e-12)) / z, out.weights);
    return out;
}

/// Largest absolute difference between a guess and the oracle; infinity on a structural mismatch.
inline double oracle_gap(const clusterflow::Guess& g, const OracleGuess& o) {
    if (g.out_of_world != o.out_of_world) return std::numeric_limits<double>::infinity();
    if (o.out_of_world) return g.ranked.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    std::map<clusterflow::LabelId, double> got;
    for (const auto& r : g.ranked) got[r.label] = r.confidence;
    if (got.size() != o.weights.size()) return std::numeric_limits<double>::infinity();
    double worst = 0;
    for (const auto& [l, w] : o.weights) {
        auto it = got.find(l);
        if (it == got.end()) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::abs(it->second - w));
    }
    return worst;
}

} // namespace cftest
