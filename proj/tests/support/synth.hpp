#pragma once

// Synthetic data for tests. Everything is seeded; no global state.

#include "clusterflow/tree.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cftest {

using clusterflow::Activation;
using clusterflow::LabelId;
using clusterflow::Vector;

inline Activation item(std::vector<double> x, std::vector<LabelId> labels, std::string id = {}) {
    return clusterflow::make_activation(Vector(std::move(x)), std::move(labels), std::move(id));
}

/// n points per class, Gaussian around per-class centres spaced `gap` apart on axis 0.
inline std::vector<Activation> gaussian_classes(std::size_t classes, std::size_t per_class, std::size_t dim,
                                                double gap, double stddev, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, stddev);
    std::vector<Activation> out;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            std::vector<double> x(dim);
            for (std::size_t d = 0; d < dim; ++d) {
                x[d] = noise(rng) + (d == 0 ? gap * static_cast<double>(c) : 0.0);
            }
            out.push_back(item(std::move(x), {static_cast<LabelId>(c)},
                               "c" + std::to_string(c) + "_" + std::to_string(i)));
        }
    }
    return out;
}

/// One class drawn from N(centre, stddev^2 I) with a fixed label.
inline std::vector<Activation> gaussian_class(std::size_t n, std::size_t dim, double centre, double stddev,
                                              LabelId label, std::uint64_t seed, const std::string& prefix) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(centre, stddev);
    std::vector<Activation> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(dim);
        for (auto& v : x) {
            v = noise(rng);
        }
        out.push_back(item(std::move(x), {label}, prefix + std::to_string(i)));
    }
    return out;
}

/**
 * Chemistry-style table: multi-label rows, a share of missing cells. Each row
 * carries 1..3 labels from `n_labels`; features are a noisy function of the
 * first label so clusters exist.
 */
inline std::vector<Activation> incomplete_multilabel(std::size_t n, std::size_t dim, std::size_t n_labels,
                                                     double missing_share, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n_labels - 1);
    std::uniform_int_distribution<std::size_t> extra(0, 2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<Activation> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<LabelId> labels{static_cast<LabelId>(pick(rng))};
        for (std::size_t e = extra(rng); e > 0; --e) {
            labels.push_back(static_cast<LabelId>(pick(rng)));
        }
        std::vector<std::optional<double>> x(dim);
        bool any = false;
        for (std::size_t d = 0; d < dim; ++d) {
            const double v = noise(rng) + static_cast<double>((labels.front() * (d + 1)) % 7);
            if (u(rng) >= missing_share) {
                x[d] = v;
                any = true;
            }
        }
        if (!any) {
            x[0] = noise(rng);
        }
        out.push_back(clusterflow::make_activation(Vector::from_optional(x), labels, "row" + std::to_string(i)));
    }
    return out;
}

} // namespace cftest
