#pragma once

#include "clusterflow/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace clusterflow {

enum class SeedAlgorithm { KMeans, KMeansPP, DetK };

SeedAlgorithm parse_seed_algorithm(std::string_view name);
std::string_view to_string(SeedAlgorithm alg) noexcept;

struct SeedConfig {
    SeedAlgorithm algorithm = SeedAlgorithm::DetK;
    std::size_t k = 2;      ///< fixed k for kmeans / kmeans++
    std::size_t k_max = 8;  ///< upper bound for detK
    std::size_t max_iters = 100;
    std::uint64_t rng_seed = 0;
    double tolerance = 1e-9;

    /// Throws ConfigError on out-of-range fields.
    void validate() const;
};

struct FlatClustering {
    std::vector<Vector> centroids;
    std::vector<std::size_t> assignment; ///< point index -> centroid index
    double inertia = 0.0;                ///< sum of squared L2 distances to assigned centroids

    std::vector<double> inertia_history; ///< inertia after every Lloyd iteration
    std::vector<double> fk_curve;        ///< detK only: f(K) for K = 1..k_max

    std::size_t k() const noexcept { return centroids.size(); }
};

/// Number of distinct points after per-dimension mean imputation.
std::size_t distinct_count(std::span<const Vector> points);

/**
 * Lloyd's k-means under squared L2. Missing entries are mean-imputed per
 * dimension for the centroid arithmetic. Initialization follows
 * `cfg.algorithm`: uniform distinct points for KMeans, D^2 sampling otherwise.
 *
 * Throws EmptyInputError on no points and DegenerateSeedError when k exceeds
 * the number of distinct points.
 */
FlatClustering kmeans(std::span<const Vector> points, std::size_t k, const SeedConfig& cfg);

inline FlatClustering kmeans(std::span<const Vector> points, const SeedConfig& cfg) {
    return kmeans(points, cfg.k, cfg);
}

/// k-means++ seeding: first centroid uniform, then D^2-weighted sampling.
std::vector<Vector> kmeanspp_init(std::span<const Vector> points, std::size_t k,
                                  std::uint64_t rng_seed);

/// Pham-Dimov-Nguyen weight factor alpha_K for data of dimension `dim`.
double detk_alpha(std::size_t k, std::size_t dim);

/**
 * f(K) evaluation from the per-K inertias S_1..S_n (index 0 holds S_1).
 * f(1) = 1; f(K) = S_K / (alpha_K S_{K-1}) when S_{K-1} > 0, else 1.
 */
std::vector<double> detk_curve(std::span<const double> inertias, std::size_t dim);

/// Smallest K with f(K) < 0.85, else 1.
std::size_t detk_select(std::span<const double> fk);

inline constexpr double kDetKThreshold = 0.85;

/// Runs k-means++ k-means for K = 1..min(k_max, distinct) and keeps the f(K) winner.
FlatClustering detk(std::span<const Vector> points, const SeedConfig& cfg);

/// Dispatch on `cfg.algorithm`.
FlatClustering seed(std::span<const Vector> points, const SeedConfig& cfg);

} // namespace clusterflow
