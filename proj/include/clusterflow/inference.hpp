#pragma once

#include "clusterflow/tree.hpp"

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

namespace clusterflow {

struct RankedLabel {
    LabelId label = 0;
    double confidence = 0.0; ///< in [0, 1], or NaN when out of world
};

/// How a guess was reached.
enum class GuessSource { OutOfWorld, PureLeaf, MixedLeaf, NearestLeaves };

struct Guess {
    std::vector<RankedLabel> ranked;
    std::vector<std::size_t> containing_path; ///< preorder node ids from the root
    bool out_of_world = false;
    GuessSource source = GuessSource::OutOfWorld;

    /// Confidence of the top label; NaN when out of world.
    double top_confidence() const;
};

struct GuessOptions {
    std::size_t top_k = 5;
    std::size_t n_near = 3;
    std::optional<MetricKind> metric; ///< defaults to the build metric
};

inline constexpr double kWeightEpsilon = 1e-12;

/**
 * Guesses labels for `v`:
 *  - outside the world box: no labels, NaN confidence;
 *  - inside a Pure leaf: its common labels sharing confidence 1;
 *  - inside an IrreducibleMixed leaf only: histogram shares, majority first;
 *  - otherwise: the `n_near` nearest leaves, weighted by 1 / (d + 1e-12)
 *    and spread over each leaf's histogram shares.
 *
 * When several leaves contain `v`, the one with the smallest box volume wins.
 * Equal confidences are ordered by label key. Throws DimensionError.
 */
Guess guess(const ClusterTree& tree, const Vector& v, const GuessOptions& options = {});

/**
 * Fraction of guesses whose top confidence exceeds each threshold, plus the
 * fraction with NaN confidence. Throws EmptyInputError.
 */
struct ConfidenceHistogram {
    std::vector<std::pair<double, double>> above; ///< (threshold, fraction)
    double nan_fraction = 0.0;
    std::size_t total = 0;
};

ConfidenceHistogram confidence_histogram(std::span<const Guess> guesses, std::span<const double> thresholds);

/// The rows reported for overconfidence checks: 0.95, 0.90, 0.50, 0.20.
inline constexpr double kDefaultThresholds[] = {0.95, 0.90, 0.50, 0.20};

void write_confidence_table(std::ostream& os, const ConfidenceHistogram& h);

/// One row per input: source_id, labels, confidences, out_of_world (tab separated).
void write_assignments(std::ostream& os, const ClusterTree& tree, std::span<const Activation> inputs,
                       std::span<const Guess> guesses);

} // namespace clusterflow
