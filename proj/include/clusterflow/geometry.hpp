#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clusterflow {

/**
 * A feature vector whose entries may be missing.
 *
 * Missing entries are stored internally as quiet NaN; present entries are
 * always finite. NaN is never accepted as a data value.
 */
class Vector {
public:
    Vector() = default;

    /// Complete vector of `dim` zeros.
    explicit Vector(std::size_t dim);

    /// Complete vector. Throws std::invalid_argument on non-finite values.
    explicit Vector(std::vector<double> values);

    Vector(std::initializer_list<std::optional<double>> entries);

    static Vector from_optional(std::span<const std::optional<double>> entries);

    std::size_t dim() const noexcept { return values_.size(); }
    bool present(std::size_t i) const noexcept;
    std::optional<double> operator[](std::size_t i) const;

    /// Value of a present entry. Undefined for missing entries.
    double value(std::size_t i) const noexcept { return values_[i]; }

    void set(std::size_t i, std::optional<double> v);

    bool complete() const noexcept;
    std::size_t missing_count() const noexcept;

    /// Raw storage, NaN marks a missing entry.
    std::span<const double> raw() const noexcept { return values_; }

    /// Entry-wise equality where missing == missing. Bitwise on present values.
    friend bool operator==(const Vector& a, const Vector& b) noexcept;

private:
    std::vector<double> values_;
};

enum class MetricKind { L0, L1, L2, Linf, Mahalanobis };

MetricKind parse_metric(std::string_view name);
std::string_view to_string(MetricKind kind) noexcept;

/**
 * Running per-dimension statistics with missing-value support.
 *
 * The standard deviation is floored at `epsilon(d)`, which is 1e-9 times the
 * observed range of the dimension, or 1e-9 when the range is degenerate.
 */
class DimStats {
public:
    DimStats() = default;
    explicit DimStats(std::size_t dim);

    void add(const Vector& v);

    std::size_t dim() const noexcept { return mean_.size(); }
    std::size_t count() const noexcept { return count_; }
    std::size_t present_count(std::size_t d) const { return present_.at(d); }

    double mean(std::size_t d) const { return mean_.at(d); }
    double stddev(std::size_t d) const;
    double min(std::size_t d) const { return min_.at(d); }
    double max(std::size_t d) const { return max_.at(d); }

    /// max - min over present values; 0 when fewer than one present value.
    double range(std::size_t d) const;
    double epsilon(std::size_t d) const;

    /// Serialization support. Restores the exact accumulator state.
    struct State {
        std::size_t count = 0;
        std::vector<std::size_t> present;
        std::vector<double> mean;
        std::vector<double> m2;
        std::vector<double> min;
        std::vector<double> max;
    };
    State state() const;
    static DimStats from_state(State s);

    friend bool operator==(const DimStats&, const DimStats&) = default;

private:
    std::size_t count_ = 0;
    std::vector<std::size_t> present_;
    std::vector<double> mean_;
    std::vector<double> m2_;
    std::vector<double> min_;
    std::vector<double> max_;
};

inline constexpr double kStddevFloorScale = 1e-9;

/// ||v||_p for p in {0, 1, 2, inf}. Throws MissingDataError on incomplete input.
double lp_norm(const Vector& v, MetricKind p);

struct SubspaceDistance {
    double value = 0.0;
    std::size_t dims = 0; ///< number of dimensions present in both inputs
};

/**
 * Distance over the dimensions present in both vectors, without any
 * renormalization for the size of that subspace.
 *
 * Mahalanobis divides each difference by the stddev in `stats` and then takes
 * the L2 norm. Throws DimensionError, NoSharedSubspaceError, or ConfigError
 * (Mahalanobis without stats).
 */
SubspaceDistance subspace_distance(const Vector& a, const Vector& b, MetricKind metric,
                                   const DimStats* stats = nullptr);

double distance(const Vector& a, const Vector& b, MetricKind metric,
                const DimStats* stats = nullptr);

/// Numerically stabilized softmax. Throws EmptyInputError on empty input.
std::vector<double> softmax(std::span<const double> x);

/// x / sum(x). Throws EmptyInputError on empty input, std::domain_error on zero sum.
std::vector<double> linear_normalize(std::span<const double> x);

enum class BoxMode { Full, LowerDimensional, PartialDimensional };

BoxMode parse_box_mode(std::string_view name);
std::string_view to_string(BoxMode mode) noexcept;

/**
 * Axis-aligned hypercuboid over a subset of active dimensions.
 *
 * - Full: every dimension activates on the first extension.
 * - LowerDimensional: a dimension activates only through a non-zero value, and
 *   zero entries in a query never exclude it.
 * - PartialDimensional: a dimension activates only through a present value,
 *   and missing entries in a query never exclude it.
 *
 * A box with no active dimension contains everything; `valid()` is false for it.
 */
class BoundingBox {
public:
    BoundingBox() = default;
    BoundingBox(BoxMode mode, std::size_t dim);

    BoxMode mode() const noexcept { return mode_; }
    std::size_t dim() const noexcept { return lo_.size(); }

    bool active(std::size_t d) const { return active_.at(d) != 0; }
    std::vector<std::size_t> active_dims() const;
    std::size_t active_count() const noexcept;
    bool valid() const noexcept { return active_count() > 0; }

    double lo(std::size_t d) const { return lo_.at(d); }
    double hi(std::size_t d) const { return hi_.at(d); }

    /// Activates `d` (if inactive) and sets its bounds. Requires lo <= hi.
    void set_bounds(std::size_t d, double lo, double hi);

    bool contains(const Vector& v) const;

    /// Widens the box to contain `v` under the mode rules.
    void extend(const Vector& v);

    /// Union with another box of the same mode and dimensionality.
    void merge(const BoundingBox& other);

    /// Moves every active bound outward by fraction * (hi - lo), or
    /// fraction * stats.epsilon(d) for zero-width dimensions.
    BoundingBox expanded(double fraction, const DimStats& stats) const;

    /// Metric length of the extent vector (hi - lo) over the active dimensions.
    double diagonal(MetricKind metric, const DimStats* stats = nullptr) const;

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

private:
    bool constrains(const Vector& v, std::size_t d) const;

    BoxMode mode_ = BoxMode::Full;
    std::vector<char> active_;
    std::vector<double> lo_;
    std::vector<double> hi_;
};

/**
 * Distance from `v` to the nearest point of `box`: the metric length of the
 * per-dimension clamp gap over active dimensions where `v` is present.
 * Zero exactly when `box.contains(v)`.
 *
 * Throws NoSharedSubspaceError when no active dimension has a present value.
 */
double point_to_box_distance(const Vector& v, const BoundingBox& box, MetricKind metric,
                             const DimStats* stats = nullptr);

} // namespace clusterflow
