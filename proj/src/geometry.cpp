#include "clusterflow/geometry.hpp"

#include "clusterflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace clusterflow {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

double checked(double x) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument("vector entries must be finite");
    }
    return x;
}

// Accumulates per-dimension gaps into a metric length.
class GapNorm {
public:
    GapNorm(MetricKind kind, const DimStats* stats) : kind_(kind), stats_(stats) {
        if (kind_ == MetricKind::Mahalanobis && stats_ == nullptr) {
            throw ConfigError("Mahalanobis metric requires per-dimension statistics");
        }
    }

    void add(std::size_t d, double gap) {
        gap = std::fabs(gap);
        switch (kind_) {
        case MetricKind::L0:
            acc_ += gap != 0.0 ? 1.0 : 0.0;
            break;
        case MetricKind::L1:
            acc_ += gap;
            break;
        case MetricKind::L2:
            acc_ += gap * gap;
            break;
        case MetricKind::Linf:
            acc_ = std::max(acc_, gap);
            break;
        case MetricKind::Mahalanobis: {
            const double z = gap / stats_->stddev(d);
            acc_ += z * z;
            break;
        }
        }
        ++dims_;
    }

    std::size_t dims() const { return dims_; }

    double result() const {
        if (kind_ == MetricKind::L2 || kind_ == MetricKind::Mahalanobis) {
            return std::sqrt(acc_);
        }
        return acc_;
    }

private:
    MetricKind kind_;
    const DimStats* stats_;
    double acc_ = 0.0;
    std::size_t dims_ = 0;
};

} // namespace

// ---------------------------------------------------------------- Vector

Vector::Vector(std::size_t dim) : values_(dim, 0.0) {}

Vector::Vector(std::vector<double> values) : values_(std::move(values)) {
    for (double x : values_) {
        checked(x);
    }
}

Vector::Vector(std::initializer_list<std::optional<double>> entries)
    : Vector(from_optional(std::span<const std::optional<double>>(entries.begin(), entries.size()))) {}

Vector Vector::from_optional(std::span<const std::optional<double>> entries) {
    Vector v;
    v.values_.reserve(entries.size());
    for (const auto& e : entries) {
        v.values_.push_back(e ? checked(*e) : kMissing);
    }
    return v;
}

bool Vector::present(std::size_t i) const noexcept {
    return !std::isnan(values_[i]);
}

std::optional<double> Vector::operator[](std::size_t i) const {
    const double x = values_.at(i);
    if (std::isnan(x)) {
        return std::nullopt;
    }
    return x;
}

void Vector::set(std::size_t i, std::optional<double> v) {
    values_.at(i) = v ? checked(*v) : kMissing;
}

bool Vector::complete() const noexcept {
    return std::none_of(values_.begin(), values_.end(), [](double x) { return std::isnan(x); });
}

std::size_t Vector::missing_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](double x) { return std::isnan(x); }));
}

bool operator==(const Vector& a, const Vector& b) noexcept {
    if (a.dim() != b.dim()) {
        return false;
    }
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const bool pa = a.present(i);
        if (pa != b.present(i) || (pa && a.values_[i] != b.values_[i])) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- Metric

MetricKind parse_metric(std::string_view name) {
    if (name == "l0") return MetricKind::L0;
    if (name == "l1") return MetricKind::L1;
    if (name == "l2") return MetricKind::L2;
    if (name == "linf") return MetricKind::Linf;
    if (name == "mahalanobis") return MetricKind::Mahalanobis;
    throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(MetricKind kind) noexcept {
    switch (kind) {
    case MetricKind::L0: return "l0";
    case MetricKind::L1: return "l1";
    case MetricKind::L2: return "l2";
    case MetricKind::Linf: return "linf";
    case MetricKind::Mahalanobis: return "mahalanobis";
    }
    return "?";
}

// ---------------------------------------------------------------- DimStats

DimStats::DimStats(std::size_t dim)
    : present_(dim, 0),
      mean_(dim, 0.0),
      m2_(dim, 0.0),
      min_(dim, std::numeric_limits<double>::infinity()),
      max_(dim, -std::numeric_limits<double>::infinity()) {}

void DimStats::add(const Vector& v) {
    if (v.dim() != dim()) {
        throw DimensionError("DimStats::add: dimension mismatch");
    }
    ++count_;
    for (std::size_t d = 0; d < dim(); ++d) {
        if (!v.present(d)) {
            continue;
        }
        const double x = v.value(d);
        const double n = static_cast<double>(++present_[d]);
        const double delta = x - mean_[d];
        mean_[d] += delta / n;
        m2_[d] += delta * (x - mean_[d]);
        min_[d] = std::min(min_[d], x);
        max_[d] = std::max(max_[d], x);
    }
}

double DimStats::range(std::size_t d) const {
    return present_.at(d) > 0 ? max_[d] - min_[d] : 0.0;
}

double DimStats::epsilon(std::size_t d) const {
    const double r = range(d);
    return kStddevFloorScale * (r > 0.0 ? r : 1.0);
}

double DimStats::stddev(std::size_t d) const {
    const std::size_t n = present_.at(d);
    const double sd = n > 0 ? std::sqrt(m2_[d] / static_cast<double>(n)) : 0.0;
    return std::max(sd, epsilon(d));
}

DimStats::State DimStats::state() const {
    return State{count_, present_, mean_, m2_, min_, max_};
}

DimStats DimStats::from_state(State s) {
    const std::size_t n = s.mean.size();
    if (s.present.size() != n || s.m2.size() != n || s.min.size() != n || s.max.size() != n) {
        throw ParseError("DimStats: inconsistent state lengths");
    }
    DimStats out;
    out.count_ = s.count;
    out.present_ = std::move(s.present);
    out.mean_ = std::move(s.mean);
    out.m2_ = std::move(s.m2);
    out.min_ = std::move(s.min);
    out.max_ = std::move(s.max);
    return out;
}

// ---------------------------------------------------------------- norms and distances

double lp_norm(const Vector& v, MetricKind p) {
    if (p == MetricKind::Mahalanobis) {
        throw ConfigError("lp_norm: Mahalanobis is not an L^p norm");
    }
    if (!v.complete()) {
        throw MissingDataError("lp_norm: vector has missing entries");
    }
    GapNorm norm(p, nullptr);
    for (std::size_t d = 0; d < v.dim(); ++d) {
        norm.add(d, v.value(d));
    }
    return norm.result();
}

SubspaceDistance subspace_distance(const Vector& a, const Vector& b, MetricKind metric,
                                   const DimStats* stats) {
    if (a.dim() != b.dim()) {
        throw DimensionError("distance: dimension mismatch");
    }
    if (stats != nullptr && metric == MetricKind::Mahalanobis && stats->dim() != a.dim()) {
        throw DimensionError("distance: statistics dimension mismatch");
    }
    GapNorm norm(metric, stats);
    for (std::size_t d = 0; d < a.dim(); ++d) {
        if (a.present(d) && b.present(d)) {
            norm.add(d, a.value(d) - b.value(d));
        }
    }
    if (norm.dims() == 0 && a.dim() > 0) {
        throw NoSharedSubspaceError("distance: no dimension present in both vectors");
    }
    return {norm.result(), norm.dims()};
}

double distance(const Vector& a, const Vector& b, MetricKind metric, const DimStats* stats) {
    return subspace_distance(a, b, metric, stats).value;
}

std::vector<double> softmax(std::span<const double> x) {
    if (x.empty()) {
        throw EmptyInputError("softmax: empty input");
    }
    const double top = *std::max_element(x.begin(), x.end());
    std::vector<double> out(x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - top);
        total += out[i];
    }
    for (double& y : out) {
        y /= total;
    }
    return out;
}

std::vector<double> linear_normalize(std::span<const double> x) {
    if (x.empty()) {
        throw EmptyInputError("linear_normalize: empty input");
    }
    double total = 0.0;
    for (double v : x) {
        total += v;
    }
    if (total == 0.0) {
        throw std::domain_error("linear_normalize: entries sum to zero");
    }
    std::vector<double> out(x.begin(), x.end());
    for (double& y : out) {
        y /= total;
    }
    return out;
}

// ---------------------------------------------------------------- BoundingBox

BoxMode parse_box_mode(std::string_view name) {
    if (name == "full") return BoxMode::Full;
    if (name == "lower") return BoxMode::LowerDimensional;
    if (name == "partial") return BoxMode::PartialDimensional;
    throw ConfigError("unknown box mode '" + std::string(name) + "'");
}

std::string_view to_string(BoxMode mode) noexcept {
    switch (mode) {
    case BoxMode::Full: return "full";
    case BoxMode::LowerDimensional: return "lower";
    case BoxMode::PartialDimensional: return "partial";
    }
    return "?";
}

BoundingBox::BoundingBox(BoxMode mode, std::size_t dim)
    : mode_(mode), active_(dim, 0), lo_(dim, 0.0), hi_(dim, 0.0) {}

std::vector<std::size_t> BoundingBox::active_dims() const {
    std::vector<std::size_t> out;
    for (std::size_t d = 0; d < active_.size(); ++d) {
        if (active_[d]) {
            out.push_back(d);
        }
    }
    return out;
}

std::size_t BoundingBox::active_count() const noexcept {
    return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), char{1}));
}

void BoundingBox::set_bounds(std::size_t d, double lo, double hi) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw std::invalid_argument("BoundingBox::set_bounds: need finite lo <= hi");
    }
    active_.at(d) = 1;
    lo_[d] = lo;
    hi_[d] = hi;
}

bool BoundingBox::constrains(const Vector& v, std::size_t d) const {
    if (!active_[d] || !v.present(d)) {
        return false;
    }
    return mode_ != BoxMode::LowerDimensional || v.value(d) != 0.0;
}

bool BoundingBox::contains(const Vector& v) const {
    const std::size_t n = std::min(v.dim(), dim());
    for (std::size_t d = 0; d < n; ++d) {
        if (constrains(v, d) && (v.value(d) < lo_[d] || v.value(d) > hi_[d])) {
            return false;
        }
    }
    return true;
}

void BoundingBox::extend(const Vector& v) {
    if (v.dim() != dim()) {
        throw DimensionError("BoundingBox::extend: dimension mismatch");
    }
    if (mode_ != BoxMode::PartialDimensional && !v.complete()) {
        throw MissingDataError("BoundingBox::extend: missing entries need a partial-dimensional box");
    }
    for (std::size_t d = 0; d < dim(); ++d) {
        if (!v.present(d)) {
            continue;
        }
        const double x = v.value(d);
        if (mode_ == BoxMode::LowerDimensional && x == 0.0) {
            continue;
        }
        if (!active_[d]) {
            active_[d] = 1;
            lo_[d] = x;
            hi_[d] = x;
        } else {
            lo_[d] = std::min(lo_[d], x);
            hi_[d] = std::max(hi_[d], x);
        }
    }
}

void BoundingBox::merge(const BoundingBox& other) {
    if (other.dim() != dim() || other.mode_ != mode_) {
        throw DimensionError("BoundingBox::merge: incompatible boxes");
    }
    for (std::size_t d = 0; d < dim(); ++d) {
        if (!other.active_[d]) {
            continue;
        }
        if (!active_[d]) {
            active_[d] = 1;
            lo_[d] = other.lo_[d];
            hi_[d] = other.hi_[d];
        } else {
            lo_[d] = std::min(lo_[d], other.lo_[d]);
            hi_[d] = std::max(hi_[d], other.hi_[d]);
        }
    }
}

BoundingBox BoundingBox::expanded(double fraction, const DimStats& stats) const {
    if (!(fraction >= 0.0)) {
        throw std::invalid_argument("BoundingBox::expanded: fraction must be >= 0");
    }
    BoundingBox out = *this;
    for (std::size_t d = 0; d < dim(); ++d) {
        if (!active_[d]) {
            continue;
        }
        const double width = hi_[d] - lo_[d];
        const double eps = d < stats.dim() ? stats.epsilon(d) : kStddevFloorScale;
        const double delta = fraction * (width > 0.0 ? width : eps);
        out.lo_[d] = lo_[d] - delta;
        out.hi_[d] = hi_[d] + delta;
    }
    return out;
}

double BoundingBox::diagonal(MetricKind metric, const DimStats* stats) const {
    GapNorm norm(metric, stats);
    for (std::size_t d = 0; d < dim(); ++d) {
        if (active_[d]) {
            norm.add(d, hi_[d] - lo_[d]);
        }
    }
    return norm.result();
}

double point_to_box_distance(const Vector& v, const BoundingBox& box, MetricKind metric,
                             const DimStats* stats) {
    if (v.dim() != box.dim()) {
        throw DimensionError("point_to_box_distance: dimension mismatch");
    }
    GapNorm norm(metric, stats);
    for (std::size_t d = 0; d < v.dim(); ++d) {
        if (!box.active(d) || !v.present(d)) {
            continue;
        }
        const double x = v.value(d);
        double gap = 0.0;
        if (box.mode() != BoxMode::LowerDimensional || x != 0.0) {
            gap = std::max({box.lo(d) - x, 0.0, x - box.hi(d)});
        }
        norm.add(d, gap);
    }
    if (norm.dims() == 0) {
        throw NoSharedSubspaceError("point_to_box_distance: no active dimension is present in the point");
    }
    return norm.result();
}

} // namespace clusterflow
