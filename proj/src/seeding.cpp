#include "clusterflow/seeding.hpp"

#include "clusterflow/errors.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace clusterflow {

namespace {

// Row-major dense copy of the points with missing entries mean-imputed.
struct Dense {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> data;

    const double* row(std::size_t i) const { return data.data() + i * dim; }
};

Dense impute(std::span<const Vector> points) {
    Dense out;
    out.n = points.size();
    out.dim = points.empty() ? 0 : points.front().dim();
    std::vector<double> sum(out.dim, 0.0);
    std::vector<std::size_t> cnt(out.dim, 0);
    for (const auto& p : points) {
        if (p.dim() != out.dim) {
            throw DimensionError("seeding: points have inconsistent dimensions");
        }
        for (std::size_t d = 0; d < out.dim; ++d) {
            if (p.present(d)) {
                sum[d] += p.value(d);
                ++cnt[d];
            }
        }
    }
    out.data.resize(out.n * out.dim);
    for (std::size_t i = 0; i < out.n; ++i) {
        for (std::size_t d = 0; d < out.dim; ++d) {
            const Vector& p = points[i];
            out.data[i * out.dim + d] =
                p.present(d) ? p.value(d) : (cnt[d] > 0 ? sum[d] / static_cast<double>(cnt[d]) : 0.0);
        }
    }
    return out;
}

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double g = a[d] - b[d];
        s += g * g;
    }
    return s;
}

std::size_t count_distinct(const Dense& x) {
    std::vector<std::size_t> idx(x.n);
    std::iota(idx.begin(), idx.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(x.row(a), x.row(a) + x.dim, x.row(b), x.row(b) + x.dim);
    };
    auto equal = [&](std::size_t a, std::size_t b) { return std::equal(x.row(a), x.row(a) + x.dim, x.row(b)); };
    std::sort(idx.begin(), idx.end(), less);
    return static_cast<std::size_t>(std::unique(idx.begin(), idx.end(), equal) - idx.begin());
}

void check_k(const Dense& x, std::size_t k) {
    if (x.n == 0) {
        throw EmptyInputError("seeding: no points");
    }
    if (x.dim == 0) {
        throw DimensionError("seeding: points have no dimensions");
    }
    if (k == 0) {
        throw ConfigError("seeding: k must be >= 1");
    }
    if (k > x.n || k > count_distinct(x)) {
        throw DegenerateSeedError("seeding: k=" + std::to_string(k) + " exceeds the number of distinct points");
    }
}

std::vector<double> uniform_init(const Dense& x, std::size_t k, std::uint64_t seed) {
    detail::Rng rng(seed);
    std::vector<std::size_t> order(x.n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = x.n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.index(i)]);
    }
    std::vector<double> centroids;
    std::size_t chosen = 0;
    for (std::size_t i : order) {
        if (chosen == k) {
            break;
        }
        bool dup = false;
        for (std::size_t c = 0; c < chosen && !dup; ++c) {
            dup = std::equal(x.row(i), x.row(i) + x.dim, centroids.data() + c * x.dim);
        }
        if (!dup) {
            centroids.insert(centroids.end(), x.row(i), x.row(i) + x.dim);
            ++chosen;
        }
    }
    return centroids;
}

std::vector<double> pp_init(const Dense& x, std::size_t k, std::uint64_t seed) {
    detail::Rng rng(seed);
    std::vector<double> centroids;
    centroids.reserve(k * x.dim);
    const std::size_t first = rng.index(x.n);
    centroids.insert(centroids.end(), x.row(first), x.row(first) + x.dim);

    std::vector<double> nearest(x.n);
    for (std::size_t i = 0; i < x.n; ++i) {
        nearest[i] = sq_dist(x.row(i), x.row(first), x.dim);
    }
    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
        if (!(total > 0.0)) {
            throw DegenerateSeedError("kmeans++: no further distinct point to seed from");
        }
        const double target = rng.uniform() * total;
        double cum = 0.0;
        std::size_t pick = x.n;
        for (std::size_t i = 0; i < x.n; ++i) {
            if (nearest[i] <= 0.0) {
                continue;
            }
            cum += nearest[i];
            pick = i;
            if (cum > target) {
                break;
            }
        }
        centroids.insert(centroids.end(), x.row(pick), x.row(pick) + x.dim);
        const double* cp = centroids.data() + c * x.dim;
        for (std::size_t i = 0; i < x.n; ++i) {
            nearest[i] = std::min(nearest[i], sq_dist(x.row(i), cp, x.dim));
        }
    }
    return centroids;
}

class Lloyd {
public:
    Lloyd(const Dense& x, std::vector<double> centroids)
        : x_(x), k_(centroids.size() / x.dim), c_(std::move(centroids)), assign_(x.n, 0), dist_(x.n, 0.0) {}

    double assign() {
        double inertia = 0.0;
        for (std::size_t i = 0; i < x_.n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k_; ++c) {
                const double d = sq_dist(x_.row(i), centroid(c), x_.dim);
                if (d < best) { // strict: lowest index wins ties
                    best = d;
                    arg = c;
                }
            }
            assign_[i] = arg;
            dist_[i] = best;
            inertia += best;
        }
        return inertia;
    }

    // Moves each empty centroid onto the point farthest from its own centroid.
    // Returns the inertia after the moves.
    double repair_empty(double inertia) {
        for (;;) {
            std::vector<std::size_t> sizes = cluster_sizes();
            auto empty = std::find(sizes.begin(), sizes.end(), std::size_t{0});
            if (empty == sizes.end()) {
                return inertia;
            }
            std::size_t far = x_.n;
            for (std::size_t i = 0; i < x_.n; ++i) {
                if (sizes[assign_[i]] > 1 && dist_[i] > 0.0 && (far == x_.n || dist_[i] > dist_[far])) {
                    far = i;
                }
            }
            if (far == x_.n) {
                return inertia;
            }
            const auto c = static_cast<std::size_t>(empty - sizes.begin());
            std::copy(x_.row(far), x_.row(far) + x_.dim, c_.begin() + static_cast<std::ptrdiff_t>(c * x_.dim));
            inertia -= dist_[far];
            assign_[far] = c;
            dist_[far] = 0.0;
        }
    }

    // Recomputes centroids as member means; returns the largest centroid shift.
    double update() {
        std::vector<double> next(c_.size(), 0.0);
        std::vector<std::size_t> sizes = cluster_sizes();
        for (std::size_t i = 0; i < x_.n; ++i) {
            double* dst = next.data() + assign_[i] * x_.dim;
            for (std::size_t d = 0; d < x_.dim; ++d) {
                dst[d] += x_.row(i)[d];
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k_; ++c) {
            double* dst = next.data() + c * x_.dim;
            if (sizes[c] == 0) {
                std::copy(centroid(c), centroid(c) + x_.dim, dst);
                continue;
            }
            for (std::size_t d = 0; d < x_.dim; ++d) {
                dst[d] /= static_cast<double>(sizes[c]);
            }
            shift = std::max(shift, std::sqrt(sq_dist(dst, centroid(c), x_.dim)));
        }
        c_ = std::move(next);
        return shift;
    }

    FlatClustering result(double inertia, std::vector<double> history) const {
        std::vector<std::size_t> sizes = cluster_sizes();
        std::vector<std::size_t> remap(k_, 0);
        FlatClustering out;
        for (std::size_t c = 0; c < k_; ++c) {
            if (sizes[c] == 0) {
                continue;
            }
            remap[c] = out.centroids.size();
            out.centroids.emplace_back(std::vector<double>(centroid(c), centroid(c) + x_.dim));
        }
        out.assignment.reserve(x_.n);
        for (std::size_t a : assign_) {
            out.assignment.push_back(remap[a]);
        }
        out.inertia = inertia;
        out.inertia_history = std::move(history);
        return out;
    }

private:
    const double* centroid(std::size_t c) const { return c_.data() + c * x_.dim; }

    std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> sizes(k_, 0);
        for (std::size_t a : assign_) {
            ++sizes[a];
        }
        return sizes;
    }

    const Dense& x_;
    std::size_t k_;
    std::vector<double> c_;
    std::vector<std::size_t> assign_;
    std::vector<double> dist_;
};

FlatClustering run_lloyd(const Dense& x, std::vector<double> init, const SeedConfig& cfg) {
    Lloyd lloyd(x, std::move(init));
    std::vector<double> history;
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        const double inertia = lloyd.repair_empty(lloyd.assign());
        history.push_back(inertia);
        if (lloyd.update() < cfg.tolerance) {
            break;
        }
    }
    const double inertia = lloyd.assign();
    history.push_back(inertia);
    return lloyd.result(inertia, std::move(history));
}

} // namespace

SeedAlgorithm parse_seed_algorithm(std::string_view name) {
    if (name == "kmeans") return SeedAlgorithm::KMeans;
    if (name == "kmeanspp") return SeedAlgorithm::KMeansPP;
    if (name == "detk") return SeedAlgorithm::DetK;
    throw ConfigError("unknown seeding algorithm '" + std::string(name) + "'");
}

std::string_view to_string(SeedAlgorithm alg) noexcept {
    switch (alg) {
    case SeedAlgorithm::KMeans: return "kmeans";
    case SeedAlgorithm::KMeansPP: return "kmeanspp";
    case SeedAlgorithm::DetK: return "detk";
    }
    return "?";
}

void SeedConfig::validate() const {
    if (k < 1) throw ConfigError("seed config: k must be >= 1");
    if (k_max < 2) throw ConfigError("seed config: k_max must be >= 2");
    if (max_iters < 1) throw ConfigError("seed config: max_iters must be >= 1");
    if (!(tolerance > 0.0)) throw ConfigError("seed config: tolerance must be > 0");
}

std::size_t distinct_count(std::span<const Vector> points) {
    return count_distinct(impute(points));
}

FlatClustering kmeans(std::span<const Vector> points, std::size_t k, const SeedConfig& cfg) {
    const Dense x = impute(points);
    check_k(x, k);
    std::vector<double> init = cfg.algorithm == SeedAlgorithm::KMeans ? uniform_init(x, k, cfg.rng_seed)
                                                                      : pp_init(x, k, cfg.rng_seed);
    return run_lloyd(x, std::move(init), cfg);
}

std::vector<Vector> kmeanspp_init(std::span<const Vector> points, std::size_t k, std::uint64_t rng_seed) {
    const Dense x = impute(points);
    check_k(x, k);
    const std::vector<double> flat = pp_init(x, k, rng_seed);
    std::vector<Vector> out;
    for (std::size_t c = 0; c < k; ++c) {
        out.emplace_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(c * x.dim),
                                             flat.begin() + static_cast<std::ptrdiff_t>((c + 1) * x.dim)));
    }
    return out;
}

double detk_alpha(std::size_t k, std::size_t dim) {
    if (k < 2 || dim == 0) {
        return 1.0;
    }
    double alpha = 1.0 - 3.0 / (4.0 * static_cast<double>(dim));
    for (std::size_t i = 3; i <= k; ++i) {
        alpha += (1.0 - alpha) / 6.0;
    }
    return alpha;
}

std::vector<double> detk_curve(std::span<const double> inertias, std::size_t dim) {
    std::vector<double> fk;
    fk.reserve(inertias.size());
    for (std::size_t i = 0; i < inertias.size(); ++i) {
        const std::size_t k = i + 1;
        if (k == 1 || !(inertias[i - 1] > 0.0)) {
            fk.push_back(1.0);
        } else {
            fk.push_back(inertias[i] / (detk_alpha(k, dim) * inertias[i - 1]));
        }
    }
    return fk;
}

std::size_t detk_select(std::span<const double> fk) {
    for (std::size_t i = 0; i < fk.size(); ++i) {
        if (fk[i] < kDetKThreshold) {
            return i + 1;
        }
    }
    return 1;
}

FlatClustering detk(std::span<const Vector> points, const SeedConfig& cfg) {
    const Dense x = impute(points);
    check_k(x, 1);
    const std::size_t k_max = std::min(cfg.k_max, count_distinct(x));

    std::vector<FlatClustering> runs;
    std::vector<double> inertias;
    for (std::size_t k = 1; k <= k_max; ++k) {
        runs.push_back(run_lloyd(x, pp_init(x, k, detail::mix_seed(cfg.rng_seed, k)), cfg));
        inertias.push_back(runs.back().inertia);
    }
    std::vector<double> fk = detk_curve(inertias, x.dim);
    FlatClustering best = std::move(runs[detk_select(fk) - 1]);
    best.fk_curve = std::move(fk);
    return best;
}

FlatClustering seed(std::span<const Vector> points, const SeedConfig& cfg) {
    if (cfg.algorithm == SeedAlgorithm::DetK) {
        return detk(points, cfg);
    }
    return kmeans(points, cfg);
}

} // namespace clusterflow
