#include "clusterflow/errors.hpp"
#include "clusterflow/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

using namespace clusterflow;

namespace {

BoundingBox box2(double lo0, double hi0, double lo1, double hi1, BoxMode mode = BoxMode::Full) {
    BoundingBox b(mode, 2);
    b.set_bounds(0, lo0, hi0);
    b.set_bounds(1, lo1, hi1);
    return b;
}

Vector random_vector(std::mt19937_64& rng, std::size_t dim, double scale = 5.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> x(dim);
    for (auto& v : x) {
        v = u(rng);
    }
    return Vector(std::move(x));
}

// Nearest point of the box by scanning a fine grid over the box.
double grid_scan_distance(const Vector& v, const BoundingBox& b, MetricKind m, int steps = 400) {
    double best = std::numeric_limits<double>::infinity();
    const auto dims = b.active_dims();
    std::vector<int> idx(dims.size(), 0);
    for (;;) {
        std::vector<double> diff(v.dim(), 0.0);
        for (std::size_t i = 0; i < dims.size(); ++i) {
            const std::size_t d = dims[i];
            const double p = b.lo(d) + (b.hi(d) - b.lo(d)) * idx[i] / steps;
            diff[d] = v.value(d) - p;
        }
        best = std::min(best, lp_norm(Vector(diff), m));
        std::size_t i = 0;
        while (i < idx.size() && ++idx[i] > steps) {
            idx[i++] = 0;
        }
        if (i == idx.size()) {
            return best;
        }
    }
}

} // namespace

TEST(Vector, MissingEntries) {
    Vector v{1.0, std::nullopt, 3.0};
    EXPECT_EQ(v.dim(), 3u);
    EXPECT_TRUE(v.present(0));
    EXPECT_FALSE(v.present(1));
    EXPECT_FALSE(v[1].has_value());
    EXPECT_EQ(v.missing_count(), 1u);
    EXPECT_FALSE(v.complete());
    v.set(1, 2.0);
    EXPECT_TRUE(v.complete());
    EXPECT_EQ(v, Vector(std::vector<double>{1, 2, 3}));
}

TEST(Vector, RejectsNonFinite) {
    EXPECT_THROW(Vector(std::vector<double>{1.0, std::numeric_limits<double>::infinity()}),
                 std::invalid_argument);
    EXPECT_THROW(Vector(std::vector<double>{std::nan("")}), std::invalid_argument);
}

TEST(LpNorm, WorkedExample) {
    const Vector v(std::vector<double>{0, 0, 3, 4, 0});
    EXPECT_EQ(lp_norm(v, MetricKind::L0), 2.0);
    EXPECT_EQ(lp_norm(v, MetricKind::L1), 7.0);
    EXPECT_EQ(lp_norm(v, MetricKind::L2), 5.0);
    EXPECT_EQ(lp_norm(v, MetricKind::Linf), 4.0);
}

TEST(LpNorm, ZeroVector) {
    const Vector z(5);
    for (auto m : {MetricKind::L0, MetricKind::L1, MetricKind::L2, MetricKind::Linf}) {
        EXPECT_EQ(lp_norm(z, m), 0.0);
    }
}

TEST(LpNorm, MissingThrows) {
    EXPECT_THROW(lp_norm(Vector{1.0, std::nullopt}, MetricKind::L2), MissingDataError);
}

TEST(Distance, Examples) {
    const Vector a{0.0, 3.0};
    const Vector b{4.0, 0.0};
    EXPECT_EQ(distance(a, a, MetricKind::L2), 0.0);
    EXPECT_EQ(distance(a, b, MetricKind::L2), 5.0);

    const Vector p{1.0, std::nullopt, 2.0};
    const Vector q{3.0, 5.0, std::nullopt};
    const auto sd = subspace_distance(p, q, MetricKind::L1);
    EXPECT_EQ(sd.value, 2.0);
    EXPECT_EQ(sd.dims, 1u);
}

TEST(Distance, SubspaceMatchesBruteForce) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 6;
        Vector a = random_vector(rng, dim);
        Vector b = random_vector(rng, dim);
        for (std::size_t d = 0; d < dim; ++d) {
            if (u(rng) < 0.3) a.set(d, std::nullopt);
            if (u(rng) < 0.3) b.set(d, std::nullopt);
        }
        std::vector<double> diff;
        for (std::size_t d = 0; d < dim; ++d) {
            if (a.present(d) && b.present(d)) {
                diff.push_back(a.value(d) - b.value(d));
            }
        }
        if (diff.empty()) {
            EXPECT_THROW(distance(a, b, MetricKind::L1), NoSharedSubspaceError);
            continue;
        }
        double l1 = 0, l2 = 0, linf = 0;
        for (double x : diff) {
            l1 += std::abs(x);
            l2 += x * x;
            linf = std::max(linf, std::abs(x));
        }
        EXPECT_NEAR(distance(a, b, MetricKind::L1), l1, 1e-12);
        EXPECT_NEAR(distance(a, b, MetricKind::L2), std::sqrt(l2), 1e-12);
        EXPECT_NEAR(distance(a, b, MetricKind::Linf), linf, 1e-12);
        EXPECT_EQ(subspace_distance(a, b, MetricKind::L2).dims, diff.size());
    }
}

TEST(Distance, Mahalanobis) {
    DimStats stats(2);
    stats.add(Vector{-2.0, -1.0});
    stats.add(Vector{2.0, 1.0});
    ASSERT_DOUBLE_EQ(stats.stddev(0), 2.0);
    ASSERT_DOUBLE_EQ(stats.stddev(1), 1.0);
    EXPECT_DOUBLE_EQ(distance(Vector{2.0, 0.0}, Vector{0.0, 0.0}, MetricKind::Mahalanobis, &stats), 1.0);
    EXPECT_THROW(distance(Vector{2.0, 0.0}, Vector{0.0, 0.0}, MetricKind::Mahalanobis), ConfigError);
}

TEST(Distance, Errors) {
    EXPECT_THROW(distance(Vector(2), Vector(3), MetricKind::L2), DimensionError);
    EXPECT_THROW(distance(Vector{1.0, std::nullopt}, Vector{std::nullopt, 1.0}, MetricKind::L2),
                 NoSharedSubspaceError);
}

TEST(Distance, MetricAxioms) {
    std::mt19937_64 rng(11);
    for (auto m : {MetricKind::L1, MetricKind::L2, MetricKind::Linf}) {
        for (int trial = 0; trial < 300; ++trial) {
            const Vector x = random_vector(rng, 5);
            const Vector y = random_vector(rng, 5);
            const Vector z = random_vector(rng, 5);
            EXPECT_EQ(distance(x, x, m), 0.0);
            EXPECT_EQ(distance(x, y, m), distance(y, x, m));
            EXPECT_LE(distance(x, z, m), distance(x, y, m) + distance(y, z, m) + 1e-9);
        }
    }
}

TEST(DimStats, CountsAndFloor) {
    DimStats s(2);
    for (int i = 0; i < 10; ++i) {
        s.add(Vector{static_cast<double>(i), 4.0});
    }
    EXPECT_EQ(s.count(), 10u);
    EXPECT_EQ(s.range(0), 9.0);
    EXPECT_EQ(s.range(1), 0.0);
    EXPECT_DOUBLE_EQ(s.stddev(1), kStddevFloorScale);
    EXPECT_GE(s.stddev(0), s.epsilon(0));
    EXPECT_DOUBLE_EQ(s.mean(0), 4.5);
}

TEST(Softmax, PaperTable) {
    const std::vector<double> x{5.0, 5.5, 6.0};
    const auto p = softmax(x);
    EXPECT_NEAR(p[0], 0.18, 0.01);
    EXPECT_NEAR(p[1], 0.31, 0.01);
    EXPECT_NEAR(p[2], 0.51, 0.01);
}

// x / sum(x) for the same input, checked against plain arithmetic.
TEST(Softmax, LinearNormalize) {
    const std::vector<double> x{5.0, 5.5, 6.0};
    const auto q = linear_normalize(x);
    EXPECT_DOUBLE_EQ(q[0], 5.0 / 16.5);
    EXPECT_DOUBLE_EQ(q[1], 5.5 / 16.5);
    EXPECT_DOUBLE_EQ(q[2], 6.0 / 16.5);
    EXPECT_THROW(linear_normalize(std::vector<double>{1.0, -1.0}), std::domain_error);
}

TEST(Softmax, SymmetricAndEmpty) {
    for (double c : {-3.0, 0.0, 1e4}) {
        const std::vector<double> x{c, c};
        const auto p = softmax(x);
        EXPECT_DOUBLE_EQ(p[0], 0.5);
        EXPECT_DOUBLE_EQ(p[1], 0.5);
    }
    EXPECT_THROW(softmax(std::vector<double>{}), EmptyInputError);
    EXPECT_THROW(linear_normalize(std::vector<double>{}), EmptyInputError);
}

TEST(Softmax, SumsToOneAndKeepsArgmax) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-20, 20);
    for (double shift : {0.0, 1e4, -1e4}) {
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(7);
            for (auto& v : x) {
                v = u(rng) + shift;
            }
            const auto p = softmax(x);
            EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
            EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(),
                      std::max_element(x.begin(), x.end()) - x.begin());
        }
    }
}

TEST(Box, Contains) {
    const BoundingBox b = box2(0, 1, 0, 1);
    EXPECT_TRUE(b.contains(Vector{0.5, 0.5}));
    EXPECT_FALSE(b.contains(Vector{2.0, 0.5}));
    const BoundingBox p = box2(0, 1, 0, 1, BoxMode::PartialDimensional);
    EXPECT_TRUE(p.contains(Vector{std::nullopt, 0.5}));
    EXPECT_FALSE(p.contains(Vector{std::nullopt, 1.5}));
}

TEST(Box, EmptyBoxContainsEverything) {
    const BoundingBox b(BoxMode::LowerDimensional, 3);
    EXPECT_FALSE(b.valid());
    EXPECT_TRUE(b.contains(Vector{1.0, 2.0, 3.0}));
}

TEST(Box, LowerDimensionalExtend) {
    BoundingBox b(BoxMode::LowerDimensional, 5);
    b.extend(Vector(std::vector<double>{0, 0.1, 3, 0, 5}));
    EXPECT_EQ(b.active_dims(), (std::vector<std::size_t>{1, 2, 4}));
    EXPECT_EQ(b.lo(1), 0.1);
    EXPECT_EQ(b.hi(1), 0.1);
    EXPECT_EQ(b.lo(2), 3.0);
    EXPECT_EQ(b.hi(2), 3.0);
    EXPECT_EQ(b.lo(4), 5.0);
    EXPECT_EQ(b.hi(4), 5.0);
    // Zero entries never exclude a point.
    EXPECT_TRUE(b.contains(Vector(std::vector<double>{7, 0, 3, 9, 0})));
}

TEST(Box, ExtendWidensAndIsIdempotentInside) {
    BoundingBox b(BoxMode::Full, 1);
    b.set_bounds(0, 1, 2);
    b.extend(Vector{3.0});
    EXPECT_EQ(b.hi(0), 3.0);
    const BoundingBox before = b;
    b.extend(Vector{2.5});
    EXPECT_EQ(b, before);
}

TEST(Box, ExtendIncompleteOutsidePartialModeThrows) {
    BoundingBox b(BoxMode::Full, 2);
    EXPECT_THROW(b.extend(Vector{1.0, std::nullopt}), MissingDataError);
}

TEST(Box, ExpandWorkedExample) {
    const BoundingBox b = box2(-2, 2, -10, 10);
    DimStats stats(2);
    stats.add(Vector{-2.0, -10.0});
    stats.add(Vector{2.0, 10.0});
    const BoundingBox e = b.expanded(0.10, stats);
    EXPECT_EQ(0.10 * (b.hi(0) - b.lo(0)), 0.4);
    EXPECT_EQ(0.10 * (b.hi(1) - b.lo(1)), 2.0);
    EXPECT_EQ(e.lo(0), -2.4);
    EXPECT_EQ(e.hi(0), 2.4);
    EXPECT_EQ(e.lo(1), -12.0);
    EXPECT_EQ(e.hi(1), 12.0);
}

TEST(Box, ExpandIdentityAndUnitFraction) {
    BoundingBox b(BoxMode::Full, 1);
    b.set_bounds(0, 0, 1);
    DimStats stats(1);
    stats.add(Vector{0.0});
    stats.add(Vector{1.0});
    EXPECT_EQ(b.expanded(0.0, stats), b);
    const BoundingBox e = b.expanded(1.0, stats);
    EXPECT_EQ(e.lo(0), -1.0);
    EXPECT_EQ(e.hi(0), 2.0);
}

TEST(Box, ExpandZeroWidthUsesEpsilon) {
    BoundingBox b(BoxMode::Full, 1);
    b.set_bounds(0, 3, 3);
    DimStats stats(1);
    stats.add(Vector{0.0});
    stats.add(Vector{10.0});
    const BoundingBox e = b.expanded(0.5, stats);
    EXPECT_EQ(e.hi(0), 3.0 + 0.5 * stats.epsilon(0));
    EXPECT_EQ(e.lo(0), 3.0 - 0.5 * stats.epsilon(0));
    EXPECT_GT(e.hi(0), e.lo(0));
}

TEST(Box, ExpandMonotone) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-5, 5);
    std::uniform_real_distribution<double> f(0, 1);
    DimStats stats(3);
    stats.add(Vector{-5.0, -5.0, -5.0});
    stats.add(Vector{5.0, 5.0, 5.0});
    for (int trial = 0; trial < 200; ++trial) {
        BoundingBox b(BoxMode::Full, 3);
        for (std::size_t d = 0; d < 3; ++d) {
            const double x = u(rng), y = u(rng);
            b.set_bounds(d, std::min(x, y), std::max(x, y));
        }
        const double f1 = f(rng), f2 = f(rng);
        const BoundingBox e1 = b.expanded(f1, stats);
        const BoundingBox e12 = e1.expanded(f2, stats);
        const BoundingBox emax = b.expanded(std::max(f1, f2), stats);
        for (std::size_t d = 0; d < 3; ++d) {
            EXPECT_LE(e1.lo(d), b.lo(d));
            EXPECT_GE(e1.hi(d), b.hi(d));
            EXPECT_LE(e12.lo(d), emax.lo(d));
            EXPECT_GE(e12.hi(d), emax.hi(d));
        }
    }
}

TEST(Box, ExtendThenContainsEveryMode) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-3, 3);
    std::uniform_real_distribution<double> coin(0, 1);
    for (auto mode : {BoxMode::Full, BoxMode::LowerDimensional, BoxMode::PartialDimensional}) {
        for (int trial = 0; trial < 50; ++trial) {
            BoundingBox b(mode, 4);
            std::vector<Vector> seen;
            for (int i = 0; i < 12; ++i) {
                Vector v = random_vector(rng, 4, 3.0);
                for (std::size_t d = 0; d < 4; ++d) {
                    if (mode == BoxMode::LowerDimensional && coin(rng) < 0.4) v.set(d, 0.0);
                    if (mode == BoxMode::PartialDimensional && coin(rng) < 0.4) v.set(d, std::nullopt);
                }
                b.extend(v);
                seen.push_back(v);
                for (const auto& s : seen) {
                    EXPECT_TRUE(b.contains(s));
                }
            }
        }
    }
}

TEST(Box, ActivationRulesUnderFuzzing) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> coin(0, 1);
    for (int trial = 0; trial < 500; ++trial) {
        BoundingBox lower(BoxMode::LowerDimensional, 6);
        BoundingBox partial(BoxMode::PartialDimensional, 6);
        std::vector<char> nonzero(6, 0), present(6, 0);
        for (int i = 0; i < 4; ++i) {
            Vector z = random_vector(rng, 6);
            Vector m = z;
            for (std::size_t d = 0; d < 6; ++d) {
                if (coin(rng) < 0.5) z.set(d, 0.0);
                if (coin(rng) < 0.5) m.set(d, std::nullopt);
                nonzero[d] |= z.value(d) != 0.0;
                present[d] |= m.present(d);
            }
            lower.extend(z);
            partial.extend(m);
        }
        for (std::size_t d = 0; d < 6; ++d) {
            EXPECT_EQ(lower.active(d), nonzero[d] != 0);
            EXPECT_EQ(partial.active(d), present[d] != 0);
        }
    }
}

TEST(PointToBox, Examples) {
    BoundingBox b1(BoxMode::Full, 1);
    b1.set_bounds(0, 0, 1);
    EXPECT_EQ(point_to_box_distance(Vector{3.0}, b1, MetricKind::L1), 2.0);
    EXPECT_EQ(point_to_box_distance(Vector{0.5}, b1, MetricKind::L1), 0.0);
    const BoundingBox b2 = box2(0, 1, 0, 1);
    EXPECT_DOUBLE_EQ(point_to_box_distance(Vector{2.0, 2.0}, b2, MetricKind::L2), std::sqrt(2.0));
}

TEST(PointToBox, MatchesGridScan) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-4, 4);
    for (auto m : {MetricKind::L1, MetricKind::L2, MetricKind::Linf}) {
        for (int trial = 0; trial < 40; ++trial) {
            const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
            const BoundingBox box = box2(std::min(a, b), std::max(a, b), std::min(c, d), std::max(c, d));
            const Vector v = random_vector(rng, 2, 6.0);
            const double exact = point_to_box_distance(v, box, m);
            const double scanned = grid_scan_distance(v, box, m);
            // The grid only reaches the exact nearest point up to its step.
            EXPECT_LE(exact, scanned + 1e-12);
            EXPECT_NEAR(exact, scanned, 8.0 / 400 * 2);
        }
    }
}

TEST(PointToBox, ZeroIffContainedAndMonotoneApproach) {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 200; ++trial) {
        const BoundingBox box = box2(-1, 1, -2, 0.5);
        const Vector v = random_vector(rng, 2, 6.0);
        EXPECT_EQ(point_to_box_distance(v, box, MetricKind::L2) == 0.0, box.contains(v));
        // Walk toward the box centre.
        const double cx = 0.0, cy = -0.75;
        double prev = std::numeric_limits<double>::infinity();
        for (int s = 0; s <= 20; ++s) {
            const double t = s / 20.0;
            const Vector p{v.value(0) + t * (cx - v.value(0)), v.value(1) + t * (cy - v.value(1))};
            const double dist = point_to_box_distance(p, box, MetricKind::L2);
            EXPECT_LE(dist, prev + 1e-12);
            prev = dist;
        }
        EXPECT_EQ(prev, 0.0);
    }
}

TEST(PointToBox, NoSharedSubspace) {
    BoundingBox b(BoxMode::PartialDimensional, 2);
    b.set_bounds(0, 0, 1);
    EXPECT_THROW(point_to_box_distance(Vector{std::nullopt, 1.0}, b, MetricKind::L2), NoSharedSubspaceError);
}

TEST(Parsing, NamesRoundTrip) {
    for (auto m : {MetricKind::L0, MetricKind::L1, MetricKind::L2, MetricKind::Linf, MetricKind::Mahalanobis}) {
        EXPECT_EQ(parse_metric(to_string(m)), m);
    }
    for (auto b : {BoxMode::Full, BoxMode::LowerDimensional, BoxMode::PartialDimensional}) {
        EXPECT_EQ(parse_box_mode(to_string(b)), b);
    }
    EXPECT_THROW(parse_metric("l3"), ConfigError);
}
