#include "clusterflow/errors.hpp"
#include "clusterflow/experiments.hpp"
#include "support/synth.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace clusterflow;
using cftest::gaussian_class;

namespace {

// Class "wide" spans a larger per-dimension range than class "narrow"; both centred at 0.
ClassSplit nested_class(const std::string& name, double stddev, LabelId label, std::uint64_t seed) {
    return {name, gaussian_class(300, 8, 0.0, stddev, label, seed, name + "_train"),
            gaussian_class(200, 8, 0.0, stddev, label, seed + 1000, name + "_test")};
}

// Containment count straight from the root box bounds.
double counted_surprise(const ClusterTree& tree, std::span<const Activation> test) {
    const BoundingBox& b = tree.root().box;
    std::size_t out = 0;
    for (const auto& a : test) {
        bool inside = true;
        for (std::size_t d = 0; d < a.features.dim(); ++d) {
            const double x = a.features.value(d);
            if (x < b.lo(d) || x > b.hi(d)) inside = false;
        }
        out += inside ? 0 : 1;
    }
    return 100.0 * static_cast<double>(out) / static_cast<double>(test.size());
}

} // namespace

TEST(Surprise, TrainingSetIsNeverSurprising) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto data = cftest::gaussian_classes(2, 80, 5, 3.0, 1.0, seed);
        const ClusterTree tree = build(data, BuildConfig{});
        const auto r = surprise(tree, data);
        EXPECT_EQ(r.surprise, 0.0);
        EXPECT_EQ(r.n_outside, 0u);
        EXPECT_EQ(r.n_test, data.size());
    }
}

TEST(Surprise, FarTranslationIsTotal) {
    const auto data = gaussian_class(100, 4, 0.0, 1.0, 0, 4, "a");
    const ClusterTree tree = build(data, BuildConfig{});
    auto moved = data;
    for (auto& a : moved) {
        std::vector<double> x(a.features.dim());
        for (std::size_t d = 0; d < x.size(); ++d) x[d] = a.features.value(d) + 1e3 * tree.global_stats().range(d);
        a.features = Vector(std::move(x));
    }
    EXPECT_EQ(surprise(tree, moved).surprise, 100.0);
}

TEST(Surprise, MatchesContainmentCount) {
    const auto a = nested_class("a", 1.0, 0, 10);
    const auto b = nested_class("b", 2.0, 1, 20);
    const ClusterTree tree = build(a.train, BuildConfig{});
    EXPECT_DOUBLE_EQ(surprise(tree, b.test).surprise, counted_surprise(tree, b.test));
    EXPECT_DOUBLE_EQ(surprise(tree, a.test).surprise, counted_surprise(tree, a.test));
}

TEST(Surprise, Errors) {
    const auto data = gaussian_class(10, 2, 0.0, 1.0, 0, 5, "a");
    const ClusterTree tree = build(data, BuildConfig{});
    EXPECT_THROW(surprise(tree, std::vector<Activation>{}), EmptyInputError);
    EXPECT_THROW(surprise(tree, gaussian_class(3, 3, 0.0, 1.0, 0, 5, "x")), DimensionError);
}

TEST(Surprise, ShrinkingTrainingSetNeverLowersSurprise) {
    const auto train = gaussian_class(200, 6, 0.0, 1.0, 0, 7, "t");
    const auto test = gaussian_class(300, 6, 0.0, 1.5, 0, 8, "q");
    double prev = -1.0;
    for (std::size_t n : {200, 150, 100, 50, 20, 5}) {
        const std::vector<Activation> subset(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n));
        const double s = surprise(build(subset, BuildConfig{}), test).surprise;
        EXPECT_GE(s, prev) << "n=" << n;
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 100.0);
        prev = s;
    }
}

TEST(Preference, Formula) {
    EXPECT_EQ(preference(3.0, 1.0), 75.0);
    EXPECT_EQ(preference(0.0, 5.0), 0.0);
    EXPECT_EQ(preference(5.0, 0.0), 100.0);
    EXPECT_THROW(preference(0.0, 0.0), UndefinedPreferenceError);
    EXPECT_THROW(preference(-1.0, 2.0), std::invalid_argument);
}

TEST(Asymmetry, SignAndAntisymmetry) {
    EXPECT_EQ(asymmetry(60.0, 40.0), 20.0);
    for (double a : {0.0, 12.5, 99.0})
        for (double b : {3.0, 50.0}) EXPECT_EQ(asymmetry(a, b), -asymmetry(b, a));
    const auto r = make_asymmetry(70.0, 55.0);
    EXPECT_EQ(r.asymmetry, r.preference_first - r.preference_second);
}

TEST(Protocol, RangeNestedAsymmetryFavoursWiderClass) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto wide = nested_class("wide", 2.0, 1, 100 + seed);
        const auto narrow = nested_class("narrow", 1.0, 0, 200 + seed);
        const auto r = run_paired_protocol(wide, narrow, BuildConfig{});
        const ClusterTree narrow_tree = build(narrow.train, BuildConfig{});
        const ClusterTree wide_tree = build(wide.train, BuildConfig{});
        const double expected = counted_surprise(narrow_tree, wide.test) - counted_surprise(wide_tree, narrow.test);
        EXPECT_DOUBLE_EQ(r.novel.asymmetry, expected);
        EXPECT_GT(r.novel.asymmetry, 0.0);

        // Swapping the roles negates the sign exactly.
        const auto swapped = run_paired_protocol(narrow, wide, BuildConfig{});
        EXPECT_EQ(swapped.novel.asymmetry, -r.novel.asymmetry);
        EXPECT_EQ(swapped.familiar.asymmetry, -r.familiar.asymmetry);
    }
}

TEST(Protocol, TrainingControlUsesTrainingSplits) {
    const auto wide = nested_class("wide", 2.0, 1, 31);
    const auto narrow = nested_class("narrow", 1.0, 0, 32);
    const auto r = run_paired_protocol(wide, narrow, BuildConfig{}, ProtocolMode::TrainingControl);
    ASSERT_TRUE(r.first_familiar && r.second_familiar);
    EXPECT_EQ(r.first_familiar->familiar.surprise, 0.0);
    EXPECT_EQ(r.second_familiar->familiar.surprise, 0.0);
    EXPECT_EQ(r.first_familiar->novel.n_test, narrow.train.size());
    EXPECT_DOUBLE_EQ(r.first_familiar->novel.surprise,
                     counted_surprise(build(wide.train, BuildConfig{}), narrow.train));
    EXPECT_GT(r.novel.asymmetry, 0.0);
}

TEST(Protocol, JointControlOnSeparableClasses) {
    const auto data = cftest::gaussian_classes(2, 900, 6, 12.0, 1.0, 41);
    ClassSplit a{"a", {}, {}}, b{"b", {}, {}};
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto& split = data[i].labels.front() == 0 ? a : b;
        (i % 3 == 0 ? split.test : split.train).push_back(data[i]);
    }
    const auto r = run_paired_protocol(a, b, BuildConfig{}, ProtocolMode::Joint);
    ASSERT_TRUE(r.pure_fraction_first && r.pure_fraction_second);
    EXPECT_EQ(*r.pure_fraction_first, 100.0);
    EXPECT_EQ(*r.pure_fraction_second, 100.0);
    EXPECT_LT(std::abs(r.novel.asymmetry), 2.0);
    EXPECT_FALSE(r.first_familiar.has_value());
}

TEST(Protocol, NarrowSubclassRaisesSurpriseBothWays) {
    // A broad familiar class against the same protocol run on one narrow subclass of it.
    const auto broad = nested_class("broad", 1.0, 0, 51);
    const auto other = nested_class("other", 1.5, 1, 52);
    ClassSplit sub{"sub", {}, {}};
    for (const auto& a : broad.train)
        if (a.features.value(0) > 0.5) sub.train.push_back(a);
    for (const auto& a : broad.test)
        if (a.features.value(0) > 0.5) sub.test.push_back(a);
    const auto wide_run = run_familiarity_protocol(broad.train, broad.test, other.test, BuildConfig{});
    const auto sub_run = run_familiarity_protocol(sub.train, broad.test, other.test, BuildConfig{});
    EXPECT_GT(sub_run.familiar.surprise, wide_run.familiar.surprise);
    EXPECT_GT(sub_run.novel.surprise, wide_run.novel.surprise);
}

TEST(Report, AsymmetryTable) {
    const std::vector<ModelRow> rows{{"net-a", 1.5, -12.345, 4200000}, {"net-b", 0.0, 7.0, std::nullopt}};
    std::ostringstream tab, csv;
    write_asymmetry_table(tab, rows);
    write_asymmetry_table(csv, rows, ',');
    EXPECT_EQ(tab.str(), "model\tasymmetry_familiar\tasymmetry_novel\tparameters\n"
                         "net-a\t1.50\t-12.35\t4200000\n"
                         "net-b\t0.00\t7.00\t\n");
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "model,asymmetry_familiar,asymmetry_novel,parameters");
}

TEST(Report, DetailAndPlotData) {
    const auto wide = nested_class("wide", 2.0, 1, 61);
    const auto narrow = nested_class("narrow", 1.0, 0, 62);
    const auto r = run_paired_protocol(wide, narrow, BuildConfig{});
    std::ostringstream detail, plot;
    write_paired_detail(detail, r);
    write_paired_plotdata(plot, r);
    EXPECT_NE(detail.str().find("# mode\tstandard\n"), std::string::npos);
    EXPECT_NE(detail.str().find("novel\twide\tnarrow\t200\t"), std::string::npos);
    std::istringstream lines(plot.str());
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "series\tx\ty");
    int rows = 0;
    while (std::getline(lines, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 2) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 6);
}
