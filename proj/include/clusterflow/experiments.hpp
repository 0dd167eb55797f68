#pragma once

#include "clusterflow/tree.hpp"

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace clusterflow {

/// Percentage of test points outside the world box of a familiar-class tree.
struct SurpriseReport {
    std::string familiar_label;
    std::string novel_label;
    std::size_t n_test = 0;
    std::size_t n_outside = 0;
    double surprise = 0.0; ///< 100 * n_outside / n_test
};

/// Throws EmptyInputError for an empty test set.
SurpriseReport surprise(const ClusterTree& familiar_tree, std::span<const Activation> test,
                        std::string familiar_label = {}, std::string novel_label = {});

/// 100 * t_novel / (t_novel + t_familiar). Throws UndefinedPreferenceError when both are 0.
double preference(double t_novel, double t_familiar);

/// pref_first - pref_second; positive means an asymmetry toward the first class.
double asymmetry(double pref_first, double pref_second);

struct AsymmetryReport {
    double preference_first = 0.0;
    double preference_second = 0.0;
    double asymmetry = 0.0;
};

AsymmetryReport make_asymmetry(double pref_first, double pref_second);

/// Surprise on the familiar class and on a novel class for one familiar-only tree.
struct FamiliarityResult {
    SurpriseReport familiar;
    SurpriseReport novel;
};

FamiliarityResult run_familiarity_protocol(std::span<const Activation> train_familiar,
                                           std::span<const Activation> test_familiar,
                                           std::span<const Activation> test_novel, const BuildConfig& config,
                                           std::string familiar_name = "familiar",
                                           std::string novel_name = "novel");

struct ClassSplit {
    std::string name;
    std::vector<Activation> train;
    std::vector<Activation> test;
};

enum class ProtocolMode {
    Standard,        ///< familiarize on one class, test on both test splits
    TrainingControl, ///< novel stimuli drawn from the other class's training split
    Joint,           ///< one tree over both training splits
};

/**
 * Both familiarization directions for two classes. Asymmetries are signed
 * toward `first`: novel = surprise(first | familiar second) - surprise(second |
 * familiar first), familiar = surprise(first | first) - surprise(second | second).
 *
 * In Joint mode a single tree is built from both training splits; both
 * asymmetries then compare the two test splits against that tree, and the
 * per-class fraction of training points in Pure leaves is reported.
 */
struct PairedResult {
    ProtocolMode mode = ProtocolMode::Standard;
    std::string first_name;
    std::string second_name;
    std::optional<FamiliarityResult> first_familiar;  ///< tree from `first`
    std::optional<FamiliarityResult> second_familiar; ///< tree from `second`
    std::optional<SurpriseReport> joint_first;
    std::optional<SurpriseReport> joint_second;
    std::optional<double> pure_fraction_first;  ///< percent, Joint mode only
    std::optional<double> pure_fraction_second; ///< percent, Joint mode only
    AsymmetryReport novel;
    AsymmetryReport familiar;
};

PairedResult run_paired_protocol(const ClassSplit& first, const ClassSplit& second, const BuildConfig& config,
                                 ProtocolMode mode = ProtocolMode::Standard);

/// Percentage of training points of each class whose leaf is Pure.
double pure_fraction(const ClusterTree& tree, std::span<const Activation> train, LabelId label);

// --- reporting

struct ModelRow {
    std::string model;
    double asymmetry_familiar = 0.0;
    double asymmetry_novel = 0.0;
    std::optional<long long> parameters;
};

/// Delimited table: model, asymmetry_familiar, asymmetry_novel, parameters.
void write_asymmetry_table(std::ostream& os, std::span<const ModelRow> rows, char delimiter = '\t');

/// Per-run detail: every surprise count behind a paired result.
void write_paired_detail(std::ostream& os, const PairedResult& r);

/// Plot-ready series: "series<TAB>x<TAB>y" rows, one bar per direction.
void write_paired_plotdata(std::ostream& os, const PairedResult& r);

} // namespace clusterflow
