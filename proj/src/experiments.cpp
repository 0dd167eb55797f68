#include "clusterflow/experiments.hpp"

#include "clusterflow/errors.hpp"

#include <algorithm>
#include <iomanip>
#include <utility>

namespace clusterflow {

namespace {

std::vector<Activation> concat(std::span<const Activation> a, std::span<const Activation> b) {
    std::vector<Activation> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

void write_surprise_line(std::ostream& os, const std::string& run, const SurpriseReport& s) {
    os << run << '\t' << s.familiar_label << '\t' << s.novel_label << '\t' << s.n_test << '\t' << s.n_outside
       << '\t' << s.surprise << '\n';
}

std::string_view mode_name(ProtocolMode m) {
    switch (m) {
    case ProtocolMode::Standard: return "standard";
    case ProtocolMode::TrainingControl: return "training-control";
    case ProtocolMode::Joint: return "joint";
    }
    return "?";
}

} // namespace

SurpriseReport surprise(const ClusterTree& familiar_tree, std::span<const Activation> test,
                        std::string familiar_label, std::string novel_label) {
    if (test.empty()) {
        throw EmptyInputError("surprise: empty test set");
    }
    SurpriseReport r;
    r.familiar_label = std::move(familiar_label);
    r.novel_label = std::move(novel_label);
    r.n_test = test.size();
    const BoundingBox& world = familiar_tree.root().box;
    for (const auto& a : test) {
        if (a.features.dim() != familiar_tree.dim()) {
            throw DimensionError("surprise: test vector dimension does not match the tree");
        }
        r.n_outside += world.contains(a.features) ? 0 : 1;
    }
    r.surprise = 100.0 * static_cast<double>(r.n_outside) / static_cast<double>(r.n_test);
    return r;
}

double preference(double t_novel, double t_familiar) {
    if (t_novel < 0.0 || t_familiar < 0.0) {
        throw std::invalid_argument("preference: times must be non-negative");
    }
    if (t_novel + t_familiar == 0.0) {
        throw UndefinedPreferenceError("preference: both looking times are zero");
    }
    return 100.0 * t_novel / (t_novel + t_familiar);
}

double asymmetry(double pref_first, double pref_second) {
    return pref_first - pref_second;
}

AsymmetryReport make_asymmetry(double pref_first, double pref_second) {
    return {pref_first, pref_second, asymmetry(pref_first, pref_second)};
}

FamiliarityResult run_familiarity_protocol(std::span<const Activation> train_familiar,
                                           std::span<const Activation> test_familiar,
                                           std::span<const Activation> test_novel, const BuildConfig& config,
                                           std::string familiar_name, std::string novel_name) {
    const ClusterTree tree = build(train_familiar, config);
    FamiliarityResult r;
    r.familiar = surprise(tree, test_familiar, familiar_name, familiar_name);
    r.novel = surprise(tree, test_novel, familiar_name, novel_name);
    return r;
}

double pure_fraction(const ClusterTree& tree, std::span<const Activation> train, LabelId label) {
    std::vector<char> in_pure(train.size(), 0);
    for_each_node(tree.root(), [&](const Cluster& node, std::size_t, std::size_t) {
        if (node.is_leaf() && node.status == ClusterStatus::Pure) {
            for (std::size_t m : node.members) {
                in_pure.at(m) = 1;
            }
        }
    });
    std::size_t total = 0;
    std::size_t pure = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (std::binary_search(train[i].labels.begin(), train[i].labels.end(), label)) {
            ++total;
            pure += in_pure[i] ? 1 : 0;
        }
    }
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(pure) / static_cast<double>(total);
}

PairedResult run_paired_protocol(const ClassSplit& first, const ClassSplit& second, const BuildConfig& config,
                                 ProtocolMode mode) {
    PairedResult r;
    r.mode = mode;
    r.first_name = first.name;
    r.second_name = second.name;

    if (mode == ProtocolMode::Joint) {
        const std::vector<Activation> joint = concat(first.train, second.train);
        const ClusterTree tree = build(joint, config);
        r.joint_first = surprise(tree, first.test, "joint", first.name);
        r.joint_second = surprise(tree, second.test, "joint", second.name);
        r.novel = make_asymmetry(r.joint_first->surprise, r.joint_second->surprise);
        r.familiar = r.novel;
        if (!first.train.empty() && !second.train.empty()) {
            r.pure_fraction_first = pure_fraction(tree, joint, first.train.front().labels.front());
            r.pure_fraction_second = pure_fraction(tree, joint, second.train.front().labels.front());
        }
        return r;
    }

    const bool control = mode == ProtocolMode::TrainingControl;
    const std::span<const Activation> first_probe = control ? first.train : first.test;
    const std::span<const Activation> second_probe = control ? second.train : second.test;

    r.first_familiar = run_familiarity_protocol(first.train, control ? first.train : first.test, second_probe,
                                                config, first.name, second.name);
    r.second_familiar = run_familiarity_protocol(second.train, control ? second.train : second.test,
                                                 first_probe, config, second.name, first.name);
    r.novel = make_asymmetry(r.second_familiar->novel.surprise, r.first_familiar->novel.surprise);
    r.familiar = make_asymmetry(r.first_familiar->familiar.surprise, r.second_familiar->familiar.surprise);
    return r;
}

void write_asymmetry_table(std::ostream& os, std::span<const ModelRow> rows, char delimiter) {
    os << "model" << delimiter << "asymmetry_familiar" << delimiter << "asymmetry_novel" << delimiter
       << "parameters\n";
    const auto flags = os.flags();
    os << std::fixed << std::setprecision(2);
    for (const auto& row : rows) {
        os << row.model << delimiter << row.asymmetry_familiar << delimiter << row.asymmetry_novel << delimiter;
        if (row.parameters) {
            os << *row.parameters;
        }
        os << '\n';
    }
    os.flags(flags);
}

void write_paired_detail(std::ostream& os, const PairedResult& r) {
    os << "# mode\t" << mode_name(r.mode) << '\n';
    os << "run\tfamiliar\tstimulus\tn_test\tn_outside\tsurprise_percent\n";
    if (r.first_familiar) {
        write_surprise_line(os, "familiar", r.first_familiar->familiar);
        write_surprise_line(os, "novel", r.first_familiar->novel);
    }
    if (r.second_familiar) {
        write_surprise_line(os, "familiar", r.second_familiar->familiar);
        write_surprise_line(os, "novel", r.second_familiar->novel);
    }
    if (r.joint_first) {
        write_surprise_line(os, "joint", *r.joint_first);
        write_surprise_line(os, "joint", *r.joint_second);
    }
    if (r.pure_fraction_first) {
        os << "pure_fraction\t" << r.first_name << '\t' << *r.pure_fraction_first << '\n';
        os << "pure_fraction\t" << r.second_name << '\t' << *r.pure_fraction_second << '\n';
    }
    os << "asymmetry_familiar\t" << r.familiar.asymmetry << '\n';
    os << "asymmetry_novel\t" << r.novel.asymmetry << '\n';
}

void write_paired_plotdata(std::ostream& os, const PairedResult& r) {
    os << "series\tx\ty\n";
    if (r.first_familiar && r.second_familiar) {
        os << "familiar\t" << r.first_name << '\t' << r.first_familiar->familiar.surprise << '\n';
        os << "familiar\t" << r.second_name << '\t' << r.second_familiar->familiar.surprise << '\n';
        // Novel stimulus of class X is tested against the other class's tree.
        os << "novel\t" << r.first_name << '\t' << r.second_familiar->novel.surprise << '\n';
        os << "novel\t" << r.second_name << '\t' << r.first_familiar->novel.surprise << '\n';
    }
    if (r.joint_first) {
        os << "joint\t" << r.first_name << '\t' << r.joint_first->surprise << '\n';
        os << "joint\t" << r.second_name << '\t' << r.joint_second->surprise << '\n';
    }
    os << "asymmetry\tfamiliar\t" << r.familiar.asymmetry << '\n';
    os << "asymmetry\tnovel\t" << r.novel.asymmetry << '\n';
}

} // namespace clusterflow
