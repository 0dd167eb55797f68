#include "commands.hpp"

#include "clusterflow/dataio.hpp"
#include "clusterflow/errors.hpp"
#include "clusterflow/experiments.hpp"
#include "clusterflow/inference.hpp"
#include "clusterflow/reasoning.hpp"
#include "parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

namespace clusterflow::cli {

namespace {

struct BuildFlags {
    std::string metric = "l2";
    std::string box_mode = "full";
    double expand = 0.10;
    std::string seed_alg = "detk";
    std::size_t k = 2;
    std::size_t k_max = 8;
    std::size_t batch_size = 4096;
    std::size_t max_depth = 32;
    std::uint64_t rng_seed = 0;
    unsigned threads = 1;

    BuildConfig config() const {
        BuildConfig c;
        c.metric = parse_metric(metric);
        c.box_mode = parse_box_mode(box_mode);
        c.expand_fraction = expand;
        c.seed_config.algorithm = parse_seed_algorithm(seed_alg);
        c.seed_config.k = k;
        c.seed_config.k_max = k_max;
        c.batch_size = batch_size;
        c.max_depth = max_depth;
        c.rng_seed = rng_seed;
        c.threads = threads;
        c.validate();
        return c;
    }
};

void add_build_flags(CLI::App* app, BuildFlags& f) {
    app->add_option("--metric", f.metric, "Distance metric")
        ->check(CLI::IsMember({"l0", "l1", "l2", "linf", "mahalanobis"}))
        ->capture_default_str();
    app->add_option("--box-mode", f.box_mode, "Box mode")
        ->check(CLI::IsMember({"full", "lower", "partial"}))
        ->capture_default_str();
    app->add_option("--expand", f.expand, "Fractional box expansion per side")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--seed-alg", f.seed_alg, "Seeding algorithm")
        ->check(CLI::IsMember({"kmeans", "kmeanspp", "detk"}))
        ->capture_default_str();
    app->add_option("--k", f.k, "Fixed k for kmeans and kmeanspp")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--kmax", f.k_max, "Largest k tried by detk")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--batch-size", f.batch_size, "Allocation batch size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--max-depth", f.max_depth, "Refinement depth limit")->capture_default_str();
    app->add_option("--rng-seed", f.rng_seed, "Seed for every random choice")->capture_default_str();
    app->add_option("--threads", f.threads, "Worker cap (0 = all cores)")->capture_default_str();
}

std::string& add_format(CLI::App* app, std::string& format) {
    app->add_option("--format", format, "Report format")
        ->check(CLI::IsMember({"table", "delimited", "plotdata"}))
        ->capture_default_str();
    return format;
}

/// Re-keys a dataset's label ids into `table`, so several files share one id space.
void adopt_labels(Dataset& d, LabelTable& table) {
    for (const auto& [key, name] : d.labels.display_names()) {
        table.set_display_name(key, name);
    }
    for (auto& a : d.items) {
        LabelSet mapped;
        for (LabelId l : a.labels) {
            mapped.push_back(table.intern(d.labels.key(l)));
        }
        std::sort(mapped.begin(), mapped.end());
        a.labels = std::move(mapped);
    }
    d.labels = table;
}

/// Writes to the named file, or to `fallback` when no path was given.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) {
                throw Error("cannot open '" + path + "' for writing");
            }
            os_ = file_.get();
        }
    }
    std::ostream& operator*() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

std::string join_labels(const LabelTable& t, const LabelSet& ls) {
    std::string s;
    for (LabelId l : ls) {
        s += (s.empty() ? "" : ";") + t.key(l);
    }
    return s;
}

std::string fixed2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

// --- build

struct BuildArgs {
    std::string data;
    std::string output;
    std::string format = "table";
    BuildFlags flags;
};

int cmd_build(const BuildArgs& a, std::ostream& out) {
    const BuildConfig cfg = a.flags.config();
    Dataset d = load_dataset(a.data);
    const ClusterTree tree = build(d.items, cfg, d.labels);
    save_tree(std::filesystem::path(a.output), tree);

    const TreeSummary s = tree.summary();
    const std::vector<std::pair<std::string, std::size_t>> rows{
        {"points", d.items.size()}, {"dim", tree.dim()},         {"missing_cells", d.missing_cells},
        {"nodes", s.nodes},         {"depth", s.depth},          {"top_width", s.top_width},
        {"leaves", s.leaves},       {"pure", s.pure},            {"mixed", s.mixed},
        {"irreducible", s.irreducible}, {"rejects", s.rejects}};
    if (a.format == "table") {
        for (const auto& [k, v] : rows) {
            out << std::left << std::setw(14) << k << v << '\n';
        }
        for (const auto& c : tree.root().children) {
            out << "child         " << to_string(c.status) << ", " << c.members.size() << " members";
            if (!c.common_labels.empty()) {
                out << ", labels " << join_labels(tree.labels(), c.common_labels);
            }
            out << '\n';
        }
    } else {
        // delimited and plotdata share the two-column form
        out << (a.format == "plotdata" ? "series\tx\ty\n" : "field\tvalue\n");
        for (const auto& [k, v] : rows) {
            out << (a.format == "plotdata" ? "summary\t" : "") << k << '\t' << v << '\n';
        }
    }
    return kOk;
}

// --- assign

struct AssignArgs {
    std::string tree;
    std::string data;
    std::string output;
    std::string format = "delimited";
    std::size_t top_k = 5;
    bool histogram = false;
    std::string thresholds; ///< comma separated; empty means the default rows
    unsigned threads = 1;
};

std::vector<double> parse_thresholds(const std::string& text) {
    if (text.empty()) {
        return {std::begin(kDefaultThresholds), std::end(kDefaultThresholds)};
    }
    std::vector<double> out;
    std::istringstream in(text);
    for (std::string part; std::getline(in, part, ',');) {
        double v = 0;
        if (!CLI::detail::lexical_cast(part, v) || !(v >= 0.0 && v <= 1.0)) {
            throw ConfigError("--thresholds: '" + part + "' is not a number in [0, 1]");
        }
        out.push_back(v);
    }
    return out;
}

int cmd_assign(const AssignArgs& a, std::ostream& out, std::ostream& err) {
    const ClusterTree tree = load_tree(std::filesystem::path(a.tree));
    const Dataset d = load_dataset(a.data);
    GuessOptions opt;
    opt.top_k = a.top_k;
    std::vector<Guess> guesses(d.items.size());
    detail::parallel_for(0, d.items.size(), a.threads,
                         [&](std::size_t i) { guesses[i] = guess(tree, d.items[i].features, opt); });
    std::size_t matched = 0;
    for (std::size_t i = 0; i < d.items.size(); ++i) {
        const Activation& item = d.items[i];
        const Guess& g = guesses[i];
        if (!g.ranked.empty()) {
            const std::string& top = tree.labels().key(g.ranked.front().label);
            for (LabelId l : item.labels) {
                if (d.labels.key(l) == top) {
                    ++matched;
                    break;
                }
            }
        }
    }

    Sink sink(a.output, out);
    if (a.histogram) {
        const ConfidenceHistogram h = confidence_histogram(guesses, parse_thresholds(a.thresholds));
        if (a.format == "plotdata") {
            *sink << "series\tx\ty\n";
            for (const auto& [thr, frac] : h.above) {
                *sink << "above\t" << thr << '\t' << 100.0 * frac << '\n';
            }
            *sink << "nan\tNaN\t" << 100.0 * h.nan_fraction << '\n';
        } else {
            write_confidence_table(*sink, h);
        }
    } else {
        write_assignments(*sink, tree, d.items, guesses);
    }
    if (!d.items.empty()) {
        err << "rank-1 label match: " << fixed2(100.0 * static_cast<double>(matched) / static_cast<double>(d.items.size()))
            << "% (" << matched << " of " << d.items.size() << ")\n";
    }
    return kOk;
}

// --- reason

struct ReasonArgs {
    std::string data;
    std::string output;
    std::string format = "table";
    bool group = false;
    BuildFlags flags;
};

void write_pairs(std::ostream& os, const std::map<ItemPair, LabelSet>& shared, const std::vector<Activation>& items,
                 const LabelTable& labels, const std::string& format) {
    for (const auto& [p, ls] : shared) {
        const std::string name = items[p.first].source_id + "|" + items[p.second].source_id;
        if (format == "table") {
            os << "shared " << name << ": " << ls.size();
            if (!ls.empty()) {
                os << " (" << join_labels(labels, ls) << ")";
            }
            os << '\n';
        } else {
            os << "shared\t" << name << '\t' << ls.size() << '\n';
        }
    }
}

std::string id_list(const std::vector<Activation>& items, const std::vector<std::size_t>& idx) {
    std::string s;
    for (std::size_t i : idx) {
        s += (s.empty() ? "" : ",") + items[i].source_id;
    }
    return s;
}

int cmd_reason(const ReasonArgs& a, std::ostream& out) {
    const BuildConfig cfg = a.flags.config();
    const Dataset d = load_dataset(a.data);
    Sink sink(a.output, out);
    std::ostream& os = *sink;

    if (!a.group) {
        const TripleVerdict v = classify_triple(d.items, cfg);
        const std::string odd = v.odd_one_out ? d.items[*v.odd_one_out].source_id : "";
        if (a.format == "table") {
            os << to_string(v.kind) << ", rejects " << v.rejects << '\n';
            if (v.odd_one_out) {
                os << "odd one out: " << odd << '\n';
            }
            os << "least similar: " << id_list(d.items, v.least_similar) << '\n';
            write_pairs(os, v.shared, d.items, d.labels, a.format);
        } else if (a.format == "delimited") {
            os << "kind\trejects\todd_one_out\tleast_similar\n";
            os << to_string(v.kind) << '\t' << v.rejects << '\t' << odd << '\t' << id_list(d.items, v.least_similar)
               << '\n';
        } else {
            os << "series\tx\ty\n";
            write_pairs(os, v.shared, d.items, d.labels, a.format);
        }
        return kOk;
    }

    const GroupVerdict v = generalize_n(d.items, cfg);
    if (a.format == "table") {
        os << to_string(v.kind) << ", rejects " << v.rejects.size() << '\n';
        os << "largest pure group: " << id_list(d.items, v.largest_pure_group) << '\n';
        if (!v.rejects.empty()) {
            os << "rejected: " << id_list(d.items, v.rejects) << '\n';
        }
        write_pairs(os, v.shared, d.items, d.labels, a.format);
    } else if (a.format == "delimited") {
        os << "kind\trejects\tlargest_pure_group\trejected\n";
        os << to_string(v.kind) << '\t' << v.rejects.size() << '\t' << id_list(d.items, v.largest_pure_group) << '\t'
           << id_list(d.items, v.rejects) << '\n';
    } else {
        os << "series\tx\ty\n";
        write_pairs(os, v.shared, d.items, d.labels, a.format);
    }
    return kOk;
}

// --- surprise

struct SurpriseArgs {
    std::string train;
    std::string test;
    std::string output;
    std::string format = "table";
    BuildFlags flags;
};

std::string first_label_name(const Dataset& d, const std::string& fallback) {
    return d.items.empty() ? fallback : d.labels.display_name(d.items.front().labels.front());
}

int cmd_surprise(const SurpriseArgs& a, std::ostream& out) {
    const BuildConfig cfg = a.flags.config();
    LabelTable table;
    Dataset train = load_dataset(a.train);
    Dataset test = load_dataset(a.test);
    adopt_labels(train, table);
    adopt_labels(test, table);
    const ClusterTree tree = build(train.items, cfg, table);
    const SurpriseReport r =
        surprise(tree, test.items, first_label_name(train, "familiar"), first_label_name(test, "test"));
    Sink sink(a.output, out);
    std::ostream& os = *sink;
    if (a.format == "table") {
        os << "familiar " << r.familiar_label << ", test " << r.novel_label << ": " << r.n_outside << " of "
           << r.n_test << " outside, surprise " << fixed2(r.surprise) << "%\n";
    } else if (a.format == "delimited") {
        os << "familiar\ttest\tn_test\tn_outside\tsurprise_percent\n";
        os << r.familiar_label << '\t' << r.novel_label << '\t' << r.n_test << '\t' << r.n_outside << '\t'
           << fixed2(r.surprise) << '\n';
    } else {
        os << "series\tx\ty\n";
        os << "surprise\t" << r.novel_label << '\t' << r.surprise << '\n';
    }
    return kOk;
}

// --- asymmetry

struct AsymmetryArgs {
    std::string first_train, first_test, second_train, second_test;
    std::string first_name, second_name;
    std::string mode = "standard";
    std::string model = "clusterflow";
    std::optional<long long> parameters;
    std::string detail;
    std::string output;
    std::string format = "table";
    BuildFlags flags;
};

int cmd_asymmetry(const AsymmetryArgs& a, std::ostream& out) {
    const BuildConfig cfg = a.flags.config();
    const ProtocolMode mode = a.mode == "joint"              ? ProtocolMode::Joint
                              : a.mode == "training-control" ? ProtocolMode::TrainingControl
                                                             : ProtocolMode::Standard;
    LabelTable table;
    auto load = [&](const std::string& p) {
        Dataset d = load_dataset(p);
        adopt_labels(d, table);
        return d;
    };
    Dataset ftr = load(a.first_train), fte = load(a.first_test), str = load(a.second_train), ste = load(a.second_test);
    const ClassSplit first{a.first_name.empty() ? first_label_name(ftr, "first") : a.first_name, std::move(ftr.items),
                           std::move(fte.items)};
    const ClassSplit second{a.second_name.empty() ? first_label_name(str, "second") : a.second_name,
                            std::move(str.items), std::move(ste.items)};
    const PairedResult r = run_paired_protocol(first, second, cfg, mode);

    if (!a.detail.empty()) {
        Sink detail(a.detail, out);
        write_paired_detail(*detail, r);
    }
    Sink sink(a.output, out);
    std::ostream& os = *sink;
    if (a.format == "plotdata") {
        write_paired_plotdata(os, r);
    } else if (a.format == "delimited") {
        const std::vector<ModelRow> rows{{a.model, r.familiar.asymmetry, r.novel.asymmetry, a.parameters}};
        write_asymmetry_table(os, rows);
    } else {
        auto signed2 = [](double v) { return (v > 0 ? "+" : "") + fixed2(v); };
        os << "asymmetry novel     " << signed2(r.novel.asymmetry) << " (+ toward " << r.first_name << ")\n";
        os << "asymmetry familiar  " << signed2(r.familiar.asymmetry) << " (+ toward " << r.first_name << ")\n";
        if (r.pure_fraction_first) {
            os << "pure fraction       " << r.first_name << ' ' << fixed2(*r.pure_fraction_first) << "%, "
               << r.second_name << ' ' << fixed2(*r.pure_fraction_second) << "%\n";
        }
    }
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical box clustering over labelled vectors", "clusterflow"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "clusterflow 1.0.0");

    BuildArgs b;
    auto* build_cmd = app.add_subcommand("build", "Build a cluster tree from a dataset");
    build_cmd->add_option("data", b.data, "Dataset: manifest (.json), CFA1 dump, .csv or .tsv")
        ->required()
        ->check(CLI::ExistingFile);
    build_cmd->add_option("-o,--output", b.output, "Tree file to write")->required();
    add_build_flags(build_cmd, b.flags);
    add_format(build_cmd, b.format);

    AssignArgs as;
    auto* assign_cmd = app.add_subcommand("assign", "Guess labels for a dataset with a saved tree");
    assign_cmd->add_option("tree", as.tree, "Tree file")->required()->check(CLI::ExistingFile);
    assign_cmd->add_option("data", as.data, "Dataset to label")->required()->check(CLI::ExistingFile);
    assign_cmd->add_option("-o,--output", as.output, "Output file (default stdout)");
    assign_cmd->add_option("--top-k", as.top_k, "Labels reported per point")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    auto* thresholds = assign_cmd
                           ->add_option("--thresholds", as.thresholds,
                                        "Emit the confidence histogram instead of rows; optional comma-separated "
                                        "thresholds (default 0.95,0.90,0.50,0.20)")
                           ->expected(0, 1);
    assign_cmd->add_option("--threads", as.threads, "Worker cap (0 = all cores)")->capture_default_str();
    add_format(assign_cmd, as.format);

    ReasonArgs re;
    auto* reason_cmd = app.add_subcommand("reason", "Classify the relation among three (or, with --group, n) items");
    reason_cmd->add_option("data", re.data, "Dataset holding the items")->required()->check(CLI::ExistingFile);
    reason_cmd->add_flag("--group", re.group, "Generalize over any number of items");
    reason_cmd->add_option("-o,--output", re.output, "Output file (default stdout)");
    add_build_flags(reason_cmd, re.flags);
    add_format(reason_cmd, re.format);

    SurpriseArgs su;
    auto* surprise_cmd = app.add_subcommand("surprise", "Share of test points outside a familiar-class world box");
    surprise_cmd->add_option("train", su.train, "Familiar training set")->required()->check(CLI::ExistingFile);
    surprise_cmd->add_option("test", su.test, "Test set")->required()->check(CLI::ExistingFile);
    surprise_cmd->add_option("-o,--output", su.output, "Output file (default stdout)");
    add_build_flags(surprise_cmd, su.flags);
    add_format(surprise_cmd, su.format);

    AsymmetryArgs ay;
    auto* asym_cmd = app.add_subcommand("asymmetry", "Paired familiarization runs and their asymmetry");
    asym_cmd->add_option("first-train", ay.first_train)->required()->check(CLI::ExistingFile);
    asym_cmd->add_option("first-test", ay.first_test)->required()->check(CLI::ExistingFile);
    asym_cmd->add_option("second-train", ay.second_train)->required()->check(CLI::ExistingFile);
    asym_cmd->add_option("second-test", ay.second_test)->required()->check(CLI::ExistingFile);
    asym_cmd->add_option("--first-name", ay.first_name, "Name of the first class (default: its first label)");
    asym_cmd->add_option("--second-name", ay.second_name, "Name of the second class");
    asym_cmd->add_option("--mode", ay.mode, "Protocol")
        ->check(CLI::IsMember({"standard", "training-control", "joint"}))
        ->capture_default_str();
    asym_cmd->add_option("--model", ay.model, "Model name for the delimited table")->capture_default_str();
    asym_cmd->add_option("--parameters", ay.parameters, "Parameter count for the delimited table");
    asym_cmd->add_option("--detail", ay.detail, "Also write the per-run detail file here");
    asym_cmd->add_option("-o,--output", ay.output, "Output file (default stdout)");
    add_build_flags(asym_cmd, ay.flags);
    add_format(asym_cmd, ay.format);

    const CLI::App* active = &app;
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (build_cmd->parsed()) {
            active = build_cmd;
            return cmd_build(b, out);
        }
        if (assign_cmd->parsed()) {
            active = assign_cmd;
            as.histogram = thresholds->count() > 0;
            parse_thresholds(as.thresholds);
            return cmd_assign(as, out, err);
        }
        if (reason_cmd->parsed()) {
            active = reason_cmd;
            return cmd_reason(re, out);
        }
        if (surprise_cmd->parsed()) {
            active = surprise_cmd;
            return cmd_surprise(su, out);
        }
        active = asym_cmd;
        return cmd_asymmetry(ay, out);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUserError;
    } catch (const InvariantError& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    } catch (const ArityError& e) {
        err << "error: " << e.what() << "\n\n" << active->help();
        return kUserError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUserError;
    }
}

} // namespace clusterflow::cli
