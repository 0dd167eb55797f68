#include "clusterflow/dataio.hpp"

#include "clusterflow/errors.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace clusterflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// --- text helpers

std::vector<std::string> split(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) {
        return false;
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    return true;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

LabelSet parse_labels(std::string_view cell, char sep, LabelTable& labels) {
    std::vector<LabelId> ids;
    for (const auto& part : split(cell, sep)) {
        const auto key = trim(part);
        if (!key.empty()) {
            ids.push_back(labels.intern(key));
        }
    }
    return make_label_set(std::move(ids));
}

// --- little-endian binary helpers

template <typename T>
void put(std::ostream& out, T v) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in, const char* what) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), bytes.size())) {
        throw ParseError(std::string("CFA1: truncated ") + what);
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
}

std::string get_bytes(std::istream& in, std::uint32_t n, const char* what) {
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) {
        throw ParseError(std::string("CFA1: truncated ") + what);
    }
    return s;
}

constexpr std::string_view kMagic = "CFA1";

// --- JSON helpers. Non-finite doubles only occur in the stats of dimensions
// that never saw a value; they are stored as strings.

json num(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v > 0 ? "inf" : "-inf";
}

double to_num(const json& j) {
    if (j.is_number()) {
        return j.get<double>();
    }
    const auto s = j.get<std::string>();
    if (s == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (s == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    if (s == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    throw ParseError("tree file: bad number '" + s + "'");
}

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) {
        a.push_back(num(x));
    }
    return a;
}

std::vector<double> to_nums(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) {
        out.push_back(to_num(x));
    }
    return out;
}

json stats_to_json(const DimStats& s) {
    const auto st = s.state();
    return {{"count", st.count}, {"present", st.present}, {"mean", nums(st.mean)}, {"m2", nums(st.m2)},
            {"min", nums(st.min)}, {"max", nums(st.max)}};
}

DimStats stats_from_json(const json& j) {
    DimStats::State st;
    st.count = j.at("count").get<std::size_t>();
    st.present = j.at("present").get<std::vector<std::size_t>>();
    st.mean = to_nums(j.at("mean"));
    st.m2 = to_nums(j.at("m2"));
    st.min = to_nums(j.at("min"));
    st.max = to_nums(j.at("max"));
    return DimStats::from_state(std::move(st));
}

json node_to_json(const Cluster& c) {
    const auto dims = c.box.active_dims();
    std::vector<double> lo;
    std::vector<double> hi;
    for (std::size_t d : dims) {
        lo.push_back(c.box.lo(d));
        hi.push_back(c.box.hi(d));
    }
    json hist = json::array();
    for (const auto& [l, n] : c.label_histogram) {
        hist.push_back({l, n});
    }
    json children = json::array();
    for (const auto& child : c.children) {
        children.push_back(node_to_json(child));
    }
    return {{"mode", to_string(c.box.mode())},
            {"dim", c.box.dim()},
            {"dims", dims},
            {"lo", nums(lo)},
            {"hi", nums(hi)},
            {"status", to_string(c.status)},
            {"common_labels", c.common_labels},
            {"label_histogram", hist},
            {"members", c.members},
            {"stats", stats_to_json(c.stats)},
            {"children", children}};
}

Cluster node_from_json(const json& j) {
    Cluster c;
    c.box = BoundingBox(parse_box_mode(j.at("mode").get<std::string>()), j.at("dim").get<std::size_t>());
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    const auto lo = to_nums(j.at("lo"));
    const auto hi = to_nums(j.at("hi"));
    if (lo.size() != dims.size() || hi.size() != dims.size()) {
        throw ParseError("tree file: box bounds do not match its dimensions");
    }
    for (std::size_t i = 0; i < dims.size(); ++i) {
        c.box.set_bounds(dims[i], lo[i], hi[i]);
    }
    c.status = parse_cluster_status(j.at("status").get<std::string>());
    c.common_labels = j.at("common_labels").get<LabelSet>();
    for (const auto& pair : j.at("label_histogram")) {
        c.label_histogram[pair.at(0).get<LabelId>()] = pair.at(1).get<std::size_t>();
    }
    c.members = j.at("members").get<std::vector<std::size_t>>();
    c.stats = stats_from_json(j.at("stats"));
    for (const auto& child : j.at("children")) {
        c.children.push_back(node_from_json(child));
    }
    return c;
}

json config_to_json(const BuildConfig& c) {
    return {{"metric", to_string(c.metric)},
            {"box_mode", to_string(c.box_mode)},
            {"expand_fraction", c.expand_fraction},
            {"seed_algorithm", to_string(c.seed_config.algorithm)},
            {"k", c.seed_config.k},
            {"k_max", c.seed_config.k_max},
            {"max_iters", c.seed_config.max_iters},
            {"tolerance", c.seed_config.tolerance},
            {"batch_size", c.batch_size},
            {"max_depth", c.max_depth},
            {"rng_seed", c.rng_seed}};
}

BuildConfig config_from_json(const json& j) {
    BuildConfig c;
    c.metric = parse_metric(j.at("metric").get<std::string>());
    c.box_mode = parse_box_mode(j.at("box_mode").get<std::string>());
    c.expand_fraction = j.at("expand_fraction").get<double>();
    c.seed_config.algorithm = parse_seed_algorithm(j.at("seed_algorithm").get<std::string>());
    c.seed_config.k = j.at("k").get<std::size_t>();
    c.seed_config.k_max = j.at("k_max").get<std::size_t>();
    c.seed_config.max_iters = j.at("max_iters").get<std::size_t>();
    c.seed_config.tolerance = j.at("tolerance").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_depth = j.at("max_depth").get<std::size_t>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.seed_config.rng_seed = c.rng_seed;
    return c;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
    return p.is_absolute() ? p : base / p;
}

char single_char(const json& j, const char* field) {
    const auto s = j.get<std::string>();
    if (s == "\\t" || s == "tab") {
        return '\t';
    }
    if (s.size() != 1) {
        throw ConfigError(std::string("manifest: ") + field + " must be a single character");
    }
    return s.front();
}

std::map<std::string, std::string> read_label_file(const fs::path& path, char delim) {
    auto in = open_in(path);
    std::string line;
    if (!read_line(in, line)) {
        throw ParseError(path.string() + ": empty label file");
    }
    std::map<std::string, std::string> out;
    std::size_t row = 1;
    while (read_line(in, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        const auto pos = line.find(delim);
        if (pos == std::string::npos) {
            throw ParseError(path.string() + ": row " + std::to_string(row) + " has no label field");
        }
        out[std::string(trim(std::string_view(line).substr(0, pos)))] = line.substr(pos + 1);
    }
    return out;
}

} // namespace

DatasetManifest read_manifest(const fs::path& path) {
    auto in = open_in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    const fs::path base = path.parent_path();
    DatasetManifest m;
    try {
        m.feature_file = resolve(base, j.at("feature_file").get<std::string>());
        if (j.contains("label_file")) {
            m.label_file = resolve(base, j["label_file"].get<std::string>());
        }
        if (j.contains("label_column")) {
            m.label_column = j["label_column"].get<std::string>();
        }
        if (j.contains("id_column")) {
            m.id_column = j["id_column"].get<std::string>();
        }
        if (j.contains("delimiter")) {
            m.delimiter = single_char(j["delimiter"], "delimiter");
        }
        if (j.contains("label_separator")) {
            m.label_separator = single_char(j["label_separator"], "label_separator");
        }
        if (j.contains("missing_token")) {
            m.missing_token = j["missing_token"].get<std::string>();
        }
        if (j.contains("dim")) {
            m.dim = j["dim"].get<std::size_t>();
            if (m.dim == 0) {
                throw ConfigError("manifest: dim must be positive");
            }
        }
        if (j.contains("label_dictionary")) {
            m.label_dictionary = resolve(base, j["label_dictionary"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return m;
}

Dataset load_tabular(std::istream& in, const DatasetManifest& m, LabelTable labels) {
    std::string line;
    if (!read_line(in, line)) {
        throw ParseError("tabular: missing header row");
    }
    const auto header = split(line, m.delimiter);
    std::optional<std::size_t> label_col;
    std::optional<std::size_t> id_col;
    std::vector<std::size_t> feature_cols;
    Dataset ds;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto name = std::string(trim(header[c]));
        if (!m.label_file && name == m.label_column) {
            label_col = c;
        } else if (m.id_column && name == *m.id_column) {
            id_col = c;
        } else {
            feature_cols.push_back(c);
            ds.feature_names.push_back(name);
        }
    }
    if (!m.label_file && !label_col) {
        throw ParseError("tabular: no label column '" + m.label_column + "' in header");
    }
    if (m.id_column && !id_col) {
        throw ParseError("tabular: no id column '" + *m.id_column + "' in header");
    }
    if (feature_cols.empty()) {
        throw ParseError("tabular: no feature columns");
    }
    if (m.dim != 0 && m.dim != feature_cols.size()) {
        throw ParseError("tabular: header has " + std::to_string(feature_cols.size()) +
                         " feature columns, manifest says " + std::to_string(m.dim));
    }

    std::map<std::string, std::string> label_lookup;
    if (m.label_file) {
        label_lookup = read_label_file(*m.label_file, m.delimiter);
    }

    std::size_t row = 1; // header is row 1
    std::size_t data_row = 0;
    while (read_line(in, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        ++data_row;
        const auto cells = split(line, m.delimiter);
        if (cells.size() != header.size()) {
            throw ParseError("tabular: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " fields, expected " + std::to_string(header.size()));
        }
        std::vector<std::optional<double>> values;
        values.reserve(feature_cols.size());
        for (std::size_t c : feature_cols) {
            const auto cell = trim(cells[c]);
            if (cell.empty() || cell == m.missing_token) {
                values.emplace_back();
                ++ds.missing_cells;
                continue;
            }
            const auto v = parse_double(cell);
            if (!v) {
                throw ParseError("tabular: row " + std::to_string(row) + ", column '" + header[c] +
                                 "': not a number: '" + std::string(cell) + "'");
            }
            values.push_back(*v);
        }
        std::string id = id_col ? std::string(trim(cells[*id_col])) : "row" + std::to_string(data_row);
        std::string label_cell;
        if (label_col) {
            label_cell = cells[*label_col];
        } else {
            const std::string key = id_col ? id : std::to_string(data_row);
            auto it = label_lookup.find(key);
            if (it != label_lookup.end()) {
                label_cell = it->second;
            }
        }
        LabelSet ls = parse_labels(label_cell, m.label_separator, labels);
        if (ls.empty()) {
            throw LabelError("tabular: row " + std::to_string(row) + " has no labels");
        }
        ds.items.push_back({Vector::from_optional(values), std::move(ls), std::move(id)});
    }
    ds.labels = std::move(labels);
    return ds;
}

Dataset load_tabular(const DatasetManifest& m) {
    LabelTable labels;
    if (m.label_dictionary) {
        load_label_dictionary(*m.label_dictionary, labels);
    }
    auto in = open_in(m.feature_file);
    return load_tabular(in, m, std::move(labels));
}

void write_cfa1(std::ostream& out, std::span<const Activation> items, const LabelTable& labels) {
    const std::size_t dim = items.empty() ? 0 : items.front().features.dim();
    std::ostringstream header;
    header << "dim " << dim << "\ncount " << items.size() << "\nlabels " << labels.size() << '\n';
    for (const auto& key : labels.keys()) {
        if (key.find('\n') != std::string::npos) {
            throw LabelError("CFA1: label key contains a newline");
        }
        header << key << '\n';
    }
    const std::string h = header.str();
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& a : items) {
        if (a.features.dim() != dim) {
            throw DimensionError("CFA1: records have differing dimensions");
        }
        if (!a.features.complete()) {
            throw MissingDataError("CFA1: activation dumps hold complete vectors only");
        }
        put<std::uint32_t>(out, static_cast<std::uint32_t>(a.source_id.size()));
        out.write(a.source_id.data(), static_cast<std::streamsize>(a.source_id.size()));
        for (std::size_t d = 0; d < dim; ++d) {
            put<double>(out, a.features.value(d));
        }
        put<std::uint32_t>(out, static_cast<std::uint32_t>(a.labels.size()));
        for (LabelId l : a.labels) {
            if (l >= labels.size()) {
                throw LabelError("CFA1: label id outside the label table");
            }
            put<std::uint32_t>(out, l);
        }
    }
    if (!out) {
        throw Error("CFA1: write failed");
    }
}

Dataset read_cfa1(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || std::string_view(magic.data(), 4) != kMagic) {
        throw ParseError("CFA1: bad magic bytes");
    }
    const auto header_len = get<std::uint32_t>(in, "header length");
    std::istringstream header(get_bytes(in, header_len, "header"));
    std::string key;
    std::size_t dim = 0;
    std::size_t count = 0;
    std::size_t n_labels = 0;
    if (!(header >> key >> dim) || key != "dim" || !(header >> key >> count) || key != "count" ||
        !(header >> key >> n_labels) || key != "labels") {
        throw ParseError("CFA1: malformed header");
    }
    header.ignore(1);
    Dataset ds;
    std::string line;
    for (std::size_t i = 0; i < n_labels; ++i) {
        if (!std::getline(header, line)) {
            throw ParseError("CFA1: header label table is short");
        }
        ds.labels.intern(line);
    }
    if (ds.labels.size() != n_labels) {
        throw ParseError("CFA1: duplicate label keys in header");
    }
    for (std::size_t d = 0; d < dim; ++d) {
        ds.feature_names.push_back("f" + std::to_string(d));
    }
    ds.items.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        const auto id_len = get<std::uint32_t>(in, "record id length");
        std::string id = get_bytes(in, id_len, "record id");
        std::vector<double> values(dim);
        for (auto& v : values) {
            v = get<double>(in, "record vector");
        }
        const auto nl = get<std::uint32_t>(in, "record label count");
        std::vector<LabelId> ids(nl);
        for (auto& l : ids) {
            l = get<std::uint32_t>(in, "record labels");
            if (l >= n_labels) {
                throw ParseError("CFA1: record " + std::to_string(r) + " has label id " + std::to_string(l) +
                                 " outside the label table");
            }
        }
        if (ids.empty()) {
            throw LabelError("CFA1: record " + std::to_string(r) + " has no labels");
        }
        try {
            ds.items.push_back({Vector(std::move(values)), make_label_set(std::move(ids)), std::move(id)});
        } catch (const std::invalid_argument& e) {
            throw ParseError("CFA1: record " + std::to_string(r) + ": " + e.what());
        } catch (const MissingDataError& e) {
            throw ParseError("CFA1: record " + std::to_string(r) + ": " + e.what());
        }
    }
    return ds;
}

void write_activations(const fs::path& path, std::span<const Activation> items, const LabelTable& labels) {
    auto out = open_out(path, std::ios::binary);
    write_cfa1(out, items, labels);
}

bool is_cfa1(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::array<char, 4> magic{};
    return in.read(magic.data(), magic.size()) && std::string_view(magic.data(), 4) == kMagic;
}

Dataset load_activations(const DatasetManifest& m) {
    Dataset ds;
    if (is_cfa1(m.feature_file)) {
        auto in = open_in(m.feature_file, std::ios::binary);
        ds = read_cfa1(in);
        if (m.label_dictionary) {
            load_label_dictionary(*m.label_dictionary, ds.labels);
        }
    } else {
        ds = load_tabular(m);
        if (ds.missing_cells > 0) {
            throw ParseError("activation dump: " + std::to_string(ds.missing_cells) +
                             " missing cells; dumps must be dense");
        }
    }
    if (m.dim != 0 && ds.dim() != m.dim) {
        throw ParseError("activation dump: dimension " + std::to_string(ds.dim()) + ", manifest says " +
                         std::to_string(m.dim));
    }
    return ds;
}

Dataset load_dataset(const fs::path& path) {
    if (path.extension() == ".json") {
        const DatasetManifest m = read_manifest(path);
        return is_cfa1(m.feature_file) ? load_activations(m) : load_tabular(m);
    }
    DatasetManifest m;
    m.feature_file = path;
    if (is_cfa1(path)) {
        return load_activations(m);
    }
    if (path.extension() == ".tsv") {
        m.delimiter = '\t';
    }
    // A bare file may name its id column "id".
    auto in = open_in(path);
    std::string header;
    read_line(in, header);
    for (const auto& name : split(header, m.delimiter)) {
        if (trim(name) == "id") {
            m.id_column = "id";
        }
    }
    return load_tabular(m);
}

void load_label_dictionary(std::istream& in, LabelTable& labels) {
    std::string line;
    std::size_t row = 0;
    while (read_line(in, line)) {
        ++row;
        if (trim(line).empty() || line.front() == '#') {
            continue;
        }
        const auto pos = line.find('\t');
        if (pos == std::string::npos) {
            throw ParseError("label dictionary: line " + std::to_string(row) + " has no tab");
        }
        labels.set_display_name(trim(std::string_view(line).substr(0, pos)),
                                std::string(trim(std::string_view(line).substr(pos + 1))));
    }
}

void load_label_dictionary(const fs::path& path, LabelTable& labels) {
    auto in = open_in(path);
    load_label_dictionary(in, labels);
}

void save_tree(std::ostream& out, const ClusterTree& tree) {
    json j;
    j["format"] = kTreeFormat;
    j["version"] = kTreeVersion;
    j["config"] = config_to_json(tree.config());
    j["global_stats"] = stats_to_json(tree.global_stats());
    j["labels"] = {{"keys", tree.labels().keys()}, {"names", tree.labels().display_names()}};
    j["sources"] = tree.sources();
    j["rejects"] = tree.rejects();
    j["root"] = node_to_json(tree.root());
    out << j.dump(1) << '\n';
    if (!out) {
        throw Error("save_tree: write failed");
    }
}

void save_tree(const fs::path& path, const ClusterTree& tree) {
    auto out = open_out(path);
    save_tree(out, tree);
}

ClusterTree load_tree(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("tree file: ") + e.what());
    }
    if (!j.is_object() || !j.contains("format") || j["format"] != kTreeFormat) {
        throw VersionError("tree file: not a clusterflow tree");
    }
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kTreeVersion) {
        throw VersionError("tree file: unsupported version " + j.value("version", json()).dump() +
                           ", expected " + std::to_string(kTreeVersion));
    }
    try {
        LabelTable labels;
        for (const auto& key : j.at("labels").at("keys")) {
            labels.intern(key.get<std::string>());
        }
        for (const auto& [key, name] : j.at("labels").at("names").items()) {
            labels.set_display_name(key, name.get<std::string>());
        }
        return ClusterTree(node_from_json(j.at("root")), config_from_json(j.at("config")),
                           stats_from_json(j.at("global_stats")), std::move(labels),
                           j.at("sources").get<std::vector<std::string>>(),
                           j.at("rejects").get<std::vector<std::size_t>>());
    } catch (const json::exception& e) {
        throw ParseError(std::string("tree file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("tree file: ") + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(std::string("tree file: ") + e.what());
    }
}

ClusterTree load_tree(const fs::path& path) {
    auto in = open_in(path);
    return load_tree(in);
}

} // namespace clusterflow
