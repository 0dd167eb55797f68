#pragma once

#include "clusterflow/tree.hpp"

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace clusterflow {

/**
 * Describes a dataset on disk. Relative paths in a manifest file are resolved
 * against the manifest's directory.
 *
 * Tabular files need a header row. Every column other than the label and id
 * columns is a feature. Labels come either from `label_column` (values split
 * on `label_separator`) or from `label_file`, a delimited file with header
 * `id<delim>labels` keyed by the id column (or by 1-based row number).
 */
struct DatasetManifest {
    std::filesystem::path feature_file;
    std::optional<std::filesystem::path> label_file;
    std::string label_column = "labels";
    std::optional<std::string> id_column;
    char delimiter = ',';
    char label_separator = ';';
    std::string missing_token; ///< cells equal to this (or empty) are missing
    std::size_t dim = 0;       ///< 0 means "take it from the header"
    std::optional<std::filesystem::path> label_dictionary;
};

/// Reads a JSON manifest. Throws ParseError or ConfigError.
DatasetManifest read_manifest(const std::filesystem::path& path);

struct Dataset {
    std::vector<Activation> items;
    LabelTable labels;
    std::vector<std::string> feature_names;
    std::size_t missing_cells = 0;

    std::size_t dim() const noexcept { return items.empty() ? feature_names.size() : items.front().features.dim(); }
};

/// Ragged row -> ParseError naming the row; a row with no labels -> LabelError.
Dataset load_tabular(const DatasetManifest& manifest);
Dataset load_tabular(std::istream& in, const DatasetManifest& manifest, LabelTable labels = {});

/**
 * Dense activation dump: either the CFA1 binary format or a delimited file
 * (read like a tabular file, but every cell must be present).
 */
Dataset load_activations(const DatasetManifest& manifest);

/// CFA1 stream. Label ids in the records index the header's label table.
Dataset read_cfa1(std::istream& in);
void write_cfa1(std::ostream& out, std::span<const Activation> items, const LabelTable& labels);

void write_activations(const std::filesystem::path& path, std::span<const Activation> items,
                       const LabelTable& labels);

/// True when the file starts with the CFA1 magic bytes.
bool is_cfa1(const std::filesystem::path& path);

/**
 * Loads whatever `path` names: a JSON manifest (*.json), a CFA1 dump, or a
 * tabular file with default settings (a column named "id" holds source ids).
 */
Dataset load_dataset(const std::filesystem::path& path);

/// "key<TAB>name" per line; blank lines and lines starting with '#' are skipped.
void load_label_dictionary(std::istream& in, LabelTable& labels);
void load_label_dictionary(const std::filesystem::path& path, LabelTable& labels);

inline constexpr std::string_view kTreeFormat = "clusterflow-tree";
inline constexpr int kTreeVersion = 1;

/// JSON tree file. Doubles are written in shortest round-trip form.
void save_tree(std::ostream& out, const ClusterTree& tree);
void save_tree(const std::filesystem::path& path, const ClusterTree& tree);

/// Throws VersionError on a foreign format or version, ParseError on a damaged file.
ClusterTree load_tree(std::istream& in);
ClusterTree load_tree(const std::filesystem::path& path);

} // namespace clusterflow
