#ifndef AKGNN_DATASET_HPP
#define AKGNN_DATASET_HPP

#include "akgnn/graph.hpp"
#include "akgnn/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace akgnn {

/// Node features, labels and the fixed train/val/test split.
struct Dataset {
    Matrix features;            ///< N x d
    std::vector<int> labels;    ///< length N, class ids in [0, num_classes)
    std::vector<Index> train;
    std::vector<Index> val;
    std::vector<Index> test;
    int num_classes{};

    Index num_nodes() const noexcept { return features.rows(); }
    Index num_features() const noexcept { return features.cols(); }
};

struct LoadOptions {
    bool normalize_features{true};
};

struct LoadedDataset {
    Dataset data;
    CsrGraph graph;
    std::vector<std::string> warnings;
};

/**
 * Reads a portable dataset directory:
 *
 *   meta.json      {"num_nodes": N, "num_features": d, "num_classes": C}
 *   edges.csv      "src,dst" per undirected edge, 0-indexed
 *   features.csv   "row,col,value" per nonzero feature
 *   labels.csv     label of node i on line i
 *   split.json     {"train": [...], "val": [...], "test": [...]}
 *
 * The edge list is symmetrized and features are row-normalized unless
 * disabled. Every failure is a DataError whose message names the file and,
 * for parse errors, the 1-based line number.
 */
LoadedDataset load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Writes the portable format. Features are emitted as nonzero triplets with
/// 17 significant digits.
void write_dataset(const std::filesystem::path& dir, const Dataset& data, const CsrGraph& graph);

/// Divides every row with positive sum by that sum. Throws DataError on a negative entry.
Matrix row_normalize(const Matrix& features);

/// Split, label and graph consistency. Returns non-fatal findings (e.g. a class
/// absent from the training mask); throws DataError on violations.
std::vector<std::string> validate_dataset(const Dataset& data, const CsrGraph& graph);

} // namespace akgnn

#endif // AKGNN_DATASET_HPP
