#include "akgnn/dataset.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

namespace akgnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNormalizedTolerance = 1e-12;

std::ifstream open_input(const fs::path& file)
{
    if (!fs::exists(file))
        throw DataError("missing file: " + file.string());
    std::ifstream in(file);
    if (!in)
        throw DataError("cannot open " + file.string());
    return in;
}

json read_json(const fs::path& file)
{
    auto in = open_input(file);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + file.string() + ": " + e.what());
    }
}

[[noreturn]] void malformed(const fs::path& file, std::size_t line, const std::string& why)
{
    throw DataError(file.filename().string() + " line " + std::to_string(line) + ": " + why);
}

template <typename T>
bool parse_number(std::string_view text, T& out)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (text.empty())
        return false;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return fields;
}

/// Calls fn(line_number, line) for each line; a trailing empty line is allowed.
template <typename Fn>
void for_each_line(const fs::path& file, Fn&& fn)
{
    auto in = open_input(file);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        fn(number, std::string_view(line));
    }
}

Index json_count(const json& meta, const char* key, const fs::path& file)
{
    if (!meta.contains(key) || !meta[key].is_number_integer())
        throw DataError(file.string() + ": field '" + key + "' missing or not an integer");
    const auto v = meta[key].get<long long>();
    if (v < 1)
        throw DataError(file.string() + ": field '" + key + "' must be positive, got " + std::to_string(v));
    return static_cast<Index>(v);
}

std::vector<Index> json_mask(const json& split, const char* key, const fs::path& file)
{
    if (!split.contains(key) || !split[key].is_array())
        throw DataError(file.string() + ": mask '" + key + "' missing or not an array");
    std::vector<Index> out;
    for (const auto& v : split[key]) {
        if (!v.is_number_integer())
            throw DataError(file.string() + ": mask '" + key + "' contains a non-integer entry");
        out.push_back(static_cast<Index>(v.get<long long>()));
    }
    return out;
}

} // namespace

Matrix row_normalize(const Matrix& features)
{
    if ((features.array() < 0.0).any())
        throw DataError("row_normalize: features must be non-negative");
    Matrix out = features;
    for (Index i = 0; i < out.rows(); ++i) {
        const double s = out.row(i).sum();
        // Rows already summing to 1 up to rounding are left alone, which makes
        // the transform exactly idempotent.
        if (s > 0.0 && std::abs(s - 1.0) > kNormalizedTolerance)
            out.row(i) /= s;
    }
    return out;
}

std::vector<std::string> validate_dataset(const Dataset& data, const CsrGraph& graph)
{
    const Index n = data.num_nodes();
    if (graph.num_nodes() != n)
        throw DataError("graph has " + std::to_string(graph.num_nodes()) + " nodes but features have " +
                        std::to_string(n) + " rows");
    if (static_cast<Index>(data.labels.size()) != n)
        throw DataError("expected " + std::to_string(n) + " labels, got " + std::to_string(data.labels.size()));
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        if (data.labels[i] < 0 || data.labels[i] >= data.num_classes)
            throw DataError("label out of range: node " + std::to_string(i) + " has label " +
                            std::to_string(data.labels[i]) + ", expected [0, " + std::to_string(data.num_classes) +
                            ")");
    }

    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    const std::vector<Index>* masks[] = {&data.train, &data.val, &data.test};
    const char* names[] = {"train", "val", "test"};
    for (int m = 0; m < 3; ++m) {
        if (masks[m]->empty())
            throw DataError(std::string("mask '") + names[m] + "' is empty");
        for (Index idx : *masks[m]) {
            if (idx < 0 || idx >= n)
                throw DataError(std::string("mask '") + names[m] + "' index " + std::to_string(idx) +
                                " out of range for " + std::to_string(n) + " nodes");
            int& o = owner[static_cast<std::size_t>(idx)];
            if (o == m)
                throw DataError(std::string("mask '") + names[m] + "' lists node " + std::to_string(idx) + " twice");
            if (o >= 0)
                throw DataError(std::string("mask overlap: node ") + std::to_string(idx) + " is in both '" +
                                names[o] + "' and '" + names[m] + "'");
            o = m;
        }
    }

    require_no_isolated_nodes(graph);

    std::vector<std::string> warnings;
    std::vector<bool> seen(static_cast<std::size_t>(data.num_classes), false);
    for (Index idx : data.train)
        seen[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(idx)])] = true;
    for (int c = 0; c < data.num_classes; ++c) {
        if (!seen[static_cast<std::size_t>(c)])
            warnings.push_back("class " + std::to_string(c) + " has no training node");
    }
    return warnings;
}

LoadedDataset load_dataset(const fs::path& dir, const LoadOptions& options)
{
    if (!fs::is_directory(dir))
        throw DataError("dataset directory not found: " + dir.string());

    const auto meta_file = dir / "meta.json";
    const json meta = read_json(meta_file);
    const Index n = json_count(meta, "num_nodes", meta_file);
    const Index d = json_count(meta, "num_features", meta_file);
    const Index c = json_count(meta, "num_classes", meta_file);

    LoadedDataset out;
    Dataset& data = out.data;
    data.num_classes = static_cast<int>(c);

    const auto edges_file = dir / "edges.csv";
    std::vector<Edge> edges;
    for_each_line(edges_file, [&](std::size_t line, std::string_view text) {
        if (text.empty())
            malformed(edges_file, line, "empty line");
        const auto f = split_fields(text);
        Index src = 0;
        Index dst = 0;
        if (f.size() != 2 || !parse_number(f[0], src) || !parse_number(f[1], dst))
            malformed(edges_file, line, "expected 'src,dst', got '" + std::string(text) + "'");
        if (src < 0 || dst < 0 || src >= n || dst >= n)
            malformed(edges_file, line, "node id out of range [0, " + std::to_string(n) + ")");
        if (src == dst)
            malformed(edges_file, line, "self-loop at node " + std::to_string(src));
        edges.emplace_back(src, dst);
    });
    out.graph = build_graph(n, edges);

    const auto features_file = dir / "features.csv";
    data.features = Matrix::Zero(n, d);
    for_each_line(features_file, [&](std::size_t line, std::string_view text) {
        if (text.empty())
            malformed(features_file, line, "empty line");
        const auto f = split_fields(text);
        Index row = 0;
        Index col = 0;
        double value = 0.0;
        if (f.size() != 3 || !parse_number(f[0], row) || !parse_number(f[1], col) || !parse_number(f[2], value))
            malformed(features_file, line, "expected 'row,col,value', got '" + std::string(text) + "'");
        if (row < 0 || row >= n || col < 0 || col >= d)
            malformed(features_file, line, "entry (" + std::to_string(row) + "," + std::to_string(col) +
                                               ") outside " + shape_string(n, d));
        if (!std::isfinite(value) || value < 0.0)
            malformed(features_file, line, "feature values must be finite and non-negative");
        if (data.features(row, col) != 0.0)
            malformed(features_file, line, "duplicate entry (" + std::to_string(row) + "," + std::to_string(col) + ")");
        data.features(row, col) = value;
    });
    if (options.normalize_features)
        data.features = row_normalize(data.features);

    const auto labels_file = dir / "labels.csv";
    for_each_line(labels_file, [&](std::size_t line, std::string_view text) {
        int label = 0;
        if (!parse_number(text, label))
            malformed(labels_file, line, "expected an integer label, got '" + std::string(text) + "'");
        if (label < 0 || label >= c)
            malformed(labels_file, line,
                      "label out of range: " + std::to_string(label) + " not in [0, " + std::to_string(c) + ")");
        data.labels.push_back(label);
    });
    if (static_cast<Index>(data.labels.size()) != n)
        throw DataError(labels_file.filename().string() + ": expected " + std::to_string(n) + " labels, found " +
                        std::to_string(data.labels.size()));

    const auto split_file = dir / "split.json";
    const json split = read_json(split_file);
    data.train = json_mask(split, "train", split_file);
    data.val = json_mask(split, "val", split_file);
    data.test = json_mask(split, "test", split_file);

    out.warnings = validate_dataset(data, out.graph);
    return out;
}

void write_dataset(const fs::path& dir, const Dataset& data, const CsrGraph& graph)
{
    fs::create_directories(dir);
    {
        json meta = {{"num_nodes", data.num_nodes()},
                     {"num_features", data.num_features()},
                     {"num_classes", data.num_classes}};
        std::ofstream(dir / "meta.json") << meta.dump() << '\n';
    }
    {
        std::ofstream out(dir / "edges.csv");
        for (const auto& [i, j] : graph.edge_list())
            out << i << ',' << j << '\n';
    }
    {
        std::ofstream out(dir / "features.csv");
        char buf[64];
        for (Index i = 0; i < data.features.rows(); ++i) {
            for (Index j = 0; j < data.features.cols(); ++j) {
                const double v = data.features(i, j);
                if (v != 0.0) {
                    std::snprintf(buf, sizeof buf, "%.17g", v);
                    out << i << ',' << j << ',' << buf << '\n';
                }
            }
        }
    }
    {
        std::ofstream out(dir / "labels.csv");
        for (int label : data.labels)
            out << label << '\n';
    }
    {
        json split = {{"train", data.train}, {"val", data.val}, {"test", data.test}};
        std::ofstream(dir / "split.json") << split.dump() << '\n';
    }
}

} // namespace akgnn
