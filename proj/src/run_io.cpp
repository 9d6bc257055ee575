#include "akgnn/run_io.hpp"

#include <cstdio>
#include <fstream>

namespace akgnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what)
{
    if (!j.is_array())
        throw DataError("checkpoint: '" + what + "' is not an array of rows");
    const auto rows = static_cast<Index>(j.size());
    const Index cols = rows == 0 ? 0 : static_cast<Index>(j[0].size());
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw DataError("checkpoint: '" + what + "' row " + std::to_string(i) + " is ragged");
        for (Index c = 0; c < cols; ++c)
            m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

void write_text(const fs::path& file, const std::string& text)
{
    std::ofstream out(file, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + file.string());
    out << text;
}

} // namespace

std::string format_short(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

json config_to_json(const TrainConfig& c)
{
    return {{"layers", c.layers},
            {"hidden", c.hidden},
            {"dropout", c.dropout},
            {"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"patience", c.patience},
            {"max_epochs", c.max_epochs},
            {"seed", c.seed},
            {"variant", std::string(to_string(c.variant))},
            {"head_depth", c.head_depth}};
}

TrainConfig config_from_json(const json& j)
{
    try {
        TrainConfig c;
        c.layers = j.at("layers").get<Index>();
        c.hidden = j.at("hidden").get<Index>();
        c.dropout = j.at("dropout").get<double>();
        c.learning_rate = j.at("learning_rate").get<double>();
        c.weight_decay = j.at("weight_decay").get<double>();
        c.patience = j.at("patience").get<int>();
        c.max_epochs = j.at("max_epochs").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.variant = parse_variant(j.at("variant").get<std::string>());
        c.head_depth = j.value("head_depth", Index{1});
        return c;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed config: ") + e.what());
    }
}

json checkpoint_to_json(const ModelParams& p, const TrainConfig& config)
{
    json params = {{"w_star", matrix_to_json(p.w_star)}, {"phi", matrix_to_json(p.phi)}};
    json layer_w = json::array();
    for (const auto& w : p.layer_w)
        layer_w.push_back(matrix_to_json(w));
    json head_w = json::array();
    json head_b = json::array();
    for (std::size_t l = 0; l < p.head_w.size(); ++l) {
        head_w.push_back(matrix_to_json(p.head_w[l]));
        head_b.push_back(matrix_to_json(p.head_b[l]));
    }
    params["layer_w"] = std::move(layer_w);
    params["head_w"] = std::move(head_w);
    params["head_b"] = std::move(head_b);

    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"variant", std::string(to_string(p.variant))},
            {"phi_trainable", p.phi_trainable},
            {"dims",
             {{"features", p.dims.features},
              {"hidden", p.dims.hidden},
              {"classes", p.dims.classes},
              {"layers", p.dims.layers},
              {"head_depth", p.dims.head_depth}}},
            {"config", config_to_json(config)},
            {"params", std::move(params)}};
}

ModelParams checkpoint_from_json(const json& j, TrainConfig* config)
{
    try {
        if (j.value("format", std::string{}) != kCheckpointFormat)
            throw DataError("not an akgnn checkpoint (missing format tag)");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion)
            throw DataError("unsupported checkpoint version " + std::to_string(version));

        ModelParams p;
        p.variant = parse_variant(j.at("variant").get<std::string>());
        p.phi_trainable = j.at("phi_trainable").get<bool>();
        const auto& d = j.at("dims");
        p.dims = {d.at("features").get<Index>(), d.at("hidden").get<Index>(), d.at("classes").get<Index>(),
                  d.at("layers").get<Index>(), d.at("head_depth").get<Index>()};
        const auto& params = j.at("params");
        p.w_star = matrix_from_json(params.at("w_star"), "w_star");
        p.phi = matrix_from_json(params.at("phi"), "phi");
        for (const auto& w : params.at("layer_w"))
            p.layer_w.push_back(matrix_from_json(w, "layer_w"));
        for (const auto& w : params.at("head_w"))
            p.head_w.push_back(matrix_from_json(w, "head_w"));
        for (const auto& b : params.at("head_b"))
            p.head_b.push_back(matrix_from_json(b, "head_b"));
        if (config)
            *config = config_from_json(j.at("config"));
        return p;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const fs::path& file, const ModelParams& params, const TrainConfig& config)
{
    write_text(file, checkpoint_to_json(params, config).dump(1) + "\n");
}

ModelParams load_checkpoint(const fs::path& file, TrainConfig* config)
{
    std::ifstream in(file);
    if (!in)
        throw DataError("cannot read checkpoint " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint " + file.string() + ": " + e.what());
    }
    return checkpoint_from_json(j, config);
}

json metrics_json(const TrainResult& r, const TrainConfig& config)
{
    return {{"variant", std::string(to_string(config.variant))},
            {"seed", config.seed},
            {"best_epoch", r.best_epoch},
            {"stopped_epoch", r.stopped_epoch},
            {"epochs_run", r.history.size()},
            {"best_val_loss", r.best_val_loss},
            {"train_accuracy", r.train_accuracy},
            {"val_accuracy", r.val_accuracy},
            {"test_accuracy", r.test_accuracy},
            {"lambda_max", lambda_trace(r.best)}};
}

void write_run_directory(const fs::path& dir, const TrainResult& result, const TrainConfig& config,
                         const std::string& data_path)
{
    fs::create_directories(dir);
    json cfg = config_to_json(config);
    cfg["data"] = data_path;
    write_text(dir / "config.json", cfg.dump(2) + "\n");
    save_checkpoint(dir / "checkpoint.json", result.best, config);
    write_text(dir / "metrics.json", metrics_json(result, config).dump(2) + "\n");

    std::string curve = "epoch,train_loss,val_loss,val_acc\n";
    std::string trace = "epoch";
    for (Index k = 0; k < config.layers; ++k)
        trace += ",lambda_" + std::to_string(k + 1);
    trace += "\n";
    for (const auto& rec : result.history) {
        curve += std::to_string(rec.epoch) + "," + format_short(rec.train_loss) + "," + format_short(rec.val_loss) +
                 "," + format_short(rec.val_accuracy) + "\n";
        trace += std::to_string(rec.epoch);
        for (double l : rec.lambda_max)
            trace += "," + format_short(l);
        trace += "\n";
    }
    write_text(dir / "loss_curve.csv", curve);
    write_text(dir / "lambda_trace.csv", trace);
}

} // namespace akgnn
