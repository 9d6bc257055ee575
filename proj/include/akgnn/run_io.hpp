#ifndef AKGNN_RUN_IO_HPP
#define AKGNN_RUN_IO_HPP

#include "akgnn/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace akgnn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "akgnn-checkpoint";

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

/// Self-describing text checkpoint: format tag and version, variant,
/// dimensions, hyperparameters and every parameter tensor as nested arrays.
/// Doubles are written in shortest round-trip form, so reloading is exact.
nlohmann::json checkpoint_to_json(const ModelParams& params, const TrainConfig& config);
ModelParams checkpoint_from_json(const nlohmann::json& j, TrainConfig* config = nullptr);

void save_checkpoint(const std::filesystem::path& file, const ModelParams& params, const TrainConfig& config);
ModelParams load_checkpoint(const std::filesystem::path& file, TrainConfig* config = nullptr);

/// Contents of metrics.json. Contains no timing or host information, so two
/// identical runs produce identical bytes.
nlohmann::json metrics_json(const TrainResult& result, const TrainConfig& config);

/// Writes config.json, checkpoint.json, metrics.json, loss_curve.csv and
/// lambda_trace.csv into `dir` (created if needed).
void write_run_directory(const std::filesystem::path& dir, const TrainResult& result, const TrainConfig& config,
                         const std::string& data_path);

/// %.6g formatting used for every CSV/log float.
std::string format_short(double v);

} // namespace akgnn

#endif // AKGNN_RUN_IO_HPP
