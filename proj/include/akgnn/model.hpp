#ifndef AKGNN_MODEL_HPP
#define AKGNN_MODEL_HPP

#include "akgnn/autodiff.hpp"
#include "akgnn/graph.hpp"
#include "akgnn/types.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace akgnn {

/// Full model and its three ablations.
enum class ModelVariant {
    Full,      ///< learnable lambda_max, single filter matrix, sum readout
    NoLambda,  ///< phi frozen at 1 (lambda_max = 2 in every layer)
    NoPt,      ///< one filter matrix per layer with relu in between
    NoReadout, ///< prediction from the last layer only
};

std::string_view to_string(ModelVariant v) noexcept;
/// Accepts "full", "no-lambda", "no-pt", "no-readout".
ModelVariant parse_variant(std::string_view name);

struct ModelDims {
    Index features{};
    Index hidden{};
    Index classes{};
    Index layers{};
    Index head_depth{1};
};

/// A named view of one trainable tensor.
struct ParamRef {
    std::string name;
    Matrix* value{};
    bool decay{};     ///< receives L2 weight decay
    bool trainable{};
};

struct ModelParams {
    ModelVariant variant{ModelVariant::Full};
    ModelDims dims;
    Matrix w_star;               ///< features x hidden; empty for NoPt
    Matrix phi;                  ///< 1 x layers
    bool phi_trainable{true};
    std::vector<Matrix> layer_w; ///< NoPt only: features x hidden, then hidden x hidden
    std::vector<Matrix> head_w;  ///< head_depth affine maps ending in hidden x classes
    std::vector<Matrix> head_b;  ///< 1 x out, one per head map

    /// Every tensor in a fixed order: w_star, phi, layer_w..., head_w/head_b pairs.
    std::vector<ParamRef> parameters();
    std::size_t scalar_count() const;
};

/// Glorot-normal filter and head weights, zero head bias, phi = 1.
ModelParams init_params(const ModelDims& dims, ModelVariant variant, std::uint64_t seed);

/// Draws a fan_in x fan_out matrix with entries ~ N(0, 2 / (fan_in + fan_out)).
Matrix glorot_normal(Index fan_in, Index fan_out, std::mt19937_64& rng);

/// Tape nodes holding each parameter, for gathering gradients after backward.
struct ParamNodes {
    ad::NodeId w_star{};
    ad::NodeId phi{};
    std::vector<ad::NodeId> layer_w;
    std::vector<ad::NodeId> head_w;
    std::vector<ad::NodeId> head_b;
};

struct ForwardOutput {
    ad::NodeId logits{};
    std::vector<ad::NodeId> hidden; ///< H^(0) ... H^(K)
    ad::NodeId readout{};
    ParamNodes params;
};

struct ForwardOptions {
    ad::Mode mode{ad::Mode::Eval};
    double dropout{0.6};
};

/**
 * Records one forward pass on `tape`.
 *
 * Full / NoLambda: H0 = relu(drop(X) W*), Hk = A*_k drop(H(k-1)), R = sum_k Hk.
 * NoPt: H0 = X, Hk = relu(A*_k drop(H(k-1)) W_k).
 * NoReadout: R = HK.
 * logits = head(drop(R)).
 *
 * Throws DataError if the graph has isolated nodes and DimensionError (naming
 * the layer) on shape mismatches.
 */
ForwardOutput forward(ad::Tape& tape, const ModelParams& params, const CsrGraph& graph, const Matrix& features,
                      const ForwardOptions& options, ad::Rng& rng);

/// Eval-mode logits without keeping the tape.
Matrix predict_logits(const ModelParams& params, const CsrGraph& graph, const Matrix& features);

/// Gradients aligned with params.parameters(); zero where nothing flowed.
std::vector<Matrix> gather_gradients(const ad::Tape& tape, const ad::GradientMap& grads, const ParamNodes& nodes,
                                     ModelParams& params);

/// Elementwise sum of H^(1)..H^(K), independent of the order of the inputs.
Matrix readout(std::span<const Matrix> hidden);

/// lambda_max^k = 1 + relu(phi_k), in layer order.
std::vector<double> lambda_trace(const ModelParams& params);

} // namespace akgnn

#endif // AKGNN_MODEL_HPP
