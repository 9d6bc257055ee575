#include "akgnn/model.hpp"

#include "akgnn/rng.hpp"

#include <cmath>
#include <random>

namespace akgnn {

std::string_view to_string(ModelVariant v) noexcept
{
    switch (v) {
    case ModelVariant::Full: return "full";
    case ModelVariant::NoLambda: return "no-lambda";
    case ModelVariant::NoPt: return "no-pt";
    case ModelVariant::NoReadout: return "no-readout";
    }
    return "unknown";
}

ModelVariant parse_variant(std::string_view name)
{
    for (auto v : {ModelVariant::Full, ModelVariant::NoLambda, ModelVariant::NoPt, ModelVariant::NoReadout}) {
        if (name == to_string(v))
            return v;
    }
    throw ConfigError("unknown model variant '" + std::string(name) +
                      "' (expected full, no-lambda, no-pt or no-readout)");
}

std::vector<ParamRef> ModelParams::parameters()
{
    std::vector<ParamRef> out;
    if (w_star.size() > 0)
        out.push_back({"W*", &w_star, true, true});
    out.push_back({"phi", &phi, false, phi_trainable});
    for (std::size_t k = 0; k < layer_w.size(); ++k)
        out.push_back({"W_" + std::to_string(k + 1), &layer_w[k], true, true});
    for (std::size_t l = 0; l < head_w.size(); ++l) {
        const std::string suffix = head_w.size() == 1 ? "" : "_" + std::to_string(l + 1);
        out.push_back({"head_W" + suffix, &head_w[l], true, true});
        out.push_back({"head_b" + suffix, &head_b[l], false, true});
    }
    return out;
}

std::size_t ModelParams::scalar_count() const
{
    auto n = static_cast<std::size_t>(w_star.size() + phi.size());
    for (const auto& w : layer_w)
        n += static_cast<std::size_t>(w.size());
    for (std::size_t l = 0; l < head_w.size(); ++l)
        n += static_cast<std::size_t>(head_w[l].size() + head_b[l].size());
    return n;
}

Matrix glorot_normal(Index fan_in, Index fan_out, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
    Matrix m(fan_in, fan_out);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = normal(rng);
    return m;
}

ModelParams init_params(const ModelDims& dims, ModelVariant variant, std::uint64_t seed)
{
    if (dims.features < 1 || dims.hidden < 1 || dims.classes < 1 || dims.layers < 1 || dims.head_depth < 1)
        throw ConfigError("init_params: feature, hidden, class, layer and head-depth counts must all be >= 1");

    ModelParams p;
    p.variant = variant;
    p.dims = dims;
    p.phi = Matrix::Ones(1, dims.layers);
    p.phi_trainable = variant != ModelVariant::NoLambda;

    if (variant == ModelVariant::NoPt) {
        for (Index k = 0; k < dims.layers; ++k) {
            auto rng = make_rng(seed, Stream::LayerInit, static_cast<std::uint64_t>(k));
            p.layer_w.push_back(glorot_normal(k == 0 ? dims.features : dims.hidden, dims.hidden, rng));
        }
    } else {
        auto rng = make_rng(seed, Stream::FilterInit);
        p.w_star = glorot_normal(dims.features, dims.hidden, rng);
    }

    for (Index l = 0; l < dims.head_depth; ++l) {
        auto rng = make_rng(seed, Stream::HeadInit, static_cast<std::uint64_t>(l));
        const Index out = l + 1 == dims.head_depth ? dims.classes : dims.hidden;
        p.head_w.push_back(glorot_normal(dims.hidden, out, rng));
        p.head_b.push_back(Matrix::Zero(1, out));
    }
    return p;
}

namespace {

void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what)
{
    if (m.rows() != rows || m.cols() != cols)
        throw DimensionError(what + " is " + shape_string(m) + ", expected " + shape_string(rows, cols));
}

void check_params(const ModelParams& p, const CsrGraph& graph, const Matrix& features)
{
    const auto& d = p.dims;
    if (features.rows() != graph.num_nodes())
        throw DimensionError("forward: features have " + std::to_string(features.rows()) + " rows but the graph has " +
                             std::to_string(graph.num_nodes()) + " nodes");
    require_shape(features, graph.num_nodes(), d.features, "forward: feature matrix");
    require_shape(p.phi, 1, d.layers, "forward: phi");
    if (p.variant == ModelVariant::NoPt) {
        if (static_cast<Index>(p.layer_w.size()) != d.layers)
            throw DimensionError("forward: " + std::to_string(p.layer_w.size()) + " layer matrices for " +
                                 std::to_string(d.layers) + " layers");
        for (Index k = 0; k < d.layers; ++k)
            require_shape(p.layer_w[static_cast<std::size_t>(k)], k == 0 ? d.features : d.hidden, d.hidden,
                          "forward: layer " + std::to_string(k + 1) + " filter W_" + std::to_string(k + 1));
    } else {
        require_shape(p.w_star, d.features, d.hidden, "forward: layer 0 filter W*");
    }
    if (static_cast<Index>(p.head_w.size()) != d.head_depth || p.head_b.size() != p.head_w.size())
        throw DimensionError("forward: prediction head has " + std::to_string(p.head_w.size()) + " maps, expected " +
                             std::to_string(d.head_depth));
    for (Index l = 0; l < d.head_depth; ++l) {
        const Index out = l + 1 == d.head_depth ? d.classes : d.hidden;
        require_shape(p.head_w[static_cast<std::size_t>(l)], d.hidden, out,
                      "forward: head layer " + std::to_string(l + 1) + " weights");
        require_shape(p.head_b[static_cast<std::size_t>(l)], 1, out,
                      "forward: head layer " + std::to_string(l + 1) + " bias");
    }
}

} // namespace

ForwardOutput forward(ad::Tape& tape, const ModelParams& params, const CsrGraph& graph, const Matrix& features,
                      const ForwardOptions& options, ad::Rng& rng)
{
    require_no_isolated_nodes(graph);
    check_params(params, graph, features);

    const auto& dims = params.dims;
    const bool no_pt = params.variant == ModelVariant::NoPt;
    ForwardOutput out;
    auto& nodes = out.params;

    const ad::NodeId x = tape.constant(features);
    nodes.phi = tape.leaf(params.phi, params.phi_trainable);

    ad::NodeId h;
    if (no_pt) {
        h = x;
        for (const auto& w : params.layer_w)
            nodes.layer_w.push_back(tape.parameter(w));
    } else {
        nodes.w_star = tape.parameter(params.w_star);
        const ad::NodeId dropped = ad::dropout(tape, x, options.dropout, options.mode, rng);
        h = ad::relu(tape, ad::matmul(tape, dropped, nodes.w_star));
    }
    out.hidden.push_back(h);

    for (Index k = 0; k < dims.layers; ++k) {
        const ad::NodeId kernel = ad::adaptive_kernel(tape, graph, nodes.phi, k);
        const ad::NodeId dropped = ad::dropout(tape, h, options.dropout, options.mode, rng);
        if (no_pt) {
            const ad::NodeId filtered = ad::matmul(tape, dropped, nodes.layer_w[static_cast<std::size_t>(k)]);
            h = ad::relu(tape, ad::kernel_spmm(tape, kernel, filtered));
        } else {
            h = ad::kernel_spmm(tape, kernel, dropped);
        }
        out.hidden.push_back(h);
    }

    if (params.variant == ModelVariant::NoReadout)
        out.readout = out.hidden.back();
    else
        out.readout = ad::sum_layers(tape, std::span<const ad::NodeId>(out.hidden).subspan(1));

    ad::NodeId z = out.readout;
    for (Index l = 0; l < dims.head_depth; ++l) {
        const auto li = static_cast<std::size_t>(l);
        nodes.head_w.push_back(tape.parameter(params.head_w[li]));
        nodes.head_b.push_back(tape.parameter(params.head_b[li]));
        z = ad::dropout(tape, z, options.dropout, options.mode, rng);
        z = ad::add_row_bias(tape, ad::matmul(tape, z, nodes.head_w.back()), nodes.head_b.back());
        if (l + 1 < dims.head_depth)
            z = ad::relu(tape, z);
    }
    out.logits = z;
    return out;
}

Matrix predict_logits(const ModelParams& params, const CsrGraph& graph, const Matrix& features)
{
    ad::Tape tape;
    ad::Rng unused(0);
    const auto out = forward(tape, params, graph, features, {ad::Mode::Eval, 0.0}, unused);
    return tape.value(out.logits);
}

std::vector<Matrix> gather_gradients(const ad::Tape& tape, const ad::GradientMap& grads, const ParamNodes& nodes,
                                     ModelParams& params)
{
    auto lookup = [&](ad::NodeId id) -> Matrix {
        const auto it = grads.find(id.index);
        if (it != grads.end())
            return it->second;
        const Matrix& v = tape.value(id);
        return Matrix::Zero(v.rows(), v.cols());
    };

    std::vector<Matrix> out;
    if (params.w_star.size() > 0)
        out.push_back(lookup(nodes.w_star));
    out.push_back(lookup(nodes.phi));
    for (auto id : nodes.layer_w)
        out.push_back(lookup(id));
    for (std::size_t l = 0; l < nodes.head_w.size(); ++l) {
        out.push_back(lookup(nodes.head_w[l]));
        out.push_back(lookup(nodes.head_b[l]));
    }
    return out;
}

Matrix readout(std::span<const Matrix> hidden)
{
    if (hidden.empty())
        throw ContractError("readout: no layer representations");
    ad::Tape tape;
    std::vector<ad::NodeId> ids;
    ids.reserve(hidden.size());
    for (const auto& h : hidden)
        ids.push_back(tape.constant(h));
    return tape.value(ad::sum_layers(tape, ids));
}

std::vector<double> lambda_trace(const ModelParams& params)
{
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(params.phi.size()));
    for (Index k = 0; k < params.phi.size(); ++k)
        out.push_back(1.0 + relu(params.phi.data()[k]));
    return out;
}

} // namespace akgnn
