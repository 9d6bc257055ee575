#include "akgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace akgnn::ad {

const char* op_name(OpKind op) noexcept
{
    switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Relu: return "relu";
    case OpKind::Dropout: return "dropout";
    case OpKind::Kernel: return "kernel";
    case OpKind::KernelSpmm: return "kernel_spmm";
    case OpKind::Add: return "add";
    case OpKind::AddRowBias: return "add_row_bias";
    case OpKind::SumLayers: return "sum_layers";
    case OpKind::SumAll: return "sum_all";
    case OpKind::MaskedSoftmaxXent: return "masked_softmax_xent";
    }
    return "unknown";
}

NodeId Tape::leaf(Matrix value, bool requires_grad)
{
    TapeNode n;
    n.op = OpKind::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
}

NodeId Tape::push(OpKind op, std::vector<NodeId> parents, Matrix value, Payload payload)
{
    TapeNode n;
    n.op = op;
    for (NodeId p : parents) {
        if (p.index >= nodes_.size())
            throw ContractError(std::string(op_name(op)) + ": parent node " + std::to_string(p.index) +
                                " is not on the tape");
        n.requires_grad = n.requires_grad || nodes_[p.index].requires_grad;
    }
    n.parents = std::move(parents);
    n.value = std::move(value);
    n.payload = std::move(payload);
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
}

Matrix Tape::adjoint(NodeId id) const
{
    const auto& n = node(id);
    if (n.adjoint.size() == 0)
        return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.adjoint;
}

NodeId matmul(Tape& tape, NodeId a, NodeId b)
{
    const Matrix& va = tape.value(a);
    const Matrix& vb = tape.value(b);
    if (va.cols() != vb.rows())
        throw DimensionError("matmul: cannot multiply " + shape_string(va) + " by " + shape_string(vb));
    Matrix out = va * vb;
    return tape.push(OpKind::MatMul, {a, b}, std::move(out));
}

NodeId relu(Tape& tape, NodeId a)
{
    Matrix out = tape.value(a).cwiseMax(0.0);
    return tape.push(OpKind::Relu, {a}, std::move(out));
}

NodeId dropout(Tape& tape, NodeId a, double rate, Mode mode, Rng& rng)
{
    if (!(rate >= 0.0 && rate < 1.0))
        throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    if (mode == Mode::Eval)
        return a;

    const Matrix& v = tape.value(a);
    const double keep_scale = 1.0 / (1.0 - rate);
    Matrix mask(v.rows(), v.cols());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Index i = 0; i < mask.size(); ++i)
        mask.data()[i] = unit(rng) < rate ? 0.0 : keep_scale;
    Matrix out = v.cwiseProduct(mask);
    return tape.push(OpKind::Dropout, {a}, std::move(out), std::move(mask));
}

NodeId adaptive_kernel(Tape& tape, const CsrGraph& graph, NodeId phi, Index component)
{
    const Matrix& p = tape.value(phi);
    if (component < 0 || component >= p.size())
        throw DimensionError("adaptive_kernel: phi node " + shape_string(p) + " has no entry " +
                             std::to_string(component));
    const double value = p.data()[component];
    auto kernel = std::make_shared<const AdaptiveKernel<double>>(graph, value);
    Matrix out(1, 1);
    out(0, 0) = value;
    return tape.push(OpKind::Kernel, {phi}, std::move(out), KernelPayload{std::move(kernel), component});
}

NodeId kernel_spmm(Tape& tape, NodeId kernel, NodeId h)
{
    const auto& kn = tape.node(kernel);
    if (kn.op != OpKind::Kernel)
        throw ContractError("kernel_spmm: first operand is a " + std::string(op_name(kn.op)) + " node, not a kernel");
    const auto& k = *std::get<KernelPayload>(kn.payload).kernel;
    Matrix out = k.apply(tape.value(h));
    return tape.push(OpKind::KernelSpmm, {kernel, h}, std::move(out));
}

NodeId add(Tape& tape, NodeId a, NodeId b)
{
    const Matrix& va = tape.value(a);
    const Matrix& vb = tape.value(b);
    if (va.rows() != vb.rows() || va.cols() != vb.cols())
        throw DimensionError("add: shapes " + shape_string(va) + " and " + shape_string(vb) + " differ");
    Matrix out = va + vb;
    return tape.push(OpKind::Add, {a, b}, std::move(out));
}

NodeId add_row_bias(Tape& tape, NodeId x, NodeId bias)
{
    const Matrix& vx = tape.value(x);
    const Matrix& vb = tape.value(bias);
    if (vb.rows() != 1 || vb.cols() != vx.cols())
        throw DimensionError("add_row_bias: bias " + shape_string(vb) + " does not match " + shape_string(vx));
    Matrix out = vx.rowwise() + vb.row(0);
    return tape.push(OpKind::AddRowBias, {x, bias}, std::move(out));
}

NodeId sum_layers(Tape& tape, std::span<const NodeId> terms)
{
    if (terms.empty())
        throw ContractError("sum_layers: no terms");
    const Matrix& first = tape.value(terms.front());
    for (NodeId t : terms) {
        const Matrix& v = tape.value(t);
        if (v.rows() != first.rows() || v.cols() != first.cols())
            throw DimensionError("sum_layers: shapes " + shape_string(first) + " and " + shape_string(v) + " differ");
    }
    Matrix out(first.rows(), first.cols());
    std::vector<double> scratch(terms.size());
    for (Index e = 0; e < out.size(); ++e) {
        for (std::size_t t = 0; t < terms.size(); ++t)
            scratch[t] = tape.value(terms[t]).data()[e];
        std::sort(scratch.begin(), scratch.end());
        double acc = 0.0;
        for (double s : scratch)
            acc += s;
        out.data()[e] = acc;
    }
    return tape.push(OpKind::SumLayers, {terms.begin(), terms.end()}, std::move(out));
}

NodeId sum_all(Tape& tape, NodeId a)
{
    Matrix out(1, 1);
    out(0, 0) = tape.value(a).sum();
    return tape.push(OpKind::SumAll, {a}, std::move(out));
}

NodeId masked_softmax_xent(Tape& tape, NodeId logits, std::span<const int> labels, std::span<const Index> mask)
{
    const Matrix& z = tape.value(logits);
    if (mask.empty())
        throw ConfigError("masked_softmax_xent: empty mask");
    if (static_cast<Index>(labels.size()) != z.rows())
        throw DimensionError("masked_softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(z.rows()) + " rows");

    XentPayload payload;
    payload.labels.assign(labels.begin(), labels.end());
    payload.mask.assign(mask.begin(), mask.end());
    payload.softmax.resize(static_cast<Index>(mask.size()), z.cols());

    double total = 0.0;
    for (std::size_t m = 0; m < mask.size(); ++m) {
        const Index row = mask[m];
        if (row < 0 || row >= z.rows())
            throw DimensionError("masked_softmax_xent: mask index " + std::to_string(row) + " out of range for " +
                                 std::to_string(z.rows()) + " rows");
        const int label = labels[static_cast<std::size_t>(row)];
        if (label < 0 || label >= z.cols())
            throw DataError("masked_softmax_xent: label " + std::to_string(label) + " of row " +
                            std::to_string(row) + " is not a class id in [0, " + std::to_string(z.cols()) + ")");
        const double peak = z.row(row).maxCoeff();
        auto p = payload.softmax.row(static_cast<Index>(m));
        p = (z.row(row).array() - peak).exp().matrix();
        const double norm = p.sum();
        total += std::log(norm) - (z(row, label) - peak);
        p /= norm;
    }
    Matrix out(1, 1);
    out(0, 0) = total / static_cast<double>(mask.size());
    return tape.push(OpKind::MaskedSoftmaxXent, {logits}, std::move(out), std::move(payload));
}

namespace {

void propagate(Tape& tape, const TapeNode& n, const Matrix& g)
{
    const auto& p = n.parents;
    switch (n.op) {
    case OpKind::Leaf:
        break;
    case OpKind::MatMul: {
        const Matrix& a = tape.value(p[0]);
        const Matrix& b = tape.value(p[1]);
        if (tape.requires_grad(p[0]))
            tape.accumulate(p[0], g * b.transpose());
        if (tape.requires_grad(p[1]))
            tape.accumulate(p[1], a.transpose() * g);
        break;
    }
    case OpKind::Relu: {
        const Matrix& x = tape.value(p[0]);
        tape.accumulate(p[0], (x.array() > 0.0).select(g, 0.0).matrix());
        break;
    }
    case OpKind::Dropout:
        tape.accumulate(p[0], g.cwiseProduct(std::get<Matrix>(n.payload)));
        break;
    case OpKind::Kernel: {
        const auto& kp = std::get<KernelPayload>(n.payload);
        const Matrix& phi = tape.value(p[0]);
        Matrix contribution = Matrix::Zero(phi.rows(), phi.cols());
        contribution.data()[kp.component] = g(0, 0);
        tape.accumulate(p[0], contribution);
        break;
    }
    case OpKind::KernelSpmm: {
        const auto& k = *std::get<KernelPayload>(tape.node(p[0]).payload).kernel;
        const Matrix& h = tape.value(p[1]);
        // The kernel is symmetric, so K^T G = K G.
        if (tape.requires_grad(p[1]))
            tape.accumulate(p[1], k.apply(g));
        if (tape.requires_grad(p[0])) {
            Matrix dphi(1, 1);
            dphi(0, 0) = k.phi_gradient(g, h);
            tape.accumulate(p[0], dphi);
        }
        break;
    }
    case OpKind::Add:
    case OpKind::SumLayers:
        for (NodeId parent : p)
            tape.accumulate(parent, g);
        break;
    case OpKind::AddRowBias:
        tape.accumulate(p[0], g);
        if (tape.requires_grad(p[1]))
            tape.accumulate(p[1], g.colwise().sum());
        break;
    case OpKind::SumAll: {
        const Matrix& x = tape.value(p[0]);
        tape.accumulate(p[0], Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
    }
    case OpKind::MaskedSoftmaxXent: {
        const auto& xp = std::get<XentPayload>(n.payload);
        const Matrix& z = tape.value(p[0]);
        Matrix dz = Matrix::Zero(z.rows(), z.cols());
        const double scale = g(0, 0) / static_cast<double>(xp.mask.size());
        for (std::size_t m = 0; m < xp.mask.size(); ++m) {
            const Index row = xp.mask[m];
            auto d = dz.row(row);
            d += scale * xp.softmax.row(static_cast<Index>(m));
            d(xp.labels[static_cast<std::size_t>(row)]) -= scale;
        }
        tape.accumulate(p[0], dz);
        break;
    }
    }
}

} // namespace

GradientMap backward(Tape& tape, NodeId loss, double seed)
{
    const Matrix& lv = tape.value(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
        throw ContractError("backward: loss must be 1x1, got " + shape_string(lv));

    for (std::size_t i = 0; i < tape.size(); ++i)
        tape.node(NodeId{i}).adjoint.resize(0, 0);

    GradientMap grads;
    if (!tape.requires_grad(loss))
        return grads;

    Matrix s(1, 1);
    s(0, 0) = seed;
    tape.accumulate(loss, s);

    for (std::size_t i = loss.index + 1; i-- > 0;) {
        TapeNode& n = tape.node(NodeId{i});
        if (!n.requires_grad || n.adjoint.size() == 0)
            continue;
        if (n.op == OpKind::Leaf) {
            grads.emplace(i, n.adjoint);
            continue;
        }
        propagate(tape, n, n.adjoint);
    }
    return grads;
}

std::vector<GradCheckResult> finite_diff_check(const std::function<double()>& objective,
                                               std::span<const CheckedParameter> params, double eps)
{
    std::vector<GradCheckResult> results;
    results.reserve(params.size());
    for (const auto& param : params) {
        Matrix& w = *param.value;
        const Matrix& analytic = *param.analytic;
        if (analytic.rows() != w.rows() || analytic.cols() != w.cols())
            throw DimensionError("finite_diff_check: gradient of " + param.name + " is " +
                                 shape_string(analytic) + ", parameter is " + shape_string(w));
        GradCheckResult r;
        r.name = param.name;
        r.errors = Matrix::Constant(w.rows(), w.cols(), std::numeric_limits<double>::quiet_NaN());
        for (Index i = 0; i < w.rows(); ++i) {
            for (Index j = 0; j < w.cols(); ++j) {
                const double original = w(i, j);
                if (param.skip_zero_entries && original == 0.0)
                    continue;
                w(i, j) = original + eps;
                const double plus = objective();
                w(i, j) = original - eps;
                const double minus = objective();
                w(i, j) = original;

                const double numeric = (plus - minus) / (2.0 * eps);
                const double err = std::abs(analytic(i, j) - numeric) / std::max(std::abs(numeric), 1e-8);
                r.errors(i, j) = err;
                ++r.checked;
                if (r.worst_row < 0 || err > r.max_rel_error) {
                    r.max_rel_error = err;
                    r.worst_row = i;
                    r.worst_col = j;
                }
            }
        }
        results.push_back(std::move(r));
    }
    return results;
}

double max_rel_error(std::span<const GradCheckResult> results) noexcept
{
    double worst = 0.0;
    for (const auto& r : results)
        worst = std::max(worst, r.max_rel_error);
    return worst;
}

} // namespace akgnn::ad
