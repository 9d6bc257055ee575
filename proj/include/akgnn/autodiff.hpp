#ifndef AKGNN_AUTODIFF_HPP
#define AKGNN_AUTODIFF_HPP

#include "akgnn/graph.hpp"
#include "akgnn/kernel.hpp"
#include "akgnn/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

// Define-by-run reverse-mode differentiation over dense row-major matrices.
// Only the primitives the propagation model needs are provided.
namespace akgnn::ad {

enum class OpKind {
    Leaf,
    MatMul,
    Relu,
    Dropout,
    Kernel,
    KernelSpmm,
    Add,
    AddRowBias,
    SumLayers,
    SumAll,
    MaskedSoftmaxXent,
};

const char* op_name(OpKind op) noexcept;

enum class Mode { Train, Eval };

struct NodeId {
    std::size_t index{};
    friend bool operator==(NodeId, NodeId) = default;
};

using Rng = std::mt19937_64;

/// Kernel node payload: the materialized kernel plus which entry of the phi leaf it reads.
struct KernelPayload {
    std::shared_ptr<const AdaptiveKernel<double>> kernel;
    Index component{};
};

struct XentPayload {
    std::vector<int> labels;
    std::vector<Index> mask;
    Matrix softmax; ///< softmax of the masked rows, in mask order
};

using Payload = std::variant<std::monostate, Matrix, KernelPayload, XentPayload>;

struct TapeNode {
    OpKind op{OpKind::Leaf};
    std::vector<NodeId> parents;
    Matrix value;
    Matrix adjoint; ///< empty until backward reaches the node
    bool requires_grad{false};
    Payload payload;
};

/**
 * Append-only computation record. Parents always precede children, so a
 * reverse sweep over construction order is a valid topological traversal.
 */
class Tape {
public:
    NodeId leaf(Matrix value, bool requires_grad);
    NodeId parameter(Matrix value) { return leaf(std::move(value), true); }
    NodeId constant(Matrix value) { return leaf(std::move(value), false); }

    NodeId push(OpKind op, std::vector<NodeId> parents, Matrix value, Payload payload = {});

    const TapeNode& node(NodeId id) const { return nodes_.at(id.index); }
    TapeNode& node(NodeId id) { return nodes_.at(id.index); }
    const Matrix& value(NodeId id) const { return node(id).value; }
    /// Adjoint after backward; a zero matrix of the value's shape if nothing flowed into the node.
    Matrix adjoint(NodeId id) const;
    bool requires_grad(NodeId id) const { return node(id).requires_grad; }

    std::size_t size() const noexcept { return nodes_.size(); }
    void clear() noexcept { nodes_.clear(); }

    /// adjoint(id) += contribution, allocating on first use.
    template <typename Derived>
    void accumulate(NodeId id, const Eigen::MatrixBase<Derived>& contribution)
    {
        auto& n = node(id);
        if (!n.requires_grad)
            return;
        if (n.adjoint.size() == 0)
            n.adjoint = contribution;
        else
            n.adjoint += contribution;
    }

private:
    std::vector<TapeNode> nodes_;
};

NodeId matmul(Tape& tape, NodeId a, NodeId b);
NodeId relu(Tape& tape, NodeId a);
/// Inverted dropout. Eval mode returns the input node unchanged.
NodeId dropout(Tape& tape, NodeId a, double rate, Mode mode, Rng& rng);
/// Kernel for one layer built from entry `component` of a 1xK phi node.
NodeId adaptive_kernel(Tape& tape, const CsrGraph& graph, NodeId phi, Index component = 0);
NodeId kernel_spmm(Tape& tape, NodeId kernel, NodeId h);
NodeId add(Tape& tape, NodeId a, NodeId b);
/// x + 1 * bias, with bias a 1 x cols row.
NodeId add_row_bias(Tape& tape, NodeId x, NodeId bias);
/// Elementwise sum of equally shaped nodes. Each entry's summands are added in
/// sorted order, so the result does not depend on the order of `terms`.
NodeId sum_layers(Tape& tape, std::span<const NodeId> terms);
NodeId sum_all(Tape& tape, NodeId a);
/// Mean over masked rows of -log softmax(row)[label].
NodeId masked_softmax_xent(Tape& tape, NodeId logits, std::span<const int> labels,
                           std::span<const Index> mask);

using GradientMap = std::unordered_map<std::size_t, Matrix>;

/// Seed the scalar loss with `seed` and sweep the tape in reverse. Returns the
/// adjoints of every leaf that requires a gradient.
GradientMap backward(Tape& tape, NodeId loss, double seed = 1.0);

/// One parameter tensor for finite_diff_check.
struct CheckedParameter {
    std::string name;
    Matrix* value{};
    const Matrix* analytic{};
    /// Skip entries that sit exactly at 0 (relu kink of phi).
    bool skip_zero_entries{false};
};

struct GradCheckResult {
    std::string name;
    double max_rel_error{0};
    Index worst_row{-1};
    Index worst_col{-1};
    Index checked{0};
    Matrix errors; ///< per-entry relative error, NaN where skipped
};

/// Central differences of `objective` against analytic gradients. Each entry
/// is perturbed by +-eps and restored; the error of an entry is
/// |analytic - numeric| / max(|numeric|, 1e-8).
std::vector<GradCheckResult> finite_diff_check(const std::function<double()>& objective,
                                               std::span<const CheckedParameter> params, double eps = 1e-5);

double max_rel_error(std::span<const GradCheckResult> results) noexcept;

} // namespace akgnn::ad

#endif // AKGNN_AUTODIFF_HPP
