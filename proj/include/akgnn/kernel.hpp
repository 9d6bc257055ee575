#ifndef AKGNN_KERNEL_HPP
#define AKGNN_KERNEL_HPP

#include "akgnn/graph.hpp"
#include "akgnn/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace akgnn {

/**
 * Coefficients of the adaptive filter a*I + b*A for one propagation layer.
 *
 * With r = relu(phi): a = 2r/(1+r) weights the all-pass term, b = 2/(1+r)
 * weights the low-pass term and lambda_max = 1 + r. a is formed as 2 - b so
 * that a + b == 2 holds exactly in floating point.
 */
template <typename Scalar = double>
struct FilterWeights {
    Scalar phi{1};
    Scalar a{1};
    Scalar b{1};
    Scalar lambda_max{2};
    /// da/dphi; db/dphi is its negation. Zero for phi <= 0.
    Scalar da_dphi{Scalar(0.5)};
};

template <typename Scalar = double>
FilterWeights<Scalar> filter_weights(Scalar phi)
{
    if (!std::isfinite(phi))
        throw NumericError("filter_weights: non-finite phi");
    const Scalar r = relu(phi);
    const Scalar denom = Scalar(1) + r;
    FilterWeights<Scalar> w;
    w.phi = phi;
    w.b = Scalar(2) / denom;
    w.a = Scalar(2) - w.b;
    w.lambda_max = denom;
    w.da_dphi = Scalar(2) * relu_derivative(phi) / (denom * denom);
    return w;
}

/**
 * Renormalized adaptive kernel D_k^{-1/2} (a I + b A) D_k^{-1/2} on a fixed graph.
 *
 * Entries live on the adjacency pattern plus the diagonal:
 *   diag(i)   = a / (a + b d_i)
 *   off(i, j) = b / sqrt((a + b d_i)(a + b d_j))
 * Off-diagonal values are aligned with graph.col_indices(). The derivative of
 * every entry with respect to phi is kept alongside for the backward pass.
 *
 * The kernel refers to the graph it was built from; the graph must outlive it.
 */
template <typename Scalar = double>
class AdaptiveKernel {
public:
    using Mat = MatrixX<Scalar>;

    AdaptiveKernel(const CsrGraph& graph, Scalar phi) : graph_(&graph), weights_(filter_weights(phi))
    {
        const Index n = graph.num_nodes();
        const Scalar a = weights_.a;
        const Scalar b = weights_.b;
        const Scalar da = weights_.da_dphi;

        std::vector<Scalar> scale(static_cast<std::size_t>(n));
        std::vector<Scalar> dscale(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const Scalar d = static_cast<Scalar>(graph.degree(i));
            const Scalar s = a + b * d;
            if (!(s > Scalar(0)))
                throw DegenerateKernelError("build_kernel: node " + std::to_string(i) +
                                            " has degree 0 and phi <= 0; normalization divides by zero");
            scale[static_cast<std::size_t>(i)] = s;
            dscale[static_cast<std::size_t>(i)] = da * (Scalar(1) - d);
        }

        diag_.resize(n);
        diag_dphi_.resize(n);
        for (Index i = 0; i < n; ++i) {
            const Scalar s = scale[static_cast<std::size_t>(i)];
            const Scalar ds = dscale[static_cast<std::size_t>(i)];
            diag_[i] = a / s;
            diag_dphi_[i] = (da * s - a * ds) / (s * s);
        }

        const auto offsets = graph.row_offsets();
        const auto cols = graph.col_indices();
        off_.resize(static_cast<Index>(cols.size()));
        off_dphi_.resize(static_cast<Index>(cols.size()));
        for (Index i = 0; i < n; ++i) {
            const Scalar si = scale[static_cast<std::size_t>(i)];
            const Scalar dsi = dscale[static_cast<std::size_t>(i)];
            for (Index p = offsets[i]; p < offsets[i + 1]; ++p) {
                const auto j = static_cast<std::size_t>(cols[p]);
                const Scalar prod = si * scale[j];
                const Scalar root = std::sqrt(prod);
                const Scalar value = b / root;
                off_[p] = value;
                // d/dphi [b (s_i s_j)^{-1/2}]
                const Scalar dprod = dsi * scale[j] + si * dscale[j];
                off_dphi_[p] = -da / root - value * dprod / (Scalar(2) * prod);
            }
        }
    }

    const CsrGraph& graph() const noexcept { return *graph_; }
    const FilterWeights<Scalar>& weights() const noexcept { return weights_; }
    Index size() const noexcept { return graph_->num_nodes(); }

    const VectorX<Scalar>& diagonal() const noexcept { return diag_; }
    const VectorX<Scalar>& off_diagonal() const noexcept { return off_; }
    const VectorX<Scalar>& diagonal_dphi() const noexcept { return diag_dphi_; }
    const VectorX<Scalar>& off_diagonal_dphi() const noexcept { return off_dphi_; }

    /// Entry (i, j); zero outside the sparsity pattern.
    Scalar entry(Index i, Index j) const
    {
        if (i == j)
            return diag_[i];
        const auto nb = graph_->neighbors(i);
        const auto it = std::lower_bound(nb.begin(), nb.end(), j);
        if (it == nb.end() || *it != j)
            return Scalar(0);
        return off_[graph_->row_offsets()[i] + (it - nb.begin())];
    }

    /// Returns K * h. Each output row is accumulated in neighbor order.
    template <typename Derived>
    Mat apply(const Eigen::MatrixBase<Derived>& h) const
    {
        if (h.rows() != size())
            throw DimensionError("kernel_spmm: kernel is " + shape_string(size(), size()) +
                                 " but operand is " + shape_string(h));
        Mat out(h.rows(), h.cols());
        const auto offsets = graph_->row_offsets();
        const auto cols = graph_->col_indices();
        for (Index i = 0; i < size(); ++i) {
            auto row = out.row(i);
            row = diag_[i] * h.row(i);
            for (Index p = offsets[i]; p < offsets[i + 1]; ++p)
                row += off_[p] * h.row(cols[p]);
        }
        return out;
    }

    /// sum_{(i,j) in pattern} dK_ij/dphi * (G h^T)_ij, i.e. the phi-adjoint of K h.
    template <typename DerivedG, typename DerivedH>
    Scalar phi_gradient(const Eigen::MatrixBase<DerivedG>& upstream,
                        const Eigen::MatrixBase<DerivedH>& h) const
    {
        const auto offsets = graph_->row_offsets();
        const auto cols = graph_->col_indices();
        Scalar total(0);
        for (Index i = 0; i < size(); ++i) {
            Scalar row_total = diag_dphi_[i] * upstream.row(i).dot(h.row(i));
            for (Index p = offsets[i]; p < offsets[i + 1]; ++p)
                row_total += off_dphi_[p] * upstream.row(i).dot(h.row(cols[p]));
            total += row_total;
        }
        return total;
    }

    /// Densify the kernel (or its phi-derivative).
    Mat to_dense(bool derivative = false) const
    {
        const Index n = size();
        Mat m = Mat::Zero(n, n);
        const auto offsets = graph_->row_offsets();
        const auto cols = graph_->col_indices();
        const auto& d = derivative ? diag_dphi_ : diag_;
        const auto& o = derivative ? off_dphi_ : off_;
        for (Index i = 0; i < n; ++i) {
            m(i, i) = d[i];
            for (Index p = offsets[i]; p < offsets[i + 1]; ++p)
                m(i, cols[p]) = o[p];
        }
        return m;
    }

private:
    const CsrGraph* graph_;
    FilterWeights<Scalar> weights_;
    VectorX<Scalar> diag_;
    VectorX<Scalar> diag_dphi_;
    VectorX<Scalar> off_;
    VectorX<Scalar> off_dphi_;
};

template <typename Scalar = double>
AdaptiveKernel<Scalar> build_kernel(const CsrGraph& graph, Scalar phi)
{
    return AdaptiveKernel<Scalar>(graph, phi);
}

inline constexpr Index kDenseKernelLimit = 10'000;
inline constexpr Index kSpectrumLimit = 500;

/// Dense copy of the renormalized kernel. Test-scale only.
template <typename Scalar = double>
MatrixX<Scalar> dense_kernel(const CsrGraph& graph, Scalar phi)
{
    if (graph.num_nodes() > kDenseKernelLimit)
        throw ConfigError("dense_kernel: " + std::to_string(graph.num_nodes()) +
                          " nodes exceeds the dense limit of " + std::to_string(kDenseKernelLimit));
    return build_kernel(graph, phi).to_dense();
}

/// D^{-1/2} A D^{-1/2} of the raw graph, densely.
template <typename Scalar = double>
MatrixX<Scalar> normalized_adjacency(const CsrGraph& graph)
{
    const Index n = graph.num_nodes();
    MatrixX<Scalar> m = MatrixX<Scalar>::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        if (graph.degree(i) == 0)
            throw DegenerateKernelError("normalized_adjacency: node " + std::to_string(i) + " has degree 0");
        for (Index j : graph.neighbors(i)) {
            m(i, j) = Scalar(1) / std::sqrt(static_cast<Scalar>(graph.degree(i)) *
                                            static_cast<Scalar>(graph.degree(j)));
        }
    }
    return m;
}

/// a(phi) I + b(phi) D^{-1/2} A D^{-1/2}, the filter before the renormalization trick.
template <typename Scalar = double>
MatrixX<Scalar> unnormalized_kernel(const CsrGraph& graph, Scalar phi)
{
    const auto w = filter_weights(phi);
    MatrixX<Scalar> m = w.b * normalized_adjacency<Scalar>(graph);
    m.diagonal().array() += w.a;
    return m;
}

template <typename Scalar = double>
struct DenseSpectrum {
    VectorX<Scalar> eigenvalues; ///< ascending
    MatrixX<Scalar> eigenvectors; ///< one eigenvector per column
};

/// Full eigendecomposition of a small symmetric matrix.
template <typename Derived>
DenseSpectrum<typename Derived::Scalar> spectrum(const Eigen::MatrixBase<Derived>& m)
{
    using Scalar = typename Derived::Scalar;
    if (m.rows() != m.cols())
        throw ContractError("spectrum: matrix is not square (" + shape_string(m) + ")");
    if (m.rows() > kSpectrumLimit)
        throw ConfigError("spectrum: " + std::to_string(m.rows()) + " rows exceeds the dense limit of " +
                          std::to_string(kSpectrumLimit));
    const Scalar asym = m.rows() == 0 ? Scalar(0) : (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > Scalar(1e-10))
        throw ContractError("spectrum: matrix is not symmetric (max |M - M^T| = " + std::to_string(asym) + ")");

    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::SelfAdjointEigenSolver<Dense> solver(Dense(m), Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success)
        throw NumericError("spectrum: eigensolver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

} // namespace akgnn

#endif // AKGNN_KERNEL_HPP
