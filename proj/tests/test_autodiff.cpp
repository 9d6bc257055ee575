#include "akgnn/autodiff.hpp"
#include "akgnn/gradcheck.hpp"
#include "akgnn/synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace akgnn;
using namespace akgnn::ad;

namespace {

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = normal(rng);
    return m;
}

// Central differences of a scalar function of one matrix, entry by entry.
template <typename F>
Matrix numeric_gradient(F&& f, Matrix x, double eps = 1e-5)
{
    Matrix g(x.rows(), x.cols());
    for (Index i = 0; i < x.size(); ++i) {
        const double orig = x.data()[i];
        x.data()[i] = orig + eps;
        const double plus = f(x);
        x.data()[i] = orig - eps;
        const double minus = f(x);
        x.data()[i] = orig;
        g.data()[i] = (plus - minus) / (2 * eps);
    }
    return g;
}

double max_rel(const Matrix& analytic, const Matrix& numeric)
{
    double worst = 0.0;
    for (Index i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, std::abs(analytic.data()[i] - numeric.data()[i]) /
                                    std::max(std::abs(numeric.data()[i]), 1e-8));
    return worst;
}

Matrix mat(std::initializer_list<std::initializer_list<double>> rows)
{
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
    Index i = 0;
    for (const auto& r : rows) {
        Index j = 0;
        for (double v : r)
            m(i, j++) = v;
        ++i;
    }
    return m;
}

} // namespace

TEST(MatMul, Values)
{
    Tape t;
    const auto r1 = matmul(t, t.constant(mat({{1, 0}, {0, 1}})), t.constant(mat({{3}, {4}})));
    EXPECT_EQ(t.value(r1), mat({{3}, {4}}));
    const auto r2 = matmul(t, t.constant(mat({{1, 2}})), t.constant(mat({{3}, {4}})));
    EXPECT_EQ(t.value(r2), mat({{11}}));
}

TEST(MatMul, ShapeErrorNamesBothShapes)
{
    Tape t;
    try {
        matmul(t, t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(2, 3)));
        FAIL();
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos);
    }
}

TEST(MatMul, GradientOfSum)
{
    const Matrix a = mat({{1, 2}});
    const Matrix b = mat({{3}, {4}});
    Tape t;
    const auto na = t.parameter(a);
    const auto loss = sum_all(t, matmul(t, na, t.constant(b)));
    const auto grads = backward(t, loss);
    EXPECT_EQ(grads.at(na.index), mat({{3, 4}}));

    const Matrix numeric = numeric_gradient(
        [&](const Matrix& x) {
            Tape tt;
            return tt.value(sum_all(tt, matmul(tt, tt.constant(x), tt.constant(b))))(0, 0);
        },
        a);
    EXPECT_LT(max_rel(grads.at(na.index), numeric), 1e-6);
}

TEST(MatMul, RandomGradientsBothOperands)
{
    std::mt19937_64 rng(4);
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 2, rng);
    const Matrix w = random_matrix(2, 1, rng);

    Tape t;
    const auto na = t.parameter(a);
    const auto nb = t.parameter(b);
    const auto loss = sum_all(t, relu(t, matmul(t, matmul(t, na, nb), t.constant(w))));
    const auto grads = backward(t, loss);
    const Matrix ga = numeric_gradient([&](const Matrix& x) { return (x * b * w).cwiseMax(0.0).sum(); }, a);
    const Matrix gb = numeric_gradient([&](const Matrix& y) { return (a * y * w).cwiseMax(0.0).sum(); }, b);
    EXPECT_LT(max_rel(grads.at(na.index), ga), 1e-6);
    EXPECT_LT(max_rel(grads.at(nb.index), gb), 1e-6);
}

TEST(Relu, ValuesAndSubgradient)
{
    Tape t;
    EXPECT_EQ(t.value(relu(t, t.constant(mat({{-1, 2}})))), mat({{0, 2}}));

    Tape t2;
    const auto x = t2.parameter(mat({{0}}));
    const auto y = relu(t2, x);
    EXPECT_EQ(t2.value(y), mat({{0}}));
    const auto grads = backward(t2, sum_all(t2, y));
    EXPECT_EQ(grads.at(x.index), mat({{0}}));
}

TEST(Relu, GradientCheckAwayFromKink)
{
    std::mt19937_64 rng(8);
    Matrix x = random_matrix(3, 4, rng);
    for (Index i = 0; i < x.size(); ++i) {
        if (std::abs(x.data()[i]) < 1e-3)
            x.data()[i] = 0.5;
    }
    const Matrix w = random_matrix(4, 1, rng);
    Tape t;
    const auto nx = t.parameter(x);
    const auto loss = sum_all(t, matmul(t, relu(t, nx), t.constant(w)));
    const auto grads = backward(t, loss);
    const Matrix numeric = numeric_gradient([&](const Matrix& v) { return (v.cwiseMax(0.0) * w).sum(); }, x);
    EXPECT_LT(max_rel(grads.at(nx.index), numeric), 1e-6);
}

TEST(Dropout, EvalAndZeroRateAreIdentity)
{
    Rng rng(1);
    Tape t;
    const Matrix x = mat({{1, 2}, {3, 4}});
    const auto nx = t.constant(x);
    EXPECT_EQ(t.value(dropout(t, nx, 0.6, Mode::Eval, rng)), x);
    EXPECT_EQ(t.value(dropout(t, nx, 0.0, Mode::Train, rng)), x);
}

TEST(Dropout, InvertedScalingPreservesMean)
{
    Rng rng(123);
    Tape t;
    const auto y = dropout(t, t.constant(Matrix::Ones(100, 100)), 0.6, Mode::Train, rng);
    EXPECT_NEAR(t.value(y).mean(), 1.0, 0.05);
    // Survivors are scaled by 1 / (1 - rate).
    for (Index i = 0; i < t.value(y).size(); ++i) {
        const double v = t.value(y).data()[i];
        ASSERT_TRUE(v == 0.0 || v == 1.0 / 0.4);
    }
}

TEST(Dropout, RejectsRateOne)
{
    Rng rng(1);
    Tape t;
    EXPECT_THROW(dropout(t, t.constant(Matrix::Ones(1, 1)), 1.0, Mode::Train, rng), ConfigError);
    EXPECT_THROW(dropout(t, t.constant(Matrix::Ones(1, 1)), -0.1, Mode::Eval, rng), ConfigError);
}

TEST(Dropout, BackwardUsesRecordedMask)
{
    Rng rng(9);
    Tape t;
    const auto x = t.parameter(Matrix::Constant(4, 5, 2.0));
    const auto y = dropout(t, x, 0.5, Mode::Train, rng);
    const Matrix mask = t.value(y) / 2.0;
    const auto grads = backward(t, sum_all(t, y));
    EXPECT_EQ(grads.at(x.index), mask);
}

TEST(KernelSpmm, TwoNodePath)
{
    const std::vector<Edge> edges{{0, 1}};
    const auto g = build_graph(2, edges);
    Tape t;
    const auto phi = t.constant(mat({{1.0}}));
    const auto out = kernel_spmm(t, adaptive_kernel(t, g, phi), t.constant(mat({{1}, {3}})));
    EXPECT_EQ(t.value(out), mat({{2}, {2}}));
}

TEST(KernelSpmm, AllPassLimit)
{
    std::mt19937_64 rng(3);
    const auto g = random_connected_graph(12, 12, rng);
    const Matrix h = random_matrix(12, 4, rng);
    Tape t;
    const auto out = kernel_spmm(t, adaptive_kernel(t, g, t.constant(mat({{1e9}}))), t.constant(h));
    EXPECT_LT((t.value(out) - h).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KernelSpmm, DimensionMismatch)
{
    const std::vector<Edge> edges{{0, 1}};
    const auto g = build_graph(2, edges);
    Tape t;
    const auto k = adaptive_kernel(t, g, t.constant(mat({{1.0}})));
    EXPECT_THROW(kernel_spmm(t, k, t.constant(Matrix::Ones(3, 1))), DimensionError);
}

// d loss / d phi through a two-layer propagation against central differences.
TEST(KernelSpmm, PhiGradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(21);
    const auto g = random_connected_graph(10, 10, rng);
    const Matrix h = random_matrix(10, 3, rng);
    const Matrix w = random_matrix(3, 1, rng);
    const Matrix phi = mat({{0.7, 2.3}});

    auto loss_of = [&](const Matrix& p, Tape& t, NodeId& phi_node, NodeId& h_node) {
        phi_node = t.parameter(p);
        h_node = t.parameter(h);
        auto x = kernel_spmm(t, adaptive_kernel(t, g, phi_node, 0), h_node);
        x = kernel_spmm(t, adaptive_kernel(t, g, phi_node, 1), x);
        return sum_all(t, matmul(t, x, t.constant(w)));
    };
    Tape t;
    NodeId pn{};
    NodeId hn{};
    const auto grads = backward(t, loss_of(phi, t, pn, hn));
    const Matrix numeric = numeric_gradient(
        [&](const Matrix& p) {
            Tape tt;
            NodeId a{};
            NodeId b{};
            return tt.value(loss_of(p, tt, a, b))(0, 0);
        },
        phi);
    EXPECT_LT(max_rel(grads.at(pn.index), numeric), 1e-5);

    const Matrix numeric_h = numeric_gradient(
        [&](const Matrix& x) {
            Matrix y = build_kernel(g, 2.3).apply(build_kernel(g, 0.7).apply(x));
            return (y * w).sum();
        },
        h);
    EXPECT_LT(max_rel(grads.at(hn.index), numeric_h), 1e-6);
}

TEST(MaskedXent, UniformLogits)
{
    Tape t;
    const std::vector<int> labels{0};
    const std::vector<Index> mask{0};
    const auto loss = masked_softmax_xent(t, t.constant(mat({{0, 0}})), labels, mask);
    EXPECT_NEAR(t.value(loss)(0, 0), std::log(2.0), 1e-15);
}

TEST(MaskedXent, LargeLogitsAreStable)
{
    Tape t;
    const std::vector<int> labels{0};
    const std::vector<Index> mask{0};
    const auto logits = t.parameter(mat({{1000, 0}}));
    const auto loss = masked_softmax_xent(t, logits, labels, mask);
    EXPECT_LT(t.value(loss)(0, 0), 1e-6);
    EXPECT_TRUE(std::isfinite(t.value(loss)(0, 0)));
    const auto grads = backward(t, loss);
    EXPECT_TRUE(grads.at(logits.index).allFinite());
}

TEST(MaskedXent, Errors)
{
    Tape t;
    const std::vector<int> labels{0, 1};
    const std::vector<Index> empty;
    const auto logits = t.constant(Matrix::Zero(2, 2));
    EXPECT_THROW(masked_softmax_xent(t, logits, labels, empty), ConfigError);
    const std::vector<Index> bad{2};
    EXPECT_THROW(masked_softmax_xent(t, logits, labels, bad), DimensionError);
    const std::vector<int> bad_labels{0, 5};
    const std::vector<Index> mask{1};
    EXPECT_THROW(masked_softmax_xent(t, logits, bad_labels, mask), DataError);
}

TEST(MaskedXent, GradientCheck)
{
    std::mt19937_64 rng(17);
    const Matrix z = random_matrix(5, 3, rng);
    const std::vector<int> labels{2, 0, 1, 1, 0};
    const std::vector<Index> mask{0, 2, 4};
    Tape t;
    const auto nz = t.parameter(z);
    const auto grads = backward(t, masked_softmax_xent(t, nz, labels, mask));
    const Matrix numeric = numeric_gradient(
        [&](const Matrix& x) {
            Tape tt;
            return tt.value(masked_softmax_xent(tt, tt.constant(x), labels, mask))(0, 0);
        },
        z);
    EXPECT_LT(max_rel(grads.at(nz.index), numeric), 1e-6);
    // Rows outside the mask receive nothing.
    EXPECT_EQ(grads.at(nz.index).row(1).cwiseAbs().sum(), 0.0);
    EXPECT_EQ(grads.at(nz.index).row(3).cwiseAbs().sum(), 0.0);
}

TEST(Backward, SingleLeaf)
{
    Tape t;
    const auto w = t.parameter(mat({{5.0}}));
    const auto grads = backward(t, w);
    EXPECT_EQ(grads.at(w.index), mat({{1.0}}));
}

TEST(Backward, SumOfRelu)
{
    Tape t;
    const auto w = t.parameter(mat({{2, -2}}));
    const auto grads = backward(t, sum_all(t, relu(t, w)));
    EXPECT_EQ(grads.at(w.index), mat({{1, 0}}));
}

TEST(Backward, NonScalarLossRejected)
{
    Tape t;
    const auto w = t.parameter(Matrix::Ones(2, 1));
    EXPECT_THROW(backward(t, w), ContractError);
}

TEST(Backward, AccumulatesAcrossConsumers)
{
    Tape t;
    const auto w = t.parameter(mat({{3.0}}));
    const auto loss = sum_all(t, add(t, w, add(t, w, w)));
    EXPECT_EQ(backward(t, loss).at(w.index), mat({{3.0}}));
}

TEST(Backward, LinearInSeedAndDeterministic)
{
    std::mt19937_64 rng(5);
    const auto g = random_connected_graph(15, 15, rng);
    const Matrix h = random_matrix(15, 4, rng);
    auto run = [&](double seed) {
        Tape t;
        const auto phi = t.parameter(mat({{1.3}}));
        const auto x = t.parameter(h);
        const auto y = relu(t, kernel_spmm(t, adaptive_kernel(t, g, phi), x));
        auto grads = backward(t, sum_all(t, y), seed);
        return std::make_pair(grads.at(phi.index), grads.at(x.index));
    };
    const auto one = run(1.0);
    const auto two = run(2.0);
    const auto again = run(1.0);
    EXPECT_EQ(two.first, 2.0 * one.first);
    EXPECT_EQ(two.second, 2.0 * one.second);
    EXPECT_EQ(again.first, one.first);
    EXPECT_EQ(again.second, one.second);
}

TEST(Backward, TapeOrderIsTopological)
{
    Tape t;
    const auto a = t.parameter(Matrix::Ones(2, 2));
    const auto b = relu(t, a);
    const auto c = add(t, a, b);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (NodeId p : t.node(NodeId{i}).parents)
            EXPECT_LT(p.index, i);
    (void)c;
}

TEST(SumLayers, OrderIndependent)
{
    std::mt19937_64 rng(6);
    std::vector<Matrix> terms;
    for (int k = 0; k < 6; ++k)
        terms.push_back(random_matrix(4, 5, rng) * std::pow(10.0, k - 3));
    Tape t;
    std::vector<NodeId> ids;
    for (const auto& m : terms)
        ids.push_back(t.constant(m));
    const Matrix forward_order = t.value(sum_layers(t, ids));
    std::reverse(ids.begin(), ids.end());
    EXPECT_EQ(t.value(sum_layers(t, ids)), forward_order);
    std::shuffle(ids.begin(), ids.end(), rng);
    EXPECT_EQ(t.value(sum_layers(t, ids)), forward_order);
}

TEST(FiniteDiffCheck, Quadratic)
{
    Matrix w = mat({{3.0}});
    const Matrix analytic = mat({{6.0}});
    const std::vector<CheckedParameter> params{{"w", &w, &analytic}};
    const auto results = finite_diff_check([&] { return w(0, 0) * w(0, 0); }, params, 1e-5);
    EXPECT_LT(max_rel_error(results), 1e-9);
    EXPECT_EQ(w(0, 0), 3.0); // restored
}

TEST(FiniteDiffCheck, SkipsKinkAtZero)
{
    Matrix phi = mat({{0.0, 1.0}});
    const Matrix analytic = mat({{0.0, 1.0}});
    const std::vector<CheckedParameter> params{{"phi", &phi, &analytic, true}};
    const auto results = finite_diff_check([&] { return std::max(phi(0, 0), 0.0) * 5.0 + phi(0, 1); }, params);
    EXPECT_EQ(results[0].checked, 1);
    EXPECT_TRUE(std::isnan(results[0].errors(0, 0)));
    EXPECT_LT(results[0].max_rel_error, 1e-9);
}

TEST(ModelGradcheck, FullModelTwentyNodes)
{
    for (std::uint64_t seed : {0u, 1u}) {
        GradcheckSetup setup;
        setup.seed = seed;
        const auto r = model_gradcheck(setup);
        EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_parameter;
        EXPECT_GE(r.kink_margin, 10 * setup.epsilon);
        std::vector<std::string> names;
        for (const auto& p : r.parameters)
            names.push_back(p.name);
        EXPECT_EQ(names, (std::vector<std::string>{"W*", "phi_1", "phi_2", "phi_3", "phi_4", "phi_5", "head_W",
                                                   "head_b"}));
    }
}

TEST(ModelGradcheck, AblationsAndDeepHead)
{
    for (auto v : {ModelVariant::NoLambda, ModelVariant::NoPt, ModelVariant::NoReadout}) {
        GradcheckSetup setup;
        setup.variant = v;
        setup.layers = 2;
        setup.hidden = 16;
        const auto r = model_gradcheck(setup);
        EXPECT_LT(r.max_rel_error, 1e-4) << to_string(v) << " " << r.worst_parameter;
    }
    GradcheckSetup deep;
    deep.head_depth = 2;
    deep.hidden = 16;
    EXPECT_LT(model_gradcheck(deep).max_rel_error, 1e-4);
}
