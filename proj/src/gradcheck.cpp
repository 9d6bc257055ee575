#include "akgnn/gradcheck.hpp"

#include "akgnn/rng.hpp"
#include "akgnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace akgnn {

namespace {

constexpr int kMaxAttempts = 1000;

/// Smallest |input| over every relu in an eval-mode forward pass.
double relu_margin(const ModelParams& params, const CsrGraph& graph, const Matrix& features)
{
    ad::Tape tape;
    ad::Rng unused(0);
    forward(tape, params, graph, features, {ad::Mode::Eval, 0.0}, unused);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tape.size(); ++i) {
        const auto& n = tape.node(ad::NodeId{i});
        if (n.op == ad::OpKind::Relu)
            margin = std::min(margin, tape.value(n.parents[0]).cwiseAbs().minCoeff());
    }
    return margin;
}

} // namespace

GradcheckReport model_gradcheck(const GradcheckSetup& setup)
{
    if (setup.nodes < 2)
        throw ConfigError("gradcheck: need at least 2 nodes");
    auto rng = make_rng(setup.seed, Stream::Gradcheck);
    const CsrGraph graph = random_connected_graph(setup.nodes, setup.nodes, rng);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix features(setup.nodes, setup.features);
    for (Index i = 0; i < features.size(); ++i)
        features.data()[i] = unit(rng);
    std::vector<int> labels(static_cast<std::size_t>(setup.nodes));
    std::uniform_int_distribution<int> any_class(0, setup.classes - 1);
    for (auto& l : labels)
        l = any_class(rng);
    std::vector<Index> mask(static_cast<std::size_t>(setup.nodes));
    std::iota(mask.begin(), mask.end(), Index{0});

    const ModelDims dims{setup.features, setup.hidden, setup.classes, setup.layers, setup.head_depth};
    std::uniform_real_distribution<double> phi_range(0.25, 3.0);
    ModelParams params;
    GradcheckReport report;
    // Central differences straddling a relu kink average two slopes, so draw
    // parameters until every relu input sits at least 10 eps away from zero.
    const double margin = 10.0 * setup.epsilon;
    for (report.attempts = 1;; ++report.attempts) {
        params = init_params(dims, setup.variant,
                             report.attempts == 1 ? setup.seed
                                                  : derive_seed(setup.seed, Stream::Gradcheck,
                                                                static_cast<std::uint64_t>(report.attempts)));
        params.phi_trainable = true;
        for (Index k = 0; k < params.phi.size(); ++k)
            params.phi.data()[k] = phi_range(rng);
        report.kink_margin = relu_margin(params, graph, features);
        if (report.kink_margin >= margin || report.attempts == kMaxAttempts)
            break;
    }

    auto objective = [&]() {
        ad::Tape tape;
        ad::Rng unused(0);
        const auto out = forward(tape, params, graph, features, {ad::Mode::Eval, 0.0}, unused);
        return tape.value(ad::masked_softmax_xent(tape, out.logits, labels, mask))(0, 0);
    };

    std::vector<Matrix> analytic;
    {
        ad::Tape tape;
        ad::Rng unused(0);
        const auto out = forward(tape, params, graph, features, {ad::Mode::Eval, 0.0}, unused);
        const auto loss = ad::masked_softmax_xent(tape, out.logits, labels, mask);
        const auto grads = ad::backward(tape, loss);
        analytic = gather_gradients(tape, grads, out.params, params);
    }

    const auto refs = params.parameters();
    std::vector<ad::CheckedParameter> checked;
    for (std::size_t i = 0; i < refs.size(); ++i)
        checked.push_back({refs[i].name, refs[i].value, &analytic[i], refs[i].name == "phi"});
    const auto results = ad::finite_diff_check(objective, checked, setup.epsilon);

    for (const auto& r : results) {
        if (r.name != "phi") {
            report.parameters.push_back(r);
            continue;
        }
        // Report each layer's phi on its own line.
        for (Index k = 0; k < r.errors.cols(); ++k) {
            ad::GradCheckResult one;
            one.name = "phi_" + std::to_string(k + 1);
            one.errors = r.errors.col(k);
            const double e = r.errors(0, k);
            if (!std::isnan(e)) {
                one.max_rel_error = e;
                one.worst_row = 0;
                one.worst_col = k;
                one.checked = 1;
            }
            report.parameters.push_back(std::move(one));
        }
    }
    for (const auto& r : report.parameters) {
        if (report.worst_parameter.empty() || r.max_rel_error > report.max_rel_error) {
            report.max_rel_error = r.max_rel_error;
            report.worst_parameter = r.name;
        }
    }
    return report;
}

} // namespace akgnn
