#ifndef AKGNN_GRADCHECK_HPP
#define AKGNN_GRADCHECK_HPP

#include "akgnn/autodiff.hpp"
#include "akgnn/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace akgnn {

struct GradcheckSetup {
    Index nodes{20};
    Index features{16};
    Index hidden{64};
    int classes{3};
    Index layers{5};
    Index head_depth{1};
    ModelVariant variant{ModelVariant::Full};
    double epsilon{1e-5};
    std::uint64_t seed{0};
};

struct GradcheckReport {
    /// One entry per parameter class: W* (or W_k), phi_1..phi_K, head tensors.
    std::vector<ad::GradCheckResult> parameters;
    double max_rel_error{};
    std::string worst_parameter;
    double kink_margin{}; ///< smallest |relu input| at the checked point
    int attempts{};       ///< parameter draws needed to clear the kinks
};

/**
 * Builds a random connected graph with random features, labels and phi
 * values spread over (0.25, 3), then compares every analytic gradient of the
 * eval-mode training loss with central differences. Parameters are redrawn
 * until no relu input lies within 10 epsilon of zero.
 */
GradcheckReport model_gradcheck(const GradcheckSetup& setup);

} // namespace akgnn

#endif // AKGNN_GRADCHECK_HPP
