#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kanmlp/numerics.hpp"

namespace kanmlp {

struct GradCheckOptions {
    std::size_t instances = 20;
    double step = 1e-5;
    double tolerance = 1e-5;
    std::uint64_t seed = 0x6772616463686bULL;
};

// One random instance: returns the worst relative error between the analytic
// gradient and central differences over every block it checks.
using GradCheckInstance = std::function<double(Rng& rng, double step)>;

struct GradCheck {
    std::string component;
    GradCheckInstance instance;
};

struct GradCheckResult {
    std::string component;
    std::size_t instances = 0;
    double worst_error = 0.0;
    bool passed = false;
};

// Activations, Dense, KANLinear, BatchNorm, dropout, spline derivative, both
// losses, and both full models end to end.
std::vector<GradCheck> standard_gradchecks();

// Each check runs options.instances times on its own seeded stream.
std::vector<GradCheckResult> run_gradchecks(std::span<const GradCheck> checks,
                                            const GradCheckOptions& options = {});

// Relative error of `analytic` against central differences of `objective`
// with respect to the values in `block`, which is perturbed in place and restored.
double compare_gradient(std::span<double> block, const std::function<double()>& objective,
                        std::span<const double> analytic, double step);

}  // namespace kanmlp
