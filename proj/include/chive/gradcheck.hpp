#pragma once

#include <functional>
#include <string>

#include "chive/params.hpp"
#include "chive/rng.hpp"
#include "chive/tape.hpp"

namespace chive {

struct GradCheckResult {
    double max_rel_error = 0.0;
    int samples = 0;
    std::string worst_param;
    std::size_t worst_coordinate = 0;
    double worst_analytic = 0.0, worst_numeric = 0.0;
};

// Builds the loss graph against the store's current values. Must be
// deterministic: any sampling noise is fixed by the caller beforehand.
using LossBuilder = std::function<NodeId(Tape&)>;

// Compares the reverse-mode gradient against central finite differences on
// `samples` randomly chosen coordinates. The step for coordinate i is
// epsilon * max(1, |theta_i|). Relative error per coordinate is
// |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
GradCheckResult grad_check(ParameterStore& store, const LossBuilder& build_loss, double epsilon,
                           int samples, Rng& rng);

}  // namespace chive
