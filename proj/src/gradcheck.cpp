#include "chive/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "chive/errors.hpp"

namespace chive {

namespace {

double eval_loss(const LossBuilder& build_loss) {
    Tape tape;
    const NodeId loss = build_loss(tape);
    const double value = tape.scalar(loss);
    if (!std::isfinite(value)) throw NumericError("grad_check: non-finite loss");
    return value;
}

// Central difference at step h around flat[i] = center.
double quotient(std::span<double> flat, std::size_t i, double center, double h,
                const LossBuilder& build_loss) {
    flat[i] = center + h;
    const double up = eval_loss(build_loss);
    flat[i] = center - h;
    const double down = eval_loss(build_loss);
    flat[i] = center;
    return (up - down) / (2.0 * h);
}

// Ridders' extrapolated central difference. A plain quotient cannot serve
// every coordinate here: low-influence weights quantize the difference away
// at small steps, while tanh/sigmoid curvature biases large steps. The
// tableau extrapolates the ladder h, h/c, h/c^2, ... to h -> 0 and keeps the
// entry with the smallest internal error estimate, which rejects both the
// quantization-limited and the truncation-limited rungs. epsilon bounds the
// smallest step relative to the coordinate scale.
double central_difference(std::span<double> flat, std::size_t i, double epsilon,
                          const LossBuilder& build_loss) {
    constexpr int kTableau = 12;
    constexpr double kContract = 1.6;
    const double center = flat[i];
    const double scale = std::max(1.0, std::fabs(center));
    double h = 0.1 * scale;
    const double h_min = epsilon * scale;

    double a[kTableau][kTableau];
    a[0][0] = quotient(flat, i, center, h, build_loss);
    double best = a[0][0];
    double best_err = 1e300;
    for (int j = 1; j < kTableau; ++j) {
        h /= kContract;
        if (h < h_min) break;
        a[0][j] = quotient(flat, i, center, h, build_loss);
        double fac = kContract * kContract;
        for (int k = 1; k <= j; ++k) {
            a[k][j] = (a[k - 1][j] * fac - a[k - 1][j - 1]) / (fac - 1.0);
            fac *= kContract * kContract;
            const double errt = std::max(std::fabs(a[k][j] - a[k - 1][j]),
                                         std::fabs(a[k][j] - a[k - 1][j - 1]));
            if (errt <= best_err) {
                best_err = errt;
                best = a[k][j];
            }
        }
    }
    return best;
}

}  // namespace

GradCheckResult grad_check(ParameterStore& store, const LossBuilder& build_loss, double epsilon,
                           int samples, Rng& rng) {
    GradCheckResult result;
    result.samples = samples;

    std::vector<double> analytic(store.total_size(), 0.0);
    {
        Tape tape;
        const NodeId loss = build_loss(tape);
        if (!std::isfinite(tape.scalar(loss))) throw NumericError("grad_check: non-finite loss");
        tape.backward(loss);
        tape.accumulate_param_grads(analytic);
    }

    auto flat = store.flat();
    for (int k = 0; k < samples; ++k) {
        const std::size_t i =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(flat.size()) - 1));
        const double numeric = central_difference(flat, i, epsilon, build_loss);
        const double ga = analytic[i];
        const double rel =
            std::fabs(ga - numeric) / std::max(1e-8, std::fabs(ga) + std::fabs(numeric));
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_coordinate = i;
            result.worst_analytic = ga;
            result.worst_numeric = numeric;
            for (std::size_t e = 0; e < store.count(); ++e) {
                const ParamEntry& entry = store.entry(e);
                if (i >= entry.offset && i < entry.offset + entry.size()) {
                    result.worst_param = entry.name;
                    break;
                }
            }
        }
    }
    return result;
}

}  // namespace chive
