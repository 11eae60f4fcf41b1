#pragma once

// Monte-Carlo oracles for the variational layer, independent of the
// closed-form implementation they check: they integrate the log-density
// ratio over seeded draws from the posterior.

#include <cmath>
#include <cstddef>
#include <vector>

#include "chive/rng.hpp"
#include "chive/variational.hpp"

namespace chive_test {

// Brute-force per-sample average of log q(x) - log p(x) with x ~ q.
inline double naive_mc_kl(const chive::GaussianPosterior& post, std::size_t samples,
                          chive::Rng& rng) {
    const std::size_t dim = post.dim();
    double acc = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        double term = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double sigma = std::exp(0.5 * post.log_var[d]);
            const double z = rng.normal();
            const double x = post.mu[d] + sigma * z;
            const double log_q = -0.5 * post.log_var[d] - 0.5 * z * z;  // + const
            const double log_p = -0.5 * x * x;                          // + same const
            term += log_q - log_p;
        }
        acc += term;
    }
    return acc / static_cast<double>(samples);
}

// The same estimator over the same draw sequence, accumulated through
// per-dimension sufficient statistics (sum of z and z^2). Identical up to
// floating-point summation order; a test pins the two together.
inline double fast_mc_kl(const chive::GaussianPosterior& post, std::size_t samples,
                         chive::Rng& rng) {
    const std::size_t dim = post.dim();
    std::vector<double> s1(dim, 0.0), s2(dim, 0.0);
    for (std::size_t s = 0; s < samples; ++s)
        for (std::size_t d = 0; d < dim; ++d) {
            const double z = rng.normal();
            s1[d] += z;
            s2[d] += z * z;
        }
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double sigma = std::exp(0.5 * post.log_var[d]);
        const double c0 = -0.5 * post.log_var[d] + 0.5 * post.mu[d] * post.mu[d];
        const double c1 = post.mu[d] * sigma;
        const double c2 = 0.5 * (sigma * sigma - 1.0);
        acc += c0 * static_cast<double>(samples) + c1 * s1[d] + c2 * s2[d];
    }
    return acc / static_cast<double>(samples);
}

}  // namespace chive_test
