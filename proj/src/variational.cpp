#include "chive/variational.hpp"

#include <cmath>

#include "chive/errors.hpp"

namespace chive {

double GaussianPosterior::sigma(std::size_t d) const { return std::exp(0.5 * log_var[d]); }

VariationalRef add_variational(ParameterStore& store, const std::string& prefix,
                               std::uint32_t summary_dim, std::uint32_t latent_dim) {
    VariationalRef ref;
    ref.latent_dim = latent_dim;
    ref.proj = add_affine(store, prefix + ".proj", summary_dim, 2 * latent_dim);
    return ref;
}

void init_variational(ParameterStore& store, const VariationalRef& ref, Rng& rng) {
    init_affine(store, ref.proj, rng);
}

PosteriorNodes project(Tape& tape, const ParameterStore& store, const VariationalRef& ref,
                       NodeId summary) {
    const NodeId packed = affine_node(tape, store, ref.proj, summary);
    PosteriorNodes post;
    post.mu = tape.slice(packed, 0, ref.latent_dim);
    post.log_var = tape.slice(packed, ref.latent_dim, ref.latent_dim);
    return post;
}

NodeId sample_node(Tape& tape, const PosteriorNodes& post, NodeId noise) {
    const NodeId sigma = tape.exp(tape.scale_shift(post.log_var, 0.5, 0.0));
    return tape.add(post.mu, tape.mul(sigma, noise));
}

NodeId kl_node(Tape& tape, const PosteriorNodes& post) {
    const NodeId mu_sq = tape.square(post.mu);
    const NodeId var = tape.exp(post.log_var);
    const NodeId inner = tape.sub(tape.add(mu_sq, var), post.log_var);
    const NodeId total = tape.sum(inner);
    const double dim = static_cast<double>(tape.length(post.mu));
    return tape.scale_shift(total, 0.5, -0.5 * dim);
}

GaussianPosterior posterior_values(const Tape& tape, const PosteriorNodes& post) {
    GaussianPosterior out;
    auto mu = tape.value(post.mu);
    auto lv = tape.value(post.log_var);
    out.mu.assign(mu.begin(), mu.end());
    out.log_var.assign(lv.begin(), lv.end());
    return out;
}

std::vector<double> sample(const GaussianPosterior& post, std::span<const double> noise) {
    if (noise.size() != post.dim())
        throw ShapeError("sample: noise length does not match posterior dimension");
    std::vector<double> out(post.dim());
    for (std::size_t d = 0; d < post.dim(); ++d)
        out[d] = post.mu[d] + std::exp(0.5 * post.log_var[d]) * noise[d];
    return out;
}

double kl_divergence(const GaussianPosterior& post) {
    double acc = 0.0;
    for (std::size_t d = 0; d < post.dim(); ++d) {
        const double var = std::exp(post.log_var[d]);
        acc += post.mu[d] * post.mu[d] + var - 1.0 - post.log_var[d];
    }
    return 0.5 * acc;
}

}  // namespace chive
