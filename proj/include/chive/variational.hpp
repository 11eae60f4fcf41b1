#pragma once

#include <span>
#include <vector>

#include "chive/lstm.hpp"
#include "chive/params.hpp"
#include "chive/tape.hpp"

namespace chive {

// Predicted (mu, log variance) of the isotropic Gaussian posterior.
struct GaussianPosterior {
    std::vector<double> mu;
    std::vector<double> log_var;

    std::size_t dim() const { return mu.size(); }
    double sigma(std::size_t d) const;
};

// The sampled latent conditioning the decoder.
struct SentenceProsodyEmbedding {
    std::vector<double> values;
};

// One affine layer projecting the encoder summary to a 2*latent vector,
// split into mu (first half) and log_var (second half).
struct VariationalRef {
    AffineRef proj;
    std::uint32_t latent_dim = 0;
};

VariationalRef add_variational(ParameterStore& store, const std::string& prefix,
                               std::uint32_t summary_dim, std::uint32_t latent_dim);
void init_variational(ParameterStore& store, const VariationalRef& ref, Rng& rng);

struct PosteriorNodes {
    NodeId mu = 0;
    NodeId log_var = 0;
};

PosteriorNodes project(Tape& tape, const ParameterStore& store, const VariationalRef& ref,
                       NodeId summary);

// Reparameterized draw: s = mu + exp(0.5*log_var) . noise. Noise is supplied
// as a constant so the surrounding loss stays deterministic.
NodeId sample_node(Tape& tape, const PosteriorNodes& post, NodeId noise);

// 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2)
NodeId kl_node(Tape& tape, const PosteriorNodes& post);

GaussianPosterior posterior_values(const Tape& tape, const PosteriorNodes& post);

// Value-level counterparts.
std::vector<double> sample(const GaussianPosterior& post, std::span<const double> noise);
double kl_divergence(const GaussianPosterior& post);

}  // namespace chive
