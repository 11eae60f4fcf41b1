#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chive/params.hpp"
#include "chive/rng.hpp"
#include "chive/tape.hpp"

namespace chive {

// One LSTM layer: gate order [input, forget, cell candidate, output] packed
// along the rows of wx (4H x in), wh (4H x H) and b (4H).
struct LstmLayer {
    std::size_t wx = 0, wh = 0, b = 0;  // parameter indices
    std::uint32_t input_dim = 0, hidden = 0;
};

struct LstmStack {
    std::vector<LstmLayer> layers;
    std::uint32_t input_dim = 0, hidden = 0;
};

LstmStack add_lstm_stack(ParameterStore& store, const std::string& prefix,
                         std::uint32_t input_dim, std::uint32_t hidden, int layers);

// Uniform [-k, k] with k = 1/sqrt(fan_in); forget-gate bias 1.
void init_lstm_stack(ParameterStore& store, const LstmStack& stack, Rng& rng);

// Plain affine map, used for readouts and the variational projection.
struct AffineRef {
    std::size_t w = 0, b = 0;
    std::uint32_t in = 0, out = 0;
};

AffineRef add_affine(ParameterStore& store, const std::string& prefix, std::uint32_t in,
                     std::uint32_t out);
void init_affine(ParameterStore& store, const AffineRef& ref, Rng& rng);
NodeId affine_node(Tape& tape, const ParameterStore& store, const AffineRef& ref, NodeId x);

// (c, h) per layer.
struct StackState {
    std::vector<NodeId> c, h;
};

StackState zero_state(Tape& tape, const LstmStack& stack);

// Standard gate equations: i,f,o = sigmoid(affine), g = tanh(affine),
// c' = f.c + i.g, h' = o.tanh(c'). Returns (c', h').
std::pair<NodeId, NodeId> cell_step(Tape& tape, NodeId wx, NodeId wh, NodeId b, NodeId c_prev,
                                    NodeId h_prev, NodeId input);

// Advances every layer once; returns the top layer's h.
NodeId stack_step(Tape& tape, const ParameterStore& store, const LstmStack& stack,
                  StackState& state, NodeId input);

}  // namespace chive
