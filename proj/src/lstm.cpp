#include "chive/lstm.hpp"

#include <cmath>

namespace chive {

namespace {

void init_uniform(ParameterStore& store, std::size_t index, double k, Rng& rng) {
    for (double& v : store.values(index)) v = rng.uniform(-k, k);
}

}  // namespace

LstmStack add_lstm_stack(ParameterStore& store, const std::string& prefix,
                         std::uint32_t input_dim, std::uint32_t hidden, int layers) {
    LstmStack stack;
    stack.input_dim = input_dim;
    stack.hidden = hidden;
    for (int l = 0; l < layers; ++l) {
        const std::uint32_t in = (l == 0) ? input_dim : hidden;
        const std::string base = prefix + ".l" + std::to_string(l);
        LstmLayer layer;
        layer.input_dim = in;
        layer.hidden = hidden;
        layer.wx = store.add(base + ".wx", 4 * hidden, in);
        layer.wh = store.add(base + ".wh", 4 * hidden, hidden);
        layer.b = store.add(base + ".b", 4 * hidden);
        stack.layers.push_back(layer);
    }
    return stack;
}

void init_lstm_stack(ParameterStore& store, const LstmStack& stack, Rng& rng) {
    for (const LstmLayer& layer : stack.layers) {
        init_uniform(store, layer.wx, 1.0 / std::sqrt(static_cast<double>(layer.input_dim)), rng);
        init_uniform(store, layer.wh, 1.0 / std::sqrt(static_cast<double>(layer.hidden)), rng);
        auto bias = store.values(layer.b);
        for (double& v : bias) v = 0.0;
        for (std::uint32_t i = layer.hidden; i < 2 * layer.hidden; ++i) bias[i] = 1.0;
    }
}

AffineRef add_affine(ParameterStore& store, const std::string& prefix, std::uint32_t in,
                     std::uint32_t out) {
    AffineRef ref;
    ref.in = in;
    ref.out = out;
    ref.w = store.add(prefix + ".w", out, in);
    ref.b = store.add(prefix + ".b", out);
    return ref;
}

void init_affine(ParameterStore& store, const AffineRef& ref, Rng& rng) {
    init_uniform(store, ref.w, 1.0 / std::sqrt(static_cast<double>(ref.in)), rng);
    for (double& v : store.values(ref.b)) v = 0.0;
}

NodeId affine_node(Tape& tape, const ParameterStore& store, const AffineRef& ref, NodeId x) {
    return tape.affine(tape.param(store, ref.w), x, tape.param(store, ref.b));
}

StackState zero_state(Tape& tape, const LstmStack& stack) {
    StackState state;
    const NodeId z = tape.zeros(stack.hidden);
    state.c.assign(stack.layers.size(), z);
    state.h.assign(stack.layers.size(), z);
    return state;
}

std::pair<NodeId, NodeId> cell_step(Tape& tape, NodeId wx, NodeId wh, NodeId b, NodeId c_prev,
                                    NodeId h_prev, NodeId input) {
    const NodeId pre = tape.add(tape.affine(wx, input, b), tape.matvec(wh, h_prev));
    const std::uint32_t hidden = tape.length(pre) / 4;
    const NodeId i = tape.sigmoid(tape.slice(pre, 0, hidden));
    const NodeId f = tape.sigmoid(tape.slice(pre, hidden, hidden));
    const NodeId g = tape.tanh(tape.slice(pre, 2 * hidden, hidden));
    const NodeId o = tape.sigmoid(tape.slice(pre, 3 * hidden, hidden));
    const NodeId c_next = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
    const NodeId h_next = tape.mul(o, tape.tanh(c_next));
    return {c_next, h_next};
}

NodeId stack_step(Tape& tape, const ParameterStore& store, const LstmStack& stack,
                  StackState& state, NodeId input) {
    NodeId x = input;
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const LstmLayer& layer = stack.layers[l];
        auto [c_next, h_next] =
            cell_step(tape, tape.param(store, layer.wx), tape.param(store, layer.wh),
                      tape.param(store, layer.b), state.c[l], state.h[l], x);
        state.c[l] = c_next;
        state.h[l] = h_next;
        x = h_next;
    }
    return x;
}

}  // namespace chive
