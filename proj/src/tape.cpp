#include "chive/tape.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace chive {

namespace {

std::string dim_text(std::uint32_t n) { return std::to_string(n); }

}  // namespace

void Tape::reserve(std::size_t nodes) {
    nodes_.reserve(nodes);
    values_.reserve(nodes * 16);
}

NodeId Tape::push(OpKind op, std::uint32_t len, NodeId a, NodeId b, NodeId c, std::uint32_t aux) {
    Node node;
    node.op = op;
    node.a = a;
    node.b = b;
    node.c = c;
    node.aux = aux;
    node.off = static_cast<std::uint32_t>(values_.size());
    node.len = len;
    values_.resize(values_.size() + len);
    nodes_.push_back(node);
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(std::span<const double> values) {
    NodeId id = push(OpKind::kLeaf, static_cast<std::uint32_t>(values.size()));
    std::memcpy(data(id), values.data(), values.size() * sizeof(double));
    nodes_[id].rows = static_cast<std::uint32_t>(values.size());
    nodes_[id].cols = 1;
    return id;
}

NodeId Tape::leaf_matrix(std::uint32_t rows, std::uint32_t cols, std::span<const double> values) {
    if (values.size() != static_cast<std::size_t>(rows) * cols)
        throw ShapeError("leaf_matrix: value count does not match rows*cols");
    NodeId id = push(OpKind::kLeaf, rows * cols);
    std::memcpy(data(id), values.data(), values.size() * sizeof(double));
    nodes_[id].rows = rows;
    nodes_[id].cols = cols;
    return id;
}

NodeId Tape::scalar_leaf(double value) { return leaf(std::span<const double>(&value, 1)); }

NodeId Tape::zeros(std::uint32_t len) {
    auto it = zero_cache_.find(len);
    if (it != zero_cache_.end()) return it->second;
    NodeId id = push(OpKind::kLeaf, len);
    std::memset(data(id), 0, len * sizeof(double));
    nodes_[id].rows = len;
    nodes_[id].cols = 1;
    zero_cache_.emplace(len, id);
    return id;
}

NodeId Tape::param(const ParameterStore& store, std::size_t param_index) {
    auto it = param_cache_.find(param_index);
    if (it != param_cache_.end()) return it->second;
    const ParamEntry& entry = store.entry(param_index);
    NodeId id = push(OpKind::kLeaf, static_cast<std::uint32_t>(entry.size()));
    std::memcpy(data(id), store.values(param_index).data(), entry.size() * sizeof(double));
    nodes_[id].rows = entry.rows;
    nodes_[id].cols = entry.cols;
    param_cache_.emplace(param_index, id);
    param_leaves_.emplace_back(entry.offset, id);
    return id;
}

NodeId Tape::affine(NodeId w, NodeId x, NodeId b) {
    const Node& W = nodes_[w];
    if (W.cols != nodes_[x].len)
        throw ShapeError("affine: W is " + dim_text(W.rows) + "x" + dim_text(W.cols) +
                         " but x has length " + dim_text(nodes_[x].len));
    if (W.rows != nodes_[b].len)
        throw ShapeError("affine: bias length " + dim_text(nodes_[b].len) +
                         " does not match W rows " + dim_text(W.rows));
    NodeId id = push(OpKind::kAffine, W.rows, w, x, b);
    const double* wp = data(w);
    const double* xp = data(x);
    const double* bp = data(b);
    double* out = data(id);
    const std::uint32_t rows = W.rows, cols = W.cols;
    for (std::uint32_t r = 0; r < rows; ++r) {
        const double* row = wp + static_cast<std::size_t>(r) * cols;
        double acc = bp[r];
        for (std::uint32_t c = 0; c < cols; ++c) acc += row[c] * xp[c];
        out[r] = acc;
    }
    return id;
}

NodeId Tape::matvec(NodeId w, NodeId x) {
    const Node& W = nodes_[w];
    if (W.cols != nodes_[x].len)
        throw ShapeError("matvec: W is " + dim_text(W.rows) + "x" + dim_text(W.cols) +
                         " but x has length " + dim_text(nodes_[x].len));
    NodeId id = push(OpKind::kMatvec, W.rows, w, x);
    const double* wp = data(w);
    const double* xp = data(x);
    double* out = data(id);
    const std::uint32_t rows = W.rows, cols = W.cols;
    for (std::uint32_t r = 0; r < rows; ++r) {
        const double* row = wp + static_cast<std::size_t>(r) * cols;
        double acc = 0.0;
        for (std::uint32_t c = 0; c < cols; ++c) acc += row[c] * xp[c];
        out[r] = acc;
    }
    return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
    if (nodes_[a].len != nodes_[b].len)
        throw ShapeError("add: lengths " + dim_text(nodes_[a].len) + " vs " +
                         dim_text(nodes_[b].len));
    NodeId id = push(OpKind::kAdd, nodes_[a].len, a, b);
    const double* ap = data(a);
    const double* bp = data(b);
    double* out = data(id);
    for (std::uint32_t i = 0; i < nodes_[id].len; ++i) out[i] = ap[i] + bp[i];
    return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
    if (nodes_[a].len != nodes_[b].len)
        throw ShapeError("sub: lengths " + dim_text(nodes_[a].len) + " vs " +
                         dim_text(nodes_[b].len));
    NodeId id = push(OpKind::kSub, nodes_[a].len, a, b);
    const double* ap = data(a);
    const double* bp = data(b);
    double* out = data(id);
    for (std::uint32_t i = 0; i < nodes_[id].len; ++i) out[i] = ap[i] - bp[i];
    return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
    if (nodes_[a].len != nodes_[b].len)
        throw ShapeError("mul: lengths " + dim_text(nodes_[a].len) + " vs " +
                         dim_text(nodes_[b].len));
    NodeId id = push(OpKind::kMul, nodes_[a].len, a, b);
    const double* ap = data(a);
    const double* bp = data(b);
    double* out = data(id);
    for (std::uint32_t i = 0; i < nodes_[id].len; ++i) out[i] = ap[i] * bp[i];
    return id;
}

NodeId Tape::concat(std::span<const NodeId> parts) {
    if (parts.empty()) throw ShapeError("concat: no parts");
    std::uint32_t total = 0;
    for (NodeId p : parts) total += nodes_[p].len;
    const std::uint32_t start = static_cast<std::uint32_t>(concat_parts_.size());
    concat_parts_.insert(concat_parts_.end(), parts.begin(), parts.end());
    NodeId id = push(OpKind::kConcat, total, 0, static_cast<NodeId>(parts.size()), 0, start);
    double* out = data(id);
    for (NodeId p : parts) {
        std::memcpy(out, data(p), nodes_[p].len * sizeof(double));
        out += nodes_[p].len;
    }
    return id;
}

NodeId Tape::slice(NodeId x, std::uint32_t offset, std::uint32_t len) {
    if (offset + len > nodes_[x].len)
        throw ShapeError("slice: [" + dim_text(offset) + ", " + dim_text(offset + len) +
                         ") outside length " + dim_text(nodes_[x].len));
    NodeId id = push(OpKind::kSlice, len, x, 0, 0, offset);
    std::memcpy(data(id), data(x) + offset, len * sizeof(double));
    return id;
}

NodeId Tape::tanh(NodeId x) {
    NodeId id = push(OpKind::kTanh, nodes_[x].len, x);
    const double* xp = data(x);
    double* out = data(id);
    for (std::uint32_t i = 0; i < nodes_[id].len; ++i) out[i] = std::tanh(xp[i]);
    return id;
}

NodeId Tape::sigmoid(NodeId x) {
    NodeId id = push(OpKind::kSigmoid, nodes_[x].len, x);
    const double* xp = data(x);
    double* out = data(id);
    for (std::uint32_t i = 0; i < nodes_[id].len; ++i) out[i] = 1.0 / (1.0 + std::exp(-xp[i]));
    return id;
}

NodeId Tape::exp(NodeId x) {
    NodeId id = push(OpKind::kExp, nodes_[x].len, x);
    const double* xp = data(x);
    double* out = data(id);
    for (std::uint32_t i = 0; i < nodes_[id].len; ++i) out[i] = std::exp(xp[i]);
    return id;
}

NodeId Tape::square(NodeId x) {
    NodeId id = push(OpKind::kSquare, nodes_[x].len, x);
    const double* xp = data(x);
    double* out = data(id);
    for (std::uint32_t i = 0; i < nodes_[id].len; ++i) out[i] = xp[i] * xp[i];
    return id;
}

NodeId Tape::scale_shift(NodeId x, double scale, double shift) {
    const std::uint32_t pair = static_cast<std::uint32_t>(scalar_pairs_.size());
    scalar_pairs_.push_back(scale);
    scalar_pairs_.push_back(shift);
    NodeId id = push(OpKind::kScaleShift, nodes_[x].len, x, 0, 0, pair);
    const double* xp = data(x);
    double* out = data(id);
    for (std::uint32_t i = 0; i < nodes_[id].len; ++i) out[i] = scale * xp[i] + shift;
    return id;
}

NodeId Tape::sum(NodeId x) {
    NodeId id = push(OpKind::kSum, 1, x);
    const double* xp = data(x);
    double acc = 0.0;
    for (std::uint32_t i = 0; i < nodes_[x].len; ++i) acc += xp[i];
    *data(id) = acc;
    return id;
}

std::span<const double> Tape::value(NodeId id) const { return {data(id), nodes_[id].len}; }

double Tape::scalar(NodeId id) const {
    if (nodes_[id].len != 1) throw ShapeError("scalar: node has length " + dim_text(nodes_[id].len));
    return *data(id);
}

std::uint32_t Tape::length(NodeId id) const { return nodes_[id].len; }

std::span<const double> Tape::grad(NodeId id) const {
    if (!has_grads_) throw ShapeError("grad: backward has not run");
    return {grads_.data() + nodes_[id].off, nodes_[id].len};
}

void Tape::backward(NodeId loss) {
    if (nodes_[loss].len != 1) throw ShapeError("backward: loss must be scalar");
    grads_.assign(values_.size(), 0.0);
    has_grads_ = true;
    grads_[nodes_[loss].off] = 1.0;

    for (std::uint32_t id = loss + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        const double* g = grads_.data() + node.off;
        switch (node.op) {
            case OpKind::kLeaf:
                break;
            case OpKind::kAffine:
            case OpKind::kMatvec: {
                const Node& W = nodes_[node.a];
                const double* wp = data(node.a);
                const double* xp = data(node.b);
                double* gw = grads_.data() + W.off;
                double* gx = grads_.data() + nodes_[node.b].off;
                const std::uint32_t rows = W.rows, cols = W.cols;
                for (std::uint32_t r = 0; r < rows; ++r) {
                    const double gr = g[r];
                    if (gr == 0.0) continue;
                    const double* wrow = wp + static_cast<std::size_t>(r) * cols;
                    double* gwrow = gw + static_cast<std::size_t>(r) * cols;
                    for (std::uint32_t c = 0; c < cols; ++c) gwrow[c] += gr * xp[c];
                    for (std::uint32_t c = 0; c < cols; ++c) gx[c] += gr * wrow[c];
                }
                if (node.op == OpKind::kAffine) {
                    double* gb = grads_.data() + nodes_[node.c].off;
                    for (std::uint32_t r = 0; r < rows; ++r) gb[r] += g[r];
                }
                break;
            }
            case OpKind::kAdd: {
                double* ga = grads_.data() + nodes_[node.a].off;
                double* gb = grads_.data() + nodes_[node.b].off;
                for (std::uint32_t i = 0; i < node.len; ++i) {
                    ga[i] += g[i];
                    gb[i] += g[i];
                }
                break;
            }
            case OpKind::kSub: {
                double* ga = grads_.data() + nodes_[node.a].off;
                double* gb = grads_.data() + nodes_[node.b].off;
                for (std::uint32_t i = 0; i < node.len; ++i) {
                    ga[i] += g[i];
                    gb[i] -= g[i];
                }
                break;
            }
            case OpKind::kMul: {
                const double* ap = data(node.a);
                const double* bp = data(node.b);
                double* ga = grads_.data() + nodes_[node.a].off;
                double* gb = grads_.data() + nodes_[node.b].off;
                for (std::uint32_t i = 0; i < node.len; ++i) {
                    ga[i] += g[i] * bp[i];
                    gb[i] += g[i] * ap[i];
                }
                break;
            }
            case OpKind::kConcat: {
                const double* gp = g;
                for (std::uint32_t k = 0; k < node.b; ++k) {
                    const NodeId part = concat_parts_[node.aux + k];
                    double* gpart = grads_.data() + nodes_[part].off;
                    for (std::uint32_t i = 0; i < nodes_[part].len; ++i) gpart[i] += gp[i];
                    gp += nodes_[part].len;
                }
                break;
            }
            case OpKind::kSlice: {
                double* gx = grads_.data() + nodes_[node.a].off + node.aux;
                for (std::uint32_t i = 0; i < node.len; ++i) gx[i] += g[i];
                break;
            }
            case OpKind::kTanh: {
                const double* y = data(id);
                double* gx = grads_.data() + nodes_[node.a].off;
                for (std::uint32_t i = 0; i < node.len; ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
                break;
            }
            case OpKind::kSigmoid: {
                const double* y = data(id);
                double* gx = grads_.data() + nodes_[node.a].off;
                for (std::uint32_t i = 0; i < node.len; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
                break;
            }
            case OpKind::kExp: {
                const double* y = data(id);
                double* gx = grads_.data() + nodes_[node.a].off;
                for (std::uint32_t i = 0; i < node.len; ++i) gx[i] += g[i] * y[i];
                break;
            }
            case OpKind::kSquare: {
                const double* xp = data(node.a);
                double* gx = grads_.data() + nodes_[node.a].off;
                for (std::uint32_t i = 0; i < node.len; ++i) gx[i] += 2.0 * g[i] * xp[i];
                break;
            }
            case OpKind::kScaleShift: {
                const double scale = scalar_pairs_[node.aux];
                double* gx = grads_.data() + nodes_[node.a].off;
                for (std::uint32_t i = 0; i < node.len; ++i) gx[i] += g[i] * scale;
                break;
            }
            case OpKind::kSum: {
                const double gs = g[0];
                double* gx = grads_.data() + nodes_[node.a].off;
                for (std::uint32_t i = 0; i < nodes_[node.a].len; ++i) gx[i] += gs;
                break;
            }
        }
    }
}

void Tape::accumulate_param_grads(std::span<double> flat) const {
    if (!has_grads_) throw ShapeError("accumulate_param_grads: backward has not run");
    for (const auto& [offset, id] : param_leaves_) {
        const Node& node = nodes_[id];
        const double* g = grads_.data() + node.off;
        double* out = flat.data() + offset;
        for (std::uint32_t i = 0; i < node.len; ++i) out[i] += g[i];
    }
}

}  // namespace chive
