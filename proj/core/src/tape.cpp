#include "pcnn/tape.hpp"

#include <cmath>

#include "pcnn/errors.hpp"

namespace pcnn::ad {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw NumericError(msg);
}

}  // namespace

std::span<const double> Var::value() const { return tape->node(id).val; }
std::size_t Var::rows() const { return tape->node(id).rows; }
std::size_t Var::cols() const { return tape->node(id).cols; }
std::size_t Var::size() const { return tape->node(id).val.size(); }

double Var::scalar() const {
    require(size() == 1, "tape: scalar() on a non-scalar node");
    return value()[0];
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::clear() {
    nodes_.clear();
    pool_.clear();
}

Var Tape::leaf(std::vector<double> value, std::size_t rows, std::size_t cols) {
    require(value.size() == rows * cols, "tape: leaf shape mismatch");
    Node n;
    n.op = Op::Leaf;
    n.rows = static_cast<std::uint32_t>(rows);
    n.cols = static_cast<std::uint32_t>(cols);
    n.val = std::move(value);
    return wrap(push(std::move(n)));
}

Var Tape::leaf(std::vector<double> value) {
    std::size_t n = value.size();
    return leaf(std::move(value), n, 1);
}

Var Tape::leaf_scalar(double value) { return leaf({value}, 1, 1); }

Var Tape::constant(std::vector<double> value, std::size_t rows, std::size_t cols) {
    Var v = leaf(std::move(value), rows, cols);
    nodes_[v.id].op = Op::Const;
    return v;
}

Var Tape::constant(std::vector<double> value) {
    std::size_t n = value.size();
    return constant(std::move(value), n, 1);
}

Var Tape::constant_scalar(double value) { return constant({value}, 1, 1); }

namespace {

Tape::Node unary_node(Op op, Var a) {
    Tape::Node n;
    n.op = op;
    n.in0 = a.id;
    n.rows = static_cast<std::uint32_t>(a.rows());
    n.cols = static_cast<std::uint32_t>(a.cols());
    n.val.resize(a.size());
    return n;
}

void same_shape(Var a, Var b) {
    require(a.tape == b.tape, "tape: operands recorded on different tapes");
    require(a.rows() == b.rows() && a.cols() == b.cols(), "tape: shape mismatch");
}

}  // namespace

Var add(Var a, Var b) {
    same_shape(a, b);
    Tape::Node n = unary_node(Op::Add, a);
    n.in1 = b.id;
    auto va = a.value(), vb = b.value();
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = va[i] + vb[i];
    return a.tape->wrap(a.tape->push(std::move(n)));
}

Var sub(Var a, Var b) {
    same_shape(a, b);
    Tape::Node n = unary_node(Op::Sub, a);
    n.in1 = b.id;
    auto va = a.value(), vb = b.value();
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = va[i] - vb[i];
    return a.tape->wrap(a.tape->push(std::move(n)));
}

Var mul(Var a, Var b) {
    same_shape(a, b);
    Tape::Node n = unary_node(Op::Mul, a);
    n.in1 = b.id;
    auto va = a.value(), vb = b.value();
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = va[i] * vb[i];
    return a.tape->wrap(a.tape->push(std::move(n)));
}

Var smul(Var a, double c) {
    Tape::Node n = unary_node(Op::Smul, a);
    n.auxd = c;
    auto va = a.value();
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = va[i] * c;
    return a.tape->wrap(a.tape->push(std::move(n)));
}

Var matvec(Var w, Var x) {
    require(w.tape == x.tape, "tape: operands recorded on different tapes");
    require(x.cols() == 1 && w.cols() == x.rows(), "tape: matvec shape mismatch");
    Tape::Node n;
    n.op = Op::MatVec;
    n.in0 = w.id;
    n.in1 = x.id;
    n.rows = static_cast<std::uint32_t>(w.rows());
    n.cols = 1;
    n.val.assign(w.rows(), 0.0);
    auto vw = w.value();
    auto vx = x.value();
    std::size_t r = w.rows(), c = w.cols();
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        const double* row = vw.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) acc += row[j] * vx[j];
        n.val[i] = acc;
    }
    return w.tape->wrap(w.tape->push(std::move(n)));
}

Var matvec_t(Var w, Var x) {
    require(w.tape == x.tape, "tape: operands recorded on different tapes");
    require(x.cols() == 1 && w.rows() == x.rows(), "tape: matvec_t shape mismatch");
    Tape::Node n;
    n.op = Op::MatVecT;
    n.in0 = w.id;
    n.in1 = x.id;
    n.rows = static_cast<std::uint32_t>(w.cols());
    n.cols = 1;
    n.val.assign(w.cols(), 0.0);
    auto vw = w.value();
    auto vx = x.value();
    std::size_t r = w.rows(), c = w.cols();
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = vw.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) n.val[j] += row[j] * vx[i];
    }
    return w.tape->wrap(w.tape->push(std::move(n)));
}

Var outer(Var a, Var b) {
    require(a.tape == b.tape, "tape: operands recorded on different tapes");
    require(a.cols() == 1 && b.cols() == 1, "tape: outer expects vectors");
    Tape::Node n;
    n.op = Op::Outer;
    n.in0 = a.id;
    n.in1 = b.id;
    n.rows = static_cast<std::uint32_t>(a.rows());
    n.cols = static_cast<std::uint32_t>(b.rows());
    n.val.resize(a.rows() * b.rows());
    auto va = a.value(), vb = b.value();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) n.val[i * b.rows() + j] = va[i] * vb[j];
    return a.tape->wrap(a.tape->push(std::move(n)));
}

Var concat(std::span<const Var> parts) {
    require(!parts.empty(), "tape: concat of nothing");
    Tape* tape = parts[0].tape;
    std::size_t total = 0;
    for (const Var& p : parts) {
        require(p.tape == tape, "tape: operands recorded on different tapes");
        require(p.cols() == 1, "tape: concat expects vectors");
        total += p.size();
    }
    Tape::Node n;
    n.op = Op::Concat;
    n.rows = static_cast<std::uint32_t>(total);
    n.cols = 1;
    n.val.reserve(total);
    for (const Var& p : parts) {
        auto v = p.value();
        n.val.insert(n.val.end(), v.begin(), v.end());
    }
    // input ids live in the pool; aux0/aux1 delimit the range
    n.aux0 = static_cast<int>(tape->pool().size());
    for (const Var& p : parts) tape->pool().push_back(p.id);
    n.aux1 = static_cast<int>(tape->pool().size());
    return tape->wrap(tape->push(std::move(n)));
}

Var slice(Var a, std::size_t offset, std::size_t len) {
    require(a.cols() == 1, "tape: slice expects a vector");
    require(offset + len <= a.size(), "tape: slice out of range");
    Tape::Node n;
    n.op = Op::Slice;
    n.in0 = a.id;
    n.aux0 = static_cast<int>(offset);
    n.aux1 = static_cast<int>(len);
    n.rows = static_cast<std::uint32_t>(len);
    n.cols = 1;
    auto va = a.value();
    n.val.assign(va.begin() + offset, va.begin() + offset + len);
    return a.tape->wrap(a.tape->push(std::move(n)));
}

Var pad(Var a, std::size_t offset, std::size_t total) {
    require(a.cols() == 1, "tape: pad expects a vector");
    require(offset + a.size() <= total, "tape: pad out of range");
    Tape::Node n;
    n.op = Op::Pad;
    n.in0 = a.id;
    n.aux0 = static_cast<int>(offset);
    n.aux1 = static_cast<int>(total);
    n.rows = static_cast<std::uint32_t>(total);
    n.cols = 1;
    n.val.assign(total, 0.0);
    auto va = a.value();
    for (std::size_t i = 0; i < va.size(); ++i) n.val[offset + i] = va[i];
    return a.tape->wrap(a.tape->push(std::move(n)));
}

namespace {

template <typename F>
Var map_unary(Op op, Var a, F f) {
    Tape::Node n = unary_node(op, a);
    auto va = a.value();
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = f(va[i]);
    return a.tape->wrap(a.tape->push(std::move(n)));
}

}  // namespace

Var tanh(Var a) {
    return map_unary(Op::Tanh, a, [](double x) { return std::tanh(x); });
}
Var sigmoid(Var a) {
    return map_unary(Op::Sigmoid, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}
Var exp(Var a) {
    return map_unary(Op::Exp, a, [](double x) { return std::exp(x); });
}
Var relu(Var a) {
    return map_unary(Op::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; });
}
Var neg_relu(Var a) {
    return map_unary(Op::NegRelu, a, [](double x) { return x < 0.0 ? x : 0.0; });
}
Var step_pos(Var a) {
    return map_unary(Op::StepPos, a, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}
Var step_neg(Var a) {
    return map_unary(Op::StepNeg, a, [](double x) { return x < 0.0 ? 1.0 : 0.0; });
}
Var square(Var a) {
    return map_unary(Op::Square, a, [](double x) { return x * x; });
}

Var sum(Var a) {
    Tape::Node n;
    n.op = Op::Sum;
    n.in0 = a.id;
    n.rows = 1;
    n.cols = 1;
    double acc = 0.0;
    for (double x : a.value()) acc += x;
    n.val = {acc};
    return a.tape->wrap(a.tape->push(std::move(n)));
}

Var mean(Var a) {
    Tape::Node n;
    n.op = Op::Mean;
    n.in0 = a.id;
    n.rows = 1;
    n.cols = 1;
    double acc = 0.0;
    for (double x : a.value()) acc += x;
    n.val = {acc / static_cast<double>(a.size())};
    return a.tape->wrap(a.tape->push(std::move(n)));
}

Var broadcast(Var a, std::size_t n_out) {
    require(a.size() == 1, "tape: broadcast expects a scalar");
    Tape::Node n;
    n.op = Op::Broadcast;
    n.in0 = a.id;
    n.rows = static_cast<std::uint32_t>(n_out);
    n.cols = 1;
    n.val.assign(n_out, a.value()[0]);
    return a.tape->wrap(a.tape->push(std::move(n)));
}

std::unordered_map<int, Var> Tape::backward(Var output) {
    require(output.tape == this, "tape: output from a different tape");
    require(output.size() == 1, "tape: backward seed must be scalar");

    const int frozen = static_cast<int>(nodes_.size());
    std::vector<int> adj(frozen, -1);
    adj[output.id] = constant_scalar(1.0).id;

    auto accumulate = [&](int target, Var g) {
        if (target < 0 || target >= frozen) return;
        if (nodes_[target].op == Op::Const) return;
        if (adj[target] < 0)
            adj[target] = g.id;
        else
            adj[target] = add(wrap(adj[target]), g).id;
    };

    for (int i = frozen - 1; i >= 0; --i) {
        if (adj[i] < 0) continue;
        // copy: the VJP primitives below append nodes and may reallocate nodes_
        const Node n = nodes_[i];
        Var g = wrap(adj[i]);
        Var a = wrap(n.in0), b = wrap(n.in1), o = wrap(i);
        switch (n.op) {
            case Op::Leaf:
            case Op::Const:
            case Op::StepPos:
            case Op::StepNeg:
                break;
            case Op::Add:
                accumulate(n.in0, g);
                accumulate(n.in1, g);
                break;
            case Op::Sub:
                accumulate(n.in0, g);
                accumulate(n.in1, smul(g, -1.0));
                break;
            case Op::Mul:
                accumulate(n.in0, mul(g, b));
                accumulate(n.in1, mul(g, a));
                break;
            case Op::Smul:
                accumulate(n.in0, smul(g, n.auxd));
                break;
            case Op::MatVec:
                accumulate(n.in0, outer(g, b));
                accumulate(n.in1, matvec_t(a, g));
                break;
            case Op::MatVecT:
                accumulate(n.in0, outer(b, g));
                accumulate(n.in1, matvec(a, g));
                break;
            case Op::Outer:
                accumulate(n.in0, matvec(g, b));
                accumulate(n.in1, matvec_t(g, a));
                break;
            case Op::Concat: {
                std::size_t off = 0;
                for (int k = n.aux0; k < n.aux1; ++k) {
                    int part = pool_[k];
                    std::size_t len = nodes_[part].val.size();
                    accumulate(part, slice(g, off, len));
                    off += len;
                }
                break;
            }
            case Op::Slice:
                accumulate(n.in0, pad(g, static_cast<std::size_t>(n.aux0), nodes_[n.in0].val.size()));
                break;
            case Op::Pad:
                accumulate(n.in0, slice(g, static_cast<std::size_t>(n.aux0), nodes_[n.in0].val.size()));
                break;
            case Op::Tanh: {
                Var ones = constant(std::vector<double>(n.val.size(), 1.0));
                accumulate(n.in0, mul(g, sub(ones, square(o))));
                break;
            }
            case Op::Sigmoid: {
                Var ones = constant(std::vector<double>(n.val.size(), 1.0));
                accumulate(n.in0, mul(g, mul(o, sub(ones, o))));
                break;
            }
            case Op::Exp:
                accumulate(n.in0, mul(g, o));
                break;
            case Op::Relu:
                accumulate(n.in0, mul(g, step_pos(a)));
                break;
            case Op::NegRelu:
                accumulate(n.in0, mul(g, step_neg(a)));
                break;
            case Op::Square:
                accumulate(n.in0, mul(g, smul(a, 2.0)));
                break;
            case Op::Sum: {
                Var bg = broadcast(g, nodes_[n.in0].val.size());
                // keep matrix-shaped adjoints matrix-shaped
                nodes_[bg.id].rows = nodes_[n.in0].rows;
                nodes_[bg.id].cols = nodes_[n.in0].cols;
                accumulate(n.in0, bg);
                break;
            }
            case Op::Mean: {
                Var bg =
                    broadcast(smul(g, 1.0 / static_cast<double>(nodes_[n.in0].val.size())),
                              nodes_[n.in0].val.size());
                nodes_[bg.id].rows = nodes_[n.in0].rows;
                nodes_[bg.id].cols = nodes_[n.in0].cols;
                accumulate(n.in0, bg);
                break;
            }
            case Op::Broadcast:
                accumulate(n.in0, sum(g));
                break;
        }
    }

    std::unordered_map<int, Var> grads;
    for (int i = 0; i < frozen; ++i)
        if (adj[i] >= 0) grads.emplace(i, wrap(adj[i]));
    return grads;
}

std::vector<double> Tape::gradient(Var output, Var leaf) {
    auto grads = backward(output);
    auto it = grads.find(leaf.id);
    if (it == grads.end()) return std::vector<double>(leaf.size(), 0.0);
    auto v = it->second.value();
    return std::vector<double>(v.begin(), v.end());
}

}  // namespace pcnn::ad
