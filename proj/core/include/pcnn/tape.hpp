#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace pcnn::ad {

enum class Op : std::uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,      // elementwise
    Smul,     // by compile-time-known scalar (not differentiated through)
    MatVec,   // (r x c) * (c) -> (r)
    MatVecT,  // transpose(r x c) * (r) -> (c)
    Outer,    // (r) x (c) -> (r x c)
    Concat,
    Slice,
    Pad,       // place a vector into a longer zero vector
    Tanh,
    Sigmoid,
    Exp,
    Relu,      // max{x, 0}
    NegRelu,   // min{x, 0}
    StepPos,   // 1 if x > 0 else 0 (zero derivative)
    StepNeg,   // 1 if x < 0 else 0 (zero derivative)
    Square,
    Sum,
    Mean,
    Broadcast,  // scalar -> n copies
};

class Tape;

/// Handle to a tape node. Cheap to copy; only valid for its owning tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    std::span<const double> value() const;
    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t size() const;
    double scalar() const;  // requires size() == 1
};

/// Append-only record of primitive operations with eagerly computed values.
/// Backward passes emit their vector-Jacobian products as ordinary tape
/// operations, so a scalar built from gradients (the PiNN penalty) can be
/// differentiated again by a second backward pass over the extended tape.
/// Single-owner during recording; distinct tapes may run concurrently.
class Tape {
  public:
    struct Node {
        Op op;
        int in0 = -1, in1 = -1;
        int aux0 = 0, aux1 = 0;  // slice/pad offsets, concat pool range
        double auxd = 0.0;       // Smul factor
        std::uint32_t rows = 0, cols = 0;
        std::vector<double> val;
    };

    Var leaf(std::vector<double> value, std::size_t rows, std::size_t cols);
    Var leaf(std::vector<double> value);                   // column vector
    Var leaf_scalar(double value);
    Var constant(std::vector<double> value, std::size_t rows, std::size_t cols);
    Var constant(std::vector<double> value);
    Var constant_scalar(double value);

    std::size_t size() const { return nodes_.size(); }
    const Node& node(int id) const { return nodes_[id]; }
    void clear();

    /// Reverse-mode pass from a scalar output. Returns the adjoint node of
    /// every node reachable backwards from `output`; absent entries mean a
    /// structurally zero gradient. Deterministic: adjoints accumulate in
    /// recording order.
    std::unordered_map<int, Var> backward(Var output);

    /// Gradient of a scalar output w.r.t. one leaf; zeros if unreachable.
    std::vector<double> gradient(Var output, Var leaf);

    /// Low-level recording surface used by the free-function primitives.
    int push(Node n);
    Var wrap(int id) { return Var{this, id}; }
    std::vector<int>& pool() { return pool_; }

  private:
    std::vector<Node> nodes_;
    std::vector<int> pool_;  // concat input ids
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var smul(Var a, double c);
Var matvec(Var w, Var x);
Var matvec_t(Var w, Var x);
Var outer(Var a, Var b);
Var concat(std::span<const Var> parts);
Var slice(Var a, std::size_t offset, std::size_t len);
Var pad(Var a, std::size_t offset, std::size_t total);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var relu(Var a);
Var neg_relu(Var a);
Var step_pos(Var a);
Var step_neg(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var broadcast(Var a, std::size_t n);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace pcnn::ad
