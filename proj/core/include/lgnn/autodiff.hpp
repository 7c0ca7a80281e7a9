#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lgnn/random.hpp"
#include "lgnn/tensor.hpp"

namespace lgnn {

class Tape;

/// A learnable array plus its gradient accumulator. Tapes write adjoints into
/// `grad` during backward; the optimizer consumes and clears them.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

    bool defined() const noexcept { return !value.empty(); }
    void zero_grad() { grad = Tensor(value.rows(), value.cols()); }
};

/// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Define-by-run gradient tape. Nodes are appended in evaluation order, so the
/// node list is always topologically sorted. Single owner; not thread-safe.
class Tape {
public:
    using BackwardFn =
        std::function<void(Tape&, const Tensor& out_value, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Value that never receives a gradient.
    Var constant(Tensor value);
    /// Leaf whose adjoint is kept on the tape (see `grad`).
    Var variable(Tensor value);
    /// Leaf bound to a Parameter; backward adds its adjoint into `param.grad`.
    /// The parameter must outlive the backward call.
    Var parameter(Parameter& param);

    /// Records an op output. `fn` may be empty when no input needs a gradient.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    /// Adjoint of `v` after backward (zeros when `v` was unreachable).
    Tensor grad(Var v) const;

    /// Reverse sweep from a 1x1 loss. `seed` scales the initial adjoint.
    /// Tape-held adjoints are reset on every call; parameter sinks accumulate.
    void backward(Var loss, double seed = 1.0);

    /// Adds `g` into the adjoint buffer of node `id` (allocating it if needed).
    void accumulate(std::size_t id, const Tensor& g);
    Tensor& grad_buffer(std::size_t id);
    bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        Parameter* sink = nullptr;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

// Differentiable operations. All inputs must live on the same tape.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// x (n×d) plus row vector b (1×d) broadcast over rows.
Var add_row(Var x, Var b);
Var hadamard(Var a, Var b);
Var scale(Var x, double s);
Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
/// Inverted dropout; identity when `training` is false or p == 0.
Var dropout(Var x, double p, bool training, Rng& rng);
/// Sum of all entries, 1×1.
Var sum(Var x);
/// Column sums, 1×d.
Var sum_rows(Var x);
Var gather_rows(Var x, std::span<const std::size_t> index);
/// out[index[k]] += x[k]; output has `n` rows.
Var scatter_add_rows(Var x, std::span<const std::size_t> index, std::size_t n);
/// Row i of x multiplied by s(i,0); s is n×1.
Var scale_rows(Var x, Var s);
Var concat_cols(Var a, Var b);
/// Softmax of a P×1 column within groups given by `segment` (values < n).
Var segment_softmax(Var e, std::span<const std::size_t> segment, std::size_t n);
/// Euclidean norm of all entries, floored at `eps`, 1×1.
Var l2_norm(Var x, double eps);
/// x divided by the 1×1 value s.
Var div_scalar(Var x, Var s);
/// Mean binary cross-entropy of probabilities against {0,1} targets, 1×1.
Var bce_loss(Var pred, const Tensor& target);
/// Same loss as bce_loss(sigmoid(logit)) including the clamp, computed without
/// forming 1 - p, so it stays accurate when the sigmoid saturates.
Var bce_with_logits(Var logit, const Tensor& target);

// Plain-value counterparts used outside of tapes.
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);
double bce_loss(const Tensor& pred, const Tensor& target);

inline constexpr double kBceClamp = 1e-12;

struct GradientCheck {
    double max_relative_error = 0.0;
    Tensor analytic;
    Tensor numeric;
};

/// Compares the tape gradient of `f` at `x` with central differences of step
/// `h`. Error per entry is |analytic - numeric| / max(1, |numeric|).
/// Throws UsageError when two evaluations of `f` at `x` disagree.
GradientCheck check_gradients(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                              double h = 1e-5);

}  // namespace lgnn
