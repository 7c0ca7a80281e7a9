#include "lgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lgnn/error.hpp"

namespace lgnn {

const Tensor& Var::value() const {
    if (tape == nullptr) throw UsageError("Var is not attached to a tape");
    return tape->value(*this);
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, nullptr, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, true, false, nullptr, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& param) {
    nodes_.push_back(Node{param.value, {}, true, false, &param, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var& in : inputs) {
        if (in.tape != this) throw UsageError("operation mixes values from different tapes");
        needs = needs || nodes_[in.id].requires_grad;
    }
    Node node{std::move(value), {}, needs, false, nullptr, {}};
    if (needs) node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (!n.has_grad) return Tensor(n.value.rows(), n.value.cols());
    return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
    if (!nodes_[id].requires_grad) return;
    axpy(grad_buffer(id), g);
}

void Tape::backward(Var loss, double seed) {
    if (loss.tape != this) throw UsageError("backward on a value from another tape");
    const Node& root = nodes_.at(loss.id);
    if (root.value.rows() != 1 || root.value.cols() != 1) {
        throw UsageError("backward requires a 1x1 loss, got " + root.value.shape_string());
    }
    if (!root.requires_grad) throw UsageError("backward on a value detached from every variable");

    for (Node& n : nodes_) {
        n.has_grad = false;
        n.grad = Tensor();
    }
    grad_buffer(loss.id)[0] = seed;

    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.requires_grad) continue;
        if (n.backward) n.backward(*this, n.value, n.grad);
        if (n.sink != nullptr) {
            if (n.sink->grad.empty() && !n.sink->value.empty()) n.sink->zero_grad();
            axpy(n.sink->grad, n.grad);
        }
    }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

template <typename F>
Tensor map(const Tensor& x, F f) {
    Tensor out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return out;
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = *a.tape;
    Tensor out = matmul(a.value(), b.value());
    const std::size_t ia = a.id, ib = b.id;
    return t.record(std::move(out), {a, b}, [ia, ib](Tape& tp, const Tensor&, const Tensor& g) {
        if (tp.needs_grad(ia)) tp.accumulate(ia, matmul_nt(g, tp.value(Var{&tp, ib})));
        if (tp.needs_grad(ib)) tp.accumulate(ib, matmul_tn(tp.value(Var{&tp, ia}), g));
    });
}

Var add(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    axpy(out, b.value());
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& tp, const Tensor&, const Tensor& g) {
        tp.accumulate(ia, g);
        tp.accumulate(ib, g);
    });
}

Var sub(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    axpy(out, b.value(), -1.0);
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& tp, const Tensor&, const Tensor& g) {
        tp.accumulate(ia, g);
        if (tp.needs_grad(ib)) axpy(tp.grad_buffer(ib), g, -1.0);
    });
}

Var add_row(Var x, Var b) {
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    if (bv.rows() != 1 || bv.cols() != xv.cols()) {
        throw ShapeError("add_row shape mismatch: " + xv.shape_string() + " + " + bv.shape_string());
    }
    Tensor out = xv;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv[j];
    }
    const std::size_t ix = x.id, ib = b.id;
    return x.tape->record(std::move(out), {x, b}, [ix, ib](Tape& tp, const Tensor&, const Tensor& g) {
        tp.accumulate(ix, g);
        if (tp.needs_grad(ib)) {
            Tensor& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
        }
    });
}

Var hadamard(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "hadamard");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out(av.rows(), av.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& tp, const Tensor&, const Tensor& g) {
        const Tensor& av = tp.value(Var{&tp, ia});
        const Tensor& bv = tp.value(Var{&tp, ib});
        if (tp.needs_grad(ia)) {
            Tensor& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (tp.needs_grad(ib)) {
            Tensor& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Var x, double s) {
    Tensor out = map(x.value(), [s](double v) { return v * s; });
    const std::size_t ix = x.id;
    return x.tape->record(std::move(out), {x}, [ix, s](Tape& tp, const Tensor&, const Tensor& g) {
        axpy(tp.grad_buffer(ix), g, s);
    });
}

Var relu(Var x) {
    Tensor out = relu(x.value());
    const std::size_t ix = x.id;
    return x.tape->record(std::move(out), {x}, [ix](Tape& tp, const Tensor& y, const Tensor& g) {
        Tensor& gx = tp.grad_buffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (y[i] > 0.0) gx[i] += g[i];
    });
}

Var leaky_relu(Var x, double slope) {
    Tensor out = map(x.value(), [slope](double v) { return v > 0.0 ? v : slope * v; });
    const std::size_t ix = x.id;
    return x.tape->record(std::move(out), {x}, [ix, slope](Tape& tp, const Tensor&, const Tensor& g) {
        const Tensor& xv = tp.value(Var{&tp, ix});
        Tensor& gx = tp.grad_buffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : slope * g[i];
    });
}

Var sigmoid(Var x) {
    Tensor out = sigmoid(x.value());
    const std::size_t ix = x.id;
    return x.tape->record(std::move(out), {x}, [ix](Tape& tp, const Tensor& y, const Tensor& g) {
        Tensor& gx = tp.grad_buffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var dropout(Var x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout probability must lie in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Tensor& xv = x.value();
    Tensor mask(xv.rows(), xv.cols());
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = u(rng) >= p ? keep_scale : 0.0;
    Tensor out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
    const std::size_t ix = x.id;
    return x.tape->record(std::move(out), {x},
                          [ix, mask = std::move(mask)](Tape& tp, const Tensor&, const Tensor& g) {
                              Tensor& gx = tp.grad_buffer(ix);
                              for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                          });
}

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    const std::size_t ix = x.id;
    return x.tape->record(Tensor(1, 1, s), {x}, [ix](Tape& tp, const Tensor&, const Tensor& g) {
        Tensor& gx = tp.grad_buffer(ix);
        const double gv = g[0];
        for (double& v : gx.data()) v += gv;
    });
}

Var sum_rows(Var x) {
    const Tensor& xv = x.value();
    Tensor out(1, xv.cols());
    for (std::size_t i = 0; i < xv.rows(); ++i)
        for (std::size_t j = 0; j < xv.cols(); ++j) out[j] += xv(i, j);
    const std::size_t ix = x.id;
    return x.tape->record(std::move(out), {x}, [ix](Tape& tp, const Tensor&, const Tensor& g) {
        Tensor& gx = tp.grad_buffer(ix);
        for (std::size_t i = 0; i < gx.rows(); ++i)
            for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += g[j];
    });
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
    const Tensor& xv = x.value();
    Tensor out(index.size(), xv.cols());
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= xv.rows()) throw ShapeError("gather_rows index out of range for " + xv.shape_string());
        std::copy_n(xv.row(index[k]).data(), xv.cols(), out.row(k).data());
    }
    const std::size_t ix = x.id;
    return x.tape->record(std::move(out), {x},
                          [ix, idx = std::vector<std::size_t>(index.begin(), index.end())](
                              Tape& tp, const Tensor&, const Tensor& g) {
                              Tensor& gx = tp.grad_buffer(ix);
                              for (std::size_t k = 0; k < idx.size(); ++k) {
                                  auto dst = gx.row(idx[k]);
                                  auto src = g.row(k);
                                  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                              }
                          });
}

Var scatter_add_rows(Var x, std::span<const std::size_t> index, std::size_t n) {
    const Tensor& xv = x.value();
    if (index.size() != xv.rows()) throw ShapeError("scatter_add_rows index length does not match " + xv.shape_string());
    Tensor out(n, xv.cols());
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= n) throw ShapeError("scatter_add_rows index out of range");
        auto dst = out.row(index[k]);
        auto src = xv.row(k);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    const std::size_t ix = x.id;
    return x.tape->record(std::move(out), {x},
                          [ix, idx = std::vector<std::size_t>(index.begin(), index.end())](
                              Tape& tp, const Tensor&, const Tensor& g) {
                              Tensor& gx = tp.grad_buffer(ix);
                              for (std::size_t k = 0; k < idx.size(); ++k) {
                                  auto dst = gx.row(k);
                                  auto src = g.row(idx[k]);
                                  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                              }
                          });
}

Var scale_rows(Var x, Var s) {
    const Tensor& xv = x.value();
    const Tensor& sv = s.value();
    if (sv.rows() != xv.rows() || sv.cols() != 1) {
        throw ShapeError("scale_rows shape mismatch: " + xv.shape_string() + " by " + sv.shape_string());
    }
    Tensor out = xv;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (double& v : out.row(i)) v *= sv[i];
    const std::size_t ix = x.id, is = s.id;
    return x.tape->record(std::move(out), {x, s}, [ix, is](Tape& tp, const Tensor&, const Tensor& g) {
        const Tensor& xv = tp.value(Var{&tp, ix});
        const Tensor& sv = tp.value(Var{&tp, is});
        if (tp.needs_grad(ix)) {
            Tensor& gx = tp.grad_buffer(ix);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += g(i, j) * sv[i];
        }
        if (tp.needs_grad(is)) {
            Tensor& gs = tp.grad_buffer(is);
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) acc += g(i, j) * xv(i, j);
                gs[i] += acc;
            }
        }
    });
}

Var concat_cols(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rows() != bv.rows()) {
        throw ShapeError("concat_cols row mismatch: " + av.shape_string() + " | " + bv.shape_string());
    }
    const std::size_t ca = av.cols(), cb = bv.cols();
    Tensor out(av.rows(), ca + cb);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        std::copy_n(av.row(i).data(), ca, out.row(i).data());
        std::copy_n(bv.row(i).data(), cb, out.row(i).data() + ca);
    }
    const std::size_t ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), {a, b}, [ia, ib, ca, cb](Tape& tp, const Tensor&, const Tensor& g) {
        if (tp.needs_grad(ia)) {
            Tensor& ga = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
        }
        if (tp.needs_grad(ib)) {
            Tensor& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < cb; ++j) gb(i, j) += g(i, ca + j);
        }
    });
}

Var segment_softmax(Var e, std::span<const std::size_t> segment, std::size_t n) {
    const Tensor& ev = e.value();
    if (ev.cols() != 1 || ev.rows() != segment.size()) {
        throw ShapeError("segment_softmax expects a column matching the segment list, got " + ev.shape_string());
    }
    std::vector<double> seg_max(n, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < segment.size(); ++k) {
        if (segment[k] >= n) throw ShapeError("segment_softmax segment out of range");
        seg_max[segment[k]] = std::max(seg_max[segment[k]], ev[k]);
    }
    Tensor out(ev.rows(), 1);
    std::vector<double> seg_sum(n, 0.0);
    for (std::size_t k = 0; k < segment.size(); ++k) {
        out[k] = std::exp(ev[k] - seg_max[segment[k]]);
        seg_sum[segment[k]] += out[k];
    }
    for (std::size_t k = 0; k < segment.size(); ++k) out[k] /= seg_sum[segment[k]];
    const std::size_t ie = e.id;
    return e.tape->record(std::move(out), {e},
                          [ie, n, seg = std::vector<std::size_t>(segment.begin(), segment.end())](
                              Tape& tp, const Tensor& y, const Tensor& g) {
                              std::vector<double> dot(n, 0.0);
                              for (std::size_t k = 0; k < seg.size(); ++k) dot[seg[k]] += g[k] * y[k];
                              Tensor& ge = tp.grad_buffer(ie);
                              for (std::size_t k = 0; k < seg.size(); ++k) ge[k] += y[k] * (g[k] - dot[seg[k]]);
                          });
}

Var l2_norm(Var x, double eps) {
    double ss = 0.0;
    for (double v : x.value().data()) ss += v * v;
    const double norm = std::sqrt(ss);
    const std::size_t ix = x.id;
    return x.tape->record(Tensor(1, 1, std::max(norm, eps)), {x}, [ix, norm, eps](Tape& tp, const Tensor&, const Tensor& g) {
        if (norm <= eps) return;
        const Tensor& xv = tp.value(Var{&tp, ix});
        Tensor& gx = tp.grad_buffer(ix);
        const double c = g[0] / norm;
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += c * xv[i];
    });
}

Var div_scalar(Var x, Var s) {
    const Tensor& sv = s.value();
    if (sv.rows() != 1 || sv.cols() != 1) throw ShapeError("div_scalar divisor must be 1x1, got " + sv.shape_string());
    const double d = sv[0];
    Tensor out = map(x.value(), [d](double v) { return v / d; });
    const std::size_t ix = x.id, is = s.id;
    return x.tape->record(std::move(out), {x, s}, [ix, is, d](Tape& tp, const Tensor&, const Tensor& g) {
        if (tp.needs_grad(ix)) axpy(tp.grad_buffer(ix), g, 1.0 / d);
        if (tp.needs_grad(is)) {
            const Tensor& xv = tp.value(Var{&tp, ix});
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
            tp.grad_buffer(is)[0] -= acc / (d * d);
        }
    });
}

Var bce_loss(Var pred, const Tensor& target) {
    const Tensor& pv = pred.value();
    const double loss = bce_loss(pv, target);
    const std::size_t ip = pred.id;
    return pred.tape->record(Tensor(1, 1, loss), {pred}, [ip, target](Tape& tp, const Tensor&, const Tensor& g) {
        const Tensor& pv = tp.value(Var{&tp, ip});
        Tensor& gp = tp.grad_buffer(ip);
        const double inv_n = 1.0 / static_cast<double>(pv.size());
        for (std::size_t i = 0; i < pv.size(); ++i) {
            const double p = std::clamp(pv[i], kBceClamp, 1.0 - kBceClamp);
            const double y = target[i];
            gp[i] += g[0] * inv_n * (-y / p + (1.0 - y) / (1.0 - p));
        }
    });
}

Var bce_with_logits(Var logit, const Tensor& target) {
    const Tensor& zv = logit.value();
    require_same_shape(zv, target, "bce_with_logits");
    if (zv.empty()) throw ShapeError("bce_with_logits on empty tensors");
    // logit of 1 - kBceClamp; beyond it the clamped loss is flat
    static const double bound = std::log1p(-kBceClamp) - std::log(kBceClamp);
    const double inv_n = 1.0 / static_cast<double>(zv.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < zv.size(); ++i) {
        const double z = std::clamp(zv[i], -bound, bound);
        const double y = target[i];
        acc += std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
    }
    const std::size_t iz = logit.id;
    return logit.tape->record(Tensor(1, 1, acc * inv_n), {logit},
                              [iz, target, inv_n](Tape& tp, const Tensor&, const Tensor& g) {
                                  const Tensor& zv = tp.value(Var{&tp, iz});
                                  Tensor& gz = tp.grad_buffer(iz);
                                  for (std::size_t i = 0; i < zv.size(); ++i) {
                                      if (std::abs(zv[i]) > bound) continue;
                                      gz[i] += g[0] * inv_n * (sigmoid_scalar(zv[i]) - target[i]);
                                  }
                              });
}

Tensor sigmoid(const Tensor& x) { return map(x, sigmoid_scalar); }

Tensor relu(const Tensor& x) {
    return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout probability must lie in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    return map(x, [&](double v) { return u(rng) >= p ? v * keep_scale : 0.0; });
}

double bce_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "bce_loss");
    if (pred.empty()) throw ShapeError("bce_loss on empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
        const double y = target[i];
        acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return -acc / static_cast<double>(pred.size());
}

GradientCheck check_gradients(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h) {
    auto evaluate = [&](const Tensor& at) {
        Tape tape;
        const Var out = f(tape, tape.variable(at));
        if (out.rows() != 1 || out.cols() != 1) {
            throw UsageError("check_gradients requires a scalar function, got " + out.value().shape_string());
        }
        return out.value()[0];
    };

    GradientCheck result;
    {
        Tape tape;
        const Var input = tape.variable(x);
        const Var out = f(tape, input);
        if (out.rows() != 1 || out.cols() != 1) {
            throw UsageError("check_gradients requires a scalar function, got " + out.value().shape_string());
        }
        const double first = out.value()[0];
        if (evaluate(x) != first) throw UsageError("check_gradients: function is not deterministic");
        if (tape.requires_grad(out)) {
            tape.backward(out);
            result.analytic = tape.grad(input);
        } else {
            result.analytic = Tensor(x.rows(), x.cols());
        }
    }

    result.numeric = Tensor(x.rows(), x.cols());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = evaluate(probe);
        probe[i] = x[i] - h;
        const double down = evaluate(probe);
        probe[i] = x[i];
        result.numeric[i] = (up - down) / (2.0 * h);
        const double err = std::abs(result.analytic[i] - result.numeric[i]) /
                           std::max(1.0, std::abs(result.numeric[i]));
        result.max_relative_error = std::max(result.max_relative_error, err);
    }
    return result;
}

}  // namespace lgnn
