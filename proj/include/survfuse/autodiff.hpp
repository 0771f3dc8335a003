#ifndef SURVFUSE_AUTODIFF_HPP
#define SURVFUSE_AUTODIFF_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "survfuse/errors.hpp"
#include "survfuse/rng.hpp"
#include "survfuse/tensor.hpp"

namespace survfuse::ad {

using survfuse::Tensor;

// Named parameter tensors with matching gradient slots and Adam state.
class ParamStore {
public:
    struct Entry {
        Tensor value;
        Tensor grad;
        Tensor m; // first-moment accumulator
        Tensor v; // second-moment accumulator
    };

    Tensor& add(const std::string& name, Tensor init) {
        auto [it, inserted] = params_.emplace(name, Entry{});
        if (!inserted)
            throw ContractError("parameter already registered: " + name);
        Entry& e = it->second;
        e.grad = Tensor::zeros(init.shape);
        e.m = Tensor::zeros(init.shape);
        e.v = Tensor::zeros(init.shape);
        e.value = std::move(init);
        return e.value;
    }

    Entry& entry(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end())
            throw ContractError("unknown parameter: " + name);
        return it->second;
    }
    const Entry& entry(const std::string& name) const {
        return const_cast<ParamStore*>(this)->entry(name);
    }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grad() {
        for (auto& [k, e] : params_)
            std::fill(e.grad.values.begin(), e.grad.values.end(), 0.0);
    }

    std::map<std::string, Entry>& all() { return params_; }
    const std::map<std::string, Entry>& all() const { return params_; }

    std::int64_t step_count = 0;

private:
    std::map<std::string, Entry> params_;
};

// Adam update with bias correction; zeroes gradients afterwards.
inline void adam_step(ParamStore& store, double lr = 1e-3, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    if (lr <= 0.0)
        throw ContractError("adam_step: learning rate must be positive");
    store.step_count += 1;
    const double t = static_cast<double>(store.step_count);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (auto& [name, e] : store.all()) {
        for (std::size_t i = 0; i < e.value.numel(); ++i) {
            const double g = e.grad.values[i];
            e.m.values[i] = beta1 * e.m.values[i] + (1.0 - beta1) * g;
            e.v.values[i] = beta2 * e.v.values[i] + (1.0 - beta2) * g * g;
            const double mhat = e.m.values[i] / bc1;
            const double vhat = e.v.values[i] / bc2;
            e.value.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        std::fill(e.grad.values.begin(), e.grad.values.end(), 0.0);
    }
}

// Reverse-mode tape. Nodes are recorded in evaluation order, which is a
// topological order by construction; backward visits each node once.
class Tape {
public:
    using NodeId = int;

    struct Node {
        Tensor value;
        Tensor grad; // allocated lazily during backward
        std::function<void(Tape&, const Tensor& out_grad)> back; // empty for leaves
    };

    bool tracking = true;

    NodeId push(Tensor value, std::function<void(Tape&, const Tensor&)> back = {}) {
        Node n;
        n.value = std::move(value);
        if (tracking) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    const Tensor& value(NodeId id) const { return nodes_[id].value; }

    Tensor& grad(NodeId id) {
        Node& n = nodes_[id];
        if (n.grad.values.empty()) n.grad = Tensor::zeros(n.value.shape);
        return n.grad;
    }

    void accumulate(NodeId id, const Tensor& g) {
        Tensor& slot = grad(id);
        for (std::size_t i = 0; i < slot.numel(); ++i) slot.values[i] += g.values[i];
    }

    std::size_t size() const { return nodes_.size(); }

    // Backpropagate from a scalar loss node through the whole tape.
    void backward(NodeId loss) {
        if (nodes_.empty())
            throw ContractError("backward: empty tape");
        if (value(loss).numel() != 1)
            throw ContractError("backward: loss node must be scalar, got shape " +
                                value(loss).shape_str());
        grad(loss).values[0] = 1.0;
        for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.back || n.grad.values.empty()) continue;
            n.back(*this, n.grad);
        }
    }

private:
    std::vector<Node> nodes_;
};

// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    Tape::NodeId id = -1;

    const Tensor& val() const { return tape->value(id); }
    std::size_t rows() const { return val().rows(); }
    std::size_t cols() const { return val().cols(); }
};

inline Var constant(Tape& t, Tensor v) { return {&t, t.push(std::move(v))}; }

// Leaf whose backward pass accumulates into the parameter's gradient slot.
inline Var param(Tape& t, ParamStore& store, const std::string& name) {
    ParamStore::Entry* e = &store.entry(name);
    auto id = t.push(e->value, [e](Tape&, const Tensor& g) {
        for (std::size_t i = 0; i < g.numel(); ++i) e->grad.values[i] += g.values[i];
    });
    return {&t, id};
}

namespace detail {

inline Var unary(Var a, Tensor out,
                 std::function<void(const Tensor& g, Tensor& ga)> dfn) {
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid, dfn](Tape& tp, const Tensor& g) {
        Tensor ga = Tensor::zeros(tp.value(aid).shape);
        dfn(g, ga);
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

} // namespace detail

// ---- elementwise ----

inline Var add(Var a, Var b) {
    require_same_shape(a.val(), b.val(), "add");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] += b.val().values[i];
    Tape& t = *a.tape;
    auto aid = a.id, bid = b.id;
    auto id = t.push(std::move(out), [aid, bid](Tape& tp, const Tensor& g) {
        tp.accumulate(aid, g);
        tp.accumulate(bid, g);
    });
    return {&t, id};
}

inline Var sub(Var a, Var b) {
    require_same_shape(a.val(), b.val(), "sub");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] -= b.val().values[i];
    Tape& t = *a.tape;
    auto aid = a.id, bid = b.id;
    auto id = t.push(std::move(out), [aid, bid](Tape& tp, const Tensor& g) {
        tp.accumulate(aid, g);
        Tensor gb = g;
        for (auto& x : gb.values) x = -x;
        tp.accumulate(bid, gb);
    });
    return {&t, id};
}

inline Var mul(Var a, Var b) {
    require_same_shape(a.val(), b.val(), "mul");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] *= b.val().values[i];
    Tape& t = *a.tape;
    auto aid = a.id, bid = b.id;
    auto id = t.push(std::move(out), [aid, bid](Tape& tp, const Tensor& g) {
        const Tensor& av = tp.value(aid);
        const Tensor& bv = tp.value(bid);
        Tensor ga = g, gb = g;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga.values[i] *= bv.values[i];
            gb.values[i] *= av.values[i];
        }
        tp.accumulate(aid, ga);
        tp.accumulate(bid, gb);
    });
    return {&t, id};
}

inline Var scale(Var a, double c) {
    Tensor out = a.val();
    for (auto& x : out.values) x *= c;
    return detail::unary(a, std::move(out), [c](const Tensor& g, Tensor& ga) {
        for (std::size_t i = 0; i < g.numel(); ++i) ga.values[i] = g.values[i] * c;
    });
}

inline Var add_const(Var a, double c) {
    Tensor out = a.val();
    for (auto& x : out.values) x += c;
    return detail::unary(a, std::move(out), [](const Tensor& g, Tensor& ga) {
        ga = g;
    });
}

// Elementwise product with a fixed tensor (masking, one-hot selection).
inline Var mul_const(Var a, const Tensor& m) {
    require_same_shape(a.val(), m, "mul_const");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] *= m.values[i];
    Tensor mc = m;
    return detail::unary(a, std::move(out), [mc](const Tensor& g, Tensor& ga) {
        for (std::size_t i = 0; i < g.numel(); ++i) ga.values[i] = g.values[i] * mc.values[i];
    });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var relu(Var a) {
    Tensor out = a.val();
    for (auto& x : out.values) x = x > 0.0 ? x : 0.0;
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid](Tape& tp, const Tensor& g) {
        const Tensor& av = tp.value(aid);
        Tensor ga = g;
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (av.values[i] <= 0.0) ga.values[i] = 0.0;
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline double softplus_scalar(double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
}
inline double sigmoid_scalar(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline Var tanh_op(Var a) {
    Tensor out = a.val();
    for (auto& x : out.values) x = std::tanh(x);
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid, self = t.size()](Tape& tp, const Tensor& g) {
        const Tensor& y = tp.value(static_cast<Tape::NodeId>(self));
        Tensor ga = g;
        for (std::size_t i = 0; i < g.numel(); ++i)
            ga.values[i] *= 1.0 - y.values[i] * y.values[i];
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var softplus(Var a) {
    Tensor out = a.val();
    for (auto& x : out.values) x = softplus_scalar(x);
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid](Tape& tp, const Tensor& g) {
        const Tensor& av = tp.value(aid);
        Tensor ga = g;
        for (std::size_t i = 0; i < g.numel(); ++i)
            ga.values[i] *= sigmoid_scalar(av.values[i]);
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var sigmoid(Var a) {
    Tensor out = a.val();
    for (auto& x : out.values) x = sigmoid_scalar(x);
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid, self = t.size()](Tape& tp, const Tensor& g) {
        const Tensor& y = tp.value(static_cast<Tape::NodeId>(self));
        Tensor ga = g;
        for (std::size_t i = 0; i < g.numel(); ++i)
            ga.values[i] *= y.values[i] * (1.0 - y.values[i]);
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var exp_op(Var a) {
    Tensor out = a.val();
    for (auto& x : out.values) x = std::exp(x);
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid, self = t.size()](Tape& tp, const Tensor& g) {
        const Tensor& y = tp.value(static_cast<Tape::NodeId>(self));
        Tensor ga = g;
        for (std::size_t i = 0; i < g.numel(); ++i) ga.values[i] *= y.values[i];
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var log_op(Var a) {
    Tensor out = a.val();
    for (auto& x : out.values) x = std::log(x);
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid](Tape& tp, const Tensor& g) {
        const Tensor& av = tp.value(aid);
        Tensor ga = g;
        for (std::size_t i = 0; i < g.numel(); ++i) ga.values[i] /= av.values[i];
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var square(Var a) {
    Tensor out = a.val();
    for (auto& x : out.values) x *= x;
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid](Tape& tp, const Tensor& g) {
        const Tensor& av = tp.value(aid);
        Tensor ga = g;
        for (std::size_t i = 0; i < g.numel(); ++i) ga.values[i] *= 2.0 * av.values[i];
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

// Gradient passes through inside [lo, hi], zero outside.
inline Var clamp(Var a, double lo, double hi) {
    Tensor out = a.val();
    for (auto& x : out.values) x = std::min(hi, std::max(lo, x));
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid, lo, hi](Tape& tp, const Tensor& g) {
        const Tensor& av = tp.value(aid);
        Tensor ga = g;
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (av.values[i] < lo || av.values[i] > hi) ga.values[i] = 0.0;
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

// ---- linear algebra ----

inline Var matmul(Var a, Var b) {
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    if (av.shape.size() != 2 || bv.shape.size() != 2 || av.shape[1] != bv.shape[0])
        throw DimensionError("matmul: incompatible shapes " + av.shape_str() + " and " +
                             bv.shape_str());
    const std::size_t n = av.shape[0], k = av.shape[1], m = bv.shape[1];
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av.values[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j)
                out.values[i * m + j] += aip * bv.values[p * m + j];
        }
    Tape& t = *a.tape;
    auto aid = a.id, bid = b.id;
    auto id = t.push(std::move(out), [aid, bid, n, k, m](Tape& tp, const Tensor& g) {
        const Tensor& A = tp.value(aid);
        const Tensor& B = tp.value(bid);
        Tensor ga = Tensor::zeros({n, k});
        Tensor gb = Tensor::zeros({k, m});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double gij = g.values[i * m + j];
                if (gij == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) {
                    ga.values[i * k + p] += gij * B.values[p * m + j];
                    gb.values[p * m + j] += gij * A.values[i * k + p];
                }
            }
        tp.accumulate(aid, ga);
        tp.accumulate(bid, gb);
    });
    return {&t, id};
}

// Add a length-m row vector to every row of an n x m matrix.
inline Var add_rowvec(Var a, Var b) {
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    const std::size_t n = av.rows(), m = av.cols();
    if (bv.numel() != m)
        throw DimensionError("add_rowvec: bias length " + std::to_string(bv.numel()) +
                             " vs matrix " + av.shape_str());
    Tensor out = av;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out.values[i * m + j] += bv.values[j];
    Tape& t = *a.tape;
    auto aid = a.id, bid = b.id;
    auto id = t.push(std::move(out), [aid, bid, n, m](Tape& tp, const Tensor& g) {
        tp.accumulate(aid, g);
        Tensor gb = Tensor::zeros(tp.value(bid).shape);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) gb.values[j] += g.values[i * m + j];
        tp.accumulate(bid, gb);
    });
    return {&t, id};
}

// ---- softmax / reductions ----

inline Var softmax_rows(Var a) {
    const Tensor& av = a.val();
    const std::size_t n = av.rows(), m = av.cols();
    Tensor out = av;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = out.values[i * m];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, out.values[i * m + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            out.values[i * m + j] = std::exp(out.values[i * m + j] - mx);
            s += out.values[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) out.values[i * m + j] /= s;
    }
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid, n, m, self = t.size()](Tape& tp, const Tensor& g) {
        const Tensor& y = tp.value(static_cast<Tape::NodeId>(self));
        Tensor ga = Tensor::zeros({n, m});
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                dot += g.values[i * m + j] * y.values[i * m + j];
            for (std::size_t j = 0; j < m; ++j)
                ga.values[i * m + j] = y.values[i * m + j] * (g.values[i * m + j] - dot);
        }
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

// Row sums of an n x m matrix -> n x 1.
inline Var row_sum(Var a) {
    const Tensor& av = a.val();
    const std::size_t n = av.rows(), m = av.cols();
    Tensor out = Tensor::zeros({n, 1});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out.values[i] += av.values[i * m + j];
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid, n, m](Tape& tp, const Tensor& g) {
        Tensor ga = Tensor::zeros({n, m});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) ga.values[i * m + j] = g.values[i];
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var sum_all(Var a) {
    double s = 0.0;
    for (double x : a.val().values) s += x;
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(Tensor::scalar(s), [aid](Tape& tp, const Tensor& g) {
        Tensor ga = Tensor::full(tp.value(aid).shape, g.values[0]);
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var mean_all(Var a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.val().numel()));
}

// ---- shape ops ----

inline Var reshape(Var a, std::vector<std::size_t> shape) {
    if (Tensor::numel_of(shape) != a.val().numel())
        throw DimensionError("reshape: numel mismatch " + a.val().shape_str() + " -> " +
                             Tensor::shape_str(shape));
    Tensor out(std::move(shape), a.val().values);
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid](Tape& tp, const Tensor& g) {
        Tensor ga(tp.value(aid).shape, g.values);
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var slice_cols(Var a, std::size_t j0, std::size_t j1) {
    const Tensor& av = a.val();
    const std::size_t n = av.rows(), m = av.cols();
    if (j1 > m || j0 >= j1)
        throw DimensionError("slice_cols: range [" + std::to_string(j0) + "," +
                             std::to_string(j1) + ") out of " + av.shape_str());
    const std::size_t w = j1 - j0;
    Tensor out = Tensor::zeros({n, w});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j)
            out.values[i * w + j] = av.values[i * m + j0 + j];
    Tape& t = *a.tape;
    auto aid = a.id;
    auto id = t.push(std::move(out), [aid, n, m, j0, w](Tape& tp, const Tensor& g) {
        Tensor ga = Tensor::zeros({n, m});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j)
                ga.values[i * m + j0 + j] = g.values[i * w + j];
        tp.accumulate(aid, ga);
    });
    return {&t, id};
}

inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty())
        throw ContractError("concat_cols: no inputs");
    Tape& t = *parts[0].tape;
    const std::size_t n = parts[0].rows();
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (p.rows() != n)
            throw DimensionError("concat_cols: row mismatch");
        total += p.cols();
    }
    Tensor out = Tensor::zeros({n, total});
    std::size_t off = 0;
    std::vector<std::pair<Tape::NodeId, std::size_t>> segs;
    for (const Var& p : parts) {
        const std::size_t w = p.cols();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j)
                out.values[i * total + off + j] = p.val().values[i * w + j];
        segs.emplace_back(p.id, w);
        off += w;
    }
    auto id = t.push(std::move(out), [segs, n, total](Tape& tp, const Tensor& g) {
        std::size_t off2 = 0;
        for (auto [pid, w] : segs) {
            Tensor gp = Tensor::zeros({n, w});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    gp.values[i * w + j] = g.values[i * total + off2 + j];
            tp.accumulate(pid, gp);
            off2 += w;
        }
    });
    return {&t, id};
}

// ---- convolution ----

// Valid (no padding) cross-correlation: input [N,C,H,W], kernels [F,C,kh,kw],
// bias [F], output [N,F,oh,ow].
inline Var conv2d(Var input, Var kernels, Var bias, std::size_t stride) {
    const Tensor& x = input.val();
    const Tensor& k = kernels.val();
    if (x.shape.size() != 4 || k.shape.size() != 4)
        throw DimensionError("conv2d: expected 4-d input and kernels, got " +
                             x.shape_str() + " and " + k.shape_str());
    const std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::size_t F = k.shape[0], kh = k.shape[2], kw = k.shape[3];
    if (k.shape[1] != C)
        throw DimensionError("conv2d: channel mismatch " + x.shape_str() + " vs " +
                             k.shape_str());
    if (kh > H || kw > W)
        throw DimensionError("conv2d: kernel " + k.shape_str() + " larger than input " +
                             x.shape_str());
    if (bias.val().numel() != F)
        throw DimensionError("conv2d: bias length must equal filter count");
    if (stride == 0)
        throw ContractError("conv2d: stride must be positive");
    const std::size_t oh = (H - kh) / stride + 1;
    const std::size_t ow = (W - kw) / stride + 1;
    Tensor out = Tensor::zeros({N, F, oh, ow});
    auto xin = [&](std::size_t n, std::size_t c, std::size_t i, std::size_t j) {
        return x.values[((n * C + c) * H + i) * W + j];
    };
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t oi = 0; oi < oh; ++oi)
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    double acc = bias.val().values[f];
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t u = 0; u < kh; ++u)
                            for (std::size_t v = 0; v < kw; ++v)
                                acc += xin(n, c, oi * stride + u, oj * stride + v) *
                                       k.values[((f * C + c) * kh + u) * kw + v];
                    out.values[((n * F + f) * oh + oi) * ow + oj] = acc;
                }
    Tape& t = *input.tape;
    auto xid = input.id, kid = kernels.id, bid = bias.id;
    auto id = t.push(std::move(out), [=](Tape& tp, const Tensor& g) {
        const Tensor& X = tp.value(xid);
        const Tensor& K = tp.value(kid);
        Tensor gx = Tensor::zeros(X.shape);
        Tensor gk = Tensor::zeros(K.shape);
        Tensor gb = Tensor::zeros(tp.value(bid).shape);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t f = 0; f < F; ++f)
                for (std::size_t oi = 0; oi < oh; ++oi)
                    for (std::size_t oj = 0; oj < ow; ++oj) {
                        const double go = g.values[((n * F + f) * oh + oi) * ow + oj];
                        if (go == 0.0) continue;
                        gb.values[f] += go;
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t u = 0; u < kh; ++u)
                                for (std::size_t v = 0; v < kw; ++v) {
                                    const std::size_t xi =
                                        ((n * C + c) * H + oi * stride + u) * W +
                                        oj * stride + v;
                                    const std::size_t ki =
                                        ((f * C + c) * kh + u) * kw + v;
                                    gx.values[xi] += go * K.values[ki];
                                    gk.values[ki] += go * X.values[xi];
                                }
                    }
        tp.accumulate(xid, gx);
        tp.accumulate(kid, gk);
        tp.accumulate(bid, gb);
    });
    return {&t, id};
}

// Average pooling with the same floor-based output-size rule as conv2d.
inline Var avg_pool2d(Var input, std::size_t win, std::size_t stride) {
    const Tensor& x = input.val();
    if (x.shape.size() != 4)
        throw DimensionError("avg_pool2d: expected 4-d input, got " + x.shape_str());
    const std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    if (win > H || win > W)
        throw DimensionError("avg_pool2d: window larger than input " + x.shape_str());
    if (stride == 0)
        throw ContractError("avg_pool2d: stride must be positive");
    const std::size_t oh = (H - win) / stride + 1;
    const std::size_t ow = (W - win) / stride + 1;
    const double inv = 1.0 / static_cast<double>(win * win);
    Tensor out = Tensor::zeros({N, C, oh, ow});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t oi = 0; oi < oh; ++oi)
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    double acc = 0.0;
                    for (std::size_t u = 0; u < win; ++u)
                        for (std::size_t v = 0; v < win; ++v)
                            acc += x.values[((n * C + c) * H + oi * stride + u) * W +
                                            oj * stride + v];
                    out.values[((n * C + c) * oh + oi) * ow + oj] = acc * inv;
                }
    Tape& t = *input.tape;
    auto xid = input.id;
    auto id = t.push(std::move(out), [=](Tape& tp, const Tensor& g) {
        Tensor gx = Tensor::zeros(tp.value(xid).shape);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t oi = 0; oi < oh; ++oi)
                    for (std::size_t oj = 0; oj < ow; ++oj) {
                        const double go =
                            g.values[((n * C + c) * oh + oi) * ow + oj] * inv;
                        for (std::size_t u = 0; u < win; ++u)
                            for (std::size_t v = 0; v < win; ++v)
                                gx.values[((n * C + c) * H + oi * stride + u) * W +
                                          oj * stride + v] += go;
                    }
        tp.accumulate(xid, gx);
    });
    return {&t, id};
}

// ---- layer helpers ----

enum class Activation { identity, relu, tanh, softplus, softmax };

inline Var apply_activation(Var x, Activation act) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return relu(x);
        case Activation::tanh: return tanh_op(x);
        case Activation::softplus: return softplus(x);
        case Activation::softmax: return softmax_rows(x);
    }
    throw ContractError("unknown activation");
}

// activation(input . W + b) for input [batch x in_dim], W [in_dim x out_dim].
inline Var dense_forward(Var input, Var weights, Var bias, Activation act) {
    if (input.val().rows() < 1)
        throw DimensionError("dense_forward: batch must be >= 1");
    return apply_activation(add_rowvec(matmul(input, weights), bias), act);
}

// Glorot-uniform weight init, zero biases.
inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out});
    for (auto& x : w.values) x = rng.uniform(-limit, limit);
    return w;
}

// ---- finite differences ----

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    bool pass = false;
    std::string worst_param;
};

// Compares autodiff gradients already stored in `store` against central
// differences of `closure`. Relative error: |a-n| / max(1e-8, |a|+|n|).
inline FiniteDiffReport finite_diff_check(
    const std::function<double(ParamStore&)>& closure, ParamStore& store,
    double h = 1e-5, double tol = 1e-4) {
    if (h <= 0.0)
        throw ContractError("finite_diff_check: h must be positive");
    FiniteDiffReport rep;
    // determinism guard: the closure must reproduce its value exactly
    {
        const double v1 = closure(store);
        const double v2 = closure(store);
        if (v1 != v2) {
            rep.max_rel_error = std::numeric_limits<double>::infinity();
            rep.pass = false;
            rep.worst_param = "<non-deterministic closure>";
            return rep;
        }
    }
    for (auto& [name, e] : store.all()) {
        for (std::size_t i = 0; i < e.value.numel(); ++i) {
            const double orig = e.value.values[i];
            e.value.values[i] = orig + h;
            const double fp = closure(store);
            e.value.values[i] = orig - h;
            const double fm = closure(store);
            e.value.values[i] = orig;
            const double num = (fp - fm) / (2.0 * h);
            const double a = e.grad.values[i];
            const double rel = std::abs(a - num) /
                               std::max(1e-8, std::abs(a) + std::abs(num));
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_param = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    rep.pass = rep.max_rel_error < tol;
    return rep;
}

} // namespace survfuse::ad

#endif
