// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include "errors.hpp"
#include "tensor.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vnsde {

using VarId = std::int32_t;

/// Reverse-mode tape over dense vectors. Values are computed eagerly as
/// ops are recorded; backward() walks the node list in exact reverse
/// order. Storage lives in flat arenas so a cleared tape reuses its
/// capacity across passes.
class Tape {
    enum class Op : std::uint8_t {
        Leaf,
        Linear,     // out = W x + b            a=x b=W c=b   i0=rows i1=cols
        Silu,       // out = x sigmoid(x)       a=x
        Tanh,       // out = tanh(x)            a=x
        Exp,        // out = exp(x)             a=x
        Clamp,      // out = clamp(x, d0, d1)   a=x
        Add,        // out = a + b
        Sub,        // out = a - b
        Mul,        // out = a .* b
        AddScaled,  // out = a + d0 * b
        ScaleShift, // out = d0 * a + d1
        MulConst,   // out = a .* payload
        Sum,        // out = sum(a), scalar
        Concat,     // out = [a; b]
        Slice,      // out = a[i0 .. i0+len)
        StackRows,  // out = rows from aux var list
        GaussNll,   // out = (1/2K) sum [lv + (y-mu)^2 e^{-lv}]   a=mu b=lv
        KlStdNormal // out = (1/2K) sum [mu^2 + expm1(lv) - lv]   a=mu b=lv
    };

    struct Slot {
        std::size_t off{ 0 };
        std::size_t len{ 0 };
    };

    struct Node {
        Op op;
        VarId a{ -1 };
        VarId b{ -1 };
        VarId c{ -1 };
        VarId out{ -1 };
        std::int64_t i0{ 0 };
        std::int64_t i1{ 0 };
        double d0{ 0.0 };
        double d1{ 0.0 };
        std::size_t aux_off{ 0 };
        std::size_t aux_n{ 0 };
        std::size_t pay_off{ 0 };
        std::size_t pay_n{ 0 };
    };

public:
    /// Snapshot for rewind(): everything recorded after the mark is
    /// discarded, keeping earlier vars (e.g. parameter leaves) alive.
    struct Mark {
        std::size_t nslots, nnodes, nvals, naux, npay;
    };

    [[nodiscard]] std::size_t num_vars() const { return slots_.size(); }
    [[nodiscard]] std::size_t num_nodes() const { return nodes_.size(); }

    void clear()
    {
        slots_.clear();
        nodes_.clear();
        vals_.clear();
        grads_.clear();
        aux_.clear();
        payload_.clear();
    }

    [[nodiscard]] Mark mark() const
    {
        return { slots_.size(), nodes_.size(), vals_.size(), aux_.size(),
                 payload_.size() };
    }

    void rewind(const Mark& m)
    {
        slots_.resize(m.nslots);
        nodes_.resize(m.nnodes);
        vals_.resize(m.nvals);
        aux_.resize(m.naux);
        payload_.resize(m.npay);
        grads_.clear();
    }

    [[nodiscard]] std::span<const double> values(VarId v) const
    {
        const Slot& s = slots_[static_cast<std::size_t>(v)];
        return { vals_.data() + s.off, s.len };
    }

    [[nodiscard]] double value(VarId v) const
    {
        const Slot& s = slots_[static_cast<std::size_t>(v)];
        if (s.len != 1) {
            throw ContractError("Tape::value: var is not scalar");
        }
        return vals_[s.off];
    }

    [[nodiscard]] std::span<const double> grad(VarId v) const
    {
        const Slot& s = slots_[static_cast<std::size_t>(v)];
        return { grads_.data() + s.off, s.len };
    }

    [[nodiscard]] std::size_t size(VarId v) const
    {
        return slots_[static_cast<std::size_t>(v)].len;
    }

    // ---- graph construction -------------------------------------------

    VarId leaf(std::span<const double> values)
    {
        const VarId v = alloc(values.size());
        std::copy(values.begin(), values.end(), val_ptr(v));
        push(Node{ .op = Op::Leaf, .out = v });
        return v;
    }

    VarId leaf(const Tensor& t) { return leaf(t.view()); }

    VarId linear(VarId x, VarId w, VarId b, std::size_t rows, std::size_t cols)
    {
        if (size(x) != cols || size(w) != rows * cols || size(b) != rows) {
            throw DimensionError(
                "linear: x[" + std::to_string(size(x)) + "] W["
                + std::to_string(rows) + " x " + std::to_string(cols)
                + "] (stored " + std::to_string(size(w)) + ") b["
                + std::to_string(size(b)) + "]");
        }
        const VarId out = alloc(rows);
        const double* xv = val_ptr(x);
        const double* wv = val_ptr(w);
        const double* bv = val_ptr(b);
        double* ov = val_ptr(out);
        for (std::size_t i = 0; i < rows; ++i) {
            double acc = bv[i];
            const double* wrow = wv + i * cols;
            for (std::size_t j = 0; j < cols; ++j) acc += wrow[j] * xv[j];
            ov[i] = acc;
        }
        check_finite(out, "linear");
        push(Node{ .op = Op::Linear,
                   .a = x,
                   .b = w,
                   .c = b,
                   .out = out,
                   .i0 = static_cast<std::int64_t>(rows),
                   .i1 = static_cast<std::int64_t>(cols) });
        return out;
    }

    VarId silu(VarId x)
    {
        const VarId out = alloc(size(x));
        unary(x, out, [](double v) { return v / (1.0 + std::exp(-v)); });
        push(Node{ .op = Op::Silu, .a = x, .out = out });
        return out;
    }

    VarId tanh_act(VarId x)
    {
        const VarId out = alloc(size(x));
        unary(x, out, [](double v) { return std::tanh(v); });
        push(Node{ .op = Op::Tanh, .a = x, .out = out });
        return out;
    }

    VarId exp_act(VarId x)
    {
        const VarId out = alloc(size(x));
        unary(x, out, [](double v) { return std::exp(v); });
        check_finite(out, "exp");
        push(Node{ .op = Op::Exp, .a = x, .out = out });
        return out;
    }

    /// Pass-through gradient inside [lo, hi], zero outside.
    VarId clamp(VarId x, double lo, double hi)
    {
        const VarId out = alloc(size(x));
        unary(x, out, [lo, hi](double v) {
            return v < lo ? lo : (v > hi ? hi : v);
        });
        push(Node{ .op = Op::Clamp, .a = x, .out = out, .d0 = lo, .d1 = hi });
        return out;
    }

    VarId add(VarId a, VarId b)
    {
        return binary(Op::Add, a, b, [](double x, double y) { return x + y; });
    }

    VarId sub(VarId a, VarId b)
    {
        return binary(Op::Sub, a, b, [](double x, double y) { return x - y; });
    }

    VarId mul(VarId a, VarId b)
    {
        return binary(Op::Mul, a, b, [](double x, double y) { return x * y; });
    }

    /// out = a + k * b
    VarId add_scaled(VarId a, VarId b, double k)
    {
        require_same_size(a, b, "add_scaled");
        const VarId out = alloc(size(a));
        const double* av = val_ptr(a);
        const double* bv = val_ptr(b);
        double* ov = val_ptr(out);
        for (std::size_t i = 0; i < size(a); ++i) ov[i] = av[i] + k * bv[i];
        push(Node{ .op = Op::AddScaled, .a = a, .b = b, .out = out, .d0 = k });
        return out;
    }

    /// out = k * a + c (elementwise)
    VarId scale_shift(VarId a, double k, double c)
    {
        const VarId out = alloc(size(a));
        unary(a, out, [k, c](double v) { return k * v + c; });
        push(Node{
            .op = Op::ScaleShift, .a = a, .out = out, .d0 = k, .d1 = c });
        return out;
    }

    /// Elementwise product with a constant vector (no gradient through it).
    VarId mul_const(VarId a, std::span<const double> cv)
    {
        if (size(a) != cv.size()) {
            throw DimensionError("mul_const: var[" + std::to_string(size(a))
                                 + "] vs const[" + std::to_string(cv.size())
                                 + "]");
        }
        const std::size_t pay = stash(cv);
        const VarId out = alloc(size(a));
        const double* av = val_ptr(a);
        const double* pv = payload_.data() + pay;
        double* ov = val_ptr(out);
        for (std::size_t i = 0; i < size(a); ++i) ov[i] = av[i] * pv[i];
        push(Node{ .op = Op::MulConst,
                   .a = a,
                   .out = out,
                   .pay_off = pay,
                   .pay_n = cv.size() });
        return out;
    }

    VarId sum(VarId a)
    {
        const VarId out = alloc(1);
        const double* av = val_ptr(a);
        double acc = 0.0;
        for (std::size_t i = 0; i < size(a); ++i) acc += av[i];
        *val_ptr(out) = acc;
        push(Node{ .op = Op::Sum, .a = a, .out = out });
        return out;
    }

    VarId concat(VarId a, VarId b)
    {
        const VarId out = alloc(size(a) + size(b));
        double* ov = val_ptr(out);
        std::copy_n(val_ptr(a), size(a), ov);
        std::copy_n(val_ptr(b), size(b), ov + size(a));
        push(Node{ .op = Op::Concat, .a = a, .b = b, .out = out });
        return out;
    }

    VarId slice(VarId a, std::size_t offset, std::size_t len)
    {
        if (offset + len > size(a)) {
            throw ContractError("slice: [" + std::to_string(offset) + ", "
                                + std::to_string(offset + len)
                                + ") out of range for var of size "
                                + std::to_string(size(a)));
        }
        const VarId out = alloc(len);
        std::copy_n(val_ptr(a) + offset, len, val_ptr(out));
        push(Node{ .op = Op::Slice,
                   .a = a,
                   .out = out,
                   .i0 = static_cast<std::int64_t>(offset) });
        return out;
    }

    /// Stacks equally sized vectors into one [K x len] row-major var.
    VarId stack_rows(std::span<const VarId> rows)
    {
        if (rows.empty()) {
            throw ContractError("stack_rows: empty input list");
        }
        const std::size_t len = size(rows[0]);
        for (const VarId r : rows) {
            if (size(r) != len) {
                throw DimensionError("stack_rows: row size "
                                     + std::to_string(size(r)) + " vs "
                                     + std::to_string(len));
            }
        }
        const std::size_t aux_off = aux_.size();
        aux_.insert(aux_.end(), rows.begin(), rows.end());
        const VarId out = alloc(rows.size() * len);
        double* ov = val_ptr(out);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            std::copy_n(val_ptr(rows[k]), len, ov + k * len);
        }
        push(Node{ .op = Op::StackRows,
                   .out = out,
                   .i0 = static_cast<std::int64_t>(len),
                   .aux_off = aux_off,
                   .aux_n = rows.size() });
        return out;
    }

    /// Gaussian negative log-likelihood of the constant observations y
    /// under (mean, logvar), averaged over elements:
    ///   (1 / 2K) sum_k [ lv_k + (y_k - mu_k)^2 exp(-lv_k) ],  K = #elements.
    VarId gaussian_nll(VarId mean, VarId logvar, std::span<const double> y)
    {
        require_same_size(mean, logvar, "gaussian_nll");
        if (size(mean) != y.size()) {
            throw DimensionError("gaussian_nll: head["
                                 + std::to_string(size(mean)) + "] vs y["
                                 + std::to_string(y.size()) + "]");
        }
        const std::size_t pay = stash(y);
        const VarId out = alloc(1);
        const double* mv = val_ptr(mean);
        const double* lv = val_ptr(logvar);
        const double* yv = payload_.data() + pay;
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = yv[i] - mv[i];
            acc += lv[i] + r * r * std::exp(-lv[i]);
        }
        *val_ptr(out) = acc / (2.0 * static_cast<double>(y.size()));
        check_finite(out, "gaussian_nll");
        push(Node{ .op = Op::GaussNll,
                   .a = mean,
                   .b = logvar,
                   .out = out,
                   .pay_off = pay,
                   .pay_n = y.size() });
        return out;
    }

    /// KL(N(mu, diag e^lv) || N(0, I)) averaged over dimensions:
    ///   (1 / 2K) sum_k [ mu_k^2 + expm1(lv_k) - lv_k ].
    /// expm1 keeps each summand non-negative in floating point.
    VarId kl_std_normal(VarId mean, VarId logvar)
    {
        require_same_size(mean, logvar, "kl_std_normal");
        const VarId out = alloc(1);
        const double* mv = val_ptr(mean);
        const double* lv = val_ptr(logvar);
        double acc = 0.0;
        for (std::size_t i = 0; i < size(mean); ++i) {
            acc += mv[i] * mv[i] + (std::expm1(lv[i]) - lv[i]);
        }
        *val_ptr(out) = acc / (2.0 * static_cast<double>(size(mean)));
        check_finite(out, "kl_std_normal");
        push(Node{ .op = Op::KlStdNormal, .a = mean, .b = logvar, .out = out });
        return out;
    }

    // ---- backward ------------------------------------------------------

    struct Seed {
        VarId var;
        std::span<const double> grad;
    };

    /// Standard reverse pass from a scalar loss.
    void backward(VarId loss)
    {
        if (size(loss) != 1) {
            throw ContractError("backward: loss must be scalar, has size "
                                + std::to_string(size(loss)));
        }
        const double one = 1.0;
        const Seed s{ loss, std::span<const double>(&one, 1) };
        backward_seeded({ &s, 1 });
    }

    /// Reverse pass with explicit gradient seeds (vector-Jacobian entry
    /// point; used by the segmented replay backward).
    void backward_seeded(std::span<const Seed> seeds)
    {
        grads_.assign(vals_.size(), 0.0);
        for (const Seed& s : seeds) {
            const Slot& slot = slots_[static_cast<std::size_t>(s.var)];
            if (s.grad.size() != slot.len) {
                throw ContractError("backward_seeded: seed size mismatch");
            }
            double* g = grads_.data() + slot.off;
            for (std::size_t i = 0; i < slot.len; ++i) g[i] += s.grad[i];
        }
        for (std::size_t ni = nodes_.size(); ni-- > 0;) {
            step_backward(nodes_[ni]);
        }
    }

    /// Adds the current gradient of v into acc (which must match size).
    void accumulate_grad(VarId v, std::span<double> acc) const
    {
        const auto g = grad(v);
        if (g.size() != acc.size()) {
            throw ContractError("accumulate_grad: size mismatch");
        }
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }

private:
    std::vector<Slot> slots_;
    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<double> grads_;
    std::vector<VarId> aux_;
    std::vector<double> payload_;

    VarId alloc(std::size_t len)
    {
        const VarId v = static_cast<VarId>(slots_.size());
        slots_.push_back(Slot{ vals_.size(), len });
        vals_.resize(vals_.size() + len, 0.0);
        return v;
    }

    [[nodiscard]] double* val_ptr(VarId v)
    {
        return vals_.data() + slots_[static_cast<std::size_t>(v)].off;
    }
    [[nodiscard]] const double* val_ptr(VarId v) const
    {
        return vals_.data() + slots_[static_cast<std::size_t>(v)].off;
    }
    [[nodiscard]] double* grad_ptr(VarId v)
    {
        return grads_.data() + slots_[static_cast<std::size_t>(v)].off;
    }

    std::size_t stash(std::span<const double> data)
    {
        const std::size_t off = payload_.size();
        payload_.insert(payload_.end(), data.begin(), data.end());
        return off;
    }

    void push(Node n) { nodes_.push_back(n); }

    void require_same_size(VarId a, VarId b, const char* where)
    {
        if (size(a) != size(b)) {
            throw DimensionError(std::string(where) + ": ["
                                 + std::to_string(size(a)) + "] vs ["
                                 + std::to_string(size(b)) + "]");
        }
    }

    template <typename F>
    void unary(VarId x, VarId out, F&& f)
    {
        const double* xv = val_ptr(x);
        double* ov = val_ptr(out);
        for (std::size_t i = 0; i < size(x); ++i) ov[i] = f(xv[i]);
    }

    template <typename F>
    VarId binary(Op op, VarId a, VarId b, F&& f)
    {
        require_same_size(a, b, "elementwise op");
        const VarId out = alloc(size(a));
        const double* av = val_ptr(a);
        const double* bv = val_ptr(b);
        double* ov = val_ptr(out);
        for (std::size_t i = 0; i < size(a); ++i) ov[i] = f(av[i], bv[i]);
        push(Node{ .op = op, .a = a, .b = b, .out = out });
        return out;
    }

    void check_finite(VarId v, const char* where)
    {
        const double* p = val_ptr(v);
        for (std::size_t i = 0; i < size(v); ++i) {
            if (!std::isfinite(p[i])) {
                throw NumericalError(std::string(where)
                                     + ": non-finite value in forward pass");
            }
        }
    }

    void step_backward(const Node& n)
    {
        const std::size_t len = slots_[static_cast<std::size_t>(n.out)].len;
        const double* og = grad_ptr(n.out);
        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Linear: {
            const auto rows = static_cast<std::size_t>(n.i0);
            const auto cols = static_cast<std::size_t>(n.i1);
            const double* xv = val_ptr(n.a);
            const double* wv = val_ptr(n.b);
            double* gx = grad_ptr(n.a);
            double* gw = grad_ptr(n.b);
            double* gb = grad_ptr(n.c);
            for (std::size_t i = 0; i < rows; ++i) {
                const double gi = og[i];
                const double* wrow = wv + i * cols;
                double* gwrow = gw + i * cols;
                gb[i] += gi;
                for (std::size_t j = 0; j < cols; ++j) {
                    gx[j] += wrow[j] * gi;
                    gwrow[j] += xv[j] * gi;
                }
            }
            break;
        }
        case Op::Silu: {
            const double* xv = val_ptr(n.a);
            double* gx = grad_ptr(n.a);
            for (std::size_t i = 0; i < len; ++i) {
                const double s = 1.0 / (1.0 + std::exp(-xv[i]));
                gx[i] += og[i] * s * (1.0 + xv[i] * (1.0 - s));
            }
            break;
        }
        case Op::Tanh: {
            const double* ov = val_ptr(n.out);
            double* gx = grad_ptr(n.a);
            for (std::size_t i = 0; i < len; ++i) {
                gx[i] += og[i] * (1.0 - ov[i] * ov[i]);
            }
            break;
        }
        case Op::Exp: {
            const double* ov = val_ptr(n.out);
            double* gx = grad_ptr(n.a);
            for (std::size_t i = 0; i < len; ++i) gx[i] += og[i] * ov[i];
            break;
        }
        case Op::Clamp: {
            const double* xv = val_ptr(n.a);
            double* gx = grad_ptr(n.a);
            for (std::size_t i = 0; i < len; ++i) {
                if (xv[i] >= n.d0 && xv[i] <= n.d1) gx[i] += og[i];
            }
            break;
        }
        case Op::Add: {
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            for (std::size_t i = 0; i < len; ++i) {
                ga[i] += og[i];
                gb[i] += og[i];
            }
            break;
        }
        case Op::Sub: {
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            for (std::size_t i = 0; i < len; ++i) {
                ga[i] += og[i];
                gb[i] -= og[i];
            }
            break;
        }
        case Op::Mul: {
            const double* av = val_ptr(n.a);
            const double* bv = val_ptr(n.b);
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            for (std::size_t i = 0; i < len; ++i) {
                ga[i] += og[i] * bv[i];
                gb[i] += og[i] * av[i];
            }
            break;
        }
        case Op::AddScaled: {
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            for (std::size_t i = 0; i < len; ++i) {
                ga[i] += og[i];
                gb[i] += og[i] * n.d0;
            }
            break;
        }
        case Op::ScaleShift: {
            double* ga = grad_ptr(n.a);
            for (std::size_t i = 0; i < len; ++i) ga[i] += og[i] * n.d0;
            break;
        }
        case Op::MulConst: {
            const double* pv = payload_.data() + n.pay_off;
            double* ga = grad_ptr(n.a);
            for (std::size_t i = 0; i < len; ++i) ga[i] += og[i] * pv[i];
            break;
        }
        case Op::Sum: {
            double* ga = grad_ptr(n.a);
            const double g = og[0];
            const std::size_t alen = slots_[static_cast<std::size_t>(n.a)].len;
            for (std::size_t i = 0; i < alen; ++i) ga[i] += g;
            break;
        }
        case Op::Concat: {
            const std::size_t alen = slots_[static_cast<std::size_t>(n.a)].len;
            double* ga = grad_ptr(n.a);
            double* gb = grad_ptr(n.b);
            for (std::size_t i = 0; i < alen; ++i) ga[i] += og[i];
            for (std::size_t i = alen; i < len; ++i) gb[i - alen] += og[i];
            break;
        }
        case Op::Slice: {
            double* ga = grad_ptr(n.a) + static_cast<std::size_t>(n.i0);
            for (std::size_t i = 0; i < len; ++i) ga[i] += og[i];
            break;
        }
        case Op::StackRows: {
            const auto rlen = static_cast<std::size_t>(n.i0);
            for (std::size_t k = 0; k < n.aux_n; ++k) {
                double* gr = grad_ptr(aux_[n.aux_off + k]);
                const double* src = og + k * rlen;
                for (std::size_t i = 0; i < rlen; ++i) gr[i] += src[i];
            }
            break;
        }
        case Op::GaussNll: {
            const double g = og[0];
            const double* mv = val_ptr(n.a);
            const double* lv = val_ptr(n.b);
            const double* yv = payload_.data() + n.pay_off;
            double* gm = grad_ptr(n.a);
            double* gl = grad_ptr(n.b);
            const double scale =
                g / (2.0 * static_cast<double>(n.pay_n));
            for (std::size_t i = 0; i < n.pay_n; ++i) {
                const double inv_var = std::exp(-lv[i]);
                const double r = yv[i] - mv[i];
                gm[i] += scale * (-2.0 * r * inv_var);
                gl[i] += scale * (1.0 - r * r * inv_var);
            }
            break;
        }
        case Op::KlStdNormal: {
            const double g = og[0];
            const std::size_t k = slots_[static_cast<std::size_t>(n.a)].len;
            const double* mv = val_ptr(n.a);
            const double* lv = val_ptr(n.b);
            double* gm = grad_ptr(n.a);
            double* gl = grad_ptr(n.b);
            const double scale = g / (2.0 * static_cast<double>(k));
            for (std::size_t i = 0; i < k; ++i) {
                gm[i] += scale * 2.0 * mv[i];
                gl[i] += scale * (std::exp(lv[i]) - 1.0);
            }
            break;
        }
        }
    }
};

} // namespace vnsde
