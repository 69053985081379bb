#pragma once

#include <algorithm>
#include <cmath>

#include "edt/core/graph.hpp"

// Differentiable op set. Each op validates shapes, computes the forward
// value eagerly and registers a backward closure on the tape.

namespace edt::ad {

namespace detail {

inline void require_same_graph(Var a, Var b, const char* op) {
    if (a.g != b.g) throw std::invalid_argument(std::string(op) + ": operands from different graphs");
}

// out[m,n] += a[m,k] * b[k,n], optionally transposing either operand view.
inline void matmul_acc(const double* a, const double* b, double* out,
                       std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* orow = out + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[m,n] += a[m,k] * b[n,k]^T
inline void matmul_nt_acc(const double* a, const double* b, double* out,
                          std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* orow = out + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] += acc;
        }
    }
}

// out[k,n] += a[m,k]^T * b[m,n]
inline void matmul_tn_acc(const double* a, const double* b, double* out,
                          std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            double av = arow[p];
            if (av == 0.0) continue;
            double* orow = out + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// ---- elementwise arithmetic ----

inline Var add(Var a, Var b) {
    detail::require_same_graph(a, b, "add");
    if (!a.val().same_shape(b.val()))
        throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.val()[i];
    return a.g->emit(std::move(out), {a.id, b.id}, [](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        Tensor& gb = ctx.grad(1);
        for (std::size_t i = 0; i < og.size(); ++i) {
            ga[i] += og[i];
            gb[i] += og[i];
        }
    });
}

inline Var sub(Var a, Var b) {
    detail::require_same_graph(a, b, "sub");
    if (!a.val().same_shape(b.val()))
        throw std::invalid_argument("sub: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.val()[i];
    return a.g->emit(std::move(out), {a.id, b.id}, [](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        Tensor& gb = ctx.grad(1);
        for (std::size_t i = 0; i < og.size(); ++i) {
            ga[i] += og[i];
            gb[i] -= og[i];
        }
    });
}

inline Var mul(Var a, Var b) {
    detail::require_same_graph(a, b, "mul");
    if (!a.val().same_shape(b.val()))
        throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.val()[i];
    return a.g->emit(std::move(out), {a.id, b.id}, [](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        const Tensor& av = ctx.in(0);
        const Tensor& bv = ctx.in(1);
        Tensor& ga = ctx.grad(0);
        Tensor& gb = ctx.grad(1);
        for (std::size_t i = 0; i < og.size(); ++i) {
            ga[i] += og[i] * bv[i];
            gb[i] += og[i] * av[i];
        }
    });
}

inline Var scale(Var a, double c) {
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return a.g->emit(std::move(out), {a.id}, [c](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < og.size(); ++i) ga[i] += c * og[i];
    });
}

/// |x| elementwise; subgradient 0 at exact ties.
inline Var abs(Var a) {
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
    return a.g->emit(std::move(out), {a.id}, [](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        const Tensor& av = ctx.in(0);
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < og.size(); ++i) {
            double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
            ga[i] += s * og[i];
        }
    });
}

inline Var sum(Var a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.val()[i];
    return a.g->emit(Tensor::scalar(acc), {a.id}, [](BackCtx& ctx) {
        double og = ctx.out_grad()[0];
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og;
    });
}

inline Var mean(Var a) {
    double inv = 1.0 / static_cast<double>(a.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.val()[i];
    return a.g->emit(Tensor::scalar(acc * inv), {a.id}, [inv](BackCtx& ctx) {
        double og = ctx.out_grad()[0] * inv;
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og;
    });
}

/// a + b where b's shape is a suffix of a's shape (broadcast over the
/// leading dims). Backward for b sums over the broadcast dims.
inline Var add_broadcast(Var a, Var b) {
    detail::require_same_graph(a, b, "add_broadcast");
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (bs.size() > as.size() ||
        !std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size())))
        throw std::invalid_argument("add_broadcast: " + shape_str(bs) + " is not a suffix of " +
                                    shape_str(as));
    std::size_t inner = b.size();
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.val()[i % inner];
    return a.g->emit(std::move(out), {a.id, b.id}, [inner](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        Tensor& gb = ctx.grad(1);
        for (std::size_t i = 0; i < og.size(); ++i) {
            ga[i] += og[i];
            gb[i % inner] += og[i];
        }
    });
}

// ---- matrix products ----

inline Var matmul(Var a, Var b) {
    detail::require_same_graph(a, b, "matmul");
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
    std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n});
    detail::matmul_acc(a.val().data(), b.val().data(), out.data(), m, k, n);
    return a.g->emit(std::move(out), {a.id, b.id}, [m, k, n](BackCtx& ctx) {
        const double* og = ctx.out_grad().data();
        // da = og * b^T ; db = a^T * og
        detail::matmul_nt_acc(og, ctx.in(1).data(), ctx.grad(0).data(), m, n, k);
        detail::matmul_tn_acc(ctx.in(0).data(), og, ctx.grad(1).data(), m, k, n);
    });
}

/// Batched matmul: a [N,M,K] x b [N,K,P] -> [N,M,P]; with transpose_b,
/// b is [N,P,K]. Backs QK^T and attention-weighted sums.
inline Var bmm(Var a, Var b, bool transpose_b = false) {
    detail::require_same_graph(a, b, "bmm");
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0])
        throw std::invalid_argument("bmm: expected matching 3-d batches, got " + shape_str(as) +
                                    " x " + shape_str(bs));
    std::size_t N = as[0], m = as[1], k = as[2];
    std::size_t p = transpose_b ? bs[1] : bs[2];
    if ((transpose_b ? bs[2] : bs[1]) != k)
        throw std::invalid_argument("bmm: inner extent mismatch " + shape_str(as) + " x " +
                                    shape_str(bs));
    Tensor out({N, m, p});
    for (std::size_t i = 0; i < N; ++i) {
        const double* ap = a.val().data() + i * m * k;
        const double* bp = b.val().data() + i * (transpose_b ? p * k : k * p);
        double* op = out.data() + i * m * p;
        if (transpose_b)
            detail::matmul_nt_acc(ap, bp, op, m, k, p);
        else
            detail::matmul_acc(ap, bp, op, m, k, p);
    }
    return a.g->emit(std::move(out), {a.id, b.id}, [N, m, k, p, transpose_b](BackCtx& ctx) {
        for (std::size_t i = 0; i < N; ++i) {
            const double* og = ctx.out_grad().data() + i * m * p;
            const double* av = ctx.in(0).data() + i * m * k;
            const double* bv = ctx.in(1).data() + i * (transpose_b ? p * k : k * p);
            double* ga = ctx.grad(0).data() + i * m * k;
            double* gb = ctx.grad(1).data() + i * (transpose_b ? p * k : k * p);
            if (transpose_b) {
                // out = a b^T : da = og * b ; db = og^T * a
                detail::matmul_acc(og, bv, ga, m, p, k);
                detail::matmul_tn_acc(og, av, gb, m, p, k);
            } else {
                // da = og * b^T ; db = a^T * og
                detail::matmul_nt_acc(og, bv, ga, m, p, k);
                detail::matmul_tn_acc(av, og, gb, m, k, p);
            }
        }
    });
}

/// x [..., In] * w [In, Out] + bias [Out]. Pass an invalid Var{} to skip bias.
inline Var linear(Var x, Var w, Var bias = Var{}) {
    detail::require_same_graph(x, w, "linear");
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (ws.size() != 2 || xs.empty() || xs.back() != ws[0])
        throw std::invalid_argument("linear: incompatible shapes " + shape_str(xs) + " x " +
                                    shape_str(ws));
    bool with_bias = bias.g != nullptr;
    if (with_bias && (bias.shape().size() != 1 || bias.shape()[0] != ws[1]))
        throw std::invalid_argument("linear: bias shape " + shape_str(bias.shape()));
    std::size_t in = ws[0], out_dim = ws[1];
    std::size_t rows = x.size() / in;
    Shape os(xs);
    os.back() = out_dim;
    Tensor out(os);
    detail::matmul_acc(x.val().data(), w.val().data(), out.data(), rows, in, out_dim);
    if (with_bias) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < out_dim; ++j) out[r * out_dim + j] += bias.val()[j];
    }
    std::vector<std::size_t> ins = {x.id, w.id};
    if (with_bias) ins.push_back(bias.id);
    return x.g->emit(std::move(out), std::move(ins), [rows, in, out_dim, with_bias](BackCtx& ctx) {
        const double* og = ctx.out_grad().data();
        detail::matmul_nt_acc(og, ctx.in(1).data(), ctx.grad(0).data(), rows, out_dim, in);
        detail::matmul_tn_acc(ctx.in(0).data(), og, ctx.grad(1).data(), rows, in, out_dim);
        if (with_bias) {
            Tensor& gb = ctx.grad(2);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < out_dim; ++j) gb[j] += og[r * out_dim + j];
        }
    });
}

// ---- nonlinearities and normalization ----

/// Row-wise softmax over the last axis, max-subtracted for stability.
inline Var softmax(Var x) {
    const Shape& s = x.shape();
    std::size_t n = s.back();
    std::size_t rows = x.size() / n;
    Tensor out(s);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xi = x.val().data() + r * n;
        double* yi = out.data() + r * n;
        double mx = xi[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            z += yi[j];
        }
        for (std::size_t j = 0; j < n; ++j) yi[j] /= z;
    }
    return x.g->emit(std::move(out), {x.id}, [rows, n](BackCtx& ctx) {
        const Tensor& y = ctx.out_val();
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* yi = y.data() + r * n;
            const double* gi = og.data() + r * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += yi[j] * gi[j];
            double* gxi = gx.data() + r * n;
            for (std::size_t j = 0; j < n; ++j) gxi[j] += yi[j] * (gi[j] - dot);
        }
    });
}

inline constexpr double kSqrt2OverPi = 0.7978845608028654;
inline constexpr double kCubicCoeff = 0.044715;

/// GELU, tanh approximation.
inline Var gelu(Var x) {
    Tensor out = x.val();
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = out[i];
        double u = kSqrt2OverPi * (v + kCubicCoeff * v * v * v);
        out[i] = 0.5 * v * (1.0 + std::tanh(u));
    }
    return x.g->emit(std::move(out), {x.id}, [](BackCtx& ctx) {
        const Tensor& xv = ctx.in(0);
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t i = 0; i < og.size(); ++i) {
            double v = xv[i];
            double u = kSqrt2OverPi * (v + kCubicCoeff * v * v * v);
            double t = std::tanh(u);
            double du = kSqrt2OverPi * (1.0 + 3.0 * kCubicCoeff * v * v);
            gx[i] += og[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
        }
    });
}

/// Layer norm over the last axis with affine parameters gamma, beta [C].
inline Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5) {
    detail::require_same_graph(x, gamma, "layernorm");
    detail::require_same_graph(x, beta, "layernorm");
    if (eps <= 0.0) throw std::invalid_argument("layernorm: eps must be > 0");
    std::size_t c = x.shape().back();
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
        throw std::invalid_argument("layernorm: gamma/beta must be [" + std::to_string(c) + "]");
    std::size_t rows = x.size() / c;
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xi = x.val().data() + r * c;
        double* yi = out.data() + r * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += xi[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
        var /= static_cast<double>(c);
        double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j)
            yi[j] = gamma.val()[j] * (xi[j] - mu) * inv + beta.val()[j];
    }
    return x.g->emit(std::move(out), {x.id, gamma.id, beta.id}, [rows, c, eps](BackCtx& ctx) {
        const Tensor& xv = ctx.in(0);
        const Tensor& gm = ctx.in(1);
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        Tensor& gg = ctx.grad(1);
        Tensor& gb = ctx.grad(2);
        double n = static_cast<double>(c);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xi = xv.data() + r * c;
            const double* gi = og.data() + r * c;
            double mu = 0.0;
            for (std::size_t j = 0; j < c; ++j) mu += xi[j];
            mu /= n;
            double var = 0.0;
            for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
            var /= n;
            double inv = 1.0 / std::sqrt(var + eps);
            // dxhat_j = g_j * gamma_j; reduce to the two row sums.
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                double xhat = (xi[j] - mu) * inv;
                double dxhat = gi[j] * gm[j];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                gg[j] += gi[j] * xhat;
                gb[j] += gi[j];
            }
            double* gxi = gx.data() + r * c;
            for (std::size_t j = 0; j < c; ++j) {
                double xhat = (xi[j] - mu) * inv;
                double dxhat = gi[j] * gm[j];
                gxi[j] += inv * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
            }
        }
    });
}

/// bias[h, i, j] = table[h, index[i*t + j]]; the relative-position lookup.
/// index values must be < table columns.
inline Var bias_from_table(Var table, const std::vector<std::size_t>& index, std::size_t t) {
    const Shape& ts = table.shape();
    if (ts.size() != 2) throw std::invalid_argument("bias_from_table: table must be 2-d");
    if (index.size() != t * t) throw std::invalid_argument("bias_from_table: index size != t*t");
    std::size_t heads = ts[0], entries = ts[1];
    for (std::size_t v : index)
        if (v >= entries) throw std::invalid_argument("bias_from_table: index out of range");
    Tensor out({heads, t, t});
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t ij = 0; ij < t * t; ++ij)
            out[h * t * t + ij] = table.val()[h * entries + index[ij]];
    return table.g->emit(std::move(out), {table.id}, [index, t, heads, entries](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gt = ctx.grad(0);
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t ij = 0; ij < t * t; ++ij)
                gt[h * entries + index[ij]] += og[h * t * t + ij];
    });
}

}  // namespace edt::ad
