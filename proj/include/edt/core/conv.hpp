#pragma once

#include "edt/core/graph.hpp"
#include "edt/core/ops.hpp"

namespace edt::ad {

namespace detail {

struct ConvDims {
    std::size_t B, C, H, W, O, Cg, kh, kw, Ho, Wo, Og, stride, pad;
};

// Valid output range [lo, hi) for which ix = ox*stride + k - pad stays in
// [0, extent).
inline void conv_out_range(std::size_t k, std::size_t pad, std::size_t stride, std::size_t in_extent,
                           std::size_t out_extent, std::size_t& lo, std::size_t& hi) {
    std::ptrdiff_t kk = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad);
    std::ptrdiff_t lo_s = kk < 0 ? (-kk + static_cast<std::ptrdiff_t>(stride) - 1) /
                                       static_cast<std::ptrdiff_t>(stride)
                                 : 0;
    std::ptrdiff_t hi_s = (static_cast<std::ptrdiff_t>(in_extent) - 1 - kk) /
                              static_cast<std::ptrdiff_t>(stride) +
                          1;
    if (hi_s > static_cast<std::ptrdiff_t>(out_extent)) hi_s = static_cast<std::ptrdiff_t>(out_extent);
    if (hi_s < lo_s) hi_s = lo_s;
    lo = static_cast<std::size_t>(lo_s);
    hi = static_cast<std::size_t>(hi_s);
}

// out(b,o) += sum_{ic,ky,kx} w[o,ic,ky,kx] * x(b, c, oy*s+ky-p, ox*s+kx-p);
// weight scalar hoisted so the ox loop is a strided axpy.
inline void conv_forward_kernel(const ConvDims& d, const double* xp, const double* wp, double* op) {
    for (std::size_t b = 0; b < d.B; ++b)
        for (std::size_t o = 0; o < d.O; ++o) {
            std::size_t g = o / d.Og;
            double* out_plane = op + (b * d.O + o) * d.Ho * d.Wo;
            for (std::size_t ic = 0; ic < d.Cg; ++ic) {
                std::size_t c = g * d.Cg + ic;
                const double* x_plane = xp + (b * d.C + c) * d.H * d.W;
                const double* w_base = wp + (o * d.Cg + ic) * d.kh * d.kw;
                for (std::size_t ky = 0; ky < d.kh; ++ky)
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        double wv = w_base[ky * d.kw + kx];
                        if (wv == 0.0) continue;
                        std::size_t oy_lo, oy_hi, ox_lo, ox_hi;
                        conv_out_range(ky, d.pad, d.stride, d.H, d.Ho, oy_lo, oy_hi);
                        conv_out_range(kx, d.pad, d.stride, d.W, d.Wo, ox_lo, ox_hi);
                        std::ptrdiff_t off_y = static_cast<std::ptrdiff_t>(ky) -
                                               static_cast<std::ptrdiff_t>(d.pad);
                        std::ptrdiff_t off_x = static_cast<std::ptrdiff_t>(kx) -
                                               static_cast<std::ptrdiff_t>(d.pad);
                        for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                            const double* xrow =
                                x_plane + (oy * d.stride + off_y) * static_cast<std::ptrdiff_t>(d.W);
                            double* orow = out_plane + oy * d.Wo;
                            if (d.stride == 1) {
                                const double* xs = xrow + ox_lo + off_x;
                                for (std::size_t ox = ox_lo; ox < ox_hi; ++ox)
                                    orow[ox] += wv * xs[ox - ox_lo];
                            } else {
                                for (std::size_t ox = ox_lo; ox < ox_hi; ++ox)
                                    orow[ox] += wv * xrow[static_cast<std::ptrdiff_t>(ox * d.stride) + off_x];
                            }
                        }
                    }
            }
        }
}

inline void conv_backward_kernel(const ConvDims& d, const double* xp, const double* wp,
                                 const double* ogp, double* gxp, double* gwp) {
    for (std::size_t b = 0; b < d.B; ++b)
        for (std::size_t o = 0; o < d.O; ++o) {
            std::size_t g = o / d.Og;
            const double* og_plane = ogp + (b * d.O + o) * d.Ho * d.Wo;
            for (std::size_t ic = 0; ic < d.Cg; ++ic) {
                std::size_t c = g * d.Cg + ic;
                const double* x_plane = xp + (b * d.C + c) * d.H * d.W;
                double* gx_plane = gxp + (b * d.C + c) * d.H * d.W;
                const double* w_base = wp + (o * d.Cg + ic) * d.kh * d.kw;
                double* gw_base = gwp + (o * d.Cg + ic) * d.kh * d.kw;
                for (std::size_t ky = 0; ky < d.kh; ++ky)
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        double wv = w_base[ky * d.kw + kx];
                        double acc = 0.0;
                        std::size_t oy_lo, oy_hi, ox_lo, ox_hi;
                        conv_out_range(ky, d.pad, d.stride, d.H, d.Ho, oy_lo, oy_hi);
                        conv_out_range(kx, d.pad, d.stride, d.W, d.Wo, ox_lo, ox_hi);
                        std::ptrdiff_t off_y = static_cast<std::ptrdiff_t>(ky) -
                                               static_cast<std::ptrdiff_t>(d.pad);
                        std::ptrdiff_t off_x = static_cast<std::ptrdiff_t>(kx) -
                                               static_cast<std::ptrdiff_t>(d.pad);
                        for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                            std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride) + off_y;
                            const double* xrow = x_plane + iy * static_cast<std::ptrdiff_t>(d.W);
                            double* gxrow = gx_plane + iy * static_cast<std::ptrdiff_t>(d.W);
                            const double* orow = og_plane + oy * d.Wo;
                            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                                std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride) + off_x;
                                double go = orow[ox];
                                acc += go * xrow[ix];
                                gxrow[ix] += go * wv;
                            }
                        }
                        gw_base[ky * d.kw + kx] += acc;
                    }
            }
        }
}

}  // namespace detail

/// 2-d cross-correlation. x [B,C,H,W], w [O,C/g,kh,kw], optional bias [O].
/// Zero padding; output spatial size floor((H+2p-k)/stride)+1.
inline Var conv2d(Var x, Var w, Var bias, std::size_t stride, std::size_t pad,
                  std::size_t groups = 1) {
    detail::require_same_graph(x, w, "conv2d");
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d: expected 4-d x and w, got " + shape_str(xs) + ", " +
                                    shape_str(ws));
    detail::ConvDims d;
    d.B = xs[0];
    d.C = xs[1];
    d.H = xs[2];
    d.W = xs[3];
    d.O = ws[0];
    d.Cg = ws[1];
    d.kh = ws[2];
    d.kw = ws[3];
    d.stride = stride;
    d.pad = pad;
    if (groups == 0 || d.C % groups != 0 || d.O % groups != 0 || d.Cg != d.C / groups)
        throw std::invalid_argument("conv2d: group mismatch C=" + std::to_string(d.C) + " O=" +
                                    std::to_string(d.O) + " w=" + shape_str(ws) + " groups=" +
                                    std::to_string(groups));
    if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (d.H + 2 * pad < d.kh || d.W + 2 * pad < d.kw)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    bool with_bias = bias.g != nullptr;
    if (with_bias && bias.shape() != Shape{d.O})
        throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()));

    d.Ho = (d.H + 2 * pad - d.kh) / stride + 1;
    d.Wo = (d.W + 2 * pad - d.kw) / stride + 1;
    d.Og = d.O / groups;
    Tensor out({d.B, d.O, d.Ho, d.Wo});
    if (with_bias)
        for (std::size_t b = 0; b < d.B; ++b)
            for (std::size_t o = 0; o < d.O; ++o)
                for (std::size_t i = 0; i < d.Ho * d.Wo; ++i)
                    out[(b * d.O + o) * d.Ho * d.Wo + i] = bias.val()[o];
    detail::conv_forward_kernel(d, x.val().data(), w.val().data(), out.data());

    std::vector<std::size_t> ins = {x.id, w.id};
    if (with_bias) ins.push_back(bias.id);
    return x.g->emit(std::move(out), std::move(ins), [d, with_bias](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        detail::conv_backward_kernel(d, ctx.in(0).data(), ctx.in(1).data(), og.data(),
                                     ctx.grad(0).data(), ctx.grad(1).data());
        if (with_bias) {
            Tensor& gb = ctx.grad(2);
            for (std::size_t b = 0; b < d.B; ++b)
                for (std::size_t o = 0; o < d.O; ++o)
                    for (std::size_t i = 0; i < d.Ho * d.Wo; ++i)
                        gb[o] += og[(b * d.O + o) * d.Ho * d.Wo + i];
        }
    });
}

/// Transposed (fractionally-strided) convolution; gradient-of-conv2d
/// semantics. x [B,C,H,W], w [C,O,kh,kw], optional bias [O]. Output spatial
/// extents are exactly stride*H x stride*W (implicit output padding at the
/// bottom/right edge makes stride-2 stages invert two stride-2 convs).
inline Var conv2d_transposed(Var x, Var w, Var bias, std::size_t stride, std::size_t pad) {
    detail::require_same_graph(x, w, "conv2d_transposed");
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d_transposed: expected 4-d x and w");
    std::size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
    std::size_t O = ws[1], kh = ws[2], kw = ws[3];
    if (ws[0] != C)
        throw std::invalid_argument("conv2d_transposed: w " + shape_str(ws) +
                                    " does not match input channels " + std::to_string(C));
    if (stride == 0) throw std::invalid_argument("conv2d_transposed: stride must be >= 1");
    bool with_bias = bias.g != nullptr;
    if (with_bias && bias.shape() != Shape{O})
        throw std::invalid_argument("conv2d_transposed: bias shape " + shape_str(bias.shape()));

    std::size_t Ho = stride * H, Wo = stride * W;
    Tensor out({B, O, Ho, Wo});
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    if (with_bias)
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t o = 0; o < O; ++o)
                for (std::size_t i = 0; i < Ho * Wo; ++i)
                    out[(b * O + o) * Ho * Wo + i] = bias.val()[o];
    // Plain scatter-accumulate order (b, c, iy, ix, o, ky, kx): each input
    // cell distributes into the output exactly like the gradient of conv2d.
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t iy = 0; iy < H; ++iy)
                for (std::size_t ix = 0; ix < W; ++ix) {
                    double v = xv.at4(b, c, iy, ix);
                    if (v == 0.0) continue;
                    for (std::size_t o = 0; o < O; ++o) {
                        const double* w_base = wv.data() + (c * O + o) * kh * kw;
                        double* out_plane = out.data() + (b * O + o) * Ho * Wo;
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * stride + ky) -
                                                static_cast<std::ptrdiff_t>(pad);
                            if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(Ho)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * stride + kx) -
                                                    static_cast<std::ptrdiff_t>(pad);
                                if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(Wo)) continue;
                                out_plane[oy * static_cast<std::ptrdiff_t>(Wo) + ox] +=
                                    v * w_base[ky * kw + kx];
                            }
                        }
                    }
                }

    std::vector<std::size_t> ins = {x.id, w.id};
    if (with_bias) ins.push_back(bias.id);
    auto back = [B, C, H, W, O, kh, kw, Ho, Wo, stride, pad, with_bias](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        const Tensor& xv = ctx.in(0);
        const Tensor& wv = ctx.in(1);
        Tensor& gx = ctx.grad(0);
        Tensor& gw = ctx.grad(1);
        auto in_range = [&](std::size_t k, std::size_t in_extent, std::size_t out_extent,
                            std::size_t& lo, std::size_t& hi) {
            detail::conv_out_range(k, pad, stride, out_extent, in_extent, lo, hi);
        };
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
                const double* x_plane = xv.data() + (b * C + c) * H * W;
                double* gx_plane = gx.data() + (b * C + c) * H * W;
                for (std::size_t o = 0; o < O; ++o) {
                    const double* og_plane = og.data() + (b * O + o) * Ho * Wo;
                    const double* w_base = wv.data() + (c * O + o) * kh * kw;
                    double* gw_base = gw.data() + (c * O + o) * kh * kw;
                    for (std::size_t ky = 0; ky < kh; ++ky)
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            double wval = w_base[ky * kw + kx];
                            double acc = 0.0;
                            std::size_t iy_lo, iy_hi, ix_lo, ix_hi;
                            in_range(ky, H, Ho, iy_lo, iy_hi);
                            in_range(kx, W, Wo, ix_lo, ix_hi);
                            std::ptrdiff_t off_y = static_cast<std::ptrdiff_t>(ky) -
                                                   static_cast<std::ptrdiff_t>(pad);
                            std::ptrdiff_t off_x = static_cast<std::ptrdiff_t>(kx) -
                                                   static_cast<std::ptrdiff_t>(pad);
                            for (std::size_t iy = iy_lo; iy < iy_hi; ++iy) {
                                const double* xrow = x_plane + iy * W;
                                double* gxrow = gx_plane + iy * W;
                                const double* orow =
                                    og_plane + (static_cast<std::ptrdiff_t>(iy * stride) + off_y) *
                                                   static_cast<std::ptrdiff_t>(Wo);
                                for (std::size_t ix = ix_lo; ix < ix_hi; ++ix) {
                                    double go = orow[static_cast<std::ptrdiff_t>(ix * stride) + off_x];
                                    acc += go * xrow[ix];
                                    gxrow[ix] += go * wval;
                                }
                            }
                            gw_base[ky * kw + kx] += acc;
                        }
                }
            }
        if (with_bias) {
            Tensor& gb = ctx.grad(2);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t o = 0; o < O; ++o)
                    for (std::size_t i = 0; i < Ho * Wo; ++i)
                        gb[o] += og[(b * O + o) * Ho * Wo + i];
        }
    };
    return x.g->emit(std::move(out), std::move(ins), std::move(back));
}

/// Depth-to-space: [B, C*s^2, H, W] -> [B, C, sH, sW]. Channel k of a group
/// lands at spatial offset (k / s, k % s).
inline Var pixel_shuffle(Var x, std::size_t s) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("pixel_shuffle: expected 4-d input");
    if (s == 0) throw std::invalid_argument("pixel_shuffle: zero factor");
    std::size_t B = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
    if (Cin % (s * s) != 0)
        throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(Cin) +
                                    " not divisible by s^2=" + std::to_string(s * s));
    std::size_t C = Cin / (s * s);
    Tensor out({B, C, s * H, s * W});
    const Tensor& xv = x.val();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < s * H; ++y)
                for (std::size_t xw = 0; xw < s * W; ++xw)
                    out.at4(b, c, y, xw) =
                        xv.at4(b, c * s * s + (y % s) * s + (xw % s), y / s, xw / s);
    return x.g->emit(std::move(out), {x.id}, [B, C, H, W, s](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t y = 0; y < s * H; ++y)
                    for (std::size_t xw = 0; xw < s * W; ++xw)
                        gx.at4(b, c * s * s + (y % s) * s + (xw % s), y / s, xw / s) +=
                            og.at4(b, c, y, xw);
        (void)W;
    });
}

/// Space-to-depth, the exact inverse of pixel_shuffle.
inline Var pixel_unshuffle(Var x, std::size_t s) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("pixel_unshuffle: expected 4-d input");
    if (s == 0) throw std::invalid_argument("pixel_unshuffle: zero factor");
    std::size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
    if (H % s != 0 || W % s != 0)
        throw std::invalid_argument("pixel_unshuffle: spatial extents not divisible by s");
    Tensor out({B, C * s * s, H / s, W / s});
    const Tensor& xv = x.val();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t xw = 0; xw < W; ++xw)
                    out.at4(b, c * s * s + (y % s) * s + (xw % s), y / s, xw / s) =
                        xv.at4(b, c, y, xw);
    return x.g->emit(std::move(out), {x.id}, [B, C, H, W, s](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t y = 0; y < H; ++y)
                    for (std::size_t xw = 0; xw < W; ++xw)
                        gx.at4(b, c, y, xw) +=
                            og.at4(b, c * s * s + (y % s) * s + (xw % s), y / s, xw / s);
    });
}

}  // namespace edt::ad
