#pragma once

#include <numeric>

#include "edt/core/graph.hpp"

namespace edt::ad {

inline Var reshape(Var x, Shape s) {
    Tensor out = x.val().reshaped(std::move(s));
    Shape orig = x.shape();
    return x.g->emit(std::move(out), {x.id}, [orig](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t i = 0; i < og.size(); ++i) gx[i] += og[i];
    });
}

namespace detail {

inline std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size() - 1; i-- > 0;) st[i] = st[i + 1] * s[i + 1];
    return st;
}

// Maps every linear index of the permuted output to its source index.
inline std::vector<std::size_t> permute_index_map(const Shape& in_shape,
                                                  const std::vector<std::size_t>& perm) {
    Shape out_shape(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = in_shape[perm[i]];
    auto in_strides = row_major_strides(in_shape);
    std::size_t n = shape_numel(in_shape);
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> coord(perm.size(), 0);
    for (std::size_t idx = 0; idx < n; ++idx) {
        std::size_t src = 0;
        for (std::size_t i = 0; i < perm.size(); ++i) src += coord[i] * in_strides[perm[i]];
        map[idx] = src;
        for (std::size_t i = perm.size(); i-- > 0;) {
            if (++coord[i] < out_shape[i]) break;
            coord[i] = 0;
        }
    }
    return map;
}

// Reflection index without edge repetition, folded for pads wider than the
// extent (needed when tiny inputs are padded up to a whole window multiple).
inline std::size_t reflect_index(std::ptrdiff_t j, std::size_t n) {
    if (n == 1) return 0;
    std::ptrdiff_t m = static_cast<std::ptrdiff_t>(n);
    while (j < 0 || j >= m) {
        if (j < 0) j = -j;
        if (j >= m) j = 2 * m - 2 - j;
    }
    return static_cast<std::size_t>(j);
}

}  // namespace detail

inline Var permute(Var x, const std::vector<std::size_t>& perm) {
    const Shape& xs = x.shape();
    if (perm.size() != xs.size()) throw std::invalid_argument("permute: rank mismatch");
    std::vector<bool> seen(perm.size(), false);
    for (std::size_t p : perm) {
        if (p >= perm.size() || seen[p]) throw std::invalid_argument("permute: invalid permutation");
        seen[p] = true;
    }
    Shape os(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) os[i] = xs[perm[i]];
    auto map = detail::permute_index_map(xs, perm);
    Tensor out(os);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.val()[map[i]];
    return x.g->emit(std::move(out), {x.id}, [map](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t i = 0; i < og.size(); ++i) gx[map[i]] += og[i];
    });
}

/// Slice [start, start+len) along an axis.
inline Var narrow(Var x, std::size_t axis, std::size_t start, std::size_t len) {
    const Shape& xs = x.shape();
    if (axis >= xs.size() || start + len > xs[axis] || len == 0)
        throw std::invalid_argument("narrow: bad slice [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") of axis " +
                                    std::to_string(axis) + " in " + shape_str(xs));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
    for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
    std::size_t ax = xs[axis];
    Shape os(xs);
    os[axis] = len;
    Tensor out(os);
    for (std::size_t ou = 0; ou < outer; ++ou)
        for (std::size_t j = 0; j < len; ++j)
            for (std::size_t in = 0; in < inner; ++in)
                out[(ou * len + j) * inner + in] = x.val()[(ou * ax + start + j) * inner + in];
    return x.g->emit(std::move(out), {x.id}, [outer, inner, ax, start, len](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t ou = 0; ou < outer; ++ou)
            for (std::size_t j = 0; j < len; ++j)
                for (std::size_t in = 0; in < inner; ++in)
                    gx[(ou * ax + start + j) * inner + in] += og[(ou * len + j) * inner + in];
    });
}

inline Var concat(const std::vector<Var>& xs, std::size_t axis) {
    if (xs.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& s0 = xs[0].shape();
    if (axis >= s0.size()) throw std::invalid_argument("concat: bad axis");
    std::size_t total = 0;
    for (const Var& v : xs) {
        detail::require_same_graph(xs[0], v, "concat");
        const Shape& s = v.shape();
        if (s.size() != s0.size()) throw std::invalid_argument("concat: rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != axis && s[i] != s0[i])
                throw std::invalid_argument("concat: shape mismatch " + shape_str(s) + " vs " +
                                            shape_str(s0));
        total += s[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
    for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
    Shape os(s0);
    os[axis] = total;
    Tensor out(os);
    std::vector<std::size_t> extents;
    std::size_t off = 0;
    for (const Var& v : xs) {
        std::size_t ext = v.shape()[axis];
        extents.push_back(ext);
        for (std::size_t ou = 0; ou < outer; ++ou)
            for (std::size_t j = 0; j < ext; ++j)
                for (std::size_t in = 0; in < inner; ++in)
                    out[(ou * total + off + j) * inner + in] = v.val()[(ou * ext + j) * inner + in];
        off += ext;
    }
    std::vector<std::size_t> ids;
    for (const Var& v : xs) ids.push_back(v.id);
    return xs[0].g->emit(std::move(out), std::move(ids), [outer, inner, total, extents](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        std::size_t off = 0;
        for (std::size_t k = 0; k < extents.size(); ++k) {
            Tensor& gk = ctx.grad(k);
            std::size_t ext = extents[k];
            for (std::size_t ou = 0; ou < outer; ++ou)
                for (std::size_t j = 0; j < ext; ++j)
                    for (std::size_t in = 0; in < inner; ++in)
                        gk[(ou * ext + j) * inner + in] += og[(ou * total + off + j) * inner + in];
            off += ext;
        }
    });
}

enum class Layout { BCHW, BHWC };

namespace detail {
inline void spatial_axes(Layout l, std::size_t& ha, std::size_t& wa) {
    if (l == Layout::BCHW) {
        ha = 2;
        wa = 3;
    } else {
        ha = 1;
        wa = 2;
    }
}
}  // namespace detail

/// Cyclic shift of the two spatial axes: content moves by (dy, dx).
inline Var roll_hw(Var x, std::ptrdiff_t dy, std::ptrdiff_t dx, Layout layout) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("roll_hw: expected 4-d input");
    std::size_t ha, wa;
    detail::spatial_axes(layout, ha, wa);
    std::size_t H = xs[ha], W = xs[wa];
    auto m = [](std::ptrdiff_t v, std::size_t n) {
        std::ptrdiff_t r = v % static_cast<std::ptrdiff_t>(n);
        return static_cast<std::size_t>(r < 0 ? r + static_cast<std::ptrdiff_t>(n) : r);
    };
    std::size_t sy = m(dy, H), sx = m(dx, W);
    auto strides = detail::row_major_strides(xs);
    std::size_t n = x.size();
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> coord(4, 0);
    for (std::size_t idx = 0; idx < n; ++idx) {
        std::vector<std::size_t> src = coord;
        src[ha] = (coord[ha] + H - sy) % H;
        src[wa] = (coord[wa] + W - sx) % W;
        map[idx] = src[0] * strides[0] + src[1] * strides[1] + src[2] * strides[2] + src[3] * strides[3];
        for (std::size_t i = 4; i-- > 0;) {
            if (++coord[i] < xs[i]) break;
            coord[i] = 0;
        }
    }
    Tensor out(xs);
    for (std::size_t i = 0; i < n; ++i) out[i] = x.val()[map[i]];
    return x.g->emit(std::move(out), {x.id}, [map](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t i = 0; i < og.size(); ++i) gx[map[i]] += og[i];
    });
}

/// Reflective padding (no edge repetition) of the two spatial axes.
inline Var reflect_pad_hw(Var x, std::size_t top, std::size_t bottom, std::size_t left,
                          std::size_t right, Layout layout) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("reflect_pad_hw: expected 4-d input");
    if (top == 0 && bottom == 0 && left == 0 && right == 0) return x;
    std::size_t ha, wa;
    detail::spatial_axes(layout, ha, wa);
    std::size_t H = xs[ha], W = xs[wa];
    Shape os(xs);
    os[ha] = H + top + bottom;
    os[wa] = W + left + right;
    auto in_strides = detail::row_major_strides(xs);
    std::size_t n = shape_numel(os);
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> coord(4, 0);
    for (std::size_t idx = 0; idx < n; ++idx) {
        std::vector<std::size_t> src = coord;
        src[ha] = detail::reflect_index(static_cast<std::ptrdiff_t>(coord[ha]) -
                                        static_cast<std::ptrdiff_t>(top), H);
        src[wa] = detail::reflect_index(static_cast<std::ptrdiff_t>(coord[wa]) -
                                        static_cast<std::ptrdiff_t>(left), W);
        map[idx] =
            src[0] * in_strides[0] + src[1] * in_strides[1] + src[2] * in_strides[2] + src[3] * in_strides[3];
        for (std::size_t i = 4; i-- > 0;) {
            if (++coord[i] < os[i]) break;
            coord[i] = 0;
        }
    }
    Tensor out(os);
    for (std::size_t i = 0; i < n; ++i) out[i] = x.val()[map[i]];
    return x.g->emit(std::move(out), {x.id}, [map](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t i = 0; i < og.size(); ++i) gx[map[i]] += og[i];
    });
}

/// Spatial crop to [top, top+h) x [left, left+w).
inline Var crop_hw(Var x, std::size_t top, std::size_t left, std::size_t h, std::size_t w,
                   Layout layout) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("crop_hw: expected 4-d input");
    std::size_t ha, wa;
    detail::spatial_axes(layout, ha, wa);
    if (top + h > xs[ha] || left + w > xs[wa])
        throw std::invalid_argument("crop_hw: window exceeds input " + shape_str(xs));
    if (top == 0 && left == 0 && h == xs[ha] && w == xs[wa]) return x;
    Var r = narrow(x, ha, top, h);
    return narrow(r, wa, left, w);
}

// ---- window partition / reverse ----

/// Geometry of one partition call; carries everything the reverse map and
/// the diagnostics need.
struct WindowPlan {
    std::size_t batch = 0, channels = 0;
    std::size_t h = 0, w = 0;    // original spatial extents
    std::size_t hp = 0, wp = 0;  // after padding to window multiples
    std::size_t win_h = 0, win_w = 0;
    bool shifted = false;
    std::ptrdiff_t shift_y = 0, shift_x = 0;  // applied pre-partition roll is (-shift_y, -shift_x)
    std::size_t num_windows() const { return (hp / win_h) * (wp / win_w); }
    std::size_t cells() const { return win_h * win_w; }
};

namespace detail {

// [B, Hp, Wp, C] -> [B*nh*nw, a*b, C]; windows batch-major then row-major
// over the window grid, cells row-major inside a window.
inline Var window_split_tokens(Var x, std::size_t a, std::size_t b) {
    const Shape& xs = x.shape();
    std::size_t B = xs[0], H = xs[1], W = xs[2], C = xs[3];
    std::size_t nh = H / a, nw = W / b;
    Tensor out({B * nh * nw, a * b, C});
    const Tensor& xv = x.val();
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t wy = 0; wy < nh; ++wy)
            for (std::size_t wx = 0; wx < nw; ++wx) {
                std::size_t win = (bi * nh + wy) * nw + wx;
                for (std::size_t dy = 0; dy < a; ++dy)
                    for (std::size_t dx = 0; dx < b; ++dx) {
                        std::size_t t = dy * b + dx;
                        const double* src = xv.data() + (((bi * H + wy * a + dy) * W) + wx * b + dx) * C;
                        double* dst = out.data() + (win * a * b + t) * C;
                        for (std::size_t c = 0; c < C; ++c) dst[c] = src[c];
                    }
            }
    return x.g->emit(std::move(out), {x.id}, [B, H, W, C, a, b, nh, nw](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t wy = 0; wy < nh; ++wy)
                for (std::size_t wx = 0; wx < nw; ++wx) {
                    std::size_t win = (bi * nh + wy) * nw + wx;
                    for (std::size_t dy = 0; dy < a; ++dy)
                        for (std::size_t dx = 0; dx < b; ++dx) {
                            std::size_t t = dy * b + dx;
                            double* dst = gx.data() + (((bi * H + wy * a + dy) * W) + wx * b + dx) * C;
                            const double* src = og.data() + (win * a * b + t) * C;
                            for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                        }
                }
    });
}

inline Var window_merge_tokens(Var wins, std::size_t B, std::size_t H, std::size_t W,
                               std::size_t a, std::size_t b) {
    const Shape& s = wins.shape();
    std::size_t nh = H / a, nw = W / b;
    std::size_t C = s[2];
    if (s[0] != B * nh * nw || s[1] != a * b)
        throw std::invalid_argument("window_merge: geometry mismatch " + shape_str(s));
    Tensor out({B, H, W, C});
    const Tensor& xv = wins.val();
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t wy = 0; wy < nh; ++wy)
            for (std::size_t wx = 0; wx < nw; ++wx) {
                std::size_t win = (bi * nh + wy) * nw + wx;
                for (std::size_t dy = 0; dy < a; ++dy)
                    for (std::size_t dx = 0; dx < b; ++dx) {
                        std::size_t t = dy * b + dx;
                        const double* src = xv.data() + (win * a * b + t) * C;
                        double* dst = out.data() + (((bi * H + wy * a + dy) * W) + wx * b + dx) * C;
                        for (std::size_t c = 0; c < C; ++c) dst[c] = src[c];
                    }
            }
    return wins.g->emit(std::move(out), {wins.id}, [B, H, W, C, a, b, nh, nw](BackCtx& ctx) {
        const Tensor& og = ctx.out_grad();
        Tensor& gx = ctx.grad(0);
        for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t wy = 0; wy < nh; ++wy)
                for (std::size_t wx = 0; wx < nw; ++wx) {
                    std::size_t win = (bi * nh + wy) * nw + wx;
                    for (std::size_t dy = 0; dy < a; ++dy)
                        for (std::size_t dx = 0; dx < b; ++dx) {
                            std::size_t t = dy * b + dx;
                            double* dst = gx.data() + (win * a * b + t) * C;
                            const double* src = og.data() + (((bi * H + wy * a + dy) * W) + wx * b + dx) * C;
                            for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                        }
                }
    });
}

}  // namespace detail

/// Partition tokens [B,H,W,C] into (a,b) windows -> [nW, a*b, C]. Pads
/// reflectively to the next window multiple; when shifted, applies a cyclic
/// shift of (-floor(a/2), -floor(b/2)) before partitioning.
inline std::pair<Var, WindowPlan> window_partition_tokens(Var x, std::size_t a, std::size_t b,
                                                          bool shifted) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw std::invalid_argument("window_partition: expected 4-d tokens");
    if (a == 0 || b == 0) throw std::invalid_argument("window_partition: zero-sized window");
    WindowPlan plan;
    plan.batch = xs[0];
    plan.h = xs[1];
    plan.w = xs[2];
    plan.channels = xs[3];
    plan.win_h = a;
    plan.win_w = b;
    plan.hp = (plan.h + a - 1) / a * a;
    plan.wp = (plan.w + b - 1) / b * b;
    plan.shifted = shifted;
    plan.shift_y = shifted ? static_cast<std::ptrdiff_t>(a / 2) : 0;
    plan.shift_x = shifted ? static_cast<std::ptrdiff_t>(b / 2) : 0;

    Var t = reflect_pad_hw(x, 0, plan.hp - plan.h, 0, plan.wp - plan.w, Layout::BHWC);
    if (shifted) t = roll_hw(t, -plan.shift_y, -plan.shift_x, Layout::BHWC);
    return {detail::window_split_tokens(t, a, b), plan};
}

/// Exact inverse of window_partition_tokens (un-partition, un-shift, crop).
inline Var window_reverse_tokens(Var wins, const WindowPlan& plan) {
    Var t = detail::window_merge_tokens(wins, plan.batch, plan.hp, plan.wp, plan.win_h, plan.win_w);
    if (plan.shifted) t = roll_hw(t, plan.shift_y, plan.shift_x, Layout::BHWC);
    return crop_hw(t, 0, 0, plan.h, plan.w, Layout::BHWC);
}

/// Spec surface on [B,C,H,W] feature maps.
inline std::pair<Var, WindowPlan> window_partition(Var x, std::size_t a, std::size_t b,
                                                   bool shifted) {
    if (x.shape().size() != 4) throw std::invalid_argument("window_partition: expected 4-d input");
    return window_partition_tokens(permute(x, {0, 2, 3, 1}), a, b, shifted);
}

inline Var window_reverse(Var wins, const WindowPlan& plan) {
    return permute(window_reverse_tokens(wins, plan), {0, 3, 1, 2});
}

}  // namespace edt::ad
