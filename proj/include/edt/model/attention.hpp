#pragma once

#include <cmath>

#include "edt/core/ops.hpp"
#include "edt/core/shape_ops.hpp"
#include "edt/model/config.hpp"

namespace edt::model {

/// Relative-position lookup indices for an (a, b) window: cell pair
/// (query, key) maps into a (2a-1)(2b-1)-entry table.
inline std::vector<std::size_t> relative_position_index(std::size_t a, std::size_t b) {
    std::size_t t = a * b;
    std::vector<std::size_t> idx(t * t);
    for (std::size_t q = 0; q < t; ++q)
        for (std::size_t k = 0; k < t; ++k) {
            std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(q / b) - static_cast<std::ptrdiff_t>(k / b);
            std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(q % b) - static_cast<std::ptrdiff_t>(k % b);
            idx[q * t + k] = static_cast<std::size_t>((dy + static_cast<std::ptrdiff_t>(a) - 1) *
                                                          static_cast<std::ptrdiff_t>(2 * b - 1) +
                                                      (dx + static_cast<std::ptrdiff_t>(b) - 1));
        }
    return idx;
}

inline std::size_t relative_table_entries(std::size_t a, std::size_t b) {
    return (2 * a - 1) * (2 * b - 1);
}

struct AttnWeights {
    Tensor weights;  // [num_windows, branch_heads, cells, cells]
    std::size_t win_h = 0, win_w = 0;
};

/// Windowed multi-head attention for one orientation branch.
/// q,k,v: tokens [B,H,W,Ch]; windows (a,b); softmax(QK^T/sqrt(d) + B)V.
inline ad::Var branch_attention(ad::Var q, ad::Var k, ad::Var v, std::size_t a, std::size_t b,
                                bool shifted, ad::Var bias_table, std::size_t nheads,
                                AttnWeights* record = nullptr) {
    std::size_t ch = q.shape()[3];
    if (ch % nheads != 0) throw std::invalid_argument("attention: heads do not divide channels");
    std::size_t d = ch / nheads;
    auto [qw, plan] = ad::window_partition_tokens(q, a, b, shifted);
    auto [kw, plan_k] = ad::window_partition_tokens(k, a, b, shifted);
    auto [vw, plan_v] = ad::window_partition_tokens(v, a, b, shifted);
    std::size_t nw = qw.shape()[0];  // batch * windows
    std::size_t t = plan.cells();

    auto split_heads = [&](ad::Var x) {
        x = ad::reshape(x, {nw, t, nheads, d});
        x = ad::permute(x, {0, 2, 1, 3});
        return ad::reshape(x, {nw * nheads, t, d});
    };
    ad::Var qh = split_heads(ad::scale(qw, 1.0 / std::sqrt(static_cast<double>(d))));
    ad::Var kh = split_heads(kw);
    ad::Var vh = split_heads(vw);

    ad::Var scores = ad::bmm(qh, kh, /*transpose_b=*/true);          // [nw*nh, t, t]
    scores = ad::reshape(scores, {nw, nheads, t, t});
    ad::Var bias = ad::bias_from_table(bias_table, relative_position_index(a, b), t);
    scores = ad::add_broadcast(scores, bias);
    ad::Var attn = ad::softmax(scores);
    if (record) {
        record->weights = attn.val();
        record->win_h = a;
        record->win_w = b;
    }

    ad::Var out = ad::bmm(ad::reshape(attn, {nw * nheads, t, t}), vh);  // [nw*nh, t, d]
    out = ad::reshape(out, {nw, nheads, t, d});
    out = ad::permute(out, {0, 2, 1, 3});
    out = ad::reshape(out, {nw, t, ch});
    return ad::window_reverse_tokens(out, plan);
}

struct AttentionVars {
    ad::Var qkv_w, qkv_b, proj_w, proj_b;
    ad::Var hbias, vbias;  // per-branch relative-position tables
};

struct ClMsaResult {
    ad::Var y;
    AttnWeights h_weights, v_weights;
};

/// (Shifted) crossed local multi-head attention: channel split into halves,
/// horizontal (h,w) / vertical (w,h) window attention, concat, projection.
inline ClMsaResult cl_msa(ad::Var tokens, const AttentionVars& p, std::size_t total_heads,
                          const WindowSpec& win, bool shifted, bool record_weights = false) {
    std::size_t c = tokens.shape()[3];
    if (c % 2 != 0) throw std::invalid_argument("cl_msa: channels must be even");
    if (total_heads % 2 != 0) throw std::invalid_argument("cl_msa: heads must be even");
    std::size_t half = c / 2;
    std::size_t nheads = total_heads / 2;

    ad::Var qkv = ad::linear(tokens, p.qkv_w, p.qkv_b);  // [B,H,W,3C]
    ad::Var q = ad::narrow(qkv, 3, 0, c);
    ad::Var k = ad::narrow(qkv, 3, c, c);
    ad::Var v = ad::narrow(qkv, 3, 2 * c, c);

    ClMsaResult res;
    ad::Var y1 = branch_attention(ad::narrow(q, 3, 0, half), ad::narrow(k, 3, 0, half),
                                  ad::narrow(v, 3, 0, half), win.h, win.w, shifted, p.hbias,
                                  nheads, record_weights ? &res.h_weights : nullptr);
    ad::Var y2 = branch_attention(ad::narrow(q, 3, half, half), ad::narrow(k, 3, half, half),
                                  ad::narrow(v, 3, half, half), win.w, win.h, shifted, p.vbias,
                                  nheads, record_weights ? &res.v_weights : nullptr);
    ad::Var cat = ad::concat({y1, y2}, 3);
    res.y = ad::linear(cat, p.proj_w, p.proj_b);
    return res;
}

/// Eq.-5 cost of one (S)CL-MSA module on an H x W feature map.
inline std::uint64_t attention_macs(std::size_t win_h, std::size_t win_w, std::size_t H,
                                    std::size_t W, std::size_t C) {
    std::uint64_t hw = static_cast<std::uint64_t>(H) * W;
    return 4 * hw * C * C + 2 * static_cast<std::uint64_t>(win_h) * win_w * hw * C;
}

}  // namespace edt::model
