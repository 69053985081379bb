#pragma once

#include "edt/core/conv.hpp"
#include "edt/model/attention.hpp"

namespace edt::model {

struct FfnVars {
    ad::Var fc1_w, fc1_b;
    ad::Var dw_w, dw_b;  // 5x5 depthwise on the expanded channels
    ad::Var fc2_w, fc2_b;
};

/// Anti-blocking FFN: X' = Act(Linear(X)); out = Linear(Act(DwConv5x5(X'))).
inline ad::Var anti_ffn(ad::Var tokens, const FfnVars& p) {
    ad::Var x1 = ad::gelu(ad::linear(tokens, p.fc1_w, p.fc1_b));
    std::size_t ec = x1.shape()[3];
    ad::Var xc = ad::permute(x1, {0, 3, 1, 2});
    ad::Var dw = ad::conv2d(xc, p.dw_w, p.dw_b, /*stride=*/1, /*pad=*/2, /*groups=*/ec);
    ad::Var x2 = ad::gelu(ad::permute(dw, {0, 2, 3, 1}));
    return ad::linear(x2, p.fc2_w, p.fc2_b);
}

struct BlockVars {
    ad::Var ln1_g, ln1_b;
    AttentionVars attn;
    ad::Var ln2_g, ln2_b;
    FfnVars ffn;
};

struct BlockResult {
    ad::Var post_attn;  // x + (S)CL-MSA(LN(x))
    ad::Var out;        // post_attn + AntiFFN(LN(post_attn))
    ClMsaResult msa;
};

/// Pre-LN transformer block on tokens [B,H,W,C].
inline BlockResult transformer_block(ad::Var tokens, const BlockVars& p, std::size_t heads,
                                     const WindowSpec& win, bool shifted,
                                     bool record_weights = false) {
    BlockResult r;
    ad::Var n1 = ad::layernorm(tokens, p.ln1_g, p.ln1_b);
    r.msa = cl_msa(n1, p.attn, heads, win, shifted, record_weights);
    r.post_attn = ad::add(tokens, r.msa.y);
    ad::Var n2 = ad::layernorm(r.post_attn, p.ln2_g, p.ln2_b);
    r.out = ad::add(r.post_attn, anti_ffn(n2, p.ffn));
    return r;
}

}  // namespace edt::model
