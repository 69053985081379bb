#pragma once

#include <functional>
#include <unordered_map>

#include "edt/core/rng.hpp"
#include "edt/model/blocks.hpp"

namespace edt::model {

/// Named registry of trainable tensors; the single owner of model state.
class ParamStore {
public:
    std::size_t add(std::string name, Tensor t) {
        if (index_.count(name)) throw std::invalid_argument("params: duplicate name " + name);
        index_[name] = names_.size();
        names_.push_back(std::move(name));
        values_.push_back(std::move(t));
        return names_.size() - 1;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t index(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("params: unknown name " + name);
        return it->second;
    }

    std::size_t count() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    const Tensor& value(std::size_t i) const { return values_[i]; }
    Tensor& value(std::size_t i) { return values_[i]; }
    const Tensor& value(const std::string& n) const { return values_[index(n)]; }
    Tensor& value(const std::string& n) { return values_[index(n)]; }

    std::uint64_t scalar_count(const std::string& prefix = "") const {
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i].rfind(prefix, 0) == 0) n += values_[i].size();
        return n;
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Multi-encoder, multi-decoder, shared-body model: one transformer body,
/// disjoint per-task encoder/decoder parameter sets.
struct EdtModel {
    ModelConfig config;
    ParamStore params;

    const TaskSpec& task(const std::string& id) const {
        for (const TaskSpec& t : config.tasks)
            if (t.id() == id) return t;
        throw std::invalid_argument("model: unknown task id '" + id + "'");
    }
};

namespace detail {

inline void init_conv(ParamStore& ps, rng::Stream& r, const std::string& name, std::size_t out_c,
                      std::size_t in_c, std::size_t k) {
    double stddev = std::sqrt(2.0 / static_cast<double>(in_c * k * k));
    ps.add(name + ".w", rng::normal_tensor({out_c, in_c, k, k}, stddev, r));
    ps.add(name + ".b", Tensor::zeros({out_c}));
}

inline void init_tconv(ParamStore& ps, rng::Stream& r, const std::string& name, std::size_t in_c,
                       std::size_t out_c, std::size_t k) {
    double stddev = std::sqrt(2.0 / static_cast<double>(in_c * k * k));
    ps.add(name + ".w", rng::normal_tensor({in_c, out_c, k, k}, stddev, r));
    ps.add(name + ".b", Tensor::zeros({out_c}));
}

inline void init_linear(ParamStore& ps, rng::Stream& r, const std::string& name, std::size_t in_c,
                        std::size_t out_c) {
    ps.add(name + ".w", rng::normal_tensor({in_c, out_c}, 0.02, r));
    ps.add(name + ".b", Tensor::zeros({out_c}));
}

inline void init_layernorm(ParamStore& ps, const std::string& name, std::size_t c) {
    ps.add(name + ".gamma", Tensor::ones({c}));
    ps.add(name + ".beta", Tensor::zeros({c}));
}

}  // namespace detail

inline std::string block_prefix(std::size_t stage, std::size_t block) {
    return "body.s" + std::to_string(stage) + ".b" + std::to_string(block) + ".";
}

inline EdtModel build_model(const ModelConfig& config, std::uint64_t seed = 0) {
    config.validate();
    EdtModel m;
    m.config = config;
    rng::Stream r(rng::mix(seed, 0x6d6f64656c));  // independent init stream per seed

    std::size_t c = config.channels, q = c / 4, h = c / 2;
    std::size_t ec = config.ffn_expansion * c;
    std::size_t nh = config.branch_heads();

    for (const TaskSpec& t : config.tasks) {
        std::string p = "enc." + t.id() + ".";
        detail::init_conv(m.params, r, p + "conv1", q, 3, 3);
        detail::init_conv(m.params, r, p + "conv2", h, q, 3);
        detail::init_conv(m.params, r, p + "conv3", c, h, 3);
    }

    for (std::size_t s = 0; s < config.stages; ++s) {
        for (std::size_t b = 0; b < config.blocks_per_stage; ++b) {
            std::string p = block_prefix(s, b);
            detail::init_layernorm(m.params, p + "ln1", c);
            detail::init_linear(m.params, r, p + "attn.qkv", c, 3 * c);
            detail::init_linear(m.params, r, p + "attn.proj", c, c);
            m.params.add(p + "attn.hbias",
                         rng::normal_tensor(
                             {nh, relative_table_entries(config.window.h, config.window.w)}, 0.02, r));
            m.params.add(p + "attn.vbias",
                         rng::normal_tensor(
                             {nh, relative_table_entries(config.window.w, config.window.h)}, 0.02, r));
            detail::init_layernorm(m.params, p + "ln2", c);
            detail::init_linear(m.params, r, p + "ffn.fc1", c, ec);
            m.params.add(p + "ffn.dw.w",
                         rng::normal_tensor({ec, 1, 5, 5}, std::sqrt(2.0 / 25.0), r));
            m.params.add(p + "ffn.dw.b", Tensor::zeros({ec}));
            detail::init_linear(m.params, r, p + "ffn.fc2", ec, c);
        }
        detail::init_conv(m.params, r, "body.s" + std::to_string(s) + ".conv", c, c, 3);
    }

    for (const TaskSpec& t : config.tasks) {
        std::string p = "dec." + t.id() + ".";
        if (t.high_res()) {
            detail::init_tconv(m.params, r, p + "conv1", c, h, 3);
            detail::init_tconv(m.params, r, p + "conv2", h, q, 3);
        } else {
            detail::init_conv(m.params, r, p + "conv1", h, c, 3);
            detail::init_conv(m.params, r, p + "conv2", q, h, 3);
            if (t.scale() == 4) {
                detail::init_conv(m.params, r, p + "up0", q * 4, q, 3);
                detail::init_conv(m.params, r, p + "up1", q * 4, q, 3);
            } else {
                detail::init_conv(m.params, r, p + "up0",
                                  q * static_cast<std::size_t>(t.scale()) * t.scale(), q, 3);
            }
        }
        detail::init_conv(m.params, r, p + "tail", 3, q, 3);
    }
    return m;
}

// ---- forward ----

struct TraceEntry {
    std::string label;
    Tensor value;
};

struct AttnRecord {
    std::size_t stage = 0, block = 0;
    char branch = 'h';
    bool shifted = false;
    AttnWeights weights;
};

/// Per-call capture buffers; never shared between concurrent forwards.
struct ForwardCapture {
    bool want_trace = false;
    bool want_attn = false;
    std::function<void(AttnRecord&&)> attn_sink;  // streaming alternative to `attn`
    std::vector<TraceEntry> entries;
    std::vector<AttnRecord> attn;

    void trace(const std::string& label, ad::Var v) {
        if (want_trace) entries.push_back({label, v.val()});
    }
    void record(AttnRecord&& rec) {
        if (attn_sink)
            attn_sink(std::move(rec));
        else
            attn.push_back(std::move(rec));
    }
};

/// Parameter leaves bound onto a graph for one forward pass, aligned with
/// the store's order.
struct BoundParams {
    const EdtModel* model = nullptr;
    std::vector<ad::Var> vars;

    ad::Var operator[](const std::string& name) const {
        return vars[model->params.index(name)];
    }
};

inline BoundParams bind_params(ad::Graph& g, const EdtModel& m) {
    BoundParams bp;
    bp.model = &m;
    bp.vars.reserve(m.params.count());
    for (std::size_t i = 0; i < m.params.count(); ++i) bp.vars.push_back(g.param(m.params.value(i)));
    return bp;
}

namespace detail {

struct StageIo {
    ad::Var x;  // BCHW
};

inline ad::Var run_stage(ad::Var x, const BoundParams& bp, const ModelConfig& cfg,
                         std::size_t stage, ForwardCapture* cap) {
    ad::Var t = ad::permute(x, {0, 2, 3, 1});
    for (std::size_t b = 0; b < cfg.blocks_per_stage; ++b) {
        std::string p = block_prefix(stage, b);
        BlockVars bv;
        bv.ln1_g = bp[p + "ln1.gamma"];
        bv.ln1_b = bp[p + "ln1.beta"];
        bv.attn.qkv_w = bp[p + "attn.qkv.w"];
        bv.attn.qkv_b = bp[p + "attn.qkv.b"];
        bv.attn.proj_w = bp[p + "attn.proj.w"];
        bv.attn.proj_b = bp[p + "attn.proj.b"];
        bv.attn.hbias = bp[p + "attn.hbias"];
        bv.attn.vbias = bp[p + "attn.vbias"];
        bv.ln2_g = bp[p + "ln2.gamma"];
        bv.ln2_b = bp[p + "ln2.beta"];
        bv.ffn.fc1_w = bp[p + "ffn.fc1.w"];
        bv.ffn.fc1_b = bp[p + "ffn.fc1.b"];
        bv.ffn.dw_w = bp[p + "ffn.dw.w"];
        bv.ffn.dw_b = bp[p + "ffn.dw.b"];
        bv.ffn.fc2_w = bp[p + "ffn.fc2.w"];
        bv.ffn.fc2_b = bp[p + "ffn.fc2.b"];

        bool shifted = (b % 2) == 1;  // blocks alternate plain/shifted
        bool want_w = cap && (cap->want_attn || cap->attn_sink);
        BlockResult br = transformer_block(t, bv, cfg.heads, cfg.window, shifted, want_w);
        if (cap) {
            std::string lp = "s" + std::to_string(stage) + ".b" + std::to_string(b);
            cap->trace(lp + ".attn", br.post_attn);
            cap->trace(lp + ".ffn", br.out);
            if (want_w) {
                cap->record({stage, b, 'h', shifted, std::move(br.msa.h_weights)});
                cap->record({stage, b, 'v', shifted, std::move(br.msa.v_weights)});
            }
        }
        t = br.out;
    }
    ad::Var xb = ad::permute(t, {0, 3, 1, 2});
    std::string sp = "body.s" + std::to_string(stage) + ".conv";
    ad::Var xc = ad::conv2d(xb, bp[sp + ".w"], bp[sp + ".b"], 1, 1);
    return ad::add(x, xc);  // stage-level global connection
}

}  // namespace detail

/// Restoration forward pass over an already-bound input node. Input
/// [B,3,H,W] is reflect-padded to the path's required multiple and the
/// output cropped back; SR outputs are scale * input extents, other tasks
/// preserve extents.
inline ad::Var forward(ad::Graph& g, const EdtModel& m, const BoundParams& bp,
                       const std::string& task_id, ad::Var x, ForwardCapture* cap = nullptr) {
    const TaskSpec& t = m.task(task_id);
    if (x.shape().size() != 4 || x.shape()[1] != 3)
        throw std::invalid_argument("forward: expected input [B,3,H,W], got " +
                                    shape_str(x.shape()));
    std::size_t H = x.shape()[2], W = x.shape()[3];
    std::size_t mult = m.config.input_multiple(t);
    std::size_t Hp = (H + mult - 1) / mult * mult;
    std::size_t Wp = (W + mult - 1) / mult * mult;

    if (Hp != H || Wp != W) x = ad::reflect_pad_hw(x, 0, Hp - H, 0, Wp - W, ad::Layout::BCHW);

    std::size_t stride = t.high_res() ? 2 : 1;
    std::string ep = "enc." + task_id + ".";
    ad::Var e1 = ad::gelu(ad::conv2d(x, bp[ep + "conv1.w"], bp[ep + "conv1.b"], 1, 1));
    if (cap) cap->trace("head.conv1", e1);
    ad::Var e2 = ad::gelu(ad::conv2d(e1, bp[ep + "conv2.w"], bp[ep + "conv2.b"], stride, 1));
    ad::Var e3 = ad::conv2d(e2, bp[ep + "conv3.w"], bp[ep + "conv3.b"], stride, 1);
    if (cap) cap->trace("head.out", e3);

    ad::Var body = e3;
    for (std::size_t s = 0; s < m.config.stages; ++s)
        body = detail::run_stage(body, bp, m.config, s, cap);

    std::string dp = "dec." + task_id + ".";
    ad::Var d0 = ad::add(body, e3);
    ad::Var d1, d2;
    if (t.high_res()) {
        d1 = ad::add(ad::gelu(ad::conv2d_transposed(d0, bp[dp + "conv1.w"], bp[dp + "conv1.b"], 2, 1)), e2);
        d2 = ad::add(ad::gelu(ad::conv2d_transposed(d1, bp[dp + "conv2.w"], bp[dp + "conv2.b"], 2, 1)), e1);
    } else {
        d1 = ad::add(ad::gelu(ad::conv2d(d0, bp[dp + "conv1.w"], bp[dp + "conv1.b"], 1, 1)), e2);
        d2 = ad::add(ad::gelu(ad::conv2d(d1, bp[dp + "conv2.w"], bp[dp + "conv2.b"], 1, 1)), e1);
    }
    if (cap) cap->trace("tail.pre", d2);

    ad::Var u = d2;
    if (!t.high_res()) {
        if (t.scale() == 4) {
            u = ad::gelu(ad::pixel_shuffle(ad::conv2d(u, bp[dp + "up0.w"], bp[dp + "up0.b"], 1, 1), 2));
            u = ad::gelu(ad::pixel_shuffle(ad::conv2d(u, bp[dp + "up1.w"], bp[dp + "up1.b"], 1, 1), 2));
        } else {
            u = ad::gelu(ad::pixel_shuffle(
                ad::conv2d(u, bp[dp + "up0.w"], bp[dp + "up0.b"], 1, 1),
                static_cast<std::size_t>(t.scale())));
        }
    }
    ad::Var out = ad::conv2d(u, bp[dp + "tail.w"], bp[dp + "tail.b"], 1, 1);

    std::size_t sc = static_cast<std::size_t>(t.scale());
    out = ad::crop_hw(out, 0, 0, sc * H, sc * W, ad::Layout::BCHW);
    if (cap) cap->trace("tail.out", out);
    return out;
}

inline ad::Var forward(ad::Graph& g, const EdtModel& m, const BoundParams& bp,
                       const std::string& task_id, const Tensor& input,
                       ForwardCapture* cap = nullptr) {
    return forward(g, m, bp, task_id, g.input(input), cap);
}

/// Inference convenience: builds a throwaway graph.
inline Tensor run_forward(const EdtModel& m, const std::string& task_id, const Tensor& input,
                          ForwardCapture* cap = nullptr) {
    ad::Graph g;
    BoundParams bp = bind_params(g, m);
    return forward(g, m, bp, task_id, input, cap).val();
}

/// Exact count of scalar trainable parameters (optionally under a prefix).
inline std::uint64_t count_params(const EdtModel& m, const std::string& prefix = "") {
    return m.params.scalar_count(prefix);
}

}  // namespace edt::model
