#pragma once

#include <chrono>
#include <functional>

#include "edt/data/patches.hpp"
#include "edt/model/counting.hpp"
#include "edt/train/metrics.hpp"
#include "edt/train/optimizer.hpp"

namespace edt::train {

// ---- checkpoints ----

/// FNV-1a over the canonical config JSON, folded to 53 bits so it survives
/// the f64 container entries exactly.
inline std::uint64_t config_hash(const model::ModelConfig& cfg) {
    nlohmann::json j = cfg;
    std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h & ((1ULL << 53) - 1);
}

inline void save_checkpoint(const std::string& path, const model::EdtModel& m,
                            const AdamState* adam, std::uint64_t iter) {
    std::vector<io::Entry> entries;
    for (std::size_t i = 0; i < m.params.count(); ++i)
        entries.push_back({"param." + m.params.name(i), m.params.value(i)});
    if (adam) {
        for (std::size_t i = 0; i < m.params.count(); ++i) {
            entries.push_back({"adam.m." + m.params.name(i), adam->m[i]});
            entries.push_back({"adam.v." + m.params.name(i), adam->v[i]});
        }
        entries.push_back({"meta.adam_t", Tensor::scalar(static_cast<double>(adam->t))});
    }
    entries.push_back({"meta.iter", Tensor::scalar(static_cast<double>(iter))});
    entries.push_back(
        {"meta.config_hash", Tensor::scalar(static_cast<double>(config_hash(m.config)))});
    io::write_container(path, entries);
}

struct Checkpoint {
    std::map<std::string, Tensor> entries;
    std::uint64_t iter = 0;

    bool has(const std::string& k) const { return entries.count(k) != 0; }
    const Tensor& at(const std::string& k) const {
        auto it = entries.find(k);
        if (it == entries.end()) throw io::IoError("checkpoint: missing entry " + k);
        return it->second;
    }
};

inline Checkpoint load_checkpoint(const std::string& path) {
    Checkpoint c;
    c.entries = io::read_container_map(path);
    if (c.has("meta.iter")) c.iter = static_cast<std::uint64_t>(c.at("meta.iter")[0]);
    return c;
}

inline void require_matching_config(const Checkpoint& c, const model::ModelConfig& cfg) {
    if (!c.has("meta.config_hash")) throw io::IoError("checkpoint: missing config hash");
    if (static_cast<std::uint64_t>(c.at("meta.config_hash")[0]) != config_hash(cfg))
        throw std::invalid_argument("checkpoint: config hash mismatch (different architecture?)");
}

/// Restores every parameter of the model from "param.*" entries.
inline void restore_model(model::EdtModel& m, const Checkpoint& c) {
    for (std::size_t i = 0; i < m.params.count(); ++i) {
        const Tensor& v = c.at("param." + m.params.name(i));
        if (!v.same_shape(m.params.value(i)))
            throw io::IoError("checkpoint: shape mismatch for " + m.params.name(i));
        m.params.value(i) = v;
    }
}

inline AdamState restore_adam(const model::EdtModel& m, const Checkpoint& c) {
    AdamState st = AdamState::init(m.params);
    if (!c.has("meta.adam_t")) return st;
    st.t = static_cast<std::uint64_t>(c.at("meta.adam_t")[0]);
    for (std::size_t i = 0; i < m.params.count(); ++i) {
        st.m[i] = c.at("adam.m." + m.params.name(i));
        st.v[i] = c.at("adam.v." + m.params.name(i));
    }
    return st;
}

// ---- training loops ----

struct LogRecord {
    std::uint64_t iter = 0;
    std::string task;
    double loss = 0.0;
    double lr = 0.0;
    double wallclock = 0.0;  // seconds since loop start
};

using LogSink = std::function<void(const LogRecord&)>;

inline void validate_regime(const TrainConfig& tc, const model::ModelConfig& mc) {
    std::size_t kinds = 0;
    bool seen[3] = {false, false, false};
    for (const model::TaskSpec& t : mc.tasks) {
        std::size_t k = static_cast<std::size_t>(t.kind);
        if (!seen[k]) {
            seen[k] = true;
            ++kinds;
        }
    }
    switch (tc.regime) {
        case Regime::Single:
            if (mc.tasks.size() != 1)
                throw std::invalid_argument("train: single regime needs exactly one task");
            break;
        case Regime::MultiRelated:
            if (mc.tasks.size() < 2 || kinds != 1)
                throw std::invalid_argument(
                    "train: multi_related regime needs >=2 tasks of one kind");
            break;
        case Regime::MultiUnrelated:
            if (mc.tasks.size() < 2 || kinds < 2)
                throw std::invalid_argument(
                    "train: multi_unrelated regime needs >=2 tasks of >=2 kinds");
            break;
    }
}

/// Per-(iteration, task) batch seed; a pure function of the config seed and
/// the absolute iteration so resumed runs continue bit-identically.
inline std::uint64_t batch_seed(std::uint64_t seed, std::uint64_t iter, std::size_t task_index) {
    return rng::mix(rng::mix(seed, 0x747261696e), iter * 64 + task_index);
}

/// Advances the model in place from `start_iter` to tc.iterations. Each
/// iteration draws one batch per task, sums the per-task L1 losses and
/// takes one optimizer step.
inline void train_loop(model::EdtModel& m, AdamState& adam, std::uint64_t start_iter,
                       const TrainConfig& tc, const data::PatchSource& src,
                       const LogSink& sink = {}) {
    validate_regime(tc, m.config);
    auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t iter = start_iter; iter < tc.iterations; ++iter) {
        ad::Graph g;
        model::BoundParams bp = model::bind_params(g, m);
        std::vector<double> task_losses;
        ad::Var total;
        for (std::size_t k = 0; k < m.config.tasks.size(); ++k) {
            const model::TaskSpec& task = m.config.tasks[k];
            data::PatchBatch batch = data::sample_patches(src, task, tc.patch, tc.batch_per_task,
                                                          batch_seed(tc.seed, iter, k));
            ad::Var pred = model::forward(g, m, bp, task.id(), batch.degraded);
            ad::Var loss = l1_loss(pred, g.input(batch.clean));
            task_losses.push_back(loss.val()[0]);
            total = (k == 0) ? loss : ad::add(total, loss);
        }
        g.backward(total);
        std::vector<Tensor> grads;
        grads.reserve(bp.vars.size());
        for (const ad::Var& v : bp.vars) grads.push_back(g.grad(v));
        double lr = lr_at(iter, tc);
        adam_step(m.params, grads, adam, lr, tc.beta1, tc.beta2, tc.eps);

        bool log_now = sink && (tc.log_interval == 0 || iter % tc.log_interval == 0 ||
                                iter + 1 == tc.iterations);
        if (log_now) {
            double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            for (std::size_t k = 0; k < m.config.tasks.size(); ++k)
                sink(LogRecord{iter, m.config.tasks[k].id(), task_losses[k], lr, wall});
        }
    }
}

struct TrainResult {
    model::EdtModel model;
    AdamState adam;
    std::uint64_t iter = 0;
};

/// Pre-training from a fresh initialization.
inline TrainResult pretrain(const model::ModelConfig& mc, const TrainConfig& tc,
                            const data::PatchSource& src, const LogSink& sink = {}) {
    TrainResult r{model::build_model(mc, tc.seed), {}, 0};
    r.adam = AdamState::init(r.model.params);
    train_loop(r.model, r.adam, 0, tc, src, sink);
    r.iter = tc.iterations;
    return r;
}

/// Resumes a checkpointed run; continues bit-identically given the same
/// config, seed and data source.
inline TrainResult resume(const std::string& ckpt_path, const model::ModelConfig& mc,
                          const TrainConfig& tc, const data::PatchSource& src,
                          const LogSink& sink = {}) {
    Checkpoint c = load_checkpoint(ckpt_path);
    require_matching_config(c, mc);
    TrainResult r{model::build_model(mc, tc.seed), {}, c.iter};
    restore_model(r.model, c);
    r.adam = restore_adam(r.model, c);
    train_loop(r.model, r.adam, c.iter, tc, src, sink);
    r.iter = tc.iterations;
    return r;
}

/// Fine-tuning: the shared body plus the target task's encoder/decoder are
/// taken from the pre-training checkpoint; training runs at a constant lr.
/// A missing task head is an error unless `init_missing_head` allows a
/// fresh initialization.
inline TrainResult finetune(const Checkpoint& ckpt, const model::ModelConfig& target_cfg,
                            const TrainConfig& tc, const data::PatchSource& src,
                            bool init_missing_head = false, const LogSink& sink = {}) {
    if (target_cfg.tasks.size() != 1)
        throw std::invalid_argument("finetune: target config must hold exactly one task");
    TrainResult r{model::build_model(target_cfg, tc.seed), {}, 0};
    std::string task_prefix_enc = "enc." + target_cfg.tasks[0].id() + ".";
    std::string task_prefix_dec = "dec." + target_cfg.tasks[0].id() + ".";
    for (std::size_t i = 0; i < r.model.params.count(); ++i) {
        const std::string& name = r.model.params.name(i);
        std::string key = "param." + name;
        bool is_head = name.rfind(task_prefix_enc, 0) == 0 || name.rfind(task_prefix_dec, 0) == 0;
        if (!ckpt.has(key)) {
            if (is_head && init_missing_head) continue;  // keep fresh init
            throw std::invalid_argument(
                is_head ? "finetune: checkpoint lacks task head '" + name +
                              "' (pass the flag to initialize it fresh)"
                        : "finetune: checkpoint lacks body parameter '" + name + "'");
        }
        const Tensor& v = ckpt.at(key);
        if (!v.same_shape(r.model.params.value(i)))
            throw io::IoError("finetune: shape mismatch for " + name);
        r.model.params.value(i) = v;
    }
    r.adam = AdamState::init(r.model.params);
    train_loop(r.model, r.adam, 0, tc, src, sink);
    r.iter = tc.iterations;
    return r;
}

// ---- evaluation ----

struct EvalRow {
    std::string name;
    double psnr_rgb = 0.0;
    double psnr_y = 0.0;
};

struct EvalResult {
    std::vector<EvalRow> rows;
    double mean_rgb = 0.0;
    double mean_y = 0.0;
};

/// PSNR (RGB and Y) of restored outputs against clean references.
/// `pairs` holds (name, clean, degraded) images.
inline EvalResult evaluate(const model::EdtModel& m, const std::string& task_id,
                           const std::vector<std::tuple<std::string, Tensor, Tensor>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvalResult res;
    for (const auto& [name, clean, degraded] : pairs) {
        data::require_image(clean, "evaluate");
        data::require_image(degraded, "evaluate");
        Tensor input = degraded.reshaped({1, 3, degraded.dim(1), degraded.dim(2)});
        Tensor out4 = model::run_forward(m, task_id, input);
        Tensor out = out4.reshaped({3, out4.dim(2), out4.dim(3)});
        if (!out.same_shape(clean))
            throw std::invalid_argument("evaluate: output/reference size mismatch for " + name);
        EvalRow row{name, psnr(out, clean), psnr_y(out, clean)};
        res.mean_rgb += row.psnr_rgb;
        res.mean_y += row.psnr_y;
        res.rows.push_back(std::move(row));
    }
    res.mean_rgb /= static_cast<double>(res.rows.size());
    res.mean_y /= static_cast<double>(res.rows.size());
    return res;
}

}  // namespace edt::train
