#pragma once

#include "edt/model/edt_model.hpp"

namespace edt::train {

/// Mean absolute error; subgradient 0 at exact ties.
inline ad::Var l1_loss(ad::Var pred, ad::Var target) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                    shape_str(target.shape()));
    return ad::mean(ad::abs(ad::sub(pred, target)));
}

inline double l1_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("l1_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

enum class Regime { Single, MultiUnrelated, MultiRelated };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::Single: return "single";
        case Regime::MultiUnrelated: return "multi_unrelated";
        case Regime::MultiRelated: return "multi_related";
    }
    return "?";
}

inline Regime parse_regime(const std::string& s) {
    if (s == "single") return Regime::Single;
    if (s == "multi_unrelated") return Regime::MultiUnrelated;
    if (s == "multi_related") return Regime::MultiRelated;
    throw std::invalid_argument("train: unknown regime '" + s + "'");
}

struct TrainConfig {
    Regime regime = Regime::Single;
    std::size_t batch_per_task = 32;
    std::size_t iterations = 500000;
    std::vector<std::size_t> milestones = {250000, 400000, 450000, 475000};
    double base_lr = 2e-4;
    bool constant_lr = false;  // fine-tuning runs at a fixed rate
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
    std::size_t patch = 48;  // degraded-space patch extent
    std::uint64_t seed = 0;
    std::size_t log_interval = 100;

    static TrainConfig finetune_defaults() {
        TrainConfig c;
        c.base_lr = 1e-5;
        c.constant_lr = true;
        c.milestones.clear();
        return c;
    }
};

/// Milestone schedule: base * 2^-(milestones passed); constant when the
/// config says so.
inline double lr_at(std::size_t iter, const TrainConfig& cfg) {
    if (cfg.constant_lr) return cfg.base_lr;
    std::size_t k = 0;
    for (std::size_t m : cfg.milestones)
        if (iter >= m) ++k;
    return cfg.base_lr * std::pow(0.5, static_cast<double>(k));
}

/// Adam first/second moments, one pair per store entry.
struct AdamState {
    std::vector<Tensor> m, v;
    std::uint64_t t = 0;

    static AdamState init(const model::ParamStore& params) {
        AdamState s;
        s.m.reserve(params.count());
        s.v.reserve(params.count());
        for (std::size_t i = 0; i < params.count(); ++i) {
            s.m.push_back(Tensor::zeros(params.value(i).shape()));
            s.v.push_back(Tensor::zeros(params.value(i).shape()));
        }
        return s;
    }
};

/// One bias-corrected Adam update over the whole store.
inline void adam_step(model::ParamStore& params, const std::vector<Tensor>& grads, AdamState& st,
                      double lr, double beta1, double beta2, double eps) {
    if (grads.size() != params.count() || st.m.size() != params.count())
        throw std::invalid_argument("adam_step: gradient/moment arity mismatch");
    st.t += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < params.count(); ++i) {
        const Tensor& g = grads[i];
        g.require_finite("adam gradient");
        if (!g.same_shape(params.value(i)))
            throw std::invalid_argument("adam_step: gradient shape mismatch for " +
                                        params.name(i));
        Tensor& p = params.value(i);
        Tensor& m = st.m[i];
        Tensor& v = st.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace edt::train
