#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "edt/core/rng.hpp"
#include "edt/core/tensor.hpp"

namespace edt::diag {

/// Activations of one layer: m data points by p flattened neurons.
struct ActivationMatrix {
    Tensor x;  // [m, p]
    std::string layer;
    std::string model_id;

    ActivationMatrix() = default;
    ActivationMatrix(Tensor t, std::string layer_name = "", std::string model = "")
        : x(std::move(t)), layer(std::move(layer_name)), model_id(std::move(model)) {
        if (x.rank() != 2) throw std::invalid_argument("activations: expected [m, p]");
        if (x.dim(0) < 2) throw std::invalid_argument("activations: need m >= 2 data points");
        x.require_finite("activations");
    }

    std::size_t points() const { return x.dim(0); }
    std::size_t neurons() const { return x.dim(1); }
};

/// Gram matrix K = X X^T, symmetric positive semidefinite.
inline Tensor gram(const ActivationMatrix& a) {
    std::size_t m = a.points(), p = a.neurons();
    Tensor k({m, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < p; ++t) acc += a.x.at2(i, t) * a.x.at2(j, t);
            k.at2(i, j) = acc;
            k.at2(j, i) = acc;
        }
    return k;
}

/// K' = H K H with H = I - (1/m) 11^T, computed by double centering.
inline Tensor center_gram(const Tensor& k) {
    std::size_t m = k.dim(0);
    std::vector<double> row_mean(m, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) row_mean[i] += k.at2(i, j);
        grand += row_mean[i];
        row_mean[i] /= static_cast<double>(m);
    }
    grand /= static_cast<double>(m) * m;
    Tensor c({m, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            c.at2(i, j) = k.at2(i, j) - row_mean[i] - row_mean[j] + grand;
    return c;
}

/// HSIC(K, L) = vec(K') . vec(L') / (m-1)^2, both sides centered.
inline double hsic(const Tensor& k, const Tensor& l) {
    if (k.rank() != 2 || k.dim(0) != k.dim(1) || !k.same_shape(l))
        throw std::invalid_argument("hsic: K and L must be equal square matrices");
    std::size_t m = k.dim(0);
    if (m < 2) throw std::invalid_argument("hsic: need m >= 2");
    Tensor kc = center_gram(k);
    Tensor lc = center_gram(l);
    double acc = 0.0;
    for (std::size_t i = 0; i < m * m; ++i) acc += kc[i] * lc[i];
    double denom = static_cast<double>(m - 1) * (m - 1);
    return acc / denom;
}

struct UndefinedSimilarity : std::runtime_error {
    explicit UndefinedSimilarity(const std::string& what) : std::runtime_error(what) {}
};

/// CKA(K, L) = HSIC(K, L) / sqrt(HSIC(K,K) HSIC(L,L)). Zero-variance layers
/// (vanishing self-HSIC) have no defined similarity.
inline double cka(const ActivationMatrix& a, const ActivationMatrix& b) {
    if (a.points() != b.points())
        throw std::invalid_argument("cka: activation matrices disagree on m");
    Tensor k = gram(a);
    Tensor l = gram(b);
    double cross = hsic(k, l);
    double kk = hsic(k, k);
    double ll = hsic(l, l);
    if (kk <= 0.0 || ll <= 0.0)
        throw UndefinedSimilarity("cka: zero-variance layer (self-HSIC is zero) for '" +
                                  (kk <= 0.0 ? a.layer : b.layer) + "'");
    return cross / std::sqrt(kk * ll);
}

// ---- unbiased estimator and minibatch streaming ----

/// Unbiased HSIC_1 estimate from Gram matrices (diagonals excluded);
/// requires m >= 4.
inline double hsic_unbiased(const Tensor& k, const Tensor& l) {
    if (k.rank() != 2 || k.dim(0) != k.dim(1) || !k.same_shape(l))
        throw std::invalid_argument("hsic_unbiased: K and L must be equal square matrices");
    std::size_t m = k.dim(0);
    if (m < 4) throw std::invalid_argument("hsic_unbiased: need m >= 4");
    double trace_kl = 0.0, sum_k = 0.0, sum_l = 0.0, dot_rows = 0.0;
    std::vector<double> rk(m, 0.0), rl(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            double kv = k.at2(i, j), lv = l.at2(i, j);
            trace_kl += kv * lv;
            sum_k += kv;
            sum_l += lv;
            rk[i] += kv;
            rl[i] += lv;
        }
    for (std::size_t i = 0; i < m; ++i) dot_rows += rk[i] * rl[i];
    double n = static_cast<double>(m);
    return (trace_kl + sum_k * sum_l / ((n - 1) * (n - 2)) - 2.0 / (n - 2) * dot_rows) /
           (n * (n - 3));
}

/// Streaming minibatch CKA: accumulates unbiased HSIC terms over batches
/// and passes; final value = mean cross / sqrt(mean self_K * mean self_L).
/// Single-writer accumulator.
class MinibatchCka {
public:
    void add_batch(const ActivationMatrix& xa, const ActivationMatrix& xb) {
        if (xa.points() != xb.points())
            throw std::invalid_argument("minibatch cka: batch m mismatch");
        if (xa.points() < 4)
            throw std::invalid_argument("minibatch cka: batches need >= 4 points");
        Tensor k = gram(xa);
        Tensor l = gram(xb);
        cross_ += hsic_unbiased(k, l);
        self_k_ += hsic_unbiased(k, k);
        self_l_ += hsic_unbiased(l, l);
        batches_ += 1;
    }

    std::size_t batches() const { return batches_; }

    double value() const {
        if (batches_ == 0) throw std::logic_error("minibatch cka: no batches accumulated");
        double n = static_cast<double>(batches_);
        double denom = (self_k_ / n) * (self_l_ / n);
        if (denom <= 0.0) throw UndefinedSimilarity("minibatch cka: zero-variance layer");
        return (cross_ / n) / std::sqrt(denom);
    }

private:
    double cross_ = 0.0, self_k_ = 0.0, self_l_ = 0.0;
    std::size_t batches_ = 0;
};

namespace detail {
inline ActivationMatrix take_rows(const ActivationMatrix& a, const std::vector<std::size_t>& rows,
                                  std::size_t lo, std::size_t hi) {
    std::size_t p = a.neurons();
    Tensor t({hi - lo, p});
    for (std::size_t r = lo; r < hi; ++r)
        for (std::size_t c = 0; c < p; ++c) t.at2(r - lo, c) = a.x.at2(rows[r], c);
    return ActivationMatrix(std::move(t), a.layer, a.model_id);
}
}  // namespace detail

/// Minibatch estimator over full activation matrices: `passes` shuffled
/// sweeps in batches of `batch_size` (trailing remainder dropped when it
/// falls below the 4-point floor).
inline double minibatch_cka(const ActivationMatrix& a, const ActivationMatrix& b,
                            std::size_t batch_size, std::size_t passes, std::uint64_t seed) {
    if (a.points() != b.points()) throw std::invalid_argument("minibatch cka: m mismatch");
    if (batch_size < 4) throw std::invalid_argument("minibatch cka: batch must be >= 4");
    if (passes == 0) throw std::invalid_argument("minibatch cka: passes must be >= 1");
    std::size_t m = a.points();
    MinibatchCka acc;
    for (std::size_t pass = 0; pass < passes; ++pass) {
        std::vector<std::size_t> order(m);
        for (std::size_t i = 0; i < m; ++i) order[i] = i;
        if (batch_size < m) {  // a single whole-dataset batch has nothing to randomize
            rng::Stream shuffle(rng::mix(seed, pass));
            for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        }
        for (std::size_t lo = 0; lo + 4 <= m; lo += batch_size) {
            std::size_t hi = std::min(lo + batch_size, m);
            if (hi - lo < 4) break;
            acc.add_batch(detail::take_rows(a, order, lo, hi), detail::take_rows(b, order, lo, hi));
        }
    }
    return acc.value();
}

/// Full-dataset unbiased CKA (the reference the minibatch estimate chases).
inline double cka_unbiased(const ActivationMatrix& a, const ActivationMatrix& b) {
    Tensor k = gram(a);
    Tensor l = gram(b);
    double kk = hsic_unbiased(k, k);
    double ll = hsic_unbiased(l, l);
    if (kk <= 0.0 || ll <= 0.0) throw UndefinedSimilarity("cka_unbiased: zero-variance layer");
    return hsic_unbiased(k, l) / std::sqrt(kk * ll);
}

// ---- layer-pair maps ----

/// Sentinel for layer pairs whose similarity is undefined (zero variance).
inline constexpr double kUndefinedEntry = -1.0;

enum class Estimator { Full, Minibatch };

struct CkaMap {
    Tensor values;  // [L_a, L_b]; kUndefinedEntry marks flagged pairs
    std::vector<std::string> row_labels, col_labels;
    Estimator estimator = Estimator::Full;
    std::size_t batch = 0, passes = 0;

    bool defined(std::size_t i, std::size_t j) const { return values.at2(i, j) >= 0.0; }
};

struct MinibatchOptions {
    std::size_t batch = 300;
    std::size_t passes = 10;
    std::uint64_t seed = 0;
};

/// CKA similarities between every pair of layers of two traces (self-map
/// when both are the same trace). Zero-variance layers yield flagged
/// entries rather than failing the whole map.
inline CkaMap cka_map(const std::vector<ActivationMatrix>& trace_a,
                      const std::vector<ActivationMatrix>& trace_b,
                      const MinibatchOptions* minibatch = nullptr) {
    if (trace_a.empty() || trace_b.empty()) throw std::invalid_argument("cka_map: empty trace");
    std::size_t m = trace_a[0].points();
    for (const auto& t : trace_a)
        if (t.points() != m) throw std::invalid_argument("cka_map: traces disagree on m");
    for (const auto& t : trace_b)
        if (t.points() != m) throw std::invalid_argument("cka_map: traces disagree on m");

    CkaMap map;
    map.values = Tensor({trace_a.size(), trace_b.size()});
    for (const auto& t : trace_a) map.row_labels.push_back(t.layer);
    for (const auto& t : trace_b) map.col_labels.push_back(t.layer);
    if (minibatch) {
        map.estimator = Estimator::Minibatch;
        map.batch = minibatch->batch;
        map.passes = minibatch->passes;
    }
    for (std::size_t i = 0; i < trace_a.size(); ++i)
        for (std::size_t j = 0; j < trace_b.size(); ++j) {
            try {
                map.values.at2(i, j) =
                    minibatch ? minibatch_cka(trace_a[i], trace_b[j], minibatch->batch,
                                              minibatch->passes, minibatch->seed)
                              : cka(trace_a[i], trace_b[j]);
            } catch (const UndefinedSimilarity&) {
                map.values.at2(i, j) = kUndefinedEntry;
            }
        }
    return map;
}

/// Fig.-2(h)-style summary: per row layer, the fraction of column layers
/// whose similarity exceeds the threshold.
inline std::vector<double> similarity_ratio(const CkaMap& map, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw std::invalid_argument("similarity_ratio: threshold must be in (0,1)");
    std::size_t rows = map.values.dim(0), cols = map.values.dim(1);
    std::vector<double> ratio(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t hits = 0;
        for (std::size_t j = 0; j < cols; ++j)
            if (map.defined(i, j) && map.values.at2(i, j) > threshold) ++hits;
        ratio[i] = static_cast<double>(hits) / static_cast<double>(cols);
    }
    return ratio;
}

}  // namespace edt::diag
