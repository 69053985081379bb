#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "edt/model/edt_model.hpp"

namespace edt::diag {

/// Streaming mean/std accumulator over the (window, query) population.
struct DistanceStats {
    double sum = 0.0, sum_sq = 0.0;
    std::uint64_t count = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        count += 1;
    }
    void merge(const DistanceStats& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        count += o.count;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double stddev() const {
        if (!count) return 0.0;
        double m = mean();
        double v = sum_sq / static_cast<double>(count) - m * m;
        return v > 0.0 ? std::sqrt(v) : 0.0;
    }
};

/// Attention-weighted mean query-key distances per head. Weights must be
/// row-stochastic [num_windows, heads, cells, cells]; distances are
/// Euclidean in feature-grid cells over the (a, b) window layout. Shifted
/// blocks are excluded by contract (the shift narrows boundary windows).
inline std::vector<DistanceStats> attention_distance(const Tensor& weights, std::size_t win_h,
                                                     std::size_t win_w, bool shifted = false) {
    if (shifted)
        throw std::invalid_argument("attention_distance: shifted blocks are excluded by contract");
    if (weights.rank() != 4 || weights.dim(2) != weights.dim(3) ||
        weights.dim(2) != win_h * win_w)
        throw std::invalid_argument("attention_distance: weights must be [nW, heads, a*b, a*b]");
    std::size_t nw = weights.dim(0), heads = weights.dim(1), t = weights.dim(2);

    // pairwise cell distances within the window
    std::vector<double> dist(t * t);
    for (std::size_t qi = 0; qi < t; ++qi)
        for (std::size_t ki = 0; ki < t; ++ki) {
            double dy = static_cast<double>(qi / win_w) - static_cast<double>(ki / win_w);
            double dx = static_cast<double>(qi % win_w) - static_cast<double>(ki % win_w);
            dist[qi * t + ki] = std::sqrt(dy * dy + dx * dx);
        }

    std::vector<DistanceStats> per_head(heads);
    for (std::size_t w = 0; w < nw; ++w)
        for (std::size_t h = 0; h < heads; ++h) {
            const double* base = weights.data() + ((w * heads + h) * t) * t;
            for (std::size_t qi = 0; qi < t; ++qi) {
                const double* row = base + qi * t;
                double rowsum = 0.0, d = 0.0;
                for (std::size_t ki = 0; ki < t; ++ki) {
                    if (row[ki] < 0.0)
                        throw std::invalid_argument("attention_distance: negative weight");
                    rowsum += row[ki];
                    d += row[ki] * dist[qi * t + ki];
                }
                if (std::fabs(rowsum - 1.0) > 1e-6)
                    throw std::invalid_argument("attention_distance: rows must sum to 1");
                per_head[h].add(d);
            }
        }
    return per_head;
}

/// One profile row: per (stage, block, branch, head) distance statistics.
/// Shifted blocks appear with excluded=true and carry no recorded values.
struct AttentionProfileRow {
    std::size_t stage = 0, block = 0;
    char branch = 'h';
    std::size_t head = 0;
    double mean = 0.0, stddev = 0.0;
    bool excluded = false;
};

/// Accumulates attention records (across forward passes / images) into a
/// per-head profile. Feed it as the capture's attn_sink.
class AttentionProfiler {
public:
    explicit AttentionProfiler(const model::ModelConfig& cfg) : cfg_(cfg) {}

    void consume(model::AttnRecord&& rec) {
        Key key{rec.stage, rec.block, rec.branch};
        if (rec.shifted) return;  // excluded by contract; reported as such
        auto stats = attention_distance(rec.weights.weights, rec.weights.win_h, rec.weights.win_w);
        auto& slot = acc_[key_index(key)];
        slot.resize(stats.size());
        for (std::size_t h = 0; h < stats.size(); ++h) slot[h].merge(stats[h]);
    }

    std::vector<AttentionProfileRow> rows() const {
        std::vector<AttentionProfileRow> out;
        for (std::size_t s = 0; s < cfg_.stages; ++s)
            for (std::size_t b = 0; b < cfg_.blocks_per_stage; ++b)
                for (char br : {'h', 'v'}) {
                    Key key{s, b, br};
                    auto it = acc_.find(key_index(key));
                    if (it == acc_.end() || it->second.empty()) {
                        AttentionProfileRow r;
                        r.stage = s;
                        r.block = b;
                        r.branch = br;
                        r.excluded = true;
                        out.push_back(r);
                        continue;
                    }
                    for (std::size_t h = 0; h < it->second.size(); ++h) {
                        AttentionProfileRow r;
                        r.stage = s;
                        r.block = b;
                        r.branch = br;
                        r.head = h;
                        r.mean = it->second[h].mean();
                        r.stddev = it->second[h].stddev();
                        out.push_back(r);
                    }
                }
        return out;
    }

private:
    struct Key {
        std::size_t stage, block;
        char branch;
    };
    std::size_t key_index(const Key& k) const {
        return (k.stage * cfg_.blocks_per_stage + k.block) * 2 + (k.branch == 'v' ? 1 : 0);
    }

    model::ModelConfig cfg_;
    std::map<std::size_t, std::vector<DistanceStats>> acc_;
};

}  // namespace edt::diag
