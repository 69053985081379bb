#include <gtest/gtest.h>

#include "edt/diag/attention_distance.hpp"
#include "edt/diag/export.hpp"

using edt::Shape;
using edt::Tensor;
using namespace edt::diag;

namespace {

Tensor stochastic_weights(std::size_t nw, std::size_t heads, std::size_t t, std::uint64_t seed) {
    edt::rng::Stream r(seed);
    Tensor w({nw, heads, t, t});
    for (std::size_t row = 0; row < nw * heads * t; ++row) {
        double sum = 0.0;
        for (std::size_t k = 0; k < t; ++k) {
            double v = 0.05 + r.uniform();
            w[row * t + k] = v;
            sum += v;
        }
        for (std::size_t k = 0; k < t; ++k) w[row * t + k] /= sum;
    }
    return w;
}

}  // namespace

TEST(AttentionDistance, IdentityAttentionHasZeroDistance) {
    std::size_t t = 6;
    Tensor w({2, 1, t, t});
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t q = 0; q < t; ++q) w[((n * 1 + 0) * t + q) * t + q] = 1.0;
    auto stats = attention_distance(w, 2, 3);
    ASSERT_EQ(stats.size(), 1u);
    EXPECT_DOUBLE_EQ(stats[0].mean(), 0.0);
    EXPECT_DOUBLE_EQ(stats[0].stddev(), 0.0);
}

TEST(AttentionDistance, UniformOneByThreeWindowGivesEightNinths) {
    std::size_t t = 3;
    Tensor w = Tensor::full({1, 1, t, t}, 1.0 / 3.0);
    auto stats = attention_distance(w, 1, 3);
    EXPECT_NEAR(stats[0].mean(), 8.0 / 9.0, 1e-15);
}

TEST(AttentionDistance, MatchesBruteForceOracle) {
    std::size_t a = 2, b = 4, t = a * b, nw = 3, heads = 2;
    Tensor w = stochastic_weights(nw, heads, t, 1);
    auto stats = attention_distance(w, a, b);

    for (std::size_t h = 0; h < heads; ++h) {
        // double-loop oracle over every (window, query)
        std::vector<double> pop;
        for (std::size_t n = 0; n < nw; ++n)
            for (std::size_t q = 0; q < t; ++q) {
                double d = 0.0;
                for (std::size_t k = 0; k < t; ++k) {
                    double dy = double(q / b) - double(k / b);
                    double dx = double(q % b) - double(k % b);
                    d += w[((n * heads + h) * t + q) * t + k] * std::sqrt(dy * dy + dx * dx);
                }
                pop.push_back(d);
            }
        double mean = 0.0;
        for (double v : pop) mean += v;
        mean /= pop.size();
        double var = 0.0;
        for (double v : pop) var += (v - mean) * (v - mean);
        var /= pop.size();
        EXPECT_NEAR(stats[h].mean(), mean, 1e-12);
        EXPECT_NEAR(stats[h].stddev(), std::sqrt(var), 1e-12);
    }
}

TEST(AttentionDistance, BoundedByWindowDiagonal) {
    std::size_t a = 3, b = 5;
    Tensor w = stochastic_weights(4, 3, a * b, 2);
    double diag = std::sqrt(double((a - 1) * (a - 1) + (b - 1) * (b - 1)));
    for (const auto& s : attention_distance(w, a, b)) {
        EXPECT_GE(s.mean(), 0.0);
        EXPECT_LE(s.mean(), diag);
    }
}

TEST(AttentionDistance, ShiftedBlocksRefused) {
    Tensor w = stochastic_weights(1, 1, 8, 3);
    EXPECT_THROW(attention_distance(w, 2, 4, /*shifted=*/true), std::invalid_argument);
}

TEST(AttentionDistance, NonStochasticRowsRejected) {
    Tensor w = Tensor::full({1, 1, 4, 4}, 0.1);  // rows sum to 0.4
    EXPECT_THROW(attention_distance(w, 2, 2), std::invalid_argument);
}

TEST(AttentionProfiler, AggregatesAcrossRecordsAndFlagsShifted) {
    edt::model::ModelConfig cfg = edt::model::preset("edt-nano");
    cfg.tasks = {edt::model::TaskSpec{edt::model::TaskKind::Sr, 2}};
    AttentionProfiler prof(cfg);

    std::size_t t = cfg.window.h * cfg.window.w;
    for (int rep = 0; rep < 3; ++rep) {
        edt::model::AttnRecord rec;
        rec.stage = 0;
        rec.block = 0;
        rec.branch = 'h';
        rec.shifted = false;
        rec.weights.weights = stochastic_weights(2, 1, t, 10 + rep);
        rec.weights.win_h = cfg.window.h;
        rec.weights.win_w = cfg.window.w;
        prof.consume(std::move(rec));
    }
    edt::model::AttnRecord shifted_rec;
    shifted_rec.stage = 0;
    shifted_rec.block = 1;
    shifted_rec.branch = 'h';
    shifted_rec.shifted = true;
    shifted_rec.weights.weights = stochastic_weights(2, 1, t, 20);
    shifted_rec.weights.win_h = cfg.window.h;
    shifted_rec.weights.win_w = cfg.window.w;
    prof.consume(std::move(shifted_rec));

    auto rows = prof.rows();
    // stage 0 block 0 'h' has one head row; block 1 rows are excluded; the
    // 'v' branch of block 0 was never fed so it is excluded too
    bool b0_found = false, b1_excluded = false;
    for (const auto& r : rows) {
        if (r.stage == 0 && r.block == 0 && r.branch == 'h') {
            b0_found = true;
            EXPECT_FALSE(r.excluded);
            EXPECT_GT(r.mean, 0.0);
        }
        if (r.block == 1) {
            EXPECT_TRUE(r.excluded);
            b1_excluded = true;
        }
    }
    EXPECT_TRUE(b0_found);
    EXPECT_TRUE(b1_excluded);

    std::string csv = attention_profile_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "stage,block,branch,head,mean,std,excluded");
    EXPECT_NE(csv.find(",,,1"), std::string::npos);  // excluded rows carry no values
}
