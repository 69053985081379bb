#include <gtest/gtest.h>

#include "edt/model/counting.hpp"
#include "edt/model/edt_model.hpp"

using edt::Shape;
using edt::Tensor;
namespace ad = edt::ad;
using namespace edt::model;

namespace {

Tensor random_image(std::size_t b, std::size_t h, std::size_t w, std::uint64_t seed) {
    edt::rng::Stream r(seed);
    Tensor t({b, 3, h, w});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.uniform();
    return t;
}

ModelConfig nano_with(std::vector<TaskSpec> tasks) {
    ModelConfig c = preset("edt-nano");
    c.tasks = std::move(tasks);
    return c;
}

}  // namespace

TEST(BuildModel, RejectsInvalidConfigs) {
    ModelConfig c = preset("edt-nano");
    c.tasks.clear();
    EXPECT_THROW(build_model(c), std::invalid_argument);  // no tasks
    c = nano_with({{TaskKind::Sr, 2}, {TaskKind::Sr, 2}});
    EXPECT_THROW(build_model(c), std::invalid_argument);  // duplicate task
    c = nano_with({{TaskKind::Sr, 5}});
    EXPECT_THROW(build_model(c), std::invalid_argument);  // bad scale
    c = nano_with({{TaskKind::Sr, 2}});
    c.channels = 10;  // not a multiple of 4
    EXPECT_THROW(build_model(c), std::invalid_argument);
}

TEST(Forward, SrScaleContractHoldsForAllScalesAndOddSizes) {
    for (int s : {2, 3, 4}) {
        EdtModel m = build_model(nano_with({{TaskKind::Sr, s}}), 1);
        Tensor x = random_image(1, 13, 9, 2);  // forces reflective padding
        Tensor y = run_forward(m, m.config.tasks[0].id(), x);
        EXPECT_EQ(y.shape(), (Shape{1, 3, 13 * static_cast<std::size_t>(s),
                                    9 * static_cast<std::size_t>(s)}))
            << "x" << s;
    }
}

TEST(Forward, HighResPathPreservesExtentsAndBodyRunsAtQuarter) {
    EdtModel m = build_model(nano_with({{TaskKind::Denoise, 25}}), 3);
    Tensor x = random_image(1, 32, 32, 4);
    ForwardCapture cap;
    cap.want_trace = true;
    Tensor y = run_forward(m, "denoise_g25", x, &cap);
    EXPECT_EQ(y.shape(), x.shape());
    // body trace entries are tokens [B, H/4, W/4, C]
    for (const TraceEntry& e : cap.entries)
        if (e.label == "s0.b0.attn") {
            EXPECT_EQ(e.value.shape(), (Shape{1, 8, 8, 8}));
        }
    // analytic account of the full-size model agrees: 192 -> 48 body feature
    ModelConfig b = preset("edt-b");
    b.tasks = {TaskSpec{TaskKind::Denoise, 25}};
    auto rows = cost_table(b, "denoise_g25", 192, 192);
    bool found = false;
    for (const LayerCost& r : rows)
        if (r.name == "body.s0.b0.attn") {
            EXPECT_EQ(r.macs, attention_macs(6, 24, 48, 48, 180));
            found = true;
        }
    EXPECT_TRUE(found);
}

TEST(Forward, UnknownTaskRejected) {
    EdtModel m = build_model(nano_with({{TaskKind::Sr, 2}}), 5);
    EXPECT_THROW(run_forward(m, "denoise_g25", random_image(1, 8, 8, 6)), std::invalid_argument);
}

TEST(Forward, DeterministicAcrossRuns) {
    EdtModel m = build_model(nano_with({{TaskKind::Derain, 0}}), 7);
    Tensor x = random_image(2, 16, 16, 8);
    Tensor y1 = run_forward(m, "derain_light", x);
    Tensor y2 = run_forward(m, "derain_light", x);
    ASSERT_EQ(y1.shape(), y2.shape());
    for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_EQ(y1[i], y2[i]);
}

TEST(Forward, ZeroTailProducesZeroImage) {
    EdtModel m = build_model(nano_with({{TaskKind::Sr, 2}}), 9);
    Tensor& tw = m.params.value("dec.sr_x2.tail.w");
    for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = 0.0;
    Tensor& tb = m.params.value("dec.sr_x2.tail.b");
    for (std::size_t i = 0; i < tb.size(); ++i) tb[i] = 0.0;
    Tensor y = run_forward(m, "sr_x2", random_image(1, 8, 8, 10));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], 0.0);
}

TEST(Forward, TraceCountsHeadBodyTailEntries) {
    // nano: 2 (head) + 1*2 blocks * 2 + 2 (tail) = 8
    EdtModel m = build_model(nano_with({{TaskKind::Sr, 2}}), 11);
    ForwardCapture cap;
    cap.want_trace = true;
    run_forward(m, "sr_x2", random_image(1, 8, 8, 12), &cap);
    EXPECT_EQ(cap.entries.size(), 2u + m.config.stages * m.config.blocks_per_stage * 2u + 2u);
    EXPECT_EQ(cap.entries.front().label, "head.conv1");
    EXPECT_EQ(cap.entries[1].label, "head.out");
    EXPECT_EQ(cap.entries[2].label, "s0.b0.attn");
    EXPECT_EQ(cap.entries.back().label, "tail.out");
}

TEST(Forward, EdtBDenoiseTraceHas76Entries) {
    ModelConfig c = preset("edt-b");
    c.tasks = {TaskSpec{TaskKind::Denoise, 25}};
    EdtModel m = build_model(c, 13);
    ForwardCapture cap;
    cap.want_trace = true;
    Tensor y = run_forward(m, "denoise_g25", random_image(1, 96, 96, 14), &cap);
    EXPECT_EQ(y.shape(), (Shape{1, 3, 96, 96}));
    EXPECT_EQ(cap.entries.size(), 76u);  // 2 + 6*6*2 + 2
}

TEST(Forward, AttnSinkStreamsRecordsWithShiftsAlternating)
{
    EdtModel m = build_model(nano_with({{TaskKind::Sr, 2}}), 15);
    std::vector<AttnRecord> recs;
    ForwardCapture cap;
    cap.attn_sink = [&recs](AttnRecord&& r) { recs.push_back(std::move(r)); };
    run_forward(m, "sr_x2", random_image(1, 8, 8, 16), &cap);
    ASSERT_EQ(recs.size(), 4u);  // 2 blocks x 2 branches
    EXPECT_EQ(recs[0].branch, 'h');
    EXPECT_EQ(recs[1].branch, 'v');
    EXPECT_FALSE(recs[0].shifted);
    EXPECT_TRUE(recs[2].shifted);
    // nano window (2,4) on an 8x8 grid: 8 windows x 1 head x 8 cells
    EXPECT_EQ(recs[0].weights.weights.shape(), (Shape{8, 1, 8, 8}));
    EXPECT_EQ(recs[1].weights.win_h, 4u);
}

TEST(Forward, MultiTaskModelServesEveryTask) {
    EdtModel m = build_model(
        nano_with({{TaskKind::Sr, 2}, {TaskKind::Denoise, 15}, {TaskKind::Derain, 1}}), 17);
    Tensor x = random_image(1, 16, 16, 18);
    EXPECT_EQ(run_forward(m, "sr_x2", x).shape(), (Shape{1, 3, 32, 32}));
    EXPECT_EQ(run_forward(m, "denoise_g15", x).shape(), (Shape{1, 3, 16, 16}));
    EXPECT_EQ(run_forward(m, "derain_heavy", x).shape(), (Shape{1, 3, 16, 16}));
}

TEST(Forward, BuildIsSeedDeterministicAndSeedSensitive) {
    ModelConfig c = nano_with({{TaskKind::Sr, 2}});
    EdtModel a = build_model(c, 42), b = build_model(c, 42), d = build_model(c, 43);
    bool differs = false;
    for (std::size_t i = 0; i < a.params.count(); ++i) {
        const Tensor& va = a.params.value(i);
        const Tensor& vb = b.params.value(i);
        for (std::size_t j = 0; j < va.size(); ++j) {
            EXPECT_EQ(va[j], vb[j]);
            if (va[j] != d.params.value(i)[j]) differs = true;
        }
    }
    EXPECT_TRUE(differs);
}
