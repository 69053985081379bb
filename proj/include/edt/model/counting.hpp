#pragma once

#include "edt/model/edt_model.hpp"

namespace edt::model {

struct LayerCost {
    std::string name;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
};

namespace detail {

inline std::uint64_t conv_params(std::size_t out_c, std::size_t in_c_per_group, std::size_t k) {
    return static_cast<std::uint64_t>(out_c) * in_c_per_group * k * k + out_c;
}

// O * (C/g) * kh * kw multiply-accumulates per output cell.
inline std::uint64_t conv_macs(std::size_t out_cells, std::size_t out_c,
                               std::size_t in_c_per_group, std::size_t k) {
    return static_cast<std::uint64_t>(out_cells) * out_c * in_c_per_group * k * k;
}

// Transposed convs are counted per input cell (each input cell touches
// Cin*Cout*k*k products regardless of stride).
inline std::uint64_t tconv_macs(std::size_t in_cells, std::size_t in_c, std::size_t out_c,
                                std::size_t k) {
    return static_cast<std::uint64_t>(in_cells) * in_c * out_c * k * k;
}

inline std::uint64_t linear_macs(std::size_t positions, std::size_t in_c, std::size_t out_c) {
    return static_cast<std::uint64_t>(positions) * in_c * out_c;
}

}  // namespace detail

/// Analytic per-layer cost breakdown for one task path at the given input
/// size. Mirrors build_model layer for layer; attention modules are costed
/// by the closed-form 4HWC^2 + 2hwHWC.
inline std::vector<LayerCost> cost_table(const ModelConfig& cfg, const std::string& task_id,
                                         std::size_t in_h, std::size_t in_w) {
    cfg.validate();
    TaskSpec task;
    bool found = false;
    for (const TaskSpec& t : cfg.tasks)
        if (t.id() == task_id) {
            task = t;
            found = true;
        }
    if (!found) throw std::invalid_argument("cost_table: unknown task id '" + task_id + "'");

    std::size_t mult = cfg.input_multiple(task);
    std::size_t Hp = (in_h + mult - 1) / mult * mult;
    std::size_t Wp = (in_w + mult - 1) / mult * mult;
    std::size_t c = cfg.channels, q = c / 4, h = c / 2;
    std::size_t ec = cfg.ffn_expansion * c;
    std::size_t nh = cfg.branch_heads();
    std::size_t div = task.high_res() ? 2 : 1;
    std::size_t Hh = Hp / div, Wh = Wp / div;    // after enc.conv2
    std::size_t Hb = Hh / div, Wb = Wh / div;    // body feature
    std::uint64_t full = static_cast<std::uint64_t>(Hp) * Wp;
    std::uint64_t half = static_cast<std::uint64_t>(Hh) * Wh;
    std::uint64_t body = static_cast<std::uint64_t>(Hb) * Wb;

    std::vector<LayerCost> rows;
    std::string ep = "enc." + task_id + ".";
    rows.push_back({ep + "conv1", detail::conv_params(q, 3, 3), detail::conv_macs(full, q, 3, 3)});
    rows.push_back({ep + "conv2", detail::conv_params(h, q, 3), detail::conv_macs(half, h, q, 3)});
    rows.push_back({ep + "conv3", detail::conv_params(c, h, 3), detail::conv_macs(body, c, h, 3)});

    std::uint64_t table_entries = relative_table_entries(cfg.window.h, cfg.window.w);
    for (std::size_t s = 0; s < cfg.stages; ++s) {
        for (std::size_t b = 0; b < cfg.blocks_per_stage; ++b) {
            std::string p = block_prefix(s, b);
            rows.push_back({p + "ln1", 2 * static_cast<std::uint64_t>(c), 0});
            std::uint64_t attn_params = detail::linear_macs(1, c, 3 * c) + 3 * c  // qkv
                                        + detail::linear_macs(1, c, c) + c        // proj
                                        + 2 * static_cast<std::uint64_t>(nh) * table_entries;
            rows.push_back({p + "attn", attn_params,
                            attention_macs(cfg.window.h, cfg.window.w, Hb, Wb, c)});
            rows.push_back({p + "ln2", 2 * static_cast<std::uint64_t>(c), 0});
            std::uint64_t ffn_params = detail::linear_macs(1, c, ec) + ec        // fc1
                                       + static_cast<std::uint64_t>(ec) * 25 + ec  // dw 5x5
                                       + detail::linear_macs(1, ec, c) + c;      // fc2
            std::uint64_t ffn_macs = detail::linear_macs(body, c, ec) +
                                     detail::conv_macs(body, ec, 1, 5) +
                                     detail::linear_macs(body, ec, c);
            rows.push_back({p + "ffn", ffn_params, ffn_macs});
        }
        rows.push_back({"body.s" + std::to_string(s) + ".conv", detail::conv_params(c, c, 3),
                        detail::conv_macs(body, c, c, 3)});
    }

    std::string dp = "dec." + task_id + ".";
    if (task.high_res()) {
        rows.push_back({dp + "conv1", detail::conv_params(h, c, 3),
                        detail::tconv_macs(body, c, h, 3)});
        rows.push_back({dp + "conv2", detail::conv_params(q, h, 3),
                        detail::tconv_macs(half, h, q, 3)});
        rows.push_back({dp + "tail", detail::conv_params(3, q, 3), detail::conv_macs(full, 3, q, 3)});
    } else {
        rows.push_back({dp + "conv1", detail::conv_params(h, c, 3), detail::conv_macs(body, h, c, 3)});
        rows.push_back({dp + "conv2", detail::conv_params(q, h, 3), detail::conv_macs(body, q, h, 3)});
        std::size_t sc = static_cast<std::size_t>(task.scale());
        std::uint64_t cur = body;
        if (sc == 4) {
            rows.push_back({dp + "up0", detail::conv_params(q * 4, q, 3),
                            detail::conv_macs(cur, q * 4, q, 3)});
            cur *= 4;
            rows.push_back({dp + "up1", detail::conv_params(q * 4, q, 3),
                            detail::conv_macs(cur, q * 4, q, 3)});
            cur *= 4;
        } else {
            rows.push_back({dp + "up0", detail::conv_params(q * sc * sc, q, 3),
                            detail::conv_macs(cur, q * sc * sc, q, 3)});
            cur *= sc * sc;
        }
        rows.push_back({dp + "tail", detail::conv_params(3, q, 3), detail::conv_macs(cur, 3, q, 3)});
    }
    return rows;
}

/// Analytic multiply-accumulate count for one forward at the given input
/// size (the paper's "FLOPs" column is treated as MACs).
inline std::uint64_t count_macs(const ModelConfig& cfg, const std::string& task_id,
                                std::size_t in_h, std::size_t in_w) {
    std::uint64_t total = 0;
    for (const LayerCost& r : cost_table(cfg, task_id, in_h, in_w)) total += r.macs;
    return total;
}

inline std::uint64_t count_macs(const EdtModel& m, const std::string& task_id, std::size_t in_h,
                                std::size_t in_w) {
    return count_macs(m.config, task_id, in_h, in_w);
}

/// Sum of the table's parameter column; must (and is tested to) equal the
/// store's total scalar count.
inline std::uint64_t table_params(const ModelConfig& cfg, const std::string& task_id,
                                  std::size_t in_h, std::size_t in_w) {
    std::uint64_t total = 0;
    for (const LayerCost& r : cost_table(cfg, task_id, in_h, in_w)) total += r.params;
    return total;
}

}  // namespace edt::model
