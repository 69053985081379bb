#pragma once

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace edt::model {

enum class TaskKind { Sr, Denoise, Derain };

inline const char* to_string(TaskKind k) {
    switch (k) {
        case TaskKind::Sr: return "sr";
        case TaskKind::Denoise: return "denoise";
        case TaskKind::Derain: return "derain";
    }
    return "?";
}

/// One restoration task. `param` is the scale for SR (2/3/4), sigma on the
/// 0-255 scale for denoising (15/25/50), or 0=light / 1=heavy for deraining.
struct TaskSpec {
    TaskKind kind = TaskKind::Sr;
    int param = 2;

    bool high_res() const { return kind != TaskKind::Sr; }
    int scale() const { return kind == TaskKind::Sr ? param : 1; }

    std::string id() const {
        switch (kind) {
            case TaskKind::Sr: return "sr_x" + std::to_string(param);
            case TaskKind::Denoise: return "denoise_g" + std::to_string(param);
            case TaskKind::Derain: return param == 0 ? "derain_light" : "derain_heavy";
        }
        return "?";
    }

    void validate() const {
        if (kind == TaskKind::Sr && param != 2 && param != 3 && param != 4)
            throw std::invalid_argument("task: SR scale must be one of {2,3,4}");
        if (kind == TaskKind::Denoise && param != 15 && param != 25 && param != 50)
            throw std::invalid_argument("task: noise level must be one of {15,25,50}");
        if (kind == TaskKind::Derain && param != 0 && param != 1)
            throw std::invalid_argument("task: rain intensity must be light or heavy");
    }

    /// Accepts "sr_x2"/"x2", "denoise_g25"/"g25"/"denoise", "derain_light"/"derain".
    static TaskSpec parse(const std::string& s) {
        auto is = [&s](std::initializer_list<const char*> names) {
            for (const char* n : names)
                if (s == n) return true;
            return false;
        };
        if (is({"sr_x2", "x2", "sr2", "sr"})) return {TaskKind::Sr, 2};
        if (is({"sr_x3", "x3", "sr3"})) return {TaskKind::Sr, 3};
        if (is({"sr_x4", "x4", "sr4"})) return {TaskKind::Sr, 4};
        if (is({"denoise_g15", "g15"})) return {TaskKind::Denoise, 15};
        if (is({"denoise_g25", "g25", "denoise"})) return {TaskKind::Denoise, 25};
        if (is({"denoise_g50", "g50"})) return {TaskKind::Denoise, 50};
        if (is({"derain_light", "derain"})) return {TaskKind::Derain, 0};
        if (is({"derain_heavy"})) return {TaskKind::Derain, 1};
        throw std::invalid_argument("task: unknown task spec '" + s + "'");
    }

    bool operator==(const TaskSpec&) const = default;
};

struct WindowSpec {
    std::size_t h = 6;
    std::size_t w = 24;
    bool shifted = false;

    std::size_t lcm() const { return std::lcm(h, w); }
};

struct ModelConfig {
    std::string variant = "custom";
    std::size_t channels = 180;
    std::size_t stages = 6;
    std::size_t blocks_per_stage = 6;
    std::size_t heads = 6;  // total across the two orientation branches
    std::size_t ffn_expansion = 2;
    WindowSpec window;
    std::vector<TaskSpec> tasks;

    std::size_t branch_heads() const { return heads / 2; }
    std::size_t head_dim() const { return (channels / 2) / branch_heads(); }

    void validate() const {
        if (channels == 0 || channels % 4 != 0)
            throw std::invalid_argument("config: channels must be a positive multiple of 4 "
                                        "(channel split plus pyramid encoder)");
        if (heads < 2 || heads % 2 != 0)
            throw std::invalid_argument("config: heads must be even (split across branches)");
        if ((channels / 2) % branch_heads() != 0)
            throw std::invalid_argument("config: C/2 must be divisible by per-branch heads");
        if (window.h < 1 || window.w < 1)
            throw std::invalid_argument("config: window extents must be >= 1");
        if (ffn_expansion < 1) throw std::invalid_argument("config: ffn_expansion must be >= 1");
        if (blocks_per_stage == 0) throw std::invalid_argument("config: blocks_per_stage >= 1");
        if (tasks.empty()) throw std::invalid_argument("config: at least one task required");
        for (const TaskSpec& t : tasks) t.validate();
        for (std::size_t i = 0; i < tasks.size(); ++i)
            for (std::size_t j = i + 1; j < tasks.size(); ++j)
                if (tasks[i].id() == tasks[j].id())
                    throw std::invalid_argument("config: duplicate task " + tasks[i].id());
    }

    /// Input extents must be multiples of this for the given task's path.
    std::size_t input_multiple(const TaskSpec& t) const {
        return t.high_res() ? 4 * window.lcm() : window.lcm();
    }
};

/// Table-1 presets plus the desk-scale "edt-nano".
inline ModelConfig preset(const std::string& name) {
    ModelConfig c;
    c.variant = name;
    if (name == "edt-t") {
        c.channels = 60;
        c.stages = 4;
        c.heads = 6;
    } else if (name == "edt-s") {
        c.channels = 120;
        c.stages = 5;
        c.heads = 6;
    } else if (name == "edt-b") {
        c.channels = 180;
        c.stages = 6;
        c.heads = 6;
    } else if (name == "edt-l") {
        c.channels = 240;
        c.stages = 12;
        c.heads = 8;
    } else if (name == "edt-nano") {
        c.channels = 8;
        c.stages = 1;
        c.blocks_per_stage = 2;
        c.heads = 2;
        c.window = WindowSpec{2, 4, false};
    } else {
        throw std::invalid_argument("config: unknown preset '" + name + "'");
    }
    return c;
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    std::vector<std::string> task_ids;
    for (const TaskSpec& t : c.tasks) task_ids.push_back(t.id());
    j = nlohmann::json{{"variant", c.variant},
                       {"channels", c.channels},
                       {"stages", c.stages},
                       {"blocks_per_stage", c.blocks_per_stage},
                       {"heads", c.heads},
                       {"ffn_expansion", c.ffn_expansion},
                       {"window_h", c.window.h},
                       {"window_w", c.window.w},
                       {"tasks", task_ids}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    if (j.contains("variant")) {
        std::string v = j.at("variant");
        if (v.rfind("edt-", 0) == 0 && v != "custom") c = preset(v);
        c.variant = v;
    }
    if (j.contains("channels")) c.channels = j.at("channels");
    if (j.contains("stages")) c.stages = j.at("stages");
    if (j.contains("blocks_per_stage")) c.blocks_per_stage = j.at("blocks_per_stage");
    if (j.contains("heads")) c.heads = j.at("heads");
    if (j.contains("ffn_expansion")) c.ffn_expansion = j.at("ffn_expansion");
    if (j.contains("window_h")) c.window.h = j.at("window_h");
    if (j.contains("window_w")) c.window.w = j.at("window_w");
    if (j.contains("tasks")) {
        c.tasks.clear();
        for (const auto& t : j.at("tasks")) c.tasks.push_back(TaskSpec::parse(t.get<std::string>()));
    }
}

}  // namespace edt::model
