#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "json.hpp"

#include "edt/data/degrade.hpp"

namespace edt::data {

inline std::vector<std::string> list_pngs(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw io::IoError(dir + ": not a directory");
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (ext == ".png") out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// JSON-lines manifest {path, width, height} for a directory of PNGs.
inline std::string manifest_jsonl(const std::string& dir) {
    std::string out;
    for (const std::string& p : list_pngs(dir)) {
        Tensor img = load_png(p);
        nlohmann::json j = {{"path", p}, {"width", img.dim(2)}, {"height", img.dim(1)}};
        out += j.dump() + "\n";
    }
    return out;
}

/// Paired dataset layout: {root}/clean/*.png and {root}/degraded/*.png with
/// matching filenames.
struct PairedPaths {
    std::vector<std::pair<std::string, std::string>> pairs;  // (clean, degraded)
};

inline PairedPaths list_paired(const std::string& root) {
    namespace fs = std::filesystem;
    PairedPaths out;
    std::map<std::string, std::string> degraded;
    for (const std::string& p : list_pngs((fs::path(root) / "degraded").string()))
        degraded[fs::path(p).filename().string()] = p;
    for (const std::string& p : list_pngs((fs::path(root) / "clean").string())) {
        auto it = degraded.find(fs::path(p).filename().string());
        if (it != degraded.end()) out.pairs.emplace_back(p, it->second);
    }
    if (out.pairs.empty()) throw io::IoError(root + ": no matching clean/degraded pairs");
    return out;
}

/// 8-fold dihedral augmentation: k in [0,8) = rotation k%4 quarter-turns,
/// horizontal flip first when k >= 4.
inline Tensor dihedral(const Tensor& img, std::size_t k) {
    require_image(img, "dihedral");
    std::size_t h = img.dim(1), w = img.dim(2);
    Tensor cur = img;
    if (k >= 4) {
        Tensor f({3, h, w});
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    f[(c * h + y) * w + x] = cur[(c * h + y) * w + (w - 1 - x)];
        cur = std::move(f);
    }
    for (std::size_t r = 0; r < k % 4; ++r) {
        std::size_t ch = cur.dim(1), cw = cur.dim(2);
        Tensor rot({3, cw, ch});  // quarter turn counterclockwise
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < ch; ++y)
                for (std::size_t x = 0; x < cw; ++x)
                    rot[(c * cw + (cw - 1 - x)) * ch + y] = cur[(c * ch + y) * cw + x];
        cur = std::move(rot);
    }
    return cur;
}

struct PatchBatch {
    Tensor degraded;  // [N, 3, p, p]
    Tensor clean;     // [N, 3, s*p, s*p]
};

namespace detail {

inline void stack_into(Tensor& batch, std::size_t index, const Tensor& img) {
    std::size_t n = img.size();
    for (std::size_t i = 0; i < n; ++i) batch[index * n + i] = img[i];
}

}  // namespace detail

/// Source of clean patches; degradation happens after cropping and
/// augmentation so regenerating the degraded patch from the stored clean
/// patch reproduces it bit-exactly.
class PatchSource {
public:
    virtual ~PatchSource() = default;
    /// A clean patch of exactly [3, size, size], deterministic in `seed`.
    virtual Tensor clean_patch(std::size_t size, std::uint64_t seed) const = 0;
};

/// Procedural smooth fields (sums of low-frequency sinusoids); no files
/// needed, fully seed-determined.
class SyntheticSource final : public PatchSource {
public:
    Tensor clean_patch(std::size_t size, std::uint64_t seed) const override {
        rng::Stream r(rng::mix(seed, 0x73796e7468));
        Tensor img({3, size, size});
        double base = r.uniform(0.15, 0.35);
        struct Wave {
            double fx, fy, phase, amp;
        };
        Wave waves[3];
        for (Wave& wv : waves) {
            wv.fx = r.uniform(-1.5, 1.5) / static_cast<double>(size);
            wv.fy = r.uniform(-1.5, 1.5) / static_cast<double>(size);
            wv.phase = r.uniform(0.0, 6.283185307179586);
            wv.amp = r.uniform(0.02, 0.08);
        }
        double chroma[3] = {r.uniform(-0.05, 0.05), r.uniform(-0.05, 0.05), r.uniform(-0.05, 0.05)};
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < size; ++y)
                for (std::size_t x = 0; x < size; ++x) {
                    double v = base + chroma[c];
                    for (const Wave& wv : waves)
                        v += wv.amp * std::sin(6.283185307179586 *
                                                   (wv.fx * static_cast<double>(x) +
                                                    wv.fy * static_cast<double>(y)) +
                                               wv.phase + 0.7 * static_cast<double>(c));
                    img[(c * size + y) * size + x] = v;
                }
        clamp01(img);
        return img;
    }
};

/// Random crops (with dihedral augmentation) from a directory of PNGs.
/// Undersized or unreadable images are skipped with a warning.
class DirectorySource final : public PatchSource {
public:
    explicit DirectorySource(const std::string& dir) : paths_(list_pngs(dir)), dir_(dir) {
        if (paths_.empty()) throw io::IoError(dir + ": no PNG images");
    }

    Tensor clean_patch(std::size_t size, std::uint64_t seed) const override {
        rng::Stream r(rng::mix(seed, 0x64697273));
        // random picks first, then a deterministic sweep so a usable image
        // is never missed; errors only when every image is unusable
        for (std::size_t k = 0; k < 4 * paths_.size() + paths_.size(); ++k) {
            std::size_t idx = k < 4 * paths_.size()
                                  ? static_cast<std::size_t>(r.below(paths_.size()))
                                  : k - 4 * paths_.size();
            const Tensor* img = load_cached(idx);
            if (!img) continue;
            if (img->dim(1) < size || img->dim(2) < size) {
                warn_once(idx, "smaller than patch size");
                continue;
            }
            std::size_t y = static_cast<std::size_t>(r.below(img->dim(1) - size + 1));
            std::size_t x = static_cast<std::size_t>(r.below(img->dim(2) - size + 1));
            Tensor patch({3, size, size});
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t py = 0; py < size; ++py)
                    for (std::size_t px = 0; px < size; ++px)
                        patch[(c * size + py) * size + px] =
                            (*img)[(c * img->dim(1) + y + py) * img->dim(2) + x + px];
            return dihedral(patch, static_cast<std::size_t>(r.below(8)));
        }
        throw io::IoError(dir_ + ": no usable image is at least " + std::to_string(size) + "px");
    }

private:
    const Tensor* load_cached(std::size_t idx) const {
        auto it = cache_.find(idx);
        if (it != cache_.end()) return it->second.empty() ? nullptr : &it->second;
        try {
            return &(cache_[idx] = load_png(paths_[idx]));
        } catch (const std::exception& e) {
            warn_once(idx, e.what());
            cache_[idx] = Tensor();
            return nullptr;
        }
    }

    void warn_once(std::size_t idx, const std::string& why) const {
        if (warned_.insert(idx).second)
            std::cerr << "warning: skipping " << paths_[idx] << ": " << why << "\n";
    }

    std::vector<std::string> paths_;
    std::string dir_;
    mutable std::map<std::size_t, Tensor> cache_;
    mutable std::set<std::size_t> warned_;
};

/// Batched (degraded, clean) pairs for a task. `patch` is the degraded
/// (model input) extent; clean patches are scale * patch for SR. Sample i
/// derives its own seed, so batches are reproducible and order-independent.
inline PatchBatch sample_patches(const PatchSource& src, const model::TaskSpec& task,
                                 std::size_t patch, std::size_t count, std::uint64_t seed) {
    if (patch == 0) throw std::invalid_argument("sample_patches: zero patch size");
    std::size_t s = static_cast<std::size_t>(task.scale());
    PatchBatch out;
    if (count == 0) return out;
    out.clean = Tensor({count, 3, s * patch, s * patch});
    out.degraded = Tensor({count, 3, patch, patch});
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t sample_seed = rng::mix(seed, 0x70617463 + i);
        Tensor clean = src.clean_patch(s * patch, sample_seed);
        Tensor deg = degrade(clean, task, rng::mix(sample_seed, 0x646567));
        detail::stack_into(out.clean, i, clean);
        detail::stack_into(out.degraded, i, deg);
    }
    return out;
}

}  // namespace edt::data
