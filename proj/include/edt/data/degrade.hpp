#pragma once

#include "edt/core/rng.hpp"
#include "edt/data/bicubic.hpp"
#include "edt/model/config.hpp"

namespace edt::data {

/// i.i.d. Gaussian noise in RGB space, sigma on the 0-255 scale, then
/// clamped. Element i draws normal(seed, i) from the counter stream, so
/// the output is a pure, platform-stable function of (img, sigma, seed).
inline Tensor add_gaussian_noise(const Tensor& img, double sigma, std::uint64_t seed) {
    require_image(img, "add_gaussian_noise");
    if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
    if (sigma == 0.0) return img;
    Tensor out = img;
    double s = sigma / 255.0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * rng::normal(seed, i);
    clamp01(out);
    return out;
}

/// Procedural rain-streak model constants. Lengths in pixels; angles in
/// degrees from the horizontal axis; alpha is per-streak additive
/// intensity; density is streaks per pixel.
struct RainParams {
    double density = 0.001;
    double len_min = 15.0, len_max = 25.0;
    double angle_min_deg = 70.0, angle_max_deg = 110.0;
    double alpha_min = 0.2, alpha_max = 0.5;
    double blur_sigma = 0.7;

    static RainParams light() { return RainParams{}; }
    static RainParams heavy() {
        RainParams p;
        p.density = 0.005;
        p.len_min = 25.0;
        p.len_max = 40.0;
        return p;
    }
};

/// Nonnegative additive streak layer [H,W]: line segments rasterized at
/// half-pixel steps, then blurred by a 5x5 Gaussian.
inline Tensor rain_layer(std::size_t h, std::size_t w, const RainParams& p, std::uint64_t seed) {
    Tensor layer({h, w});
    std::size_t n = static_cast<std::size_t>(p.density * static_cast<double>(h) * w + 0.5);
    rng::Stream r(rng::mix(seed, 0x7261696e));
    for (std::size_t i = 0; i < n; ++i) {
        double cx = r.uniform() * static_cast<double>(w);
        double cy = r.uniform() * static_cast<double>(h);
        double len = r.uniform(p.len_min, p.len_max);
        double ang = r.uniform(p.angle_min_deg, p.angle_max_deg) * 3.14159265358979323846 / 180.0;
        double alpha = r.uniform(p.alpha_min, p.alpha_max);
        double dx = std::cos(ang), dy = std::sin(ang);
        std::ptrdiff_t last_x = -1, last_y = -1;
        std::size_t steps = static_cast<std::size_t>(len / 0.5) + 1;
        for (std::size_t s = 0; s <= steps; ++s) {
            double t = (static_cast<double>(s) / steps - 0.5) * len;
            std::ptrdiff_t px = static_cast<std::ptrdiff_t>(std::lround(cx + t * dx));
            std::ptrdiff_t py = static_cast<std::ptrdiff_t>(std::lround(cy + t * dy));
            if (px == last_x && py == last_y) continue;
            last_x = px;
            last_y = py;
            if (px < 0 || py < 0 || px >= static_cast<std::ptrdiff_t>(w) ||
                py >= static_cast<std::ptrdiff_t>(h))
                continue;
            layer[static_cast<std::size_t>(py) * w + static_cast<std::size_t>(px)] += alpha;
        }
    }
    if (n == 0) return layer;

    // separable 5x5 Gaussian blur, edge-clamped
    double g[5];
    double gsum = 0.0;
    for (int i = -2; i <= 2; ++i) {
        g[i + 2] = std::exp(-0.5 * i * i / (p.blur_sigma * p.blur_sigma));
        gsum += g[i + 2];
    }
    for (double& v : g) v /= gsum;
    auto clampi = [](std::ptrdiff_t v, std::size_t n2) {
        if (v < 0) return std::size_t{0};
        if (v >= static_cast<std::ptrdiff_t>(n2)) return n2 - 1;
        return static_cast<std::size_t>(v);
    };
    Tensor mid({h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k)
                acc += g[k + 2] * layer[y * w + clampi(static_cast<std::ptrdiff_t>(x) + k, w)];
            mid[y * w + x] = acc;
        }
    Tensor blurred({h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k)
                acc += g[k + 2] * mid[clampi(static_cast<std::ptrdiff_t>(y) + k, h) * w + x];
            blurred[y * w + x] = acc;
        }
    return blurred;
}

/// Additive rain on all three channels, clamped to [0,1].
inline Tensor synth_rain(const Tensor& img, const RainParams& p, std::uint64_t seed) {
    require_image(img, "synth_rain");
    std::size_t h = img.dim(1), w = img.dim(2);
    Tensor layer = rain_layer(h, w, p, seed);
    Tensor out = img;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < h * w; ++i) out[c * h * w + i] += layer[i];
    clamp01(out);
    return out;
}

inline Tensor synth_rain(const Tensor& img, bool heavy, std::uint64_t seed) {
    return synth_rain(img, heavy ? RainParams::heavy() : RainParams::light(), seed);
}

/// Clean patch -> degraded input for a task. SR divides extents by the
/// scale (clean extents must be divisible); other tasks preserve extents.
inline Tensor degrade(const Tensor& clean, const model::TaskSpec& task, std::uint64_t seed) {
    require_image(clean, "degrade");
    switch (task.kind) {
        case model::TaskKind::Sr: {
            std::size_t s = static_cast<std::size_t>(task.scale());
            if (clean.dim(1) % s != 0 || clean.dim(2) % s != 0)
                throw std::invalid_argument("degrade: clean extents not divisible by SR scale");
            return bicubic_resize(clean, clean.dim(1) / s, clean.dim(2) / s);
        }
        case model::TaskKind::Denoise:
            return add_gaussian_noise(clean, static_cast<double>(task.param), seed);
        case model::TaskKind::Derain:
            return synth_rain(clean, task.param == 1, seed);
    }
    throw std::logic_error("degrade: unreachable");
}

}  // namespace edt::data
