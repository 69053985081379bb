#pragma once

#include <cmath>

#include "edt/data/image.hpp"

namespace edt::data {

/// Keys-style bicubic kernel, a = -0.5, support 2.
inline double bicubic_kernel(double x) {
    constexpr double a = -0.5;
    x = std::fabs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

namespace detail {

struct ResampleTap {
    std::size_t first;            // first source index (edge-clamped taps follow)
    std::vector<double> weights;  // normalized to sum 1
};

// Per-output-pixel taps along one axis. Source coordinate convention:
// u = (i + 0.5)/scale - 0.5. When downscaling the kernel is stretched by
// 1/scale (antialias), then weights are renormalized.
inline std::vector<ResampleTap> resample_taps(std::size_t in, std::size_t out) {
    double scale = static_cast<double>(out) / static_cast<double>(in);
    double kscale = scale < 1.0 ? scale : 1.0;
    double support = 2.0 / kscale;
    std::size_t ntaps = static_cast<std::size_t>(std::ceil(2.0 * support)) + 2;
    std::vector<ResampleTap> taps(out);
    for (std::size_t i = 0; i < out; ++i) {
        double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
        std::ptrdiff_t left = static_cast<std::ptrdiff_t>(std::floor(u - support)) + 1;
        ResampleTap t;
        t.weights.resize(ntaps);
        double sum = 0.0;
        for (std::size_t k = 0; k < ntaps; ++k) {
            double w = bicubic_kernel(kscale * (u - static_cast<double>(left + static_cast<std::ptrdiff_t>(k))));
            w *= kscale;
            t.weights[k] = w;
            sum += w;
        }
        for (double& w : t.weights) w /= sum;
        // clamp tap positions to the extent (edge replication)
        t.first = 0;
        std::vector<double> folded(in, 0.0);
        bool needs_fold = left < 0 || left + static_cast<std::ptrdiff_t>(ntaps) >
                                          static_cast<std::ptrdiff_t>(in);
        if (!needs_fold) {
            t.first = static_cast<std::size_t>(left);
        } else {
            for (std::size_t k = 0; k < ntaps; ++k) {
                std::ptrdiff_t j = left + static_cast<std::ptrdiff_t>(k);
                if (j < 0) j = 0;
                if (j >= static_cast<std::ptrdiff_t>(in)) j = static_cast<std::ptrdiff_t>(in) - 1;
                folded[static_cast<std::size_t>(j)] += t.weights[k];
            }
            std::size_t lo = 0, hi = in;
            while (lo + 1 < in && folded[lo] == 0.0) ++lo;
            while (hi > lo + 1 && folded[hi - 1] == 0.0) --hi;
            t.first = lo;
            t.weights.assign(folded.begin() + static_cast<std::ptrdiff_t>(lo),
                             folded.begin() + static_cast<std::ptrdiff_t>(hi));
        }
        taps[i] = std::move(t);
    }
    return taps;
}

}  // namespace detail

/// Separable bicubic resample to explicit extents, horizontal axis first.
/// Antialiased when downscaling; edge-replicating at the borders.
inline Tensor bicubic_resize(const Tensor& img, std::size_t out_h, std::size_t out_w) {
    require_image(img, "bicubic_resize");
    if (out_h == 0 || out_w == 0)
        throw std::invalid_argument("bicubic_resize: degenerate output size");
    std::size_t h = img.dim(1), w = img.dim(2);

    auto wtaps = detail::resample_taps(w, out_w);
    Tensor mid({3, h, out_w});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < h; ++y) {
            const double* src = img.data() + (c * h + y) * w;
            double* dst = mid.data() + (c * h + y) * out_w;
            for (std::size_t x = 0; x < out_w; ++x) {
                const auto& t = wtaps[x];
                double acc = 0.0;
                for (std::size_t k = 0; k < t.weights.size(); ++k)
                    acc += t.weights[k] * src[t.first + k];
                dst[x] = acc;
            }
        }

    auto htaps = detail::resample_taps(h, out_h);
    Tensor out({3, out_h, out_w});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < out_h; ++y) {
            const auto& t = htaps[y];
            double* dst = out.data() + (c * out_h + y) * out_w;
            for (std::size_t x = 0; x < out_w; ++x) {
                double acc = 0.0;
                for (std::size_t k = 0; k < t.weights.size(); ++k)
                    acc += t.weights[k] * mid[(c * h + t.first + k) * out_w + x];
                dst[x] = acc;
            }
        }
    clamp01(out);
    return out;
}

/// Scale-factor form; output extents round(in * scale), at least 1.
inline Tensor bicubic_resize(const Tensor& img, double scale) {
    require_image(img, "bicubic_resize");
    if (scale <= 0.0) throw std::invalid_argument("bicubic_resize: scale must be positive");
    auto dim = [scale](std::size_t in) {
        auto d = static_cast<std::size_t>(std::floor(static_cast<double>(in) * scale + 0.5));
        return d == 0 ? std::size_t{1} : d;
    };
    return bicubic_resize(img, dim(img.dim(1)), dim(img.dim(2)));
}

}  // namespace edt::data
