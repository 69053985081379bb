#pragma once

#include "edt/data/image.hpp"

namespace edt::train {

/// Hard ceiling standing in for the infinite PSNR of identical images.
inline constexpr double kPsnrCap = 99.0;

/// PSNR in dB on the [0,1] range: 10 log10(1 / MSE), capped at 99.
inline double psnr(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: size mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse <= 0.0) return kPsnrCap;
    double v = 10.0 * std::log10(1.0 / mse);
    return v > kPsnrCap ? kPsnrCap : v;
}

/// BT.601 luma (full range), the Y plane of an RGB image.
inline Tensor luma(const Tensor& img) {
    data::require_image(img, "luma");
    std::size_t h = img.dim(1), w = img.dim(2);
    Tensor y({1, h, w});
    for (std::size_t i = 0; i < h * w; ++i)
        y[i] = 0.299 * img[i] + 0.587 * img[h * w + i] + 0.114 * img[2 * h * w + i];
    return y;
}

inline double psnr_y(const Tensor& a, const Tensor& b) { return psnr(luma(a), luma(b)); }

}  // namespace edt::train
