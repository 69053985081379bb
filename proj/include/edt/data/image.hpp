#pragma once

#include <png.h>

#include <cstdio>
#include <memory>

#include "edt/core/container.hpp"
#include "edt/core/tensor.hpp"

namespace edt::data {

/// Images are Tensor[3,H,W], RGB, values in [0,1].
inline void clamp01(Tensor& img) {
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (img[i] < 0.0) img[i] = 0.0;
        if (img[i] > 1.0) img[i] = 1.0;
    }
}

inline void require_image(const Tensor& img, const char* what) {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw std::invalid_argument(std::string(what) + ": expected image [3,H,W], got " +
                                    shape_str(img.shape()));
}

namespace detail {
struct PngReadCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngReadCtx() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};
struct PngWriteCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngWriteCtx() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};
}  // namespace detail

/// 8-bit RGB PNG load; grayscale/palette/alpha inputs are expanded or
/// stripped to RGB. Values land in [0,1].
inline Tensor load_png(const std::string& path) {
    detail::PngReadCtx ctx;
    ctx.fp = std::fopen(path.c_str(), "rb");
    if (!ctx.fp) throw io::IoError(path + ": cannot open");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8))
        throw io::IoError(path + ": not a PNG file");
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) throw io::IoError(path + ": libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io::IoError(path + ": PNG decode error");
    png_init_io(ctx.png, ctx.fp);
    png_set_sig_bytes(ctx.png, 8);
    png_read_info(ctx.png, ctx.info);

    png_set_strip_16(ctx.png);
    png_set_palette_to_rgb(ctx.png);
    png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
    png_set_gray_to_rgb(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    std::size_t h = png_get_image_height(ctx.png, ctx.info);
    std::size_t w = png_get_image_width(ctx.png, ctx.info);
    std::size_t rowbytes = png_get_rowbytes(ctx.png, ctx.info);
    if (rowbytes != 3 * w) throw io::IoError(path + ": unexpected PNG row layout");

    std::vector<unsigned char> pixels(h * rowbytes);
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = pixels.data() + y * rowbytes;
    png_read_image(ctx.png, rows.data());
    png_read_end(ctx.png, nullptr);

    Tensor img({3, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img[(c * h + y) * w + x] = pixels[y * rowbytes + 3 * x + c] / 255.0;
    return img;
}

/// 8-bit RGB PNG save; values are clamped then rounded to the byte grid.
inline void save_png(const std::string& path, const Tensor& img) {
    require_image(img, "save_png");
    std::size_t h = img.dim(1), w = img.dim(2);
    detail::PngWriteCtx ctx;
    ctx.fp = std::fopen(path.c_str(), "wb");
    if (!ctx.fp) throw io::IoError(path + ": cannot open for writing");
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) throw io::IoError(path + ": libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io::IoError(path + ": PNG encode error");
    png_init_io(ctx.png, ctx.fp);
    png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);

    std::vector<unsigned char> row(3 * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double v = img[(c * h + y) * w + x];
                if (v < 0.0) v = 0.0;
                if (v > 1.0) v = 1.0;
                row[3 * x + c] = static_cast<unsigned char>(v * 255.0 + 0.5);
            }
        png_write_row(ctx.png, row.data());
    }
    png_write_end(ctx.png, nullptr);
}

}  // namespace edt::data
