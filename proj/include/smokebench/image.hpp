#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "smokebench/common.hpp"

namespace smokebench {

/// 3-channel image, row-major interleaved RGB, values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // height * width * 3

    Image() = default;
    Image(int h, int w, float fill = 0.0f) : height(h), width(w), data(std::size_t(h) * w * 3, fill) {}

    float& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

/// Single-channel map (transmission, smoke map, dark channel, depth, mask).
struct ScalarField {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // height * width

    ScalarField() = default;
    ScalarField(int h, int w, float fill = 0.0f) : height(h), width(w), data(std::size_t(h) * w, fill) {}

    float& at(int y, int x) { return data[std::size_t(y) * width + x]; }
    float at(int y, int x) const { return data[std::size_t(y) * width + x]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const ScalarField& o) const { return height == o.height && width == o.width; }
};

/// 3-channel field without the [0,1] range contract (B fields, airlight,
/// unclamped reconstructions).
struct Field3 {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Field3() = default;
    Field3(int h, int w, float fill = 0.0f) : height(h), width(w), data(std::size_t(h) * w * 3, fill) {}

    float& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }
    std::size_t size() const { return data.size(); }
};

inline Image clamp_to_image(const Field3& f) {
    Image img(f.height, f.width);
    for (std::size_t i = 0; i < f.data.size(); ++i) img.data[i] = clamp01(f.data[i]);
    return img;
}

/// round(v*255), half away from zero, clamped to [0,255].
inline unsigned char quantize8(float v) {
    float q = v * 255.0f + 0.5f;
    if (q < 0.0f) q = 0.0f;
    if (q > 255.0f) q = 255.0f;
    return (unsigned char)q;
}

inline float dequantize8(unsigned char b) { return float(b) / 255.0f; }

namespace detail {

inline std::vector<unsigned char> png_read_rgb(const std::filesystem::path& path, int& h, int& w) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    png_image pimg;
    std::memset(&pimg, 0, sizeof(pimg));
    pimg.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&pimg, path.string().c_str()))
        throw IoError("unsupported or corrupt image: " + path.string() + " (" + pimg.message + ")");
    if (pimg.format & PNG_FORMAT_FLAG_ALPHA)
        std::fprintf(stderr, "warning: dropping alpha channel of %s\n", path.string().c_str());
    pimg.format = PNG_FORMAT_RGB;
    h = int(pimg.height);
    w = int(pimg.width);
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(pimg));
    if (!png_image_finish_read(&pimg, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = pimg.message;
        png_image_free(&pimg);
        throw IoError("failed to decode " + path.string() + " (" + msg + ")");
    }
    return buf;
}

inline void png_write(const std::filesystem::path& path, const unsigned char* rgb, int h, int w,
                      bool gray) {
    png_image pimg;
    std::memset(&pimg, 0, sizeof(pimg));
    pimg.version = PNG_IMAGE_VERSION;
    pimg.width = png_uint_32(w);
    pimg.height = png_uint_32(h);
    pimg.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    if (!png_image_write_to_file(&pimg, tmp.string().c_str(), 0, rgb, 0, nullptr)) {
        std::string msg = pimg.message;
        png_image_free(&pimg);
        throw IoError("failed to write " + tmp.string() + " (" + msg + ")");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Load an 8-bit PNG (or other libpng-readable raster) as RGB in [0,1].
/// Grayscale is replicated to 3 channels; alpha is dropped with a warning.
inline Image load_image(const std::filesystem::path& path) {
    int h = 0, w = 0;
    std::vector<unsigned char> buf = detail::png_read_rgb(path, h, w);
    Image img(h, w);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = dequantize8(buf[i]);
    return img;
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
    std::vector<unsigned char> buf(img.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = quantize8(img.data[i]);
    detail::png_write(path, buf.data(), img.height, img.width, /*gray=*/false);
}

/// Grayscale PNG round trip for scalar maps in [0,1].
inline ScalarField load_field(const std::filesystem::path& path) {
    int h = 0, w = 0;
    std::vector<unsigned char> buf = detail::png_read_rgb(path, h, w);
    ScalarField f(h, w);
    for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = dequantize8(buf[i * 3]);
    return f;
}

inline void save_field(const ScalarField& f, const std::filesystem::path& path) {
    std::vector<unsigned char> buf(f.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = quantize8(f.data[i]);
    detail::png_write(path, buf.data(), f.height, f.width, /*gray=*/true);
}

/// Separable bilinear resize with half-pixel-centered coordinates.
inline Image resize_bilinear(const Image& src, int new_h, int new_w) {
    if (new_h < 1 || new_w < 1) throw DataError("resize target must be at least 1x1");
    if (new_h == src.height && new_w == src.width) return src;
    Image dst(new_h, new_w);
    const double sy = double(src.height) / new_h;
    const double sx = double(src.width) / new_w;
    for (int y = 0; y < new_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = int(std::floor(fy));
        double wy = fy - y0;
        int ya = std::clamp(y0, 0, src.height - 1);
        int yb = std::clamp(y0 + 1, 0, src.height - 1);
        for (int x = 0; x < new_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = int(std::floor(fx));
            double wx = fx - x0;
            int xa = std::clamp(x0, 0, src.width - 1);
            int xb = std::clamp(x0 + 1, 0, src.width - 1);
            for (int c = 0; c < 3; ++c) {
                double top = src.at(ya, xa, c) * (1.0 - wx) + src.at(ya, xb, c) * wx;
                double bot = src.at(yb, xa, c) * (1.0 - wx) + src.at(yb, xb, c) * wx;
                dst.at(y, x, c) = clamp01(float(top * (1.0 - wy) + bot * wy));
            }
        }
    }
    return dst;
}

}  // namespace smokebench
