#pragma once

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "seamcnn/error.hpp"
#include "seamcnn/seam.hpp"
#include "seamcnn/tensor.hpp"

namespace seamcnn {

// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels;

    ImageU8() = default;
    ImageU8(std::size_t w, std::size_t h, std::size_t c)
        : width(w), height(h), channels(c), pixels(w * h * c, 0) {}

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * width + x) * channels + c];
    }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
};

namespace detail {

struct JpegErrorMgr {
    jpeg_error_mgr mgr;
    jmp_buf env;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->env, 1);
}

inline ImageU8 read_png_file(const std::string& path) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str())) {
        throw DataError("cannot decode PNG '" + path + "': " + im.message);
    }
    im.format = PNG_FORMAT_RGB;
    ImageU8 out(im.width, im.height, 3);
    if (!png_image_finish_read(&im, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&im);
        throw DataError("cannot decode PNG '" + path + "': " + im.message);
    }
    return out;
}

inline ImageU8 read_jpeg_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open '" + path + "'");

    jpeg_decompress_struct cinfo{};
    JpegErrorMgr err{};
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    if (setjmp(err.env)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        throw DataError("cannot decode JPEG '" + path + "': " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    ImageU8 out(cinfo.output_width, cinfo.output_height, 3);
    const std::size_t stride = out.width * 3;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.pixels.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    return out;
}

} // namespace detail

// Decodes a PNG or JPEG (sniffed from magic bytes) into interleaved RGB.
inline ImageU8 read_image(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open '" + path + "'");
    unsigned char magic[3] = {0, 0, 0};
    const std::size_t got = std::fread(magic, 1, 3, f);
    std::fclose(f);
    if (got >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) {
        return detail::read_jpeg_file(path);
    }
    if (got >= 3 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N') {
        return detail::read_png_file(path);
    }
    throw DataError("'" + path + "' is neither PNG nor JPEG");
}

inline void write_png(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw ConfigError("write_png supports 1 or 3 channels, got " +
                          std::to_string(img.channels));
    }
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    im.width = static_cast<png_uint_32>(img.width);
    im.height = static_cast<png_uint_32>(img.height);
    im.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&im, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
        throw IoError("cannot write PNG '" + path + "': " + im.message);
    }
}

// Bilinear resampling with the pixel-center convention, so equal sizes copy
// exactly.
inline ImageU8 resize_bilinear(const ImageU8& src, std::size_t out_w, std::size_t out_h) {
    if (out_w < 1 || out_h < 1) throw ConfigError("resize target must be at least 1x1");
    ImageU8 out(out_w, out_h, src.channels);
    const double sx = static_cast<double>(src.width) / static_cast<double>(out_w);
    const double sy = static_cast<double>(src.height) / static_cast<double>(out_h);
    for (std::size_t y = 0; y < out_h; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < src.channels; ++c) {
                const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
                const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
                const double v = (1.0 - wy) * top + wy * bot;
                out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

// CxHxW tensor in [0,1]; grayscale sources replicate into all 3 channels.
inline Tensor image_to_tensor(const ImageU8& img) {
    Tensor t({3, img.height, img.width});
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const std::size_t sc = img.channels == 1 ? 0 : c;
                t.at(c, y, x) = img.at(y, x, sc) / 255.0;
            }
        }
    }
    return t;
}

inline ImageU8 tensor_to_image(const Tensor& t) {
    if (t.rank() != 3 || t.extent(0) != 3) {
        throw ShapeError("tensor_to_image expects 3xHxW, got " + t.shape_str());
    }
    ImageU8 img(t.extent(2), t.extent(1), 3);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(t.at(c, y, x), 0.0, 1.0) * 255.0;
                img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
            }
        }
    }
    return img;
}

// One channel plane rendered to grayscale, min-max normalized; a constant
// plane (degenerate range) renders black.
inline ImageU8 channel_to_image(const Tensor& t, std::size_t channel) {
    if (t.rank() != 3 || channel >= t.extent(0)) {
        throw ShapeError("channel_to_image: channel " + std::to_string(channel) +
                         " out of range for shape " + t.shape_str());
    }
    const std::size_t h = t.extent(1), w = t.extent(2);
    double lo = t.at(channel, 0, 0), hi = lo;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            lo = std::min(lo, t.at(channel, y, x));
            hi = std::max(hi, t.at(channel, y, x));
        }
    }
    ImageU8 img(w, h, 1);
    if (hi > lo) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const double v = (t.at(channel, y, x) - lo) / (hi - lo);
                img.at(y, x, 0) = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return img;
}

inline ImageU8 energy_to_image(const Grid& e) {
    Tensor t({1, e.h, e.w});
    for (std::size_t i = 0; i < e.v.size(); ++i) t.at(i) = e.v[i];
    return channel_to_image(t, 0);
}

// Source image with every carved-away pixel painted in the accent color.
inline ImageU8 seam_overlay(const ImageU8& src, const IndexMap& map,
                            std::uint8_t r = 255, std::uint8_t g = 0, std::uint8_t b = 0) {
    if (src.channels != 3 || src.height != map.src_h() || src.width != map.src_w()) {
        throw ShapeError("seam_overlay: image does not match the index map's source size");
    }
    std::vector<bool> kept(map.src_h() * map.src_w(), false);
    for (std::uint32_t s : map.flat()) kept[s] = true;
    ImageU8 out = src;
    for (std::size_t y = 0; y < src.height; ++y) {
        for (std::size_t x = 0; x < src.width; ++x) {
            if (!kept[y * src.width + x]) {
                out.at(y, x, 0) = r;
                out.at(y, x, 1) = g;
                out.at(y, x, 2) = b;
            }
        }
    }
    return out;
}

} // namespace seamcnn
