#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "flip/error.hpp"
#include "flip/util.hpp"

namespace flip {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // row-major, [0,255]

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

    // clamped access, replicates the border
    std::uint8_t at_clamped(int x, int y) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return at(x, y);
    }

    bool same_shape(const GrayImage& o) const { return width == o.width && height == o.height; }
};

struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // values in {0,1}

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t area() const {
        std::size_t n = 0;
        for (auto v : data) n += v;
        return n;
    }
};

struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int w = 0;
    int h = 0;

    bool contains(int x, int y) const {
        return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
    }
    long long area() const { return static_cast<long long>(w) * h; }

    bool operator==(const BoundingBox&) const = default;
};

// Translate then clamp inside [0,iw)x[0,ih). Size is preserved unless the
// box is larger than the image, in which case it shrinks at the border.
inline BoundingBox shift_box(BoundingBox b, int dx, int dy, int iw, int ih) {
    b.x0 += dx;
    b.y0 += dy;
    b.w = std::min(b.w, iw);
    b.h = std::min(b.h, ih);
    b.x0 = std::clamp(b.x0, 0, iw - b.w);
    b.y0 = std::clamp(b.y0, 0, ih - b.h);
    return b;
}

inline GrayImage crop(const GrayImage& img, const BoundingBox& b) {
    GrayImage out(b.w, b.h);
    for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < b.w; ++x) out.at(x, y) = img.at_clamped(b.x0 + x, b.y0 + y);
    return out;
}

inline Mask crop_mask(const Mask& m, const BoundingBox& b) {
    Mask out(b.w, b.h);
    for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < b.w; ++x) {
            const int sx = std::clamp(b.x0 + x, 0, m.width - 1);
            const int sy = std::clamp(b.y0 + y, 0, m.height - 1);
            out.at(x, y) = m.at(sx, sy);
        }
    return out;
}

// Bilinear resample to w x h, float output in [0,255]. Half-pixel-center
// convention (align_corners=false).
inline std::vector<float> resize_bilinear(const GrayImage& img, int w, int h) {
    std::vector<float> out(static_cast<std::size_t>(w) * h);
    const double sx = static_cast<double>(img.width) / w;
    const double sy = static_cast<double>(img.height) / h;
    for (int y = 0; y < h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        for (int x = 0; x < w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const double v00 = img.at_clamped(x0, y0);
            const double v10 = img.at_clamped(x0 + 1, y0);
            const double v01 = img.at_clamped(x0, y0 + 1);
            const double v11 = img.at_clamped(x0 + 1, y0 + 1);
            const double v = (1 - wy) * ((1 - wx) * v00 + wx * v10) + wy * ((1 - wx) * v01 + wx * v11);
            out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(v);
        }
    }
    return out;
}

// ---- binary PGM (P5, maxval 255) ----

namespace detail {

inline int pgm_read_token(const std::string& buf, std::size_t& pos) {
    while (pos < buf.size() && (std::isspace(static_cast<unsigned char>(buf[pos])) || buf[pos] == '#')) {
        if (buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else {
            ++pos;
        }
    }
    if (pos >= buf.size()) throw FormatError("unexpected end of PGM header", pos);
    if (!std::isdigit(static_cast<unsigned char>(buf[pos])))
        throw FormatError("expected integer in PGM header", pos);
    int v = 0;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
        v = v * 10 + (buf[pos] - '0');
        ++pos;
    }
    return v;
}

}  // namespace detail

inline std::string encode_pgm(const GrayImage& img) {
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
    return out;
}

inline GrayImage decode_pgm(const std::string& buf) {
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5') throw FormatError("not a binary PGM (P5)", 0);
    std::size_t pos = 2;
    const int w = detail::pgm_read_token(buf, pos);
    const int h = detail::pgm_read_token(buf, pos);
    const int maxval = detail::pgm_read_token(buf, pos);
    if (w <= 0 || h <= 0) throw FormatError("non-positive PGM dimensions", pos);
    if (maxval != 255) throw FormatError("unsupported PGM maxval " + std::to_string(maxval), pos);
    if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos])))
        throw FormatError("missing whitespace after PGM maxval", pos);
    ++pos;
    const std::size_t need = static_cast<std::size_t>(w) * h;
    if (buf.size() - pos < need) throw FormatError("truncated PGM payload", buf.size());
    GrayImage img(w, h);
    std::copy_n(reinterpret_cast<const std::uint8_t*>(buf.data()) + pos, need, img.data.begin());
    return img;
}

inline void save_image(const std::string& path, const GrayImage& img) {
    write_file(path, encode_pgm(img));
}

inline GrayImage load_image(const std::string& path) { return decode_pgm(read_file(path)); }

// Masks are stored as PGM with values {0,255}.
inline void save_mask(const std::string& path, const Mask& m) {
    GrayImage img(m.width, m.height);
    for (std::size_t i = 0; i < m.data.size(); ++i) img.data[i] = m.data[i] ? 255 : 0;
    save_image(path, img);
}

inline Mask load_mask(const std::string& path) {
    const std::string buf = read_file(path);
    const GrayImage img = decode_pgm(buf);
    Mask m(img.width, img.height);
    const std::size_t payload_start = buf.size() - img.data.size();
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        if (img.data[i] == 255)
            m.data[i] = 1;
        else if (img.data[i] == 0)
            m.data[i] = 0;
        else
            throw FormatError("mask PGM value not in {0,255}", payload_start + i);
    }
    return m;
}

}  // namespace flip
