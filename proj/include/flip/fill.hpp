#pragma once

#include <algorithm>
#include <cmath>

#include "flip/error.hpp"
#include "flip/image.hpp"

namespace flip {

// Source patches for the pseudo-background. Both patches are stored as
// upright strips of bbox height; top/bottom flanks are rotated 90 degrees at
// extraction so the horizontal blend applies uniformly.
struct PatchPair {
    GrayImage p_f;
    GrayImage p_g;
    int w_f() const { return p_f.width; }
    int w_g() const { return p_g.width; }
};

namespace detail {

// reflected index for mirror tiling, period 2n-2; n==1 collapses to 0
inline int mirror_index(int i, int n) {
    if (n <= 1) return 0;
    const int period = 2 * n - 2;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

inline GrayImage extract_left(const GrayImage& img, const BoundingBox& b, int w) {
    GrayImage p(w, b.h);
    for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < w; ++x) p.at(x, y) = img.at(b.x0 - w + x, b.y0 + y);
    return p;
}

inline GrayImage extract_right(const GrayImage& img, const BoundingBox& b, int w) {
    GrayImage p(w, b.h);
    for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < w; ++x) p.at(x, y) = img.at(b.x0 + b.w + x, b.y0 + y);
    return p;
}

// Rows above the box, rotated so the flank depth becomes the patch width and
// the box width becomes the patch height; then mirror-tiled/cropped to b.h.
inline GrayImage extract_top(const GrayImage& img, const BoundingBox& b, int depth) {
    GrayImage p(depth, b.h);
    for (int y = 0; y < b.h; ++y) {
        const int col = b.x0 + mirror_index(y, b.w);
        for (int x = 0; x < depth; ++x) p.at(x, y) = img.at(col, b.y0 - depth + x);
    }
    return p;
}

inline GrayImage extract_bottom(const GrayImage& img, const BoundingBox& b, int depth) {
    GrayImage p(depth, b.h);
    for (int y = 0; y < b.h; ++y) {
        const int col = b.x0 + mirror_index(y, b.w);
        for (int x = 0; x < depth; ++x) p.at(x, y) = img.at(col, b.y0 + b.h + x);
    }
    return p;
}

}  // namespace detail

// Picks the two background flanks next to the bbox. Flanks need at least
// 8 px of depth; preference order is left, right, top, bottom. If only one
// flank qualifies it supplies both patches.
inline PatchPair propose_patches(const GrayImage& img, const BoundingBox& b) {
    constexpr int kMinFlank = 8;
    if (b.w <= 0 || b.h <= 0) throw ParamError("propose_patches: empty bbox");

    struct Flank {
        int depth;
        GrayImage (*extract)(const GrayImage&, const BoundingBox&, int);
    };
    const Flank flanks[4] = {
        {b.x0, &detail::extract_left},
        {img.width - (b.x0 + b.w), &detail::extract_right},
        {b.y0, &detail::extract_top},
        {img.height - (b.y0 + b.h), &detail::extract_bottom},
    };

    int chosen[2] = {-1, -1};
    int n = 0;
    for (int i = 0; i < 4 && n < 2; ++i)
        if (flanks[i].depth >= kMinFlank) chosen[n++] = i;
    if (n == 0) throw FillSourceUnavailable("no flank around the bbox has >= 8 px of image");
    if (n == 1) chosen[1] = chosen[0];

    const int half = (b.w + 1) / 2;
    const int pw = std::min({flanks[chosen[0]].depth, flanks[chosen[1]].depth, half});
    PatchPair pair;
    pair.p_f = flanks[chosen[0]].extract(img, b, pw);
    pair.p_g = flanks[chosen[1]].extract(img, b, pw);
    return pair;
}

// Horizontal mixup of the two patches over a w x h canvas:
//   out(x,y) = a*p_f(x,y) + (1-a)*p_g(x,y),  a = x / ((w_f+w_g)/2), clamped to [0,1].
// Patches are mirror-tiled to cover the canvas.
inline GrayImage mixup_fill(const PatchPair& pair, int w, int h) {
    if (pair.p_f.width <= 0 || pair.p_g.width <= 0) throw ParamError("mixup_fill: empty patches");
    GrayImage out(w, h);
    const double mid = (pair.w_f() + pair.w_g()) / 2.0;
    for (int y = 0; y < h; ++y) {
        const int fy = detail::mirror_index(y, pair.p_f.height);
        const int gy = detail::mirror_index(y, pair.p_g.height);
        for (int x = 0; x < w; ++x) {
            const double a = std::clamp(x / mid, 0.0, 1.0);
            const double vf = pair.p_f.at(detail::mirror_index(x, pair.w_f()), fy);
            const double vg = pair.p_g.at(detail::mirror_index(x, pair.w_g()), gy);
            out.at(x, y) = static_cast<std::uint8_t>(
                std::clamp(std::lround(a * vf + (1.0 - a) * vg), 0L, 255L));
        }
    }
    return out;
}

// Pseudo-background: bbox interior replaced by the mixup fill, then a 3-px
// band straddling the bbox border is smoothed with a 3x3 mean filter to hide
// the paste seam. Everything beyond the band is bit-equal to the source.
inline GrayImage build_background(const GrayImage& img, const BoundingBox& b) {
    const PatchPair pair = propose_patches(img, b);
    GrayImage out = img;
    const GrayImage fillv = mixup_fill(pair, b.w, b.h);
    for (int y = 0; y < b.h; ++y)
        for (int x = 0; x < b.w; ++x) out.at(b.x0 + x, b.y0 + y) = fillv.at(x, y);

    // band: 2 px just inside the border plus 1 px just outside
    const GrayImage composite = out;
    for (int y = std::max(0, b.y0 - 1); y < std::min(img.height, b.y0 + b.h + 1); ++y) {
        for (int x = std::max(0, b.x0 - 1); x < std::min(img.width, b.x0 + b.w + 1); ++x) {
            int d;
            if (b.contains(x, y)) {
                d = std::min(std::min(x - b.x0, b.x0 + b.w - 1 - x),
                             std::min(y - b.y0, b.y0 + b.h - 1 - y));
            } else {
                d = -1;
            }
            if (d > 1) continue;
            int s = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) s += composite.at_clamped(x + dx, y + dy);
            out.at(x, y) = static_cast<std::uint8_t>((s + 4) / 9);
        }
    }
    return out;
}

}  // namespace flip
