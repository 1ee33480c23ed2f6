#pragma once

#include <cmath>
#include <cstdint>
#include <tuple>

#include "flip/error.hpp"
#include "flip/image.hpp"
#include "flip/rng.hpp"

namespace flip {

// Synthetic stand-in for a clinical image: one hypo/hyper-echoic nodule on a
// speckled background. Two shape families cover the inter-class diversity:
// a smooth ellipse and a lobulated blob (radially perturbed ellipse).
struct PhantomSpec {
    enum class Family { Ellipse, Lobulated };

    int canvas_w = 96;
    int canvas_h = 96;
    Family family = Family::Ellipse;
    double cx = 48.0;  // nodule centre, continuous coords
    double cy = 48.0;
    double rx = 12.0;  // semi-axes in pixels
    double ry = 10.0;
    double lobe_amplitude = 0.14;  // max relative radial perturbation per harmonic
    double mean_fg = 60.0;         // nodule mean intensity
    double mean_bg = 150.0;        // background mean intensity
    double speckle_sigma = 0.10;   // multiplicative noise std
    double min_contrast = 30.0;
    int bbox_margin = 4;
    std::uint64_t seed = 0;

    void validate() const {
        if (canvas_w <= 0 || canvas_h <= 0) throw ParamError("phantom: empty canvas");
        if (rx <= 0 || ry <= 0) throw ParamError("phantom: non-positive radius");
        if (std::abs(mean_fg - mean_bg) < min_contrast)
            throw ParamError("phantom: |mean_fg - mean_bg| below configured minimum contrast");
        if (min_contrast <= 0) throw ParamError("phantom: min_contrast must be > 0");
        if (speckle_sigma < 0) throw ParamError("phantom: negative speckle sigma");
        if (bbox_margin < 0) throw ParamError("phantom: negative bbox margin");
    }
};

struct Phantom {
    GrayImage image;
    Mask mask;
    BoundingBox box;
};

namespace detail {

// 3x3 mean filter with replicated borders, on doubles.
inline std::vector<double> mean3x3(const std::vector<double>& src, int w, int h) {
    std::vector<double> out(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sx = std::clamp(x + dx, 0, w - 1);
                    const int sy = std::clamp(y + dy, 0, h - 1);
                    s += src[static_cast<std::size_t>(sy) * w + sx];
                }
            out[static_cast<std::size_t>(y) * w + x] = s / 9.0;
        }
    return out;
}

}  // namespace detail

// Deterministic given the spec (seed included). The mask marks exactly the
// nodule pixels; the bbox is the mask's tight box dilated by bbox_margin and
// clamped to the canvas. Throws DataError if the nodule touches the canvas
// edge (it "does not fit").
inline Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    // Radial perturbation harmonics for the lobulated family. Drawn before
    // the speckle so shape and texture streams stay aligned across specs.
    double amp[4] = {0, 0, 0, 0};
    double phase[4] = {0, 0, 0, 0};
    if (spec.family == PhantomSpec::Family::Lobulated) {
        for (int k = 0; k < 4; ++k) {
            amp[k] = rng.uniform(0.25, 1.0) * spec.lobe_amplitude / (k + 1);
            phase[k] = rng.uniform(0.0, 6.283185307179586);
        }
    }

    const int w = spec.canvas_w, h = spec.canvas_h;
    Mask mask(w, h);
    int min_x = w, max_x = -1, min_y = h, max_y = -1;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dx = (x + 0.5 - spec.cx) / spec.rx;
            const double dy = (y + 0.5 - spec.cy) / spec.ry;
            double rho = 1.0;
            if (spec.family == PhantomSpec::Family::Lobulated) {
                const double phi = std::atan2(dy, dx);
                for (int k = 0; k < 4; ++k) rho += amp[k] * std::cos((k + 2) * phi + phase[k]);
            }
            if (dx * dx + dy * dy < rho * rho) {
                mask.at(x, y) = 1;
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    if (max_x < 0) throw DataError("phantom: nodule produced an empty mask");
    if (min_x == 0 || min_y == 0 || max_x == w - 1 || max_y == h - 1)
        throw DataError("phantom: nodule does not fit the canvas");

    // Multiplicative speckle then 3x3 mean smoothing.
    std::vector<double> vals(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double mean = mask.at(x, y) ? spec.mean_fg : spec.mean_bg;
            vals[static_cast<std::size_t>(y) * w + x] = mean * (1.0 + spec.speckle_sigma * rng.normal());
        }
    vals = detail::mean3x3(vals, w, h);

    GrayImage img(w, h);
    for (std::size_t i = 0; i < vals.size(); ++i)
        img.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(vals[i]), 0L, 255L));

    BoundingBox box;
    box.x0 = std::max(0, min_x - spec.bbox_margin);
    box.y0 = std::max(0, min_y - spec.bbox_margin);
    box.w = std::min(w, max_x + spec.bbox_margin + 1) - box.x0;
    box.h = std::min(h, max_y + spec.bbox_margin + 1) - box.y0;
    return Phantom{std::move(img), std::move(mask), box};
}

}  // namespace flip
