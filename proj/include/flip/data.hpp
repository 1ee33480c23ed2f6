#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flip/error.hpp"
#include "flip/image.hpp"
#include "flip/phantom.hpp"
#include "flip/rng.hpp"

namespace flip {

struct DatasetItem {
    std::string image_path;  // relative to the manifest's directory
    std::string mask_path;
    BoundingBox box;
};

// Plain-text manifest, one record per line: image mask x0 y0 w h
inline std::string encode_dataset_manifest(const std::vector<DatasetItem>& items) {
    std::string out;
    for (const auto& it : items) {
        out += it.image_path + " " + it.mask_path + " " + std::to_string(it.box.x0) + " " +
               std::to_string(it.box.y0) + " " + std::to_string(it.box.w) + " " +
               std::to_string(it.box.h) + "\n";
    }
    return out;
}

inline std::vector<DatasetItem> parse_dataset_manifest(const std::string& text) {
    std::vector<DatasetItem> items;
    int line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        for (auto& tok : split(line, ' '))
            if (!tok.empty()) f.push_back(tok);
        if (f.size() != 6)
            throw DataError("dataset manifest line " + std::to_string(line_no) +
                            ": expected 'image mask x0 y0 w h'");
        DatasetItem it;
        it.image_path = f[0];
        it.mask_path = f[1];
        try {
            it.box = {std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4]), std::stoi(f[5])};
        } catch (const std::exception&) {
            throw DataError("dataset manifest line " + std::to_string(line_no) + ": bad box integers");
        }
        items.push_back(std::move(it));
    }
    return items;
}

struct LoadedItem {
    GrayImage image;
    Mask mask;
    BoundingBox box;
    std::string id;  // image path stem
};

inline std::vector<LoadedItem> load_dataset(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<LoadedItem> out;
    for (const auto& it : parse_dataset_manifest(read_file(manifest_path))) {
        LoadedItem li;
        li.image = load_image((base / it.image_path).string());
        li.mask = load_mask((base / it.mask_path).string());
        li.box = it.box;
        li.id = fs::path(it.image_path).stem().string();
        if (li.mask.width != li.image.width || li.mask.height != li.image.height)
            throw DataError("dataset item " + li.id + ": mask shape differs from image");
        out.push_back(std::move(li));
    }
    return out;
}

// A "patient" group: phantoms sharing generator parameters, differing only in
// seed and nodule position. Splitting happens at group level so no group
// straddles train/val/test.
struct GroupParams {
    PhantomSpec::Family family;
    double rx, ry;
    double mean_fg, mean_bg;
    double speckle_sigma;
};

inline GroupParams draw_group_params(Rng& rng, int canvas) {
    GroupParams g;
    g.family = rng.uniform() < 0.5 ? PhantomSpec::Family::Ellipse : PhantomSpec::Family::Lobulated;
    const double max_r = canvas / 6.0;
    g.rx = rng.uniform(8.0, max_r);
    g.ry = rng.uniform(8.0, max_r);
    // dark or bright nodule, contrast at least ~50 grey levels
    if (rng.uniform() < 0.7) {
        g.mean_bg = rng.uniform(130.0, 180.0);
        g.mean_fg = rng.uniform(40.0, g.mean_bg - 60.0);
    } else {
        g.mean_bg = rng.uniform(60.0, 110.0);
        g.mean_fg = rng.uniform(g.mean_bg + 60.0, 230.0);
    }
    g.speckle_sigma = rng.uniform(0.06, 0.12);
    return g;
}

inline PhantomSpec spec_from_group(const GroupParams& g, int canvas, int margin, double min_contrast,
                                   std::uint64_t seed) {
    PhantomSpec s;
    s.canvas_w = s.canvas_h = canvas;
    s.family = g.family;
    s.rx = g.rx;
    s.ry = g.ry;
    s.mean_fg = g.mean_fg;
    s.mean_bg = g.mean_bg;
    s.speckle_sigma = g.speckle_sigma;
    s.min_contrast = min_contrast;
    s.bbox_margin = margin;
    s.seed = seed;
    // keep the dilated bbox at least 8 px away from every canvas edge so the
    // fill module always finds flank patches on unshifted boxes
    Rng rng(derive_seed(seed, 0xb0c5));
    const double lo_x = g.rx * 1.25 + margin + 9;
    const double hi_x = canvas - lo_x;
    const double lo_y = g.ry * 1.25 + margin + 9;
    const double hi_y = canvas - lo_y;
    if (hi_x <= lo_x || hi_y <= lo_y) throw DataError("gen-data: nodule too large for canvas");
    s.cx = rng.uniform(lo_x, hi_x);
    s.cy = rng.uniform(lo_y, hi_y);
    return s;
}

}  // namespace flip
