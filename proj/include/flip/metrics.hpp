#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "flip/error.hpp"
#include "flip/image.hpp"
#include "flip/util.hpp"

namespace flip {

struct OverlapMetrics {
    double dice = 0;  // percent
    double jac = 0;   // percent
    std::optional<double> con;  // percent; undefined when dice == 0
};

// dice = 200|P∩G|/(|P|+|G|), jac = 100|P∩G|/|P∪G|, con = 100(3 - 2/D) with
// D the dice fraction. Two empty masks agree perfectly (all = 100).
inline OverlapMetrics overlap_metrics(const Mask& pred, const Mask& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ParamError("overlap_metrics: shape mismatch");
    long long np = 0, ng = 0, ni = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        np += pred.data[i];
        ng += gt.data[i];
        ni += (pred.data[i] & gt.data[i]);
    }
    OverlapMetrics m;
    if (np + ng == 0) {
        m.dice = m.jac = 100.0;
        m.con = 100.0;
        return m;
    }
    m.dice = 200.0 * static_cast<double>(ni) / static_cast<double>(np + ng);
    m.jac = 100.0 * static_cast<double>(ni) / static_cast<double>(np + ng - ni);
    if (m.dice > 0) {
        const double d = m.dice / 100.0;
        m.con = 100.0 * (3.0 - 2.0 / d);
    }
    return m;
}

// Mask pixels with a 4-neighbour outside the mask; out-of-raster counts as
// outside.
inline std::vector<std::pair<int, int>> boundary_pixels(const Mask& m) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            const bool edge = x == 0 || x == m.width - 1 || y == 0 || y == m.height - 1 ||
                              !m.at(x - 1, y) || !m.at(x + 1, y) || !m.at(x, y - 1) || !m.at(x, y + 1);
            if (edge) out.emplace_back(x, y);
        }
    return out;
}

struct BoundaryMetrics {
    double hd = 0;   // max-max Hausdorff, pixels
    double asd = 0;  // mean nearest boundary distance over both boundary sets
};

inline BoundaryMetrics boundary_metrics(const Mask& pred, const Mask& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ParamError("boundary_metrics: shape mismatch");
    const auto bp = boundary_pixels(pred);
    const auto bg = boundary_pixels(gt);
    if (bp.empty() || bg.empty())
        throw DataError("boundary_metrics: undefined for an empty mask");

    const auto nearest = [](const std::pair<int, int>& p, const std::vector<std::pair<int, int>>& set) {
        long long best = -1;
        for (const auto& q : set) {
            const long long dx = p.first - q.first, dy = p.second - q.second;
            const long long d2 = dx * dx + dy * dy;
            if (best < 0 || d2 < best) best = d2;
        }
        return std::sqrt(static_cast<double>(best));
    };

    double hd_pg = 0, hd_gp = 0, sum = 0;
    for (const auto& p : bp) {
        const double d = nearest(p, bg);
        hd_pg = std::max(hd_pg, d);
        sum += d;
    }
    for (const auto& g : bg) {
        const double d = nearest(g, bp);
        hd_gp = std::max(hd_gp, d);
        sum += d;
    }
    return {std::max(hd_pg, hd_gp), sum / static_cast<double>(bp.size() + bg.size())};
}

struct MetricReport {
    double dice = 0, jac = 0;
    std::optional<double> con;
    std::optional<double> hd, asd;  // empty when a mask had no boundary
};

inline MetricReport evaluate_masks(const Mask& pred, const Mask& gt) {
    MetricReport r;
    const auto o = overlap_metrics(pred, gt);
    r.dice = o.dice;
    r.jac = o.jac;
    r.con = o.con;
    try {
        const auto b = boundary_metrics(pred, gt);
        r.hd = b.hd;
        r.asd = b.asd;
    } catch (const DataError&) {
        // empty prediction: boundary metrics stay undefined
    }
    return r;
}

struct MeanStd {
    double mean = 0, std = 0;
    int n = 0;
};

// population std; n = 1 reports 0 rather than NaN
inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    r.n = static_cast<int>(xs.size());
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= r.n;
    double s = 0;
    for (double x : xs) s += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(s / r.n);
    return r;
}

inline std::string mean_std_str(const MeanStd& m, int prec = 2) {
    return fmt_double(m.mean, prec) + "±" + fmt_double(m.std, prec);
}

}  // namespace flip
