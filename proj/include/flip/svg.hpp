#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "flip/env.hpp"
#include "flip/error.hpp"
#include "flip/util.hpp"

namespace flip {

// Erase-curve plot: classification score (red), erased area (green, as a
// fraction of its maximum) and DICE (yellow, when present) against the step
// axis, plus the flip threshold as a dashed line. Plain text SVG, byte
// stable across runs.
inline std::string emit_curves(const std::vector<TraceRow>& rows, bool with_dice, double beta) {
    if (rows.empty()) throw DataError("emit_curves: empty trace");

    const int W = 640, H = 360, ml = 56, mr = 16, mt = 28, mb = 44;
    const int pw = W - ml - mr, ph = H - mt - mb;
    const int n = static_cast<int>(rows.size());

    long long max_px = 1;
    for (const auto& r : rows) max_px = std::max(max_px, r.erased_px);

    const auto px = [&](int i) {
        return n == 1 ? static_cast<double>(ml)
                      : ml + static_cast<double>(pw) * i / static_cast<double>(n - 1);
    };
    const auto py = [&](double v01) { return mt + (1.0 - std::clamp(v01, 0.0, 1.0)) * ph; };

    const auto polyline = [&](const std::string& color, const std::vector<double>& vals) {
        std::string s = "  <polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"";
        for (int i = 0; i < n; ++i) {
            if (i) s += " ";
            s += fmt_double(px(i), 2) + "," + fmt_double(py(vals[static_cast<std::size_t>(i)]), 2);
        }
        s += "\"/>\n";
        return s;
    };

    std::vector<double> score(rows.size()), area(rows.size()), dice(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        score[i] = rows[i].score;
        area[i] = static_cast<double>(rows[i].erased_px) / static_cast<double>(max_px);
        dice[i] = rows[i].dice / 100.0;
    }

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) + "\" height=\"" +
           std::to_string(H) + "\" viewBox=\"0 0 " + std::to_string(W) + " " + std::to_string(H) + "\">\n";
    svg += "  <rect width=\"" + std::to_string(W) + "\" height=\"" + std::to_string(H) +
           "\" fill=\"white\"/>\n";
    // axes
    svg += "  <line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt) + "\" x2=\"" +
           std::to_string(ml) + "\" y2=\"" + std::to_string(mt + ph) + "\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt + ph) + "\" x2=\"" +
           std::to_string(ml + pw) + "\" y2=\"" + std::to_string(mt + ph) + "\" stroke=\"black\"/>\n";
    for (double t : {0.0, 0.5, 1.0}) {
        svg += "  <text x=\"" + std::to_string(ml - 8) + "\" y=\"" + fmt_double(py(t) + 4, 2) +
               "\" font-size=\"11\" text-anchor=\"end\">" + fmt_double(t, 1) + "</text>\n";
    }
    svg += "  <text x=\"" + std::to_string(ml + pw / 2) + "\" y=\"" + std::to_string(H - 10) +
           "\" font-size=\"12\" text-anchor=\"middle\">step</text>\n";
    svg += "  <text x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(H - 10) +
           "\" font-size=\"11\" text-anchor=\"middle\">1</text>\n";
    svg += "  <text x=\"" + std::to_string(ml + pw) + "\" y=\"" + std::to_string(H - 10) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + std::to_string(n) + "</text>\n";

    // flip threshold
    svg += "  <line x1=\"" + std::to_string(ml) + "\" y1=\"" + fmt_double(py(beta), 2) + "\" x2=\"" +
           std::to_string(ml + pw) + "\" y2=\"" + fmt_double(py(beta), 2) +
           "\" stroke=\"#888888\" stroke-dasharray=\"5,4\"/>\n";

    svg += polyline("#2ca02c", area);
    if (with_dice) svg += polyline("#e6b812", dice);
    svg += polyline("#d62728", score);

    int lx = ml + 6;
    const auto legend = [&](const std::string& color, const std::string& label) {
        svg += "  <rect x=\"" + std::to_string(lx) + "\" y=\"8\" width=\"12\" height=\"12\" fill=\"" +
               color + "\"/>\n";
        svg += "  <text x=\"" + std::to_string(lx + 16) + "\" y=\"18\" font-size=\"12\">" + label +
               "</text>\n";
        lx += 16 + 10 * static_cast<int>(label.size());
    };
    legend("#2ca02c", "erased area");
    if (with_dice) legend("#e6b812", "DICE");
    legend("#d62728", "score");

    svg += "</svg>\n";
    return svg;
}

}  // namespace flip
