#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "flip/error.hpp"

namespace flip {

// Exact 1-D optimal transport between two normalized histograms over the
// same integer-spaced support: W = sum_k |CDF1(k) - CDF2(k)|, in bin units
// (intensity units for 256-bin intensity histograms).
inline double wasserstein_1d(const std::vector<double>& h1, const std::vector<double>& h2) {
    if (h1.size() != h2.size() || h1.empty())
        throw ParamError("wasserstein_1d: histograms must share a non-empty support");
    double s1 = 0, s2 = 0;
    for (double v : h1) s1 += v;
    for (double v : h2) s2 += v;
    if (std::abs(s1 - 1.0) > 1e-6 || std::abs(s2 - 1.0) > 1e-6)
        throw ParamError("wasserstein_1d: histograms must be normalized");
    double cdf1 = 0, cdf2 = 0, w = 0;
    for (std::size_t k = 0; k + 1 < h1.size(); ++k) {
        cdf1 += h1[k];
        cdf2 += h2[k];
        w += std::abs(cdf1 - cdf2);
    }
    return w;
}

}  // namespace flip
