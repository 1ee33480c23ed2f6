#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "flip/error.hpp"

namespace flip {

template <typename S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;  // row-major

    Tensor() = default;
    explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
        data.assign(numel_of(shape), S(0));
    }
    Tensor(std::vector<int> shp, std::vector<S> d) : shape(std::move(shp)), data(std::move(d)) {
        if (data.size() != numel_of(shape)) throw ParamError("tensor: data length != product of shape");
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ParamError("tensor: non-positive dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    void zero() { std::fill(data.begin(), data.end(), S(0)); }

    bool finite() const {
        for (S v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

template <typename S, typename T>
Tensor<T> tensor_cast(const Tensor<S>& a) {
    Tensor<T> out;
    out.shape = a.shape;
    out.data.resize(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = static_cast<T>(a.data[i]);
    return out;
}

}  // namespace flip
