// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "septfa/core/error.hpp"

namespace septfa::nn {

struct Shape {
  int batch = 1;
  int channels = 1;
  int frames = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(batch) * channels * static_cast<std::size_t>(frames);
  }
  std::string str() const {
    return "[" + std::to_string(batch) + ", " + std::to_string(channels) + ", " +
           std::to_string(frames) + "]";
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Rank-3 array laid out [batch][channels][frames].
struct Tensor3 {
  Shape shape;
  std::vector<double> data;

  Tensor3() = default;
  explicit Tensor3(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  Tensor3(Shape s, std::vector<double> d) : shape(s), data(std::move(d)) {
    if (data.size() != shape.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape.str());
    }
  }

  int batch() const { return shape.batch; }
  int channels() const { return shape.channels; }
  int frames() const { return shape.frames; }
  std::size_t size() const { return data.size(); }

  double& at(int b, int c, int l) {
    return data[(static_cast<std::size_t>(b) * shape.channels + c) * shape.frames + l];
  }
  double at(int b, int c, int l) const {
    return data[(static_cast<std::size_t>(b) * shape.channels + c) * shape.frames + l];
  }
  double* plane(int b) { return data.data() + static_cast<std::size_t>(b) * shape.channels * shape.frames; }
  const double* plane(int b) const {
    return data.data() + static_cast<std::size_t>(b) * shape.channels * shape.frames;
  }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

}  // namespace septfa::nn
