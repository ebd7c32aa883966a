#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dllap/error.hpp"

namespace dllap {

// Frame-major, channel-minor activation matrix: values[t * channels + c].
struct FrameTensor {
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::vector<float> values;

  FrameTensor() = default;
  FrameTensor(std::size_t t, std::size_t c, float fill = 0.0f)
      : frames(t), channels(c), values(t * c, fill) {}
  FrameTensor(std::size_t t, std::size_t c, std::vector<float> v)
      : frames(t), channels(c), values(std::move(v)) {
    if (values.size() != t * c) {
      throw InvalidArgument("FrameTensor: value count does not match frames x channels");
    }
  }

  float& at(std::size_t t, std::size_t c) { return values[t * channels + c]; }
  float at(std::size_t t, std::size_t c) const { return values[t * channels + c]; }

  std::span<float> frame(std::size_t t) { return {values.data() + t * channels, channels}; }
  std::span<const float> frame(std::size_t t) const {
    return {values.data() + t * channels, channels};
  }

  // First `t` frames.
  FrameTensor head(std::size_t t) const {
    FrameTensor out(t, channels);
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(t * channels),
              out.values.begin());
    return out;
  }

  bool operator==(const FrameTensor&) const = default;
};

}  // namespace dllap
