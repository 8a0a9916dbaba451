#pragma once

#include "texbank/descriptors.hpp"
#include "texbank/image.hpp"
#include "texbank/types.hpp"

#include <cmath>
#include <random>

namespace texbank::bench {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline GrayImage stripes(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  std::vector<double> px(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      px[static_cast<std::size_t>(y) * size + x] = 0.5 + 0.4 * std::sin(0.7 * x + 0.3 * y) + noise(rng);
  return GrayImage(size, size, std::move(px));
}

inline DescriptorSample random_sample(std::mt19937_64& rng, Index n, Index dim) {
  DescriptorSample s;
  s.descriptors = random_matrix(rng, n, dim);
  s.image_width = 256;
  s.image_height = 256;
  std::uniform_real_distribution<double> u(0.0, 255.0);
  for (Index i = 0; i < n; ++i) s.positions.push_back({u(rng), u(rng), 1.0});
  return s;
}

}  // namespace texbank::bench
