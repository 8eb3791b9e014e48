#include "i2preg/embedding.hpp"

#include <cmath>

namespace i2preg {

std::vector<double> fourier_embed(double x, std::size_t length) {
  std::vector<double> out;
  out.reserve(2 * length + 1);
  out.push_back(x);
  for (std::size_t l = 0; l < length; ++l) {
    const double f = std::ldexp(x, static_cast<int>(l));
    out.push_back(std::sin(f));
    out.push_back(std::cos(f));
  }
  return out;
}

std::vector<double> fourier_embed(std::span<const double> position, std::size_t length) {
  std::vector<double> out;
  out.reserve(position.size() * (2 * length + 1));
  for (double x : position) {
    const auto e = fourier_embed(x, length);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

}  // namespace i2preg
