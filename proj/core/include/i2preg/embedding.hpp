#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace i2preg {

/// Positional Fourier features [x, sin(2^0 x), cos(2^0 x), ..., sin(2^{L-1} x), cos(2^{L-1} x)].
/// Length is 2L + 1 and element 0 is x itself.
std::vector<double> fourier_embed(double x, std::size_t length);

/// Component-wise embedding of a multi-dimensional position, concatenated in
/// component order; length is dims * (2L + 1).
std::vector<double> fourier_embed(std::span<const double> position, std::size_t length);

}  // namespace i2preg
