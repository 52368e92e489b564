#pragma once

#include <cstdint>
#include <vector>

#include "rgbpose/gradcheck.hpp"

namespace rgbpose::run {

/// Finite-difference checks for every differentiable op plus attention,
/// heads and the end-to-end loss graph at toy sizes.
std::vector<diff::GradCheckReport> gradient_suite(uint64_t seed);

}  // namespace rgbpose::run
