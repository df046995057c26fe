#pragma once

#include "energia/types.hpp"

#include <cmath>
#include <functional>
#include <optional>

namespace energia {

struct Optimum {
  Vec theta;
  double value = 0.0;
};

// Objective L with analytic gradient and the shift c used to form l = sqrt(L + c).
struct ObjectiveSpec {
  std::function<double(const Vec&)> eval;
  std::function<Vec(const Vec&)> grad;
  double c = 1.0;
  std::optional<Optimum> optimum;
  std::optional<double> alpha;  // smoothness constant
  std::optional<double> mu;      // PL constant

  // Shift default: 1 - L* when the optimum value is known.
  static double default_shift(const std::optional<Optimum>& opt) { return opt ? 1.0 - opt->value : 1.0; }

  double l(const Vec& theta) const { return std::sqrt(eval(theta) + c); }
};

}  // namespace energia
