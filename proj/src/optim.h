#ifndef MORSEM_OPTIM_H
#define MORSEM_OPTIM_H

#include <cmath>
#include <map>
#include <string>

#include "linalg.h"

namespace morsem {

// Adam in descent form, one independent moment pair per named parameter
// block. Blocks touched at different rates keep their own step counters so
// bias correction stays right for sparsely updated parameters.
class AdamSlots {
 public:
  AdamSlots(double lr, double beta1, double beta2, double epsilon)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(epsilon) {}

  void Step(const std::string& name, Vec* param, const Vec& grad) {
    Slot& s = slots_[name];
    if (s.m.empty()) {
      s.m.assign(param->size(), 0.0);
      s.v.assign(param->size(), 0.0);
    }
    s.t += 1;
    double c1 = 1.0 - std::pow(b1_, static_cast<double>(s.t));
    double c2 = 1.0 - std::pow(b2_, static_cast<double>(s.t));
    for (std::size_t i = 0; i < param->size(); ++i) {
      s.m[i] = b1_ * s.m[i] + (1.0 - b1_) * grad[i];
      s.v[i] = b2_ * s.v[i] + (1.0 - b2_) * grad[i] * grad[i];
      double mh = s.m[i] / c1;
      double vh = s.v[i] / c2;
      (*param)[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
  }

 private:
  struct Slot {
    Vec m, v;
    long t = 0;
  };
  double lr_, b1_, b2_, eps_;
  std::map<std::string, Slot> slots_;
};

// AdaGrad in ascent form, one accumulator per named parameter block.
class AdaGradSlots {
 public:
  AdaGradSlots(double lr, double epsilon) : lr_(lr), eps_(epsilon) {}

  // param += lr * g / (sqrt(sum g^2) + eps), elementwise.
  void Step(const std::string& name, Vec* param, const Vec& grad) {
    Vec& acc = slots_[name];
    if (acc.empty()) acc.assign(param->size(), 0.0);
    for (std::size_t i = 0; i < param->size(); ++i) {
      acc[i] += grad[i] * grad[i];
      (*param)[i] += lr_ * grad[i] / (std::sqrt(acc[i]) + eps_);
    }
  }

 private:
  double lr_, eps_;
  std::map<std::string, Vec> slots_;
};

}  // namespace morsem

#endif
