#include "temppnet/optim.hpp"

#include <cmath>

namespace temppnet {

void Adam::register_param(ad::Param& p) {
  for (const Slot& s : slots_)
    if (s.param == &p || s.param->name == p.name)
      throw GradientError("Adam: parameter '" + p.name + "' registered twice");
  slots_.push_back({&p, std::vector<double>(p.value.size(), 0.0),
                    std::vector<double>(p.value.size(), 0.0)});
}

void Adam::step() {
  for (const Slot& s : slots_)
    for (double gv : s.param->grad)
      if (!std::isfinite(gv))
        throw GradientError("Adam: non-finite gradient in parameter '" +
                            s.param->name + "'");
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (Slot& s : slots_) {
    ad::Param& p = *s.param;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gv = p.grad[i];
      s.m[i] = opt_.beta1 * s.m[i] + (1.0 - opt_.beta1) * gv;
      s.v[i] = opt_.beta2 * s.v[i] + (1.0 - opt_.beta2) * gv * gv;
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      p.value[i] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
    }
    p.zero_grad();
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.param->zero_grad();
}

}  // namespace temppnet
