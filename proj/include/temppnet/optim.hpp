#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "temppnet/autodiff.hpp"

namespace temppnet {

struct GradientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adam with bias correction. One moment pair per parameter entry; the
// step counter is shared across all registered parameters.
class Adam {
 public:
  struct Options {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(Options opt) : opt_(opt) {}

  // Registration order is the update order; each array exactly once.
  void register_param(ad::Param& p);

  // Applies one update from the accumulated gradients, then clears them.
  // A non-finite gradient aborts the step before touching any parameter.
  void step();

  void zero_grad();
  long step_count() const { return t_; }
  const Options& options() const { return opt_; }

 private:
  struct Slot {
    ad::Param* param;
    std::vector<double> m;
    std::vector<double> v;
  };
  Options opt_{};
  std::vector<Slot> slots_;
  long t_ = 0;
};

}  // namespace temppnet
