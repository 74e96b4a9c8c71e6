#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mg1/rng.hpp"

namespace mg1 {

// Cumulative-scan sampler over nonnegative weights. The index mapping is
// pinned (unlike std::discrete_distribution), which the reproducibility
// contracts rely on. Linear scan; supports here are small.
class DiscreteDist {
 public:
  explicit DiscreteDist(std::vector<double> weights) : w_(std::move(weights)) {
    for (double w : w_) {
      if (w < 0.0) throw std::invalid_argument("DiscreteDist: negative weight");
      total_ += w;
    }
    if (w_.empty() || total_ <= 0.0)
      throw std::invalid_argument("DiscreteDist: no positive weight");
  }

  std::size_t operator()(std::mt19937_64& g) const {
    double u = uniform01(g) * total_;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < w_.size(); ++i) {
      acc += w_[i];
      if (u <= acc) return i;
    }
    return w_.size() - 1;
  }

  double total() const { return total_; }
  const std::vector<double>& weights() const { return w_; }

 private:
  std::vector<double> w_;
  double total_ = 0.0;
};

}  // namespace mg1
