#pragma once

// Central finite-difference oracle used by the unit and acceptance suites.
// Deliberately independent of the reverse-mode path it checks: it only
// evaluates forward passes at perturbed parameter values.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "zskd/tensor.hpp"

namespace zskd::testing {

struct GradCheck {
  double h = 1e-5;
  double atol = 1e-4;
  double rtol = 1e-3;
  // Check at most this many coordinates per leaf (-1 = all), sampled
  // deterministically when limited.
  int64_t max_coords = -1;

  struct Result {
    bool ok = true;
    double worst_abs = 0.0;
    double worst_rel = 0.0;
    std::string detail;
  };

  // f() must rebuild the forward graph from the leaves on every call and
  // return a scalar loss tensor.
  Result run(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
             uint64_t coord_seed = 0) const {
    Result res;
    for (Tensor& leaf : leaves) leaf.zero_grad();
    Tensor loss = f();
    loss.backward();

    RngState pick(coord_seed ^ 0xfdc0ffee);
    for (size_t li = 0; li < leaves.size(); ++li) {
      Tensor& leaf = leaves[li];
      const std::vector<double>& analytic = leaf.grad();
      int64_t n = leaf.numel();
      std::vector<int64_t> coords;
      if (max_coords < 0 || max_coords >= n) {
        coords.resize(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
      } else {
        for (int64_t i = 0; i < max_coords; ++i) {
          coords.push_back(static_cast<int64_t>(pick.below(static_cast<uint64_t>(n))));
        }
      }
      for (int64_t c : coords) {
        double saved = leaf.data()[c];
        double fd;
        {
          NoGradGuard ng;
          leaf.data()[c] = saved + h;
          double up = f().item();
          leaf.data()[c] = saved - h;
          double down = f().item();
          leaf.data()[c] = saved;
          fd = (up - down) / (2.0 * h);
        }
        double a = analytic[static_cast<size_t>(c)];
        double abs_err = std::fabs(a - fd);
        double rel_err = abs_err / std::max(1e-300, std::fabs(fd));
        res.worst_abs = std::max(res.worst_abs, abs_err);
        if (abs_err > atol) res.worst_rel = std::max(res.worst_rel, rel_err);
        if (abs_err > std::max(atol, rtol * std::fabs(fd))) {
          res.ok = false;
          if (res.detail.empty()) {
            res.detail = "leaf " + std::to_string(li) + " coord " +
                         std::to_string(c) + ": analytic " + std::to_string(a) +
                         " vs fd " + std::to_string(fd);
          }
        }
      }
    }
    return res;
  }
};

}  // namespace zskd::testing
