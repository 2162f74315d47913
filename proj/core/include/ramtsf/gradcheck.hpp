#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ramtsf/tensor.hpp"

namespace ramtsf {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  int64_t coords = 0;  // coordinates compared against finite differences
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double max_rel_err = 0.0;
  int64_t seeds = 0;
  double tolerance = 0.0;
  double step = 0.0;
  bool passed = false;
};

// Central-difference check of one scalar loss. `loss` must rebuild its graph
// from the same leaves on every call and be deterministic across calls. One
// taped evaluation provides the autodiff gradients; every listed coordinate
// (or a per-leaf sample of `max_coords` when positive) is then perturbed by
// +-step and the relative error |ad - fd| / max(|ad|, |fd|, 1e-8) is taken.
// Returns the maximum over all compared coordinates.
double max_rel_error(const std::function<Tensor()>& loss, std::span<Tensor> leaves,
                     double step = 1e-5, int64_t max_coords = 0,
                     uint64_t sample_seed = 0, int64_t* coords_out = nullptr);

// Finite-difference sweep over every differentiable op and the block/model
// composites built from them, re-instantiated for seeds 1..`seeds`. Random
// draws that would land near a ReLU or |.| kink are rejected and redrawn, so
// the suite is deterministic and the comparison is made only where the loss
// is smooth.
GradCheckReport run_gradcheck_suite(int64_t seeds, double tolerance = 1e-4,
                                    double step = 1e-5);

std::string gradcheck_report_text(const GradCheckReport& report);

}  // namespace ramtsf
