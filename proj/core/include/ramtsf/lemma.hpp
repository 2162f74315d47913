#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ramtsf/tensor.hpp"

namespace ramtsf {

struct LemmaCase {
  int64_t length = 0;
  double beta = 0.0;
  double uniform_deviation = 0.0;  // max |softmax(const)_i - 1/n|
};

// Degeneration sweep. Three families of identities, all exact up to
// floating-point roundoff:
//   - softmax of a constant vector is the uniform vector 1/n at any
//     temperature;
//   - a uniform row-stochastic score matrix turns attention output into the
//     column mean of V;
//   - with V = X and constant-row X, the residual sum X + S V is 2 X.
struct LemmaReport {
  std::vector<LemmaCase> cases;
  double max_uniform_deviation = 0.0;
  double max_colmean_deviation = 0.0;
  double max_residual_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

LemmaReport run_lemma_suite(const std::vector<int64_t>& lengths,
                            const std::vector<double>& betas, uint64_t seed = 1,
                            double tolerance = 1e-12);

// The acceptance sweep: lengths 1..64, betas {0.1, 1, 10}.
LemmaReport run_default_lemma_suite(uint64_t seed = 1);

std::string lemma_report_text(const LemmaReport& report);

}  // namespace ramtsf
