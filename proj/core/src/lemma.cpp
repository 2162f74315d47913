#include "ramtsf/lemma.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ramtsf/attention.hpp"
#include "ramtsf/errors.hpp"

namespace ramtsf {

namespace {

MhaParams uniform_forcing_params(int64_t d) {
  MhaParams p;
  p.w_q = Tensor::zeros({d, d});
  p.b_q = Tensor::zeros({d});
  p.w_k = Tensor::zeros({d, d});
  p.b_k = Tensor::zeros({d});
  p.w_v = Tensor::identity(d);
  p.b_v = Tensor::zeros({d});
  p.w_o = Tensor::identity(d);
  p.b_o = Tensor::zeros({d});
  p.heads = 1;
  return p;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

LemmaReport run_lemma_suite(const std::vector<int64_t>& lengths,
                            const std::vector<double>& betas, uint64_t seed,
                            double tolerance) {
  if (lengths.empty()) throw ValueError("lemma suite needs at least one length");
  if (betas.empty()) throw ValueError("lemma suite needs at least one beta");
  for (int64_t n : lengths) {
    if (n < 1) throw ValueError("lemma suite lengths must be positive");
  }
  for (double b : betas) {
    if (!(b > 0.0)) throw ValueError("lemma suite betas must be positive");
  }
  LemmaReport report;
  report.tolerance = tolerance;
  Rng rng(Rng::mix(seed, 0x1E77A));
  NoGradScope no_grad;

  for (int64_t n : lengths) {
    for (double beta : betas) {
      const double constants[3] = {0.0, rng.uniform(-5.0, 5.0), rng.uniform(-40.0, 40.0)};
      LemmaCase lc{n, beta, 0.0};
      for (double c : constants) {
        Tensor y = softmax(Tensor::full({n}, c), -1, beta);
        const double uniform = 1.0 / static_cast<double>(n);
        for (double v : y.data()) {
          lc.uniform_deviation = std::max(lc.uniform_deviation, std::fabs(v - uniform));
        }
      }
      report.cases.push_back(lc);
      report.max_uniform_deviation =
          std::max(report.max_uniform_deviation, lc.uniform_deviation);
    }

    const int64_t d = 4;

    // Uniform score matrix applied explicitly: every output row must be the
    // column mean of V.
    {
      Tensor v = Tensor::from_data({n, d}, [&] {
        std::vector<double> vals(static_cast<size_t>(n * d));
        for (auto& x : vals) x = rng.uniform(-3.0, 3.0);
        return vals;
      }());
      Tensor s = Tensor::full({n, n}, 1.0 / static_cast<double>(n));
      Tensor out = matmul(s, v);
      std::vector<double> mean(static_cast<size_t>(d), 0.0);
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < d; ++j) {
          mean[static_cast<size_t>(j)] += v.data()[static_cast<size_t>(i * d + j)];
        }
      }
      for (auto& m : mean) m /= static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < d; ++j) {
          report.max_colmean_deviation = std::max(
              report.max_colmean_deviation,
              std::fabs(out.data()[static_cast<size_t>(i * d + j)] -
                        mean[static_cast<size_t>(j)]));
        }
      }

      // The same identity through the attention path: zero Q/K projections
      // force constant logits, identity V/O leave the values untouched.
      MhaParams p = uniform_forcing_params(d);
      Tensor attn = multi_head_attention(v, p, false);
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < d; ++j) {
          report.max_colmean_deviation = std::max(
              report.max_colmean_deviation,
              std::fabs(attn.data()[static_cast<size_t>(i * d + j)] -
                        mean[static_cast<size_t>(j)]));
        }
      }
    }

    // Constant-row input with V = X: attention returns X itself, so the
    // residual sum collapses to 2 X.
    {
      std::vector<double> row(static_cast<size_t>(d));
      for (auto& x : row) x = rng.uniform(-3.0, 3.0);
      std::vector<double> vals(static_cast<size_t>(n * d));
      for (int64_t i = 0; i < n; ++i) {
        std::copy(row.begin(), row.end(), vals.begin() + i * d);
      }
      Tensor x = Tensor::from_data({n, d}, std::move(vals));
      MhaParams p = uniform_forcing_params(d);
      Tensor y = add(x, multi_head_attention(x, p, false));
      Tensor doubled = scale(x, 2.0);
      report.max_residual_deviation = std::max(
          report.max_residual_deviation, max_abs_diff(y.data(), doubled.data()));
    }
  }

  report.passed = report.max_uniform_deviation < tolerance &&
                  report.max_colmean_deviation < tolerance &&
                  report.max_residual_deviation < tolerance;
  return report;
}

LemmaReport run_default_lemma_suite(uint64_t seed) {
  std::vector<int64_t> lengths(64);
  for (int64_t i = 0; i < 64; ++i) lengths[static_cast<size_t>(i)] = i + 1;
  return run_lemma_suite(lengths, {0.1, 1.0, 10.0}, seed);
}

std::string lemma_report_text(const LemmaReport& report) {
  std::string out;
  char line[160];
  int64_t min_len = 0, max_len = 0;
  for (const auto& c : report.cases) {
    min_len = min_len == 0 ? c.length : std::min(min_len, c.length);
    max_len = std::max(max_len, c.length);
  }
  std::snprintf(line, sizeof(line), "lengths %lld..%lld, %zu sweep cases\n",
                static_cast<long long>(min_len), static_cast<long long>(max_len),
                report.cases.size());
  out += line;
  std::snprintf(line, sizeof(line), "max |softmax(const) - 1/n|   %.3e\n",
                report.max_uniform_deviation);
  out += line;
  std::snprintf(line, sizeof(line), "max |uniform-S out - colmean| %.3e\n",
                report.max_colmean_deviation);
  out += line;
  std::snprintf(line, sizeof(line), "max |(x + S x) - 2x|          %.3e\n",
                report.max_residual_deviation);
  out += line;
  std::snprintf(line, sizeof(line), "tolerance %.1e  %s\n", report.tolerance,
                report.passed ? "PASS" : "FAIL");
  out += line;
  return out;
}

}  // namespace ramtsf
