#pragma once

// Self-checks of the algebraic identities linking the likelihoods, the CLK
// intercept-only anchor, and analytic gradients against finite differences.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pbsdm {

struct VerifyCheck {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 20160401;
  int kernel_draws = 1000;
  int lele_instances = 1000;
  int offset_points = 100;
  int gradient_points = 20;
  // Replaces r1n in the kernel identity check (mutation testing of the suite).
  std::function<double(double p, double pi, std::int64_t n1, std::int64_t n0)> r1n_override;
};

std::vector<VerifyCheck> run_verify(const VerifyOptions& options = {});

bool all_passed(const std::vector<VerifyCheck>& checks);

}  // namespace pbsdm
