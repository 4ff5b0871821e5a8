#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ctsls/dataset.hpp"

namespace fixtures {

/// Random IV sample with endogenous exposure and independent normal
/// censoring; `censor_shift` = +inf gives an uncensored sample.
inline ctsls::CensoredSample random_sample(std::uint64_t seed, std::size_t n, std::size_t p, std::size_t q,
                                           double censor_shift) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd z(N, static_cast<Eigen::Index>(q)), d(N, static_cast<Eigen::Index>(p));
  Eigen::VectorXd x(N), t(N);
  std::vector<std::uint8_t> event(n);
  for (Eigen::Index i = 0; i < N; ++i) {
    double xi = 0.0, yi = 0.0;
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      z(i, k) = norm(gen);
      xi += 0.6 * z(i, k);
    }
    for (Eigen::Index k = 0; k < d.cols(); ++k) {
      d(i, k) = norm(gen);
      xi += 0.3 * d(i, k);
      yi += 0.5 * d(i, k);
    }
    const double u = norm(gen);
    xi += u + 0.5 * norm(gen);
    yi += 1.0 * xi - 0.7 * u + 0.6 * norm(gen);
    x[i] = xi;
    const double c = censor_shift + 1.5 * norm(gen);
    const bool observed = !(c < yi);
    event[static_cast<std::size_t>(i)] = observed ? 1 : 0;
    t[i] = observed ? yi : c;
  }
  return {t, event, x, d, z};
}

/// Same, but guarantees the largest observation is an event (proper tail).
inline ctsls::CensoredSample random_sample_proper_tail(std::uint64_t seed, std::size_t n, std::size_t p,
                                                       std::size_t q, double censor_shift) {
  for (std::uint64_t s = seed;; ++s) {
    auto sample = random_sample(s, n, p, q, censor_shift);
    Eigen::Index imax = 0;
    sample.log_time().maxCoeff(&imax);
    if (sample.event()[static_cast<std::size_t>(imax)] == 1) return sample;
  }
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::vector<int> to_int(const std::vector<std::uint8_t>& v) { return {v.begin(), v.end()}; }

}  // namespace fixtures
