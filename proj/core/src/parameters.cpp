#include "ctsls/parameters.hpp"

#include <fmt/format.h>

#include "ctsls/error.hpp"

namespace ctsls {

Eigen::VectorXd ParameterVector::alpha() const {
  Eigen::VectorXd a(static_cast<Eigen::Index>(stage1_dim(q(), p())));
  a << alpha0, alpha1, alpha2;
  return a;
}

Eigen::VectorXd ParameterVector::beta() const {
  Eigen::VectorXd b(static_cast<Eigen::Index>(stage2_dim(p())));
  b << beta0, beta1, beta2;
  return b;
}

Eigen::VectorXd ParameterVector::stacked() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(dim(q(), p())));
  theta << alpha(), beta();
  return theta;
}

ParameterVector ParameterVector::from_blocks(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                                             std::size_t q, std::size_t p) {
  const auto qi = static_cast<Eigen::Index>(q);
  const auto pi = static_cast<Eigen::Index>(p);
  if (alpha.size() != 1 + qi + pi || beta.size() != 2 + pi)
    throw NumericalError(fmt::format("parameter blocks have sizes {}/{}; expected {}/{}", alpha.size(),
                                     beta.size(), 1 + qi + pi, 2 + pi));
  ParameterVector t;
  t.alpha0 = alpha[0];
  t.alpha1 = alpha.segment(1, qi);
  t.alpha2 = alpha.segment(1 + qi, pi);
  t.beta0 = beta[0];
  t.beta1 = beta[1];
  t.beta2 = beta.segment(2, pi);
  return t;
}

ParameterVector ParameterVector::unstack(const Eigen::VectorXd& theta, std::size_t q, std::size_t p) {
  const auto s1 = static_cast<Eigen::Index>(stage1_dim(q, p));
  if (theta.size() != static_cast<Eigen::Index>(dim(q, p)))
    throw NumericalError(fmt::format("stacked parameter has size {}; expected {}", theta.size(), dim(q, p)));
  return from_blocks(theta.head(s1), theta.tail(theta.size() - s1), q, p);
}

std::vector<std::string> ParameterVector::names(std::size_t q, std::size_t p) {
  std::vector<std::string> out{"alpha0"};
  for (std::size_t k = 1; k <= q; ++k) out.push_back(fmt::format("alpha1_{}", k));
  for (std::size_t k = 1; k <= p; ++k) out.push_back(fmt::format("alpha2_{}", k));
  out.emplace_back("beta0");
  out.emplace_back("beta1");
  for (std::size_t k = 1; k <= p; ++k) out.push_back(fmt::format("beta2_{}", k));
  return out;
}

}  // namespace ctsls
