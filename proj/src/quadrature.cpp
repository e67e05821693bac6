#include "eoc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace eoc {

namespace {

// Golub-Welsch for a symmetric tridiagonal Jacobi matrix with zero diagonal.
// mu0 is the total mass of the measure.
void golub_welsch(const Eigen::VectorXd& off_diagonal, double mu0, std::vector<double>& nodes,
                  std::vector<double>& weights) {
  const Eigen::Index n = off_diagonal.size() + 1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(Eigen::VectorXd::Zero(n), off_diagonal, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalError("Golub-Welsch eigen-decomposition failed");

  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  // The spectrum is symmetric about zero; enforce it exactly so odd integrands
  // integrate to zero up to roundoff.
  for (std::size_t i = 0, j = nodes.size() - 1; i < j; ++i, --j) {
    const double z = 0.5 * (nodes[j] - nodes[i]);
    const double w = 0.5 * (weights[i] + weights[j]);
    nodes[i] = -z;
    nodes[j] = z;
    weights[i] = weights[j] = w;
  }
  if (nodes.size() % 2 == 1) nodes[nodes.size() / 2] = 0.0;
}

template <class Rule>
const Rule& cached_rule(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const Rule>> rules;
  std::lock_guard lock(mutex);
  auto& slot = rules[order];
  if (!slot) slot = std::make_unique<const Rule>(order);
  return *slot;
}

} // namespace

GaussHermiteRule::GaussHermiteRule(int order) {
  if (order < 1) throw DomainError("quadrature order must be positive");
  if (order == 1) {
    nodes_ = {0.0};
    weights_ = {1.0};
    return;
  }
  Eigen::VectorXd beta(order - 1);
  for (int k = 1; k < order; ++k) beta(k - 1) = std::sqrt(static_cast<double>(k));
  golub_welsch(beta, 1.0, nodes_, weights_);

  // renormalise so the rule integrates constants exactly
  double total = 0.0;
  for (double w : weights_) total += w;
  for (double& w : weights_) w /= total;
}

const GaussHermiteRule& GaussHermiteRule::cached(int order) { return cached_rule<GaussHermiteRule>(order); }

const GaussHermiteRule& default_rule() { return GaussHermiteRule::cached(kDefaultQuadOrder); }

GaussLegendreRule::GaussLegendreRule(int order) {
  if (order < 1) throw DomainError("quadrature order must be positive");
  if (order == 1) {
    nodes_ = {0.0};
    weights_ = {2.0};
    return;
  }
  Eigen::VectorXd beta(order - 1);
  for (int k = 1; k < order; ++k) {
    const double kk = static_cast<double>(k);
    beta(k - 1) = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  golub_welsch(beta, 2.0, nodes_, weights_);
}

const GaussLegendreRule& GaussLegendreRule::cached(int order) { return cached_rule<GaussLegendreRule>(order); }

namespace detail {

void throw_non_finite(double z1, double z2) {
  std::ostringstream os;
  os << "non-finite integrand at z1=" << z1;
  if (!std::isnan(z2)) os << ", z2=" << z2;
  throw NonFiniteIntegrand(os.str());
}

} // namespace detail

namespace {

// Welford accumulator; exact for constant samples.
struct RunningMoments {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  McEstimate result() const {
    if (count < 2) return {mean, 0.0};
    const double variance = m2 / static_cast<double>(count - 1);
    return {mean, std::sqrt(variance / static_cast<double>(count))};
  }
};

void check_samples(std::int64_t samples) {
  if (samples < 1) throw DomainError("mc_oracle: samples must be >= 1");
}

} // namespace

McEstimate mc_oracle(const std::function<double(double)>& f, std::int64_t samples, std::uint64_t seed) {
  check_samples(samples);
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  RunningMoments acc;
  for (std::int64_t i = 0; i < samples; ++i) {
    const double z = normal(engine);
    const double v = f(z);
    if (!std::isfinite(v)) detail::throw_non_finite(z, NAN);
    acc.push(v);
  }
  return acc.result();
}

McEstimate mc_oracle(const std::function<double(double, double)>& f, double q11, double q22, double c,
                     std::int64_t samples, std::uint64_t seed) {
  check_samples(samples);
  if (!(q11 > 0.0) || !(q22 > 0.0) || !(std::abs(c) <= 1.0)) {
    throw DomainError("mc_oracle: need q11, q22 > 0 and |c| <= 1");
  }
  const double s1 = std::sqrt(q11);
  const double s2 = std::sqrt(q22);
  const double perp = std::sqrt(std::max(0.0, (1.0 - c) * (1.0 + c)));
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  RunningMoments acc;
  for (std::int64_t i = 0; i < samples; ++i) {
    const double z1 = normal(engine);
    const double z2 = normal(engine);
    const double v = f(s1 * z1, s2 * (c * z1 + perp * z2));
    if (!std::isfinite(v)) detail::throw_non_finite(z1, z2);
    acc.push(v);
  }
  return acc.result();
}

} // namespace eoc
