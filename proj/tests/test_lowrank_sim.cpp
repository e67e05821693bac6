#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "eoc/errors.hpp"
#include "eoc/lowrank_sim.hpp"
#include "eoc/meanfield.hpp"
#include "eoc/rmt.hpp"

using eoc::Activation;
using eoc::ActivationFamily;
using eoc::Ensemble;
using eoc::NetworkConfig;

namespace {

NetworkConfig make(Activation act, Ensemble ens, double gamma, double sa2, double sb2, int depth, int width) {
  NetworkConfig cfg;
  cfg.activation = ActivationFamily(act);
  cfg.ensemble = ens;
  cfg.gamma = gamma;
  cfg.sigma_alpha2 = sa2;
  cfg.sigma_b2 = sb2;
  cfg.depth = depth;
  cfg.width = width;
  return cfg;
}

// Cumulative distribution of the Marchenko-Pastur bulk, normalised to mass 1.
double mp_bulk_cdf(double gamma, double s2, double x) {
  const auto bulk = eoc::mp_bulk(gamma, s2);
  if (x <= bulk.lower) return 0.0;
  if (x >= bulk.upper) return 1.0;
  // lam = a + (b - a)(1 - cos t)/2 removes the edge singularities.
  const double a = bulk.lower, b = bulk.upper, half = 0.5 * (b - a);
  const double t_max = std::acos(1.0 - (x - a) / half);
  const auto& rule = eoc::GaussLegendreRule::cached(80);
  const double mass = rule.integrate(
      [&](double t) {
        const double lam = a + half * (1.0 - std::cos(t));
        return eoc::mp_density_eval(gamma, s2, lam) * half * std::sin(t);
      },
      0.0, t_max);
  return mass / gamma;
}

}  // namespace

TEST(Substream, DeterministicAndDistinct) {
  auto a = eoc::substream(1, 2, 3);
  auto b = eoc::substream(1, 2, 3);
  EXPECT_EQ(a(), b());
  EXPECT_NE(eoc::substream(1, 2, 3)(), eoc::substream(1, 2, 4)());
  EXPECT_NE(eoc::substream(1, 2, 3)(), eoc::substream(1, 3, 3)());
  EXPECT_NE(eoc::substream(1, 2, 3)(), eoc::substream(2, 2, 3)());
}

TEST(Frame, OrthonormalColumns) {
  auto rng = eoc::substream(5, 0, 1);
  const auto c = eoc::sample_frame(300, 80, rng);
  const Eigen::MatrixXd gram = c.transpose() * c;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(80, 80)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Frame, RowNormsConcentrate) {
  // Each row of an N x r Haar frame has squared norm close to gamma.
  const int n = 2000, r = 500;
  auto rng = eoc::substream(6, 0, 1);
  const auto c = eoc::sample_frame(n, r, rng);
  const Eigen::VectorXd rows = c.rowwise().squaredNorm();
  EXPECT_NEAR(rows.mean(), 0.25, 0.05);
  const auto within = (rows.array() - 0.25).abs().cast<double>();
  const double fraction = (within < 0.05).cast<double>().mean();
  EXPECT_GE(fraction, 0.99);
}

TEST(Weights, RankBound) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.2, 1.5, 0, 1, 150);
  auto rng = eoc::substream(3, 0, 1);
  const auto w = eoc::sample_weights(cfg, 150, 150, rng);
  EXPECT_EQ(w.rank(), 30);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(w.assemble()).singularValues();
  EXPECT_LE(sv(30), 1e-10 * sv(0));
}

TEST(Weights, OrthogonalSquaredSingularValues) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_orthogonal, 0.4, 2.5, 0, 1, 100);
  auto rng = eoc::substream(4, 0, 1);
  const auto w = eoc::sample_weights(cfg, 100, 100, rng);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(w.assemble()).singularValues();
  for (int k = 0; k < 40; ++k) EXPECT_NEAR(sv(k) * sv(k), 2.5, 1e-10);
  for (int k = 40; k < 100; ++k) EXPECT_LT(sv(k), 1e-10);
}

TEST(Weights, FullRankOrthogonalIsScaledIsometry) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_orthogonal, 1.0, 1.7, 0, 1, 120);
  auto rng = eoc::substream(8, 0, 1);
  const Eigen::MatrixXd w = eoc::sample_weights(cfg, 120, 120, rng).assemble();
  EXPECT_LT((w.transpose() * w - 1.7 * Eigen::MatrixXd::Identity(120, 120)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Weights, GaussianEntryVariance) {
  const int n = 400;
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.25, 2.0, 0, 1, n);
  auto rng = eoc::substream(9, 0, 1);
  const Eigen::ArrayXXd sq = eoc::sample_weights(cfg, n, n, rng).assemble().array().square();
  const double mean = sq.mean();
  const double se = std::sqrt((sq - mean).square().mean() / sq.size());
  EXPECT_NEAR(mean, 0.25 * 2.0 / n, 3 * se);
}

TEST(Weights, GaussianSpectrumMatchesMarchenkoPastur) {
  const int n = 1000;
  const double gamma = 0.25, s2 = 1.0;
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, gamma, s2, 0, 1, n);
  auto rng = eoc::substream(10, 0, 1);
  const auto w = eoc::sample_weights(cfg, n, n, rng);
  // Nonzero eigenvalues of W^T W = A^T A are those of A A^T.
  const Eigen::MatrixXd gram = w.coeffs * w.coeffs.transpose();
  Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues();
  std::sort(eig.data(), eig.data() + eig.size());
  const double m = static_cast<double>(eig.size());
  double ks = 0.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    const double f = mp_bulk_cdf(gamma, s2, eig(i));
    ks = std::max({ks, std::abs(f - i / m), std::abs(f - (i + 1) / m)});
  }
  EXPECT_LT(ks, 0.05);
}

TEST(Weights, RejectsBadRank) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_orthogonal, 0.5, 1, 0, 1, 10);
  auto rng = eoc::substream(1, 0, 1);
  EXPECT_THROW(eoc::sample_weights(cfg, 10, 8, rng), eoc::DomainError);
  auto tiny = cfg;
  tiny.gamma = 0.01;
  EXPECT_THROW(eoc::sample_weights(tiny, 10, 10, rng), eoc::DomainError);
}

TEST(Inputs, ExactLengthAndCorrelation) {
  auto rng = eoc::substream(2, 0, 0);
  const auto x = eoc::input_with_length(500, 0.7, rng);
  EXPECT_NEAR(x.squaredNorm() / 500, 0.7, 1e-13);
  const auto [a, b] = eoc::input_pair(500, 0.4, 0.3, rng);
  EXPECT_NEAR(a.squaredNorm() / 500, 0.4, 1e-13);
  EXPECT_NEAR(b.squaredNorm() / 500, 0.4, 1e-13);
  EXPECT_NEAR(a.dot(b) / (a.norm() * b.norm()), 0.3, 1e-13);
}

TEST(Layer, PythagorasInFrameCoordinates) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.3, 3.0, 0.2, 1, 300);
  const auto layer = eoc::sample_layer(cfg, 12, 0, 1);
  auto rng = eoc::substream(12, 0, 0);
  const Eigen::VectorXd z = eoc::input_with_length(300, 0.8, rng).array().tanh().matrix();
  const Eigen::VectorXd y = layer.frame_coefficients(z);
  const Eigen::VectorXd h = layer.forward(z);
  EXPECT_NEAR(h.squaredNorm(), y.squaredNorm(), 1e-8 * y.squaredNorm());
}

TEST(Layer, SharedBiasIsConstantAlongFrame) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.3, 3.0, 0.2, 1, 100);
  eoc::SimOptions opts;
  opts.bias = eoc::BiasMode::shared;
  const auto layer = eoc::sample_layer(cfg, 12, 0, 1, opts);
  EXPECT_EQ(layer.bias_coeffs.minCoeff(), layer.bias_coeffs.maxCoeff());
  const auto per_dir = eoc::sample_layer(cfg, 12, 0, 1);
  EXPECT_NE(per_dir.bias_coeffs.minCoeff(), per_dir.bias_coeffs.maxCoeff());
}

TEST(Forward, Deterministic) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.5, 2.0, 0.1, 6, 200);
  const auto a = eoc::forward_pair(cfg, 0.5, 0.4, 77, 3);
  const auto b = eoc::forward_pair(cfg, 0.5, 0.4, 77, 3);
  EXPECT_EQ(a.correlation.values, b.correlation.values);
  EXPECT_EQ(a.length1.values, b.length1.values);
  const auto c = eoc::forward_pair(cfg, 0.5, 0.4, 77, 4);
  EXPECT_NE(a.correlation.values, c.correlation.values);
  EXPECT_TRUE(a.correlation.well_formed());
}

TEST(Forward, IdenticalInputsStayIdentical) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.25, 8.0, 0.36, 15, 200);
  const auto pair = eoc::forward_pair(cfg, 0.5, 1.0, 5, 0);
  for (double c : pair.correlation.scalars()) EXPECT_EQ(c, 1.0);
}

TEST(Forward, IdentityChainScalesLength) {
  const int width = 400, depth = 5, trials = 20;
  const double wv = 0.8;
  const auto cfg = make(Activation::identity, Ensemble::lowrank_gaussian, 0.5, wv / 0.5, 0.0, depth, width);
  const auto recs = eoc::run_trials(trials, [&](int t) {
    auto rng = eoc::substream(31, t, 0);
    return eoc::forward_lengths(cfg, eoc::input_with_length(width, 1.0, rng), 31, t).scalars();
  });
  for (int l = 1; l <= depth; ++l) {
    std::vector<double> v;
    for (const auto& r : recs) v.push_back(r[l]);
    const auto ms = eoc::mean_std(v);
    EXPECT_NEAR(ms.mean, std::pow(wv, l), 3 * ms.std / std::sqrt(trials)) << l;
  }
}

TEST(Forward, LengthsFollowLengthMap) {
  const int width = 500, depth = 6, trials = 20;
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.25, 6.0, 0.4, depth, width);
  const double q0 = 2.0;
  const auto recs = eoc::run_trials(trials, [&](int t) {
    auto rng = eoc::substream(41, t, 0);
    return eoc::forward_lengths(cfg, eoc::input_with_length(width, q0, rng), 41, t).scalars();
  });
  double q = q0;
  for (int l = 1; l <= depth; ++l) {
    q = eoc::length_map(cfg, q);
    std::vector<double> v;
    for (const auto& r : recs) v.push_back(r[l]);
    const auto ms = eoc::mean_std(v);
    EXPECT_NEAR(ms.mean, q, 3 * ms.std / std::sqrt(trials)) << l;
  }
}

TEST(Forward, OrthogonalEnsembleFollowsLengthMap) {
  const int width = 400, depth = 4, trials = 20;
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_orthogonal, 0.5, 3.0, 0.2, depth, width);
  const auto recs = eoc::run_trials(trials, [&](int t) {
    auto rng = eoc::substream(43, t, 0);
    return eoc::forward_lengths(cfg, eoc::input_with_length(width, 1.0, rng), 43, t).scalars();
  });
  double q = 1.0;
  for (int l = 1; l <= depth; ++l) {
    q = eoc::length_map(cfg, q);
    std::vector<double> v;
    for (const auto& r : recs) v.push_back(r[l]);
    const auto ms = eoc::mean_std(v);
    EXPECT_NEAR(ms.mean, q, 3 * ms.std / std::sqrt(trials)) << l;
  }
}

TEST(Forward, HiddenUnitsLookGaussian) {
  // Jarque-Bera statistic of {h^l_j}_j at width 2000; 9.21 is the 1% point
  // of chi-squared with two degrees of freedom.
  const int width = 2000;
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.25, 6.0, 0.2, 3, width);
  auto net = eoc::sample_network(cfg, 1.0, 51, 0);
  const auto hs = eoc::forward(net);
  const Eigen::ArrayXd h = hs.back().array();
  const double mean = h.mean();
  const double m2 = (h - mean).square().mean();
  const double skew = (h - mean).cube().mean() / std::pow(m2, 1.5);
  const double kurt = (h - mean).square().square().mean() / (m2 * m2);
  const double jb = width / 6.0 * (skew * skew + 0.25 * (kurt - 3) * (kurt - 3));
  EXPECT_LT(jb, 9.21);
}

TEST(Forward, OverflowReportsLayer) {
  const auto cfg = make(Activation::identity, Ensemble::lowrank_gaussian, 1.0, 1e30, 0.0, 40, 50);
  auto rng = eoc::substream(1, 0, 0);
  try {
    eoc::forward_lengths(cfg, eoc::input_with_length(50, 1.0, rng), 1, 0);
    FAIL() << "expected overflow";
  } catch (const eoc::NumericalOverflow& e) {
    EXPECT_GT(e.layer(), 1);
    EXPECT_LE(e.layer(), 40);
  }
}

TEST(Jacobian, SingleOrthogonalIdentityLayer) {
  const int n = 120;
  const auto cfg = make(Activation::identity, Ensemble::lowrank_orthogonal, 0.25, 2.0, 0.0, 1, n);
  const auto res = eoc::jacobian_spectrum(cfg, 1.0, 3, 0);
  const auto& sv = res.spectrum.values.back();
  ASSERT_EQ(static_cast<int>(sv.size()), n);
  for (int k = 0; k < 30; ++k) EXPECT_NEAR(sv[k] * sv[k], 2.0, 1e-10);
  for (int k = 30; k < n; ++k) EXPECT_LT(sv[k], 1e-10);
  EXPECT_NEAR(res.moments.m1, 0.5, 1e-12);
  EXPECT_EQ(res.moments.source, eoc::MomentSource::empirical);
}

TEST(Jacobian, RescalingPreservesLargeProducts) {
  // Full-rank orthogonal, identity: every singular value is sigma_alpha^L.
  const auto cfg = make(Activation::identity, Ensemble::lowrank_orthogonal, 1.0, 4.0, 0.0, 20, 60);
  const auto res = eoc::jacobian_spectrum(cfg, 1.0, 4, 0);
  EXPECT_NEAR(res.moments.m1 / std::pow(4.0, 20), 1.0, 1e-10);
  EXPECT_LT(res.moments.variance / (res.moments.m1 * res.moments.m1), 1e-12);
}

TEST(Jacobian, RankNeverExceedsLayerRank) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.3, 4.0, 0.1, 3, 150);
  const std::vector<int> depths{1, 2, 3};
  const auto res = eoc::jacobian_spectrum(cfg, 0.5, 6, 0, depths);
  ASSERT_EQ(res.spectrum.size(), 3u);
  for (const auto& sv : res.spectrum.values) {
    const auto rank = std::count_if(sv.begin(), sv.end(), [&](double s) { return s > 1e-10 * sv.front(); });
    EXPECT_LE(rank, 45);
  }
}

TEST(Jacobian, MomentsAgreeWithFrobeniusNorm) {
  const int n = 100;
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.5, 3.0, 0.1, 2, n);
  auto net = eoc::sample_network(cfg, 0.6, 8, 0);
  const auto hs = eoc::forward(net);
  Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n);
  for (int l = 1; l <= 2; ++l) {
    const Eigen::VectorXd d = hs[l].array().cosh().square().inverse().matrix();
    j = d.asDiagonal() * (net.layers[l - 1].weights.assemble() * j);
  }
  const auto res = eoc::jacobian_spectrum(cfg, 0.6, 8, 0);
  EXPECT_NEAR(res.moments.m1, j.squaredNorm() / n, 1e-10 * res.moments.m1);
}

TEST(Jacobian, DegenerateOrthogonalSpectrumStaysFinite) {
  // Root 300, trial 3 made BDCSVD return NaN on this half-rank projection.
  const auto cfg = make(Activation::identity, Ensemble::lowrank_orthogonal, 0.5, 2.0, 0.0, 1, 500);
  const auto res = eoc::jacobian_spectrum(cfg, 1.0, 300, 3);
  const auto& sv = res.spectrum.values.front();
  for (int i = 0; i < 250; ++i) EXPECT_NEAR(sv[i], std::sqrt(2.0), 1e-10);
  for (int i = 250; i < 500; ++i) EXPECT_NEAR(sv[i], 0.0, 1e-10);
  EXPECT_NEAR(res.moments.m1, 1.0, 1e-10);
}

TEST(MeanSqSingular, OrthogonalIdentityIsExact) {
  const auto cfg = make(Activation::identity, Ensemble::lowrank_orthogonal, 0.3, 2.0, 0.0, 1, 200);
  EXPECT_NEAR(eoc::mean_sq_singular_per_layer(cfg, 1.0, 1, 0), 60 * 2.0 / 200, 1e-12);
}

TEST(MeanSqSingular, IdentityGaussianMatchesWeightVariance) {
  const auto cfg = make(Activation::identity, Ensemble::lowrank_gaussian, 0.3, 2.0, 0.0, 1, 300);
  const auto v = eoc::run_trials(20, [&](int t) { return eoc::mean_sq_singular_per_layer(cfg, 1.0, 2, t); });
  const auto ms = eoc::mean_std(v);
  EXPECT_NEAR(ms.mean, 0.6, 3 * ms.std / std::sqrt(20.0));
}

TEST(MeanSqSingular, TanhMatchesChi) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.25, 6.0, 0.3, 1, 1000);
  const double q = eoc::solve_q_star(cfg).q_star;
  const auto v = eoc::run_trials(10, [&](int t) { return eoc::mean_sq_singular_per_layer(cfg, q, 3, t); });
  const auto ms = eoc::mean_std(v);
  EXPECT_NEAR(ms.mean, eoc::chi(cfg, q), 3 * ms.std / std::sqrt(10.0));
}

TEST(Backprop, SingleIdentityLayerClosedForm) {
  const auto cfg = make(Activation::identity, Ensemble::lowrank_gaussian, 0.5, 1.5, 0.2, 1, 40);
  const auto net = eoc::sample_network(cfg, 0.8, 4, 0);
  const auto& layer = net.layers[0];
  // E = |C (A x + beta)|^2 / 2 = |A x + beta|^2 / 2, so dE/dA = (A x + beta) x^T.
  const Eigen::MatrixXd expected = layer.frame_coefficients(net.input) * net.input.transpose();
  const auto grads = eoc::alpha_gradients(net);
  EXPECT_LT((grads[0] - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Backprop, MatchesFiniteDifferences) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.5, 3.0, 0.2, 4, 40);
  auto net = eoc::sample_network(cfg, 0.7, 21, 0);
  const auto grads = eoc::alpha_gradients(net);
  std::mt19937_64 pick(5);
  const double h = 1e-5;
  for (int l = 0; l < cfg.depth; ++l) {
    auto& a = net.layers[l].weights.coeffs;
    std::uniform_int_distribution<int> row(0, static_cast<int>(a.rows()) - 1), col(0, static_cast<int>(a.cols()) - 1);
    for (int k = 0; k < 5; ++k) {
      const int i = row(pick), j = col(pick);
      const double saved = a(i, j);
      a(i, j) = saved + h;
      const double up = eoc::synthetic_loss(net);
      a(i, j) = saved - h;
      const double down = eoc::synthetic_loss(net);
      a(i, j) = saved;
      const double fd = (up - down) / (2 * h);
      EXPECT_LE(std::abs(fd - grads[l](i, j)), 1e-5 * std::max(std::abs(grads[l](i, j)), 1e-3))
          << "layer " << l + 1 << " entry " << i << "," << j;
    }
  }
}

TEST(Backprop, NormsMatchExplicitGradients) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_orthogonal, 0.5, 3.0, 0.2, 5, 60);
  const auto net = eoc::sample_network(cfg, 0.5, 9, 2);
  const auto grads = eoc::alpha_gradients(net);
  const auto rec = eoc::backprop_gradient_norms(cfg, 0.5, 9, 2);
  ASSERT_EQ(rec.size(), 5u);
  for (int l = 1; l <= 5; ++l) {
    EXPECT_EQ(rec.layers[l - 1], l);
    EXPECT_NEAR(rec.scalar(l - 1), grads[l - 1].squaredNorm(), 1e-10 * grads[l - 1].squaredNorm());
  }
}

TEST(Helpers, FitLogSlope) {
  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(i);
    y.push_back(3.0 * std::pow(0.8, i));
  }
  EXPECT_NEAR(eoc::fit_log_slope(x, y), std::log(0.8), 1e-13);
  y[3] = 0.0;
  EXPECT_THROW(eoc::fit_log_slope(x, y), eoc::DomainError);
}

TEST(Helpers, MeanStd) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto ms = eoc::mean_std(v);
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_DOUBLE_EQ(ms.std, std::sqrt(5.0 / 3.0));
}

TEST(Trials, OrderedResultsAndThreadCap) {
  ::setenv("EOC_LOWRANK_THREADS", "3", 1);
  EXPECT_EQ(eoc::trial_threads(), 3);
  const auto out = eoc::run_trials(10, [](int t) { return t * t; });
  for (int t = 0; t < 10; ++t) EXPECT_EQ(out[t], t * t);
  EXPECT_THROW(eoc::run_trials(5, [](int t) -> int {
                 if (t == 2) throw std::runtime_error("boom");
                 return t;
               }),
               std::runtime_error);
  ::setenv("EOC_LOWRANK_THREADS", "0", 1);
  EXPECT_GE(eoc::trial_threads(), 1);
  ::unsetenv("EOC_LOWRANK_THREADS");
}

TEST(Trials, ParallelMatchesSerial) {
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.5, 2.0, 0.1, 4, 100);
  auto run = [&] {
    return eoc::run_trials(4, [&](int t) { return eoc::forward_pair(cfg, 0.5, 0.3, 11, t).correlation.values; });
  };
  ::setenv("EOC_LOWRANK_THREADS", "1", 1);
  const auto serial = run();
  ::setenv("EOC_LOWRANK_THREADS", "4", 1);
  const auto parallel = run();
  ::unsetenv("EOC_LOWRANK_THREADS");
  EXPECT_EQ(serial, parallel);
}

TEST(CorrelationFixedPoint, OrderedConfigRelaxesToOne) {
  // gamma*sa2 = 2, gamma*sb2 = 0.3 has chi = 0.884, so c* = 1.
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.25, 8.0, 1.2, 300, 200);
  const auto fp = eoc::solve_fixed_point(cfg);
  ASSERT_EQ(fp.c_star, 1.0);
  const auto runs = eoc::run_trials(3, [&](int t) { return eoc::forward_pair(cfg, fp.q_star, 0.2, 13, t).correlation.scalars().back(); });
  for (double c : runs) EXPECT_NEAR(c, fp.c_star, 0.02);
}

TEST(CorrelationFixedPoint, ChaoticLongRunMeanMatchesCStar) {
  // Mean over layers 50..150, 8 pairs per network and 30 networks; at rank 75
  // the estimate sits about 0.015 above c*.
  const int depth = 150;
  const auto cfg = make(Activation::tanh, Ensemble::lowrank_gaussian, 0.25, 16.0, 0.2, depth, 300);
  const auto fp = eoc::solve_fixed_point(cfg);
  ASSERT_GT(fp.chi, 1.0);
  const auto means = eoc::run_trials(30, [&](int t) {
    double s = 0.0;
    int n = 0;
    for (const auto& p : eoc::forward_pairs(cfg, fp.q_star, 0.5, 8, 5, t)) {
      for (int l = depth / 3; l <= depth; ++l, ++n) s += p.correlation.scalar(l);
    }
    return s / n;
  });
  EXPECT_NEAR(eoc::mean_std(means).mean, fp.c_star, 0.02);
}
