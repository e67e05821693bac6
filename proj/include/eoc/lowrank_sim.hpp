#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eoc/config.hpp"
#include "eoc/rmt.hpp"
#include "eoc/trajectory.hpp"

// Finite-width Monte-Carlo simulation of low-rank networks
//
//   h^l = W^l phi(h^(l-1)) + C^l beta^l,   W^l = C^l A^l,
//
// where C^l (N x r) has orthonormal columns, A^l (r x N) holds the alpha
// coefficients and beta^l the bias along the frame. The input is the layer-0
// preactivation h^0.

namespace eoc {

/// Per-(trial, stream) generator derived from one root seed. Stream 0 feeds
/// the inputs, stream l >= 1 the weights and bias of layer l.
std::mt19937_64 substream(std::uint64_t root, std::uint64_t trial, std::uint64_t stream);

enum class BiasMode {
  per_direction,  ///< independent b_k ~ N(0, sigma_b2) along each C_k
  shared          ///< one scalar b ~ N(0, sigma_b2) per layer, bias b (C_1 + ... + C_r)
};

struct LowRankWeights {
  Eigen::MatrixXd frame;   ///< N x r, orthonormal columns
  Eigen::MatrixXd coeffs;  ///< r x N_in
  Ensemble ensemble = Ensemble::lowrank_gaussian;

  int rank() const noexcept { return static_cast<int>(frame.cols()); }
  Eigen::MatrixXd assemble() const { return frame * coeffs; }
  /// W x without forming W.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return frame * (coeffs * x); }
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const {
    return coeffs.transpose() * (frame.transpose() * y);
  }
};

/// Haar-distributed n x r frame: QR of a standard Gaussian matrix with the
/// signs fixed so that R has a positive diagonal.
Eigen::MatrixXd sample_frame(int n, int r, std::mt19937_64& rng);

/// gaussian: A_ij ~ N(0, sigma_alpha2 / n_in). orthogonal: A = sigma_alpha P^T
/// for a uniformly random injection P of r coordinates out of n_in.
LowRankWeights sample_weights(const NetworkConfig& cfg, int n_out, int n_in, std::mt19937_64& rng);

/// Vector of squared length q n (so q^0 = q exactly up to rounding).
Eigen::VectorXd input_with_length(int n, double q, std::mt19937_64& rng);

/// Two inputs with lengths q n and correlation exactly c: x1 = sqrt(q n) e1,
/// x2 = sqrt(q n)(c e1 + sqrt(1 - c^2) e2) for orthonormal e1, e2.
std::pair<Eigen::VectorXd, Eigen::VectorXd> input_pair(int n, double q, double c, std::mt19937_64& rng);

/// Both bias modes give E|bias|^2 / N = gamma sigma_b2. With the shared scalar
/// that energy comes from a single chi-squared(1) draw per layer, so q^l and
/// the per-layer slope fluctuate far from q* and chi at any width.
struct SimOptions {
  BiasMode bias = BiasMode::per_direction;
};

/// One layer's weights and bias, drawn from substream(root, trial, layer).
struct SampledLayer {
  LowRankWeights weights;
  Eigen::VectorXd bias_coeffs;  ///< beta, length r

  Eigen::VectorXd bias() const { return weights.frame * bias_coeffs; }
  /// Frame coefficients y of h = C y.
  Eigen::VectorXd frame_coefficients(const Eigen::VectorXd& z) const {
    return weights.coeffs * z + bias_coeffs;
  }
  Eigen::VectorXd forward(const Eigen::VectorXd& z) const { return weights.frame * frame_coefficients(z); }
};

SampledLayer sample_layer(const NetworkConfig& cfg, std::uint64_t root, int trial, int layer,
                          const SimOptions& opts = {});

/// q^l = |h^l|^2 / N for l = 0..L.
TrajectoryRecord forward_lengths(const NetworkConfig& cfg, const Eigen::VectorXd& h0, std::uint64_t root, int trial,
                                 const SimOptions& opts = {});

struct PairTrajectory {
  TrajectoryRecord length1;
  TrajectoryRecord length2;
  TrajectoryRecord correlation;  ///< c^l = q12 / sqrt(q11 q22), l = 0..L
};

/// Propagates two inputs of length q0 and exact correlation c0 through the
/// same sampled network.
PairTrajectory forward_pair(const NetworkConfig& cfg, double q0, double c0, std::uint64_t root, int trial,
                            const SimOptions& opts = {});

/// `count` independent input pairs through one sampled network; element 0 is
/// forward_pair's result.
std::vector<PairTrajectory> forward_pairs(const NetworkConfig& cfg, double q0, double c0, int count,
                                          std::uint64_t root, int trial, const SimOptions& opts = {});

struct JacobianResult {
  TrajectoryRecord spectrum;  ///< singular values of J at each recorded depth, descending
  SpectrumMoments moments;    ///< empirical moments of J J^T at depth L, zeros included
};

/// J = prod_l D^l W^l for an input of squared length q_star N. The product is
/// rescaled by its max-abs entry every 8 layers and the scale is reapplied to
/// the singular values. Depths in record_depths (1..L) store the spectrum of
/// the partial product; depth L is always recorded.
JacobianResult jacobian_spectrum(const NetworkConfig& cfg, double q_star, std::uint64_t root, int trial,
                                 std::span<const int> record_depths = {}, const SimOptions& opts = {});

/// (1/N) trace((D W)(D W)^T) for one layer fed an input of length q_star.
double mean_sq_singular_per_layer(const NetworkConfig& cfg, double q_star, std::uint64_t root, int trial,
                                  const SimOptions& opts = {});

/// A fully sampled network with its input, for exact backpropagation.
struct SampledNetwork {
  NetworkConfig cfg;
  std::vector<SampledLayer> layers;  ///< layers[l - 1] is layer l
  Eigen::VectorXd input;             ///< h^0
};

SampledNetwork sample_network(const NetworkConfig& cfg, double q0, std::uint64_t root, int trial,
                              const SimOptions& opts = {});

/// Preactivations h^0..h^L.
std::vector<Eigen::VectorXd> forward(const SampledNetwork& net);

/// E = |h^L|^2 / 2.
double synthetic_loss(const SampledNetwork& net);

/// dE/dA^l for l = 1..L (element l - 1), each r x N.
std::vector<Eigen::MatrixXd> alpha_gradients(const SampledNetwork& net);

/// |dE/dA^l|^2 for l = 1..L on a network fed an input of length q_star.
TrajectoryRecord backprop_gradient_norms(const NetworkConfig& cfg, double q_star, std::uint64_t root, int trial,
                                         const SimOptions& opts = {});

/// Least-squares slope of log(y) against x. Throws DomainError on
/// non-positive y or fewer than two points.
double fit_log_slope(std::span<const double> x, std::span<const double> y);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation (0 for a single value)
};

MeanStd mean_std(std::span<const double> values);

/// Worker count for trial loops: EOC_LOWRANK_THREADS if set and positive,
/// otherwise the hardware concurrency.
int trial_threads();

/// Runs f(0) .. f(trials - 1) on up to trial_threads() threads and returns the
/// results in trial order. If trials throw, the exception of the lowest
/// failing trial is rethrown after all workers finish.
template <class F>
auto run_trials(int trials, F&& f) -> std::vector<decltype(f(0))> {
  using T = decltype(f(0));
  const std::size_t n = static_cast<std::size_t>(std::max(trials, 0));
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  const int workers = std::max(1, std::min(trial_threads(), trials));
  auto work = [&](int first) {
    for (int t = first; t < trials; t += workers) {
      try {
        slots[t].emplace(f(t));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

} // namespace eoc
