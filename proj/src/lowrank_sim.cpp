#include "eoc/lowrank_sim.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "eoc/errors.hpp"

namespace eoc {

namespace {

constexpr int kRescaleEvery = 8;

void fill_normal(Eigen::MatrixXd& m, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * normal(rng);
  }
}

Eigen::VectorXd activate(ActivationFamily phi, const Eigen::VectorXd& h) {
  return h.unaryExpr([phi](double x) { return phi.value(x); });
}

Eigen::VectorXd activate_derivative(ActivationFamily phi, const Eigen::VectorXd& h) {
  return h.unaryExpr([phi](double x) { return phi.first(x); });
}

void require_width(const NetworkConfig& cfg, const Eigen::VectorXd& h0) {
  if (h0.size() != cfg.width) throw DomainError("input dimension must equal the width");
}

void require_finite(double value, const char* what, int layer) {
  if (!std::isfinite(value)) {
    throw NumericalOverflow(std::string(what) + ": non-finite value at layer " + std::to_string(layer), layer);
  }
}

double pair_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double q11 = a.dot(a);
  const double q22 = b.dot(b);
  const double q12 = a.dot(b);
  const double c = q11 == q22 ? q12 / q11 : q12 / std::sqrt(q11 * q22);
  return std::clamp(c, -1.0, 1.0);
}

} // namespace

std::mt19937_64 substream(std::uint64_t root, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd sample_frame(int n, int r, std::mt19937_64& rng) {
  if (r < 1 || r > n) throw DomainError("frame rank must lie in [1, n]");
  Eigen::MatrixXd g(n, r);
  fill_normal(g, 1.0, rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
  const auto& packed = qr.matrixQR();
  for (int k = 0; k < r; ++k) {
    if (packed(k, k) < 0.0) q.col(k) *= -1.0;
  }
  return q;
}

LowRankWeights sample_weights(const NetworkConfig& cfg, int n_out, int n_in, std::mt19937_64& rng) {
  const int r = static_cast<int>(std::lround(cfg.gamma * n_out));
  if (r < 1 || r > std::min(n_out, n_in)) {
    throw DomainError("rank round(gamma * n_out) = " + std::to_string(r) + " outside [1, min(n_out, n_in)]");
  }
  if (cfg.ensemble == Ensemble::lowrank_orthogonal && n_in != n_out) {
    throw DomainError("orthogonal ensemble needs square layers");
  }
  LowRankWeights w;
  w.ensemble = cfg.ensemble;
  w.frame = sample_frame(n_out, r, rng);
  w.coeffs = Eigen::MatrixXd::Zero(r, n_in);
  if (cfg.ensemble == Ensemble::lowrank_gaussian) {
    fill_normal(w.coeffs, std::sqrt(cfg.sigma_alpha2 / n_in), rng);
  } else {
    std::vector<int> columns(static_cast<std::size_t>(n_in));
    std::iota(columns.begin(), columns.end(), 0);
    std::shuffle(columns.begin(), columns.end(), rng);
    const double sigma = std::sqrt(cfg.sigma_alpha2);
    for (int k = 0; k < r; ++k) w.coeffs(k, columns[k]) = sigma;
  }
  return w;
}

Eigen::VectorXd input_with_length(int n, double q, std::mt19937_64& rng) {
  if (n < 1 || !(q >= 0.0)) throw DomainError("input_with_length: need n >= 1 and q >= 0");
  Eigen::MatrixXd g(n, 1);
  fill_normal(g, 1.0, rng);
  Eigen::VectorXd x = g.col(0);
  return x * (std::sqrt(q * n) / x.norm());
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> input_pair(int n, double q, double c, std::mt19937_64& rng) {
  if (n < 2 || !(q > 0.0) || !(std::abs(c) <= 1.0)) {
    throw DomainError("input_pair: need n >= 2, q > 0 and |c| <= 1");
  }
  Eigen::MatrixXd g(n, 2);
  fill_normal(g, 1.0, rng);
  const Eigen::VectorXd e1 = g.col(0).normalized();
  Eigen::VectorXd e2 = g.col(1);
  for (int pass = 0; pass < 2; ++pass) e2 -= e1.dot(e2) * e1;
  e2.normalize();
  const double scale = std::sqrt(q * n);
  const double s = std::sqrt((1.0 - c) * (1.0 + c));
  Eigen::VectorXd x1 = scale * e1;
  Eigen::VectorXd x2 = scale * (c * e1 + s * e2);
  return {std::move(x1), std::move(x2)};
}

SampledLayer sample_layer(const NetworkConfig& cfg, std::uint64_t root, int trial, int layer, const SimOptions& opts) {
  auto rng = substream(root, static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(layer));
  SampledLayer out;
  out.weights = sample_weights(cfg, cfg.width, cfg.width, rng);
  const int r = out.weights.rank();
  const double sb = std::sqrt(cfg.sigma_b2);
  std::normal_distribution<double> normal;
  if (opts.bias == BiasMode::shared) {
    out.bias_coeffs = Eigen::VectorXd::Constant(r, sb * normal(rng));
  } else {
    out.bias_coeffs.resize(r);
    for (int k = 0; k < r; ++k) out.bias_coeffs(k) = sb * normal(rng);
  }
  return out;
}

TrajectoryRecord forward_lengths(const NetworkConfig& cfg, const Eigen::VectorXd& h0, std::uint64_t root, int trial,
                                 const SimOptions& opts) {
  cfg.validate();
  require_width(cfg, h0);
  TrajectoryRecord rec;
  rec.quantity = Quantity::length;
  rec.seed = root;
  rec.trial = trial;
  rec.width = cfg.width;
  const double n = cfg.width;
  Eigen::VectorXd h = h0;
  rec.push(0, h.dot(h) / n);
  for (int l = 1; l <= cfg.depth; ++l) {
    const auto layer = sample_layer(cfg, root, trial, l, opts);
    h = layer.forward(activate(cfg.activation, h));
    const double q = h.dot(h) / n;
    require_finite(q, "forward_lengths", l);
    rec.push(l, q);
  }
  return rec;
}

PairTrajectory forward_pair(const NetworkConfig& cfg, double q0, double c0, std::uint64_t root, int trial,
                            const SimOptions& opts) {
  return std::move(forward_pairs(cfg, q0, c0, 1, root, trial, opts).front());
}

std::vector<PairTrajectory> forward_pairs(const NetworkConfig& cfg, double q0, double c0, int count,
                                          std::uint64_t root, int trial, const SimOptions& opts) {
  cfg.validate();
  if (count < 1) throw DomainError("forward_pairs: count must be >= 1");
  auto rng = substream(root, static_cast<std::uint64_t>(trial), 0);
  std::vector<Eigen::VectorXd> h1, h2;
  for (int k = 0; k < count; ++k) {
    auto [a, b] = input_pair(cfg.width, q0, c0, rng);
    h1.push_back(std::move(a));
    h2.push_back(std::move(b));
  }
  std::vector<PairTrajectory> out(static_cast<std::size_t>(count));
  for (auto& p : out) {
    for (auto* rec : {&p.length1, &p.length2, &p.correlation}) {
      rec->seed = root;
      rec->trial = trial;
      rec->width = cfg.width;
    }
    p.length1.quantity = Quantity::length;
    p.length2.quantity = Quantity::length;
    p.correlation.quantity = Quantity::correlation;
  }
  const double n = cfg.width;
  auto record = [&](int l) {
    for (int k = 0; k < count; ++k) {
      const double q1 = h1[k].dot(h1[k]) / n;
      const double q2 = h2[k].dot(h2[k]) / n;
      require_finite(q1 + q2, "forward_pair", l);
      out[k].length1.push(l, q1);
      out[k].length2.push(l, q2);
      out[k].correlation.push(l, pair_correlation(h1[k], h2[k]));
    }
  };
  record(0);
  for (int l = 1; l <= cfg.depth; ++l) {
    const auto layer = sample_layer(cfg, root, trial, l, opts);
    for (int k = 0; k < count; ++k) {
      h1[k] = layer.forward(activate(cfg.activation, h1[k]));
      h2[k] = layer.forward(activate(cfg.activation, h2[k]));
    }
    record(l);
  }
  return out;
}

JacobianResult jacobian_spectrum(const NetworkConfig& cfg, double q_star, std::uint64_t root, int trial,
                                 std::span<const int> record_depths, const SimOptions& opts) {
  cfg.validate();
  if (!(q_star >= 0.0)) throw DomainError("jacobian_spectrum: q_star must be >= 0");
  for (int d : record_depths) {
    if (d < 1 || d > cfg.depth) throw DomainError("jacobian_spectrum: recorded depth outside 1..L");
  }
  const int n = cfg.width;
  auto rng = substream(root, static_cast<std::uint64_t>(trial), 0);
  Eigen::VectorXd h = input_with_length(n, q_star, rng);
  Eigen::MatrixXd product = Eigen::MatrixXd::Identity(n, n);
  double log_scale = 0.0;

  JacobianResult out;
  out.spectrum.quantity = Quantity::singular_spectrum;
  out.spectrum.seed = root;
  out.spectrum.trial = trial;
  out.spectrum.width = n;

  for (int l = 1; l <= cfg.depth; ++l) {
    const auto layer = sample_layer(cfg, root, trial, l, opts);
    h = layer.forward(activate(cfg.activation, h));
    const Eigen::VectorXd d = activate_derivative(cfg.activation, h);
    const Eigen::MatrixXd projected = layer.weights.coeffs * product;
    product.noalias() = layer.weights.frame * projected;
    product = d.asDiagonal() * product;

    const bool record =
        l == cfg.depth || std::find(record_depths.begin(), record_depths.end(), l) != record_depths.end();
    if (l % kRescaleEvery == 0 || record) {
      const double s = product.cwiseAbs().maxCoeff();
      require_finite(s, "jacobian_spectrum", l);
      if (s > 0.0) {
        product /= s;
        log_scale += std::log(s);
      }
    }
    if (!record) continue;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(product);
    if (svd.info() != Eigen::Success) {
      throw SvdFailure("jacobian_spectrum: SVD failed at layer " + std::to_string(l) + " (log-scale " +
                       std::to_string(log_scale) + ")");
    }
    Eigen::VectorXd sv = svd.singularValues();
    if (!sv.allFinite()) {
      // BDCSVD can return NaN on exactly degenerate spectra (orthogonal frames).
      Eigen::JacobiSVD<Eigen::MatrixXd> jacobi(product);
      sv = jacobi.singularValues();
      if (!sv.allFinite()) {
        throw SvdFailure("jacobian_spectrum: non-finite singular values at layer " + std::to_string(l));
      }
    }
    const double factor = std::exp(log_scale);
    require_finite(factor, "jacobian_spectrum", l);
    std::vector<double> values(sv.data(), sv.data() + sv.size());
    for (double& v : values) v *= factor;
    out.spectrum.push(l, std::move(values));

    if (l == cfg.depth) {
      // Moments of the rescaled eigenvalues, then the scale reapplied.
      const Eigen::ArrayXd lam = sv.array().square();
      const double mean = lam.mean();
      const double centred = (lam - mean).square().mean();
      const double lam_scale = std::exp(2.0 * log_scale);
      SpectrumMoments& m = out.moments;
      m.source = MomentSource::empirical;
      m.depth = cfg.depth;
      m.m1 = mean * lam_scale;
      m.m2 = lam.square().mean() * lam_scale * lam_scale;
      m.variance = centred * lam_scale * lam_scale;
      require_finite(m.m2, "jacobian_spectrum", l);
    }
  }
  return out;
}

double mean_sq_singular_per_layer(const NetworkConfig& cfg, double q_star, std::uint64_t root, int trial,
                                  const SimOptions& opts) {
  cfg.validate();
  if (!(q_star >= 0.0)) throw DomainError("mean_sq_singular_per_layer: q_star must be >= 0");
  auto rng = substream(root, static_cast<std::uint64_t>(trial), 0);
  const Eigen::VectorXd h0 = input_with_length(cfg.width, q_star, rng);
  const auto layer = sample_layer(cfg, root, trial, 1, opts);
  const Eigen::VectorXd h = layer.forward(activate(cfg.activation, h0));
  const Eigen::ArrayXd d2 = activate_derivative(cfg.activation, h).array().square();
  // |row_i W|^2 = C_i (A A^T) C_i^T
  const auto& c = layer.weights.frame;
  const auto& a = layer.weights.coeffs;
  const Eigen::MatrixXd gram = a * a.transpose();
  const Eigen::ArrayXd row_norms = ((c * gram).array() * c.array()).rowwise().sum();
  return (d2 * row_norms).sum() / cfg.width;
}

SampledNetwork sample_network(const NetworkConfig& cfg, double q0, std::uint64_t root, int trial,
                              const SimOptions& opts) {
  cfg.validate();
  SampledNetwork net;
  net.cfg = cfg;
  auto rng = substream(root, static_cast<std::uint64_t>(trial), 0);
  net.input = input_with_length(cfg.width, q0, rng);
  for (int l = 1; l <= cfg.depth; ++l) net.layers.push_back(sample_layer(cfg, root, trial, l, opts));
  return net;
}

std::vector<Eigen::VectorXd> forward(const SampledNetwork& net) {
  std::vector<Eigen::VectorXd> hs{net.input};
  for (const auto& layer : net.layers) hs.push_back(layer.forward(activate(net.cfg.activation, hs.back())));
  return hs;
}

double synthetic_loss(const SampledNetwork& net) {
  const auto hs = forward(net);
  return 0.5 * hs.back().squaredNorm();
}

std::vector<Eigen::MatrixXd> alpha_gradients(const SampledNetwork& net) {
  const auto hs = forward(net);
  const auto phi = net.cfg.activation;
  const int depth = static_cast<int>(net.layers.size());
  std::vector<Eigen::MatrixXd> grads(static_cast<std::size_t>(depth));
  Eigen::VectorXd delta = hs.back();
  for (int l = depth; l >= 1; --l) {
    const auto& w = net.layers[l - 1].weights;
    const Eigen::VectorXd projected = w.frame.transpose() * delta;
    grads[l - 1] = projected * activate(phi, hs[l - 1]).transpose();
    if (l > 1) delta = activate_derivative(phi, hs[l - 1]).cwiseProduct(w.coeffs.transpose() * projected);
  }
  return grads;
}

TrajectoryRecord backprop_gradient_norms(const NetworkConfig& cfg, double q_star, std::uint64_t root, int trial,
                                         const SimOptions& opts) {
  cfg.validate();
  const auto phi = cfg.activation;
  auto rng = substream(root, static_cast<std::uint64_t>(trial), 0);
  // Forward pass keeps the preactivations only; the backward pass resamples
  // each layer from its substream so memory stays O(N r).
  std::vector<Eigen::VectorXd> hs{input_with_length(cfg.width, q_star, rng)};
  for (int l = 1; l <= cfg.depth; ++l) {
    hs.push_back(sample_layer(cfg, root, trial, l, opts).forward(activate(phi, hs.back())));
    require_finite(hs.back().squaredNorm(), "backprop_gradient_norms", l);
  }
  std::vector<double> norms(static_cast<std::size_t>(cfg.depth));
  Eigen::VectorXd delta = hs.back();
  for (int l = cfg.depth; l >= 1; --l) {
    const auto layer = sample_layer(cfg, root, trial, l, opts);
    const Eigen::VectorXd projected = layer.weights.frame.transpose() * delta;
    // |u v^T|_F^2 = |u|^2 |v|^2
    norms[l - 1] = projected.squaredNorm() * activate(phi, hs[l - 1]).squaredNorm();
    require_finite(norms[l - 1], "backprop_gradient_norms", l);
    if (l > 1) delta = activate_derivative(phi, hs[l - 1]).cwiseProduct(layer.weights.coeffs.transpose() * projected);
  }
  TrajectoryRecord rec;
  rec.quantity = Quantity::gradient_norm;
  rec.seed = root;
  rec.trial = trial;
  rec.width = cfg.width;
  for (int l = 1; l <= cfg.depth; ++l) rec.push(l, norms[l - 1]);
  return rec;
}

double fit_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("fit_log_slope: need two or more (x, y) pairs");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0)) throw DomainError("fit_log_slope: y must be positive");
    sx += x[i];
    sy += std::log(y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (std::log(y[i]) - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("fit_log_slope: x values are all equal");
  return sxy / sxx;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean_std: no values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

int trial_threads() {
  if (const char* env = std::getenv("EOC_LOWRANK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace eoc
