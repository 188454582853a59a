// SPDX-License-Identifier: Apache-2.0
#include "scaopo/mimo_env.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "scaopo/error.hpp"

namespace scaopo {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMaxMeanAod = 60.0 * kDeg;

}  // namespace

void MimoParams::validate() const {
  if (n_tx == 0 || n_users == 0) throw ConfigError("mimo: n_tx and n_users must be positive");
  if (n_users > n_tx) throw ConfigError("mimo: n_users must not exceed n_tx");
  if (!(bandwidth_hz > 0.0) || !(slot_s > 0.0)) throw ConfigError("mimo: bandwidth and slot must be positive");
  if (!(arrival_max_bps > 0.0)) throw ConfigError("mimo: arrival_max_bps must be positive");
  if (!(p_max > 0.0)) throw ConfigError("mimo: p_max must be positive");
  if (!(alpha_min > 0.0) || !(alpha_min < alpha_max)) throw ConfigError("mimo: need 0 < alpha_min < alpha_max");
  if (n_paths == 0) throw ConfigError("mimo: n_paths must be positive");
  if (!(angular_spread_deg >= 0.0)) throw ConfigError("mimo: angular_spread_deg must be nonnegative");
  if (!(gain_db_min <= gain_db_max)) throw ConfigError("mimo: gain_db_min must not exceed gain_db_max");
  if (!(delay_limit_slots > 0.0)) throw ConfigError("mimo: delay_limit_slots must be positive");
}

double MimoParams::noise_power() const { return std::pow(10.0, noise_dbm_per_hz / 10.0) * 1e-3 * bandwidth_hz; }

double MimoParams::effective_noise() const { return noise_power() / std::pow(10.0, reference_gain_db / 10.0); }

ChannelGeometry draw_geometry(const MimoParams& p, Rng& rng) {
  const auto K = static_cast<Eigen::Index>(p.n_users);
  const auto Np = static_cast<Eigen::Index>(p.n_paths);
  ChannelGeometry g;
  g.aod.resize(K, Np);
  g.path_power.resize(K, Np);
  g.gain.resize(K);
  const double scale = p.angular_spread_deg * kDeg / std::numbers::sqrt2;
  for (Eigen::Index k = 0; k < K; ++k) {
    g.gain[k] = std::pow(10.0, rng.uniform(p.gain_db_min, p.gain_db_max) / 10.0);
    const double mean = rng.uniform(-kMaxMeanAod, kMaxMeanAod);
    double total = 0.0;
    for (Eigen::Index i = 0; i < Np; ++i) {
      g.aod(k, i) = mean + rng.laplace(scale);
      g.path_power(k, i) = rng.exponential(1.0);
      total += g.path_power(k, i);
    }
    g.path_power.row(k) *= g.gain[k] / total;
  }
  return g;
}

Eigen::VectorXcd ula_response(std::size_t n_tx, double phi) {
  Eigen::VectorXcd a(static_cast<Eigen::Index>(n_tx));
  const double step = std::numbers::pi * std::sin(phi);
  for (Eigen::Index n = 0; n < a.size(); ++n) a[n] = std::polar(1.0, step * static_cast<double>(n));
  return a;
}

Eigen::MatrixXcd channel_draw(const ChannelGeometry& g, std::size_t n_tx, Rng& rng) {
  const Eigen::Index K = g.aod.rows();
  Eigen::MatrixXcd H(K, static_cast<Eigen::Index>(n_tx));
  for (Eigen::Index k = 0; k < K; ++k) {
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n_tx));
    for (Eigen::Index i = 0; i < g.aod.cols(); ++i) {
      const double sd = std::sqrt(0.5 * g.path_power(k, i));
      const double re = rng.normal();
      const double im = rng.normal();
      h += std::complex<double>(sd * re, sd * im) * ula_response(n_tx, g.aod(k, i));
    }
    H.row(k) = h.adjoint();
  }
  return H;
}

double queue_update(double queue, double arrival_rate, double service_rate, double slot) {
  return std::max(0.0, queue + arrival_rate * slot - service_rate * slot);
}

Eigen::MatrixXcd rzf_precoder(const Eigen::MatrixXcd& H, double alpha) {
  if (!(alpha > 0.0)) throw NumericError("rzf: regularization must be positive");
  const Eigen::Index K = H.rows();
  const Eigen::MatrixXcd gram = H * H.adjoint() + alpha * Eigen::MatrixXcd::Identity(K, K);
  const Eigen::LDLT<Eigen::MatrixXcd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericError("rzf: H H^H + alpha I is singular");
  Eigen::MatrixXcd V = H.adjoint() * ldlt.solve(Eigen::MatrixXcd::Identity(K, K));
  for (Eigen::Index k = 0; k < K; ++k) {
    const double norm = V.col(k).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("rzf: zero precoder column");
    V.col(k) /= norm;
  }
  return V;
}

double user_rate(const Eigen::MatrixXcd& H, const Eigen::MatrixXcd& V, const Eigen::VectorXd& p, std::size_t k,
                 double noise, double bandwidth) {
  const auto kk = static_cast<Eigen::Index>(k);
  const Eigen::RowVectorXcd hv = H.row(kk) * V;
  double interference = noise;
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (j != kk) interference += p[j] * std::norm(hv[j]);
  const double sinr = p[kk] * std::norm(hv[kk]) / interference;
  return bandwidth * std::log2(1.0 + sinr);
}

EqualPowerAction baseline_equal_power(std::size_t n_users, double p_total, double noise) {
  if (!(p_total > 0.0)) throw ConfigError("baseline: total power must be positive");
  if (n_users == 0) throw ConfigError("baseline: need at least one user");
  EqualPowerAction a;
  const double each = p_total / static_cast<double>(n_users);
  a.p = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_users), each);
  a.alpha = noise / each;
  return a;
}

MimoEnv::MimoEnv(MimoParams params, std::uint64_t geometry_seed) : params_(std::move(params)) {
  params_.validate();
  Rng rng(geometry_seed);
  geometry_ = draw_geometry(params_, rng);
  const auto K = static_cast<Eigen::Index>(params_.n_users);
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(K + 1);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(K + 1, params_.p_max);
  lo[K] = params_.alpha_min;
  hi[K] = params_.alpha_max;
  spec_.state_dim = params_.state_dim();
  spec_.action_box = ActionBox(lo, hi);
  spec_.num_constraints = params_.n_users;
  spec_.limits = Eigen::VectorXd::Constant(K, params_.delay_limit_slots * params_.slot_s);
  spec_.validate();
  queues_ = Eigen::VectorXd::Zero(K);
  channel_ = Eigen::MatrixXcd::Zero(K, static_cast<Eigen::Index>(params_.n_tx));
}

void MimoEnv::reset(Rng& rng) {
  queues_.setZero();
  channel_ = channel_draw(geometry_, params_.n_tx, rng);
}

Eigen::VectorXd MimoEnv::observe() const {
  const Eigen::Index K = channel_.rows();
  const Eigen::Index N = channel_.cols();
  Eigen::VectorXd s(static_cast<Eigen::Index>(params_.state_dim()));
  const double per_slot = params_.mean_arrival_bps() * params_.slot_s;
  s.head(K) = queues_ / (10.0 * per_slot);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index n = 0; n < N; ++n) {
      s[K + k * N + n] = channel_(k, n).real();
      s[K + K * N + k * N + n] = channel_(k, n).imag();
    }
  return s;
}

StepResult MimoEnv::step(const Eigen::VectorXd& action, Rng& rng) {
  check_action(spec_, action);
  const auto K = static_cast<Eigen::Index>(params_.n_users);
  const Eigen::VectorXd p = action.head(K);
  last_precoder_ = rzf_precoder(channel_, action[K]);
  last_rates_.resize(K);
  const double noise = params_.effective_noise();
  StepResult r;
  r.costs.resize(K + 1);
  r.costs[0] = p.sum();
  for (Eigen::Index k = 0; k < K; ++k) {
    last_rates_[k] = user_rate(channel_, last_precoder_, p, static_cast<std::size_t>(k), noise, params_.bandwidth_hz);
    const double arrival = rng.uniform(0.0, params_.arrival_max_bps);
    queues_[k] = queue_update(queues_[k], arrival, last_rates_[k], params_.slot_s);
    r.costs[k + 1] = queues_[k] / params_.mean_arrival_bps();
  }
  channel_ = channel_draw(geometry_, params_.n_tx, rng);
  r.next_state = observe();
  return r;
}

nlohmann::json MimoEnv::snapshot() const {
  nlohmann::json re = nlohmann::json::array();
  nlohmann::json im = nlohmann::json::array();
  for (Eigen::Index k = 0; k < channel_.rows(); ++k)
    for (Eigen::Index n = 0; n < channel_.cols(); ++n) {
      re.push_back(channel_(k, n).real());
      im.push_back(channel_(k, n).imag());
    }
  return {{"queues", vector_to_json(queues_)}, {"channel_re", re}, {"channel_im", im}};
}

void MimoEnv::restore(const nlohmann::json& snap) {
  const Eigen::VectorXd q = vector_from_json(snap.at("queues"));
  const auto re = snap.at("channel_re").get<std::vector<double>>();
  const auto im = snap.at("channel_im").get<std::vector<double>>();
  if (q.size() != queues_.size() || re.size() != static_cast<std::size_t>(channel_.size()) || im.size() != re.size())
    throw ConfigError("mimo snapshot does not match the environment dimensions");
  queues_ = q;
  std::size_t idx = 0;
  for (Eigen::Index k = 0; k < channel_.rows(); ++k)
    for (Eigen::Index n = 0; n < channel_.cols(); ++n, ++idx) channel_(k, n) = {re[idx], im[idx]};
}

}  // namespace scaopo
