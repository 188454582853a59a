// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "scaopo/environment.hpp"

namespace scaopo {

/// Multi-user downlink with one queue per user and an RZF precoder.
struct MimoParams {
  std::size_t n_tx = 4;
  std::size_t n_users = 2;
  double bandwidth_hz = 10e6;
  double slot_s = 1e-3;
  double noise_dbm_per_hz = -100.0;
  /// Gain of the 0 dB path-gain reference; the effective noise is noise / 10^(reference_gain_db / 10).
  double reference_gain_db = -60.0;
  double arrival_max_bps = 20e6;  // A_k ~ U[0, arrival_max_bps]
  double p_max = 10.0;            // W per user
  double alpha_min = 1e-3;
  double alpha_max = 10.0;
  std::size_t n_paths = 4;
  double angular_spread_deg = 5.0;
  double gain_db_min = -10.0;
  double gain_db_max = 10.0;
  double delay_limit_slots = 2.0;

  void validate() const;
  /// Noise power per user in W: density times bandwidth.
  double noise_power() const;
  /// Noise power relative to the path-gain reference.
  double effective_noise() const;
  double mean_arrival_bps() const { return 0.5 * arrival_max_bps; }
  std::size_t state_dim() const { return n_users + 2 * n_users * n_tx; }
};

/// Per-run path geometry: K x N_p angles (rad) and per-path powers summing to g_k.
struct ChannelGeometry {
  Eigen::MatrixXd aod;
  Eigen::MatrixXd path_power;
  Eigen::VectorXd gain;  // g_k, linear
};

ChannelGeometry draw_geometry(const MimoParams& p, Rng& rng);

/// ULA response [1, e^{j pi sin phi}, ..., e^{j (n-1) pi sin phi}].
Eigen::VectorXcd ula_response(std::size_t n_tx, double phi);

/// K x N_t matrix whose row k is h_k^H, h_k = sum_i alpha_{k,i} a(phi_{k,i}), alpha ~ CN(0, path_power).
Eigen::MatrixXcd channel_draw(const ChannelGeometry& g, std::size_t n_tx, Rng& rng);

/// [Q + arrived - served]^+
double queue_update(double queue, double arrival_rate, double service_rate, double slot);

/// Column-normalized H^H (H H^H + alpha I)^{-1}.
Eigen::MatrixXcd rzf_precoder(const Eigen::MatrixXcd& H, double alpha);

/// B log2(1 + SINR_k) with SINR_k = p_k |h_k^H v_k|^2 / (sum_{j != k} p_j |h_k^H v_j|^2 + noise).
double user_rate(const Eigen::MatrixXcd& H, const Eigen::MatrixXcd& V, const Eigen::VectorXd& p, std::size_t k,
                 double noise, double bandwidth);

struct EqualPowerAction {
  Eigen::VectorXd p;
  double alpha = 0.0;
};

/// p_k = P_total / K and alpha = noise / p_k.
EqualPowerAction baseline_equal_power(std::size_t n_users, double p_total, double noise);

/// State: [Q_k / (10 lambda_k tau); Re H row-major; Im H row-major].
/// Action: [p_1..p_K, alpha_Z]. Costs: C_0 = sum p_k in W, C_k = Q_k / lambda_k in s,
/// with limits c_k = delay_limit_slots * tau.
class MimoEnv final : public Environment {
 public:
  MimoEnv(MimoParams params, std::uint64_t geometry_seed);

  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "mimo"; }
  void reset(Rng& rng) override;
  Eigen::VectorXd observe() const override;
  StepResult step(const Eigen::VectorXd& action, Rng& rng) override;
  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& snap) override;

  const MimoParams& params() const { return params_; }
  const ChannelGeometry& geometry() const { return geometry_; }
  const Eigen::VectorXd& queues() const { return queues_; }
  const Eigen::MatrixXcd& channel() const { return channel_; }
  /// Precoder used by the most recent step.
  const Eigen::MatrixXcd& last_precoder() const { return last_precoder_; }
  const Eigen::VectorXd& last_rates() const { return last_rates_; }

 private:
  MimoParams params_;
  ChannelGeometry geometry_;
  EnvSpec spec_;
  Eigen::VectorXd queues_;
  Eigen::MatrixXcd channel_;
  Eigen::MatrixXcd last_precoder_;
  Eigen::VectorXd last_rates_;
};

}  // namespace scaopo
