#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

#include "json.hpp"
#include "tea/pipeline.hpp"

namespace tea {

// Monte-Carlo decomposition of the expected future error of weight averaging
// into bias^2 + variance + covariance, with a locality proxy. Members are
// retrained per repetition on fresh draws from their domain (fresh init,
// fresh data), then evaluated on a fixed noiseless sample of the future
// domain. Only the drifting-hyperplane process is supported: it exposes the
// exact labeling function needed for noiseless targets.
struct BvclConfig {
    DatasetSpec process;      // generator must be drifting_hyperplane
    ModelSpec model;          // regression head, no normalization
    int train_samples = 120;  // per member per repetition
    int epochs = 40;
    double learning_rate = 0.05;
    int batch_size = 30;
    Eigen::VectorXd alphas;  // empty -> uniform over members
    int repetitions = 200;
    int se_batches = 10;
    int eval_points = 256;
    std::uint64_t seed = 0;
    bool identical_members = false;  // clone one trained member (correlated limit)
};

struct BvclEstimate {
    double bias_term = 0.0;
    double variance_term = 0.0;
    double covariance_term = 0.0;
    double locality_proxy = 0.0;  // E[ max_i |theta_i - theta_avg|^2 ]
    double empirical_error = 0.0;
    double se_empirical = 0.0;
    double se_sum = 0.0;  // SE of (B + V + C) via independent batches
    double se_bias = 0.0, se_variance = 0.0, se_covariance = 0.0;
    int repetitions = 0;
    int members = 0;

    double gap() const { return empirical_error - (bias_term + variance_term + covariance_term); }
    double combined_se() const { return std::sqrt(se_empirical * se_empirical + se_sum * se_sum); }
};

BvclEstimate estimate_bvcl(const BvclConfig& config);

// Scaling experiment around a center point: experts theta_i = center + s*u_i.
// Measures max_x |sum_i alpha_i f(x, theta_i) - f(x, center)| across scales.
// With the alpha-weighted perturbation mean removed, the center IS the weight
// average and the gap shrinks quadratically; without it a first-order term
// survives.
struct Lemma1Result {
    std::vector<double> scales;
    std::vector<double> max_diffs;
    double slope = 0.0;       // log-log least squares
    bool linear_exact = false;  // every diff <= 1e-12
    double worst_diff = 0.0;
};

Lemma1Result lemma1_scaling_test(const ModelSpec& model, const ParamVector& center,
                                 Eigen::MatrixXd directions, const Eigen::VectorXd& alphas,
                                 const std::vector<double>& scales, const Eigen::MatrixXd& eval_x,
                                 bool enforce_mean_zero);

struct SimplexGridResult {
    Eigen::VectorXd argmin;
    double min_value = 0.0;
    long points = 0;
};

SimplexGridResult minimize_on_simplex_grid(int members, double step,
                                           const std::function<double(const Eigen::VectorXd&)>& f);

// Brute force of (sum_i alpha_i sigma_i)^2: the minimax-optimal coefficients
// sit on the vertex of the smallest magnitude.
SimplexGridResult bias_minimax_grid(const Eigen::VectorXd& sigmas, double step);

// Brute force of sum_i alpha_i^2: uniform weights are optimal at 1/S.
SimplexGridResult variance_uniform_grid(int members, double step);

// Constructed ensemble with a known per-member bias trend and equal member
// variance: sweeping the sharpness r trades bias against variance.
struct TradeoffPoint {
    double r = 0.0;
    double bias_sq = 0.0;      // analytic (sum alpha_i b_i)^2
    double variance = 0.0;     // analytic v * sum alpha_i^2
    double total_error = 0.0;  // Monte Carlo
    double se_total = 0.0;
};

std::vector<TradeoffPoint> insight2_tradeoff_sweep(const Eigen::VectorXd& bias_magnitudes,
                                                   const Eigen::VectorXd& distances,
                                                   double member_variance,
                                                   const std::vector<double>& r_values,
                                                   int repetitions, std::uint64_t seed);

nlohmann::json to_json(const BvclEstimate& e);
nlohmann::json to_json(const Lemma1Result& r);
nlohmann::json to_json(const SimplexGridResult& r);
nlohmann::json to_json(const std::vector<TradeoffPoint>& sweep);

}  // namespace tea
