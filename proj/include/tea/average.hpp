#pragma once

#include <Eigen/Core>

#include <string>

#include "tea/error.hpp"
#include "tea/train.hpp"

namespace tea {

enum class CoeffMode { kAdaptive, kUniform, kReversed, kOneHot };

struct CoeffVector {
    Eigen::VectorXd alphas;     // simplex: non-negative, sums to 1
    CoeffMode mode = CoeffMode::kAdaptive;
    double sharpness = 0.0;     // r used to produce adaptive alphas
    Eigen::VectorXd distances;  // empty unless distance-derived
    bool uniform_fallback = false;
    int one_hot_index = -1;
};

// Euclidean expert-forecast distances in the projection space.
Eigen::VectorXd compute_distances(const Eigen::MatrixXd& projections,
                                  const Eigen::VectorXd& forecast);

// alpha_i = (d_max - d_i)^r / sum_j (d_max - d_j)^r. The farthest expert gets
// exactly zero. All-equal distances (or a single expert) fall back to uniform
// with the fallback flag set. Gaps are normalized by the largest gap before
// exponentiation, which leaves the result invariant under distance scaling
// and keeps pow() in range for large r.
CoeffVector compute_coefficients(const Eigen::VectorXd& distances, double sharpness);

CoeffVector uniform_coefficients(int count);
CoeffVector one_hot_coefficients(int count, int index);

// Re-assigns the multiset of alpha values so the ordering by alpha is exactly
// inverted (nearest expert receives the smallest alpha). Involution.
CoeffVector reversed_coefficients(const CoeffVector& coeffs);

// theta_TEA = sum_i alpha_i * theta_i on non-statistic segments via pairwise
// summation; statistic segments are copied from base.
ParamVector combine_weights(const ExpertSet& experts, const CoeffVector& coeffs);

const char* to_string(CoeffMode mode);
CoeffMode coeff_mode_from_string(const std::string& s);

}  // namespace tea
