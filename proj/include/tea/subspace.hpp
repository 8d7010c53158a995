#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <vector>

#include "tea/error.hpp"
#include "tea/train.hpp"

namespace tea {

// Expert weight deviations from base, one row per expert. Only non-statistic
// parameter coordinates enter (statistic segments are frozen and identically
// zero across experts).
struct DeviationMatrix {
    Eigen::MatrixXd rows;            // S x d
    std::vector<double> timestamps;  // ascending
};

DeviationMatrix deviations_from(const ExpertSet& experts);

struct Subspace {
    Eigen::MatrixXd components;          // P_effective x d, orthonormal rows
    int p_requested = 0;
    int p_effective = 0;
    Eigen::VectorXd mean_deviation;      // row mean used for centering
    Eigen::MatrixXd projections;         // S x P_effective, of UNcentered deviations
    Eigen::VectorXd explained_variance;  // non-increasing
    std::vector<double> timestamps;
    bool clipped = false;                // p_requested exceeded the rank
};

// PCA of the row-centered deviation matrix through its S x S Gram matrix
// (the d x d covariance is never formed). Projections use the uncentered
// deviations. Component signs are fixed so the most recent expert projects
// non-negatively (ties: the first nonzero projection is made positive).
// Throws DegenerateSubspaceError when all deviations are identical.
Subspace fit_subspace(const DeviationMatrix& dev, int p_config);

// <theta - base, v_p> per component, on non-statistic coordinates.
Eigen::VectorXd project(const Subspace& subspace, const ParamVector& theta,
                        const ParamVector& base);
Eigen::VectorXd project_deviation(const Subspace& subspace, const Eigen::VectorXd& deviation);

// Components in the raw TEAC container plus a JSON table with projections
// and timestamps.
void save_subspace(const Subspace& subspace, const std::filesystem::path& dir,
                   const std::string& config_hash);
Subspace load_subspace(const std::filesystem::path& dir, std::string* config_hash = nullptr);

}  // namespace tea
