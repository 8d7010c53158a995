#include "tea/average.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tea {

Eigen::VectorXd compute_distances(const Eigen::MatrixXd& projections,
                                  const Eigen::VectorXd& forecast) {
    if (projections.cols() != forecast.size()) {
        throw ShapeError("compute_distances: forecast dimension mismatch");
    }
    Eigen::VectorXd d(projections.rows());
    for (Eigen::Index i = 0; i < projections.rows(); ++i) {
        d[i] = (projections.row(i).transpose() - forecast).norm();
    }
    return d;
}

CoeffVector compute_coefficients(const Eigen::VectorXd& distances, double sharpness) {
    if (sharpness <= 0.0) throw ConfigError("sharpness r must be positive");
    if (distances.size() < 1) throw ConfigError("compute_coefficients: empty distances");
    if ((distances.array() < 0.0).any()) {
        throw std::invalid_argument("distances must be non-negative");
    }

    const Eigen::Index s = distances.size();
    const double d_max = distances.maxCoeff();
    const double gap_max = d_max - distances.minCoeff();
    if (s == 1 || gap_max == 0.0) {
        CoeffVector uniform = uniform_coefficients(static_cast<int>(s));
        uniform.sharpness = sharpness;
        uniform.distances = distances;
        uniform.uniform_fallback = true;
        return uniform;
    }

    CoeffVector out;
    out.mode = CoeffMode::kAdaptive;
    out.sharpness = sharpness;
    out.distances = distances;
    Eigen::VectorXd weights(s);
    for (Eigen::Index i = 0; i < s; ++i) {
        weights[i] = std::pow((d_max - distances[i]) / gap_max, sharpness);
    }
    out.alphas = weights / weights.sum();
    return out;
}

CoeffVector uniform_coefficients(int count) {
    if (count < 1) throw ConfigError("uniform_coefficients: count must be >= 1");
    CoeffVector out;
    out.mode = CoeffMode::kUniform;
    out.alphas = Eigen::VectorXd::Constant(count, 1.0 / static_cast<double>(count));
    return out;
}

CoeffVector one_hot_coefficients(int count, int index) {
    if (count < 1 || index < 0 || index >= count) {
        throw ConfigError("one_hot_coefficients: index out of range");
    }
    CoeffVector out;
    out.mode = CoeffMode::kOneHot;
    out.one_hot_index = index;
    out.alphas = Eigen::VectorXd::Zero(count);
    out.alphas[index] = 1.0;
    return out;
}

CoeffVector reversed_coefficients(const CoeffVector& coeffs) {
    const Eigen::Index s = coeffs.alphas.size();
    std::vector<Eigen::Index> by_alpha(static_cast<std::size_t>(s));
    std::iota(by_alpha.begin(), by_alpha.end(), 0);
    std::stable_sort(by_alpha.begin(), by_alpha.end(), [&](Eigen::Index a, Eigen::Index b) {
        return coeffs.alphas[a] > coeffs.alphas[b];
    });
    std::vector<double> ascending(coeffs.alphas.data(), coeffs.alphas.data() + s);
    std::sort(ascending.begin(), ascending.end());

    CoeffVector out = coeffs;
    out.mode = CoeffMode::kReversed;
    for (Eigen::Index k = 0; k < s; ++k) {
        out.alphas[by_alpha[static_cast<std::size_t>(k)]] = ascending[static_cast<std::size_t>(k)];
    }
    return out;
}

ParamVector combine_weights(const ExpertSet& experts, const CoeffVector& coeffs) {
    if (experts.size() < 1) throw ConfigError("combine_weights: empty expert set");
    if (coeffs.alphas.size() != experts.size()) {
        throw ShapeError("combine_weights: coefficient count mismatch");
    }
    std::vector<const Eigen::VectorXd*> vectors;
    for (const auto& e : experts.experts) {
        if (!same_layout(e, experts.base)) throw ShapeError("combine_weights: layout mismatch");
        vectors.push_back(&e.values);
    }
    ParamVector combined = experts.base;
    combined.values = pairwise_weighted_sum(vectors, coeffs.alphas);
    copy_statistic_segments(combined, experts.base);
    return combined;
}

const char* to_string(CoeffMode mode) {
    switch (mode) {
        case CoeffMode::kAdaptive: return "adaptive";
        case CoeffMode::kUniform: return "uniform";
        case CoeffMode::kReversed: return "reversed";
        case CoeffMode::kOneHot: return "one_hot";
    }
    return "unknown";
}

CoeffMode coeff_mode_from_string(const std::string& s) {
    if (s == "adaptive") return CoeffMode::kAdaptive;
    if (s == "uniform") return CoeffMode::kUniform;
    if (s == "reversed") return CoeffMode::kReversed;
    if (s.rfind("one_hot", 0) == 0) return CoeffMode::kOneHot;
    throw ConfigError("unknown coefficient mode: " + s);
}

}  // namespace tea
