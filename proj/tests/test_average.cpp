#include "doctest.h"

#include <Eigen/Dense>

#include "tea/average.hpp"
#include "tea/model.hpp"
#include "tea/rng.hpp"

using namespace tea;

namespace {

ExpertSet toy_experts(const std::vector<Eigen::Vector2d>& weights) {
    ModelSpec spec;
    spec.layer_sizes = {2, 1};
    spec.output_head = OutputHead::kRegressionScalar;
    auto layout = build_layer_map(spec);
    ExpertSet set;
    set.base = make_params(layout);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        ParamVector p = make_params(layout);
        p.values[0] = weights[i][0];
        p.values[1] = weights[i][1];
        set.experts.push_back(std::move(p));
        set.timestamps.push_back(static_cast<double>(i + 1));
        set.domain_indices.push_back(static_cast<int>(i));
    }
    return set;
}

}  // namespace

TEST_CASE("closed-form coefficients: d=(1,2,3), r=1") {
    Eigen::Vector3d d(1.0, 2.0, 3.0);
    CoeffVector c = compute_coefficients(d, 1.0);
    CHECK(std::abs(c.alphas[0] - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(c.alphas[1] - 1.0 / 3.0) < 1e-12);
    CHECK(c.alphas[2] == 0.0);  // the farthest expert gets exactly zero
    CHECK(std::abs(c.alphas.sum() - 1.0) < 1e-12);
}

TEST_CASE("large r concentrates on the nearest expert") {
    Eigen::Vector3d d(1.0, 2.0, 3.0);
    CoeffVector c = compute_coefficients(d, 50.0);
    CHECK(std::abs(c.alphas[0] - 1.0) < 1e-6);
    CHECK(c.alphas[1] < 1e-6);
    CHECK(c.alphas[2] == 0.0);
}

TEST_CASE("equal distances fall back to uniform") {
    Eigen::Vector4d d(2.0, 2.0, 2.0, 2.0);
    CoeffVector c = compute_coefficients(d, 5.0);
    CHECK(c.uniform_fallback);
    for (int i = 0; i < 4; ++i) CHECK(c.alphas[i] == doctest::Approx(0.25).epsilon(1e-15));

    CoeffVector single = compute_coefficients(Eigen::VectorXd::Constant(1, 3.0), 2.0);
    CHECK(single.uniform_fallback);
    CHECK(single.alphas[0] == 1.0);
}

TEST_CASE("input validation") {
    Eigen::Vector2d d(1.0, 2.0);
    CHECK_THROWS_AS(compute_coefficients(d, 0.0), ConfigError);
    CHECK_THROWS_AS(compute_coefficients(d, -1.0), ConfigError);
    Eigen::Vector2d bad(-0.5, 2.0);
    CHECK_THROWS_AS(compute_coefficients(bad, 1.0), std::invalid_argument);
}

TEST_CASE("simplex, monotonicity and exact scale invariance over random draws") {
    Rng rng(314);
    for (int trial = 0; trial < 1000; ++trial) {
        const int s = 2 + static_cast<int>(rng.uniform_below(7));
        Eigen::VectorXd d(s);
        for (int i = 0; i < s; ++i) d[i] = rng.uniform(0.0, 10.0);
        const double r = rng.uniform(0.1, 8.0);
        CoeffVector c = compute_coefficients(d, r);

        CHECK(std::abs(c.alphas.sum() - 1.0) < 1e-12);
        CHECK(c.alphas.minCoeff() >= 0.0);
        for (int i = 0; i < s; ++i) {
            for (int j = 0; j < s; ++j) {
                if (d[i] < d[j]) CHECK(c.alphas[i] >= c.alphas[j]);
                if (d[i] == d[j]) CHECK(c.alphas[i] == c.alphas[j]);
            }
        }

        // Power-of-two scalings are exact in floating point, so the
        // coefficients must match bit for bit; general scalings agree to
        // rounding error.
        const double pow2 = 1 << rng.uniform_below(4);
        CoeffVector scaled2 = compute_coefficients((pow2 * d).eval(), r);
        CHECK(scaled2.alphas == c.alphas);
        const double lambda = rng.uniform(0.25, 4.0);
        CoeffVector scaled = compute_coefficients((lambda * d).eval(), r);
        CHECK((scaled.alphas - c.alphas).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("distances in the projection space") {
    Eigen::MatrixXd proj(2, 1);
    proj << 0.0, 3.0;
    Eigen::VectorXd f(1);
    f << 1.0;
    Eigen::VectorXd d = compute_distances(proj, f);
    CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(2.0).epsilon(1e-15));

    // Zero distance at the forecast itself.
    Eigen::VectorXd at = compute_distances(proj, Eigen::VectorXd::Constant(1, 3.0));
    CHECK(at[1] == 0.0);

    // Rotation invariance: distances depend only on the geometry.
    Rng rng(5);
    Eigen::MatrixXd p5(4, 3);
    for (Eigen::Index i = 0; i < p5.size(); ++i) p5(i) = rng.normal();
    Eigen::VectorXd f3(3);
    for (int i = 0; i < 3; ++i) f3[i] = rng.normal();
    Eigen::MatrixXd m(3, 3);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd before = compute_distances(p5, f3);
    Eigen::VectorXd after = compute_distances(p5 * q, (q.transpose() * f3).eval());
    CHECK((before - after).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("combine_weights: one-hot, identical experts, arithmetic") {
    ExpertSet set = toy_experts({{0.0, 2.0}, {2.0, 0.0}});

    CoeffVector pick = one_hot_coefficients(2, 1);
    ParamVector combined = combine_weights(set, pick);
    CHECK(combined.values == set.experts[1].values);

    CoeffVector half = uniform_coefficients(2);
    ParamVector mid = combine_weights(set, half);
    CHECK(mid.values[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mid.values[1] == doctest::Approx(1.0).epsilon(1e-15));

    ExpertSet same = toy_experts({{0.3, -0.7}, {0.3, -0.7}, {0.3, -0.7}});
    ParamVector avg = combine_weights(same, uniform_coefficients(3));
    CHECK(std::abs(avg.values[0] - 0.3) < 1e-15);
    CHECK(std::abs(avg.values[1] + 0.7) < 1e-15);

    CHECK_THROWS_AS(combine_weights(set, uniform_coefficients(3)), ShapeError);
}

TEST_CASE("reversed coefficients invert the ranking") {
    Eigen::Vector3d d(1.0, 2.0, 3.0);
    CoeffVector c = compute_coefficients(d, 1.0);
    CoeffVector rev = reversed_coefficients(c);
    CHECK(rev.alphas[0] == 0.0);
    CHECK(rev.alphas[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rev.alphas[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // Uniform is a fixed point; reversing twice restores the original.
    CoeffVector uni = uniform_coefficients(4);
    CHECK(reversed_coefficients(uni).alphas == uni.alphas);
    CoeffVector twice = reversed_coefficients(rev);
    CHECK(twice.alphas == c.alphas);
}

TEST_CASE("combination linearity through a linear output head") {
    // Weight-space averaging equals output averaging exactly for models that
    // are linear in their parameters.
    ModelSpec spec;
    spec.layer_sizes = {3, 2};
    spec.output_head = OutputHead::kRegressionScalar;
    auto layout = build_layer_map(spec);

    Rng rng(123);
    ExpertSet set;
    set.base = make_params(layout);
    for (int i = 0; i < 4; ++i) {
        ParamVector p = make_params(layout);
        for (Eigen::Index k = 0; k < p.values.size(); ++k) p.values[k] = rng.normal();
        set.experts.push_back(std::move(p));
        set.timestamps.push_back(i + 1.0);
        set.domain_indices.push_back(i);
    }
    Eigen::Vector4d d(0.5, 1.0, 2.0, 4.0);
    CoeffVector c = compute_coefficients(d, 2.0);

    Eigen::MatrixXd x(6, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-2.0, 2.0);

    ParamVector combined = combine_weights(set, c);
    Eigen::MatrixXd weight_space = forward_eval(spec, combined, x);
    Eigen::MatrixXd output_space = Eigen::MatrixXd::Zero(6, 2);
    for (int i = 0; i < 4; ++i) {
        output_space += c.alphas[i] * forward_eval(spec, set.experts[static_cast<std::size_t>(i)], x);
    }
    CHECK((weight_space - output_space).cwiseAbs().maxCoeff() < 1e-12);
}
