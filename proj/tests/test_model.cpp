#include "doctest.h"

#include <Eigen/Dense>

#include "tea/model.hpp"
#include "tea/rng.hpp"

using namespace tea;

namespace {

ModelSpec mlp_2_4_2() {
    ModelSpec spec;
    spec.layer_sizes = {2, 4, 2};
    spec.activation = Activation::kRelu;
    spec.output_head = OutputHead::kClassificationLogits;
    return spec;
}

// Straight-line matrix arithmetic oracle: plain loops, no Eigen products.
Eigen::MatrixXd relu_mlp_oracle(const ModelSpec& spec, const ParamVector& params,
                                const Eigen::MatrixXd& x) {
    auto layers = unflatten(spec, params);
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l].weight;
        const auto& b = layers[l].bias;
        Eigen::MatrixXd z(a.rows(), w.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                double acc = b[j];
                for (Eigen::Index k = 0; k < w.rows(); ++k) acc += a(i, k) * w(k, j);
                z(i, j) = acc;
            }
        }
        if (l + 1 < layers.size()) {
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                z(i) = z(i) > 0.0 ? z(i) : 0.0;
            }
        }
        a = z;
    }
    return a;
}

double central_difference(const ModelSpec& spec, ParamVector params, const Eigen::MatrixXd& x,
                          const Eigen::MatrixXd& t, LossKind loss, Eigen::Index k, double h) {
    ParamVector plus = params, minus = params;
    plus.values[k] += h;
    minus.values[k] -= h;
    return (loss_only(spec, plus, x, t, loss) - loss_only(spec, minus, x, t, loss)) / (2.0 * h);
}

}  // namespace

TEST_CASE("single linear layer with identity weights is the identity map") {
    ModelSpec spec;
    spec.layer_sizes = {3, 3};
    spec.output_head = OutputHead::kRegressionScalar;
    std::vector<LayerWeights> layers(1);
    layers[0].weight = Eigen::MatrixXd::Identity(3, 3);
    layers[0].bias = Eigen::VectorXd::Zero(3);
    ParamVector params = flatten(spec, layers);

    Eigen::MatrixXd x(2, 3);
    x << 1.0, -2.0, 0.5, 3.0, 0.0, -1.0;
    CHECK(forward_eval(spec, params, x).isApprox(x, 0.0));
}

TEST_CASE("zero-weight relu MLP outputs the last-layer bias") {
    ModelSpec spec = mlp_2_4_2();
    ParamVector params = make_params(build_layer_map(spec));
    auto layers = unflatten(spec, params);
    layers[1].bias << 0.7, -1.3;
    params = flatten(spec, layers);

    Eigen::MatrixXd x(3, 2);
    x << 1.0, 2.0, -5.0, 0.1, 0.0, 0.0;
    Eigen::MatrixXd out = forward_eval(spec, params, x);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        CHECK(out(i, 0) == 0.7);
        CHECK(out(i, 1) == -1.3);
    }
}

TEST_CASE("seed-42 MLP matches the hand-rolled matrix oracle") {
    ModelSpec spec = mlp_2_4_2();
    Rng rng(42);
    ParamVector params = init_params(spec, rng);
    Eigen::MatrixXd x(4, 2);
    x << 0.3, -1.2, 1.7, 0.4, -0.9, -0.5, 2.2, 1.1;

    Eigen::MatrixXd got = forward_eval(spec, params, x);
    Eigen::MatrixXd want = relu_mlp_oracle(spec, params, x);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("1-D linear regression point: loss 4, dloss/dw 4") {
    ModelSpec spec;
    spec.layer_sizes = {1, 1};
    spec.output_head = OutputHead::kRegressionScalar;
    ParamVector params = make_params(build_layer_map(spec));
    params.values[0] = 2.0;  // w; bias stays 0

    Eigen::MatrixXd x(1, 1), y(1, 1);
    x << 1.0;
    y << 0.0;
    auto lg = loss_and_grad(spec, params, x, y, LossKind::kMeanSquaredError, false);
    CHECK(lg.loss == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(lg.grad.values[0] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("uniform logits give cross entropy ln C") {
    for (int classes : {2, 5, 11}) {
        ModelSpec spec;
        spec.layer_sizes = {3, classes};
        ParamVector params = make_params(build_layer_map(spec));  // all zeros -> uniform logits
        Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 3) * 0.0;
        Eigen::MatrixXd labels = Eigen::MatrixXd::Zero(6, 1);
        double loss = loss_only(spec, params, x, labels, LossKind::kCrossEntropy);
        CHECK(loss == doctest::Approx(std::log(static_cast<double>(classes))).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    struct Config {
        ModelSpec spec;
        LossKind loss;
        bool train_mode;
    };
    std::vector<Config> grid;

    ModelSpec clf;
    clf.layer_sizes = {3, 8, 4};
    clf.activation = Activation::kTanh;
    grid.push_back({clf, LossKind::kCrossEntropy, false});
    grid.push_back({clf, LossKind::kCrossEntropy, true});

    ModelSpec reg;
    reg.layer_sizes = {2, 6, 6, 1};
    reg.activation = Activation::kRelu;
    reg.output_head = OutputHead::kRegressionScalar;
    grid.push_back({reg, LossKind::kMeanSquaredError, false});

    ModelSpec normed = clf;
    normed.normalization = Normalization::kRunningStats;
    grid.push_back({normed, LossKind::kCrossEntropy, false});

    Rng rng(42);
    for (auto& cfg : grid) {
        ParamVector params = init_params(cfg.spec, rng);
        // Generic position: random nonzero biases keep relu pre-activations
        // off the exact kink where FD and the subgradient disagree.
        const Eigen::VectorXd pos_mask = non_statistic_mask(*params.layout);
        for (Eigen::Index k = 0; k < params.values.size(); ++k) {
            if (pos_mask[k] == 1.0) params.values[k] = 0.5 * rng.normal();
        }
        const int in = cfg.spec.input_size();
        Eigen::MatrixXd x(8, in);
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.5, 1.5);
        Eigen::MatrixXd t;
        if (cfg.loss == LossKind::kCrossEntropy) {
            t = Eigen::MatrixXd(8, 1);
            for (int i = 0; i < 8; ++i) {
                t(i, 0) = static_cast<double>(rng.uniform_below(cfg.spec.output_size()));
            }
        } else {
            t = Eigen::MatrixXd(8, cfg.spec.output_size());
            for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = rng.uniform(-1.0, 1.0);
        }

        ParamVector work = params;
        auto lg = loss_and_grad(cfg.spec, work, x, t, cfg.loss, cfg.train_mode);
        // In train mode the loss is evaluated against the post-update statistics,
        // which is what the FD probe below sees as well (no normalization there).
        const Eigen::VectorXd mask = non_statistic_mask(*params.layout);
        double worst = 0.0;
        for (Eigen::Index k = 0; k < params.values.size(); ++k) {
            if (mask[k] == 0.0) {
                CHECK(lg.grad.values[k] == 0.0);
                continue;
            }
            const ParamVector& base = cfg.train_mode ? work : params;
            double fd = central_difference(cfg.spec, base, x, t, cfg.loss, k, 1e-5);
            double denom = std::max({std::abs(fd), std::abs(lg.grad.values[k]), 1e-6});
            worst = std::max(worst, std::abs(fd - lg.grad.values[k]) / denom);
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("linearity oracle: single dense layer commutes with weight averaging") {
    ModelSpec spec;
    spec.layer_sizes = {3, 2};
    spec.output_head = OutputHead::kRegressionScalar;
    Rng rng(7);
    std::vector<ParamVector> members;
    for (int i = 0; i < 4; ++i) members.push_back(init_params(spec, rng));
    Eigen::VectorXd alpha(4);
    alpha << 0.1, 0.4, 0.3, 0.2;

    ParamVector avg = make_params(members[0].layout);
    for (int i = 0; i < 4; ++i) avg.values += alpha[i] * members[i].values;

    Eigen::MatrixXd x(5, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-2.0, 2.0);

    Eigen::MatrixXd lhs = forward_eval(spec, avg, x);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(5, 2);
    for (int i = 0; i < 4; ++i) rhs += alpha[i] * forward_eval(spec, members[i], x);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward is deterministic and eval mode leaves statistics untouched") {
    ModelSpec spec = mlp_2_4_2();
    spec.normalization = Normalization::kRunningStats;
    Rng rng(3);
    ParamVector params = init_params(spec, rng);
    Eigen::MatrixXd x(6, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.0, 1.0);

    ParamVector a = params, b = params;
    Eigen::MatrixXd o1 = forward(spec, a, x, false);
    Eigen::MatrixXd o2 = forward(spec, b, x, false);
    CHECK(o1 == o2);
    CHECK(a.values == params.values);

    // Train mode moves the running statistics, nothing else.
    ParamVector c = params;
    forward(spec, c, x, true);
    const Eigen::VectorXd mask = non_statistic_mask(*params.layout);
    bool stats_moved = false;
    for (Eigen::Index k = 0; k < c.values.size(); ++k) {
        if (mask[k] == 1.0) {
            CHECK(c.values[k] == params.values[k]);
        } else if (c.values[k] != params.values[k]) {
            stats_moved = true;
        }
    }
    CHECK(stats_moved);
}

TEST_CASE("layer map: 2-3-2 MLP without normalization has 17 parameters") {
    ModelSpec spec;
    spec.layer_sizes = {2, 3, 2};
    CHECK(param_count(spec) == 17);

    // With running stats on the hidden layer: exactly one affine and one
    // statistic segment for that layer.
    spec.normalization = Normalization::kRunningStats;
    auto layout = build_layer_map(spec);
    int affine = 0, stats = 0;
    for (const auto& seg : layout->segments()) {
        if (seg.kind == SegmentKind::kNormAffine) ++affine;
        if (seg.kind == SegmentKind::kNormStatistic) ++stats;
    }
    CHECK(affine == 1);
    CHECK(stats == 1);
    CHECK(layout->total_size() == 17 + 12);  // scale/shift + mean/var of 3 units
}

TEST_CASE("flatten/unflatten round trip is bit-exact") {
    ModelSpec spec;
    spec.layer_sizes = {4, 5, 3};
    spec.normalization = Normalization::kRunningStats;
    Rng rng(11);
    ParamVector p = init_params(spec, rng);
    for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values[i] = rng.normal();
    ParamVector q = flatten(spec, unflatten(spec, p));
    CHECK(p.values == q.values);
    // Layer map stable across calls.
    CHECK(*build_layer_map(spec) == *build_layer_map(spec));
}

TEST_CASE("shape errors name the offending layer") {
    ModelSpec spec = mlp_2_4_2();
    Rng rng(1);
    ParamVector params = init_params(spec, rng);
    Eigen::MatrixXd bad(3, 5);
    bad.setZero();
    CHECK_THROWS_WITH_AS(forward_eval(spec, params, bad),
                         doctest::Contains("dense1"), ShapeError);
}

TEST_CASE("loss kind / head compatibility") {
    ModelSpec clf = mlp_2_4_2();
    CHECK_THROWS_AS(validate_loss(clf, LossKind::kMeanSquaredError), ConfigError);
    CHECK_NOTHROW(validate_loss(clf, LossKind::kMeanSquaredError, true));
    ModelSpec reg = clf;
    reg.output_head = OutputHead::kRegressionScalar;
    CHECK_THROWS_AS(validate_loss(reg, LossKind::kCrossEntropy), ConfigError);
}
