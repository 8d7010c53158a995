#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>

#include "tea/dataset.hpp"

using namespace tea;

TEST_CASE("moons: zero angle step means identically parameterized domains") {
    auto ds = generate_rotated_moons(40, 3, 1, 0.0, 0.1, 11);
    for (const auto& d : ds.domains) {
        CHECK(d.generator_params.at("angle_deg").get<double>() == 0.0);
    }
    // Same distribution parameters, but per-domain draws still differ.
    CHECK(ds.domains[0].train.x != ds.domains[1].train.x);
}

TEST_CASE("moons: S=6/F=3 with 10 degree steps covers 0..80") {
    auto ds = generate_rotated_moons(40, 6, 3, 10.0, 0.1, 1);
    CHECK(ds.domains.size() == 9);
    for (int i = 0; i < 9; ++i) {
        CHECK(ds.domains[static_cast<std::size_t>(i)].generator_params.at("angle_deg") ==
              10.0 * i);
    }
    // Splits are 90:10 of the pool, test pool is a fresh full-size draw.
    CHECK(ds.domains[0].train.size() == 36);
    CHECK(ds.domains[0].val.size() == 4);
    CHECK(ds.domains[0].test.size() == 40);
}

TEST_CASE("gaussians: sigma 0 exposes rotation identities") {
    // 180 degrees maps (x, y) to (-x, -y).
    auto ds = generate_rotated_gaussians(2, 40, 2, 1, 180.0, 2.0, 0.0, 3);
    Eigen::RowVector2d m0;  // class 0 mean at angle 0 (sigma 0: samples == mean)
    for (Eigen::Index i = 0; i < ds.domains[0].train.size(); ++i) {
        if (ds.domains[0].train.y[i] == 0.0) {
            m0 = ds.domains[0].train.x.row(i);
            break;
        }
    }
    bool found = false;
    for (Eigen::Index i = 0; i < ds.domains[1].train.size(); ++i) {
        if (ds.domains[1].train.y[i] == 0.0) {
            CHECK((ds.domains[1].train.x.row(i) + m0).norm() < 1e-9);
            found = true;
            break;
        }
    }
    CHECK(found);

    // 4 classes sit 90 degrees apart on the circle.
    auto ds4 = generate_rotated_gaussians(4, 40, 2, 1, 0.0, 1.0, 0.0, 3);
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(4, 2);
    for (Eigen::Index i = 0; i < ds4.domains[0].train.size(); ++i) {
        const int c = static_cast<int>(ds4.domains[0].train.y[i]);
        means.row(c) = ds4.domains[0].train.x.row(i);
    }
    for (int c = 0; c < 4; ++c) {
        const double want = c * M_PI / 2.0;
        CHECK(means(c, 0) == doctest::Approx(std::cos(want)).epsilon(1e-9));
        CHECK(means(c, 1) == doctest::Approx(std::sin(want)).epsilon(1e-9));
    }
}

TEST_CASE("gaussians: empirical class mean within Monte Carlo bounds") {
    const double sigma = 0.5, radius = 2.0;
    auto ds = generate_rotated_gaussians(2, 10000, 2, 1, 30.0, radius, sigma, 17);
    const auto& s = ds.domains[0].train;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    int count = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s.y[i] == 0.0) {
            sum += s.x.row(i).transpose();
            ++count;
        }
    }
    const Eigen::Vector2d mean = sum / count;
    const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(count));
    CHECK(std::abs(mean[0] - radius) < bound);
    CHECK(std::abs(mean[1] - 0.0) < bound);
}

TEST_CASE("hyperplane: weight drift and OLS recovery") {
    auto flat = generate_drifting_hyperplane(3, 60, 3, 1, 0.0, 0.1, 5);
    const auto w0 = flat.domains[0].generator_params.at("w").get<std::vector<double>>();
    for (const auto& d : flat.domains) {
        CHECK(d.generator_params.at("w").get<std::vector<double>>() == w0);
    }

    // Closed-form least squares recovers the generating weights.
    auto ds = generate_drifting_hyperplane(3, 400, 3, 1, 0.3, 0.0, 5);
    for (int i = 0; i < 3; ++i) {
        const auto& train = ds.domains[static_cast<std::size_t>(i)].train;
        Eigen::VectorXd w_ols = train.x.colPivHouseholderQr().solve(train.y);
        const auto w_true =
            ds.domains[static_cast<std::size_t>(i)].generator_params.at("w").get<std::vector<double>>();
        for (int j = 0; j < 3; ++j) {
            CHECK(std::abs(w_ols[j] - w_true[static_cast<std::size_t>(j)]) < 1e-8);
        }
    }

    // With noise, recovery degrades gracefully but stays within loose bounds.
    auto noisy = generate_drifting_hyperplane(3, 2000, 2, 1, 0.3, 0.05, 5);
    const auto& train = noisy.domains[0].train;
    Eigen::VectorXd w_ols = train.x.colPivHouseholderQr().solve(train.y);
    const auto w_true = noisy.domains[0].generator_params.at("w").get<std::vector<double>>();
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(w_ols[j] - w_true[static_cast<std::size_t>(j)]) < 0.01);
    }
}

TEST_CASE("datasets regenerate bit-identically and splits are disjoint") {
    auto a = generate_rotated_moons(50, 4, 2, 15.0, 0.1, 123);
    auto b = generate_rotated_moons(50, 4, 2, 15.0, 0.1, 123);
    for (std::size_t i = 0; i < a.domains.size(); ++i) {
        CHECK(a.domains[i].train.x == b.domains[i].train.x);
        CHECK(a.domains[i].val.y == b.domains[i].val.y);
        CHECK(a.domains[i].test.x == b.domains[i].test.x);
    }
    // No val row appears in train (continuous draws; exact match test).
    const auto& d = a.domains[0];
    for (Eigen::Index i = 0; i < d.val.size(); ++i) {
        for (Eigen::Index j = 0; j < d.train.size(); ++j) {
            CHECK(d.val.x.row(i) != d.train.x.row(j));
        }
    }
}

TEST_CASE("buffers: sizes, determinism, subset of train split") {
    // Hand-built dataset with exactly 1000 train samples per source domain.
    TemporalDataset ds;
    ds.task = TaskKind::kClassification;
    ds.source_count = 2;
    ds.target_count = 1;
    ds.class_count = 2;
    for (int i = 0; i < 3; ++i) {
        Domain d;
        d.timestamp = i + 1;
        d.train.x = Eigen::MatrixXd::Random(1000, 2);
        d.train.y = Eigen::VectorXd::Zero(1000);
        d.val = d.train;
        d.test = d.train;
        ds.domains.push_back(std::move(d));
    }

    auto buffers = make_buffers(ds, 0.10, 7);
    REQUIRE(buffers.size() == 2);
    CHECK(buffers[0].samples.size() == 100);

    for (double ratio : {0.01, 0.03, 0.05, 0.10, 0.20}) {
        auto b = make_buffers(ds, ratio, 7);
        CHECK(b[0].samples.size() == static_cast<Eigen::Index>(std::llround(ratio * 1000)));
    }

    // ratio 1.0 keeps the whole split (as a permutation).
    auto full = make_buffers(ds, 1.0, 7);
    CHECK(full[0].samples.size() == 1000);
    CHECK(full[0].samples.x.sum() == doctest::Approx(ds.domains[0].train.x.sum()).epsilon(1e-12));

    // Deterministic, and every buffer row comes from the train split.
    auto again = make_buffers(ds, 0.10, 7);
    CHECK(again[0].samples.x == buffers[0].samples.x);
    for (Eigen::Index i = 0; i < buffers[1].samples.size(); ++i) {
        bool member = false;
        for (Eigen::Index j = 0; j < ds.domains[1].train.size(); ++j) {
            if (buffers[1].samples.x.row(i) == ds.domains[1].train.x.row(j)) member = true;
        }
        CHECK(member);
    }

    CHECK_THROWS_AS(make_buffers(ds, 0.0, 7), ConfigError);
    CHECK_THROWS_AS(make_buffers(ds, 1.5, 7), ConfigError);
}

TEST_CASE("shuffle_source_order permutes contents, not the time axis") {
    auto ds = generate_rotated_moons(40, 5, 2, 10.0, 0.1, 21);
    auto shuffled = shuffle_source_order(ds, 4);

    // Timestamps unchanged and ascending.
    for (std::size_t i = 0; i < ds.domains.size(); ++i) {
        CHECK(shuffled.domains[i].timestamp == ds.domains[i].timestamp);
    }
    // Targets untouched.
    for (int k = 0; k < 2; ++k) {
        CHECK(shuffled.target(k).train.x == ds.target(k).train.x);
    }
    // Source contents are a bijection of the originals.
    std::vector<bool> used(5, false);
    for (int i = 0; i < 5; ++i) {
        bool matched = false;
        for (int j = 0; j < 5; ++j) {
            if (!used[static_cast<std::size_t>(j)] &&
                shuffled.source(i).train.x == ds.source(j).train.x) {
                used[static_cast<std::size_t>(j)] = true;
                matched = true;
                break;
            }
        }
        CHECK(matched);
    }
    // Same seed, same permutation.
    auto again = shuffle_source_order(ds, 4);
    for (int i = 0; i < 5; ++i) {
        CHECK(again.source(i).train.x == shuffled.source(i).train.x);
    }
}

TEST_CASE("jsonl export/import round trip") {
    auto ds = generate_rotated_gaussians(3, 30, 2, 1, 20.0, 1.5, 0.3, 9);
    const auto dir = std::filesystem::temp_directory_path() / "tea_ds_test";
    export_jsonl(ds, dir);
    auto back = import_jsonl(dir);
    CHECK(back.source_count == ds.source_count);
    CHECK(back.class_count == ds.class_count);
    CHECK(back.generator == ds.generator);
    for (std::size_t i = 0; i < ds.domains.size(); ++i) {
        CHECK(back.domains[i].timestamp == ds.domains[i].timestamp);
        CHECK(back.domains[i].train.x == ds.domains[i].train.x);
        CHECK(back.domains[i].val.y == ds.domains[i].val.y);
        CHECK(back.domains[i].test.x == ds.domains[i].test.x);
    }
}

TEST_CASE("generator preconditions") {
    CHECK_THROWS_AS(generate_rotated_moons(10, 3, 1, 10.0, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(generate_rotated_moons(40, 1, 1, 10.0, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(generate_rotated_gaussians(1, 40, 2, 1, 10.0, 1.0, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(generate_drifting_hyperplane(0, 40, 2, 1, 0.1, 0.1, 1), ConfigError);
}
