#include "doctest.h"

#include <Eigen/Dense>

#include <filesystem>

#include "tea/rng.hpp"
#include "tea/subspace.hpp"

using namespace tea;

namespace {

DeviationMatrix random_deviations(int s, int d, std::uint64_t seed) {
    Rng rng(seed);
    DeviationMatrix dev;
    dev.rows.resize(s, d);
    for (Eigen::Index i = 0; i < dev.rows.size(); ++i) dev.rows(i) = rng.normal();
    for (int i = 0; i < s; ++i) dev.timestamps.push_back(i + 1.0);
    return dev;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& rows) {
    const Eigen::Index n = rows.rows();
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (rows.row(i) - rows.row(j)).norm();
    }
    return d;
}

}  // namespace

TEST_CASE("symmetric two-point case") {
    DeviationMatrix dev;
    dev.rows.resize(2, 2);
    dev.rows << 1.0, 0.0, -1.0, 0.0;
    dev.timestamps = {1.0, 2.0};

    Subspace sub = fit_subspace(dev, 10);
    REQUIRE(sub.p_effective == 1);
    // Sign convention: the most recent expert projects non-negatively, so the
    // component points along (-1, 0) and the projections are (-1, 1).
    CHECK(sub.components(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(sub.components(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sub.projections(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(sub.projections(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("collinear deviations collapse to one component") {
    DeviationMatrix dev;
    dev.rows.resize(3, 4);
    Eigen::RowVector4d dir(1.0, 2.0, -1.0, 0.5);
    dev.rows.row(0) = 1.0 * dir;
    dev.rows.row(1) = 2.0 * dir;
    dev.rows.row(2) = 3.5 * dir;
    dev.timestamps = {1.0, 2.0, 3.0};

    Subspace sub = fit_subspace(dev, 10);
    CHECK(sub.p_effective == 1);
    CHECK(sub.clipped);
}

TEST_CASE("full-rank projections preserve centered pairwise distances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        DeviationMatrix dev = random_deviations(6, 50, 1000 + seed);
        Subspace sub = fit_subspace(dev, 5);  // rank is S-1 = 5 a.s.
        REQUIRE(sub.p_effective == 5);

        // Orthonormal components.
        Eigen::MatrixXd gram = sub.components * sub.components.transpose();
        CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);

        Eigen::MatrixXd centered = dev.rows.rowwise() - dev.rows.colwise().mean();
        Eigen::MatrixXd full = pairwise_distances(centered);
        Eigen::MatrixXd low = pairwise_distances(sub.projections);
        CHECK((full - low).cwiseAbs().maxCoeff() < 1e-6);

        // Explained variance is non-increasing.
        for (int p = 1; p < sub.p_effective; ++p) {
            CHECK(sub.explained_variance[p] <= sub.explained_variance[p - 1] + 1e-12);
        }
    }
}

TEST_CASE("projection consistency and base-projects-to-zero") {
    // Model-backed deviations: two tiny experts around a base.
    ModelSpec spec;
    spec.layer_sizes = {2, 3, 2};
    Rng rng(7);
    ParamVector base = init_params(spec, rng);
    ExpertSet set;
    set.base = base;
    for (int i = 0; i < 3; ++i) {
        ParamVector e = base;
        for (Eigen::Index k = 0; k < e.values.size(); ++k) e.values[k] += 0.1 * rng.normal();
        set.experts.push_back(e);
        set.timestamps.push_back(i + 1.0);
        set.domain_indices.push_back(i);
    }

    DeviationMatrix dev = deviations_from(set);
    Subspace sub = fit_subspace(dev, 2);

    Eigen::VectorXd zero = project(sub, base, base);
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

    for (int i = 0; i < set.size(); ++i) {
        Eigen::VectorXd c = project(sub, set.experts[static_cast<std::size_t>(i)], base);
        CHECK((c - sub.projections.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("offset invariance: shared shifts move projections rigidly") {
    DeviationMatrix dev = random_deviations(5, 30, 77);
    Subspace sub = fit_subspace(dev, 4);

    Rng rng(78);
    Eigen::RowVectorXd shift(30);
    for (Eigen::Index i = 0; i < 30; ++i) shift[i] = rng.normal();

    DeviationMatrix shifted = dev;
    shifted.rows.rowwise() += shift;
    Subspace sub2 = fit_subspace(shifted, 4);
    REQUIRE(sub2.p_effective == sub.p_effective);

    // Pairwise distances in projection space are unchanged.
    Eigen::MatrixXd d1 = pairwise_distances(sub.projections);
    Eigen::MatrixXd d2 = pairwise_distances(sub2.projections);
    CHECK((d1 - d2).cwiseAbs().maxCoeff() < 1e-8);

    // Each projection column moves by <shift, v_p> up to the component sign.
    for (int p = 0; p < sub.p_effective; ++p) {
        const double flip =
            sub.components.row(p).dot(sub2.components.row(p)) >= 0.0 ? 1.0 : -1.0;
        const double expected = sub2.components.row(p).dot(shift);
        for (Eigen::Index i = 0; i < 5; ++i) {
            CHECK(sub2.projections(i, p) - flip * sub.projections(i, p) ==
                  doctest::Approx(expected).epsilon(1e-8));
        }
    }
}

TEST_CASE("fit is deterministic bit for bit") {
    DeviationMatrix dev = random_deviations(6, 40, 4242);
    Subspace a = fit_subspace(dev, 3);
    Subspace b = fit_subspace(dev, 3);
    CHECK(a.components == b.components);
    CHECK(a.projections == b.projections);
}

TEST_CASE("degenerate deviations raise the uniform-fallback error") {
    DeviationMatrix dev;
    dev.rows = Eigen::MatrixXd::Constant(4, 10, 0.25);
    dev.timestamps = {1, 2, 3, 4};
    CHECK_THROWS_AS(fit_subspace(dev, 3), DegenerateSubspaceError);

    DeviationMatrix tiny;
    tiny.rows = Eigen::MatrixXd::Zero(1, 10);
    tiny.timestamps = {1};
    CHECK_THROWS_AS(fit_subspace(tiny, 3), ConfigError);
}

TEST_CASE("subspace persistence round trip") {
    DeviationMatrix dev = random_deviations(5, 20, 9);
    Subspace sub = fit_subspace(dev, 3);
    const auto dir = std::filesystem::temp_directory_path() / "tea_subspace_test";
    save_subspace(sub, dir, "deadbeef");
    std::string hash;
    Subspace back = load_subspace(dir, &hash);
    CHECK(hash == "deadbeef");
    CHECK(back.components == sub.components);
    CHECK(back.projections == sub.projections);
    CHECK(back.p_effective == sub.p_effective);
    CHECK(back.timestamps == sub.timestamps);
}
