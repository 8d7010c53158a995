#include "tea/subspace.hpp"

#include <Eigen/Dense>

#include <fstream>

#include "tea/checkpoint.hpp"

namespace tea {

DeviationMatrix deviations_from(const ExpertSet& experts) {
    if (experts.size() < 1) throw ConfigError("deviations_from: empty expert set");
    DeviationMatrix dev;
    const Eigen::VectorXd base = gather_non_statistic(experts.base);
    dev.rows.resize(experts.size(), base.size());
    for (int i = 0; i < experts.size(); ++i) {
        if (!same_layout(experts.experts[static_cast<std::size_t>(i)], experts.base)) {
            throw ShapeError("deviations_from: expert layout mismatch");
        }
        dev.rows.row(i) =
            (gather_non_statistic(experts.experts[static_cast<std::size_t>(i)]) - base).transpose();
    }
    dev.timestamps = experts.timestamps;
    return dev;
}

Subspace fit_subspace(const DeviationMatrix& dev, int p_config) {
    const Eigen::Index s = dev.rows.rows();
    if (s < 2) throw ConfigError("fit_subspace needs at least 2 deviation rows");
    if (p_config < 1) throw ConfigError("subspace dimension must be >= 1");

    Subspace sub;
    sub.p_requested = p_config;
    sub.timestamps = dev.timestamps;
    sub.mean_deviation = dev.rows.colwise().mean();

    Eigen::MatrixXd centered = dev.rows.rowwise() - sub.mean_deviation.transpose();
    const Eigen::MatrixXd gram = centered * centered.transpose();  // S x S

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) throw NumericError("Gram eigendecomposition failed");
    const Eigen::VectorXd eigenvalues = solver.eigenvalues();  // ascending
    const double lambda_max = eigenvalues[s - 1];
    if (lambda_max <= 0.0) {
        throw DegenerateSubspaceError(
            "all expert deviations are identical; fall back to uniform coefficients");
    }
    const double tol = lambda_max * 1e-12;

    int rank = 0;
    for (Eigen::Index i = 0; i < s; ++i) {
        if (eigenvalues[i] > tol) ++rank;
    }
    sub.p_effective = std::min(p_config, rank);
    sub.clipped = p_config > rank;

    sub.components.resize(sub.p_effective, dev.rows.cols());
    sub.explained_variance.resize(sub.p_effective);
    for (int p = 0; p < sub.p_effective; ++p) {
        const Eigen::Index col = s - 1 - p;  // largest first
        const double lambda = eigenvalues[col];
        Eigen::VectorXd v = centered.transpose() * solver.eigenvectors().col(col);
        v /= v.norm();
        sub.components.row(p) = v.transpose();
        sub.explained_variance[p] = lambda;
    }

    // Projections of the uncentered deviations, then the sign convention.
    sub.projections = dev.rows * sub.components.transpose();
    for (int p = 0; p < sub.p_effective; ++p) {
        double pivot = sub.projections(s - 1, p);
        if (pivot == 0.0) {
            for (Eigen::Index i = 0; i < s; ++i) {
                if (sub.projections(i, p) != 0.0) {
                    pivot = sub.projections(i, p);
                    break;
                }
            }
        }
        if (pivot < 0.0) {
            sub.components.row(p) = -sub.components.row(p);
            sub.projections.col(p) = -sub.projections.col(p);
        }
    }
    return sub;
}

Eigen::VectorXd project_deviation(const Subspace& subspace, const Eigen::VectorXd& deviation) {
    if (deviation.size() != subspace.components.cols()) {
        throw ShapeError("project: deviation length mismatch");
    }
    return subspace.components * deviation;
}

Eigen::VectorXd project(const Subspace& subspace, const ParamVector& theta,
                        const ParamVector& base) {
    if (!same_layout(theta, base)) throw ShapeError("project: layout mismatch");
    return project_deviation(subspace, gather_non_statistic(theta) - gather_non_statistic(base));
}

void save_subspace(const Subspace& subspace, const std::filesystem::path& dir,
                   const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    // Components concatenated row-major into one raw TEAC vector.
    Eigen::VectorXd flat(subspace.components.size());
    Eigen::Index cursor = 0;
    for (int p = 0; p < subspace.p_effective; ++p) {
        flat.segment(cursor, subspace.components.cols()) = subspace.components.row(p).transpose();
        cursor += subspace.components.cols();
    }
    save_raw_vector(dir / "components.teac", flat,
                    {{"kind", "subspace_components"},
                     {"rows", subspace.p_effective},
                     {"cols", subspace.components.cols()},
                     {"config_hash", config_hash}});

    nlohmann::json table;
    table["p_requested"] = subspace.p_requested;
    table["p_effective"] = subspace.p_effective;
    table["clipped"] = subspace.clipped;
    table["config_hash"] = config_hash;
    table["timestamps"] = subspace.timestamps;
    table["explained_variance"] = std::vector<double>(
        subspace.explained_variance.data(),
        subspace.explained_variance.data() + subspace.explained_variance.size());
    table["mean_deviation"] = std::vector<double>(
        subspace.mean_deviation.data(), subspace.mean_deviation.data() + subspace.mean_deviation.size());
    nlohmann::json proj = nlohmann::json::array();
    for (Eigen::Index i = 0; i < subspace.projections.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(subspace.projections.cols()));
        for (Eigen::Index j = 0; j < subspace.projections.cols(); ++j) {
            row[static_cast<std::size_t>(j)] = subspace.projections(i, j);
        }
        proj.push_back(row);
    }
    table["projections"] = proj;
    std::ofstream out(dir / "subspace.json", std::ios::trunc);
    if (!out) throw IoError("cannot write subspace table in " + dir.string());
    out << table.dump(2) << "\n";
}

Subspace load_subspace(const std::filesystem::path& dir, std::string* config_hash) {
    std::ifstream in(dir / "subspace.json");
    if (!in) throw IoError("missing subspace table in " + dir.string());
    nlohmann::json table;
    in >> table;

    Subspace sub;
    sub.p_requested = table.at("p_requested").get<int>();
    sub.p_effective = table.at("p_effective").get<int>();
    sub.clipped = table.at("clipped").get<bool>();
    sub.timestamps = table.at("timestamps").get<std::vector<double>>();
    const auto ev = table.at("explained_variance").get<std::vector<double>>();
    sub.explained_variance = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    const auto mean = table.at("mean_deviation").get<std::vector<double>>();
    sub.mean_deviation =
        Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));

    nlohmann::json meta;
    const Eigen::VectorXd flat = load_raw_vector(dir / "components.teac", &meta);
    const auto rows = meta.at("rows").get<Eigen::Index>();
    const auto cols = meta.at("cols").get<Eigen::Index>();
    if (rows * cols != flat.size()) throw IoError("subspace components size mismatch");
    sub.components.resize(rows, cols);
    for (Eigen::Index p = 0; p < rows; ++p) {
        sub.components.row(p) = flat.segment(p * cols, cols).transpose();
    }

    const auto proj = table.at("projections").get<std::vector<std::vector<double>>>();
    sub.projections.resize(static_cast<Eigen::Index>(proj.size()), rows);
    for (std::size_t i = 0; i < proj.size(); ++i) {
        if (static_cast<Eigen::Index>(proj[i].size()) != rows) {
            throw IoError("subspace projection width mismatch");
        }
        for (Eigen::Index j = 0; j < rows; ++j) {
            sub.projections(static_cast<Eigen::Index>(i), j) = proj[i][static_cast<std::size_t>(j)];
        }
    }
    if (config_hash) *config_hash = table.value("config_hash", "");
    return sub;
}

}  // namespace tea
