#include "tea/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace tea {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double deg_to_rad(double deg) { return deg * kPi / 180.0; }

void rotate_rows(Eigen::MatrixXd& x, double angle_rad) {
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double px = x(i, 0), py = x(i, 1);
        x(i, 0) = c * px - s * py;
        x(i, 1) = s * px + c * py;
    }
}

// 90:10 split of a freshly drawn pool, order randomized.
void split_pool(SampleSet pool, Rng& rng, SampleSet& train, SampleSet& val) {
    const Eigen::Index n = pool.size();
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const Eigen::Index n_train =
        static_cast<Eigen::Index>(std::llround(0.9 * static_cast<double>(n)));
    train.x.resize(n_train, pool.x.cols());
    train.y.resize(n_train);
    val.x.resize(n - n_train, pool.x.cols());
    val.y.resize(n - n_train);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]);
        if (i < n_train) {
            train.x.row(i) = pool.x.row(src);
            train.y[i] = pool.y[src];
        } else {
            val.x.row(i - n_train) = pool.x.row(src);
            val.y[i - n_train] = pool.y[src];
        }
    }
}

template <typename DrawFn>
Domain make_domain(double timestamp, int n_per_domain, Rng domain_rng, DrawFn&& draw,
                   nlohmann::json generator_params) {
    Domain d;
    d.timestamp = timestamp;
    d.generator_params = std::move(generator_params);
    Rng pool_rng = domain_rng.split("pool");
    Rng split_rng = domain_rng.split("split");
    Rng test_rng = domain_rng.split("test");
    SampleSet pool = draw(n_per_domain, pool_rng);
    split_pool(std::move(pool), split_rng, d.train, d.val);
    d.test = draw(n_per_domain, test_rng);
    return d;
}

void check_counts(int n_per_domain, int sources, int targets) {
    if (sources < 2) throw ConfigError("need at least 2 source domains");
    if (targets < 1) throw ConfigError("need at least 1 target domain");
    if (n_per_domain < 20) throw ConfigError("n_per_domain must be >= 20");
}

}  // namespace

TemporalDataset generate_rotated_moons(int n_per_domain, int sources, int targets,
                                       double angle_step_deg, double noise_sigma,
                                       std::uint64_t seed) {
    check_counts(n_per_domain, sources, targets);
    if (angle_step_deg < 0.0) throw ConfigError("angle_step_deg must be >= 0");

    TemporalDataset ds;
    ds.task = TaskKind::kClassification;
    ds.source_count = sources;
    ds.target_count = targets;
    ds.class_count = 2;
    ds.seed = seed;
    ds.generator = "rotated_moons";

    Rng root(seed);
    for (int i = 0; i < sources + targets; ++i) {
        const double angle = static_cast<double>(i) * angle_step_deg;
        auto draw = [&, angle](int n, Rng& rng) {
            SampleSet s;
            s.x.resize(n, 2);
            s.y.resize(n);
            for (int k = 0; k < n; ++k) {
                const int label = k % 2;
                const double t = rng.uniform(0.0, kPi);
                double px, py;
                if (label == 0) {
                    px = std::cos(t);
                    py = std::sin(t);
                } else {
                    px = 1.0 - std::cos(t);
                    py = 0.5 - std::sin(t);
                }
                s.x(k, 0) = px + noise_sigma * rng.normal();
                s.x(k, 1) = py + noise_sigma * rng.normal();
                s.y[k] = label;
            }
            rotate_rows(s.x, deg_to_rad(angle));
            return s;
        };
        ds.domains.push_back(make_domain(static_cast<double>(i + 1), n_per_domain, root.split(i),
                                         draw, {{"angle_deg", angle}}));
    }
    return ds;
}

TemporalDataset generate_rotated_gaussians(int classes, int n_per_domain, int sources, int targets,
                                           double angle_step_deg, double radius, double sigma,
                                           std::uint64_t seed) {
    check_counts(n_per_domain, sources, targets);
    if (classes < 2) throw ConfigError("need at least 2 classes");
    if (radius <= 0.0) throw ConfigError("radius must be positive");

    TemporalDataset ds;
    ds.task = TaskKind::kClassification;
    ds.source_count = sources;
    ds.target_count = targets;
    ds.class_count = classes;
    ds.seed = seed;
    ds.generator = "rotated_gaussians";

    Rng root(seed);
    for (int i = 0; i < sources + targets; ++i) {
        const double angle = static_cast<double>(i) * angle_step_deg;
        auto draw = [&, angle](int n, Rng& rng) {
            SampleSet s;
            s.x.resize(n, 2);
            s.y.resize(n);
            for (int k = 0; k < n; ++k) {
                const int label = k % classes;
                const double mean_angle =
                    deg_to_rad(angle) + 2.0 * kPi * static_cast<double>(label) / classes;
                s.x(k, 0) = radius * std::cos(mean_angle) + sigma * rng.normal();
                s.x(k, 1) = radius * std::sin(mean_angle) + sigma * rng.normal();
                s.y[k] = label;
            }
            return s;
        };
        ds.domains.push_back(make_domain(static_cast<double>(i + 1), n_per_domain, root.split(i),
                                         draw, {{"angle_deg", angle}}));
    }
    return ds;
}

TemporalDataset generate_drifting_hyperplane(int dim, int n_per_domain, int sources, int targets,
                                             double drift_rate, double noise_sigma,
                                             std::uint64_t seed) {
    check_counts(n_per_domain, sources, targets);
    if (dim < 1) throw ConfigError("dim must be >= 1");

    TemporalDataset ds;
    ds.task = TaskKind::kRegression;
    ds.source_count = sources;
    ds.target_count = targets;
    ds.class_count = 0;
    ds.seed = seed;
    ds.generator = "drifting_hyperplane";

    Rng root(seed);
    Rng w_rng = root.split("weights");
    Eigen::VectorXd w0(dim), u(dim);
    for (int k = 0; k < dim; ++k) w0[k] = w_rng.normal();
    for (int k = 0; k < dim; ++k) u[k] = w_rng.normal();
    u.normalize();

    for (int i = 0; i < sources + targets; ++i) {
        Eigen::VectorXd w_i = w0 + static_cast<double>(i) * drift_rate * u;
        auto draw = [&, w_i](int n, Rng& rng) {
            SampleSet s;
            s.x.resize(n, dim);
            s.y.resize(n);
            for (int k = 0; k < n; ++k) {
                for (int j = 0; j < dim; ++j) s.x(k, j) = rng.normal();
                s.y[k] = s.x.row(k).dot(w_i) + noise_sigma * rng.normal();
            }
            return s;
        };
        nlohmann::json params{{"drift_index", i}};
        params["w"] = std::vector<double>(w_i.data(), w_i.data() + dim);
        ds.domains.push_back(
            make_domain(static_cast<double>(i + 1), n_per_domain, root.split(i), draw, params));
    }
    return ds;
}

std::vector<MemoryBuffer> make_buffers(const TemporalDataset& dataset, double ratio,
                                       std::uint64_t seed) {
    if (ratio <= 0.0 || ratio > 1.0) throw ConfigError("buffer ratio must be in (0, 1]");
    std::vector<MemoryBuffer> buffers;
    Rng root = Rng(seed).split("buffers");
    for (int i = 0; i < dataset.source_count; ++i) {
        const SampleSet& train = dataset.source(i).train;
        const auto n = static_cast<std::size_t>(train.size());
        const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
        Rng rng = root.split(i);
        auto idx = rng.sample_without_replacement(n, std::max<std::size_t>(k, 1));
        MemoryBuffer buf;
        buf.domain_index = i;
        buf.ratio = ratio;
        buf.samples.x.resize(static_cast<Eigen::Index>(idx.size()), train.x.cols());
        buf.samples.y.resize(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t r = 0; r < idx.size(); ++r) {
            buf.samples.x.row(static_cast<Eigen::Index>(r)) =
                train.x.row(static_cast<Eigen::Index>(idx[r]));
            buf.samples.y[static_cast<Eigen::Index>(r)] =
                train.y[static_cast<Eigen::Index>(idx[r])];
        }
        buffers.push_back(std::move(buf));
    }
    return buffers;
}

TemporalDataset shuffle_source_order(const TemporalDataset& dataset, std::uint64_t seed) {
    TemporalDataset out = dataset;
    std::vector<std::size_t> perm(static_cast<std::size_t>(dataset.source_count));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = Rng(seed).split("shuffle_sources");
    rng.shuffle(perm);
    for (int i = 0; i < dataset.source_count; ++i) {
        const auto& src = dataset.domains[perm[static_cast<std::size_t>(i)]];
        auto& dst = out.domains[static_cast<std::size_t>(i)];
        const double keep_timestamp = dst.timestamp;
        dst = src;
        dst.timestamp = keep_timestamp;  // contents move, time axis stays
    }
    return out;
}

namespace {

void append_split(std::ofstream& out, int domain, const char* split, const SampleSet& s) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        nlohmann::json line;
        line["d"] = domain;
        line["split"] = split;
        std::vector<double> x(static_cast<std::size_t>(s.x.cols()));
        for (Eigen::Index j = 0; j < s.x.cols(); ++j) x[static_cast<std::size_t>(j)] = s.x(i, j);
        line["x"] = x;
        line["y"] = s.y[i];
        out << line.dump() << "\n";
    }
}

SampleSet collect_split(const std::vector<nlohmann::json>& lines, int domain,
                        const std::string& split, int dim) {
    std::vector<const nlohmann::json*> rows;
    for (const auto& l : lines) {
        if (l.at("d").get<int>() == domain && l.at("split").get<std::string>() == split) {
            rows.push_back(&l);
        }
    }
    SampleSet s;
    s.x.resize(static_cast<Eigen::Index>(rows.size()), dim);
    s.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto x = rows[i]->at("x").get<std::vector<double>>();
        if (static_cast<int>(x.size()) != dim) {
            throw IoError("inconsistent feature width in dataset");
        }
        for (int j = 0; j < dim; ++j) {
            s.x(static_cast<Eigen::Index>(i), j) = x[static_cast<std::size_t>(j)];
        }
        s.y[static_cast<Eigen::Index>(i)] = rows[i]->at("y").get<double>();
    }
    return s;
}

}  // namespace

void export_jsonl(const TemporalDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest{{"task", to_string(dataset.task)},
                            {"generator", dataset.generator},
                            {"source_count", dataset.source_count},
                            {"target_count", dataset.target_count},
                            {"class_count", dataset.class_count},
                            {"seed", dataset.seed},
                            {"feature_dim", dataset.feature_dim()}};
    nlohmann::json domains = nlohmann::json::array();
    for (const auto& d : dataset.domains) {
        domains.push_back({{"timestamp", d.timestamp}, {"generator_params", d.generator_params}});
    }
    manifest["domains"] = domains;
    {
        std::ofstream out(dir / "manifest.json", std::ios::trunc);
        if (!out) throw IoError("cannot write dataset manifest in " + dir.string());
        out << manifest.dump(2) << "\n";
    }
    std::ofstream out(dir / "data.jsonl", std::ios::trunc);
    if (!out) throw IoError("cannot write dataset lines in " + dir.string());
    for (std::size_t i = 0; i < dataset.domains.size(); ++i) {
        const auto& d = dataset.domains[i];
        append_split(out, static_cast<int>(i), "train", d.train);
        append_split(out, static_cast<int>(i), "val", d.val);
        append_split(out, static_cast<int>(i), "test", d.test);
    }
}

TemporalDataset import_jsonl(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw IoError("missing dataset manifest in " + dir.string());
    nlohmann::json manifest;
    mf >> manifest;

    TemporalDataset ds;
    ds.task = task_kind_from_string(manifest.at("task").get<std::string>());
    ds.generator = manifest.at("generator").get<std::string>();
    ds.source_count = manifest.at("source_count").get<int>();
    ds.target_count = manifest.at("target_count").get<int>();
    ds.class_count = manifest.at("class_count").get<int>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    const int dim = manifest.at("feature_dim").get<int>();

    std::ifstream in(dir / "data.jsonl");
    if (!in) throw IoError("missing dataset lines in " + dir.string());
    std::vector<nlohmann::json> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
    }

    const auto& domains = manifest.at("domains");
    for (std::size_t i = 0; i < domains.size(); ++i) {
        Domain d;
        d.timestamp = domains[i].at("timestamp").get<double>();
        d.generator_params = domains[i].at("generator_params");
        d.train = collect_split(lines, static_cast<int>(i), "train", dim);
        d.val = collect_split(lines, static_cast<int>(i), "val", dim);
        d.test = collect_split(lines, static_cast<int>(i), "test", dim);
        ds.domains.push_back(std::move(d));
    }
    return ds;
}

const char* to_string(TaskKind task) {
    return task == TaskKind::kClassification ? "classification" : "regression";
}

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "classification") return TaskKind::kClassification;
    if (s == "regression") return TaskKind::kRegression;
    throw ConfigError("unknown task kind: " + s);
}

}  // namespace tea
