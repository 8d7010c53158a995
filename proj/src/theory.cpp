#include "tea/theory.hpp"

#include <cmath>
#include <numeric>

#include "tea/rng.hpp"

namespace tea {

namespace {

struct HyperplaneProcess {
    std::vector<Eigen::VectorXd> member_weights;  // w_i per source domain
    Eigen::VectorXd future_weights;               // first target domain
    int dim = 0;
    double noise_sigma = 0.0;
};

HyperplaneProcess resolve_process(const DatasetSpec& spec) {
    if (spec.generator != "drifting_hyperplane") {
        throw ConfigError("estimate_bvcl needs the drifting_hyperplane process");
    }
    TemporalDataset reference = make_dataset(spec);
    HyperplaneProcess p;
    p.dim = spec.dim;
    p.noise_sigma = spec.noise_sigma;
    for (int i = 0; i < reference.source_count; ++i) {
        const auto w = reference.source(i).generator_params.at("w").get<std::vector<double>>();
        p.member_weights.push_back(
            Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
    }
    const auto wf = reference.target(0).generator_params.at("w").get<std::vector<double>>();
    p.future_weights =
        Eigen::Map<const Eigen::VectorXd>(wf.data(), static_cast<Eigen::Index>(wf.size()));
    return p;
}

SampleSet draw_from(const Eigen::VectorXd& w, int n, double noise_sigma, Rng& rng) {
    SampleSet s;
    s.x.resize(n, w.size());
    s.y.resize(n);
    for (int k = 0; k < n; ++k) {
        for (Eigen::Index j = 0; j < w.size(); ++j) s.x(k, j) = rng.normal();
        s.y[k] = s.x.row(k).dot(w) + noise_sigma * rng.normal();
    }
    return s;
}

// Plain minibatch SGD on MSE; the learning procedure behind each member.
ParamVector train_member(const ModelSpec& model, const SampleSet& data, int epochs, double lr,
                         int batch_size, Rng rng) {
    ParamVector params = init_params(model, rng);
    std::vector<std::size_t> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index begin = 0; begin < data.size(); begin += batch_size) {
            const Eigen::Index count = std::min<Eigen::Index>(batch_size, data.size() - begin);
            Eigen::MatrixXd bx(count, data.x.cols());
            Eigen::MatrixXd by(count, 1);
            for (Eigen::Index r = 0; r < count; ++r) {
                const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(begin + r)]);
                bx.row(r) = data.x.row(src);
                by(r, 0) = data.y[src];
            }
            auto lg = loss_and_grad(model, params, bx, by, LossKind::kMeanSquaredError, false);
            params.values -= lr * lg.grad.values;
        }
    }
    return params;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double se_of_batches(const std::vector<double>& batch_values) {
    const double m = mean_of(batch_values);
    double var = 0.0;
    for (double v : batch_values) var += (v - m) * (v - m);
    var /= static_cast<double>(batch_values.size() - 1);
    return std::sqrt(var / static_cast<double>(batch_values.size()));
}

}  // namespace

BvclEstimate estimate_bvcl(const BvclConfig& config) {
    if (config.repetitions < 30) throw ConfigError("estimate_bvcl needs >= 30 repetitions");
    if (config.model.output_head != OutputHead::kRegressionScalar) {
        throw ConfigError("estimate_bvcl expects a regression model");
    }
    if (config.model.normalization != Normalization::kNone) {
        throw ConfigError("estimate_bvcl expects unnormalized models");
    }
    if (config.repetitions % config.se_batches != 0) {
        throw ConfigError("repetitions must be divisible by se_batches");
    }

    const HyperplaneProcess process = resolve_process(config.process);
    const int members = static_cast<int>(process.member_weights.size());
    Eigen::VectorXd alphas = config.alphas;
    if (alphas.size() == 0) {
        alphas = Eigen::VectorXd::Constant(members, 1.0 / static_cast<double>(members));
    }
    if (alphas.size() != members) throw ConfigError("alpha count must match the source count");

    Rng root(config.seed);
    Rng eval_rng = root.split("eval");
    const SampleSet eval = draw_from(process.future_weights, config.eval_points, 0.0, eval_rng);
    double label_var = (eval.y.array() - eval.y.mean()).square().mean();
    if (label_var < 1e-15) throw ConfigError("degenerate data process: zero-variance targets");

    const int R = config.repetitions;
    const Eigen::Index n_eval = eval.size();

    // predictions[i]: R x n_eval member predictions; tea_err[r]: per-rep error.
    std::vector<Eigen::MatrixXd> predictions(static_cast<std::size_t>(members));
    for (auto& m : predictions) m.resize(R, n_eval);
    std::vector<double> tea_err(static_cast<std::size_t>(R));
    std::vector<double> locality(static_cast<std::size_t>(R));

    for (int r = 0; r < R; ++r) {
        Rng rep_rng = root.split("rep").split(static_cast<std::uint64_t>(r));
        std::vector<ParamVector> thetas;
        for (int i = 0; i < members; ++i) {
            Rng member_rng = config.identical_members ? rep_rng.split(0) : rep_rng.split(i);
            const Eigen::VectorXd& w =
                config.identical_members ? process.member_weights[0]
                                         : process.member_weights[static_cast<std::size_t>(i)];
            Rng data_rng = member_rng.split("data");
            SampleSet train = draw_from(w, config.train_samples, process.noise_sigma, data_rng);
            Rng init_rng = member_rng.split("init");
            thetas.push_back(train_member(config.model, train, config.epochs,
                                          config.learning_rate, config.batch_size, init_rng));
        }
        Eigen::VectorXd avg = Eigen::VectorXd::Zero(thetas[0].values.size());
        for (int i = 0; i < members; ++i) {
            avg += alphas[i] * thetas[static_cast<std::size_t>(i)].values;
        }
        ParamVector tea = thetas[0];
        tea.values = avg;

        double worst = 0.0;
        for (int i = 0; i < members; ++i) {
            worst = std::max(worst, (thetas[static_cast<std::size_t>(i)].values - avg).norm());
            predictions[static_cast<std::size_t>(i)].row(r) =
                forward_eval(config.model, thetas[static_cast<std::size_t>(i)], eval.x)
                    .col(0)
                    .transpose();
        }
        locality[static_cast<std::size_t>(r)] = worst * worst;
        const Eigen::VectorXd f_tea = forward_eval(config.model, tea, eval.x).col(0);
        tea_err[static_cast<std::size_t>(r)] = (f_tea - eval.y).squaredNorm() / n_eval;
    }

    // Plug-in estimators over a row range [lo, hi).
    auto decompose = [&](int lo, int hi, double& b_out, double& v_out, double& c_out) {
        const int rows = hi - lo;
        std::vector<Eigen::VectorXd> mean_pred(static_cast<std::size_t>(members));
        for (int i = 0; i < members; ++i) {
            mean_pred[static_cast<std::size_t>(i)] =
                predictions[static_cast<std::size_t>(i)].middleRows(lo, rows).colwise().mean();
        }
        double b_total = 0.0;
        for (Eigen::Index e = 0; e < n_eval; ++e) {
            double combined_bias = 0.0;
            for (int i = 0; i < members; ++i) {
                combined_bias += alphas[i] * (eval.y[e] - mean_pred[static_cast<std::size_t>(i)][e]);
            }
            b_total += combined_bias * combined_bias;
        }
        b_out = b_total / static_cast<double>(n_eval);

        double v_total = 0.0, c_total = 0.0;
        for (int i = 0; i < members; ++i) {
            Eigen::MatrixXd dev_i =
                predictions[static_cast<std::size_t>(i)].middleRows(lo, rows).rowwise() -
                mean_pred[static_cast<std::size_t>(i)].transpose();
            v_total += alphas[i] * alphas[i] *
                       dev_i.array().square().colwise().sum().mean() / (rows - 1);
            for (int j = 0; j < members; ++j) {
                if (j == i) continue;
                Eigen::MatrixXd dev_j =
                    predictions[static_cast<std::size_t>(j)].middleRows(lo, rows).rowwise() -
                    mean_pred[static_cast<std::size_t>(j)].transpose();
                c_total += alphas[i] * alphas[j] *
                           (dev_i.array() * dev_j.array()).colwise().sum().mean() / (rows - 1);
            }
        }
        v_out = v_total;
        c_out = c_total;
    };

    BvclEstimate est;
    est.repetitions = R;
    est.members = members;
    decompose(0, R, est.bias_term, est.variance_term, est.covariance_term);
    est.empirical_error = mean_of(tea_err);
    est.locality_proxy = mean_of(locality);

    // Standard errors from independent repetition batches.
    const int per_batch = R / config.se_batches;
    std::vector<double> b_emp, b_sum, b_b, b_v, b_c;
    for (int b = 0; b < config.se_batches; ++b) {
        const int lo = b * per_batch, hi = lo + per_batch;
        double bb = 0, vv = 0, cc = 0;
        decompose(lo, hi, bb, vv, cc);
        b_b.push_back(bb);
        b_v.push_back(vv);
        b_c.push_back(cc);
        b_sum.push_back(bb + vv + cc);
        double err = 0.0;
        for (int r = lo; r < hi; ++r) err += tea_err[static_cast<std::size_t>(r)];
        b_emp.push_back(err / per_batch);
    }
    est.se_empirical = se_of_batches(b_emp);
    est.se_sum = se_of_batches(b_sum);
    est.se_bias = se_of_batches(b_b);
    est.se_variance = se_of_batches(b_v);
    est.se_covariance = se_of_batches(b_c);
    return est;
}

Lemma1Result lemma1_scaling_test(const ModelSpec& model, const ParamVector& center,
                                 Eigen::MatrixXd directions, const Eigen::VectorXd& alphas,
                                 const std::vector<double>& scales, const Eigen::MatrixXd& eval_x,
                                 bool enforce_mean_zero) {
    if (directions.rows() != alphas.size()) {
        throw ShapeError("lemma1: one direction per coefficient required");
    }
    if (directions.cols() != center.values.size()) {
        throw ShapeError("lemma1: direction length must match the parameter count");
    }
    if (directions.cwiseAbs().maxCoeff() == 0.0) throw ConfigError("lemma1: zero perturbations");

    if (enforce_mean_zero) {
        Eigen::RowVectorXd mean = alphas.transpose() * directions;
        directions.rowwise() -= mean;
        if (directions.cwiseAbs().maxCoeff() == 0.0) {
            throw ConfigError("lemma1: perturbations vanish after centering");
        }
    }

    const Eigen::MatrixXd f_center = forward_eval(model, center, eval_x);

    Lemma1Result result;
    result.scales = scales;
    for (double s : scales) {
        Eigen::MatrixXd ensemble = Eigen::MatrixXd::Zero(f_center.rows(), f_center.cols());
        for (Eigen::Index i = 0; i < alphas.size(); ++i) {
            ParamVector theta = center;
            theta.values += s * directions.row(i).transpose();
            ensemble += alphas[i] * forward_eval(model, theta, eval_x);
        }
        result.max_diffs.push_back((ensemble - f_center).cwiseAbs().maxCoeff());
    }
    result.worst_diff = *std::max_element(result.max_diffs.begin(), result.max_diffs.end());
    result.linear_exact = result.worst_diff <= 1e-12;

    if (!result.linear_exact) {
        // Least-squares slope of log(diff) against log(scale).
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (std::size_t i = 0; i < scales.size(); ++i) {
            if (result.max_diffs[i] <= 0.0) continue;
            const double x = std::log(scales[i]);
            const double y = std::log(result.max_diffs[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++n;
        }
        if (n >= 2) result.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return result;
}

SimplexGridResult minimize_on_simplex_grid(
    int members, double step, const std::function<double(const Eigen::VectorXd&)>& f) {
    if (members < 1) throw ConfigError("simplex grid needs at least one member");
    const int m = static_cast<int>(std::llround(1.0 / step));
    if (m < 1) throw ConfigError("grid step too large");

    SimplexGridResult best;
    best.min_value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd alpha(members);

    std::function<void(int, int)> recurse = [&](int index, int remaining) {
        if (index == members - 1) {
            alpha[index] = static_cast<double>(remaining) / m;
            ++best.points;
            const double value = f(alpha);
            if (value < best.min_value) {
                best.min_value = value;
                best.argmin = alpha;
            }
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            alpha[index] = static_cast<double>(k) / m;
            recurse(index + 1, remaining - k);
        }
    };
    recurse(0, m);
    return best;
}

SimplexGridResult bias_minimax_grid(const Eigen::VectorXd& sigmas, double step) {
    return minimize_on_simplex_grid(static_cast<int>(sigmas.size()), step,
                                    [&](const Eigen::VectorXd& alpha) {
                                        const double s = alpha.dot(sigmas);
                                        return s * s;
                                    });
}

SimplexGridResult variance_uniform_grid(int members, double step) {
    return minimize_on_simplex_grid(members, step,
                                    [](const Eigen::VectorXd& alpha) { return alpha.squaredNorm(); });
}

std::vector<TradeoffPoint> insight2_tradeoff_sweep(const Eigen::VectorXd& bias_magnitudes,
                                                   const Eigen::VectorXd& distances,
                                                   double member_variance,
                                                   const std::vector<double>& r_values,
                                                   int repetitions, std::uint64_t seed) {
    if (bias_magnitudes.size() != distances.size()) {
        throw ConfigError("tradeoff sweep: bias/distance length mismatch");
    }
    const Eigen::Index s = bias_magnitudes.size();
    std::vector<TradeoffPoint> sweep;
    Rng root(seed);

    for (double r : r_values) {
        const CoeffVector coeffs = compute_coefficients(distances, r);
        TradeoffPoint point;
        point.r = r;
        point.bias_sq = std::pow(coeffs.alphas.dot(bias_magnitudes), 2.0);
        point.variance = member_variance * coeffs.alphas.squaredNorm();

        // Monte Carlo on the constructed ensemble: f_i = y + b_i + sqrt(v) e_i.
        Rng rng = root.split("r").split(static_cast<std::uint64_t>(r * 1e6));
        std::vector<double> errs;
        for (int rep = 0; rep < repetitions; ++rep) {
            double pred = 0.0;
            for (Eigen::Index i = 0; i < s; ++i) {
                pred += coeffs.alphas[i] *
                        (bias_magnitudes[i] + std::sqrt(member_variance) * rng.normal());
            }
            errs.push_back(pred * pred);
        }
        point.total_error = mean_of(errs);
        const int batches = 10;
        std::vector<double> batch_means;
        const int per = repetitions / batches;
        for (int b = 0; b < batches; ++b) {
            double acc = 0.0;
            for (int k = b * per; k < (b + 1) * per; ++k) acc += errs[static_cast<std::size_t>(k)];
            batch_means.push_back(acc / per);
        }
        point.se_total = se_of_batches(batch_means);
        sweep.push_back(point);
    }
    return sweep;
}

nlohmann::json to_json(const BvclEstimate& e) {
    return {{"bias", e.bias_term},
            {"variance", e.variance_term},
            {"covariance", e.covariance_term},
            {"locality", e.locality_proxy},
            {"empirical_error", e.empirical_error},
            {"sum_bvc", e.bias_term + e.variance_term + e.covariance_term},
            {"gap", e.gap()},
            {"se_empirical", e.se_empirical},
            {"se_sum", e.se_sum},
            {"se_bias", e.se_bias},
            {"se_variance", e.se_variance},
            {"se_covariance", e.se_covariance},
            {"combined_se", e.combined_se()},
            {"repetitions", e.repetitions},
            {"members", e.members}};
}

nlohmann::json to_json(const Lemma1Result& r) {
    return {{"scales", r.scales},
            {"max_diffs", r.max_diffs},
            {"slope", r.slope},
            {"linear_exact", r.linear_exact},
            {"worst_diff", r.worst_diff}};
}

nlohmann::json to_json(const SimplexGridResult& r) {
    return {{"argmin", std::vector<double>(r.argmin.data(), r.argmin.data() + r.argmin.size())},
            {"min_value", r.min_value},
            {"points", r.points}};
}

nlohmann::json to_json(const std::vector<TradeoffPoint>& sweep) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : sweep) {
        arr.push_back({{"r", p.r},
                       {"bias_sq", p.bias_sq},
                       {"variance", p.variance},
                       {"total_error", p.total_error},
                       {"se_total", p.se_total}});
    }
    return arr;
}

}  // namespace tea
