#include "tea/pipeline.hpp"

#include "tea/checkpoint.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace tea {

TemporalDataset make_dataset(const DatasetSpec& spec) {
    if (spec.generator == "rotated_moons") {
        return generate_rotated_moons(spec.n_per_domain, spec.sources, spec.targets,
                                      spec.angle_step_deg, spec.noise_sigma, spec.seed);
    }
    if (spec.generator == "rotated_gaussians") {
        return generate_rotated_gaussians(spec.classes, spec.n_per_domain, spec.sources,
                                          spec.targets, spec.angle_step_deg, spec.radius,
                                          spec.sigma, spec.seed);
    }
    if (spec.generator == "drifting_hyperplane") {
        return generate_drifting_hyperplane(spec.dim, spec.n_per_domain, spec.sources,
                                            spec.targets, spec.drift_rate, spec.noise_sigma,
                                            spec.seed);
    }
    throw ConfigError("unknown dataset generator: " + spec.generator);
}

namespace {

nlohmann::json dataset_spec_to_json(const DatasetSpec& s) {
    return {{"generator", s.generator},
            {"n_per_domain", s.n_per_domain},
            {"sources", s.sources},
            {"targets", s.targets},
            {"seed", s.seed},
            {"angle_step_deg", s.angle_step_deg},
            {"noise_sigma", s.noise_sigma},
            {"classes", s.classes},
            {"radius", s.radius},
            {"sigma", s.sigma},
            {"dim", s.dim},
            {"drift_rate", s.drift_rate}};
}

DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
    DatasetSpec s;
    s.generator = j.value("generator", s.generator);
    s.n_per_domain = j.value("n_per_domain", s.n_per_domain);
    s.sources = j.value("sources", s.sources);
    s.targets = j.value("targets", s.targets);
    s.seed = j.value("seed", s.seed);
    s.angle_step_deg = j.value("angle_step_deg", s.angle_step_deg);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.classes = j.value("classes", s.classes);
    s.radius = j.value("radius", s.radius);
    s.sigma = j.value("sigma", s.sigma);
    s.dim = j.value("dim", s.dim);
    s.drift_rate = j.value("drift_rate", s.drift_rate);
    return s;
}

nlohmann::json training_to_json(const TrainingConfig& c) {
    return {{"epochs_pretrain", c.epochs_pretrain},
            {"epochs_finetune", c.epochs_finetune},
            {"lr_pretrain", c.lr_pretrain},
            {"lr_finetune", c.lr_finetune},
            {"batch_size", c.batch_size},
            {"optimizer_pretrain", to_string(c.optimizer_pretrain)},
            {"optimizer_finetune", to_string(c.optimizer_finetune)},
            {"snapshots", c.snapshot_count},
            {"c_si", c.c_si},
            {"xi_si", c.xi_si},
            {"seed", c.seed},
            {"order", to_string(c.order)},
            {"consolidate_per_stage", c.consolidate_per_stage},
            {"momentum", c.momentum}};
}

TrainingConfig training_from_json(const nlohmann::json& j) {
    TrainingConfig c;
    c.epochs_pretrain = j.value("epochs_pretrain", c.epochs_pretrain);
    c.epochs_finetune = j.value("epochs_finetune", c.epochs_finetune);
    c.lr_pretrain = j.value("lr_pretrain", c.lr_pretrain);
    c.lr_finetune = j.value("lr_finetune", c.lr_finetune);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("optimizer_pretrain")) {
        c.optimizer_pretrain = optimizer_from_string(j.at("optimizer_pretrain"));
    }
    if (j.contains("optimizer_finetune")) {
        c.optimizer_finetune = optimizer_from_string(j.at("optimizer_finetune"));
    }
    c.snapshot_count = j.value("snapshots", c.snapshot_count);
    c.c_si = j.value("c_si", c.c_si);
    c.xi_si = j.value("xi_si", c.xi_si);
    c.seed = j.value("seed", c.seed);
    if (j.contains("order")) c.order = finetune_order_from_string(j.at("order"));
    c.consolidate_per_stage = j.value("consolidate_per_stage", c.consolidate_per_stage);
    c.momentum = j.value("momentum", c.momentum);
    return c;
}

nlohmann::json tea_to_json(const TeaConfig& t) {
    return {{"components", t.p_components},
            {"arima", {t.arima.p, t.arima.d, t.arima.q}},
            {"r", t.sharpness},
            {"mode", to_string(t.mode)},
            {"one_hot_index", t.one_hot_index},
            {"per_target_forecast", t.per_target_forecast}};
}

TeaConfig tea_from_json(const nlohmann::json& j) {
    TeaConfig t;
    t.p_components = j.value("components", t.p_components);
    if (j.contains("arima")) {
        const auto a = j.at("arima").get<std::vector<int>>();
        if (a.size() != 3) throw ConfigError("arima order must be [p,d,q]");
        t.arima = {a[0], a[1], a[2]};
    }
    t.sharpness = j.value("r", t.sharpness);
    if (j.contains("mode")) t.mode = coeff_mode_from_string(j.at("mode"));
    t.one_hot_index = j.value("one_hot_index", t.one_hot_index);
    t.per_target_forecast = j.value("per_target_forecast", t.per_target_forecast);
    return t;
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

nlohmann::json to_json(const RunConfig& config) {
    return {{"dataset", dataset_spec_to_json(config.dataset)},
            {"model", model_spec_to_json(config.model)},
            {"training", training_to_json(config.training)},
            {"tea", tea_to_json(config.tea)},
            {"setting", config.setting},
            {"buffer_ratio", config.buffer_ratio},
            {"selection", to_string(config.selection)},
            {"selection_ratio", config.selection_ratio},
            {"out_dir", config.out_dir}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("dataset")) c.dataset = dataset_spec_from_json(j.at("dataset"));
    if (j.contains("model")) c.model = model_spec_from_json(j.at("model"));
    if (j.contains("training")) c.training = training_from_json(j.at("training"));
    if (j.contains("tea")) c.tea = tea_from_json(j.at("tea"));
    c.setting = j.value("setting", c.setting);
    c.buffer_ratio = j.value("buffer_ratio", c.buffer_ratio);
    if (j.contains("selection")) c.selection = selection_strategy_from_string(j.at("selection"));
    c.selection_ratio = j.value("selection_ratio", c.selection_ratio);
    c.out_dir = j.value("out_dir", c.out_dir);
    return c;
}

void validate(const RunConfig& config) {
    validate(config.model);
    validate(config.training);
    validate(config.tea.arima);
    if (config.tea.p_components < 1) throw ConfigError("subspace components must be >= 1");
    if (config.tea.sharpness <= 0.0) throw ConfigError("sharpness r must be positive");
    if (config.setting != "tdg" && config.setting != "cdgtd") {
        throw ConfigError("setting must be tdg or cdgtd");
    }
    if (config.buffer_ratio <= 0.0 || config.buffer_ratio > 1.0) {
        throw ConfigError("buffer_ratio must be in (0, 1]");
    }
    if (config.tea.mode == CoeffMode::kOneHot && config.tea.one_hot_index < 0) {
        throw ConfigError("one_hot mode needs a valid index");
    }
}

std::string provenance_hash(const RunConfig& config) {
    nlohmann::json j{{"dataset", dataset_spec_to_json(config.dataset)},
                     {"model", model_spec_to_json(config.model)},
                     {"training", training_to_json(config.training)},
                     {"setting", config.setting},
                     {"buffer_ratio", config.setting == "cdgtd" ? config.buffer_ratio : 0.0},
                     {"selection", to_string(config.selection)},
                     {"selection_ratio", config.selection_ratio}};
    return hex64(fnv1a(j.dump()));
}

std::string full_config_hash(const RunConfig& config) {
    nlohmann::json j = to_json(config);
    j.erase("out_dir");
    return hex64(fnv1a(j.dump()));
}

double evaluate_accuracy(const ModelSpec& model, const ParamVector& params, const SampleSet& s) {
    const Eigen::MatrixXd out = forward_eval(model, params, s.x);
    int hits = 0;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        Eigen::Index arg;
        out.row(i).maxCoeff(&arg);
        if (static_cast<double>(arg) == s.y[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(out.rows());
}

double evaluate_mse(const ModelSpec& model, const ParamVector& params, const SampleSet& s) {
    const Eigen::MatrixXd out = forward_eval(model, params, s.x);
    if (out.cols() != 1) throw ShapeError("evaluate_mse expects a scalar head");
    return (out.col(0) - s.y).squaredNorm() / static_cast<double>(s.size());
}

namespace {

void finalize_aggregates(EvalReport& r) {
    r.d_next = r.per_target.front();
    r.ood_avg = std::accumulate(r.per_target.begin(), r.per_target.end(), 0.0) /
                static_cast<double>(r.per_target.size());
    if (r.metric == "accuracy") {
        r.ood_worst = *std::min_element(r.per_target.begin(), r.per_target.end());
    } else {
        r.ood_worst = *std::max_element(r.per_target.begin(), r.per_target.end());
    }
}

}  // namespace

EvalReport evaluate_on_targets(const ModelSpec& model, const ParamVector& params,
                               const TemporalDataset& dataset, const std::string& method) {
    EvalReport r;
    r.method = method;
    r.metric = dataset.task == TaskKind::kClassification ? "accuracy" : "mse";
    for (int k = 0; k < dataset.target_count; ++k) {
        const SampleSet& test = dataset.target(k).test;
        r.per_target.push_back(dataset.task == TaskKind::kClassification
                                   ? evaluate_accuracy(model, params, test)
                                   : evaluate_mse(model, params, test));
    }
    finalize_aggregates(r);
    return r;
}

namespace {

// Coefficients for every target, honoring mode / fallbacks.
void derive_coefficients(PipelineArtifacts& artifacts, const TeaConfig& tea,
                         const std::vector<double>& target_times) {
    const int s = artifacts.experts.size();
    artifacts.forecasts.clear();
    artifacts.coefficients.clear();
    artifacts.combined.clear();

    for (std::size_t k = 0; k < target_times.size(); ++k) {
        CoeffVector coeffs;
        if (tea.mode == CoeffMode::kUniform || artifacts.degenerate_subspace) {
            coeffs = uniform_coefficients(s);
            coeffs.uniform_fallback = artifacts.degenerate_subspace;
        } else if (tea.mode == CoeffMode::kOneHot) {
            coeffs = one_hot_coefficients(s, tea.one_hot_index);
        } else {
            const Subspace& sub = *artifacts.subspace;
            if (tea.per_target_forecast || artifacts.forecasts.empty()) {
                artifacts.forecasts.push_back(
                    forecast_future_point(sub, target_times[k], tea.arima));
            } else {
                artifacts.forecasts.push_back(artifacts.forecasts.front());
            }
            const Eigen::VectorXd d =
                compute_distances(sub.projections, artifacts.forecasts.back().point);
            coeffs = compute_coefficients(d, tea.sharpness);
            if (tea.mode == CoeffMode::kReversed) coeffs = reversed_coefficients(coeffs);
        }
        artifacts.combined.push_back(combine_weights(artifacts.experts, coeffs));
        artifacts.coefficients.push_back(std::move(coeffs));
    }
}

}  // namespace

PipelineArtifacts run_pipeline(const TemporalDataset& dataset, const RunConfig& config) {
    validate(config);
    PipelineArtifacts artifacts;

    if (config.setting == "cdgtd") {
        auto buffers = make_buffers(dataset, config.buffer_ratio, config.dataset.seed);
        artifacts.experts = build_expert_set_cdgtd(config.model, dataset, buffers, config.training,
                                                   &artifacts.trace, &artifacts.si);
    } else {
        std::vector<int> selected = partial_expert_selection(
            dataset.source_count, config.selection, config.selection_ratio);
        artifacts.experts = build_expert_set(config.model, dataset, config.training,
                                             &artifacts.trace, &selected, &artifacts.si);
    }

    try {
        artifacts.subspace = fit_subspace(deviations_from(artifacts.experts),
                                          std::min(config.tea.p_components,
                                                   std::max(1, artifacts.experts.size() - 1)));
    } catch (const DegenerateSubspaceError&) {
        artifacts.degenerate_subspace = true;
    }

    std::vector<double> target_times;
    for (int k = 0; k < dataset.target_count; ++k) {
        target_times.push_back(dataset.target(k).timestamp);
    }
    derive_coefficients(artifacts, config.tea, target_times);
    return artifacts;
}

void recombine(PipelineArtifacts& artifacts, const TeaConfig& tea) {
    std::vector<double> target_times;
    for (const auto& f : artifacts.forecasts) target_times.push_back(f.t_future);
    if (target_times.empty()) {
        // Uniform/one-hot artifacts carry no forecasts; the combined count
        // still tells us how many targets there were, but not their times.
        throw ConfigError("recombine needs artifacts produced in an adaptive mode");
    }
    derive_coefficients(artifacts, tea, target_times);
}

EvalReport evaluate_tea(const PipelineArtifacts& artifacts, const ModelSpec& model,
                        const TemporalDataset& dataset, const std::string& method) {
    EvalReport r;
    r.method = method;
    r.metric = dataset.task == TaskKind::kClassification ? "accuracy" : "mse";
    for (int k = 0; k < dataset.target_count; ++k) {
        const SampleSet& test = dataset.target(k).test;
        const ParamVector& params = artifacts.combined.at(static_cast<std::size_t>(k));
        r.per_target.push_back(dataset.task == TaskKind::kClassification
                                   ? evaluate_accuracy(model, params, test)
                                   : evaluate_mse(model, params, test));
    }
    finalize_aggregates(r);
    return r;
}

EvalReport run_tdg(const TemporalDataset& dataset, const RunConfig& config,
                   PipelineArtifacts* artifacts_out) {
    const auto t0 = std::chrono::steady_clock::now();
    PipelineArtifacts artifacts = run_pipeline(dataset, config);
    EvalReport r = evaluate_tea(artifacts, config.model, dataset, "tea");
    r.seed = config.training.seed;
    r.config_hash = full_config_hash(config);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (artifacts_out) *artifacts_out = std::move(artifacts);
    return r;
}

EvalReport run_cdgtd(const TemporalDataset& dataset, const RunConfig& config,
                     PipelineArtifacts* artifacts_out) {
    RunConfig c = config;
    c.setting = "cdgtd";
    const auto t0 = std::chrono::steady_clock::now();
    PipelineArtifacts artifacts = run_pipeline(dataset, c);
    EvalReport r = evaluate_tea(artifacts, c.model, dataset, "tea_cdgtd");
    r.seed = c.training.seed;
    r.config_hash = full_config_hash(c);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (artifacts_out) *artifacts_out = std::move(artifacts);
    return r;
}

EvalReport run_baseline(BaselineKind kind, const TemporalDataset& dataset,
                        const ModelSpec& model, const PipelineArtifacts& artifacts) {
    switch (kind) {
        case BaselineKind::kErm:
            return evaluate_on_targets(model, artifacts.experts.base, dataset, "erm");
        case BaselineKind::kIncErm:
            return evaluate_on_targets(model, artifacts.experts.base, dataset, "inc_erm");
        case BaselineKind::kLastExpert:
            return evaluate_on_targets(model, artifacts.experts.experts.back(), dataset,
                                       "last_expert");
        case BaselineKind::kUniformWa: {
            const ParamVector combined =
                combine_weights(artifacts.experts, uniform_coefficients(artifacts.experts.size()));
            return evaluate_on_targets(model, combined, dataset, "uniform_wa");
        }
        case BaselineKind::kRandomExpert: {
            // Field-wise mean of the single-expert reports.
            std::vector<EvalReport> singles;
            for (const auto& e : artifacts.experts.experts) {
                singles.push_back(evaluate_on_targets(model, e, dataset, "expert"));
            }
            EvalReport r;
            r.method = "random_expert";
            r.metric = singles.front().metric;
            r.per_target.assign(singles.front().per_target.size(), 0.0);
            for (const auto& s : singles) {
                for (std::size_t k = 0; k < r.per_target.size(); ++k) {
                    r.per_target[k] += s.per_target[k] / static_cast<double>(singles.size());
                }
                r.ood_worst += s.ood_worst / static_cast<double>(singles.size());
            }
            r.d_next = r.per_target.front();
            r.ood_avg = std::accumulate(r.per_target.begin(), r.per_target.end(), 0.0) /
                        static_cast<double>(r.per_target.size());
            return r;
        }
    }
    throw ConfigError("unknown baseline kind");
}

namespace {

void stamp(EvalReport& r, const RunConfig& config, std::uint64_t seed, nlohmann::json params) {
    r.seed = seed;
    r.config_hash = full_config_hash(config);
    r.params = std::move(params);
}

}  // namespace

std::vector<EvalReport> run_ablation(const RunConfig& base_config, const AblationSpec& spec) {
    if (spec.seeds.empty()) throw ConfigError("ablation needs at least one seed");
    std::vector<EvalReport> reports;

    for (std::uint64_t seed : spec.seeds) {
        RunConfig config = base_config;
        config.dataset.seed = seed;
        config.training.seed = seed;
        TemporalDataset dataset = make_dataset(config.dataset);

        switch (spec.kind) {
            case AblationKind::kComponent: {
                PipelineArtifacts artifacts = run_pipeline(dataset, config);
                EvalReport tea = evaluate_tea(artifacts, config.model, dataset, "tea");
                const BaselineKind erm_kind =
                    config.setting == "cdgtd" ? BaselineKind::kIncErm : BaselineKind::kErm;
                for (BaselineKind kind : {erm_kind, BaselineKind::kRandomExpert,
                                          BaselineKind::kLastExpert, BaselineKind::kUniformWa}) {
                    EvalReport r = run_baseline(kind, dataset, config.model, artifacts);
                    stamp(r, config, seed, {});
                    reports.push_back(std::move(r));
                }
                stamp(tea, config, seed, {});
                reports.push_back(std::move(tea));
                break;
            }
            case AblationKind::kReversedCoeffs: {
                PipelineArtifacts artifacts = run_pipeline(dataset, config);
                EvalReport erm = run_baseline(BaselineKind::kErm, dataset, config.model, artifacts);
                stamp(erm, config, seed, {});
                reports.push_back(std::move(erm));

                EvalReport correct = evaluate_tea(artifacts, config.model, dataset, "tea");
                stamp(correct, config, seed, {{"coeffs", "correct"}});
                reports.push_back(std::move(correct));

                TeaConfig reversed = config.tea;
                reversed.mode = CoeffMode::kReversed;
                recombine(artifacts, reversed);
                EvalReport rev = evaluate_tea(artifacts, config.model, dataset, "tea_reversed");
                stamp(rev, config, seed, {{"coeffs", "reversed"}});
                reports.push_back(std::move(rev));
                break;
            }
            case AblationKind::kBufferSweep: {
                std::vector<double> ratios{0.01, 0.03, 0.05, 0.10, 0.20};
                if (spec.parameters.contains("ratios")) {
                    ratios = spec.parameters.at("ratios").get<std::vector<double>>();
                }
                bool emitted_incerm = false;
                for (double ratio : ratios) {
                    RunConfig c = config;
                    c.setting = "cdgtd";
                    c.buffer_ratio = ratio;
                    PipelineArtifacts artifacts = run_pipeline(dataset, c);
                    if (!emitted_incerm) {
                        // Incremental pretraining is buffer-independent.
                        EvalReport inc =
                            run_baseline(BaselineKind::kIncErm, dataset, c.model, artifacts);
                        stamp(inc, c, seed, {});
                        reports.push_back(std::move(inc));
                        emitted_incerm = true;
                    }
                    EvalReport r = evaluate_tea(artifacts, c.model, dataset, "tea_cdgtd");
                    stamp(r, c, seed, {{"buffer_ratio", ratio}});
                    reports.push_back(std::move(r));
                }
                break;
            }
            case AblationKind::kPartialExperts: {
                std::vector<double> ratios{0.25, 0.50, 0.75};
                if (spec.parameters.contains("ratios")) {
                    ratios = spec.parameters.at("ratios").get<std::vector<double>>();
                }
                for (SelectionStrategy strategy :
                     {SelectionStrategy::kLast, SelectionStrategy::kUniform}) {
                    for (double ratio : ratios) {
                        RunConfig c = config;
                        c.selection = strategy;
                        c.selection_ratio = ratio;
                        PipelineArtifacts artifacts = run_pipeline(dataset, c);
                        EvalReport r = evaluate_tea(artifacts, c.model, dataset, "tea");
                        stamp(r, c, seed,
                              {{"strategy", to_string(strategy)}, {"ratio", ratio}});
                        reports.push_back(std::move(r));
                    }
                }
                RunConfig c = config;
                c.selection = SelectionStrategy::kAll;
                c.selection_ratio = 1.0;
                PipelineArtifacts artifacts = run_pipeline(dataset, c);
                EvalReport r = evaluate_tea(artifacts, c.model, dataset, "tea");
                stamp(r, c, seed, {{"strategy", "all"}, {"ratio", 1.0}});
                reports.push_back(std::move(r));
                break;
            }
            case AblationKind::kAbruptShift: {
                PipelineArtifacts smooth = run_pipeline(dataset, config);
                EvalReport erm = run_baseline(BaselineKind::kErm, dataset, config.model, smooth);
                stamp(erm, config, seed, {{"distribution", "both"}});
                reports.push_back(std::move(erm));
                EvalReport tea = evaluate_tea(smooth, config.model, dataset, "tea");
                stamp(tea, config, seed, {{"distribution", "smooth"}});
                reports.push_back(std::move(tea));

                TemporalDataset shuffled = shuffle_source_order(dataset, seed);
                PipelineArtifacts abrupt = run_pipeline(shuffled, config);
                EvalReport wa =
                    run_baseline(BaselineKind::kUniformWa, shuffled, config.model, abrupt);
                wa.method = "uniform_wa_s";
                stamp(wa, config, seed, {{"distribution", "abrupt"}});
                reports.push_back(std::move(wa));
                EvalReport tea_s = evaluate_tea(abrupt, config.model, shuffled, "tea_s");
                stamp(tea_s, config, seed, {{"distribution", "abrupt"}});
                reports.push_back(std::move(tea_s));
                break;
            }
            case AblationKind::kFinetuneOrder: {
                for (FinetuneOrder order :
                     {FinetuneOrder::kChronological, FinetuneOrder::kReverse}) {
                    RunConfig c = config;
                    c.training.order = order;
                    PipelineArtifacts artifacts = run_pipeline(dataset, c);
                    EvalReport r = evaluate_tea(artifacts, c.model, dataset, "tea");
                    stamp(r, c, seed, {{"order", to_string(order)}});
                    reports.push_back(std::move(r));
                }
                break;
            }
        }
    }
    return reports;
}

namespace {

std::string number(double v) { return nlohmann::json(v).dump(); }

std::string params_field(const nlohmann::json& params) {
    if (params.is_null() || params.empty()) return "-";
    std::string out;
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (!out.empty()) out += ';';
        out += it.key();
        out += '=';
        out += it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
    }
    return out;
}

}  // namespace

void write_reports_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report CSV: " + path.string());
    std::size_t targets = 0;
    for (const auto& r : reports) targets = std::max(targets, r.per_target.size());
    out << "method,metric,seed,config_hash,params,d_next,ood_avg,ood_worst";
    for (std::size_t k = 1; k <= targets; ++k) out << ",target_" << k;
    out << "\n";
    for (const auto& r : reports) {
        out << r.method << ',' << r.metric << ',' << r.seed << ',' << r.config_hash << ','
            << params_field(r.params) << ',' << number(r.d_next) << ',' << number(r.ood_avg)
            << ',' << number(r.ood_worst);
        for (std::size_t k = 0; k < targets; ++k) {
            out << ',';
            if (k < r.per_target.size()) out << number(r.per_target[k]);
        }
        out << "\n";
    }
}

void write_reports_json(const std::vector<EvalReport>& reports,
                        const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        arr.push_back({{"method", r.method},
                       {"metric", r.metric},
                       {"seed", r.seed},
                       {"config_hash", r.config_hash},
                       {"params", r.params},
                       {"d_next", r.d_next},
                       {"ood_avg", r.ood_avg},
                       {"ood_worst", r.ood_worst},
                       {"per_target", r.per_target},
                       {"wall_seconds", r.wall_seconds}});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report JSON: " + path.string());
    out << arr.dump(2) << "\n";
}

void write_plot_data(const PipelineArtifacts& artifacts, const ModelSpec& model,
                     const TemporalDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "coeff_vs_acc.csv", std::ios::trunc);
        out << "expert,timestamp,alpha,first_target_metric\n";
        const CoeffVector& coeffs = artifacts.coefficients.front();
        const SampleSet& test = dataset.target(0).test;
        for (int i = 0; i < artifacts.experts.size(); ++i) {
            const auto& expert = artifacts.experts.experts[static_cast<std::size_t>(i)];
            const double metric = dataset.task == TaskKind::kClassification
                                      ? evaluate_accuracy(model, expert, test)
                                      : evaluate_mse(model, expert, test);
            out << i << ',' << number(artifacts.experts.timestamps[static_cast<std::size_t>(i)])
                << ',' << number(coeffs.alphas[i]) << ',' << number(metric) << "\n";
        }
    }
    if (artifacts.subspace) {
        std::ofstream out(dir / "trajectory.csv", std::ios::trunc);
        out << "component,time,value,kind\n";
        const Subspace& sub = *artifacts.subspace;
        for (int p = 0; p < sub.p_effective; ++p) {
            for (Eigen::Index i = 0; i < sub.projections.rows(); ++i) {
                out << p << ',' << number(sub.timestamps[static_cast<std::size_t>(i)]) << ','
                    << number(sub.projections(i, p)) << ",observed\n";
            }
            for (const auto& f : artifacts.forecasts) {
                out << p << ',' << number(f.t_future) << ',' << number(f.point[p])
                    << ",forecast\n";
            }
        }
    }
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw ConfigError("spearman needs matched series");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return v[x] < v[y];
        });
        std::vector<double> rank(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
            i = j + 1;
        }
        return rank;
    };
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

const char* to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::kErm: return "erm";
        case BaselineKind::kIncErm: return "inc_erm";
        case BaselineKind::kUniformWa: return "uniform_wa";
        case BaselineKind::kLastExpert: return "last_expert";
        case BaselineKind::kRandomExpert: return "random_expert";
    }
    return "unknown";
}

const char* to_string(AblationKind kind) {
    switch (kind) {
        case AblationKind::kComponent: return "component";
        case AblationKind::kReversedCoeffs: return "reversed_coeffs";
        case AblationKind::kBufferSweep: return "buffer_sweep";
        case AblationKind::kPartialExperts: return "partial_experts";
        case AblationKind::kAbruptShift: return "abrupt_shift";
        case AblationKind::kFinetuneOrder: return "finetune_order";
    }
    return "unknown";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
    if (s == "erm") return BaselineKind::kErm;
    if (s == "inc_erm") return BaselineKind::kIncErm;
    if (s == "uniform_wa") return BaselineKind::kUniformWa;
    if (s == "last_expert") return BaselineKind::kLastExpert;
    if (s == "random_expert") return BaselineKind::kRandomExpert;
    throw ConfigError("unknown baseline: " + s);
}

AblationKind ablation_kind_from_string(const std::string& s) {
    if (s == "component") return AblationKind::kComponent;
    if (s == "reversed_coeffs") return AblationKind::kReversedCoeffs;
    if (s == "buffer_sweep") return AblationKind::kBufferSweep;
    if (s == "partial_experts") return AblationKind::kPartialExperts;
    if (s == "abrupt_shift") return AblationKind::kAbruptShift;
    if (s == "finetune_order") return AblationKind::kFinetuneOrder;
    throw ConfigError("unknown ablation kind: " + s);
}

}  // namespace tea
