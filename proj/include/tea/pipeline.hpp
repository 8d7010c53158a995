#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tea/arima.hpp"
#include "tea/average.hpp"
#include "tea/dataset.hpp"
#include "tea/subspace.hpp"
#include "tea/train.hpp"

namespace tea {

// Declarative dataset description, hashable and serializable.
struct DatasetSpec {
    std::string generator = "rotated_moons";
    int n_per_domain = 400;
    int sources = 7;
    int targets = 3;
    std::uint64_t seed = 0;
    // rotated_moons / rotated_gaussians
    double angle_step_deg = 15.0;
    double noise_sigma = 0.12;
    // rotated_gaussians
    int classes = 3;
    double radius = 2.0;
    double sigma = 0.4;
    // drifting_hyperplane
    int dim = 8;
    double drift_rate = 0.25;
};

TemporalDataset make_dataset(const DatasetSpec& spec);

struct TeaConfig {
    int p_components = 10;
    ArimaOrder arima{1, 1, 1};
    double sharpness = 5.0;  // r
    CoeffMode mode = CoeffMode::kAdaptive;
    int one_hot_index = -1;
    bool per_target_forecast = true;
};

struct RunConfig {
    DatasetSpec dataset;
    ModelSpec model;
    TrainingConfig training;
    TeaConfig tea;
    std::string setting = "tdg";  // "tdg" | "cdgtd"
    double buffer_ratio = 0.10;
    SelectionStrategy selection = SelectionStrategy::kAll;
    double selection_ratio = 1.0;
    std::string out_dir = "runs/out";
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
void validate(const RunConfig& config);

// FNV-1a over the canonical JSON of the training-relevant fields; artifacts
// from different provenance hashes must not be mixed.
std::string provenance_hash(const RunConfig& config);
std::string full_config_hash(const RunConfig& config);

struct EvalReport {
    std::string method;
    std::string metric;  // "accuracy" | "mse"
    std::vector<double> per_target;
    double d_next = 0.0;    // first target domain
    double ood_avg = 0.0;   // mean over targets
    double ood_worst = 0.0; // min accuracy / max mse
    std::uint64_t seed = 0;
    std::string config_hash;
    double wall_seconds = 0.0;
    nlohmann::json params;  // ablation knobs (ratio, order, ...)
};

double evaluate_accuracy(const ModelSpec& model, const ParamVector& params, const SampleSet& s);
double evaluate_mse(const ModelSpec& model, const ParamVector& params, const SampleSet& s);

// Metric + aggregates for one parameter vector over all target test pools.
EvalReport evaluate_on_targets(const ModelSpec& model, const ParamVector& params,
                               const TemporalDataset& dataset, const std::string& method);

// Everything a full run produces, reusable across ablation variants.
struct PipelineArtifacts {
    ExpertSet experts;
    SIState si;
    std::optional<Subspace> subspace;  // empty when degenerate
    bool degenerate_subspace = false;
    std::vector<ForecastPoint> forecasts;   // per target (adaptive mode)
    std::vector<CoeffVector> coefficients;  // per target
    std::vector<ParamVector> combined;      // per target
    TrainingTrace trace;
};

// Trains experts (TDG or CDGTD), fits the subspace, forecasts each target and
// combines. Selection restricts the fine-tuned source domains.
PipelineArtifacts run_pipeline(const TemporalDataset& dataset, const RunConfig& config);

// Re-derives forecasts/coefficients/combined weights for a coefficient mode
// without retraining.
void recombine(PipelineArtifacts& artifacts, const TeaConfig& tea);

EvalReport evaluate_tea(const PipelineArtifacts& artifacts, const ModelSpec& model,
                        const TemporalDataset& dataset, const std::string& method);

EvalReport run_tdg(const TemporalDataset& dataset, const RunConfig& config,
                   PipelineArtifacts* artifacts_out = nullptr);
EvalReport run_cdgtd(const TemporalDataset& dataset, const RunConfig& config,
                     PipelineArtifacts* artifacts_out = nullptr);

enum class BaselineKind { kErm, kIncErm, kUniformWa, kLastExpert, kRandomExpert };

EvalReport run_baseline(BaselineKind kind, const TemporalDataset& dataset,
                        const ModelSpec& model, const PipelineArtifacts& artifacts);

enum class AblationKind {
    kComponent,
    kReversedCoeffs,
    kBufferSweep,
    kPartialExperts,
    kAbruptShift,
    kFinetuneOrder,
};

struct AblationSpec {
    AblationKind kind = AblationKind::kComponent;
    std::vector<std::uint64_t> seeds;
    nlohmann::json parameters;  // per-kind overrides (ratios, ...)
};

// Runs the matrix for one ablation kind, reusing trained experts whenever the
// variant only changes the averaging.
std::vector<EvalReport> run_ablation(const RunConfig& config, const AblationSpec& spec);

// Result files. CSV rows are deterministic for identical inputs (wall time is
// deliberately excluded from the CSV).
void write_reports_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);
void write_reports_json(const std::vector<EvalReport>& reports, const std::filesystem::path& path);

// Plot data: averaging coefficient vs expert accuracy on the first target,
// and the per-component projection trajectory with its forecast.
void write_plot_data(const PipelineArtifacts& artifacts, const ModelSpec& model,
                     const TemporalDataset& dataset, const std::filesystem::path& dir);

// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

const char* to_string(BaselineKind kind);
const char* to_string(AblationKind kind);
BaselineKind baseline_kind_from_string(const std::string& s);
AblationKind ablation_kind_from_string(const std::string& s);

}  // namespace tea
