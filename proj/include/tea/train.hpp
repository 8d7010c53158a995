#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tea/dataset.hpp"
#include "tea/model.hpp"
#include "tea/param.hpp"

namespace tea {

enum class Optimizer { kSgd, kSgdMomentum, kAdam };
enum class FinetuneOrder { kReverse, kChronological };
enum class SelectionStrategy { kLast, kUniform, kAll };

struct TrainingConfig {
    int epochs_pretrain = 40;
    int epochs_finetune = 10;
    double lr_pretrain = 1e-3;
    double lr_finetune = 5e-4;
    int batch_size = 32;
    Optimizer optimizer_pretrain = Optimizer::kAdam;
    Optimizer optimizer_finetune = Optimizer::kSgd;
    int snapshot_count = 5;  // K weights sampled per fine-tuning stage
    double c_si = 0.1;       // constraint strength
    double xi_si = 0.1;      // consolidation damping
    std::uint64_t seed = 0;
    FinetuneOrder order = FinetuneOrder::kReverse;
    bool consolidate_per_stage = false;
    double momentum = 0.9;
    std::optional<LossKind> loss_override;
};

void validate(const TrainingConfig& config);

// Path-integral importance state. omega accumulates -g * delta along the
// training trajectory; consolidation folds it into Omega against the anchor.
struct SIState {
    Eigen::VectorXd omega;       // per-parameter accumulator, reset on consolidation
    Eigen::VectorXd importance;  // Omega >= 0, zero on norm statistics
    ParamVector anchor;
    double xi = 0.1;
};

SIState make_si_state(const ParamVector& anchor, double xi);
void accumulate_si(SIState& si, const Eigen::VectorXd& grad, const Eigen::VectorXd& step_delta);
void consolidate_si(SIState& si, const ParamVector& new_anchor);

struct ExpertSet {
    ParamVector base;
    std::vector<double> timestamps;    // ascending, one per expert
    std::vector<ParamVector> experts;  // same order as timestamps
    std::vector<int> domain_indices;   // source-domain index of each expert

    int size() const { return static_cast<int>(experts.size()); }
};

// Step accounting, used by the budget-parity checks and by logging.
struct TrainingTrace {
    long steps_pretrain = 0;
    long steps_finetune = 0;
    double final_pretrain_loss = 0.0;
};

// ERM over the union of all source train splits; normalization trainable.
// SI importance is accumulated along the trajectory and consolidated once at
// the end with anchor = the returned weights.
std::pair<ParamVector, SIState> pretrain(const ModelSpec& model, const TemporalDataset& dataset,
                                         const TrainingConfig& config,
                                         TrainingTrace* trace = nullptr);

// Sequential per-domain ERM in chronological order (no replay); same SI and
// normalization treatment as pretrain. The configured pretraining epochs are
// a total budget divided across the source domains.
std::pair<ParamVector, SIState> pretrain_incremental(const ModelSpec& model,
                                                     const TemporalDataset& dataset,
                                                     const TrainingConfig& config,
                                                     TrainingTrace* trace = nullptr);

// One fine-tuning stage: task loss + c_si * sum_k Omega_k (theta_k - start_k)^2,
// normalization segments frozen, K snapshots at steps ceil(jT/K) averaged
// uniformly. `stage_key` seeds the stage's batch order.
ParamVector finetune_expert(const ModelSpec& model, const ParamVector& start, const SIState& si,
                            const SampleSet& domain_data, const TrainingConfig& config,
                            std::uint64_t stage_key, TrainingTrace* trace = nullptr,
                            SIState* si_inout = nullptr);

// Full expert production: pretrain, then fine-tune the selected source
// domains in the configured order, chaining start weights.
ExpertSet build_expert_set(const ModelSpec& model, const TemporalDataset& dataset,
                           const TrainingConfig& config, TrainingTrace* trace = nullptr,
                           const std::vector<int>* selected_domains = nullptr,
                           SIState* si_out = nullptr);

// CDGTD variant: incremental ERM pretraining, fine-tuning on memory buffers.
ExpertSet build_expert_set_cdgtd(const ModelSpec& model, const TemporalDataset& dataset,
                                 const std::vector<MemoryBuffer>& buffers,
                                 const TrainingConfig& config, TrainingTrace* trace = nullptr,
                                 SIState* si_out = nullptr);

// Source-domain indices (0-based) for partial-expert runs. "last" keeps the
// ceil(ratio*S) most recent; "uniform" spreads them evenly including the most
// recent; "all" keeps everything.
std::vector<int> partial_expert_selection(int source_count, SelectionStrategy strategy,
                                          double ratio);

const char* to_string(Optimizer o);
const char* to_string(FinetuneOrder o);
const char* to_string(SelectionStrategy s);
Optimizer optimizer_from_string(const std::string& s);
FinetuneOrder finetune_order_from_string(const std::string& s);
SelectionStrategy selection_strategy_from_string(const std::string& s);

}  // namespace tea
