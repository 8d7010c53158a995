#include "tea/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tea {

void validate(const TrainingConfig& config) {
    if (config.epochs_pretrain < 0 || config.epochs_finetune < 0) {
        throw ConfigError("epoch counts must be >= 0");
    }
    if (config.lr_pretrain <= 0.0 || config.lr_finetune <= 0.0) {
        throw ConfigError("learning rates must be positive");
    }
    if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (config.snapshot_count < 1) throw ConfigError("snapshot count K must be >= 1");
    if (config.c_si < 0.0) throw ConfigError("c_si must be >= 0");
    if (config.xi_si <= 0.0) throw ConfigError("xi_si must be positive");
}

SIState make_si_state(const ParamVector& anchor, double xi) {
    SIState si;
    si.omega = Eigen::VectorXd::Zero(anchor.values.size());
    si.importance = Eigen::VectorXd::Zero(anchor.values.size());
    si.anchor = anchor;
    si.xi = xi;
    return si;
}

void accumulate_si(SIState& si, const Eigen::VectorXd& grad, const Eigen::VectorXd& step_delta) {
    if (grad.size() != si.omega.size() || step_delta.size() != si.omega.size()) {
        throw ShapeError("accumulate_si: size mismatch");
    }
    si.omega -= grad.cwiseProduct(step_delta);
}

void consolidate_si(SIState& si, const ParamVector& new_anchor) {
    if (!same_layout(si.anchor, new_anchor)) throw ShapeError("consolidate_si: layout mismatch");
    const Eigen::VectorXd delta = new_anchor.values - si.anchor.values;
    const Eigen::VectorXd mask = non_statistic_mask(*new_anchor.layout);
    // Negative path integrals are dropped so importance never decreases.
    const Eigen::VectorXd increment =
        si.omega.cwiseMax(0.0).cwiseQuotient((delta.cwiseAbs2().array() + si.xi).matrix());
    si.importance += increment.cwiseProduct(mask);
    si.omega.setZero();
    si.anchor = new_anchor;
}

namespace {

struct OptState {
    Eigen::VectorXd m, v;
    long t = 0;
};

void apply_step(Optimizer opt, OptState& st, Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                double lr, double momentum) {
    switch (opt) {
        case Optimizer::kSgd:
            theta -= lr * grad;
            break;
        case Optimizer::kSgdMomentum:
            if (st.m.size() == 0) st.m = Eigen::VectorXd::Zero(theta.size());
            st.m = momentum * st.m + grad;
            theta -= lr * st.m;
            break;
        case Optimizer::kAdam: {
            constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            if (st.m.size() == 0) {
                st.m = Eigen::VectorXd::Zero(theta.size());
                st.v = Eigen::VectorXd::Zero(theta.size());
            }
            ++st.t;
            st.m = b1 * st.m + (1.0 - b1) * grad;
            st.v = b2 * st.v + (1.0 - b2) * grad.cwiseAbs2();
            const double mc = 1.0 - std::pow(b1, static_cast<double>(st.t));
            const double vc = 1.0 - std::pow(b2, static_cast<double>(st.t));
            theta -= (lr / mc) * st.m.cwiseQuotient(((st.v / vc).cwiseSqrt().array() + eps).matrix());
            break;
        }
    }
}

LossKind pick_loss(const ModelSpec& model, const TrainingConfig& config) {
    if (config.loss_override) {
        validate_loss(model, *config.loss_override, true);
        return *config.loss_override;
    }
    return model.output_head == OutputHead::kClassificationLogits ? LossKind::kCrossEntropy
                                                                  : LossKind::kMeanSquaredError;
}

Eigen::MatrixXd make_targets(const ModelSpec& model, LossKind loss, const Eigen::VectorXd& y) {
    if (loss == LossKind::kCrossEntropy) return y;
    if (model.output_head == OutputHead::kClassificationLogits) {
        return one_hot(y, model.output_size());  // MSE-on-one-hot, theory-lab only
    }
    if (model.output_size() != 1) throw ConfigError("regression head expects one output");
    return y;
}

struct LoopOptions {
    int epochs = 0;
    double lr = 0.0;
    Optimizer optimizer = Optimizer::kSgd;
    bool train_norm = false;      // update statistics + train affine segments
    bool accumulate = false;      // feed the SI path integral
    const SIState* penalty = nullptr;  // quadratic pull toward `penalty_anchor`
    const ParamVector* penalty_anchor = nullptr;
    double c_si = 0.0;
    const std::vector<long>* snapshot_steps = nullptr;
    std::vector<Eigen::VectorXd>* snapshots = nullptr;
    long step_offset = 0;  // for error messages spanning stages
};

// Mini-batch loop shared by pretraining and fine-tuning. Returns the number
// of optimizer steps taken.
long run_loop(const ModelSpec& model, ParamVector& params, const SampleSet& data,
              const TrainingConfig& config, const LoopOptions& opt, Rng rng, SIState* si,
              double* final_loss) {
    const LossKind loss = pick_loss(model, config);
    const Eigen::MatrixXd targets_all = make_targets(model, loss, data.y);
    const Eigen::Index n = data.size();
    if (n == 0) throw ConfigError("empty training set");

    const Eigen::VectorXd trainable_mask =
        opt.train_norm ? non_statistic_mask(*params.layout) : [&] {
            // Frozen normalization: affine segments excluded as well.
            Eigen::VectorXd mask = Eigen::VectorXd::Zero(params.values.size());
            for (const auto& seg : params.layout->segments()) {
                if (seg.kind == SegmentKind::kDenseWeight || seg.kind == SegmentKind::kDenseBias) {
                    mask.segment(static_cast<Eigen::Index>(seg.offset),
                                 static_cast<Eigen::Index>(seg.length))
                        .setOnes();
                }
            }
            return mask;
        }();

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    OptState opt_state;
    long step = 0;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index begin = 0; begin < n; begin += config.batch_size) {
            const Eigen::Index count = std::min<Eigen::Index>(config.batch_size, n - begin);
            Eigen::MatrixXd bx(count, data.x.cols());
            Eigen::MatrixXd bt(count, targets_all.cols());
            for (Eigen::Index r = 0; r < count; ++r) {
                const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(begin + r)]);
                bx.row(r) = data.x.row(src);
                bt.row(r) = targets_all.row(src);
            }

            const Eigen::VectorXd before = params.values;
            LossGrad lg;
            try {
                lg = loss_and_grad(model, params, bx, bt, loss, opt.train_norm);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at step " +
                                   std::to_string(opt.step_offset + step + 1) + ": " + e.what());
            }

            Eigen::VectorXd grad = lg.grad.values;
            if (opt.penalty && opt.c_si > 0.0) {
                grad += 2.0 * opt.c_si *
                        opt.penalty->importance.cwiseProduct(params.values -
                                                             opt.penalty_anchor->values);
            }
            grad = grad.cwiseProduct(trainable_mask);
            apply_step(opt.optimizer, opt_state, params.values, grad, opt.lr, config.momentum);

            if (opt.accumulate && si) {
                accumulate_si(*si, lg.grad.values, params.values - before);
            }
            ++step;
            if (opt.snapshot_steps && opt.snapshots &&
                std::find(opt.snapshot_steps->begin(), opt.snapshot_steps->end(), step) !=
                    opt.snapshot_steps->end()) {
                opt.snapshots->push_back(params.values);
            }
            if (final_loss) *final_loss = lg.loss;
        }
    }
    return step;
}

SampleSet union_of_source_train(const TemporalDataset& dataset) {
    Eigen::Index total = 0;
    for (int i = 0; i < dataset.source_count; ++i) total += dataset.source(i).train.size();
    SampleSet all;
    all.x.resize(total, dataset.feature_dim());
    all.y.resize(total);
    Eigen::Index cursor = 0;
    for (int i = 0; i < dataset.source_count; ++i) {
        const SampleSet& s = dataset.source(i).train;
        all.x.middleRows(cursor, s.size()) = s.x;
        all.y.segment(cursor, s.size()) = s.y;
        cursor += s.size();
    }
    return all;
}

}  // namespace

std::pair<ParamVector, SIState> pretrain(const ModelSpec& model, const TemporalDataset& dataset,
                                         const TrainingConfig& config, TrainingTrace* trace) {
    validate(model);
    validate(config);
    if (dataset.source_count < 2) throw ConfigError("pretrain needs >= 2 source domains");

    Rng root(config.seed);
    Rng init_rng = root.split("init");
    ParamVector params = init_params(model, init_rng);
    SIState si = make_si_state(params, config.xi_si);

    SampleSet all = union_of_source_train(dataset);
    LoopOptions opt;
    opt.epochs = config.epochs_pretrain;
    opt.lr = config.lr_pretrain;
    opt.optimizer = config.optimizer_pretrain;
    opt.train_norm = true;
    opt.accumulate = true;
    double final_loss = 0.0;
    const long steps =
        run_loop(model, params, all, config, opt, root.split("pretrain"), &si, &final_loss);
    consolidate_si(si, params);

    if (trace) {
        trace->steps_pretrain += steps;
        trace->final_pretrain_loss = final_loss;
    }
    return {std::move(params), std::move(si)};
}

std::pair<ParamVector, SIState> pretrain_incremental(const ModelSpec& model,
                                                     const TemporalDataset& dataset,
                                                     const TrainingConfig& config,
                                                     TrainingTrace* trace) {
    validate(model);
    validate(config);
    const int s = dataset.source_count;
    if (s < 2) throw ConfigError("incremental pretrain needs >= 2 source domains");

    Rng root(config.seed);
    Rng init_rng = root.split("init");
    ParamVector params = init_params(model, init_rng);
    SIState si = make_si_state(params, config.xi_si);

    // Total pretraining budget split across the sequentially visited domains;
    // the remainder goes to the earliest ones.
    const int per_domain = config.epochs_pretrain / s;
    const int remainder = config.epochs_pretrain % s;

    long steps = 0;
    double final_loss = 0.0;
    for (int i = 0; i < s; ++i) {
        LoopOptions opt;
        opt.epochs = per_domain + (i < remainder ? 1 : 0);
        opt.lr = config.lr_pretrain;
        opt.optimizer = config.optimizer_pretrain;
        opt.train_norm = true;
        opt.accumulate = true;
        opt.step_offset = steps;
        steps += run_loop(model, params, dataset.source(i).train, config, opt,
                          root.split("incremental").split(i), &si, &final_loss);
    }
    consolidate_si(si, params);

    if (trace) {
        trace->steps_pretrain += steps;
        trace->final_pretrain_loss = final_loss;
    }
    return {std::move(params), std::move(si)};
}

ParamVector finetune_expert(const ModelSpec& model, const ParamVector& start, const SIState& si,
                            const SampleSet& domain_data, const TrainingConfig& config,
                            std::uint64_t stage_key, TrainingTrace* trace, SIState* si_inout) {
    validate(config);
    if (domain_data.size() == 0) throw ConfigError("finetune_expert: empty domain data");
    if (!same_layout(start, si.anchor)) throw ShapeError("finetune_expert: layout mismatch");

    const long steps_per_epoch =
        (domain_data.size() + config.batch_size - 1) / config.batch_size;
    const long total_steps = static_cast<long>(config.epochs_finetune) * steps_per_epoch;
    if (config.snapshot_count > total_steps) {
        throw ConfigError("snapshot count K=" + std::to_string(config.snapshot_count) +
                          " exceeds the " + std::to_string(total_steps) + " fine-tuning steps");
    }

    // Snapshots at ceil(jT/K), j = 1..K; the last one is the final step.
    std::vector<long> snapshot_steps;
    for (int j = 1; j <= config.snapshot_count; ++j) {
        snapshot_steps.push_back((static_cast<long>(j) * total_steps + config.snapshot_count - 1) /
                                 config.snapshot_count);
    }
    std::vector<Eigen::VectorXd> snapshots;

    ParamVector params = start;
    LoopOptions opt;
    opt.epochs = config.epochs_finetune;
    opt.lr = config.lr_finetune;
    opt.optimizer = config.optimizer_finetune;
    opt.train_norm = false;  // statistics and affine both frozen
    opt.accumulate = si_inout != nullptr;
    opt.penalty = &si;
    opt.penalty_anchor = &start;  // stage anchor = stage-start weights
    opt.c_si = config.c_si;
    opt.snapshot_steps = &snapshot_steps;
    opt.snapshots = &snapshots;
    const long steps = run_loop(model, params, domain_data, config,
                                opt, Rng(config.seed).split("finetune").split(stage_key),
                                si_inout, nullptr);
    if (trace) trace->steps_finetune += steps;

    // Uniform snapshot average; frozen segments copied so they stay
    // bit-identical to the stage start (and hence to base).
    ParamVector expert = start;
    if (!snapshots.empty()) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(params.values.size());
        std::vector<const Eigen::VectorXd*> ptrs;
        for (const auto& s : snapshots) ptrs.push_back(&s);
        mean = pairwise_weighted_sum(
            ptrs, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(snapshots.size()),
                                            1.0 / static_cast<double>(snapshots.size())));
        expert.values = mean;
        copy_norm_segments(expert, start);
    }
    return expert;
}

namespace {

ExpertSet finetune_all(const ModelSpec& model, const TemporalDataset& dataset,
                       const std::vector<const SampleSet*>& stage_data, const ParamVector& base,
                       SIState& si, const TrainingConfig& config, TrainingTrace* trace,
                       const std::vector<int>& selected) {
    ExpertSet set;
    set.base = base;

    std::vector<int> order = selected;  // ascending domain indices
    if (config.order == FinetuneOrder::kReverse) std::reverse(order.begin(), order.end());

    std::vector<std::pair<int, ParamVector>> produced;
    ParamVector current = base;
    for (int idx : order) {
        SIState* accumulate = config.consolidate_per_stage ? &si : nullptr;
        ParamVector expert =
            finetune_expert(model, current, si, *stage_data[static_cast<std::size_t>(idx)], config,
                            static_cast<std::uint64_t>(idx), trace, accumulate);
        if (config.consolidate_per_stage) consolidate_si(si, expert);
        current = expert;
        produced.emplace_back(idx, std::move(expert));
    }

    std::sort(produced.begin(), produced.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [idx, expert] : produced) {
        set.domain_indices.push_back(idx);
        set.timestamps.push_back(dataset.source(idx).timestamp);
        set.experts.push_back(std::move(expert));
    }
    return set;
}

std::vector<int> all_source_indices(int source_count) {
    std::vector<int> idx(static_cast<std::size_t>(source_count));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace

ExpertSet build_expert_set(const ModelSpec& model, const TemporalDataset& dataset,
                           const TrainingConfig& config, TrainingTrace* trace,
                           const std::vector<int>* selected_domains, SIState* si_out) {
    auto [base, si] = pretrain(model, dataset, config, trace);
    std::vector<int> selected =
        selected_domains ? *selected_domains : all_source_indices(dataset.source_count);
    std::sort(selected.begin(), selected.end());
    std::vector<const SampleSet*> stage_data;
    for (int i = 0; i < dataset.source_count; ++i) stage_data.push_back(&dataset.source(i).train);
    ExpertSet set = finetune_all(model, dataset, stage_data, base, si, config, trace, selected);
    if (si_out) *si_out = std::move(si);
    return set;
}

ExpertSet build_expert_set_cdgtd(const ModelSpec& model, const TemporalDataset& dataset,
                                 const std::vector<MemoryBuffer>& buffers,
                                 const TrainingConfig& config, TrainingTrace* trace,
                                 SIState* si_out) {
    if (static_cast<int>(buffers.size()) != dataset.source_count) {
        throw ConfigError("need one memory buffer per source domain");
    }
    auto [base, si] = pretrain_incremental(model, dataset, config, trace);
    std::vector<const SampleSet*> stage_data;
    for (const auto& buf : buffers) stage_data.push_back(&buf.samples);
    ExpertSet set = finetune_all(model, dataset, stage_data, base, si, config, trace,
                                 all_source_indices(dataset.source_count));
    if (si_out) *si_out = std::move(si);
    return set;
}

std::vector<int> partial_expert_selection(int source_count, SelectionStrategy strategy,
                                          double ratio) {
    if (source_count < 1) throw ConfigError("source_count must be >= 1");
    if (strategy == SelectionStrategy::kAll) return all_source_indices(source_count);
    if (ratio <= 0.0 || ratio > 1.0) throw ConfigError("selection ratio must be in (0, 1]");
    const int m = static_cast<int>(std::ceil(ratio * source_count));
    std::vector<int> idx;
    if (strategy == SelectionStrategy::kLast) {
        for (int i = source_count - m; i < source_count; ++i) idx.push_back(i);
        return idx;
    }
    // Uniform spread including the most recent domain.
    if (m == 1) return {source_count - 1};
    for (int j = 0; j < m; ++j) {
        idx.push_back(static_cast<int>(
            std::llround(static_cast<double>(j) * (source_count - 1) / (m - 1))));
    }
    return idx;
}

const char* to_string(Optimizer o) {
    switch (o) {
        case Optimizer::kSgd: return "sgd";
        case Optimizer::kSgdMomentum: return "sgd_momentum";
        case Optimizer::kAdam: return "adam";
    }
    return "unknown";
}

const char* to_string(FinetuneOrder o) {
    return o == FinetuneOrder::kReverse ? "reverse" : "chronological";
}

const char* to_string(SelectionStrategy s) {
    switch (s) {
        case SelectionStrategy::kLast: return "last";
        case SelectionStrategy::kUniform: return "uniform";
        case SelectionStrategy::kAll: return "all";
    }
    return "unknown";
}

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "sgd") return Optimizer::kSgd;
    if (s == "sgd_momentum") return Optimizer::kSgdMomentum;
    if (s == "adam") return Optimizer::kAdam;
    throw ConfigError("unknown optimizer: " + s);
}

FinetuneOrder finetune_order_from_string(const std::string& s) {
    if (s == "reverse") return FinetuneOrder::kReverse;
    if (s == "chronological") return FinetuneOrder::kChronological;
    throw ConfigError("unknown finetune order: " + s);
}

SelectionStrategy selection_strategy_from_string(const std::string& s) {
    if (s == "last") return SelectionStrategy::kLast;
    if (s == "uniform") return SelectionStrategy::kUniform;
    if (s == "all") return SelectionStrategy::kAll;
    throw ConfigError("unknown selection strategy: " + s);
}

}  // namespace tea
