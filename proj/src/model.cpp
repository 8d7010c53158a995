#include "tea/model.hpp"

#include <cmath>

namespace tea {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kNormMomentum = 0.1;

int dense_layer_count(const ModelSpec& spec) {
    return static_cast<int>(spec.layer_sizes.size()) - 1;
}

bool layer_normalized(const ModelSpec& spec, int layer) {
    // Hidden layers only; the output layer stays raw.
    return spec.normalization == Normalization::kRunningStats && layer + 1 < dense_layer_count(spec);
}

std::string layer_name(int layer) { return "dense" + std::to_string(layer + 1); }
std::string norm_name(int layer) { return "norm" + std::to_string(layer + 1); }

}  // namespace

void validate(const ModelSpec& spec) {
    if (spec.layer_sizes.size() < 2) {
        throw ConfigError("model needs at least input and output sizes");
    }
    for (int n : spec.layer_sizes) {
        if (n <= 0) throw ConfigError("layer sizes must be positive");
    }
}

std::shared_ptr<const LayerMap> build_layer_map(const ModelSpec& spec) {
    validate(spec);
    std::vector<LayerSegment> segs;
    std::size_t offset = 0;
    auto push = [&](std::string name, std::size_t len, SegmentKind kind) {
        segs.push_back({std::move(name), offset, len, kind});
        offset += len;
    };
    for (int l = 0; l < dense_layer_count(spec); ++l) {
        const auto in = static_cast<std::size_t>(spec.layer_sizes[l]);
        const auto out = static_cast<std::size_t>(spec.layer_sizes[l + 1]);
        push(layer_name(l) + ".weight", in * out, SegmentKind::kDenseWeight);
        push(layer_name(l) + ".bias", out, SegmentKind::kDenseBias);
        if (layer_normalized(spec, l)) {
            push(norm_name(l) + ".affine", 2 * out, SegmentKind::kNormAffine);
            push(norm_name(l) + ".stats", 2 * out, SegmentKind::kNormStatistic);
        }
    }
    return std::make_shared<const LayerMap>(std::move(segs));
}

std::size_t param_count(const ModelSpec& spec) { return build_layer_map(spec)->total_size(); }

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
    auto layout = build_layer_map(spec);
    ParamVector p = make_params(layout);
    Eigen::Index cursor = 0;
    for (int l = 0; l < dense_layer_count(spec); ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (int i = 0; i < in * out; ++i) p.values[cursor++] = rng.uniform(-limit, limit);
        cursor += out;  // biases stay 0
        if (layer_normalized(spec, l)) {
            p.values.segment(cursor, out).setOnes();  // scale
            cursor += 2 * out;                        // shift stays 0
            cursor += out;                            // running mean stays 0
            p.values.segment(cursor, out).setOnes();  // running var
            cursor += out;
        }
    }
    return p;
}

std::vector<LayerWeights> unflatten(const ModelSpec& spec, const ParamVector& params) {
    if (params.size() != param_count(spec)) {
        throw ShapeError("unflatten: parameter count mismatch");
    }
    std::vector<LayerWeights> layers;
    const double* ptr = params.values.data();
    Eigen::Index cursor = 0;
    for (int l = 0; l < dense_layer_count(spec); ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        LayerWeights w;
        w.weight = Eigen::Map<const Eigen::MatrixXd>(ptr + cursor, in, out);
        cursor += in * out;
        w.bias = Eigen::Map<const Eigen::VectorXd>(ptr + cursor, out);
        cursor += out;
        if (layer_normalized(spec, l)) {
            w.norm_scale = Eigen::Map<const Eigen::VectorXd>(ptr + cursor, out);
            w.norm_shift = Eigen::Map<const Eigen::VectorXd>(ptr + cursor + out, out);
            cursor += 2 * out;
            w.norm_mean = Eigen::Map<const Eigen::VectorXd>(ptr + cursor, out);
            w.norm_var = Eigen::Map<const Eigen::VectorXd>(ptr + cursor + out, out);
            cursor += 2 * out;
        }
        layers.push_back(std::move(w));
    }
    return layers;
}

ParamVector flatten(const ModelSpec& spec, const std::vector<LayerWeights>& layers) {
    if (static_cast<int>(layers.size()) != dense_layer_count(spec)) {
        throw ShapeError("flatten: layer count mismatch");
    }
    ParamVector p = make_params(build_layer_map(spec));
    Eigen::Index cursor = 0;
    for (int l = 0; l < dense_layer_count(spec); ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const auto& w = layers[static_cast<std::size_t>(l)];
        if (w.weight.rows() != in || w.weight.cols() != out || w.bias.size() != out) {
            throw ShapeError("flatten: shape mismatch at " + layer_name(l));
        }
        Eigen::Map<Eigen::MatrixXd>(p.values.data() + cursor, in, out) = w.weight;
        cursor += in * out;
        p.values.segment(cursor, out) = w.bias;
        cursor += out;
        if (layer_normalized(spec, l)) {
            if (w.norm_scale.size() != out || w.norm_shift.size() != out ||
                w.norm_mean.size() != out || w.norm_var.size() != out) {
                throw ShapeError("flatten: norm shape mismatch at " + norm_name(l));
            }
            p.values.segment(cursor, out) = w.norm_scale;
            p.values.segment(cursor + out, out) = w.norm_shift;
            cursor += 2 * out;
            p.values.segment(cursor, out) = w.norm_mean;
            p.values.segment(cursor + out, out) = w.norm_var;
            cursor += 2 * out;
        }
    }
    return p;
}

namespace {

struct LayerCache {
    Eigen::MatrixXd input;         // activations entering the dense layer
    Eigen::MatrixXd z_normed;      // post-norm pre-activation (== z when no norm)
    Eigen::MatrixXd z_hat;         // standardized pre-affine values (norm only)
    Eigen::RowVectorXd inv_std;    // 1/sqrt(var + eps) (norm only)
    Eigen::MatrixXd activated;     // layer output
};

struct SegmentOffsets {
    Eigen::Index weight = 0, bias = 0, affine = -1, stats = -1;
};

SegmentOffsets offsets_for_layer(const ModelSpec& spec, int layer) {
    SegmentOffsets off;
    Eigen::Index cursor = 0;
    for (int l = 0; l <= layer; ++l) {
        const Eigen::Index in = spec.layer_sizes[l];
        const Eigen::Index out = spec.layer_sizes[l + 1];
        off.weight = cursor;
        cursor += in * out;
        off.bias = cursor;
        cursor += out;
        off.affine = -1;
        off.stats = -1;
        if (layer_normalized(spec, l)) {
            off.affine = cursor;
            cursor += 2 * out;
            off.stats = cursor;
            cursor += 2 * out;
        }
    }
    return off;
}

// Single forward pass shared by forward(), forward_eval() and loss_and_grad().
// `mutable_params` is only required when train_mode updates statistics.
Eigen::MatrixXd run_forward(const ModelSpec& spec, const ParamVector& params,
                            ParamVector* mutable_params, const Eigen::MatrixXd& inputs,
                            bool train_mode, std::vector<LayerCache>* caches, bool check_finite) {
    validate(spec);
    if (params.size() != param_count(spec)) {
        throw ShapeError("forward: parameter count mismatch");
    }
    if (inputs.cols() != spec.input_size()) {
        throw ShapeError("forward: input width " + std::to_string(inputs.cols()) +
                         " does not match model input size at dense1");
    }
    const Eigen::Index n = inputs.rows();
    Eigen::MatrixXd a = inputs;
    const double* base = params.values.data();
    for (int l = 0; l < dense_layer_count(spec); ++l) {
        const Eigen::Index in = spec.layer_sizes[l];
        const Eigen::Index out = spec.layer_sizes[l + 1];
        const auto off = offsets_for_layer(spec, l);
        const Eigen::Map<const Eigen::MatrixXd> w(base + off.weight, in, out);
        const Eigen::Map<const Eigen::RowVectorXd> b(base + off.bias, out);

        LayerCache cache;
        if (caches) cache.input = a;
        Eigen::MatrixXd z = (a * w).rowwise() + b;

        if (layer_normalized(spec, l)) {
            Eigen::RowVectorXd mean, var;
            if (train_mode) {
                if (!mutable_params) throw ConfigError("train-mode forward needs mutable params");
                Eigen::RowVectorXd batch_mean = z.colwise().mean();
                Eigen::RowVectorXd batch_var =
                    (z.rowwise() - batch_mean).array().square().colwise().mean();
                double* stats = mutable_params->values.data() + off.stats;
                Eigen::Map<Eigen::RowVectorXd> run_mean(stats, out);
                Eigen::Map<Eigen::RowVectorXd> run_var(stats + out, out);
                run_mean = (1.0 - kNormMomentum) * run_mean + kNormMomentum * batch_mean;
                run_var = (1.0 - kNormMomentum) * run_var + kNormMomentum * batch_var;
                mean = run_mean;
                var = run_var;
            } else {
                mean = Eigen::Map<const Eigen::RowVectorXd>(base + off.stats, out);
                var = Eigen::Map<const Eigen::RowVectorXd>(base + off.stats + out, out);
            }
            const Eigen::Map<const Eigen::RowVectorXd> scale(base + off.affine, out);
            const Eigen::Map<const Eigen::RowVectorXd> shift(base + off.affine + out, out);
            Eigen::RowVectorXd inv_std = (var.array() + kNormEps).rsqrt();
            Eigen::MatrixXd z_hat = (z.rowwise() - mean).array().rowwise() * inv_std.array();
            z = (z_hat.array().rowwise() * scale.array()).rowwise() + shift.array();
            if (caches) {
                cache.z_hat = std::move(z_hat);
                cache.inv_std = std::move(inv_std);
            }
        }
        if (caches) cache.z_normed = z;

        if (l + 1 < dense_layer_count(spec)) {
            a = spec.activation == Activation::kRelu ? z.cwiseMax(0.0).eval()
                                                     : z.array().tanh().matrix().eval();
        } else {
            a = std::move(z);
        }
        if (check_finite && !a.allFinite()) {
            throw NumericError("non-finite activations at " + layer_name(l));
        }
        if (caches) {
            cache.activated = a;
            caches->push_back(std::move(cache));
        }
    }
    (void)n;
    return a;
}

}  // namespace

Eigen::MatrixXd forward(const ModelSpec& spec, ParamVector& params, const Eigen::MatrixXd& inputs,
                        bool train_mode) {
    return run_forward(spec, params, &params, inputs, train_mode, nullptr, false);
}

Eigen::MatrixXd forward_eval(const ModelSpec& spec, const ParamVector& params,
                             const Eigen::MatrixXd& inputs) {
    return run_forward(spec, params, nullptr, inputs, false, nullptr, false);
}

void validate_loss(const ModelSpec& spec, LossKind loss, bool allow_mse_on_classification) {
    if (loss == LossKind::kCrossEntropy && spec.output_head != OutputHead::kClassificationLogits) {
        throw ConfigError("cross entropy requires a classification head");
    }
    if (loss == LossKind::kMeanSquaredError && spec.output_head != OutputHead::kRegressionScalar &&
        !allow_mse_on_classification) {
        throw ConfigError("MSE on a classification head must be explicitly allowed");
    }
}

Eigen::MatrixXd one_hot(const Eigen::VectorXd& labels, int classes) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(labels.size(), classes);
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        const int c = static_cast<int>(labels[i]);
        if (c < 0 || c >= classes) throw ShapeError("one_hot: label out of range");
        t(i, c) = 1.0;
    }
    return t;
}

namespace {

// Loss value and dL/doutput for a batch of raw outputs.
double output_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets, LossKind loss,
                   Eigen::MatrixXd* grad_out) {
    const double n = static_cast<double>(outputs.rows());
    if (loss == LossKind::kMeanSquaredError) {
        if (targets.rows() != outputs.rows() || targets.cols() != outputs.cols()) {
            throw ShapeError("MSE: target shape mismatch");
        }
        Eigen::MatrixXd diff = outputs - targets;
        if (grad_out) *grad_out = (2.0 / n) * diff;
        return diff.array().square().sum() / n;
    }
    // Cross entropy over logits; targets is a single column of class indices.
    if (targets.cols() != 1 || targets.rows() != outputs.rows()) {
        throw ShapeError("cross entropy: expected one label column");
    }
    Eigen::VectorXd row_max = outputs.rowwise().maxCoeff();
    Eigen::MatrixXd shifted = outputs.colwise() - row_max;
    Eigen::MatrixXd expd = shifted.array().exp();
    Eigen::VectorXd denom = expd.rowwise().sum();
    double total = 0.0;
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        const int c = static_cast<int>(targets(i, 0));
        if (c < 0 || c >= outputs.cols()) throw ShapeError("cross entropy: label out of range");
        total += std::log(denom[i]) - shifted(i, c);
    }
    if (grad_out) {
        Eigen::MatrixXd probs = expd.array().colwise() / denom.array();
        for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
            probs(i, static_cast<int>(targets(i, 0))) -= 1.0;
        }
        *grad_out = probs / n;
    }
    return total / n;
}

}  // namespace

LossGrad loss_and_grad(const ModelSpec& spec, ParamVector& params, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets, LossKind loss, bool train_mode) {
    std::vector<LayerCache> caches;
    caches.reserve(spec.layer_sizes.size());
    Eigen::MatrixXd outputs =
        run_forward(spec, params, &params, inputs, train_mode, &caches, true);

    LossGrad result;
    result.grad = make_params(params.layout);
    Eigen::MatrixXd d_out;
    result.loss = output_loss(outputs, targets, loss, &d_out);
    if (!std::isfinite(result.loss)) throw NumericError("non-finite loss");

    double* gbase = result.grad.values.data();
    const double* pbase = params.values.data();
    for (int l = dense_layer_count(spec) - 1; l >= 0; --l) {
        const Eigen::Index in = spec.layer_sizes[l];
        const Eigen::Index out = spec.layer_sizes[l + 1];
        const auto off = offsets_for_layer(spec, l);
        const auto& cache = caches[static_cast<std::size_t>(l)];

        // Through the activation (output layer is raw).
        if (l + 1 < dense_layer_count(spec)) {
            if (spec.activation == Activation::kRelu) {
                d_out = (cache.z_normed.array() > 0.0).select(d_out, 0.0);
            } else {
                d_out = d_out.array() * (1.0 - cache.activated.array().square());
            }
        }

        // Through the normalization (statistics treated as constants).
        if (layer_normalized(spec, l)) {
            const Eigen::Map<const Eigen::RowVectorXd> scale(pbase + off.affine, out);
            Eigen::Map<Eigen::RowVectorXd> d_scale(gbase + off.affine, out);
            Eigen::Map<Eigen::RowVectorXd> d_shift(gbase + off.affine + out, out);
            d_scale = (d_out.array() * cache.z_hat.array()).colwise().sum();
            d_shift = d_out.colwise().sum();
            d_out = (d_out.array().rowwise() * (scale.array() * cache.inv_std.array())).matrix();
        }

        // Through the dense layer.
        Eigen::Map<Eigen::MatrixXd> d_w(gbase + off.weight, in, out);
        Eigen::Map<Eigen::RowVectorXd> d_b(gbase + off.bias, out);
        d_w = cache.input.transpose() * d_out;
        d_b = d_out.colwise().sum();
        if (l > 0) {
            const Eigen::Map<const Eigen::MatrixXd> w(pbase + off.weight, in, out);
            d_out = d_out * w.transpose();
        }
    }
    return result;
}

double loss_only(const ModelSpec& spec, const ParamVector& params, const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets, LossKind loss) {
    Eigen::MatrixXd outputs = run_forward(spec, params, nullptr, inputs, false, nullptr, true);
    return output_loss(outputs, targets, loss, nullptr);
}

const char* to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }
const char* to_string(Normalization n) {
    return n == Normalization::kNone ? "none" : "running_stats";
}
const char* to_string(OutputHead h) {
    return h == OutputHead::kClassificationLogits ? "classification_logits" : "regression_scalar";
}
const char* to_string(LossKind l) {
    return l == LossKind::kCrossEntropy ? "cross_entropy" : "mean_squared_error";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::kRelu;
    if (s == "tanh") return Activation::kTanh;
    throw ConfigError("unknown activation: " + s);
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "none") return Normalization::kNone;
    if (s == "running_stats") return Normalization::kRunningStats;
    throw ConfigError("unknown normalization: " + s);
}

OutputHead output_head_from_string(const std::string& s) {
    if (s == "classification_logits") return OutputHead::kClassificationLogits;
    if (s == "regression_scalar") return OutputHead::kRegressionScalar;
    throw ConfigError("unknown output head: " + s);
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "cross_entropy") return LossKind::kCrossEntropy;
    if (s == "mean_squared_error") return LossKind::kMeanSquaredError;
    throw ConfigError("unknown loss: " + s);
}

}  // namespace tea
