#pragma once

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

#include "tea/param.hpp"
#include "tea/rng.hpp"

namespace tea {

enum class Activation { kRelu, kTanh };
enum class Normalization { kNone, kRunningStats };
enum class OutputHead { kClassificationLogits, kRegressionScalar };
enum class LossKind { kCrossEntropy, kMeanSquaredError };

// Fully connected network: dense layers, optional running-stats normalization
// on hidden layers, relu/tanh hidden activations, raw outputs.
struct ModelSpec {
    std::vector<int> layer_sizes;  // input, hidden..., output
    Activation activation = Activation::kRelu;
    Normalization normalization = Normalization::kNone;
    OutputHead output_head = OutputHead::kClassificationLogits;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
};

// Throws ConfigError on empty/degenerate layer lists.
void validate(const ModelSpec& spec);

// Deterministic layer map for the spec; stable across calls.
std::shared_ptr<const LayerMap> build_layer_map(const ModelSpec& spec);

std::size_t param_count(const ModelSpec& spec);

// Uniform(-limit, limit) weight init with limit = sqrt(6/(fan_in+fan_out));
// biases 0; norm affine (scale, shift) = (1, 0); norm statistics (mean, var)
// = (0, 1).
ParamVector init_params(const ModelSpec& spec, Rng& rng);

// Round trip between per-layer matrices and the flat vector; bit-exact.
struct LayerWeights {
    Eigen::MatrixXd weight;  // fan_in x fan_out
    Eigen::VectorXd bias;
    Eigen::VectorXd norm_scale, norm_shift;  // empty when not normalized
    Eigen::VectorXd norm_mean, norm_var;
};
std::vector<LayerWeights> unflatten(const ModelSpec& spec, const ParamVector& params);
ParamVector flatten(const ModelSpec& spec, const std::vector<LayerWeights>& layers);

// Forward pass on a batch (rows = samples). In train mode the running
// statistics inside `params` are updated in place by EMA (momentum 0.1) and
// the batch is normalized with the updated values; in eval mode statistics
// are read-only. Throws ShapeError naming the layer on dimension mismatch.
Eigen::MatrixXd forward(const ModelSpec& spec, ParamVector& params, const Eigen::MatrixXd& inputs,
                        bool train_mode);
Eigen::MatrixXd forward_eval(const ModelSpec& spec, const ParamVector& params,
                             const Eigen::MatrixXd& inputs);

// Loss conventions: MSE is the per-sample squared error summed over output
// dimensions, averaged over the batch; cross entropy is softmax NLL averaged
// over the batch (labels are class indices).
void validate_loss(const ModelSpec& spec, LossKind loss, bool allow_mse_on_classification = false);

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;  // zeros on norm_statistic segments
};

// Labels: class indices for cross entropy; for MSE, a column per output
// (one-hot targets if classification models are scored with MSE).
LossGrad loss_and_grad(const ModelSpec& spec, ParamVector& params, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets, LossKind loss, bool train_mode);

double loss_only(const ModelSpec& spec, const ParamVector& params, const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets, LossKind loss);

// Helper for classification targets: labels (class ids) -> one-hot matrix.
Eigen::MatrixXd one_hot(const Eigen::VectorXd& labels, int classes);

const char* to_string(Activation a);
const char* to_string(Normalization n);
const char* to_string(OutputHead h);
const char* to_string(LossKind l);
Activation activation_from_string(const std::string& s);
Normalization normalization_from_string(const std::string& s);
OutputHead output_head_from_string(const std::string& s);
LossKind loss_kind_from_string(const std::string& s);

}  // namespace tea
