#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tea/error.hpp"
#include "tea/rng.hpp"

namespace tea {

enum class TaskKind { kClassification, kRegression };

struct SampleSet {
    Eigen::MatrixXd x;  // rows = samples
    Eigen::VectorXd y;  // class index or regression target

    Eigen::Index size() const { return x.rows(); }
};

struct Domain {
    double timestamp = 0.0;
    SampleSet train, val, test;
    nlohmann::json generator_params;  // e.g. rotation angle of this domain
};

// Ordered domains: the first `source_count` are sources, the rest targets.
struct TemporalDataset {
    TaskKind task = TaskKind::kClassification;
    int source_count = 0;  // S
    int target_count = 0;  // F
    int class_count = 0;   // 0 for regression
    std::uint64_t seed = 0;
    std::string generator;
    std::vector<Domain> domains;

    int feature_dim() const { return domains.empty() ? 0 : static_cast<int>(domains[0].train.x.cols()); }
    const Domain& source(int i) const { return domains.at(static_cast<std::size_t>(i)); }
    const Domain& target(int k) const {
        return domains.at(static_cast<std::size_t>(source_count + k));
    }
};

struct MemoryBuffer {
    int domain_index = 0;
    SampleSet samples;
    double ratio = 0.0;
};

// Two interleaved half-moons, domain i rotated by i * angle_step_deg.
TemporalDataset generate_rotated_moons(int n_per_domain, int sources, int targets,
                                       double angle_step_deg, double noise_sigma,
                                       std::uint64_t seed);

// Gaussian blobs with class means on a circle of `radius`, rotated per domain.
TemporalDataset generate_rotated_gaussians(int classes, int n_per_domain, int sources, int targets,
                                           double angle_step_deg, double radius, double sigma,
                                           std::uint64_t seed);

// Regression: y = <w_i, x> + eps with w_i = w_0 + i * drift_rate * u, |u| = 1.
TemporalDataset generate_drifting_hyperplane(int dim, int n_per_domain, int sources, int targets,
                                             double drift_rate, double noise_sigma,
                                             std::uint64_t seed);

// One buffer per source domain: round(ratio * train size) samples drawn
// without replacement.
std::vector<MemoryBuffer> make_buffers(const TemporalDataset& dataset, double ratio,
                                       std::uint64_t seed);

// Permutes source-domain contents while timestamps keep their original
// ascending order; targets untouched.
TemporalDataset shuffle_source_order(const TemporalDataset& dataset, std::uint64_t seed);

// JSON-lines export (one sample per line) plus a manifest; import restores
// the dataset exactly.
void export_jsonl(const TemporalDataset& dataset, const std::filesystem::path& dir);
TemporalDataset import_jsonl(const std::filesystem::path& dir);

const char* to_string(TaskKind task);
TaskKind task_kind_from_string(const std::string& s);

}  // namespace tea
