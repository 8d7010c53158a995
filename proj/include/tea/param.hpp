#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tea/error.hpp"

namespace tea {

enum class SegmentKind {
    kDenseWeight,
    kDenseBias,
    kNormAffine,     // trainable scale/shift of a normalization layer
    kNormStatistic,  // running mean/variance; never touched by gradient steps
};

const char* to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(const std::string& s);

struct LayerSegment {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
    SegmentKind kind = SegmentKind::kDenseWeight;

    bool operator==(const LayerSegment&) const = default;
};

// Ordered, contiguous, non-overlapping segmentation of a flat weight vector.
class LayerMap {
public:
    explicit LayerMap(std::vector<LayerSegment> segments);

    const std::vector<LayerSegment>& segments() const { return segments_; }
    std::size_t total_size() const { return total_size_; }
    std::size_t non_statistic_size() const { return non_statistic_size_; }

    bool operator==(const LayerMap& other) const { return segments_ == other.segments_; }

private:
    std::vector<LayerSegment> segments_;
    std::size_t total_size_ = 0;
    std::size_t non_statistic_size_ = 0;
};

enum class DtypeTag : std::uint8_t { kF64 = 0, kF32 = 1 };

// Flat model weights plus the layer map that gives the entries meaning.
// The layout is shared (immutable) across every ParamVector of one model.
struct ParamVector {
    Eigen::VectorXd values;
    std::shared_ptr<const LayerMap> layout;
    DtypeTag dtype_tag = DtypeTag::kF64;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

ParamVector make_params(std::shared_ptr<const LayerMap> layout);

// True when both vectors use the same segmentation (pointer or value equal).
bool same_layout(const ParamVector& a, const ParamVector& b);

// 1.0 on entries that gradient steps may touch, 0.0 on norm statistics.
Eigen::VectorXd non_statistic_mask(const LayerMap& layout);

// Gather/scatter of the non-statistic coordinates, in layout order.
Eigen::VectorXd gather_non_statistic(const ParamVector& p);
void scatter_non_statistic(ParamVector& p, const Eigen::VectorXd& packed);

// Copies norm_affine and norm_statistic segments of `from` into `into`.
void copy_norm_segments(ParamVector& into, const ParamVector& from);

// Copies only norm_statistic segments.
void copy_statistic_segments(ParamVector& into, const ParamVector& from);

// Numerically careful tree reduction: sum of coeffs[i] * vectors[i].
Eigen::VectorXd pairwise_weighted_sum(const std::vector<const Eigen::VectorXd*>& vectors,
                                      const Eigen::VectorXd& coeffs);

}  // namespace tea
