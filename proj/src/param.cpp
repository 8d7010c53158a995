#include "tea/param.hpp"

namespace tea {

const char* to_string(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::kDenseWeight: return "dense_weight";
        case SegmentKind::kDenseBias: return "dense_bias";
        case SegmentKind::kNormAffine: return "norm_affine";
        case SegmentKind::kNormStatistic: return "norm_statistic";
    }
    return "unknown";
}

SegmentKind segment_kind_from_string(const std::string& s) {
    if (s == "dense_weight") return SegmentKind::kDenseWeight;
    if (s == "dense_bias") return SegmentKind::kDenseBias;
    if (s == "norm_affine") return SegmentKind::kNormAffine;
    if (s == "norm_statistic") return SegmentKind::kNormStatistic;
    throw ConfigError("unknown segment kind: " + s);
}

LayerMap::LayerMap(std::vector<LayerSegment> segments) : segments_(std::move(segments)) {
    std::size_t expected_offset = 0;
    for (const auto& seg : segments_) {
        if (seg.length == 0) throw ConfigError("layer map segment '" + seg.name + "' has zero length");
        if (seg.offset != expected_offset) {
            throw ConfigError("layer map segment '" + seg.name + "' is not contiguous");
        }
        expected_offset += seg.length;
        if (seg.kind != SegmentKind::kNormStatistic) non_statistic_size_ += seg.length;
    }
    total_size_ = expected_offset;
}

ParamVector make_params(std::shared_ptr<const LayerMap> layout) {
    ParamVector p;
    p.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout->total_size()));
    p.layout = std::move(layout);
    return p;
}

bool same_layout(const ParamVector& a, const ParamVector& b) {
    if (!a.layout || !b.layout) return false;
    return a.layout == b.layout || *a.layout == *b.layout;
}

Eigen::VectorXd non_statistic_mask(const LayerMap& layout) {
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.total_size()));
    for (const auto& seg : layout.segments()) {
        if (seg.kind != SegmentKind::kNormStatistic) {
            mask.segment(static_cast<Eigen::Index>(seg.offset), static_cast<Eigen::Index>(seg.length)).setOnes();
        }
    }
    return mask;
}

Eigen::VectorXd gather_non_statistic(const ParamVector& p) {
    Eigen::VectorXd packed(static_cast<Eigen::Index>(p.layout->non_statistic_size()));
    Eigen::Index cursor = 0;
    for (const auto& seg : p.layout->segments()) {
        if (seg.kind == SegmentKind::kNormStatistic) continue;
        const auto len = static_cast<Eigen::Index>(seg.length);
        packed.segment(cursor, len) = p.values.segment(static_cast<Eigen::Index>(seg.offset), len);
        cursor += len;
    }
    return packed;
}

void scatter_non_statistic(ParamVector& p, const Eigen::VectorXd& packed) {
    if (packed.size() != static_cast<Eigen::Index>(p.layout->non_statistic_size())) {
        throw ShapeError("scatter_non_statistic: packed length mismatch");
    }
    Eigen::Index cursor = 0;
    for (const auto& seg : p.layout->segments()) {
        if (seg.kind == SegmentKind::kNormStatistic) continue;
        const auto len = static_cast<Eigen::Index>(seg.length);
        p.values.segment(static_cast<Eigen::Index>(seg.offset), len) = packed.segment(cursor, len);
        cursor += len;
    }
}

namespace {

void copy_segments_of_kind(ParamVector& into, const ParamVector& from, SegmentKind a,
                           SegmentKind b) {
    if (!same_layout(into, from)) throw ShapeError("copy_norm_segments: layout mismatch");
    for (const auto& seg : into.layout->segments()) {
        if (seg.kind == a || seg.kind == b) {
            const auto off = static_cast<Eigen::Index>(seg.offset);
            const auto len = static_cast<Eigen::Index>(seg.length);
            into.values.segment(off, len) = from.values.segment(off, len);
        }
    }
}

}  // namespace

void copy_norm_segments(ParamVector& into, const ParamVector& from) {
    copy_segments_of_kind(into, from, SegmentKind::kNormAffine, SegmentKind::kNormStatistic);
}

void copy_statistic_segments(ParamVector& into, const ParamVector& from) {
    copy_segments_of_kind(into, from, SegmentKind::kNormStatistic, SegmentKind::kNormStatistic);
}

namespace {

Eigen::VectorXd weighted_sum_range(const std::vector<const Eigen::VectorXd*>& vectors,
                                   const Eigen::VectorXd& coeffs, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return coeffs[static_cast<Eigen::Index>(lo)] * (*vectors[lo]);
    const std::size_t mid = lo + (hi - lo) / 2;
    return weighted_sum_range(vectors, coeffs, lo, mid) + weighted_sum_range(vectors, coeffs, mid, hi);
}

}  // namespace

Eigen::VectorXd pairwise_weighted_sum(const std::vector<const Eigen::VectorXd*>& vectors,
                                      const Eigen::VectorXd& coeffs) {
    if (vectors.empty()) throw ConfigError("pairwise_weighted_sum: empty input");
    if (static_cast<Eigen::Index>(vectors.size()) != coeffs.size()) {
        throw ShapeError("pairwise_weighted_sum: coefficient count mismatch");
    }
    return weighted_sum_range(vectors, coeffs, 0, vectors.size());
}

}  // namespace tea
