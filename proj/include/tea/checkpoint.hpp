#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "tea/model.hpp"
#include "tea/param.hpp"

namespace tea {

// TEAC checkpoint: magic "TEAC", u16 version, u8 dtype flag (0 = f64,
// 1 = f32), u64 scalar count, then raw little-endian scalars. A JSON sidecar
// `<name>.meta.json` records the layer map plus caller-supplied provenance.
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamVector& params,
                     const std::optional<ModelSpec>& model = std::nullopt,
                     const nlohmann::json& provenance = nlohmann::json::object());

struct LoadedCheckpoint {
    ParamVector params;
    std::optional<ModelSpec> model;
    nlohmann::json meta;  // full sidecar contents
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Raw vector variants for non-parameter payloads (subspace components, SI
// importance); semantics of the entries come from the sidecar.
void save_raw_vector(const std::filesystem::path& path, const Eigen::VectorXd& values,
                     const nlohmann::json& meta, DtypeTag dtype = DtypeTag::kF64);
Eigen::VectorXd load_raw_vector(const std::filesystem::path& path,
                                nlohmann::json* meta_out = nullptr);

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json layer_map_to_json(const LayerMap& layout);
std::shared_ptr<const LayerMap> layer_map_from_json(const nlohmann::json& j);

}  // namespace tea
