#include "tea/checkpoint.hpp"

#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>

namespace tea {

namespace {

constexpr char kMagic[4] = {'T', 'E', 'A', 'C'};

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

void write_body(const std::filesystem::path& path, const Eigen::VectorXd& values, DtypeTag dtype) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic, 4);
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint8_t>(dtype));
    write_pod(out, static_cast<std::uint64_t>(values.size()));
    if (dtype == DtypeTag::kF64) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    } else {
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            const float v = static_cast<float>(values[i]);
            write_pod(out, v);
        }
    }
    if (!out) throw IoError("short write on checkpoint: " + path.string());
}

Eigen::VectorXd read_body(const std::filesystem::path& path, DtypeTag* dtype_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("bad checkpoint magic in " + path.string());
    }
    const auto version = read_pod<std::uint16_t>(in);
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto dtype_flag = read_pod<std::uint8_t>(in);
    if (dtype_flag > 1) throw IoError("unknown checkpoint dtype flag");
    const auto dtype = static_cast<DtypeTag>(dtype_flag);
    const auto count = read_pod<std::uint64_t>(in);
    Eigen::VectorXd values(static_cast<Eigen::Index>(count));
    if (dtype == DtypeTag::kF64) {
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        for (std::uint64_t i = 0; i < count; ++i) {
            values[static_cast<Eigen::Index>(i)] = static_cast<double>(read_pod<float>(in));
        }
    }
    if (!in) throw IoError("truncated checkpoint: " + path.string());
    if (dtype_out) *dtype_out = dtype;
    return values;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".meta.json");
}

void write_sidecar(const std::filesystem::path& path, const nlohmann::json& meta) {
    std::ofstream out(sidecar_path(path), std::ios::trunc);
    if (!out) throw IoError("cannot write sidecar for " + path.string());
    out << meta.dump(2) << "\n";
}

nlohmann::json read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(sidecar_path(path));
    if (!in) throw IoError("missing sidecar for " + path.string());
    nlohmann::json meta;
    in >> meta;
    return meta;
}

}  // namespace

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
    return {{"layer_sizes", spec.layer_sizes},
            {"activation", to_string(spec.activation)},
            {"normalization", to_string(spec.normalization)},
            {"output_head", to_string(spec.output_head)}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    spec.activation = activation_from_string(j.at("activation").get<std::string>());
    spec.normalization = normalization_from_string(j.at("normalization").get<std::string>());
    spec.output_head = output_head_from_string(j.at("output_head").get<std::string>());
    validate(spec);
    return spec;
}

nlohmann::json layer_map_to_json(const LayerMap& layout) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& seg : layout.segments()) {
        segs.push_back({{"name", seg.name},
                        {"offset", seg.offset},
                        {"length", seg.length},
                        {"kind", to_string(seg.kind)}});
    }
    return segs;
}

std::shared_ptr<const LayerMap> layer_map_from_json(const nlohmann::json& j) {
    std::vector<LayerSegment> segs;
    for (const auto& s : j) {
        segs.push_back({s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(),
                        s.at("length").get<std::size_t>(),
                        segment_kind_from_string(s.at("kind").get<std::string>())});
    }
    return std::make_shared<const LayerMap>(std::move(segs));
}

void save_checkpoint(const std::filesystem::path& path, const ParamVector& params,
                     const std::optional<ModelSpec>& model, const nlohmann::json& provenance) {
    write_body(path, params.values, params.dtype_tag);
    nlohmann::json meta{{"format", "TEAC"},
                        {"version", kCheckpointVersion},
                        {"dtype", params.dtype_tag == DtypeTag::kF64 ? "f64" : "f32"},
                        {"count", params.size()},
                        {"timestamp", iso_timestamp()},
                        {"layer_map", layer_map_to_json(*params.layout)},
                        {"provenance", provenance}};
    if (model) meta["model"] = model_spec_to_json(*model);
    write_sidecar(path, meta);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    LoadedCheckpoint loaded;
    DtypeTag dtype = DtypeTag::kF64;
    Eigen::VectorXd values = read_body(path, &dtype);
    loaded.meta = read_sidecar(path);
    loaded.params.values = std::move(values);
    loaded.params.dtype_tag = dtype;
    loaded.params.layout = layer_map_from_json(loaded.meta.at("layer_map"));
    if (loaded.params.layout->total_size() != loaded.params.size()) {
        throw IoError("checkpoint length disagrees with its layer map: " + path.string());
    }
    if (loaded.meta.contains("model")) {
        loaded.model = model_spec_from_json(loaded.meta.at("model"));
    }
    return loaded;
}

void save_raw_vector(const std::filesystem::path& path, const Eigen::VectorXd& values,
                     const nlohmann::json& meta, DtypeTag dtype) {
    write_body(path, values, dtype);
    nlohmann::json full = meta;
    full["format"] = "TEAC";
    full["version"] = kCheckpointVersion;
    full["dtype"] = dtype == DtypeTag::kF64 ? "f64" : "f32";
    full["count"] = static_cast<std::uint64_t>(values.size());
    write_sidecar(path, full);
}

Eigen::VectorXd load_raw_vector(const std::filesystem::path& path, nlohmann::json* meta_out) {
    DtypeTag dtype = DtypeTag::kF64;
    Eigen::VectorXd values = read_body(path, &dtype);
    if (meta_out) *meta_out = read_sidecar(path);
    return values;
}

}  // namespace tea
