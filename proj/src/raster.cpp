#include "cropmine/raster.hpp"

#include "cropmine/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

namespace cropmine {

using nlohmann::json;

void Raster::validate() const {
    if (width < 1 || height < 1 || bands < 1)
        throw FormatError("raster dimensions must be >= 1, got " +
                          std::to_string(width) + "x" + std::to_string(height) +
                          "x" + std::to_string(bands));
    if (data.size() != size())
        throw FormatError("raster payload size mismatch: expected " +
                          std::to_string(size()) + " values, have " +
                          std::to_string(data.size()));
    for (float v : data)
        if (!std::isfinite(v))
            throw FormatError("raster contains a non-finite value");
}

const char* mask_kind_name(MaskKind kind) {
    switch (kind) {
    case MaskKind::SparseHuman: return "sparse_human";
    case MaskKind::Weak: return "weak";
    case MaskKind::Extended: return "extended";
    case MaskKind::Predicted: return "predicted";
    case MaskKind::Truth: return "truth";
    case MaskKind::Cluster: return "cluster";
    }
    return "unknown";
}

MaskKind mask_kind_from_name(const std::string& name) {
    if (name == "sparse_human") return MaskKind::SparseHuman;
    if (name == "weak") return MaskKind::Weak;
    if (name == "extended") return MaskKind::Extended;
    if (name == "predicted") return MaskKind::Predicted;
    if (name == "truth") return MaskKind::Truth;
    if (name == "cluster") return MaskKind::Cluster;
    throw FormatError("unknown mask kind '" + name + "'");
}

void LabelMask::validate(int cluster_k) const {
    if (width < 1 || height < 1)
        throw FormatError("mask dimensions must be >= 1");
    if (data.size() != size())
        throw FormatError("mask payload size mismatch: expected " +
                          std::to_string(size()) + " codes, have " +
                          std::to_string(data.size()));
    for (std::uint8_t code : data) {
        bool ok = true;
        switch (kind) {
        case MaskKind::SparseHuman:
        case MaskKind::Extended:
        case MaskKind::Truth:
            ok = code <= kCropland;
            break;
        case MaskKind::Weak:
        case MaskKind::Predicted:
            ok = code == kNonCropland || code == kCropland;
            break;
        case MaskKind::Cluster:
            ok = cluster_k <= 0 || code < cluster_k;
            break;
        }
        if (!ok)
            throw FormatError(std::string("code ") + std::to_string(code) +
                              " is outside the alphabet of a " +
                              mask_kind_name(kind) + " mask");
    }
}

LabelMask make_mask(int width, int height, MaskKind kind, std::uint8_t fill) {
    LabelMask mask;
    mask.width = width;
    mask.height = height;
    mask.kind = kind;
    mask.data.assign(static_cast<std::size_t>(width) * height, fill);
    return mask;
}

namespace {

std::string base_path(const std::string& path) {
    if (path.size() > 4 && (path.ends_with(".bin") || path.ends_with(".json"))) {
        return path.substr(0, path.rfind('.'));
    }
    return path;
}

json read_sidecar(const std::string& base) {
    std::ifstream in(base + ".json");
    if (!in)
        throw FormatError("missing sidecar file: " + base + ".json");
    json header;
    try {
        in >> header;
    } catch (const json::exception& e) {
        throw FormatError("bad sidecar " + base + ".json: " + e.what());
    }
    return header;
}

std::vector<std::uint8_t> read_payload(const std::string& base,
                                       std::size_t expected_bytes) {
    std::ifstream in(base + ".bin", std::ios::binary);
    if (!in)
        throw FormatError("missing payload file: " + base + ".bin");
    in.seekg(0, std::ios::end);
    const auto actual = static_cast<std::size_t>(in.tellg());
    if (actual != expected_bytes)
        throw FormatError("payload size mismatch in " + base + ".bin: header says " +
                          std::to_string(expected_bytes) + " bytes, file has " +
                          std::to_string(actual));
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(actual);
    in.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(actual));
    if (!in)
        throw FormatError("short read from " + base + ".bin");
    return bytes;
}

void write_file(const std::string& path, const void* bytes, std::size_t count) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError("cannot open for writing: " + path);
    out.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(count));
    if (!out)
        throw FormatError("write failed: " + path);
}

void write_sidecar(const std::string& base, const json& header) {
    const std::string text = header.dump(2) + "\n";
    write_file(base + ".json", text.data(), text.size());
}

} // namespace

void save_raster(const Raster& raster, const std::string& path) {
    raster.validate();
    const std::string base = base_path(path);
    json header = {{"width", raster.width},
                   {"height", raster.height},
                   {"bands", raster.bands},
                   {"pixel_size_m", raster.pixel_size_m},
                   {"dtype", "f32"}};
    write_sidecar(base, header);
    write_file(base + ".bin", raster.data.data(), raster.data.size() * sizeof(float));
}

Raster load_raster(const std::string& path) {
    const std::string base = base_path(path);
    const json header = read_sidecar(base);
    Raster raster;
    try {
        raster.width = header.at("width").get<int>();
        raster.height = header.at("height").get<int>();
        raster.bands = header.at("bands").get<int>();
        raster.pixel_size_m = header.at("pixel_size_m").get<double>();
        if (header.at("dtype").get<std::string>() != "f32")
            throw FormatError("raster dtype must be f32 in " + base + ".json");
    } catch (const json::exception& e) {
        throw FormatError("bad raster header " + base + ".json: " + e.what());
    }
    if (raster.width < 1 || raster.height < 1 || raster.bands < 1)
        throw FormatError("bad raster dimensions in " + base + ".json");
    const auto bytes = read_payload(base, raster.size() * sizeof(float));
    raster.data.resize(raster.size());
    std::memcpy(raster.data.data(), bytes.data(), bytes.size());
    raster.validate();
    return raster;
}

void save_mask(const LabelMask& mask, const std::string& path, int cluster_k) {
    mask.validate(cluster_k);
    const std::string base = base_path(path);
    json header = {{"width", mask.width},
                   {"height", mask.height},
                   {"bands", 1},
                   {"pixel_size_m", 4.7},
                   {"dtype", "u8"},
                   {"kind", mask_kind_name(mask.kind)}};
    if (mask.kind == MaskKind::Cluster && cluster_k > 0) header["k"] = cluster_k;
    write_sidecar(base, header);
    write_file(base + ".bin", mask.data.data(), mask.data.size());
}

LabelMask load_mask(const std::string& path) {
    const std::string base = base_path(path);
    const json header = read_sidecar(base);
    LabelMask mask;
    int cluster_k = 0;
    try {
        mask.width = header.at("width").get<int>();
        mask.height = header.at("height").get<int>();
        mask.kind = mask_kind_from_name(header.at("kind").get<std::string>());
        if (header.at("dtype").get<std::string>() != "u8")
            throw FormatError("mask dtype must be u8 in " + base + ".json");
        cluster_k = header.value("k", 0);
    } catch (const json::exception& e) {
        throw FormatError("bad mask header " + base + ".json: " + e.what());
    }
    if (mask.width < 1 || mask.height < 1)
        throw FormatError("bad mask dimensions in " + base + ".json");
    mask.data = read_payload(base, mask.size());
    mask.validate(cluster_k);
    return mask;
}

} // namespace cropmine
