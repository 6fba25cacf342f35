#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace cropmine {

// Label codes shared by every categorical mask.
inline constexpr std::uint8_t kUnknown = 0;
inline constexpr std::uint8_t kNonCropland = 1;
inline constexpr std::uint8_t kCropland = 2;

/// Multi-band image grid. Values are 32-bit float reflectance, stored
/// row-major and band-sequential (band 0 full plane, then band 1, ...).
struct Raster {
    int width = 0;
    int height = 0;
    int bands = 1;
    double pixel_size_m = 4.7;
    std::vector<float> data;

    std::size_t plane() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::size_t size() const { return plane() * static_cast<std::size_t>(bands); }

    float at(int band, int row, int col) const {
        return data[static_cast<std::size_t>(band) * plane() +
                    static_cast<std::size_t>(row) * width + col];
    }
    float& at(int band, int row, int col) {
        return data[static_cast<std::size_t>(band) * plane() +
                    static_cast<std::size_t>(row) * width + col];
    }

    /// Throws FormatError if dimensions, payload size or finiteness fail.
    void validate() const;
};

enum class MaskKind { SparseHuman, Weak, Extended, Predicted, Truth, Cluster };

const char* mask_kind_name(MaskKind kind);
MaskKind mask_kind_from_name(const std::string& name);

/// Single-band categorical layer. Alphabet depends on kind:
///   sparse_human / extended / truth  {0, 1, 2}
///   weak / predicted                 {1, 2}   (total masks)
///   cluster                          [0, K)
struct LabelMask {
    int width = 0;
    int height = 0;
    MaskKind kind = MaskKind::Truth;
    std::vector<std::uint8_t> data;

    std::size_t size() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::uint8_t at(int row, int col) const {
        return data[static_cast<std::size_t>(row) * width + col];
    }
    std::uint8_t& at(int row, int col) {
        return data[static_cast<std::size_t>(row) * width + col];
    }

    /// Alphabet and dimension check. cluster_k = 0 skips the upper bound.
    void validate(int cluster_k = 0) const;
};

LabelMask make_mask(int width, int height, MaskKind kind,
                    std::uint8_t fill = kUnknown);

// On-disk interchange format: <base>.bin holds the raw little-endian payload,
// <base>.json the header. A path given with a .bin or .json extension is
// resolved to its base.

void save_raster(const Raster& raster, const std::string& path);
Raster load_raster(const std::string& path);

/// cluster_k is recorded in the sidecar for cluster masks (0 = unknown).
void save_mask(const LabelMask& mask, const std::string& path, int cluster_k = 0);
LabelMask load_mask(const std::string& path);

} // namespace cropmine
