#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cropmine/error.hpp"
#include "cropmine/png.hpp"
#include "cropmine/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

using namespace cropmine;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "cropmine_raster_test";
    fs::create_directories(dir);
    return dir;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Decoder for this project's own PNGs (stored deflate blocks only).
struct DecodedPng {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb; // 3 bytes per pixel
};

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

DecodedPng decode_png(const fs::path& path) {
    const auto bytes = read_bytes(path);
    REQUIRE(bytes.size() > 45);
    DecodedPng png;
    png.width = static_cast<int>(be32(bytes.data() + 16));
    png.height = static_cast<int>(be32(bytes.data() + 20));

    // Collect IDAT payloads.
    std::vector<std::uint8_t> zdata;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = be32(bytes.data() + pos);
        const std::string type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
        if (type == "IDAT")
            zdata.insert(zdata.end(), bytes.begin() + pos + 8,
                         bytes.begin() + pos + 8 + len);
        pos += 12 + len;
    }
    REQUIRE(zdata.size() > 6);

    // Stored deflate blocks after the 2-byte zlib header.
    std::vector<std::uint8_t> raw;
    std::size_t z = 2;
    bool final_block = false;
    while (!final_block) {
        final_block = zdata[z] & 1;
        REQUIRE((zdata[z] >> 1) == 0); // stored
        const std::size_t len = zdata[z + 1] | (std::size_t(zdata[z + 2]) << 8);
        raw.insert(raw.end(), zdata.begin() + z + 5, zdata.begin() + z + 5 + len);
        z += 5 + len;
    }

    const std::size_t stride = 1 + 3 * static_cast<std::size_t>(png.width);
    REQUIRE(raw.size() == stride * static_cast<std::size_t>(png.height));
    for (int row = 0; row < png.height; ++row) {
        REQUIRE(raw[row * stride] == 0); // filter: none
        png.rgb.insert(png.rgb.end(), raw.begin() + row * stride + 1,
                       raw.begin() + (row + 1) * stride);
    }
    return png;
}

} // namespace

TEST_CASE("raster load matches a hand-written file") {
    const auto dir = temp_dir();
    const auto base = (dir / "tiny").string();
    {
        std::ofstream json(base + ".json");
        json << R"({"width":2,"height":2,"bands":1,"pixel_size_m":4.7,"dtype":"f32"})";
    }
    const float payload[4] = {0.f, 1.f, 2.f, 3.f};
    {
        std::ofstream bin(base + ".bin", std::ios::binary);
        bin.write(reinterpret_cast<const char*>(payload), sizeof(payload));
    }
    const Raster r = load_raster(base);
    CHECK(r.width == 2);
    CHECK(r.height == 2);
    CHECK(r.bands == 1);
    CHECK(r.data == std::vector<float>{0.f, 1.f, 2.f, 3.f});
}

TEST_CASE("raster round-trip is bit exact") {
    const auto dir = temp_dir();
    Raster r;
    r.width = 3;
    r.height = 2;
    r.bands = 2;
    r.pixel_size_m = 4.7;
    r.data = {0.5f, -1.25f, 3e-8f, 7.0f, 0.0f, 2.5f,
              1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
    const auto base = (dir / "rt").string();
    save_raster(r, base);
    const Raster back = load_raster(base + ".bin"); // extension is stripped
    CHECK(back.width == r.width);
    CHECK(back.height == r.height);
    CHECK(back.bands == r.bands);
    CHECK(back.data == r.data);
}

TEST_CASE("round-trip law holds for random rasters and masks") {
    const auto dir = temp_dir();
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;
    auto next = [&state]() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return state;
    };
    for (int trial = 0; trial < 10; ++trial) {
        Raster r;
        r.width = 1 + static_cast<int>(next() % 17);
        r.height = 1 + static_cast<int>(next() % 13);
        r.bands = 1 + static_cast<int>(next() % 4);
        r.data.resize(r.size());
        for (auto& v : r.data)
            v = static_cast<float>(static_cast<double>(next() % 100000) / 777.0 - 64.0);
        const auto base = (dir / ("rand_r" + std::to_string(trial))).string();
        save_raster(r, base);
        CHECK(load_raster(base).data == r.data);

        LabelMask m = make_mask(r.width, r.height, MaskKind::Extended);
        for (auto& code : m.data) code = static_cast<std::uint8_t>(next() % 3);
        const auto mask_base = (dir / ("rand_m" + std::to_string(trial))).string();
        save_mask(m, mask_base);
        const LabelMask back = load_mask(mask_base);
        CHECK(back.data == m.data);
        CHECK(back.kind == m.kind);
    }
}

TEST_CASE("truncated payload is a size-mismatch error") {
    const auto dir = temp_dir();
    const auto base = (dir / "trunc").string();
    {
        std::ofstream json(base + ".json");
        json << R"({"width":2,"height":2,"bands":1,"pixel_size_m":4.7,"dtype":"f32"})";
    }
    const float payload[3] = {0.f, 1.f, 2.f}; // 3 of 4 values
    {
        std::ofstream bin(base + ".bin", std::ios::binary);
        bin.write(reinterpret_cast<const char*>(payload), sizeof(payload));
    }
    CHECK_THROWS_AS(load_raster(base), FormatError);
}

TEST_CASE("missing files are reported distinctly") {
    const auto dir = temp_dir();
    CHECK_THROWS_WITH_AS(load_raster((dir / "nope").string()),
                         doctest::Contains("missing sidecar"), FormatError);
    const auto base = (dir / "headeronly").string();
    {
        std::ofstream json(base + ".json");
        json << R"({"width":1,"height":1,"bands":1,"pixel_size_m":4.7,"dtype":"f32"})";
    }
    CHECK_THROWS_WITH_AS(load_raster(base), doctest::Contains("missing payload"),
                         FormatError);
}

TEST_CASE("non-finite rasters are rejected before write and after load") {
    const auto dir = temp_dir();
    Raster r;
    r.width = 1;
    r.height = 1;
    r.bands = 1;
    r.data = {std::numeric_limits<float>::quiet_NaN()};
    CHECK_THROWS_AS(save_raster(r, (dir / "nan").string()), FormatError);

    const auto base = (dir / "inf").string();
    {
        std::ofstream json(base + ".json");
        json << R"({"width":1,"height":1,"bands":1,"pixel_size_m":4.7,"dtype":"f32"})";
    }
    const float inf = std::numeric_limits<float>::infinity();
    {
        std::ofstream bin(base + ".bin", std::ios::binary);
        bin.write(reinterpret_cast<const char*>(&inf), sizeof(inf));
    }
    CHECK_THROWS_WITH_AS(load_raster(base), doctest::Contains("non-finite"),
                         FormatError);
}

TEST_CASE("payload size follows width*height*bands*4 exactly") {
    const auto dir = temp_dir();
    Raster r;
    r.width = 64;
    r.height = 64;
    r.bands = 5;
    r.data.assign(r.size(), 0.25f);
    const auto base = (dir / "sized").string();
    save_raster(r, base);
    CHECK(fs::file_size(base + ".bin") == 64ull * 64 * 5 * 4);
    // One full quad at the native scale.
    CHECK(4096ull * 4096 * 5 * 4 == 335544320ull);
}

TEST_CASE("mask alphabet is enforced per kind") {
    const auto dir = temp_dir();
    LabelMask sparse = make_mask(2, 1, MaskKind::SparseHuman);
    sparse.data = {0, 3}; // 3 is outside {0,1,2}
    CHECK_THROWS_AS(save_mask(sparse, (dir / "bad_sparse").string()), FormatError);

    LabelMask weak = make_mask(2, 1, MaskKind::Weak);
    weak.data = {1, 0}; // weak masks are total, 0 not allowed
    CHECK_THROWS_AS(save_mask(weak, (dir / "bad_weak").string()), FormatError);

    // The same codes on disk must fail at load time too.
    const auto base = (dir / "bad_load").string();
    {
        std::ofstream json(base + ".json");
        json << R"({"width":2,"height":1,"bands":1,"dtype":"u8","kind":"weak"})";
    }
    {
        std::ofstream bin(base + ".bin", std::ios::binary);
        const std::uint8_t codes[2] = {1, 0};
        bin.write(reinterpret_cast<const char*>(codes), 2);
    }
    CHECK_THROWS_AS(load_mask(base), FormatError);
}

TEST_CASE("extended mask round-trip") {
    const auto dir = temp_dir();
    LabelMask m = make_mask(2, 2, MaskKind::Extended);
    m.data = {0, 1, 2, 0};
    const auto base = (dir / "ext").string();
    save_mask(m, base);
    const LabelMask back = load_mask(base);
    CHECK(back.kind == MaskKind::Extended);
    CHECK(back.data == m.data);
}

TEST_CASE("cluster masks keep k in the sidecar and validate against it") {
    const auto dir = temp_dir();
    LabelMask m = make_mask(2, 2, MaskKind::Cluster);
    m.data = {0, 1, 2, 3};
    const auto base = (dir / "clu").string();
    save_mask(m, base, 4);
    CHECK(load_mask(base).data == m.data);
    CHECK_THROWS_AS(save_mask(m, (dir / "clu_bad").string(), 3), FormatError);
}

TEST_CASE("render_png uses the fixed label palette") {
    const auto dir = temp_dir();

    LabelMask crop = make_mask(1, 1, MaskKind::Truth, kCropland);
    const auto crop_png = dir / "crop.png";
    render_png(crop, crop_png.string());
    const DecodedPng one = decode_png(crop_png);
    CHECK(one.width == 1);
    CHECK(one.height == 1);
    CHECK(one.rgb == std::vector<std::uint8_t>{34, 139, 34});

    LabelMask unknown = make_mask(2, 2, MaskKind::SparseHuman, kUnknown);
    const auto dark_png = dir / "dark.png";
    render_png(unknown, dark_png.string());
    const DecodedPng dark = decode_png(dark_png);
    CHECK(dark.width == 2);
    CHECK(dark.height == 2);
    CHECK(dark.rgb == std::vector<std::uint8_t>(12, 0));

    LabelMask mixed = make_mask(2, 1, MaskKind::Truth, kNonCropland);
    mixed.data = {1, 2};
    const auto mix_png = dir / "mix.png";
    render_png(mixed, mix_png.string());
    const DecodedPng mix = decode_png(mix_png);
    CHECK(mix.rgb == std::vector<std::uint8_t>{180, 180, 180, 34, 139, 34});
}

TEST_CASE("render_png preserves dimensions for wide masks and cluster maps") {
    const auto dir = temp_dir();
    LabelMask clusters = make_mask(5, 3, MaskKind::Cluster);
    for (std::size_t i = 0; i < clusters.size(); ++i)
        clusters.data[i] = static_cast<std::uint8_t>(i % 4);
    const auto path = dir / "clusters.png";
    render_png(clusters, path.string(), 4);
    const DecodedPng png = decode_png(path);
    CHECK(png.width == 5);
    CHECK(png.height == 3);
    // Distinct clusters get distinct hues.
    const Rgb c0 = cluster_color(0, 4);
    const Rgb c1 = cluster_color(1, 4);
    CHECK(png.rgb[0] == c0.r);
    CHECK(png.rgb[3] == c1.r);
    CHECK(c0 != c1);
}
