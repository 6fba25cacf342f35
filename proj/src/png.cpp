#include "cropmine/png.hpp"

#include "cropmine/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cropmine {

namespace {

// Minimal PNG encoder. The image payload goes into a zlib stream made of
// stored (uncompressed) deflate blocks, which keeps the writer dependency
// free while producing files any PNG reader accepts.

std::uint32_t crc32_update(std::uint32_t crc, const std::uint8_t* bytes,
                           std::size_t count) {
    static std::uint32_t table[256];
    static bool ready = false;
    if (!ready) {
        for (std::uint32_t n = 0; n < 256; ++n) {
            std::uint32_t c = n;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[n] = c;
        }
        ready = true;
    }
    for (std::size_t i = 0; i < count; ++i)
        crc = table[(crc ^ bytes[i]) & 0xffu] ^ (crc >> 8);
    return crc;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& body) {
    put_u32_be(out, static_cast<std::uint32_t>(body.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), body.begin(), body.end());
    std::uint32_t crc = crc32_update(0xffffffffu, out.data() + crc_start,
                                     out.size() - crc_start) ^ 0xffffffffu;
    put_u32_be(out, crc);
}

std::vector<std::uint8_t> zlib_stored(const std::vector<std::uint8_t>& raw) {
    std::vector<std::uint8_t> z;
    z.push_back(0x78); // CM=8, CINFO=7
    z.push_back(0x01); // FCHECK makes the header a multiple of 31
    std::size_t offset = 0;
    do {
        const std::size_t chunk = std::min<std::size_t>(65535, raw.size() - offset);
        const bool final_block = offset + chunk == raw.size();
        z.push_back(final_block ? 0x01 : 0x00); // BFINAL, BTYPE=00 (stored)
        const auto len = static_cast<std::uint16_t>(chunk);
        z.push_back(static_cast<std::uint8_t>(len & 0xff));
        z.push_back(static_cast<std::uint8_t>(len >> 8));
        z.push_back(static_cast<std::uint8_t>(~len & 0xff));
        z.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + offset, raw.begin() + offset + chunk);
        offset += chunk;
    } while (offset < raw.size());
    // Adler-32 of the uncompressed data.
    std::uint32_t a = 1, b = 0;
    for (std::uint8_t byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    put_u32_be(z, (b << 16) | a);
    return z;
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<Rgb>& pixels) {
    // Scanlines with filter byte 0 (None).
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(height) * (1 + 3 * width));
    for (int row = 0; row < height; ++row) {
        raw.push_back(0);
        for (int col = 0; col < width; ++col) {
            const Rgb& px = pixels[static_cast<std::size_t>(row) * width + col];
            raw.push_back(px.r);
            raw.push_back(px.g);
            raw.push_back(px.b);
        }
    }

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type: truecolor
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter
    ihdr.push_back(0); // interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", zlib_stored(raw));
    append_chunk(out, "IEND", {});

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file)
        throw FormatError("cannot open for writing: " + path);
    file.write(reinterpret_cast<const char*>(out.data()),
               static_cast<std::streamsize>(out.size()));
    if (!file)
        throw FormatError("write failed: " + path);
}

Rgb hsv_to_rgb(double hue_deg, double s, double v) {
    const double h = hue_deg / 60.0;
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s);
    const double q = v * (1 - s * f);
    const double t = v * (1 - s * (1 - f));
    double r = 0, g = 0, b = 0;
    switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    case 5: r = v; g = p; b = q; break;
    }
    auto to_byte = [](double x) {
        return static_cast<std::uint8_t>(std::lround(x * 255.0));
    };
    return {to_byte(r), to_byte(g), to_byte(b)};
}

} // namespace

Rgb cluster_color(int index, int k) {
    if (k < 1) k = 1;
    return hsv_to_rgb(360.0 * index / k, 0.65, 0.95);
}

void render_png(const LabelMask& layer, const std::string& path, int cluster_k) {
    layer.validate(0);
    std::vector<Rgb> pixels(layer.size());
    if (layer.kind == MaskKind::Cluster) {
        int k = cluster_k;
        if (k <= 0)
            k = 1 + *std::max_element(layer.data.begin(), layer.data.end());
        for (std::size_t i = 0; i < layer.size(); ++i)
            pixels[i] = cluster_color(layer.data[i], k);
    } else {
        for (std::size_t i = 0; i < layer.size(); ++i) {
            switch (layer.data[i]) {
            case kNonCropland: pixels[i] = kPaletteNonCropland; break;
            case kCropland: pixels[i] = kPaletteCropland; break;
            default: pixels[i] = kPaletteUnknown; break;
            }
        }
    }
    write_png_rgb(path, layer.width, layer.height, pixels);
}

void render_band_png(const Raster& raster, int band, const std::string& path) {
    raster.validate();
    if (band < 0 || band >= raster.bands)
        throw ConfigError("band index out of range");
    float lo = raster.at(band, 0, 0), hi = lo;
    for (int r = 0; r < raster.height; ++r)
        for (int c = 0; c < raster.width; ++c) {
            const float v = raster.at(band, r, c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const float span = hi > lo ? hi - lo : 1.0f;
    std::vector<Rgb> pixels(raster.plane());
    for (int r = 0; r < raster.height; ++r)
        for (int c = 0; c < raster.width; ++c) {
            const auto g = static_cast<std::uint8_t>(
                std::lround(255.0f * (raster.at(band, r, c) - lo) / span));
            pixels[static_cast<std::size_t>(r) * raster.width + c] = {g, g, g};
        }
    write_png_rgb(path, raster.width, raster.height, pixels);
}

} // namespace cropmine
