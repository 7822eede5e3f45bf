#include "curvesplat/edge_map.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

namespace curvesplat {

bool EdgeMap::in_range() const {
    for (const double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            return false;
        }
    }
    return true;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::vector<unsigned char> quantize(const EdgeMap& map) {
    std::vector<unsigned char> bytes(map.pixel_count());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::clamp(map.values[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    return bytes;
}

void save_png(const std::filesystem::path& path, const EdgeMap& map) {
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) {
        throw IoError("cannot open for writing: " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, map.width, map.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const auto bytes = quantize(map);
    for (int y = 0; y < map.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(bytes.data() + std::size_t(y) * map.width));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

EdgeMap load_png(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) {
        throw IoError("cannot open: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png read failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    // Normalize any input (palette, rgb, 16-bit, alpha) down to 8-bit gray.
    png_set_expand(png);
    if (png_get_bit_depth(png, info) == 16) {
        png_set_strip_16(png);
    }
    const png_byte color = png_get_color_type(png, info);
    if (color & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    EdgeMap map(static_cast<int>(png_get_image_width(png, info)),
                static_cast<int>(png_get_image_height(png, info)));
    std::vector<unsigned char> row(static_cast<std::size_t>(map.width));
    for (int y = 0; y < map.height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < map.width; ++x) {
            map.at(x, y) = row[x] / 255.0;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return map;
}

void save_pgm(const std::filesystem::path& path, const EdgeMap& map) {
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) {
        throw IoError("cannot open for writing: " + path.string());
    }
    const std::string header =
        "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
    const auto bytes = quantize(map);
    if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size() ||
        std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) {
        throw IoError("pgm write failed: " + path.string());
    }
}

EdgeMap load_pgm(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) {
        throw IoError("cannot open: " + path.string());
    }
    auto next_token = [&]() -> std::string {
        std::string tok;
        int ch;
        while ((ch = std::fgetc(f.get())) != EOF) {
            if (ch == '#') {
                while ((ch = std::fgetc(f.get())) != EOF && ch != '\n') {
                }
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
        return tok;
    };
    if (next_token() != "P5") {
        throw ParseError("pgm: not a P5 file: " + path.string());
    }
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
        throw ParseError("pgm: unsupported header in " + path.string());
    }
    EdgeMap map(w, h);
    std::vector<unsigned char> bytes(map.pixel_count());
    if (std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) {
        throw ParseError("pgm: truncated pixel data in " + path.string());
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        map.values[i] = static_cast<double>(bytes[i]) / maxval;
    }
    return map;
}

bool has_extension(const std::filesystem::path& path, const char* ext) {
    std::string e = path.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ext;
}

}  // namespace

void save_edge_map(const std::filesystem::path& path, const EdgeMap& map) {
    if (map.width <= 0 || map.height <= 0) {
        throw IoError("save_edge_map: empty image");
    }
    if (has_extension(path, ".pgm")) {
        save_pgm(path, map);
    } else {
        save_png(path, map);
    }
}

EdgeMap load_edge_map(const std::filesystem::path& path) {
    if (has_extension(path, ".pgm")) {
        return load_pgm(path);
    }
    return load_png(path);
}

}  // namespace curvesplat
