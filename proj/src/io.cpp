/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/io.cpp
 *
 * Copyright 2026 The ifr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "ifr/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ifr::io {

using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& bytes)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot rename " + tmp.string() + " to " + path.string());
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

struct MemoryReader
{
    const std::string* bytes;
    std::size_t offset = 0;
};

void png_append(png_structp png, png_bytep data, png_size_t length)
{
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), length);
}

void png_noop_flush(png_structp) {}

void png_consume(png_structp png, png_bytep data, png_size_t length)
{
    auto* in = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (in->offset + length > in->bytes->size())
        png_error(png, "truncated PNG stream");
    std::memcpy(data, in->bytes->data() + in->offset, length);
    in->offset += length;
}

// Encodes rows of already big-endian-packed samples.
std::string encode_png(const std::vector<png_byte>& packed, int width, int height, int bit_depth, int color_type,
                       int channels)
{
    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw Error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png_create_info_struct failed");
    }
    const std::size_t row_bytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(packed.data() + y * row_bytes);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("PNG encoding failed");
    }
    png_set_write_fn(png, &out, png_append, png_noop_flush);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

struct DecodedPng
{
    int width = 0;
    int height = 0;
    int bit_depth = 0;
    int color_type = 0;
    std::vector<png_byte> packed;
};

DecodedPng decode_png(const fs::path& path)
{
    const std::string bytes = read_file(path);
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
        throw Error(path.string() + " is not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw Error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png_create_info_struct failed");
    }
    MemoryReader reader{&bytes};
    DecodedPng result;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("PNG decoding failed for " + path.string());
    }
    png_set_read_fn(png, &reader, png_consume);
    png_read_info(png, info);
    result.width = static_cast<int>(png_get_image_width(png, info));
    result.height = static_cast<int>(png_get_image_height(png, info));
    result.bit_depth = png_get_bit_depth(png, info);
    result.color_type = png_get_color_type(png, info);
    if (result.color_type == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (result.bit_depth < 8)
        png_set_expand(png);
    png_read_update_info(png, info);
    result.bit_depth = png_get_bit_depth(png, info);
    result.color_type = png_get_color_type(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    result.packed.resize(row_bytes * result.height);
    rows.resize(result.height);
    for (int y = 0; y < result.height; ++y)
        rows[y] = result.packed.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return result;
}

std::uint16_t quantize01(double v)
{
    return static_cast<std::uint16_t>(std::floor(std::clamp(v, 0.0, 1.0) * 65535.0 + 0.5));
}

std::uint16_t quantize_signed(double v)
{
    return static_cast<std::uint16_t>(std::floor((std::clamp(v, -1.0, 1.0) + 1.0) * 0.5 * 65535.0 + 0.5));
}

} // namespace

void write_png_rgb16(const fs::path& path, std::span<const Rgb16> pixels, int width, int height)
{
    if (pixels.size() != static_cast<std::size_t>(width) * height)
        throw DimensionError("pixel buffer does not match raster size");
    std::vector<png_byte> packed(pixels.size() * 6);
    for (std::size_t p = 0; p < pixels.size(); ++p)
        for (int c = 0; c < 3; ++c) {
            packed[6 * p + 2 * c] = static_cast<png_byte>(pixels[p][c] >> 8);
            packed[6 * p + 2 * c + 1] = static_cast<png_byte>(pixels[p][c] & 0xff);
        }
    write_file_atomic(path, encode_png(packed, width, height, 16, PNG_COLOR_TYPE_RGB, 3));
}

std::vector<Rgb16> read_png_rgb16(const fs::path& path, int& width, int& height)
{
    const auto png = decode_png(path);
    if (png.bit_depth != 16 || png.color_type != PNG_COLOR_TYPE_RGB)
        throw Error(path.string() + ": expected a 16-bit RGB PNG");
    width = png.width;
    height = png.height;
    std::vector<Rgb16> out(static_cast<std::size_t>(width) * height);
    for (std::size_t p = 0; p < out.size(); ++p)
        for (int c = 0; c < 3; ++c)
            out[p][c] = static_cast<std::uint16_t>((png.packed[6 * p + 2 * c] << 8) | png.packed[6 * p + 2 * c + 1]);
    return out;
}

void write_png_gray8(const fs::path& path, std::span<const std::uint8_t> pixels, int width, int height)
{
    if (pixels.size() != static_cast<std::size_t>(width) * height)
        throw DimensionError("pixel buffer does not match raster size");
    std::vector<png_byte> packed(pixels.begin(), pixels.end());
    write_file_atomic(path, encode_png(packed, width, height, 8, PNG_COLOR_TYPE_GRAY, 1));
}

std::vector<std::uint8_t> read_png_gray8(const fs::path& path, int& width, int& height)
{
    const auto png = decode_png(path);
    if (png.bit_depth != 8 || png.color_type != PNG_COLOR_TYPE_GRAY)
        throw Error(path.string() + ": expected an 8-bit gray PNG");
    width = png.width;
    height = png.height;
    return {png.packed.begin(), png.packed.end()};
}

void write_image(const fs::path& path, const Image& img)
{
    std::vector<Rgb16> px(img.pixel_count());
    for (std::size_t p = 0; p < px.size(); ++p)
        for (int c = 0; c < 3; ++c)
            px[p][c] = quantize01(img[3 * p + c]);
    write_png_rgb16(path, px, img.width(), img.height());
}

Image read_image(const fs::path& path)
{
    int w = 0, h = 0;
    const auto px = read_png_rgb16(path, w, h);
    Image img(w, h);
    for (std::size_t p = 0; p < px.size(); ++p)
        for (int c = 0; c < 3; ++c)
            img[3 * p + c] = px[p][c] / 65535.0;
    return img;
}

void write_residual(const fs::path& path, const Image& r)
{
    std::vector<Rgb16> px(r.pixel_count());
    for (std::size_t p = 0; p < px.size(); ++p)
        for (int c = 0; c < 3; ++c)
            px[p][c] = quantize_signed(r[3 * p + c]);
    write_png_rgb16(path, px, r.width(), r.height());
}

Image read_residual(const fs::path& path)
{
    int w = 0, h = 0;
    const auto px = read_png_rgb16(path, w, h);
    Image img(w, h);
    for (std::size_t p = 0; p < px.size(); ++p)
        for (int c = 0; c < 3; ++c)
            img[3 * p + c] = px[p][c] / 65535.0 * 2.0 - 1.0;
    return img;
}

void write_normals(const fs::path& path, const NormalMap& n, const Mask& m)
{
    const auto px = encode_normals(n, m);
    write_png_rgb16(path, px, n.width(), n.height());
}

std::pair<NormalMap, Mask> read_normals(const fs::path& path)
{
    int w = 0, h = 0;
    const auto px = read_png_rgb16(path, w, h);
    auto [n, m] = decode_normals(px, w, h);
    for (std::size_t p = 0; p < n.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        Vec3& v = n[p];
        v.z() = std::max(0.0, v.z());
        const double len = v.norm();
        v = len > 0.0 ? Vec3(v / len) : Vec3(0.0, 0.0, 1.0);
    }
    return {std::move(n), std::move(m)};
}

void write_mask(const fs::path& path, const Mask& m)
{
    std::vector<std::uint8_t> px(m.pixel_count());
    for (std::size_t p = 0; p < px.size(); ++p)
        px[p] = m.valid(p) ? 255 : 0;
    write_png_gray8(path, px, m.width(), m.height());
}

Mask read_mask(const fs::path& path)
{
    int w = 0, h = 0;
    const auto px = read_png_gray8(path, w, h);
    Mask m(w, h, false);
    for (std::size_t p = 0; p < px.size(); ++p)
        m.set(p, px[p] != 0);
    return m;
}

json lighting_to_json(const ShLighting& l)
{
    json rows = json::array();
    for (int k = 0; k < 9; ++k)
        rows.push_back({l(k, 0), l(k, 1), l(k, 2)});
    return rows;
}

ShLighting lighting_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 9)
        throw Error("lighting JSON must be an array of 9 rows");
    ShLighting l;
    for (int k = 0; k < 9; ++k) {
        const auto& row = j[k];
        if (!row.is_array() || row.size() != 3)
            throw Error("lighting JSON row " + std::to_string(k) + " must hold 3 numbers");
        for (int c = 0; c < 3; ++c) {
            if (!row[c].is_number())
                throw Error("lighting JSON holds a non-numeric coefficient");
            l(k, c) = row[c].get<double>();
            if (!std::isfinite(l(k, c)))
                throw Error("lighting JSON holds a non-finite coefficient");
        }
    }
    return l;
}

void write_lighting(const fs::path& path, const ShLighting& l)
{
    write_file_atomic(path, lighting_to_json(l).dump(2) + "\n");
}

ShLighting read_lighting(const fs::path& path)
{
    try {
        return lighting_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(path.string() + ": malformed lighting JSON: " + e.what());
    }
}

json landmarks_to_json(const LandmarkSet& lm)
{
    json points = json::array();
    for (const auto& p : lm.points)
        points.push_back({p.x(), p.y()});
    return {{"points", points}, {"groups", lm.groups}};
}

LandmarkSet landmarks_from_json(const json& j)
{
    LandmarkSet lm;
    try {
        for (const auto& p : j.at("points"))
            lm.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        lm.groups = j.at("groups").get<std::vector<std::vector<int>>>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed landmark JSON: ") + e.what());
    }
    lm.validate();
    return lm;
}

void write_landmarks(const fs::path& path, const LandmarkSet& lm)
{
    write_file_atomic(path, landmarks_to_json(lm).dump(2) + "\n");
}

LandmarkSet read_landmarks(const fs::path& path)
{
    try {
        return landmarks_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

namespace {

std::string frame_prefix(int frame)
{
    std::ostringstream ss;
    ss << "frame_" << std::setw(3) << std::setfill('0') << frame;
    return ss.str();
}

} // namespace

fs::path write_sequence(const fs::path& dir, const FrameSequence& seq)
{
    seq.validate();
    fs::create_directories(dir);
    json frames = json::array();
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const auto& f = seq.frames[i];
        const std::string pre = frame_prefix(static_cast<int>(i));
        json entry = {{"image", pre + "_image.png"}, {"mask", pre + "_mask.png"}, {"landmarks", pre + "_landmarks.json"}};
        write_image(dir / (pre + "_image.png"), f.image_global);
        write_mask(dir / (pre + "_mask.png"), f.mask);
        write_landmarks(dir / (pre + "_landmarks.json"), f.landmarks);
        if (f.ground_truth) {
            const auto& gt = *f.ground_truth;
            write_image(dir / (pre + "_albedo.png"), gt.albedo);
            write_normals(dir / (pre + "_normal.png"), gt.normal, f.mask);
            write_lighting(dir / (pre + "_lighting.json"), gt.lighting);
            write_residual(dir / (pre + "_residual.png"), gt.residual);
            write_image(dir / (pre + "_image_local.png"), gt.image_local);
            entry["ground_truth"] = {{"albedo", pre + "_albedo.png"},     {"normal", pre + "_normal.png"},
                                     {"lighting", pre + "_lighting.json"}, {"residual", pre + "_residual.png"},
                                     {"image_local", pre + "_image_local.png"}};
        }
        frames.push_back(entry);
    }
    const json manifest = {{"identity", seq.identity},
                           {"width", seq.frames.front().image_global.width()},
                           {"height", seq.frames.front().image_global.height()},
                           {"frames", frames}};
    const fs::path path = dir / "manifest.json";
    write_file_atomic(path, manifest.dump(2) + "\n");
    return path;
}

FrameSequence read_sequence(const fs::path& manifest_path)
{
    if (!fs::exists(manifest_path))
        throw Error("manifest not found: " + manifest_path.string());
    const fs::path base = manifest_path.parent_path();
    FrameSequence seq;
    try {
        const json manifest = json::parse(read_file(manifest_path));
        seq.identity = manifest.at("identity").get<std::string>();
        for (const auto& entry : manifest.at("frames")) {
            FrameRecord f;
            f.image_global = read_image(base / entry.at("image").get<std::string>());
            f.mask = read_mask(base / entry.at("mask").get<std::string>());
            f.landmarks = read_landmarks(base / entry.at("landmarks").get<std::string>());
            if (entry.contains("ground_truth")) {
                const auto& g = entry["ground_truth"];
                GroundTruth gt;
                gt.albedo = read_image(base / g.at("albedo").get<std::string>());
                gt.normal = read_normals(base / g.at("normal").get<std::string>()).first;
                gt.lighting = read_lighting(base / g.at("lighting").get<std::string>());
                gt.residual = read_residual(base / g.at("residual").get<std::string>());
                gt.image_local = read_image(base / g.at("image_local").get<std::string>());
                f.ground_truth = std::move(gt);
            }
            seq.frames.push_back(std::move(f));
        }
    } catch (const json::exception& e) {
        throw Error(manifest_path.string() + ": malformed manifest: " + e.what());
    }
    seq.validate();
    return seq;
}

std::string decomposition_index_name(int frame)
{
    return frame_prefix(frame) + "_decomp.json";
}

fs::path write_decomposition(const fs::path& dir, int frame, const Decomposition& d, const Mask& m)
{
    fs::create_directories(dir);
    const std::string pre = frame_prefix(frame);
    write_image(dir / (pre + "_albedo.png"), d.albedo);
    write_normals(dir / (pre + "_normal.png"), d.normal, m);
    write_lighting(dir / (pre + "_lighting.json"), d.lighting);
    write_residual(dir / (pre + "_residual.png"), d.residual);
    write_mask(dir / (pre + "_mask.png"), m);
    const json index = {{"frame", frame},
                        {"albedo", pre + "_albedo.png"},
                        {"normal", pre + "_normal.png"},
                        {"lighting", pre + "_lighting.json"},
                        {"residual", pre + "_residual.png"},
                        {"mask", pre + "_mask.png"}};
    const fs::path path = dir / decomposition_index_name(frame);
    write_file_atomic(path, index.dump(2) + "\n");
    return path;
}

LoadedDecomposition read_decomposition(const fs::path& index_path)
{
    if (!fs::exists(index_path))
        throw Error("decomposition index not found: " + index_path.string());
    const fs::path base = index_path.parent_path();
    LoadedDecomposition out;
    try {
        const json index = json::parse(read_file(index_path));
        out.decomposition.albedo = read_image(base / index.at("albedo").get<std::string>());
        out.decomposition.normal = read_normals(base / index.at("normal").get<std::string>()).first;
        out.decomposition.lighting = read_lighting(base / index.at("lighting").get<std::string>());
        out.decomposition.residual = read_residual(base / index.at("residual").get<std::string>());
        out.mask = read_mask(base / index.at("mask").get<std::string>());
    } catch (const json::exception& e) {
        throw Error(index_path.string() + ": malformed decomposition index: " + e.what());
    }
    check_same_size(out.decomposition.albedo, out.mask);
    check_same_size(out.decomposition.residual, out.mask);
    check_same_size(out.decomposition.normal, out.mask);
    return out;
}

} /* namespace ifr::io */
