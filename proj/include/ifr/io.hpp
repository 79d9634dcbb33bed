/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/io.hpp
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
#pragma once

#ifndef IFR_IO_HPP_
#define IFR_IO_HPP_

#include "ifr/core.hpp"
#include "ifr/decomposition.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ifr::io {

namespace fs = std::filesystem;

/// Writes bytes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

// Raw 16-bit RGB and 8-bit gray PNG. No gamma chunk is written or honoured.
void write_png_rgb16(const fs::path& path, std::span<const Rgb16> pixels, int width, int height);
std::vector<Rgb16> read_png_rgb16(const fs::path& path, int& width, int& height);
void write_png_gray8(const fs::path& path, std::span<const std::uint8_t> pixels, int width, int height);
std::vector<std::uint8_t> read_png_gray8(const fs::path& path, int& width, int& height);

/// Linear colour image, v = round(clamp(x, 0, 1) * 65535).
void write_image(const fs::path& path, const Image& img);
Image read_image(const fs::path& path);

/// Residual image with affine encoding v = round((clamp(r, -1, 1) + 1) / 2 * 65535).
void write_residual(const fs::path& path, const Image& r);
Image read_residual(const fs::path& path);

void write_normals(const fs::path& path, const NormalMap& n, const Mask& m);
/// Decodes and renormalizes valid pixels onto the camera-facing hemisphere.
std::pair<NormalMap, Mask> read_normals(const fs::path& path);

/// 8-bit gray: 0 = invalid, 255 = valid. Any nonzero value reads as valid.
void write_mask(const fs::path& path, const Mask& m);
Mask read_mask(const fs::path& path);

nlohmann::json lighting_to_json(const ShLighting& l);
ShLighting lighting_from_json(const nlohmann::json& j);
void write_lighting(const fs::path& path, const ShLighting& l);
ShLighting read_lighting(const fs::path& path);

nlohmann::json landmarks_to_json(const LandmarkSet& lm);
LandmarkSet landmarks_from_json(const nlohmann::json& j);
void write_landmarks(const fs::path& path, const LandmarkSet& lm);
LandmarkSet read_landmarks(const fs::path& path);

/**
 * Writes one sequence into `dir`: per-frame component files named
 * frame_NNN_<component>.png/.json plus manifest.json. Returns the manifest
 * path.
 */
fs::path write_sequence(const fs::path& dir, const FrameSequence& seq);

/// Loads a manifest and every file it references (paths relative to it).
FrameSequence read_sequence(const fs::path& manifest);

/// Writes frame_NNN_{albedo,normal,residual,mask}.png, lighting.json and a
/// frame_NNN_decomp.json index. Returns the index path.
fs::path write_decomposition(const fs::path& dir, int frame, const Decomposition& d, const Mask& m);

struct LoadedDecomposition
{
    Decomposition decomposition;
    Mask mask;
};

LoadedDecomposition read_decomposition(const fs::path& index);

std::string decomposition_index_name(int frame);

} /* namespace ifr::io */

#endif /* IFR_IO_HPP_ */
