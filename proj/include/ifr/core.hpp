/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/core.hpp
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

#ifndef IFR_CORE_HPP_
#define IFR_CORE_HPP_

#include "Eigen/Core"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifr {

/**
 * Base class of all errors raised by the library. The CLI maps it to a
 * nonzero exit code plus one machine-readable error line.
 */
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Raised when two rasters that must agree in size do not.
class DimensionError : public Error
{
public:
    using Error::Error;
};

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/**
 * A W x H x 3 raster of linear intensities, stored row-major with
 * interleaved channels. Pixel (x, y) has x growing right and y growing
 * down; its center is at integer coordinates.
 *
 * Colour images are nonnegative; residual images live in [-1, 1]. The
 * type does not enforce the sign, see check_nonnegative().
 */
class Image
{
public:
    Image() = default;
    Image(int width, int height, double fill = 0.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const noexcept { return data_.empty(); }

    double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() & noexcept { return data_; }
    std::span<const double> data() const& noexcept { return data_; }
    std::span<const double> data() && = delete;

    std::size_t index(int x, int y, int c) const noexcept
    {
        return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
    }

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// Per-pixel validity gate. 1 = valid, 0 = invalid.
class Mask
{
public:
    Mask() = default;
    Mask(int width, int height, bool fill = true);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return valid_.size(); }

    bool valid(int x, int y) const { return valid_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    bool valid(std::size_t p) const { return valid_[p] != 0; }
    void set(int x, int y, bool v) { valid_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
    void set(std::size_t p, bool v) { valid_[p] = v ? 1 : 0; }

    std::size_t count() const noexcept;

    bool operator==(const Mask&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> valid_;
};

/**
 * Field of unit surface normals in a right-handed camera frame: n_x right,
 * n_y up, n_z toward the camera. Note the y axis is flipped relative to
 * pixel rows.
 */
class NormalMap
{
public:
    NormalMap() = default;
    /// Fills with the camera-facing normal (0, 0, 1).
    NormalMap(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return normals_.size(); }

    Vec3& at(int x, int y) { return normals_[static_cast<std::size_t>(y) * width_ + x]; }
    const Vec3& at(int x, int y) const { return normals_[static_cast<std::size_t>(y) * width_ + x]; }
    Vec3& operator[](std::size_t p) { return normals_[p]; }
    const Vec3& operator[](std::size_t p) const { return normals_[p]; }

    /// Flat view of all components, 3 per pixel.
    std::span<double> components() & noexcept
    {
        return normals_.empty() ? std::span<double>{} : std::span<double>{normals_.data()->data(), normals_.size() * 3};
    }
    std::span<const double> components() const& noexcept
    {
        return normals_.empty() ? std::span<const double>{}
                                : std::span<const double>{normals_.data()->data(), normals_.size() * 3};
    }
    std::span<const double> components() && = delete;

    bool operator==(const NormalMap&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Vec3> normals_;
};

/// 9 x 3 second-order SH coefficients; row = basis index, column = R, G, B.
using ShLighting = Eigen::Matrix<double, 9, 3>;

/**
 * 2D landmarks in pixel coordinates, grouped into polylines. A group whose
 * last index repeats its first is a closed polyline.
 */
struct LandmarkSet
{
    std::vector<Vec2> points;
    std::vector<std::vector<int>> groups;

    /// Throws Error if a group index is out of range or the points do not
    /// span a 2D hull of at least 4 points.
    void validate() const;
};

struct GroundTruth
{
    Image albedo;
    NormalMap normal;
    ShLighting lighting = ShLighting::Zero();
    Image residual;
    Image image_local;
};

struct FrameRecord
{
    Image image_global;
    Mask mask;
    LandmarkSet landmarks;
    std::optional<GroundTruth> ground_truth;
};

struct FrameSequence
{
    std::string identity;
    std::vector<FrameRecord> frames;

    /// Throws Error for fewer than 2 frames or inconsistent raster sizes.
    void validate() const;
};

void check_same_size(const Image& a, const Image& b);
void check_same_size(const Image& a, const Mask& m);
void check_same_size(const NormalMap& n, const Mask& m);

/// Throws Error if any sample is negative or non-finite.
void check_nonnegative(const Image& img);

/// Throws Error if a valid normal is not unit length (1e-5) or faces away.
void check_normals(const NormalMap& n, const Mask& m, double tolerance = 1e-5);

/// Zeroes invalid pixels.
Image apply_mask(const Image& img, const Mask& m);

/**
 * Mean absolute difference over valid pixel-channels; 0 when no pixel is
 * valid.
 */
double masked_l1(const Image& a, const Image& b, const Mask& m);

/// Mask that is valid where both inputs are valid.
Mask mask_and(const Mask& a, const Mask& b);

using Rgb16 = std::array<std::uint16_t, 3>;

/**
 * Quantizes unit normals to 16 bits per component:
 * v = round_half_up((n + 1) / 2 * 65535). Pixels invalid in the mask
 * encode (0, 0, 0).
 */
std::vector<Rgb16> encode_normals(const NormalMap& n, const Mask& m);
std::vector<Rgb16> encode_normals(const NormalMap& n);

/**
 * Inverse of encode_normals(). All-zero pixels are reported invalid in the
 * returned mask and decode to (0, 0, 1). Other pixels are the exact
 * inverse of the code, v / 65535 * 2 - 1, and are not renormalized.
 */
std::pair<NormalMap, Mask> decode_normals(std::span<const Rgb16> encoded, int width, int height);

/// Cascade (pairwise) summation; result does not depend on thread layout.
double pairwise_sum(std::span<const double> values);

} /* namespace ifr */

#endif /* IFR_CORE_HPP_ */
