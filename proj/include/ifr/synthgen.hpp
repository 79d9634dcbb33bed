/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/synthgen.hpp
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

#ifndef IFR_SYNTHGEN_HPP_
#define IFR_SYNTHGEN_HPP_

#include "ifr/core.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace ifr::synth {

inline constexpr int deformation_count = 20;
inline constexpr int texture_style_count = 50;

/// Deterministic splitmix64 sampler. The bit stream is fixed here rather
/// than by the standard library's distributions.
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    int uniform_int(int lo, int hi_exclusive);

private:
    std::uint64_t state_;
};

/// Derives an independent seed for a (stream, index) pair.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

struct GaussianBump
{
    Vec2 center;  // canonical pixel coordinates
    double sigma = 1.0;
    double amplitude = 0.0;
};

/**
 * Identity geometry in canonical (unposed) pixel coordinates: an
 * ellipsoidal cap plus fixed facial bumps, and a 20-field deformation
 * basis whose weighted sum displaces the height.
 */
struct ShapeModel
{
    int width = 0;
    int height = 0;
    Vec2 center;
    Vec2 radii;
    double depth = 0.0;
    /// Mask boundary as a fraction of the ellipse radii.
    double mask_extent = 0.9;
    std::vector<GaussianBump> features;
    std::array<GaussianBump, deformation_count> deform_basis;
    std::array<double, deformation_count> deform_weights{};
    /// Base (undeformed) heightfield sampled at pixel centres.
    std::vector<double> heightfield;

    /// Height and gradient (d/dx, d/dy in pixel axes) at a canonical point.
    double height_at(const Vec2& q, const std::array<double, deformation_count>& weights) const;
    Vec2 gradient_at(const Vec2& q, const std::array<double, deformation_count>& weights) const;
    /// Inside the face mask (normalised ellipse radius < mask_extent).
    bool in_mask(const Vec2& q) const;
    /// Inside the ellipse support of the cap.
    bool in_support(const Vec2& q) const;
};

/// Procedural albedo modulation; style_id selects stripes, patches or noise.
struct TextureStyle
{
    int style_id = 0;
    int kind = 0;
    std::vector<double> params;

    static TextureStyle from_id(int style_id);
    /// Multiplicative modulation in roughly [-0.2, 0.2] at normalised (u, v).
    double modulation(double u, double v) const;
};

struct Identity
{
    ShapeModel shape;
    TextureStyle style;
    Vec3 skin;
    Image albedo;
    Mask mask;
    std::vector<Vec2> anchor_points;
    std::vector<std::vector<int>> anchor_groups;

    /// Albedo at a canonical point (continuous; the raster samples it).
    Vec3 albedo_at(const Vec2& q) const;
};

Identity make_identity(std::uint64_t seed, int width = 64, int height = 64);

struct Pose
{
    double theta = 0.0;  // radians, rotation in pixel axes
    Vec2 translation = Vec2::Zero();
    double scale = 1.0;
};

struct PoseLimits
{
    double max_abs_theta = 30.0 * 3.14159265358979323846 / 180.0;
    double min_scale = 0.8;
    double max_scale = 1.25;
};

/// Raised when a pose or deformation leaves the valid, camera-facing range.
class InvalidPose : public Error
{
public:
    using Error::Error;
};

struct PosedFrame
{
    NormalMap normal;
    LandmarkSet landmarks;
    Mask mask;
    /// Posed heightfield (pixels) over the whole raster.
    std::vector<double> heightfield;
    /// Pixels on the surface support (occluders for ray marching).
    std::vector<std::uint8_t> support;
    /// Canonical point seen by each target pixel.
    std::vector<Vec2> canonical;
};

Vec2 apply_pose(const Pose& pose, const Vec2& q, int width, int height);
Vec2 invert_pose(const Pose& pose, const Vec2& p, int width, int height);

/**
 * Deforms the heightfield by sum_k w_k basis_k, applies the in-plane
 * similarity and recomputes unit normals from the transformed gradient.
 * Throws InvalidPose outside `limits`, for landmarks leaving the raster or
 * for normals with n_z below 0.05.
 */
PosedFrame pose_frame(const Identity& id, const Pose& pose, const std::array<double, deformation_count>& weights,
                      const PoseLimits& limits = {});

struct SceneLight
{
    ShLighting sh = ShLighting::Zero();
    Vec3 key_direction = Vec3(0.0, 0.0, 1.0);
};

/// Normalised channel mean of (l[3], l[1], l[2]), or (0, 0, 1) below 1e-3.
Vec3 key_direction(const ShLighting& l);

/// Minimum over channels and hemisphere directions of the shading.
double min_hemisphere_shading(const ShLighting& l);

/// Rejection-samples lighting until min_hemisphere_shading >= 0.02.
SceneLight sample_lighting(std::uint64_t seed);

struct ResidualModel
{
    double shadow_strength = 0.6;
    double highlight_strength = 0.15;
    double highlight_exponent = 32.0;
};

/// Cast-shadow mask by ray marching the posed heightfield toward the key
/// light; only pixels facing the light can be cast-shadowed.
std::vector<std::uint8_t> cast_shadows(const PosedFrame& frame, const Vec3& key_direction);

/**
 * Global-illumination residual: -shadow_strength * I_l where cast-shadowed,
 * a white Blinn-Phong highlight elsewhere; clipped to [-1, 1].
 */
Image make_residual(const PosedFrame& frame, const Image& albedo, const SceneLight& light, const Image& image_local,
                    const ResidualModel& model = {});

struct SequenceOptions
{
    int width = 64;
    int height = 64;
    double max_rotation_deg = 20.0;
    double max_translation = 3.0;  // pixels at 64x64, scaled with width
    double min_scale = 0.9;
    double max_scale = 1.1;
    /// Deformation weights are uniform in [-deform_scale, deform_scale].
    double deform_scale = 0.3;
};

/// One identity, n_frames posed and lit frames with full ground truth.
FrameSequence gen_sequence(std::uint64_t seed, int n_frames, const SequenceOptions& options = {});

} /* namespace ifr::synth */

#endif /* IFR_SYNTHGEN_HPP_ */
