/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/align.hpp
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

#ifndef IFR_ALIGN_HPP_
#define IFR_ALIGN_HPP_

#include "ifr/core.hpp"

#include "Eigen/Core"

#include <array>
#include <cstdint>
#include <vector>

namespace ifr {

/// Vertex indices of one triangle, counter-clockwise in pixel coordinates.
using Triangle = std::array<int, 3>;

/**
 * Bowyer-Watson Delaunay triangulation. Duplicate points are an error; the
 * result never references the internal super-triangle.
 */
std::vector<Triangle> delaunay_triangulation(const std::vector<Vec2>& points);

/**
 * Dense backward map from a target raster into a source raster, built
 * from a piecewise-affine interpolation of landmark correspondences.
 *
 * For every target pixel: the source coordinate it samples, whether the
 * mapping is usable, and the in-plane rotation angle (radians, about the
 * view axis, in the y-up normal frame) that carries source normals into
 * the target frame.
 */
struct WarpField
{
    int width = 0;
    int height = 0;
    std::vector<Vec2> source;
    std::vector<std::uint8_t> valid;
    /// Pixel lies in a triangle spanned by landmarks only (no raster
    /// anchor), i.e. the mapping is driven by correspondences there.
    std::vector<std::uint8_t> interior;
    std::vector<double> theta;
    /// Index into `triangles`, or -1 when the pixel is not covered.
    std::vector<int> triangle;
    std::vector<Triangle> triangles;

    static WarpField identity(int width, int height);
};

/**
 * Anti-aliased 1-pixel polylines through each landmark group: a pixel gets
 * max(0, 1 - distance to the nearest segment). Replicated to 3 channels.
 * Throws Error for landmarks outside the raster.
 */
Image rasterize_contour(const LandmarkSet& lm, int width, int height);

/**
 * Backward warp from frame i (landmarks c_i) to frame j (landmarks c_j):
 * triangulate c_j plus the raster corners and edge midpoints (which map to
 * themselves) and interpolate each triangle's affine map.
 *
 * Throws Error on mismatched landmark sets or collinear configurations.
 */
WarpField estimate_warp(const LandmarkSet& c_i, const LandmarkSet& c_j, int width, int height);

/// Up to four bilinear taps of one target pixel.
struct BilinearTap
{
    std::array<std::uint32_t, 4> index{};
    std::array<double, 4> weight{};
    int count = 0;
};

/**
 * Bilinear taps per target pixel. A pixel is usable when the warp is valid
 * there and every tap with nonzero weight lands on a valid source pixel;
 * unusable pixels get count = 0.
 */
std::vector<BilinearTap> warp_taps(const WarpField& wf, const Mask& source_mask);

struct WarpedImage
{
    Image image;
    Mask mask;
};

struct WarpedNormals
{
    NormalMap normal;
    Mask mask;
};

/// Bilinear resampling with no colour change. `m` is the source mask.
WarpedImage warp_albedo(const Image& a, const WarpField& wf, const Mask& m);

/// Bilinear resampling, view-axis rotation by theta, renormalisation.
WarpedNormals warp_normal(const NormalMap& n, const WarpField& wf, const Mask& m);

/// Pixels where the alignment losses are evaluated: target-valid, warp
/// usable and inside the landmark hull.
Mask alignment_mask(const WarpField& wf, const Mask& warped_mask, const Mask& target_mask);

/**
 * Albedo consistency from frame i into frame j: masked L1 between a_j and
 * the warped a_i over alignment_mask().
 */
double align_loss_albedo(const Image& a_i, const Mask& m_i, const Image& a_j, const Mask& m_j,
                         const LandmarkSet& c_i, const LandmarkSet& c_j);
double align_loss_albedo(const Image& a_i, const Mask& m_i, const Image& a_j, const Mask& m_j,
                         const WarpField& wf);

/// Normal consistency: mean absolute component difference after warp_normal().
double align_loss_normal(const NormalMap& n_i, const Mask& m_i, const NormalMap& n_j, const Mask& m_j,
                         const LandmarkSet& c_i, const LandmarkSet& c_j);
double align_loss_normal(const NormalMap& n_i, const Mask& m_i, const NormalMap& n_j, const Mask& m_j,
                         const WarpField& wf);

} /* namespace ifr */

#endif /* IFR_ALIGN_HPP_ */
