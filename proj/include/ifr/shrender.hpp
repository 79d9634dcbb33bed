/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/shrender.hpp
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

#ifndef IFR_SHRENDER_HPP_
#define IFR_SHRENDER_HPP_

#include "ifr/core.hpp"

#include <vector>

namespace ifr {

/**
 * Lambertian-convolved real SH basis constants: the real SH normalisation
 * of each band times the clamped-cosine kernel weights pi, 2pi/3, pi/4.
 */
namespace sh_constants {
inline constexpr double band0 = 0.886227;   // pi * 0.282095
inline constexpr double band1 = 1.023328;   // 2pi/3 * 0.488603
inline constexpr double band2_xy = 0.858086; // pi/4 * 1.092548
inline constexpr double band2_z = 0.247708;  // pi/4 * 0.315392
inline constexpr double band2_xx = 0.429043; // pi/4 * 0.546274
} // namespace sh_constants

using ShBasisVector = Eigen::Matrix<double, 9, 1>;

/**
 * Basis order: [1, y, z, x, xy, yz, 3z^2 - 1, xz, x^2 - y^2], each scaled by
 * its constant above. Throws Error unless |n| = 1 within 1e-5.
 */
ShBasisVector sh_basis(const Vec3& n);

/// Same polynomial without the unit-length check; used by the solver on
/// unprojected iterates.
ShBasisVector sh_basis_unchecked(const Vec3& n);

/// d sh_basis / d n as a 9 x 3 matrix of the polynomial extension.
Eigen::Matrix<double, 9, 3> sh_basis_jacobian(const Vec3& n);

/// shading(p, c) = sum_k l(k, c) * sh_basis(n(p))[k]; zero on invalid pixels.
/// No clamping at zero.
Image shade(const NormalMap& n, const ShLighting& l, const Mask& m);

/// Local-illumination image A * shade(n, l).
Image render_local(const Image& albedo, const NormalMap& n, const ShLighting& l, const Mask& m);

/// I_l + R, clamped below at 0 (not above).
Image render_global(const Image& image_local, const Image& residual);

struct ShadeGradients
{
    /// Per pixel, row c holds d shading(c) / d n (3 x 3 per pixel).
    std::vector<Eigen::Matrix3d> d_normal;
    /// Per pixel d shading(c) / d l(k, c); identical for every channel.
    std::vector<ShBasisVector> d_lighting;
};

/// Analytic derivatives of shade(); invalid pixels get zeros.
ShadeGradients shade_gradients(const NormalMap& n, const ShLighting& l, const Mask& m);

} /* namespace ifr */

#endif /* IFR_SHRENDER_HPP_ */
