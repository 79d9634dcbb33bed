/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/shrender.cpp
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
#include "ifr/shrender.hpp"

#include <algorithm>
#include <cmath>

namespace ifr {

using namespace sh_constants;

ShBasisVector sh_basis_unchecked(const Vec3& n)
{
    const double x = n.x(), y = n.y(), z = n.z();
    ShBasisVector b;
    b << band0, band1 * y, band1 * z, band1 * x, band2_xy * x * y, band2_xy * y * z, band2_z * (3.0 * z * z - 1.0),
        band2_xy * x * z, band2_xx * (x * x - y * y);
    return b;
}

ShBasisVector sh_basis(const Vec3& n)
{
    if (!(std::abs(n.norm() - 1.0) <= 1e-5))
        throw Error("sh_basis requires a unit normal");
    return sh_basis_unchecked(n);
}

Eigen::Matrix<double, 9, 3> sh_basis_jacobian(const Vec3& n)
{
    const double x = n.x(), y = n.y(), z = n.z();
    Eigen::Matrix<double, 9, 3> j = Eigen::Matrix<double, 9, 3>::Zero();
    j(1, 1) = band1;
    j(2, 2) = band1;
    j(3, 0) = band1;
    j(4, 0) = band2_xy * y;
    j(4, 1) = band2_xy * x;
    j(5, 1) = band2_xy * z;
    j(5, 2) = band2_xy * y;
    j(6, 2) = band2_z * 6.0 * z;
    j(7, 0) = band2_xy * z;
    j(7, 2) = band2_xy * x;
    j(8, 0) = band2_xx * 2.0 * x;
    j(8, 1) = -band2_xx * 2.0 * y;
    return j;
}

Image shade(const NormalMap& n, const ShLighting& l, const Mask& m)
{
    check_same_size(n, m);
    Image out(n.width(), n.height());
    for (std::size_t p = 0; p < n.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        const Eigen::RowVector3d s = sh_basis(n[p]).transpose() * l;
        for (int c = 0; c < 3; ++c)
            out[3 * p + c] = s[c];
    }
    return out;
}

Image render_local(const Image& albedo, const NormalMap& n, const ShLighting& l, const Mask& m)
{
    check_same_size(albedo, m);
    Image out = shade(n, l, m);
    for (std::size_t i = 0; i < out.data().size(); ++i)
        out[i] *= albedo[i];
    return out;
}

Image render_global(const Image& image_local, const Image& residual)
{
    check_same_size(image_local, residual);
    Image out = image_local;
    for (std::size_t i = 0; i < out.data().size(); ++i)
        out[i] = std::max(0.0, image_local[i] + residual[i]);
    return out;
}

ShadeGradients shade_gradients(const NormalMap& n, const ShLighting& l, const Mask& m)
{
    check_same_size(n, m);
    ShadeGradients g;
    g.d_normal.assign(n.pixel_count(), Eigen::Matrix3d::Zero());
    g.d_lighting.assign(n.pixel_count(), ShBasisVector::Zero());
    for (std::size_t p = 0; p < n.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        g.d_lighting[p] = sh_basis(n[p]);
        g.d_normal[p] = l.transpose() * sh_basis_jacobian(n[p]);
    }
    return g;
}

} /* namespace ifr */
