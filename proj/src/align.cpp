/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/align.cpp
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
#include "ifr/align.hpp"

#include "Eigen/Dense"

#include <algorithm>
#include <cmath>

namespace ifr {

WarpField WarpField::identity(int width, int height)
{
    WarpField wf;
    wf.width = width;
    wf.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    wf.source.resize(n);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            wf.source[static_cast<std::size_t>(y) * width + x] = Vec2(x, y);
    wf.valid.assign(n, 1);
    wf.interior.assign(n, 1);
    wf.theta.assign(n, 0.0);
    wf.triangle.assign(n, -1);
    return wf;
}

namespace {

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b)
{
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0)
        return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

void check_in_raster(const LandmarkSet& lm, int width, int height)
{
    for (const auto& p : lm.points)
        if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width - 1 && p.y() <= height - 1))
            throw Error("landmark (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                        ") lies outside the raster");
}

double snap(double v)
{
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

} // namespace

Image rasterize_contour(const LandmarkSet& lm, int width, int height)
{
    for (const auto& group : lm.groups)
        for (int i : group)
            if (i < 0 || i >= static_cast<int>(lm.points.size()))
                throw Error("landmark group references a missing point");
    check_in_raster(lm, width, height);

    Image out(width, height);
    for (const auto& group : lm.groups) {
        if (group.empty())
            continue;
        const std::size_t segments = group.size() == 1 ? 1 : group.size() - 1;
        for (std::size_t s = 0; s < segments; ++s) {
            const Vec2& a = lm.points[group[s]];
            const Vec2& b = lm.points[group[std::min(s + 1, group.size() - 1)]];
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()))) - 1);
            const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()))) + 1);
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()))) - 1);
            const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()))) + 1);
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double v = std::max(0.0, 1.0 - segment_distance(Vec2(x, y), a, b));
                    for (int c = 0; c < 3; ++c)
                        out.at(x, y, c) = std::max(out.at(x, y, c), v);
                }
        }
    }
    return out;
}

WarpField estimate_warp(const LandmarkSet& c_i, const LandmarkSet& c_j, int width, int height)
{
    if (c_i.points.size() != c_j.points.size())
        throw Error("landmark sets have different point counts");
    if (c_i.groups != c_j.groups)
        throw Error("landmark sets have different group structure");
    c_i.validate();
    c_j.validate();
    if (width < 2 || height < 2)
        throw DimensionError("warp raster must be at least 2x2");

    const int n_landmarks = static_cast<int>(c_j.points.size());
    std::vector<Vec2> target = c_j.points;
    std::vector<Vec2> source = c_i.points;

    // Raster anchors map to themselves. They sit slightly outside the
    // raster (corners by 0.5 px, edge midpoints by 1.5 px) so no three are
    // collinear and the hull covers every pixel.
    const double w1 = width - 1, h1 = height - 1;
    const std::array<Vec2, 8> anchors = {Vec2(-0.5, -0.5),      Vec2(w1 + 0.5, -0.5),     Vec2(-0.5, h1 + 0.5),
                                         Vec2(w1 + 0.5, h1 + 0.5), Vec2(0.5 * w1, -1.5),    Vec2(0.5 * w1, h1 + 1.5),
                                         Vec2(-1.5, 0.5 * h1),    Vec2(w1 + 1.5, 0.5 * h1)};
    for (const auto& a : anchors) {
        const bool clash = std::any_of(target.begin(), target.begin() + n_landmarks,
                                       [&](const Vec2& p) { return (p - a).squaredNorm() < 1e-12; });
        if (clash)
            continue;
        target.push_back(a);
        source.push_back(a);
    }

    WarpField wf;
    wf.width = width;
    wf.height = height;
    const std::size_t n_pixels = static_cast<std::size_t>(width) * height;
    wf.source.assign(n_pixels, Vec2::Zero());
    wf.valid.assign(n_pixels, 0);
    wf.interior.assign(n_pixels, 0);
    wf.theta.assign(n_pixels, 0.0);
    wf.triangle.assign(n_pixels, -1);
    wf.triangles = delaunay_triangulation(target);

    for (int t = 0; t < static_cast<int>(wf.triangles.size()); ++t) {
        const auto& tri = wf.triangles[t];
        const Vec2& t0 = target[tri[0]];
        const Vec2& t1 = target[tri[1]];
        const Vec2& t2 = target[tri[2]];
        Eigen::Matrix2d tm;
        tm.col(0) = t1 - t0;
        tm.col(1) = t2 - t0;
        const double det = tm.determinant();
        if (std::abs(det) < 1e-12)
            continue;

        Eigen::Matrix2d linear;
        Vec2 offset;
        const bool fixed = source[tri[0]] == t0 && source[tri[1]] == t1 && source[tri[2]] == t2;
        if (fixed) {
            linear.setIdentity();
            offset.setZero();
        } else {
            Eigen::Matrix2d sm;
            sm.col(0) = source[tri[1]] - source[tri[0]];
            sm.col(1) = source[tri[2]] - source[tri[0]];
            linear = sm * tm.inverse();
            offset = source[tri[0]] - linear * t0;
        }
        // Rotation of the closest orthogonal factor (2D polar decomposition)
        // measured in pixel axes; with y flipped for normals the angle of the
        // source-from-target map is the target-from-source normal rotation.
        const double theta =
            fixed ? 0.0 : std::atan2(linear(1, 0) - linear(0, 1), linear(0, 0) + linear(1, 1));
        const bool interior = tri[0] < n_landmarks && tri[1] < n_landmarks && tri[2] < n_landmarks;

        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({t0.x(), t1.x(), t2.x()}))));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({t0.x(), t1.x(), t2.x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({t0.y(), t1.y(), t2.y()}))));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({t0.y(), t1.y(), t2.y()}))));
        const Eigen::Matrix2d tm_inv = tm.inverse();
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * width + x;
                if (wf.triangle[p] >= 0)
                    continue;
                const Vec2 bary = tm_inv * (Vec2(x, y) - t0);
                constexpr double tol = -1e-9;
                if (bary.x() < tol || bary.y() < tol || bary.x() + bary.y() > 1.0 - tol)
                    continue;
                wf.triangle[p] = t;
                wf.theta[p] = theta;
                wf.interior[p] = interior ? 1 : 0;
                Vec2 s = fixed ? Vec2(x, y) : Vec2(linear * Vec2(x, y) + offset);
                s = Vec2(snap(s.x()), snap(s.y()));
                wf.source[p] = s;
                wf.valid[p] = (s.x() >= 0.0 && s.y() >= 0.0 && s.x() <= w1 && s.y() <= h1) ? 1 : 0;
            }
    }
    return wf;
}

std::vector<BilinearTap> warp_taps(const WarpField& wf, const Mask& source_mask)
{
    if (source_mask.width() != wf.width || source_mask.height() != wf.height)
        throw DimensionError("warp field and source mask differ in size");
    std::vector<BilinearTap> taps(wf.source.size());
    for (std::size_t p = 0; p < wf.source.size(); ++p) {
        if (!wf.valid[p])
            continue;
        const Vec2& s = wf.source[p];
        const int x0 = std::min(static_cast<int>(std::floor(s.x())), wf.width - 1);
        const int y0 = std::min(static_cast<int>(std::floor(s.y())), wf.height - 1);
        const double fx = s.x() - x0, fy = s.y() - y0;
        BilinearTap tap;
        bool usable = true;
        const std::array<int, 4> dx = {0, 1, 0, 1};
        const std::array<int, 4> dy = {0, 0, 1, 1};
        const std::array<double, 4> w = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
        for (int k = 0; k < 4; ++k) {
            if (w[k] == 0.0)
                continue;
            const int xx = x0 + dx[k], yy = y0 + dy[k];
            if (xx >= wf.width || yy >= wf.height || !source_mask.valid(xx, yy)) {
                usable = false;
                break;
            }
            tap.index[tap.count] = static_cast<std::uint32_t>(yy * wf.width + xx);
            tap.weight[tap.count] = w[k];
            ++tap.count;
        }
        if (usable)
            taps[p] = tap;
    }
    return taps;
}

WarpedImage warp_albedo(const Image& a, const WarpField& wf, const Mask& m)
{
    check_same_size(a, m);
    const auto taps = warp_taps(wf, m);
    WarpedImage out{Image(wf.width, wf.height), Mask(wf.width, wf.height, false)};
    for (std::size_t p = 0; p < taps.size(); ++p) {
        const auto& tap = taps[p];
        if (tap.count == 0)
            continue;
        out.mask.set(p, true);
        for (int c = 0; c < 3; ++c) {
            double v = 0.0;
            for (int k = 0; k < tap.count; ++k)
                v += tap.weight[k] * a[3 * tap.index[k] + c];
            out.image[3 * p + c] = v;
        }
    }
    return out;
}

WarpedNormals warp_normal(const NormalMap& n, const WarpField& wf, const Mask& m)
{
    check_same_size(n, m);
    const auto taps = warp_taps(wf, m);
    WarpedNormals out{NormalMap(wf.width, wf.height), Mask(wf.width, wf.height, false)};
    for (std::size_t p = 0; p < taps.size(); ++p) {
        const auto& tap = taps[p];
        if (tap.count == 0)
            continue;
        Vec3 v = Vec3::Zero();
        for (int k = 0; k < tap.count; ++k)
            v += tap.weight[k] * n[tap.index[k]];
        const double c = std::cos(wf.theta[p]), s = std::sin(wf.theta[p]);
        const Vec3 r(c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z());
        const double len = r.norm();
        if (len < 1e-12)
            continue;
        out.normal[p] = r / len;
        out.mask.set(p, true);
    }
    return out;
}

Mask alignment_mask(const WarpField& wf, const Mask& warped_mask, const Mask& target_mask)
{
    Mask out = mask_and(warped_mask, target_mask);
    for (std::size_t p = 0; p < out.pixel_count(); ++p)
        if (!wf.interior[p])
            out.set(p, false);
    return out;
}

double align_loss_albedo(const Image& a_i, const Mask& m_i, const Image& a_j, const Mask& m_j, const WarpField& wf)
{
    check_same_size(a_i, a_j);
    check_same_size(a_j, m_j);
    const auto warped = warp_albedo(a_i, wf, m_i);
    return masked_l1(a_j, warped.image, alignment_mask(wf, warped.mask, m_j));
}

double align_loss_albedo(const Image& a_i, const Mask& m_i, const Image& a_j, const Mask& m_j,
                         const LandmarkSet& c_i, const LandmarkSet& c_j)
{
    return align_loss_albedo(a_i, m_i, a_j, m_j, estimate_warp(c_i, c_j, a_j.width(), a_j.height()));
}

double align_loss_normal(const NormalMap& n_i, const Mask& m_i, const NormalMap& n_j, const Mask& m_j,
                         const WarpField& wf)
{
    check_same_size(n_j, m_j);
    if (n_i.width() != n_j.width() || n_i.height() != n_j.height())
        throw DimensionError("normal map size mismatch");
    const auto warped = warp_normal(n_i, wf, m_i);
    const Mask mask = alignment_mask(wf, warped.mask, m_j);
    std::vector<double> terms;
    for (std::size_t p = 0; p < mask.pixel_count(); ++p)
        if (mask.valid(p))
            for (int c = 0; c < 3; ++c)
                terms.push_back(std::abs(n_j[p][c] - warped.normal[p][c]));
    return terms.empty() ? 0.0 : pairwise_sum(terms) / static_cast<double>(terms.size());
}

double align_loss_normal(const NormalMap& n_i, const Mask& m_i, const NormalMap& n_j, const Mask& m_j,
                         const LandmarkSet& c_i, const LandmarkSet& c_j)
{
    return align_loss_normal(n_i, m_i, n_j, m_j, estimate_warp(c_i, c_j, n_j.width(), n_j.height()));
}

} /* namespace ifr */
