/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/core.cpp
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
#include "ifr/core.hpp"

#include <algorithm>
#include <cmath>

namespace ifr {

Image::Image(int width, int height, double fill)
    : width_(width), height_(height)
{
    if (width <= 0 || height <= 0)
        throw DimensionError("image dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * 3, fill);
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height)
{
    if (width <= 0 || height <= 0)
        throw DimensionError("mask dimensions must be positive");
    valid_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Mask::count() const noexcept
{
    return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

NormalMap::NormalMap(int width, int height) : width_(width), height_(height)
{
    if (width <= 0 || height <= 0)
        throw DimensionError("normal map dimensions must be positive");
    normals_.assign(static_cast<std::size_t>(width) * height, Vec3(0.0, 0.0, 1.0));
}

void LandmarkSet::validate() const
{
    const auto n = static_cast<int>(points.size());
    for (const auto& group : groups)
        for (int i : group)
            if (i < 0 || i >= n)
                throw Error("landmark group references missing point " + std::to_string(i));
    if (n < 4)
        throw Error("need at least 4 landmarks, got " + std::to_string(n));

    // Non-collinear: some point must leave the line through the two most
    // distant points by more than a tiny fraction of their separation.
    double best = 0.0;
    int ia = 0, ib = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (double d = (points[i] - points[j]).squaredNorm(); d > best)
                best = d, ia = i, ib = j;
    if (best <= 0.0)
        throw Error("landmarks are degenerate (all coincide)");
    const Vec2 axis = (points[ib] - points[ia]) / std::sqrt(best);
    double spread = 0.0;
    for (const auto& p : points) {
        const Vec2 d = p - points[ia];
        spread = std::max(spread, std::abs(axis.x() * d.y() - axis.y() * d.x()));
    }
    if (spread < 1e-6 * std::sqrt(best))
        throw Error("landmarks are collinear");
}

void FrameSequence::validate() const
{
    if (frames.size() < 2)
        throw Error("a frame sequence needs at least 2 frames, got " + std::to_string(frames.size()));
    const auto& first = frames.front().image_global;
    for (const auto& f : frames) {
        check_same_size(first, f.image_global);
        check_same_size(f.image_global, f.mask);
    }
}

void check_same_size(const Image& a, const Image& b)
{
    if (a.width() != b.width() || a.height() != b.height())
        throw DimensionError("image size mismatch: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                             " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

void check_same_size(const Image& a, const Mask& m)
{
    if (a.width() != m.width() || a.height() != m.height())
        throw DimensionError("image/mask size mismatch");
}

void check_same_size(const NormalMap& n, const Mask& m)
{
    if (n.width() != m.width() || n.height() != m.height())
        throw DimensionError("normal map/mask size mismatch");
}

void check_nonnegative(const Image& img)
{
    for (double v : img.data())
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error("image has negative or non-finite samples");
}

void check_normals(const NormalMap& n, const Mask& m, double tolerance)
{
    check_same_size(n, m);
    for (std::size_t p = 0; p < n.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        if (std::abs(n[p].norm() - 1.0) > tolerance)
            throw Error("normal map has a non-unit normal at pixel " + std::to_string(p));
        if (n[p].z() < -tolerance)
            throw Error("normal map has a back-facing normal at pixel " + std::to_string(p));
    }
}

Image apply_mask(const Image& img, const Mask& m)
{
    check_same_size(img, m);
    Image out = img;
    for (std::size_t p = 0; p < m.pixel_count(); ++p)
        if (!m.valid(p))
            out[3 * p] = out[3 * p + 1] = out[3 * p + 2] = 0.0;
    return out;
}

double masked_l1(const Image& a, const Image& b, const Mask& m)
{
    check_same_size(a, b);
    check_same_size(a, m);
    std::vector<double> terms;
    terms.reserve(a.data().size());
    for (std::size_t p = 0; p < m.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        for (int c = 0; c < 3; ++c)
            terms.push_back(std::abs(a[3 * p + c] - b[3 * p + c]));
    }
    if (terms.empty())
        return 0.0;
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

Mask mask_and(const Mask& a, const Mask& b)
{
    if (a.width() != b.width() || a.height() != b.height())
        throw DimensionError("mask size mismatch");
    Mask out(a.width(), a.height(), false);
    for (std::size_t p = 0; p < a.pixel_count(); ++p)
        out.set(p, a.valid(p) && b.valid(p));
    return out;
}

namespace {

std::uint16_t quantize_unit(double v)
{
    // round half up
    const double scaled = std::floor((v + 1.0) * 0.5 * 65535.0 + 0.5);
    return static_cast<std::uint16_t>(std::clamp(scaled, 0.0, 65535.0));
}

} // namespace

std::vector<Rgb16> encode_normals(const NormalMap& n, const Mask& m)
{
    check_normals(n, m);
    std::vector<Rgb16> out(n.pixel_count(), Rgb16{0, 0, 0});
    for (std::size_t p = 0; p < n.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        out[p] = {quantize_unit(n[p].x()), quantize_unit(n[p].y()), quantize_unit(n[p].z())};
    }
    return out;
}

std::vector<Rgb16> encode_normals(const NormalMap& n)
{
    return encode_normals(n, Mask(n.width(), n.height(), true));
}

std::pair<NormalMap, Mask> decode_normals(std::span<const Rgb16> encoded, int width, int height)
{
    NormalMap n(width, height);
    Mask m(width, height, true);
    if (encoded.size() != n.pixel_count())
        throw DimensionError("encoded normal buffer does not match raster size");
    for (std::size_t p = 0; p < encoded.size(); ++p) {
        const auto& e = encoded[p];
        if (e[0] == 0 && e[1] == 0 && e[2] == 0) {
            m.set(p, false);
            continue;
        }
        n[p] = Vec3(e[0], e[1], e[2]) / 65535.0 * 2.0 - Vec3::Ones();
    }
    return {std::move(n), std::move(m)};
}

double pairwise_sum(std::span<const double> values)
{
    constexpr std::size_t block = 64;
    if (values.size() <= block) {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} /* namespace ifr */
