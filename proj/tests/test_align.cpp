/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: tests/test_align.cpp
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
#include "ifr/synthgen.hpp"

#include "test_support.hpp"

#include "doctest.h"

#include <numbers>

using namespace ifr;

namespace {

LandmarkSet face_landmarks(std::uint64_t seed = 3)
{
    const auto id = synth::make_identity(seed);
    return {id.anchor_points, id.anchor_groups};
}

// Similarity about the raster centre of a 64 x 64 raster.
Vec2 similarity(const Vec2& p, double theta, double scale, const Vec2& t)
{
    const Vec2 c(31.5, 31.5);
    const Eigen::Matrix2d r{{std::cos(theta), -std::sin(theta)}, {std::sin(theta), std::cos(theta)}};
    return scale * r * (p - c) + c + t;
}

LandmarkSet transformed(const LandmarkSet& lm, double theta, double scale, const Vec2& t)
{
    LandmarkSet out = lm;
    for (auto& p : out.points)
        p = similarity(p, theta, scale, t);
    return out;
}

double circumcircle_test(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    // > 0 when d lies strictly inside the circumcircle of the ccw triangle abc
    const double ax = a.x() - d.x(), ay = a.y() - d.y();
    const double bx = b.x() - d.x(), by = b.y() - d.y();
    const double cx = c.x() - d.x(), cy = c.y() - d.y();
    const double det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay) +
                       (cx * cx + cy * cy) * (ax * by - bx * ay);
    const double orient = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    return orient > 0 ? det : -det;
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

} // namespace

TEST_CASE("Delaunay triangulation")
{
    synth::Rng rng(21);
    std::vector<Vec2> pts = {Vec2(0, 0), Vec2(10, 0), Vec2(10, 10), Vec2(0, 10)};
    for (int i = 0; i < 40; ++i)
        pts.emplace_back(rng.uniform(0.5, 9.5), rng.uniform(0.5, 9.5));
    const auto tris = delaunay_triangulation(pts);

    // Euler: a triangulation of n points with h on the hull has 2n - 2 - h triangles
    CHECK(tris.size() == 2 * pts.size() - 2 - 4);
    double area = 0.0;
    for (const auto& t : tris) {
        area += std::abs(signed_area(pts[t[0]], pts[t[1]], pts[t[2]]));
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (static_cast<int>(k) == t[0] || static_cast<int>(k) == t[1] || static_cast<int>(k) == t[2])
                continue;
            CHECK(circumcircle_test(pts[t[0]], pts[t[1]], pts[t[2]], pts[k]) <= 1e-9);
        }
    }
    CHECK(area == doctest::Approx(100.0).epsilon(1e-12));

    CHECK_THROWS_AS(delaunay_triangulation({Vec2(0, 0), Vec2(1, 0)}), Error);
    CHECK_THROWS_AS(delaunay_triangulation({Vec2(0, 0), Vec2(1, 0), Vec2(0, 1), Vec2(1, 0)}), Error);
}

TEST_CASE("rasterize_contour")
{
    LandmarkSet lm;
    lm.points = {Vec2(3, 10), Vec2(20, 10), Vec2(5, 5), Vec2(6, 20)};

    SUBCASE("no groups draw nothing")
    {
        const Image img = rasterize_contour(lm, 32, 32);
        for (double v : img.data())
            CHECK(v == 0.0);
    }
    SUBCASE("horizontal segment stays within rows 9 to 11")
    {
        lm.groups = {{0, 1}};
        const Image img = rasterize_contour(lm, 32, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                const double v = img.at(x, y, 0);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                CHECK(img.at(x, y, 1) == v);
                CHECK(img.at(x, y, 2) == v);
                if (y < 9 || y > 11)
                    CHECK(v == 0.0);
            }
        for (int x = 3; x <= 20; ++x)
            CHECK(img.at(x, 10, 0) == 1.0);
    }
    SUBCASE("anti-aliased falloff")
    {
        LandmarkSet off;
        off.points = {Vec2(2, 10.25), Vec2(12, 10.25), Vec2(0, 0), Vec2(0, 1)};
        off.groups = {{0, 1}};
        const Image img = rasterize_contour(off, 16, 16);
        CHECK(img.at(5, 10, 0) == doctest::Approx(0.75));
        CHECK(img.at(5, 11, 0) == doctest::Approx(0.25));
    }
    SUBCASE("out-of-bounds landmarks")
    {
        lm.points[1] = Vec2(40, 10);
        lm.groups = {{0, 1}};
        CHECK_THROWS_AS(rasterize_contour(lm, 32, 32), Error);
    }
}

TEST_CASE("estimate_warp identity")
{
    const LandmarkSet lm = face_landmarks();
    const WarpField wf = estimate_warp(lm, lm, 64, 64);
    int interior = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * 64 + x;
            CHECK(wf.valid[p]);
            CHECK(wf.source[p] == Vec2(x, y));
            CHECK(wf.theta[p] == 0.0);
            interior += wf.interior[p];
        }
    CHECK(interior > 500);
}

TEST_CASE("estimate_warp recovers similarity transforms")
{
    const LandmarkSet ci = face_landmarks();
    struct Case
    {
        double theta, scale;
        Vec2 t;
    };
    for (const Case& k : {Case{0.0, 1.0, Vec2(5, 0)}, Case{20.0 * std::numbers::pi / 180.0, 1.0, Vec2(0, 0)},
                          Case{-0.2, 1.1, Vec2(1.5, -2)}, Case{0.1, 0.9, Vec2(-1, 2.5)}}) {
        const LandmarkSet cj = transformed(ci, k.theta, k.scale, k.t);
        const WarpField wf = estimate_warp(ci, cj, 64, 64);
        double worst_src = 0.0, worst_theta = 0.0;
        int interior = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * 64 + x;
                if (!wf.interior[p])
                    continue;
                ++interior;
                // invert the similarity: source = S^-1(target)
                const Vec2 c(31.5, 31.5);
                const Eigen::Matrix2d r{{std::cos(k.theta), std::sin(k.theta)}, {-std::sin(k.theta), std::cos(k.theta)}};
                const Vec2 expect = r * (Vec2(x, y) - c - k.t) / k.scale + c;
                worst_src = std::max(worst_src, (wf.source[p] - expect).norm());
                // a pixel-axis rotation by +theta is a rotation by -theta for y-up normals
                worst_theta = std::max(worst_theta, std::abs(wf.theta[p] + k.theta));
            }
        CHECK(interior > 500);
        CHECK(worst_src < 0.1);
        CHECK(worst_theta < 1e-3);
    }
}

TEST_CASE("estimate_warp translation is exact on the interior")
{
    const LandmarkSet ci = face_landmarks();
    const WarpField wf = estimate_warp(ci, transformed(ci, 0.0, 1.0, Vec2(5, 0)), 64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * 64 + x;
            if (!wf.interior[p])
                continue;
            CHECK(wf.source[p] == Vec2(x - 5, y));
            CHECK(wf.theta[p] == doctest::Approx(0.0).epsilon(1e-12));
        }
}

TEST_CASE("estimate_warp theta is constant per triangle and sources stay on the raster")
{
    const auto seq = synth::gen_sequence(22, 2);
    const WarpField wf = estimate_warp(seq.frames[0].landmarks, seq.frames[1].landmarks, 64, 64);
    std::vector<double> per_triangle(wf.triangles.size(), std::nan(""));
    for (std::size_t p = 0; p < wf.source.size(); ++p) {
        if (wf.triangle[p] < 0)
            continue;
        double& t = per_triangle[wf.triangle[p]];
        if (std::isnan(t))
            t = wf.theta[p];
        CHECK(wf.theta[p] == t);
        if (wf.valid[p]) {
            CHECK(wf.source[p].x() >= 0.0);
            CHECK(wf.source[p].y() >= 0.0);
            CHECK(wf.source[p].x() <= 63.0);
            CHECK(wf.source[p].y() <= 63.0);
        }
    }
}

TEST_CASE("estimate_warp errors")
{
    const LandmarkSet ci = face_landmarks();
    LandmarkSet fewer = ci;
    fewer.points.pop_back();
    fewer.groups.clear();
    LandmarkSet plain = ci;
    plain.groups.clear();
    CHECK_THROWS_AS(estimate_warp(plain, fewer, 64, 64), Error);

    LandmarkSet line;
    line.points = {Vec2(10, 10), Vec2(20, 20), Vec2(30, 30), Vec2(40, 40)};
    CHECK_THROWS_AS(estimate_warp(line, line, 64, 64), Error);
}

TEST_CASE("warp_albedo")
{
    synth::Rng rng(23);
    const LandmarkSet ci = face_landmarks();
    const Image a = test::random_image(rng, 64, 64);
    const Mask m = test::random_mask(rng, 64, 64, 0.9);

    SUBCASE("identity warp")
    {
        const auto out = warp_albedo(a, estimate_warp(ci, ci, 64, 64), m);
        CHECK(out.mask == m);
        CHECK(out.image == apply_mask(a, m));
    }
    SUBCASE("constant image stays constant")
    {
        const auto out = warp_albedo(Image(64, 64, 0.37), estimate_warp(ci, transformed(ci, 0.2, 1.05, Vec2(1, -1)), 64, 64),
                                     Mask(64, 64));
        for (std::size_t p = 0; p < out.mask.pixel_count(); ++p)
            if (out.mask.valid(p))
                for (int c = 0; c < 3; ++c)
                    CHECK(out.image[3 * p + c] == doctest::Approx(0.37).epsilon(1e-12));
    }
    SUBCASE("integer translation copies pixels")
    {
        const WarpField wf = estimate_warp(ci, transformed(ci, 0.0, 1.0, Vec2(3, -2)), 64, 64);
        const auto out = warp_albedo(a, wf, Mask(64, 64));
        int copied = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                if (!wf.interior[static_cast<std::size_t>(y) * 64 + x])
                    continue;
                for (int c = 0; c < 3; ++c)
                    CHECK(out.image.at(x, y, c) == a.at(x - 3, y + 2, c));
                ++copied;
            }
        CHECK(copied > 500);
    }
    SUBCASE("commutes with masking")
    {
        const WarpField wf = estimate_warp(ci, transformed(ci, 0.15, 1.0, Vec2(0.5, 0.25)), 64, 64);
        const auto plain = warp_albedo(a, wf, m);
        const auto masked = warp_albedo(apply_mask(a, m), wf, m);
        CHECK(plain.mask == masked.mask);
        CHECK(masked_l1(plain.image, masked.image, plain.mask) == 0.0);
    }
    SUBCASE("output mask excludes taps on invalid source pixels")
    {
        const WarpField wf = estimate_warp(ci, transformed(ci, 0.0, 1.0, Vec2(0.5, 0)), 64, 64);
        const auto out = warp_albedo(a, wf, m);
        for (std::size_t p = 0; p < out.mask.pixel_count(); ++p) {
            if (!out.mask.valid(p) || !wf.interior[p])
                continue;
            const Vec2 s = wf.source[p];
            const int x0 = static_cast<int>(std::floor(s.x())), y0 = static_cast<int>(std::floor(s.y()));
            CHECK(m.valid(x0, y0));
            CHECK(m.valid(x0 + 1, y0));
        }
    }
    SUBCASE("dimension mismatch")
    {
        CHECK_THROWS_AS(warp_albedo(Image(32, 32), WarpField::identity(64, 64), Mask(32, 32)), DimensionError);
    }
}

TEST_CASE("warp_normal")
{
    synth::Rng rng(24);
    const LandmarkSet ci = face_landmarks();
    const NormalMap n = test::random_normals(rng, 64, 64);
    const Mask m(64, 64);

    SUBCASE("identity warp")
    {
        const auto out = warp_normal(n, estimate_warp(ci, ci, 64, 64), m);
        for (std::size_t p = 0; p < n.pixel_count(); ++p)
            CHECK((out.normal[p] - n[p]).norm() < 1e-12);
    }
    SUBCASE("view axis is a fixed point")
    {
        const auto out = warp_normal(NormalMap(64, 64), estimate_warp(ci, transformed(ci, 0.3, 1.0, Vec2(1, 2)), 64, 64), m);
        for (std::size_t p = 0; p < out.mask.pixel_count(); ++p)
            if (out.mask.valid(p))
                CHECK((out.normal[p] - Vec3(0, 0, 1)).norm() < 1e-12);
    }
    SUBCASE("outputs are unit length")
    {
        const auto out = warp_normal(n, estimate_warp(ci, transformed(ci, -0.25, 1.1, Vec2(-2, 1)), 64, 64), m);
        for (std::size_t p = 0; p < out.mask.pixel_count(); ++p)
            if (out.mask.valid(p))
                CHECK(std::abs(out.normal[p].norm() - 1.0) < 1e-12);
    }
    SUBCASE("ground-truth in-plane rotation pair")
    {
        const auto id = synth::make_identity(25);
        const std::array<double, synth::deformation_count> none{};
        synth::Pose pose_i, pose_j;
        pose_i.theta = -0.1;
        pose_j.theta = 0.25;
        pose_j.translation = Vec2(1.5, -1);
        const auto fi = synth::pose_frame(id, pose_i, none);
        const auto fj = synth::pose_frame(id, pose_j, none);
        const WarpField wf = estimate_warp(fi.landmarks, fj.landmarks, 64, 64);
        const auto out = warp_normal(fi.normal, wf, fi.mask);
        double sum = 0.0;
        int count = 0;
        for (std::size_t p = 0; p < out.mask.pixel_count(); ++p)
            if (out.mask.valid(p) && fj.mask.valid(p) && wf.interior[p]) {
                sum += test::angle_deg(out.normal[p], fj.normal[p]);
                ++count;
            }
        REQUIRE(count > 500);
        CHECK(sum / count < 2.0);
    }
}

TEST_CASE("alignment losses")
{
    const auto seq = synth::gen_sequence(26, 2);
    const auto& f0 = seq.frames[0];
    const auto& f1 = seq.frames[1];
    const auto& g0 = *f0.ground_truth;
    const auto& g1 = *f1.ground_truth;

    CHECK(align_loss_albedo(g0.albedo, f0.mask, g0.albedo, f0.mask, f0.landmarks, f0.landmarks) == 0.0);
    CHECK(align_loss_normal(g0.normal, f0.mask, g0.normal, f0.mask, f0.landmarks, f0.landmarks) < 1e-12);

    const double a01 = align_loss_albedo(g0.albedo, f0.mask, g1.albedo, f1.mask, f0.landmarks, f1.landmarks);
    const double a10 = align_loss_albedo(g1.albedo, f1.mask, g0.albedo, f0.mask, f1.landmarks, f0.landmarks);
    CHECK(a01 >= 0.0);
    CHECK(a01 < 0.02);
    CHECK(a10 < 0.02);
}

TEST_CASE("normal alignment on an in-plane pose sequence")
{
    synth::SequenceOptions rigid;
    rigid.deform_scale = 0.0;
    for (std::uint64_t seed = 30; seed < 35; ++seed) {
        const auto seq = synth::gen_sequence(seed, 2, rigid);
        const auto& f0 = seq.frames[0];
        const auto& f1 = seq.frames[1];
        CHECK(align_loss_normal(f0.ground_truth->normal, f0.mask, f1.ground_truth->normal, f1.mask, f0.landmarks,
                                f1.landmarks) < 0.05);
        CHECK(align_loss_normal(f1.ground_truth->normal, f1.mask, f0.ground_truth->normal, f0.mask, f1.landmarks,
                                f0.landmarks) < 0.05);
    }
}

TEST_CASE("unrelated identities are separated by the albedo loss")
{
    double lowest = 1.0;
    for (std::uint64_t k = 0; k < 20; ++k) {
        const auto a = synth::gen_sequence(100 + k, 2);
        const auto b = synth::gen_sequence(200 + k, 2);
        const auto& fa = a.frames[0];
        const auto& fb = b.frames[0];
        lowest = std::min(lowest, align_loss_albedo(fa.ground_truth->albedo, fa.mask, fb.ground_truth->albedo, fb.mask,
                                                    fa.landmarks, fb.landmarks));
    }
    MESSAGE("lowest unrelated-identity albedo loss: " << lowest);
    CHECK(lowest > 0.05);
}
