/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: tests/test_eval.cpp
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
#include "ifr/eval.hpp"

#include "test_support.hpp"

#include "doctest.h"

#include <limits>

using namespace ifr;

namespace {

NormalMap constant_normals(int w, int h, const Vec3& n)
{
    NormalMap out(w, h);
    for (std::size_t p = 0; p < out.pixel_count(); ++p)
        out[p] = n;
    return out;
}

// Naive two-pass recomputation with plain loops.
NormalErrorStats brute_stats(const NormalMap& a, const NormalMap& b, const Mask& m)
{
    std::vector<double> e;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.valid(x, y)) {
                double dot = 0.0;
                for (int c = 0; c < 3; ++c)
                    dot += a.at(x, y)[c] * b.at(x, y)[c];
                e.push_back(std::acos(std::max(-1.0, std::min(1.0, dot))) * 180.0 / std::numbers::pi);
            }
    NormalErrorStats s;
    s.count = e.size();
    for (double v : e)
        s.mean_deg += v;
    s.mean_deg /= e.size();
    for (double v : e)
        s.std_deg += (v - s.mean_deg) * (v - s.mean_deg);
    s.std_deg = std::sqrt(s.std_deg / e.size());
    const double thresholds[3] = {20, 25, 30};
    for (int t = 0; t < 3; ++t) {
        int under = 0;
        for (double v : e)
            under += v < thresholds[t];
        s.pct_under[t] = 100.0 * under / e.size();
    }
    return s;
}

double l1_at_scale(const Image& pred, const Image& gt, const Mask& m, int c, double s)
{
    double sum = 0.0;
    for (std::size_t p = 0; p < m.pixel_count(); ++p)
        if (m.valid(p))
            sum += std::abs(s * pred[3 * p + c] - gt[3 * p + c]);
    return sum;
}

double sse_at_scale(const Image& pred, const Image& gt, const Mask& m, int c, double s)
{
    double sum = 0.0;
    for (std::size_t p = 0; p < m.pixel_count(); ++p)
        if (m.valid(p)) {
            const double d = s * pred[3 * p + c] - gt[3 * p + c];
            sum += d * d;
        }
    return sum;
}

// Grid search of the squared-error optimal scale over [0.01, 100], refined
// by golden-section search, then the masked L1 at that scale.
double grid_search_error(const Image& pred, const Image& gt, const Mask& m)
{
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const int steps = 4000;
        int best = 0;
        double best_val = std::numeric_limits<double>::infinity();
        auto grid = [](int i) { return 0.01 * std::pow(1e4, i / 4000.0); };
        for (int i = 0; i <= steps; ++i) {
            const double v = sse_at_scale(pred, gt, m, c, grid(i));
            if (v < best_val) {
                best_val = v;
                best = i;
            }
        }
        double lo = grid(std::max(0, best - 1)), hi = grid(std::min(steps, best + 1));
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int it = 0; it < 100; ++it) {
            const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
            if (sse_at_scale(pred, gt, m, c, a) < sse_at_scale(pred, gt, m, c, b))
                hi = b;
            else
                lo = a;
        }
        total += l1_at_scale(pred, gt, m, c, 0.5 * (lo + hi));
    }
    return total / (3.0 * static_cast<double>(m.count()));
}

} // namespace

TEST_CASE("angular_stats examples")
{
    synth::Rng rng(60);
    const NormalMap n = test::random_normals(rng, 16, 16);
    const Mask m(16, 16);

    const auto same = angular_stats(n, n, m);
    CHECK(same.mean_deg < 1e-5);
    CHECK(same.std_deg < 1e-5);
    for (double p : same.pct_under)
        CHECK(p == 100.0);
    CHECK(same.count == 256);

    const auto ortho = angular_stats(constant_normals(16, 16, Vec3(1, 0, 0)), constant_normals(16, 16, Vec3(0, 0, 1)), m);
    CHECK(ortho.mean_deg == doctest::Approx(90.0));
    CHECK(ortho.std_deg == doctest::Approx(0.0));
    for (double p : ortho.pct_under)
        CHECK(p == 0.0);
}

TEST_CASE("angular_stats thresholds are strict")
{
    const double theta = 25.0 * std::numbers::pi / 180.0;
    const Vec3 tilted(std::sin(theta), 0.0, std::cos(theta));
    const NormalMap a = constant_normals(4, 4, Vec3(0, 0, 1));
    NormalMap b = a;
    for (std::size_t p = 0; p < 8; ++p)
        b[p] = tilted;
    const auto s = angular_stats(a, b, Mask(4, 4));
    CHECK(s.pct_under[0] == 50.0);
    CHECK(s.pct_under[2] == 100.0);
    CHECK(s.mean_deg == doctest::Approx(12.5));
    CHECK(s.std_deg == doctest::Approx(12.5));
}

TEST_CASE("angular_stats matches the brute-force oracle, is symmetric and monotone")
{
    synth::Rng rng(61);
    for (int t = 0; t < 20; ++t) {
        const int w = 5 + rng.uniform_int(0, 20), h = 5 + rng.uniform_int(0, 20);
        const NormalMap a = test::random_normals(rng, w, h, 0.0);
        const NormalMap b = test::random_normals(rng, w, h, 0.0);
        Mask m = test::random_mask(rng, w, h, 0.7);
        m.set(0, 0, true);
        const auto s = angular_stats(a, b, m);
        const auto o = brute_stats(a, b, m);
        CHECK(s.count == o.count);
        CHECK(std::abs(s.mean_deg - o.mean_deg) < 1e-6);
        CHECK(std::abs(s.std_deg - o.std_deg) < 1e-6);
        for (int k = 0; k < 3; ++k)
            CHECK(std::abs(s.pct_under[k] - o.pct_under[k]) < 1e-6);
        CHECK(0.0 <= s.pct_under[0]);
        CHECK(s.pct_under[0] <= s.pct_under[1]);
        CHECK(s.pct_under[1] <= s.pct_under[2]);
        CHECK(s.pct_under[2] <= 100.0);
        CHECK(s.mean_deg >= 0.0);
        CHECK(s.mean_deg <= 180.0);

        const auto r = angular_stats(b, a, m);
        CHECK(r.mean_deg == s.mean_deg);
        CHECK(r.std_deg == s.std_deg);
        CHECK(r.pct_under == s.pct_under);
    }
}

TEST_CASE("angular_stats errors")
{
    const NormalMap a(8, 8);
    CHECK_THROWS_AS(angular_stats(a, a, Mask(8, 8, false)), Error);
    NormalMap bad = a;
    bad[5] = Vec3(0, 0, 2);
    CHECK_THROWS_AS(angular_stats(bad, a, Mask(8, 8)), Error);
    CHECK_THROWS_AS(angular_stats(a, bad, Mask(8, 8)), Error);
    CHECK_THROWS_AS(angular_stats(a, NormalMap(4, 4), Mask(8, 8)), DimensionError);
}

TEST_CASE("recon_metrics")
{
    synth::Rng rng(62);
    const Image a = test::random_image(rng, 12, 10);
    const Mask m = test::random_mask(rng, 12, 10, 0.6);

    const auto same = recon_metrics(a, a, m);
    CHECK(same.l1 == 0.0);
    CHECK(std::isinf(same.psnr_db));
    CHECK(same.psnr_db > 0.0);
    CHECK(to_json(same)["psnr_db"] == "inf");

    Image shifted = a;
    for (double& v : shifted.data())
        v += 0.1;
    const auto off = recon_metrics(shifted, a, m);
    CHECK(off.l1 == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(off.psnr_db == doctest::Approx(20.0).epsilon(1e-10));
    CHECK(to_json(off)["psnr_db"].get<double>() == off.psnr_db);

    for (int t = 0; t < 10; ++t) {
        const Image b = test::random_image(rng, 12, 10);
        double abs_sum = 0.0, sq_sum = 0.0;
        int n = 0;
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 12; ++x)
                if (m.valid(x, y))
                    for (int c = 0; c < 3; ++c) {
                        const double d = a.at(x, y, c) - b.at(x, y, c);
                        abs_sum += std::abs(d);
                        sq_sum += d * d;
                        ++n;
                    }
        const auto r = recon_metrics(a, b, m);
        CHECK(std::abs(r.l1 - abs_sum / n) < 1e-6);
        CHECK(std::abs(r.psnr_db - 10.0 * std::log10(n / sq_sum)) < 1e-6);
    }
    CHECK_THROWS_AS(recon_metrics(a, a, Mask(12, 10, false)), Error);
    CHECK_THROWS_AS(recon_metrics(a, Image(3, 3), m), DimensionError);
}

TEST_CASE("albedo_error_scale_invariant")
{
    synth::Rng rng(63);
    const Image gt = test::random_image(rng, 16, 16, 0.1, 1.0);
    const Mask m = test::random_mask(rng, 16, 16, 0.8);

    CHECK(albedo_error_scale_invariant(gt, gt, m) < 1e-15);
    for (double c : {0.01, 0.5, 2.0, 37.0}) {
        Image scaled = gt;
        for (double& v : scaled.data())
            v *= c;
        CHECK(albedo_error_scale_invariant(scaled, gt, m) < 1e-12);
    }

    // per-channel scales are removed independently
    Image tinted = gt;
    for (std::size_t p = 0; p < tinted.pixel_count(); ++p) {
        tinted[3 * p] *= 3.0;
        tinted[3 * p + 2] *= 0.25;
    }
    CHECK(albedo_error_scale_invariant(tinted, gt, m) < 1e-12);

    for (int t = 0; t < 10; ++t) {
        const Image pred = test::random_image(rng, 16, 16, 0.05, 1.5);
        const double got = albedo_error_scale_invariant(pred, gt, m);
        CHECK(std::abs(got - grid_search_error(pred, gt, m)) < 1e-4);
    }

    CHECK_THROWS_AS(albedo_error_scale_invariant(Image(16, 16), gt, m), Error);
    CHECK_THROWS_AS(albedo_error_scale_invariant(gt, gt, Mask(16, 16, false)), Error);
    CHECK_THROWS_AS(albedo_error_scale_invariant(gt, Image(8, 8), m), DimensionError);
}

TEST_CASE("pool weights frames by valid-pixel count")
{
    synth::Rng rng(64);
    std::vector<NormalErrorStats> frames;
    NormalMap all_a(30, 10), all_b(30, 10);
    Mask all_m(30, 10, false);
    for (int f = 0; f < 3; ++f) {
        const NormalMap a = test::random_normals(rng, 10, 10, 0.0);
        const NormalMap b = test::random_normals(rng, 10, 10, 0.0);
        Mask m = test::random_mask(rng, 10, 10, 0.3 + 0.3 * f);
        m.set(0, 0, true);
        frames.push_back(angular_stats(a, b, m));
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 10; ++x) {
                all_a.at(10 * f + x, y) = a.at(x, y);
                all_b.at(10 * f + x, y) = b.at(x, y);
                all_m.set(10 * f + x, y, m.valid(x, y));
            }
    }
    const auto pooled = pool(frames);
    const auto direct = angular_stats(all_a, all_b, all_m);
    CHECK(pooled.count == direct.count);
    CHECK(pooled.mean_deg == doctest::Approx(direct.mean_deg).epsilon(1e-12));
    CHECK(pooled.std_deg == doctest::Approx(direct.std_deg).epsilon(1e-9));
    for (int k = 0; k < 3; ++k)
        CHECK(pooled.pct_under[k] == doctest::Approx(direct.pct_under[k]).epsilon(1e-12));
    CHECK_THROWS_AS(pool({}), Error);
}

TEST_CASE("stats JSON layout")
{
    NormalErrorStats s;
    s.mean_deg = 10;
    s.std_deg = 2;
    s.pct_under = {40, 50, 60};
    s.count = 7;
    const auto j = to_json(s);
    CHECK(j["mean_deg"] == 10.0);
    CHECK(j["std_deg"] == 2.0);
    CHECK(j["pct_under"]["20"] == 40.0);
    CHECK(j["pct_under"]["25"] == 50.0);
    CHECK(j["pct_under"]["30"] == 60.0);
    CHECK(j["count"] == 7);
}
