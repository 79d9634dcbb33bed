/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: tests/solver_fixtures.hpp
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

#ifndef IFR_SOLVER_FIXTURES_HPP_
#define IFR_SOLVER_FIXTURES_HPP_

#include "ifr/solver.hpp"
#include "ifr/synthgen.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace ifr::test {

/// Small random sequence whose landmark sets differ by sub-pixel shifts.
inline FrameSequence tiny_sequence(synth::Rng& rng, int n_frames = 3, int size = 8)
{
    FrameSequence seq;
    seq.identity = "tiny";
    const double hi = size - 1.0;
    for (int i = 0; i < n_frames; ++i) {
        FrameRecord f;
        f.image_global = random_image(rng, size, size, 0.1, 1.0);
        f.mask = Mask(size, size);
        f.mask.set(0, 0, false);
        const Vec2 t(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4));
        for (int gy = 0; gy < 3; ++gy)
            for (int gx = 0; gx < 3; ++gx) {
                const Vec2 jitter(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15));
                f.landmarks.points.push_back(Vec2(0.6 + gx * (0.5 * hi - 0.6), 0.6 + gy * (0.5 * hi - 0.6)) + t + jitter);
            }
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

inline Decomposition random_decomposition(synth::Rng& rng, int size)
{
    Decomposition d;
    d.albedo = random_image(rng, size, size, 0.2, 1.5);
    d.normal = random_normals(rng, size, size, 0.3);
    d.lighting = random_lighting(rng);
    d.residual = random_image(rng, size, size, -0.3, 0.3);
    return d;
}

inline Decomposition ground_truth_decomposition(const FrameRecord& f)
{
    const auto& gt = *f.ground_truth;
    return {gt.albedo, gt.normal, gt.lighting, gt.residual};
}

struct FdSummary
{
    int probes = 0;
    double worst_relative = 0.0;
};

/**
 * Compares the analytic gradient of `problem` against central differences
 * at `probes_per_block` random entries of every variable block of every
 * frame.
 */
inline FdSummary fd_check_energy(const EnergyProblem& problem, const std::vector<Decomposition>& ds,
                                 const StageSpec& stage, synth::Rng& rng, int probes_per_block, double h = 1e-6)
{
    std::vector<DecompositionGradient> grad;
    problem.evaluate(ds, stage, &grad);
    const int n = static_cast<int>(ds.size());
    FdSummary out;

    auto probe = [&](const std::function<double&(std::vector<Decomposition>&)>& entry, double analytic) {
        auto plus = ds, minus = ds;
        entry(plus) += h;
        entry(minus) -= h;
        const double fd =
            (problem.evaluate(plus, stage, nullptr).total - problem.evaluate(minus, stage, nullptr).total) / (2 * h);
        const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-5});
        out.worst_relative = std::max(out.worst_relative, std::abs(analytic - fd) / scale);
        ++out.probes;
    };

    for (int b = 0; b < probes_per_block; ++b) {
        const int i = rng.uniform_int(0, n);
        const Mask& m = problem.frames().frames[i].mask;
        std::size_t p;
        do
            p = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m.pixel_count())));
        while (!m.valid(p));
        const int c = rng.uniform_int(0, 3);
        const std::size_t k = 3 * p + c;
        probe([&](auto& v) -> double& { return v[i].albedo[k]; }, grad[i].albedo[k]);
        probe([&](auto& v) -> double& { return v[i].normal[p][c]; }, grad[i].normal[k]);
        const int l = rng.uniform_int(0, 27);
        probe([&](auto& v) -> double& { return v[i].lighting.data()[l]; }, grad[i].lighting.data()[l]);
        if (stage.residual)
            probe([&](auto& v) -> double& { return v[i].residual[k]; }, grad[i].residual[k]);
    }
    return out;
}

} // namespace ifr::test

#endif /* IFR_SOLVER_FIXTURES_HPP_ */
