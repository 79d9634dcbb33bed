/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/solver.hpp
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

#ifndef IFR_SOLVER_HPP_
#define IFR_SOLVER_HPP_

#include "ifr/align.hpp"
#include "ifr/core.hpp"
#include "ifr/decomposition.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ifr {

/**
 * Weights of every energy term. The first group weights the
 * reconstruction/consistency objective, the second the supervised
 * objectives, the last the priors that replace a learned model's implicit
 * regularisation.
 */
struct LossWeights
{
    double recon = 1.0;              // lambda_g
    double albedo_consistency = 0.5; // lambda_ab
    double normal_consistency = 0.5; // lambda_no

    double image_local = 1.0; // lambda_l
    double albedo = 1.0;      // lambda_a
    double normal = 1.0;      // lambda_n
    double lighting = 1.0;    // lambda_h
    double residual = 1.0;    // lambda_r

    double tv_albedo = 0.01;
    double tv_normal = 0.01;
    double residual_l1 = 0.05;
    double tv_residual = 0.01;
};

struct StageSpec
{
    std::string name;
    int iterations = 0;
    bool residual = false;    // residual unfrozen
    bool consistency = false; // cross-frame terms on
};

/// Variable blocks held fixed during a solve.
struct FreezeSpec
{
    bool albedo = false;
    bool normal = false;
    bool lighting = false;
    bool residual = false;
};

struct SolverConfig
{
    LossWeights weights;
    double lr = 5e-4;
    double lr_decay = 0.98;
    /// The learning rate decays once every decay_blocks * block_iterations.
    int decay_blocks = 5;
    int block_iterations = 100;
    std::vector<StageSpec> stages = default_stages();
    FreezeSpec freeze;
    std::uint64_t seed = 0;
    /// Worker threads for per-frame terms; results do not depend on it.
    int threads = 1;

    static std::vector<StageSpec> default_stages(int iterations_per_stage = 300);
    /// Throws Error for negative weights, lr <= 0 or an empty schedule.
    void validate() const;
    double learning_rate(int iteration) const;
};

nlohmann::json config_to_json(const SolverConfig& cfg);
/// Overlays the keys present in `j` onto `base`.
SolverConfig config_from_json(const nlohmann::json& j, SolverConfig base = {});

struct EnergyReport
{
    double total = 0.0;
    std::map<std::string, double> terms;
    int iteration = 0;
    std::string stage;
    /// Lowest total seen so far within the stage.
    double best_total = 0.0;
};

/// Raised when the energy becomes NaN or infinite; carries the last report.
class SolverAbort : public Error
{
public:
    SolverAbort(const std::string& what, EnergyReport report) : Error(what), report(std::move(report)) {}
    EnergyReport report;
};

/// Supervised objective on the local image, albedo, normals and lighting.
double loss_supervised_local(const Decomposition& d, const FrameRecord& frame, const LossWeights& w);
/// Reconstruction and residual regression plus loss_supervised_local().
double loss_supervised_global(const Decomposition& d, const FrameRecord& frame, const LossWeights& w);

/// Mean absolute difference of normal components over valid pixels.
double normal_l1(const NormalMap& a, const NormalMap& b, const Mask& m);

/// Mean anisotropic total variation over valid right/down neighbour pairs
/// and channels. 0 without pairs.
double total_variation(const Image& img, const Mask& m);
double total_variation(const NormalMap& n, const Mask& m);

/// Gradient of an energy with respect to one frame's variables.
struct DecompositionGradient
{
    std::vector<double> albedo;
    std::vector<double> normal;
    ShLighting lighting = ShLighting::Zero();
    std::vector<double> residual;
};

/**
 * Precomputed data of one multi-frame problem: warp fields and bilinear
 * taps for every ordered pair of consecutive frames in both directions.
 */
class EnergyProblem
{
public:
    EnergyProblem(const FrameSequence& frames, const SolverConfig& cfg);

    struct Pair
    {
        int source = 0;
        int target = 0;
        WarpField warp;
        std::vector<BilinearTap> taps;
        Mask region; // target-valid, warp usable, inside the landmark hull
    };

    const FrameSequence& frames() const { return frames_; }
    const std::vector<Pair>& pairs() const { return pairs_; }

    /**
     * Energy of the stage objective and, when `gradient` is non-null, its
     * analytic gradient. With stage.residual false the residual is treated
     * as given (normally zero) and its priors are omitted.
     */
    EnergyReport evaluate(const std::vector<Decomposition>& ds, const StageSpec& stage,
                          std::vector<DecompositionGradient>* gradient) const;

private:
    const FrameSequence& frames_;
    SolverConfig cfg_;
    std::vector<Pair> pairs_;
};

/// Full weak-supervision energy (residual and consistency terms on).
EnergyReport energy_weak(const FrameSequence& frames, const std::vector<Decomposition>& ds, const SolverConfig& cfg);

/// Albedo = image, camera-facing ellipsoid fitted to the mask's bounding
/// box, DC-only lighting with unit mean shading, zero residual.
Decomposition default_init(const FrameRecord& frame);

/**
 * Per channel: lighting column divided and albedo multiplied by the mean
 * shading over the mask. The rendered local image is unchanged.
 */
Decomposition gauge_fix(const Decomposition& d, const Mask& m);

struct SolveResult
{
    std::vector<Decomposition> decompositions;
    std::vector<EnergyReport> reports;
    /// Best iterate at the end of each stage, in schedule order.
    std::vector<std::vector<Decomposition>> stage_results;
};

/**
 * Staged Adam minimisation. Each stage restarts the moment estimates from
 * the previous stage's best iterate; the result is the best iterate of the
 * last stage. Projections after every step keep normals unit and
 * camera-facing, albedo in [0, 2] and the residual in [-1, 1].
 */
SolveResult solve(const FrameSequence& frames, const SolverConfig& cfg,
                  const std::optional<std::vector<Decomposition>>& init = std::nullopt);

} /* namespace ifr */

#endif /* IFR_SOLVER_HPP_ */
