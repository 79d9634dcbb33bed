/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/eval.hpp
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

#ifndef IFR_EVAL_HPP_
#define IFR_EVAL_HPP_

#include "ifr/core.hpp"

#include "json.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace ifr {

inline constexpr std::array<double, 3> angular_thresholds_deg{20.0, 25.0, 30.0};

struct NormalErrorStats
{
    double mean_deg = 0.0;
    double std_deg = 0.0; // population standard deviation
    /// Percentage of pixels with error strictly below each threshold.
    std::array<double, 3> pct_under{};
    std::size_t count = 0;
};

/**
 * Per-pixel angle arccos(clamp(pred . gt)) in degrees over valid pixels.
 * Throws Error without valid pixels or for non-unit normals.
 */
NormalErrorStats angular_stats(const NormalMap& pred, const NormalMap& gt, const Mask& m);

struct ReconMetrics
{
    double l1 = 0.0;
    /// 10 log10(1 / MSE); +infinity for identical images.
    double psnr_db = 0.0;
};

ReconMetrics recon_metrics(const Image& pred, const Image& gt, const Mask& m);

/**
 * Masked L1 after scaling each channel of `pred` by the least-squares
 * factor <pred, gt> / <pred, pred>. Throws Error for a zero prediction.
 */
double albedo_error_scale_invariant(const Image& pred, const Image& gt, const Mask& m);

nlohmann::json to_json(const NormalErrorStats& s);
nlohmann::json to_json(const ReconMetrics& r);

/**
 * Pools per-frame statistics, weighting each by its valid-pixel count.
 * The pooled std is exact (it is recovered from per-frame moments).
 */
NormalErrorStats pool(const std::vector<NormalErrorStats>& frames);

} /* namespace ifr */

#endif /* IFR_EVAL_HPP_ */
