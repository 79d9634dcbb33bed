/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/eval.cpp
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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ifr {

NormalErrorStats angular_stats(const NormalMap& pred, const NormalMap& gt, const Mask& m)
{
    check_same_size(pred, m);
    check_same_size(gt, m);
    check_normals(pred, m);
    check_normals(gt, m);
    std::vector<double> errors;
    for (std::size_t p = 0; p < m.pixel_count(); ++p)
        if (m.valid(p))
            errors.push_back(std::acos(std::clamp(pred[p].dot(gt[p]), -1.0, 1.0)) * 180.0 / std::numbers::pi);
    if (errors.empty())
        throw Error("angular statistics need at least one valid pixel");

    NormalErrorStats s;
    s.count = errors.size();
    const double n = static_cast<double>(s.count);
    s.mean_deg = pairwise_sum(errors) / n;
    std::vector<double> sq(errors.size());
    std::transform(errors.begin(), errors.end(), sq.begin(), [&](double e) { return (e - s.mean_deg) * (e - s.mean_deg); });
    s.std_deg = std::sqrt(pairwise_sum(sq) / n);
    for (std::size_t t = 0; t < angular_thresholds_deg.size(); ++t) {
        const auto under = std::count_if(errors.begin(), errors.end(),
                                         [&](double e) { return e < angular_thresholds_deg[t]; });
        s.pct_under[t] = 100.0 * static_cast<double>(under) / n;
    }
    return s;
}

ReconMetrics recon_metrics(const Image& pred, const Image& gt, const Mask& m)
{
    check_same_size(pred, gt);
    check_same_size(pred, m);
    std::vector<double> abs_err, sq_err;
    for (std::size_t p = 0; p < m.pixel_count(); ++p)
        if (m.valid(p))
            for (int c = 0; c < 3; ++c) {
                const double d = pred[3 * p + c] - gt[3 * p + c];
                abs_err.push_back(std::abs(d));
                sq_err.push_back(d * d);
            }
    if (abs_err.empty())
        throw Error("reconstruction metrics need at least one valid pixel");
    const double n = static_cast<double>(abs_err.size());
    const double mse = pairwise_sum(sq_err) / n;
    return {pairwise_sum(abs_err) / n,
            mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : std::numeric_limits<double>::infinity()};
}

double albedo_error_scale_invariant(const Image& pred, const Image& gt, const Mask& m)
{
    check_same_size(pred, gt);
    check_same_size(pred, m);
    std::vector<double> err;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> pg, pp;
        for (std::size_t p = 0; p < m.pixel_count(); ++p)
            if (m.valid(p)) {
                pg.push_back(pred[3 * p + c] * gt[3 * p + c]);
                pp.push_back(pred[3 * p + c] * pred[3 * p + c]);
            }
        const double energy = pairwise_sum(pp);
        if (pp.empty())
            throw Error("albedo error needs at least one valid pixel");
        if (!(energy > 0.0))
            throw Error("scale-invariant albedo error is undefined for a zero prediction");
        const double scale = pairwise_sum(pg) / energy;
        for (std::size_t p = 0; p < m.pixel_count(); ++p)
            if (m.valid(p))
                err.push_back(std::abs(scale * pred[3 * p + c] - gt[3 * p + c]));
    }
    return pairwise_sum(err) / static_cast<double>(err.size());
}

nlohmann::json to_json(const NormalErrorStats& s)
{
    nlohmann::json under = nlohmann::json::object();
    for (std::size_t t = 0; t < angular_thresholds_deg.size(); ++t)
        under[std::to_string(static_cast<int>(angular_thresholds_deg[t]))] = s.pct_under[t];
    return {{"mean_deg", s.mean_deg}, {"std_deg", s.std_deg}, {"pct_under", under}, {"count", s.count}};
}

nlohmann::json to_json(const ReconMetrics& r)
{
    nlohmann::json psnr = std::isinf(r.psnr_db) ? nlohmann::json("inf") : nlohmann::json(r.psnr_db);
    return {{"l1", r.l1}, {"psnr_db", psnr}};
}

NormalErrorStats pool(const std::vector<NormalErrorStats>& frames)
{
    NormalErrorStats out;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& f : frames) {
        const double n = static_cast<double>(f.count);
        out.count += f.count;
        sum += n * f.mean_deg;
        sum_sq += n * (f.std_deg * f.std_deg + f.mean_deg * f.mean_deg);
        for (std::size_t t = 0; t < out.pct_under.size(); ++t)
            out.pct_under[t] += n * f.pct_under[t];
    }
    if (out.count == 0)
        throw Error("nothing to pool");
    const double n = static_cast<double>(out.count);
    out.mean_deg = sum / n;
    out.std_deg = std::sqrt(std::max(0.0, sum_sq / n - out.mean_deg * out.mean_deg));
    for (double& p : out.pct_under)
        p /= n;
    return out;
}

} /* namespace ifr */
