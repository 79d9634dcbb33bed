/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/solver.cpp
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
#include "ifr/solver.hpp"

#include "ifr/shrender.hpp"

#include "Eigen/Eigenvalues"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace ifr {

using nlohmann::json;

std::vector<StageSpec> SolverConfig::default_stages(int iterations_per_stage)
{
    return {{"reconstruction", iterations_per_stage, false, false},
            {"residual", iterations_per_stage, true, false},
            {"consistency", iterations_per_stage, true, true}};
}

void SolverConfig::validate() const
{
    const auto& w = weights;
    for (double v : {w.recon, w.albedo_consistency, w.normal_consistency, w.image_local, w.albedo, w.normal, w.lighting,
                     w.residual, w.tv_albedo, w.tv_normal, w.residual_l1, w.tv_residual})
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error("loss weights must be finite and nonnegative");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw Error("learning rate must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
        throw Error("learning-rate decay must lie in (0, 1]");
    if (decay_blocks <= 0 || block_iterations <= 0)
        throw Error("decay schedule must be positive");
    if (stages.empty())
        throw Error("stage schedule is empty");
    for (const auto& s : stages)
        if (s.iterations < 0)
            throw Error("stage " + s.name + " has a negative iteration count");
    if (threads < 1)
        throw Error("thread count must be at least 1");
}

double SolverConfig::learning_rate(int iteration) const
{
    const int period = decay_blocks * block_iterations;
    return lr * std::pow(lr_decay, iteration / period);
}

namespace {

struct WeightField
{
    const char* name;
    const char* alias;
    double LossWeights::*member;
};

constexpr WeightField weight_fields[] = {
    {"recon", "lambda_g", &LossWeights::recon},
    {"albedo_consistency", "lambda_ab", &LossWeights::albedo_consistency},
    {"normal_consistency", "lambda_no", &LossWeights::normal_consistency},
    {"image_local", "lambda_l", &LossWeights::image_local},
    {"albedo", "lambda_a", &LossWeights::albedo},
    {"normal", "lambda_n", &LossWeights::normal},
    {"lighting", "lambda_h", &LossWeights::lighting},
    {"residual", "lambda_r", &LossWeights::residual},
    {"tv_albedo", "lambda_tvA", &LossWeights::tv_albedo},
    {"tv_normal", "lambda_tvN", &LossWeights::tv_normal},
    {"residual_l1", "lambda_r1", &LossWeights::residual_l1},
    {"tv_residual", "lambda_tvR", &LossWeights::tv_residual},
};

} // namespace

json config_to_json(const SolverConfig& cfg)
{
    json weights = json::object();
    for (const auto& f : weight_fields)
        weights[f.name] = cfg.weights.*f.member;
    json stages = json::array();
    for (const auto& s : cfg.stages)
        stages.push_back({{"name", s.name}, {"iterations", s.iterations}, {"residual", s.residual},
                          {"consistency", s.consistency}});
    return {{"weights", weights},
            {"lr", cfg.lr},
            {"lr_decay", cfg.lr_decay},
            {"decay_blocks", cfg.decay_blocks},
            {"block_iterations", cfg.block_iterations},
            {"stages", stages},
            {"freeze",
             {{"albedo", cfg.freeze.albedo},
              {"normal", cfg.freeze.normal},
              {"lighting", cfg.freeze.lighting},
              {"residual", cfg.freeze.residual}}},
            {"seed", cfg.seed},
            {"threads", cfg.threads}};
}

SolverConfig config_from_json(const json& j, SolverConfig cfg)
{
    try {
        if (j.contains("weights")) {
            const auto& w = j.at("weights");
            for (const auto& [key, value] : w.items()) {
                const auto* field = std::find_if(std::begin(weight_fields), std::end(weight_fields),
                                                 [&](const WeightField& f) { return key == f.name || key == f.alias; });
                if (field == std::end(weight_fields))
                    throw Error("unknown loss weight '" + key + "'");
                cfg.weights.*(field->member) = value.get<double>();
            }
        }
        if (j.contains("lr"))
            cfg.lr = j["lr"].get<double>();
        if (j.contains("lr_decay"))
            cfg.lr_decay = j["lr_decay"].get<double>();
        if (j.contains("decay_blocks"))
            cfg.decay_blocks = j["decay_blocks"].get<int>();
        if (j.contains("block_iterations"))
            cfg.block_iterations = j["block_iterations"].get<int>();
        if (j.contains("stages")) {
            cfg.stages.clear();
            for (const auto& s : j["stages"])
                cfg.stages.push_back({s.at("name").get<std::string>(), s.at("iterations").get<int>(),
                                      s.value("residual", false), s.value("consistency", false)});
        }
        if (j.contains("freeze")) {
            const auto& f = j["freeze"];
            cfg.freeze.albedo = f.value("albedo", cfg.freeze.albedo);
            cfg.freeze.normal = f.value("normal", cfg.freeze.normal);
            cfg.freeze.lighting = f.value("lighting", cfg.freeze.lighting);
            cfg.freeze.residual = f.value("residual", cfg.freeze.residual);
        }
        if (j.contains("seed"))
            cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("threads"))
            cfg.threads = j["threads"].get<int>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed solver config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

double normal_l1(const NormalMap& a, const NormalMap& b, const Mask& m)
{
    check_same_size(a, m);
    check_same_size(b, m);
    std::vector<double> terms;
    for (std::size_t p = 0; p < m.pixel_count(); ++p)
        if (m.valid(p))
            for (int c = 0; c < 3; ++c)
                terms.push_back(std::abs(a[p][c] - b[p][c]));
    return terms.empty() ? 0.0 : pairwise_sum(terms) / static_cast<double>(terms.size());
}

namespace {

// Mean over valid right/down neighbour pairs and the 3 components of
// |u(p) - u(q)|; optionally accumulates weight * gradient into `grad`.
double tv_components(std::span<const double> u, const Mask& m, double weight, std::span<double> grad)
{
    const int w = m.width(), h = m.height();
    std::size_t pairs = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m.valid(x, y))
                continue;
            if (x + 1 < w && m.valid(x + 1, y))
                ++pairs;
            if (y + 1 < h && m.valid(x, y + 1))
                ++pairs;
        }
    if (pairs == 0)
        return 0.0;
    const double norm = 1.0 / (3.0 * static_cast<double>(pairs));
    double sum = 0.0;
    auto visit = [&](std::size_t p, std::size_t q) {
        for (int c = 0; c < 3; ++c) {
            const double d = u[3 * p + c] - u[3 * q + c];
            sum += std::abs(d);
            if (!grad.empty() && d != 0.0) {
                const double g = weight * norm * (d > 0.0 ? 1.0 : -1.0);
                grad[3 * p + c] += g;
                grad[3 * q + c] -= g;
            }
        }
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m.valid(x, y))
                continue;
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            if (x + 1 < w && m.valid(x + 1, y))
                visit(p, p + 1);
            if (y + 1 < h && m.valid(x, y + 1))
                visit(p, p + static_cast<std::size_t>(w));
        }
    return sum * norm;
}

double sign(double v)
{
    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn)
{
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const int n = std::min(threads, count);
    for (int t = 0; t < n; ++t)
        pool.emplace_back([&, t] {
            for (int i = t; i < count; i += n)
                fn(i);
        });
    for (auto& th : pool)
        th.join();
}

} // namespace

double total_variation(const Image& img, const Mask& m)
{
    check_same_size(img, m);
    return tv_components(img.data(), m, 0.0, {});
}

double total_variation(const NormalMap& n, const Mask& m)
{
    check_same_size(n, m);
    return tv_components(n.components(), m, 0.0, {});
}

double loss_supervised_local(const Decomposition& d, const FrameRecord& frame, const LossWeights& w)
{
    if (!frame.ground_truth)
        throw Error("supervised loss needs ground truth");
    const auto& gt = *frame.ground_truth;
    const Mask& m = frame.mask;
    const Image il = render_local(d.albedo, d.normal, d.lighting, m);
    const double lighting = (gt.lighting - d.lighting).squaredNorm() / 27.0;
    return w.image_local * masked_l1(gt.image_local, il, m) + w.albedo * masked_l1(gt.albedo, d.albedo, m) +
           w.normal * normal_l1(gt.normal, d.normal, m) + w.lighting * lighting;
}

double loss_supervised_global(const Decomposition& d, const FrameRecord& frame, const LossWeights& w)
{
    if (!frame.ground_truth)
        throw Error("supervised loss needs ground truth");
    const auto& gt = *frame.ground_truth;
    const Mask& m = frame.mask;
    const Image ig = render_global(render_local(d.albedo, d.normal, d.lighting, m), d.residual);
    return w.recon * masked_l1(frame.image_global, ig, m) + w.residual * masked_l1(gt.residual, d.residual, m) +
           loss_supervised_local(d, frame, w);
}

EnergyProblem::EnergyProblem(const FrameSequence& frames, const SolverConfig& cfg) : frames_(frames), cfg_(cfg)
{
    frames.validate();
    cfg.validate();
    const int n = static_cast<int>(frames.frames.size());
    const int w = frames.frames.front().image_global.width();
    const int h = frames.frames.front().image_global.height();
    for (int i = 0; i + 1 < n; ++i)
        for (const auto& [s, t] : {std::pair{i, i + 1}, std::pair{i + 1, i}}) {
            Pair pair;
            pair.source = s;
            pair.target = t;
            pair.warp = estimate_warp(frames.frames[s].landmarks, frames.frames[t].landmarks, w, h);
            pair.taps = warp_taps(pair.warp, frames.frames[s].mask);
            Mask usable(w, h, false);
            for (std::size_t p = 0; p < pair.taps.size(); ++p)
                usable.set(p, pair.taps[p].count > 0);
            pair.region = alignment_mask(pair.warp, usable, frames.frames[t].mask);
            pairs_.push_back(std::move(pair));
        }
}

EnergyReport EnergyProblem::evaluate(const std::vector<Decomposition>& ds, const StageSpec& stage,
                                     std::vector<DecompositionGradient>* gradient) const
{
    const auto& frames = frames_.frames;
    const int n = static_cast<int>(frames.size());
    if (static_cast<int>(ds.size()) != n)
        throw Error("need one decomposition per frame");
    const auto& w = cfg_.weights;

    if (gradient) {
        gradient->resize(n);
        for (int i = 0; i < n; ++i) {
            const std::size_t len = frames[i].image_global.data().size();
            auto& g = (*gradient)[i];
            g.albedo.assign(len, 0.0);
            g.normal.assign(len, 0.0);
            g.residual.assign(len, 0.0);
            g.lighting.setZero();
        }
    }

    struct FrameTerms
    {
        double recon = 0, tv_albedo = 0, tv_normal = 0, residual_l1 = 0, tv_residual = 0;
    };
    std::vector<FrameTerms> per_frame(n);

    parallel_for(n, cfg_.threads, [&](int i) {
        const auto& f = frames[i];
        const auto& d = ds[i];
        const Mask& m = f.mask;
        check_same_size(d.albedo, m);
        check_same_size(d.residual, m);
        check_same_size(d.normal, m);
        DecompositionGradient* g = gradient ? &(*gradient)[i] : nullptr;
        FrameTerms& t = per_frame[i];

        const std::size_t valid = m.count();
        if (valid == 0)
            return;
        const double norm = 1.0 / (3.0 * static_cast<double>(valid));
        double recon = 0.0;
        for (std::size_t p = 0; p < m.pixel_count(); ++p) {
            if (!m.valid(p))
                continue;
            const Vec3& nrm = d.normal[p];
            const ShBasisVector b = sh_basis_unchecked(nrm);
            const Eigen::RowVector3d s = b.transpose() * d.lighting;
            Eigen::Matrix<double, 9, 3> jac;
            if (g)
                jac = sh_basis_jacobian(nrm);
            for (int c = 0; c < 3; ++c) {
                const std::size_t i3 = 3 * p + c;
                const double total = d.albedo[i3] * s[c] + d.residual[i3];
                const double rendered = total <= 0.0 ? 0.0 : total;
                const double diff = rendered - f.image_global[i3];
                recon += std::abs(diff);
                if (!g || total <= 0.0 || diff == 0.0)
                    continue;
                const double gr = w.recon * norm * sign(diff);
                g->albedo[i3] += gr * s[c];
                const double gs = gr * d.albedo[i3];
                g->lighting.col(c) += gs * b;
                const Eigen::RowVector3d ds_dn = d.lighting.col(c).transpose() * jac;
                for (int k = 0; k < 3; ++k)
                    g->normal[3 * p + k] += gs * ds_dn[k];
                g->residual[i3] += gr;
            }
        }
        t.recon = w.recon * recon * norm;

        const std::span<double> none;
        if (w.tv_albedo > 0.0)
            t.tv_albedo = w.tv_albedo * tv_components(d.albedo.data(), m, w.tv_albedo, g ? g->albedo : none);
        if (w.tv_normal > 0.0)
            t.tv_normal = w.tv_normal * tv_components(d.normal.components(), m, w.tv_normal, g ? g->normal : none);
        if (stage.residual) {
            if (w.residual_l1 > 0.0) {
                double l1 = 0.0;
                for (std::size_t p = 0; p < m.pixel_count(); ++p) {
                    if (!m.valid(p))
                        continue;
                    for (int c = 0; c < 3; ++c) {
                        const double r = d.residual[3 * p + c];
                        l1 += std::abs(r);
                        if (g)
                            g->residual[3 * p + c] += w.residual_l1 * norm * sign(r);
                    }
                }
                t.residual_l1 = w.residual_l1 * l1 * norm;
            }
            if (w.tv_residual > 0.0)
                t.tv_residual =
                    w.tv_residual * tv_components(d.residual.data(), m, w.tv_residual, g ? g->residual : none);
        }
    });

    EnergyReport report;
    report.stage = stage.name;
    auto& terms = report.terms;
    terms["recon"] = 0.0;
    for (const auto& t : per_frame)
        terms["recon"] += t.recon;
    auto add_sum = [&](const char* name, double FrameTerms::*member, bool active) {
        if (!active)
            return;
        double s = 0.0;
        for (const auto& t : per_frame)
            s += t.*member;
        terms[name] = s;
    };
    add_sum("tv_albedo", &FrameTerms::tv_albedo, w.tv_albedo > 0.0);
    add_sum("tv_normal", &FrameTerms::tv_normal, w.tv_normal > 0.0);
    add_sum("residual_l1", &FrameTerms::residual_l1, stage.residual && w.residual_l1 > 0.0);
    add_sum("tv_residual", &FrameTerms::tv_residual, stage.residual && w.tv_residual > 0.0);

    if (stage.consistency) {
        double albedo_sum = 0.0, normal_sum = 0.0;
        for (const auto& pair : pairs_) {
            const std::size_t count = pair.region.count();
            if (count == 0)
                continue;
            const double norm = 1.0 / (3.0 * static_cast<double>(count));
            const auto& src = ds[pair.source];
            const auto& dst = ds[pair.target];
            DecompositionGradient* gs = gradient ? &(*gradient)[pair.source] : nullptr;
            DecompositionGradient* gt = gradient ? &(*gradient)[pair.target] : nullptr;
            double a_sum = 0.0, n_sum = 0.0;
            for (std::size_t p = 0; p < pair.region.pixel_count(); ++p) {
                if (!pair.region.valid(p))
                    continue;
                const auto& tap = pair.taps[p];
                if (w.albedo_consistency > 0.0) {
                    for (int c = 0; c < 3; ++c) {
                        double v = 0.0;
                        for (int k = 0; k < tap.count; ++k)
                            v += tap.weight[k] * src.albedo[3 * tap.index[k] + c];
                        const double diff = dst.albedo[3 * p + c] - v;
                        a_sum += std::abs(diff);
                        if (gradient && diff != 0.0) {
                            const double gval = w.albedo_consistency * norm * sign(diff);
                            gt->albedo[3 * p + c] += gval;
                            for (int k = 0; k < tap.count; ++k)
                                gs->albedo[3 * tap.index[k] + c] -= gval * tap.weight[k];
                        }
                    }
                }
                if (w.normal_consistency > 0.0) {
                    Vec3 v = Vec3::Zero();
                    for (int k = 0; k < tap.count; ++k)
                        v += tap.weight[k] * src.normal[tap.index[k]];
                    const double cs = std::cos(pair.warp.theta[p]), sn = std::sin(pair.warp.theta[p]);
                    Eigen::Matrix3d rot;
                    rot << cs, -sn, 0, sn, cs, 0, 0, 0, 1;
                    const Vec3 u = rot * v;
                    const double len = u.norm();
                    if (len < 1e-12)
                        continue;
                    const Vec3 warped = u / len;
                    Vec3 g_warped = Vec3::Zero();
                    for (int c = 0; c < 3; ++c) {
                        const double diff = dst.normal[p][c] - warped[c];
                        n_sum += std::abs(diff);
                        if (gradient && diff != 0.0) {
                            const double gval = w.normal_consistency * norm * sign(diff);
                            gt->normal[3 * p + c] += gval;
                            g_warped[c] -= gval;
                        }
                    }
                    if (gradient) {
                        // d warped / d v = (I - warped warped^T) rot / |u|
                        const Vec3 g_u = (g_warped - warped * warped.dot(g_warped)) / len;
                        const Vec3 g_v = rot.transpose() * g_u;
                        for (int k = 0; k < tap.count; ++k)
                            for (int c = 0; c < 3; ++c)
                                gs->normal[3 * tap.index[k] + c] += tap.weight[k] * g_v[c];
                    }
                }
            }
            albedo_sum += a_sum * norm;
            normal_sum += n_sum * norm;
        }
        if (w.albedo_consistency > 0.0)
            terms["albedo_consistency"] = w.albedo_consistency * albedo_sum;
        if (w.normal_consistency > 0.0)
            terms["normal_consistency"] = w.normal_consistency * normal_sum;
    }

    for (const auto& [name, value] : terms)
        report.total += value;
    return report;
}

EnergyReport energy_weak(const FrameSequence& frames, const std::vector<Decomposition>& ds, const SolverConfig& cfg)
{
    if (ds.size() != frames.frames.size())
        throw Error("need one decomposition per frame");
    const EnergyProblem problem(frames, cfg);
    return problem.evaluate(ds, {"weak", 0, true, true}, nullptr);
}

Decomposition default_init(const FrameRecord& frame)
{
    const Mask& m = frame.mask;
    check_same_size(frame.image_global, m);
    int x0 = m.width(), x1 = -1, y0 = m.height(), y1 = -1;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.valid(x, y)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    if (x1 < 0)
        throw Error("default initialisation needs a non-empty mask");

    Decomposition d;
    d.albedo = frame.image_global;
    for (double& v : d.albedo.data())
        v = std::clamp(v, 0.0, 2.0);
    d.residual = Image(m.width(), m.height());
    d.normal = NormalMap(m.width(), m.height());

    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    const double rx = 0.5 * (x1 - x0) + 0.5, ry = 0.5 * (y1 - y0) + 0.5;
    const double rz = std::min(rx, ry);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (!m.valid(x, y))
                continue;
            double u = (x - cx) / rx, v = (y - cy) / ry;
            const double rho2 = u * u + v * v;
            if (rho2 > 0.95) {
                const double s = std::sqrt(0.95 / rho2);
                u *= s;
                v *= s;
            }
            const double root = std::sqrt(1.0 - u * u - v * v);
            const double gx = -rz * u / (rx * root), gy = -rz * v / (ry * root);
            d.normal.at(x, y) = Vec3(-gx, gy, 1.0).normalized();
        }

    d.lighting.setZero();
    d.lighting.row(0).setConstant(1.0 / sh_constants::band0);
    return d;
}

Decomposition gauge_fix(const Decomposition& d, const Mask& m)
{
    check_same_size(d.albedo, m);
    check_same_size(d.normal, m);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    std::size_t count = 0;
    for (std::size_t p = 0; p < m.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        mean += (sh_basis_unchecked(d.normal[p]).transpose() * d.lighting).transpose();
        ++count;
    }
    if (count == 0)
        throw Error("gauge fixing needs a non-empty mask");
    mean /= static_cast<double>(count);
    Decomposition out = d;
    for (int c = 0; c < 3; ++c) {
        if (!(mean[c] > 1e-6))
            throw Error("mean shading too close to zero for gauge fixing");
        out.lighting.col(c) /= mean[c];
        for (std::size_t p = 0; p < m.pixel_count(); ++p)
            out.albedo[3 * p + c] *= mean[c];
    }
    return out;
}

namespace {

class Adam
{
public:
    void reset(std::size_t size)
    {
        m_.assign(size, 0.0);
        v_.assign(size, 0.0);
    }

    void step(std::span<double> x, std::span<const double> g, double lr, int t)
    {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < x.size(); ++i) {
            m_[i] = beta1 * m_[i] + (1.0 - beta1) * g[i];
            v_[i] = beta2 * v_[i] + (1.0 - beta2) * g[i] * g[i];
            x[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
        }
    }

private:
    std::vector<double> m_, v_;
};

void project(Decomposition& d, const Mask& m)
{
    for (double& v : d.albedo.data())
        v = std::clamp(v, 0.0, 2.0);
    for (double& v : d.residual.data())
        v = std::clamp(v, -1.0, 1.0);
    for (std::size_t p = 0; p < m.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        Vec3& n = d.normal[p];
        n.z() = std::max(0.0, n.z());
        const double len = n.norm();
        n = len > 1e-12 ? Vec3(n / len) : Vec3(0.0, 0.0, 1.0);
    }
}

// Inverse square root of the SH Gram matrix over the mask. Lighting steps
// are taken in whitened coordinates.
Eigen::Matrix<double, 9, 9> lighting_preconditioner(const NormalMap& n, const Mask& m)
{
    Eigen::Matrix<double, 9, 9> gram = Eigen::Matrix<double, 9, 9>::Zero();
    std::size_t count = 0;
    for (std::size_t p = 0; p < m.pixel_count(); ++p) {
        if (!m.valid(p))
            continue;
        const ShBasisVector b = sh_basis_unchecked(n[p]);
        gram += b * b.transpose();
        ++count;
    }
    if (count == 0)
        return Eigen::Matrix<double, 9, 9>::Identity();
    gram /= static_cast<double>(count);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(gram);
    const double floor = 1e-6 * eig.eigenvalues().maxCoeff();
    const Eigen::Matrix<double, 9, 1> inv_sqrt =
        eig.eigenvalues().unaryExpr([floor](double v) { return 1.0 / std::sqrt(std::max(v, floor)); });
    return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace

SolveResult solve(const FrameSequence& frames, const SolverConfig& cfg,
                  const std::optional<std::vector<Decomposition>>& init)
{
    cfg.validate();
    frames.validate();
    const int n = static_cast<int>(frames.frames.size());

    std::vector<Decomposition> ds;
    if (init) {
        if (static_cast<int>(init->size()) != n)
            throw Error("initialisation must hold one decomposition per frame");
        ds = *init;
        for (int i = 0; i < n; ++i) {
            const Mask& m = frames.frames[i].mask;
            check_same_size(ds[i].albedo, m);
            check_same_size(ds[i].residual, m);
            check_same_size(ds[i].normal, m);
            project(ds[i], m);
        }
    } else {
        for (const auto& f : frames.frames)
            ds.push_back(default_init(f));
    }

    const EnergyProblem problem(frames, cfg);
    SolveResult result;
    std::vector<DecompositionGradient> grad;
    std::vector<Adam> adam(4 * n);
    int iteration = 0;

    for (const auto& stage : cfg.stages) {
        if (!stage.residual && !cfg.freeze.residual)
            for (auto& d : ds)
                std::fill(d.residual.data().begin(), d.residual.data().end(), 0.0);
        const bool update_residual = stage.residual && !cfg.freeze.residual;
        std::vector<Eigen::Matrix<double, 9, 9>> precond(n);
        for (int i = 0; i < n; ++i) {
            precond[i] = lighting_preconditioner(ds[i].normal, frames.frames[i].mask);
            const std::size_t len = ds[i].albedo.data().size();
            adam[4 * i].reset(len);
            adam[4 * i + 1].reset(len);
            adam[4 * i + 2].reset(27);
            adam[4 * i + 3].reset(len);
        }

        std::vector<Decomposition> best = ds;
        double best_total = std::numeric_limits<double>::infinity();
        for (int it = 0; it <= stage.iterations; ++it) {
            EnergyReport report = problem.evaluate(ds, stage, &grad);
            report.iteration = iteration;
            if (!std::isfinite(report.total)) {
                report.best_total = best_total;
                throw SolverAbort("energy became non-finite in stage '" + stage.name + "' at iteration " +
                                      std::to_string(iteration),
                                  report);
            }
            if (report.total < best_total) {
                best_total = report.total;
                best = ds;
            }
            report.best_total = best_total;
            if (it % 10 == 0 || it == stage.iterations)
                result.reports.push_back(report);
            if (it == stage.iterations)
                break;

            const double lr = cfg.learning_rate(iteration);
            const int t = it + 1;
            for (int i = 0; i < n; ++i) {
                auto& d = ds[i];
                auto& g = grad[i];
                if (!cfg.freeze.albedo)
                    adam[4 * i].step(d.albedo.data(), g.albedo, lr, t);
                if (!cfg.freeze.normal)
                    adam[4 * i + 1].step(d.normal.components(), g.normal, lr, t);
                if (!cfg.freeze.lighting) {
                    ShLighting gz = precond[i] * g.lighting;
                    ShLighting step = ShLighting::Zero();
                    adam[4 * i + 2].step({step.data(), 27}, {gz.data(), 27}, lr, t);
                    d.lighting += precond[i] * step;
                }
                if (update_residual)
                    adam[4 * i + 3].step(d.residual.data(), g.residual, lr, t);
                project(d, frames.frames[i].mask);
            }
            ++iteration;
        }
        ds = best;
        result.stage_results.push_back(best);
    }
    result.decompositions = std::move(ds);
    return result;
}

} /* namespace ifr */
