/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/synthgen.cpp
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
#include "ifr/synthgen.hpp"

#include "ifr/shrender.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace ifr::synth {

std::uint64_t Rng::next()
{
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform(double lo, double hi)
{
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

int Rng::uniform_int(int lo, int hi_exclusive)
{
    const auto span = static_cast<std::uint64_t>(hi_exclusive - lo);
    return lo + static_cast<int>(next() % span);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    Rng r(seed ^ (stream * 0xd1b54a32d192ed03ULL));
    r.next();
    Rng s(r.next() ^ (index * 0x8cb92ba72f3d8dd7ULL));
    return s.next();
}

namespace {

constexpr double pi = std::numbers::pi;

double bump_value(const GaussianBump& b, const Vec2& q)
{
    return b.amplitude * std::exp(-(q - b.center).squaredNorm() / (2.0 * b.sigma * b.sigma));
}

Vec2 bump_gradient(const GaussianBump& b, const Vec2& q)
{
    return -bump_value(b, q) * (q - b.center) / (b.sigma * b.sigma);
}

} // namespace

bool ShapeModel::in_support(const Vec2& q) const
{
    const Vec2 u = (q - center).cwiseQuotient(radii);
    return u.squaredNorm() < 1.0;
}

bool ShapeModel::in_mask(const Vec2& q) const
{
    const Vec2 u = (q - center).cwiseQuotient(radii);
    return u.squaredNorm() < mask_extent * mask_extent;
}

double ShapeModel::height_at(const Vec2& q, const std::array<double, deformation_count>& weights) const
{
    const Vec2 u = (q - center).cwiseQuotient(radii);
    const double rho2 = u.squaredNorm();
    double h = rho2 < 1.0 ? depth * std::sqrt(1.0 - rho2) : 0.0;
    for (const auto& f : features)
        h += bump_value(f, q);
    for (int k = 0; k < deformation_count; ++k)
        if (weights[k] != 0.0)
            h += weights[k] * bump_value(deform_basis[k], q);
    return h;
}

Vec2 ShapeModel::gradient_at(const Vec2& q, const std::array<double, deformation_count>& weights) const
{
    const Vec2 u = (q - center).cwiseQuotient(radii);
    const double rho2 = u.squaredNorm();
    Vec2 g = Vec2::Zero();
    if (rho2 < 1.0) {
        const double root = std::sqrt(1.0 - rho2);
        g = -depth / root * u.cwiseQuotient(radii);
    }
    for (const auto& f : features)
        g += bump_gradient(f, q);
    for (int k = 0; k < deformation_count; ++k)
        if (weights[k] != 0.0)
            g += weights[k] * bump_gradient(deform_basis[k], q);
    return g;
}

TextureStyle TextureStyle::from_id(int style_id)
{
    if (style_id < 0 || style_id >= texture_style_count)
        throw Error("texture style id out of range: " + std::to_string(style_id));
    TextureStyle t;
    t.style_id = style_id;
    t.kind = style_id % 3;
    Rng r(derive_seed(0x7e57u, static_cast<std::uint64_t>(style_id)));
    switch (t.kind) {
    case 0: // two stripe sets
        t.params = {r.uniform(2.5, 4.5), r.uniform(0.0, pi), r.uniform(0.0, 2 * pi), r.uniform(0.10, 0.16),
                    r.uniform(1.0, 2.0), r.uniform(0.0, pi), r.uniform(0.0, 2 * pi), r.uniform(0.03, 0.06)};
        break;
    case 1: // Gaussian patches: (u, v, sigma, amplitude) x 6
        for (int i = 0; i < 6; ++i) {
            t.params.push_back(r.uniform(0.2, 0.8));
            t.params.push_back(r.uniform(0.2, 0.8));
            t.params.push_back(r.uniform(0.07, 0.13));
            t.params.push_back((r.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * r.uniform(0.08, 0.16));
        }
        break;
    default: // noise octaves: (frequency, angle, phase, amplitude) x 3
    {
        const double base = r.uniform(1.5, 2.5);
        for (int o = 0; o < 3; ++o) {
            t.params.push_back(base * std::pow(1.7, o));
            t.params.push_back(r.uniform(0.0, pi));
            t.params.push_back(r.uniform(0.0, 2 * pi));
            t.params.push_back(0.12 / std::pow(2.0, o));
        }
        break;
    }
    }
    return t;
}

double TextureStyle::modulation(double u, double v) const
{
    double m = 0.0;
    switch (kind) {
    case 0:
        for (int s = 0; s < 2; ++s) {
            const double* p = params.data() + 4 * s;
            m += p[3] * std::sin(2 * pi * p[0] * (u * std::cos(p[1]) + v * std::sin(p[1])) + p[2]);
        }
        break;
    case 1:
        for (std::size_t i = 0; i + 3 < params.size(); i += 4) {
            const double du = u - params[i], dv = v - params[i + 1];
            m += params[i + 3] * std::exp(-(du * du + dv * dv) / (2.0 * params[i + 2] * params[i + 2]));
        }
        break;
    default:
        for (std::size_t i = 0; i + 3 < params.size(); i += 4)
            m += params[i + 3] *
                 std::sin(2 * pi * params[i] * (u * std::cos(params[i + 1]) + v * std::sin(params[i + 1])) +
                          params[i + 2]);
        break;
    }
    return std::clamp(m, -0.25, 0.25);
}

Vec3 Identity::albedo_at(const Vec2& q) const
{
    const double m = style.modulation(q.x() / shape.width, q.y() / shape.height);
    Vec3 a = skin * (1.0 + m);
    return a.cwiseMax(0.02).cwiseMin(1.0);
}

Identity make_identity(std::uint64_t seed, int width, int height)
{
    if (width < 16 || height < 16)
        throw DimensionError("synthetic rasters must be at least 16x16");
    Rng r(derive_seed(seed, 0x1d));
    const double scale = width / 64.0;

    Identity id;
    auto& s = id.shape;
    s.width = width;
    s.height = height;
    s.center = Vec2(0.5 * (width - 1) + r.uniform(-1.0, 1.0) * scale, 0.5 * (height - 1) + r.uniform(-1.0, 1.0) * scale);
    s.radii = Vec2(r.uniform(0.30, 0.34) * width, r.uniform(0.36, 0.40) * height);
    s.depth = 0.55 * s.radii.x();

    const auto at = [&](double u, double v) { return Vec2(s.center + Vec2(u * s.radii.x(), v * s.radii.y())); };
    // nose ridge and brows
    s.features.push_back({at(0.0, 0.02), 0.075 * width, r.uniform(0.08, 0.11) * width});
    s.features.push_back({at(-0.38, -0.38), 0.06 * width, r.uniform(0.02, 0.035) * width});
    s.features.push_back({at(0.38, -0.38), 0.06 * width, r.uniform(0.02, 0.035) * width});

    for (auto& b : s.deform_basis) {
        const double angle = r.uniform(0.0, 2 * pi);
        const double radius = 0.7 * std::sqrt(r.uniform(0.0, 1.0));
        b.center = at(radius * std::cos(angle), radius * std::sin(angle));
        b.sigma = r.uniform(0.06, 0.12) * width;
        b.amplitude = (r.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * r.uniform(0.03, 0.05) * width;
    }

    s.heightfield.resize(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            s.heightfield[static_cast<std::size_t>(y) * width + x] = s.height_at(Vec2(x, y), s.deform_weights);

    id.style = TextureStyle::from_id(r.uniform_int(0, texture_style_count));
    id.skin = Vec3(r.uniform(0.6, 0.8), r.uniform(0.45, 0.65), r.uniform(0.3, 0.5));

    id.mask = Mask(width, height, false);
    id.albedo = Image(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const Vec2 q(x, y);
            if (!s.in_mask(q))
                continue;
            id.mask.set(x, y, true);
            const Vec3 a = id.albedo_at(q);
            for (int c = 0; c < 3; ++c)
                id.albedo.at(x, y, c) = a[c];
        }

    // outline ring (closed), eyes (closed), nose (open), mouth (closed)
    auto add_group = [&](std::initializer_list<std::pair<double, double>> uv, bool closed) {
        std::vector<int> group;
        for (const auto& [u, v] : uv) {
            group.push_back(static_cast<int>(id.anchor_points.size()));
            id.anchor_points.push_back(at(u, v));
        }
        if (closed)
            group.push_back(group.front());
        id.anchor_groups.push_back(std::move(group));
    };
    {
        std::vector<int> ring;
        for (int k = 0; k < 10; ++k) {
            const double a = 2 * pi * k / 10.0 + 0.5 * pi;
            ring.push_back(static_cast<int>(id.anchor_points.size()));
            id.anchor_points.push_back(at(0.8 * std::cos(a), 0.8 * std::sin(a)));
        }
        ring.push_back(ring.front());
        id.anchor_groups.push_back(std::move(ring));
    }
    add_group({{-0.50, -0.20}, {-0.38, -0.28}, {-0.26, -0.20}, {-0.38, -0.12}}, true);
    add_group({{0.26, -0.20}, {0.38, -0.28}, {0.50, -0.20}, {0.38, -0.12}}, true);
    add_group({{0.0, -0.15}, {0.0, 0.05}, {-0.10, 0.15}, {0.10, 0.15}}, false);
    add_group({{-0.30, 0.45}, {0.0, 0.38}, {0.30, 0.45}, {0.0, 0.55}}, true);
    return id;
}

Vec2 apply_pose(const Pose& pose, const Vec2& q, int width, int height)
{
    const Vec2 c0(0.5 * (width - 1), 0.5 * (height - 1));
    const double c = std::cos(pose.theta), s = std::sin(pose.theta);
    const Vec2 d = q - c0;
    return c0 + pose.translation + pose.scale * Vec2(c * d.x() - s * d.y(), s * d.x() + c * d.y());
}

Vec2 invert_pose(const Pose& pose, const Vec2& p, int width, int height)
{
    const Vec2 c0(0.5 * (width - 1), 0.5 * (height - 1));
    const double c = std::cos(pose.theta), s = std::sin(pose.theta);
    const Vec2 d = (p - c0 - pose.translation) / pose.scale;
    return c0 + Vec2(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
}

PosedFrame pose_frame(const Identity& id, const Pose& pose, const std::array<double, deformation_count>& weights,
                      const PoseLimits& limits)
{
    if (!(std::abs(pose.theta) <= limits.max_abs_theta + 1e-12))
        throw InvalidPose("rotation outside the allowed range");
    if (!(pose.scale >= limits.min_scale && pose.scale <= limits.max_scale))
        throw InvalidPose("scale outside the allowed range");
    for (double w : weights)
        if (!std::isfinite(w))
            throw InvalidPose("non-finite deformation weight");

    const auto& shape = id.shape;
    const int width = shape.width, height = shape.height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    PosedFrame f;
    f.normal = NormalMap(width, height);
    f.mask = Mask(width, height, false);
    f.heightfield.resize(n);
    f.support.resize(n);
    f.canonical.resize(n);

    const double c = std::cos(pose.theta), s = std::sin(pose.theta);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * width + x;
            const Vec2 q = invert_pose(pose, Vec2(x, y), width, height);
            f.canonical[p] = q;
            f.heightfield[p] = pose.scale * shape.height_at(q, weights);
            f.support[p] = shape.in_support(q) ? 1 : 0;
            if (!shape.in_mask(q))
                continue;
            f.mask.set(p, true);
            const Vec2 g = shape.gradient_at(q, weights);
            const Vec2 gp(c * g.x() - s * g.y(), s * g.x() + c * g.y());
            // pixel rows grow downward, normals use y up
            const Vec3 nrm = Vec3(-gp.x(), gp.y(), 1.0).normalized();
            if (nrm.z() < 0.05)
                throw InvalidPose("deformed surface is not camera-facing");
            f.normal[p] = nrm;
        }
    if (f.mask.count() == 0)
        throw InvalidPose("posed face left the raster");

    f.landmarks.groups = id.anchor_groups;
    for (const auto& a : id.anchor_points) {
        const Vec2 p = apply_pose(pose, a, width, height);
        if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width - 1 && p.y() <= height - 1))
            throw InvalidPose("landmark left the raster");
        f.landmarks.points.push_back(p);
    }
    return f;
}

Vec3 key_direction(const ShLighting& l)
{
    const Vec3 d(l.row(3).mean(), l.row(1).mean(), l.row(2).mean());
    if (d.norm() < 1e-3)
        return Vec3(0.0, 0.0, 1.0);
    return d.normalized();
}

namespace {

const std::vector<Vec3>& hemisphere_directions()
{
    static const std::vector<Vec3> dirs = [] {
        std::vector<Vec3> out;
        constexpr int n = 2048;
        const double golden = pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            const double z = 1.0 - (i + 0.5) / n;
            const double r = std::sqrt(1.0 - z * z);
            out.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
        }
        for (int k = 0; k < 128; ++k)
            out.emplace_back(std::cos(2 * pi * k / 128), std::sin(2 * pi * k / 128), 0.0);
        return out;
    }();
    return dirs;
}

} // namespace

double min_hemisphere_shading(const ShLighting& l)
{
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& d : hemisphere_directions())
        lo = std::min(lo, (sh_basis_unchecked(d).transpose() * l).minCoeff());
    return lo;
}

SceneLight sample_lighting(std::uint64_t seed)
{
    Rng r(derive_seed(seed, 0x11));
    for (int attempt = 0; attempt < 100; ++attempt) {
        ShLighting l;
        for (int c = 0; c < 3; ++c) {
            l(0, c) = r.uniform(0.6, 1.1);
            for (int k = 1; k <= 3; ++k)
                l(k, c) = r.uniform(-0.35, 0.35);
            for (int k = 4; k <= 8; ++k)
                l(k, c) = r.uniform(-0.15, 0.15);
        }
        if (min_hemisphere_shading(l) >= 0.02)
            return {l, key_direction(l)};
    }
    throw Error("lighting rejection sampling exhausted 100 attempts");
}

std::vector<std::uint8_t> cast_shadows(const PosedFrame& frame, const Vec3& key)
{
    const int width = frame.mask.width(), height = frame.mask.height();
    std::vector<std::uint8_t> shadow(frame.mask.pixel_count(), 0);
    const Vec3 step_dir(key.x(), -key.y(), key.z());
    const double planar = std::hypot(step_dir.x(), step_dir.y());
    if (planar < 1e-9)
        return shadow;
    const Vec3 step = step_dir / planar * 0.5;
    const double top = *std::max_element(frame.heightfield.begin(), frame.heightfield.end());
    const double bias = 1e-3 * width;

    auto sample_height = [&](double x, double y) {
        const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, width - 2);
        const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, height - 2);
        const double fx = x - x0, fy = y - y0;
        const auto h = [&](int xx, int yy) { return frame.heightfield[static_cast<std::size_t>(yy) * width + xx]; };
        return (1 - fx) * (1 - fy) * h(x0, y0) + fx * (1 - fy) * h(x0 + 1, y0) + (1 - fx) * fy * h(x0, y0 + 1) +
               fx * fy * h(x0 + 1, y0 + 1);
    };

    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * width + x;
            if (!frame.mask.valid(p) || frame.normal[p].dot(key) <= 0.0)
                continue;
            Vec3 pos(x, y, frame.heightfield[p]);
            for (int k = 0; k < 4 * (width + height); ++k) {
                pos += step;
                if (pos.x() < 0.0 || pos.y() < 0.0 || pos.x() > width - 1 || pos.y() > height - 1)
                    break;
                if (step.z() >= 0.0 && pos.z() > top)
                    break;
                const int xi = static_cast<int>(std::lround(pos.x()));
                const int yi = static_cast<int>(std::lround(pos.y()));
                if (!frame.support[static_cast<std::size_t>(yi) * width + xi])
                    continue;
                if (sample_height(pos.x(), pos.y()) > pos.z() + bias) {
                    shadow[p] = 1;
                    break;
                }
            }
        }
    return shadow;
}

Image make_residual(const PosedFrame& frame, const Image& albedo, const SceneLight& light, const Image& image_local,
                    const ResidualModel& model)
{
    check_same_size(albedo, frame.mask);
    check_same_size(image_local, frame.mask);
    const auto shadow = cast_shadows(frame, light.key_direction);
    const Vec3 half = (light.key_direction + Vec3(0.0, 0.0, 1.0)).normalized();
    Image r(albedo.width(), albedo.height());
    for (std::size_t p = 0; p < frame.mask.pixel_count(); ++p) {
        if (!frame.mask.valid(p))
            continue;
        for (int c = 0; c < 3; ++c) {
            double v = 0.0;
            if (shadow[p]) {
                v = -model.shadow_strength * image_local[3 * p + c];
            } else if (frame.normal[p].dot(light.key_direction) > 0.0) {
                const double nh = std::max(0.0, frame.normal[p].dot(half));
                v = model.highlight_strength * std::pow(nh, model.highlight_exponent);
            }
            r[3 * p + c] = std::clamp(v, -1.0, 1.0);
        }
    }
    return r;
}

FrameSequence gen_sequence(std::uint64_t seed, int n_frames, const SequenceOptions& options)
{
    if (n_frames < 2)
        throw Error("a sequence needs at least 2 frames");
    const Identity id = make_identity(derive_seed(seed, 1), options.width, options.height);
    const double scale = options.width / 64.0;

    FrameSequence seq;
    seq.identity = "identity_" + std::to_string(seed);
    for (int f = 0; f < n_frames; ++f) {
        Rng r(derive_seed(seed, 2, static_cast<std::uint64_t>(f)));
        std::optional<PosedFrame> posed;
        for (int attempt = 0; attempt < 100 && !posed; ++attempt) {
            Pose pose;
            pose.theta = r.uniform(-options.max_rotation_deg, options.max_rotation_deg) * pi / 180.0;
            pose.translation = Vec2(r.uniform(-options.max_translation, options.max_translation) * scale,
                                    r.uniform(-options.max_translation, options.max_translation) * scale);
            pose.scale = r.uniform(options.min_scale, options.max_scale);
            std::array<double, deformation_count> weights{};
            for (auto& w : weights)
                w = r.uniform(-options.deform_scale, options.deform_scale);
            try {
                posed = pose_frame(id, pose, weights);
            } catch (const InvalidPose&) {
            }
        }
        if (!posed)
            throw Error("pose sampling exhausted 100 attempts for frame " + std::to_string(f));

        GroundTruth gt;
        gt.albedo = Image(options.width, options.height);
        for (std::size_t p = 0; p < posed->mask.pixel_count(); ++p) {
            if (!posed->mask.valid(p))
                continue;
            const Vec3 a = id.albedo_at(posed->canonical[p]);
            for (int c = 0; c < 3; ++c)
                gt.albedo[3 * p + c] = a[c];
        }
        gt.normal = posed->normal;

        // Exposure: lights whose render would saturate the 16-bit range are
        // scaled down; lights that then fail positivity are redrawn.
        Image image_global;
        for (std::uint64_t light_index = 0;; ++light_index) {
            if (light_index >= 100)
                throw Error("lighting exposure search exhausted for frame " + std::to_string(f));
            SceneLight light = sample_lighting(derive_seed(seed, 3, static_cast<std::uint64_t>(f) * 1000 + light_index));
            for (int pass = 0; pass < 2; ++pass) {
                gt.image_local = render_local(gt.albedo, gt.normal, light.sh, posed->mask);
                gt.residual = make_residual(*posed, gt.albedo, light, gt.image_local);
                image_global = render_global(gt.image_local, gt.residual);
                const double peak = *std::max_element(image_global.data().begin(), image_global.data().end());
                if (peak <= 1.0)
                    break;
                light.sh *= 0.95 / peak;
                light.key_direction = key_direction(light.sh);
            }
            const double peak = *std::max_element(image_global.data().begin(), image_global.data().end());
            if (peak <= 1.0 && min_hemisphere_shading(light.sh) >= 0.02) {
                gt.lighting = light.sh;
                break;
            }
        }

        FrameRecord rec;
        rec.image_global = std::move(image_global);
        rec.mask = posed->mask;
        rec.landmarks = posed->landmarks;
        rec.ground_truth = std::move(gt);
        seq.frames.push_back(std::move(rec));
    }
    return seq;
}

} /* namespace ifr::synth */
