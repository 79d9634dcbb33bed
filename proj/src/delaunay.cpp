/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/delaunay.cpp
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

#include <algorithm>
#include <cmath>
#include <map>

namespace ifr {

namespace {

double orient(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Positive when d lies strictly inside the circumcircle of the
// counter-clockwise triangle (a, b, c).
double in_circle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    const double adx = a.x() - d.x(), ady = a.y() - d.y();
    const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
    const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
    const double ad = adx * adx + ady * ady;
    const double bd = bdx * bdx + bdy * bdy;
    const double cd = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

} // namespace

std::vector<Triangle> delaunay_triangulation(const std::vector<Vec2>& input)
{
    const int n = static_cast<int>(input.size());
    if (n < 3)
        throw Error("triangulation needs at least 3 points");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if ((input[i] - input[j]).squaredNorm() < 1e-18)
                throw Error("triangulation input has duplicate points");

    Vec2 lo = input.front(), hi = input.front();
    for (const auto& p : input) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1.0});
    const Vec2 mid = 0.5 * (lo + hi);

    std::vector<Vec2> pts = input;
    pts.emplace_back(mid.x() - 40.0 * span, mid.y() - 20.0 * span);
    pts.emplace_back(mid.x() + 40.0 * span, mid.y() - 20.0 * span);
    pts.emplace_back(mid.x(), mid.y() + 40.0 * span);

    const double eps = 1e-12 * span * span * span * span;
    std::vector<Triangle> tris;
    auto push_ccw = [&](int a, int b, int c) {
        const double o = orient(pts[a], pts[b], pts[c]);
        if (std::abs(o) < 1e-12 * span * span)
            return;
        if (o < 0)
            std::swap(b, c);
        tris.push_back({a, b, c});
    };
    push_ccw(n, n + 1, n + 2);

    for (int i = 0; i < n; ++i) {
        std::vector<Triangle> keep;
        std::map<std::pair<int, int>, int> edges;
        for (const auto& t : tris) {
            if (in_circle(pts[t[0]], pts[t[1]], pts[t[2]], pts[i]) > eps) {
                for (int e = 0; e < 3; ++e) {
                    int a = t[e], b = t[(e + 1) % 3];
                    ++edges[{std::min(a, b), std::max(a, b)}];
                }
            } else {
                keep.push_back(t);
            }
        }
        tris = std::move(keep);
        for (const auto& [edge, count] : edges)
            if (count == 1)
                push_ccw(edge.first, edge.second, i);
    }

    std::vector<Triangle> out;
    for (const auto& t : tris)
        if (t[0] < n && t[1] < n && t[2] < n)
            out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
}

} /* namespace ifr */
