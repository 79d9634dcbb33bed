/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: src/apps.cpp
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
#include "ifr/apps.hpp"

#include "ifr/shrender.hpp"

namespace ifr {

Image reconstruction(const Decomposition& d, const Mask& m)
{
    return render_global(render_local(d.albedo, d.normal, d.lighting, m), d.residual);
}

Image relight(const Decomposition& d, const Mask& m, const ShLighting& target, bool keep_residual)
{
    if (!target.allFinite())
        throw Error("target lighting is not finite");
    Image local = render_local(d.albedo, d.normal, target, m);
    if (keep_residual)
        return render_global(local, d.residual);
    return render_global(local, Image(m.width(), m.height()));
}

Image edit_albedo(const Decomposition& d, const Mask& m, const Image& edit_image, const Mask& edit_mask)
{
    check_same_size(edit_image, d.albedo);
    check_same_size(edit_image, edit_mask);
    Decomposition edited = d;
    for (std::size_t p = 0; p < edit_mask.pixel_count(); ++p)
        if (edit_mask.valid(p))
            for (int c = 0; c < 3; ++c)
                edited.albedo[3 * p + c] = edit_image[3 * p + c];
    return reconstruction(edited, m);
}

} /* namespace ifr */
