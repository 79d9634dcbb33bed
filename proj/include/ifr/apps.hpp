/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/apps.hpp
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

#ifndef IFR_APPS_HPP_
#define IFR_APPS_HPP_

#include "ifr/core.hpp"
#include "ifr/decomposition.hpp"

namespace ifr {

/// render_global(render_local(A, N, L), R) over the mask.
Image reconstruction(const Decomposition& d, const Mask& m);

/**
 * Re-renders under `target`. The residual carries shadows and highlights of
 * the original light, so it is dropped unless `keep_residual` is set.
 */
Image relight(const Decomposition& d, const Mask& m, const ShLighting& target, bool keep_residual = false);

/// Replaces the albedo inside `edit_mask` by `edit_image` and re-renders
/// with the original normals, lighting and residual.
Image edit_albedo(const Decomposition& d, const Mask& m, const Image& edit_image, const Mask& edit_mask);

} /* namespace ifr */

#endif /* IFR_APPS_HPP_ */
