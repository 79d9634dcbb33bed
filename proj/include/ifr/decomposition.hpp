/*
 * ifr - Inverse face rendering by energy minimization.
 *
 * File: include/ifr/decomposition.hpp
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

#ifndef IFR_DECOMPOSITION_HPP_
#define IFR_DECOMPOSITION_HPP_

#include "ifr/core.hpp"

namespace ifr {

/**
 * The four intrinsic layers of one frame. Albedo is kept in [0, 2], the
 * residual in [-1, 1], and normals unit length on the frame mask.
 */
struct Decomposition
{
    Image albedo;
    NormalMap normal;
    ShLighting lighting = ShLighting::Zero();
    Image residual;
};

} /* namespace ifr */

#endif /* IFR_DECOMPOSITION_HPP_ */
