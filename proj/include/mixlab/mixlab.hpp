// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mixlab/numerics.hpp"
#include "mixlab/random.hpp"
#include "mixlab/mixing.hpp"
#include "mixlab/synthdata.hpp"
#include "mixlab/model.hpp"
#include "mixlab/metrics.hpp"
#include "mixlab/training.hpp"
#include "mixlab/evaluation.hpp"
#include "mixlab/experiment.hpp"
