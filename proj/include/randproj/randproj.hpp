// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "randproj/errors.hpp"
#include "randproj/seed.hpp"
#include "randproj/parallel.hpp"
#include "randproj/manifold_model.hpp"
#include "randproj/gp_sampler.hpp"
#include "randproj/projector.hpp"
#include "randproj/cone_guarantees.hpp"
#include "randproj/theory.hpp"
#include "randproj/experiments.hpp"
#include "randproj/harness/config.hpp"
#include "randproj/harness/output.hpp"
#include "randproj/harness/run.hpp"
