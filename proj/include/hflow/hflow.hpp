// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hflow/accuracy.hpp"
#include "hflow/bench.hpp"
#include "hflow/config.hpp"
#include "hflow/core_model.hpp"
#include "hflow/cost_model.hpp"
#include "hflow/error.hpp"
#include "hflow/layout.hpp"
#include "hflow/numerics/counting.hpp"
#include "hflow/numerics/fixed.hpp"
#include "hflow/numerics/format.hpp"
#include "hflow/numerics/half.hpp"
#include "hflow/pipeline.hpp"
#include "hflow/qe_kernel.hpp"
#include "hflow/randomness.hpp"
#include "hflow/reduction.hpp"
#include "hflow/report.hpp"
#include "hflow/stream.hpp"
