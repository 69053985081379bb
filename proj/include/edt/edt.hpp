#pragma once

// Umbrella header: the full engine, model, diagnostics, data pipeline and
// training harness.

#include "edt/core/conv.hpp"
#include "edt/core/finite_diff.hpp"
#include "edt/core/graph.hpp"
#include "edt/core/ops.hpp"
#include "edt/core/shape_ops.hpp"
#include "edt/data/patches.hpp"
#include "edt/diag/export.hpp"
#include "edt/model/counting.hpp"
#include "edt/train/trainer.hpp"
