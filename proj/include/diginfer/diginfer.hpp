#pragma once

#include "diginfer/dbscan.hpp"
#include "diginfer/errors.hpp"
#include "diginfer/evaluate.hpp"
#include "diginfer/gpr.hpp"
#include "diginfer/moments.hpp"
#include "diginfer/pipeline.hpp"
#include "diginfer/rng.hpp"
#include "diginfer/simulate.hpp"
#include "diginfer/spatial_index.hpp"
#include "diginfer/svg_plot.hpp"
#include "diginfer/telemetry.hpp"
#include "diginfer/util.hpp"
