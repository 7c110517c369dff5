#pragma once

// Umbrella header for the whole library.

#include "fibm/bench.hpp"
#include "fibm/diffusion.hpp"
#include "fibm/error.hpp"
#include "fibm/graph.hpp"
#include "fibm/objectives.hpp"
#include "fibm/optimize.hpp"
#include "fibm/parallel.hpp"
#include "fibm/rng.hpp"
#include "fibm/synthetic.hpp"
#include "fibm/vrr_index.hpp"
