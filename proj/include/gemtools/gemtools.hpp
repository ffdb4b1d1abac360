#pragma once

#include "gemtools/clustering.hpp"
#include "gemtools/engine.hpp"
#include "gemtools/error.hpp"
#include "gemtools/genotype_io.hpp"
#include "gemtools/matching.hpp"
#include "gemtools/metrics.hpp"
#include "gemtools/min_cost_flow.hpp"
#include "gemtools/rng.hpp"
#include "gemtools/simulate.hpp"
#include "gemtools/spectral.hpp"
#include "gemtools/tracy_widom.hpp"
#include "gemtools/tree_io.hpp"
