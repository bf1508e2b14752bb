#pragma once

#include "npgroup/anova.hpp"
#include "npgroup/config.hpp"
#include "npgroup/config_json.hpp"
#include "npgroup/csv.hpp"
#include "npgroup/error.hpp"
#include "npgroup/group_test.hpp"
#include "npgroup/projection.hpp"
#include "npgroup/rng.hpp"
#include "npgroup/selection.hpp"
#include "npgroup/simulation.hpp"
#include "npgroup/smoothing.hpp"
#include "npgroup/types.hpp"
