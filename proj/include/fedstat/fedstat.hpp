#pragma once

#include "fedstat/critvals.hpp"
#include "fedstat/engine.hpp"
#include "fedstat/harness.hpp"
#include "fedstat/models.hpp"
#include "fedstat/parallel.hpp"
#include "fedstat/plugin.hpp"
#include "fedstat/random.hpp"
#include "fedstat/rscale.hpp"
#include "fedstat/schedules.hpp"
