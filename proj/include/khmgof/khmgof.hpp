#pragma once

// Umbrella header for the full library.

#include "khmgof/commands.hpp"
#include "khmgof/errors.hpp"
#include "khmgof/families.hpp"
#include "khmgof/gamma.hpp"
#include "khmgof/io.hpp"
#include "khmgof/mc.hpp"
#include "khmgof/process_path.hpp"
#include "khmgof/quadrature.hpp"
#include "khmgof/regression.hpp"
#include "khmgof/rng.hpp"
#include "khmgof/stats.hpp"
#include "khmgof/transform.hpp"
