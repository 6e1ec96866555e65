#pragma once

#include "analysis.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "constants.hpp"
#include "dynamics.hpp"
#include "ensemble.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "fft.hpp"
#include "grid.hpp"
#include "output.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "svg.hpp"
#include "theory.hpp"

namespace atomlaser {

inline constexpr const char* version = "1.0.0";

}  // namespace atomlaser
