// sagnac.hpp -- everything at once

#pragma once

#include "analysis.hpp"
#include "config.hpp"
#include "detection.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "polarization.hpp"
#include "rng.hpp"
#include "scenarios.hpp"
#include "source.hpp"
#include "spectral.hpp"
#include "tomography.hpp"
