#pragma once

// Umbrella header.

#include "rcdetect/common.hpp"
#include "rcdetect/detector.hpp"
#include "rcdetect/experiment.hpp"
#include "rcdetect/matrixio.hpp"
#include "rcdetect/models.hpp"
#include "rcdetect/netgen.hpp"
#include "rcdetect/reservoir.hpp"
#include "rcdetect/signals.hpp"
