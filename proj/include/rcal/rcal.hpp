#pragma once

#include "rcal/correspondence.hpp"
#include "rcal/error.hpp"
#include "rcal/geometry.hpp"
#include "rcal/io.hpp"
#include "rcal/metrics.hpp"
#include "rcal/solver.hpp"
#include "rcal/synth.hpp"
