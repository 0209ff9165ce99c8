#pragma once

#include "pssim/assign.hpp"
#include "pssim/coupling.hpp"
#include "pssim/decomposition.hpp"
#include "pssim/diagnostics.hpp"
#include "pssim/error.hpp"
#include "pssim/kernel.hpp"
#include "pssim/lattice.hpp"
#include "pssim/models.hpp"
#include "pssim/normal.hpp"
#include "pssim/random.hpp"
#include "pssim/sketch.hpp"
#include "pssim/state_space.hpp"
