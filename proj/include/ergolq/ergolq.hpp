#pragma once

#include "ergolq/error.hpp"
#include "ergolq/linalg.hpp"
#include "ergolq/model.hpp"
#include "ergolq/algebra.hpp"
#include "ergolq/stationary.hpp"
#include "ergolq/riccati.hpp"
#include "ergolq/ergodic.hpp"
#include "ergolq/analytic1d.hpp"
#include "ergolq/simulate.hpp"
