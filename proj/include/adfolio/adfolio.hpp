#pragma once

#include "adfolio/io.hpp"
#include "adfolio/oracle.hpp"
#include "adfolio/posterior.hpp"
#include "adfolio/qp.hpp"
#include "adfolio/rng.hpp"
#include "adfolio/simulator.hpp"
#include "adfolio/types.hpp"
#include "adfolio/variance.hpp"
#include "adfolio/version.hpp"
