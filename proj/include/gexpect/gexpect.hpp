/**
 * @file gexpect.hpp
 * @brief Umbrella header for the gexpect library
 */

#pragma once

#include "gexpect/error.hpp"
#include "gexpect/expectation.hpp"
#include "gexpect/gdsl.hpp"
#include "gexpect/lattice.hpp"
#include "gexpect/lsmc.hpp"
#include "gexpect/model.hpp"
#include "gexpect/parallel.hpp"
#include "gexpect/properties.hpp"
#include "gexpect/random.hpp"
#include "gexpect/representation.hpp"
#include "gexpect/risk.hpp"
