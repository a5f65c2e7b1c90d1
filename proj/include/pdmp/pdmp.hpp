#pragma once

// Umbrella header: the full library.

#include "pdmp/errors.hpp"
#include "pdmp/generator.hpp"
#include "pdmp/models.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/process.hpp"
#include "pdmp/quadrature.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/sds.hpp"
#include "pdmp/stieltjes.hpp"
#include "pdmp/value.hpp"
