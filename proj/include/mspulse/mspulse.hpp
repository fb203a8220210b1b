#pragma once

// Carrier-compensated amplitude pulse design and verification for
// Molmer-Sorensen gates in linear trapped-ion chains.

#include "mspulse/constants.hpp"
#include "mspulse/errors.hpp"
#include "mspulse/gate_analytics.hpp"
#include "mspulse/io.hpp"
#include "mspulse/ion_chain.hpp"
#include "mspulse/pulse_solver.hpp"
#include "mspulse/quadrature.hpp"
#include "mspulse/scan.hpp"
#include "mspulse/spline.hpp"
#include "mspulse/tdse.hpp"
#include "mspulse/transform.hpp"
#include "mspulse/version.hpp"
