#pragma once

// Covariate-adjusted nonlinear regression: distortion estimation by kernel
// smoothing, restoration, nonlinear least squares, and confidence regions by
// empirical likelihood and normal approximation.

#include "canreg/covariance.hpp"
#include "canreg/efficiency.hpp"
#include "canreg/empirical_likelihood.hpp"
#include "canreg/errors.hpp"
#include "canreg/io.hpp"
#include "canreg/kernel.hpp"
#include "canreg/model.hpp"
#include "canreg/nls.hpp"
#include "canreg/quadrature.hpp"
#include "canreg/restore.hpp"
#include "canreg/rng.hpp"
#include "canreg/score_expansion.hpp"
#include "canreg/sim.hpp"
#include "canreg/special.hpp"
