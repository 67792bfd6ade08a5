#pragma once

#include "hetbayes/design.hpp"
#include "hetbayes/experiment.hpp"
#include "hetbayes/gaussian_model.hpp"
#include "hetbayes/holder_functions.hpp"
#include "hetbayes/posterior.hpp"
#include "hetbayes/priors.hpp"
#include "hetbayes/quadrature.hpp"
#include "hetbayes/random.hpp"
#include "hetbayes/spline_basis.hpp"
#include "hetbayes/stats.hpp"
#include "hetbayes/theory_lab.hpp"
#include "hetbayes/verify_suites.hpp"
