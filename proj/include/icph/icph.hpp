#pragma once

// Umbrella header for the icph library.

#include "icph/chi2.hpp"
#include "icph/csv.hpp"
#include "icph/discovery.hpp"
#include "icph/equality.hpp"
#include "icph/errors.hpp"
#include "icph/estimation.hpp"
#include "icph/experiments.hpp"
#include "icph/lasso.hpp"
#include "icph/optim.hpp"
#include "icph/parallel.hpp"
#include "icph/regions.hpp"
#include "icph/rng.hpp"
#include "icph/scm.hpp"
#include "icph/srm.hpp"
#include "icph/types.hpp"
