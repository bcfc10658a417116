#pragma once

#include "ebsl/baselines.hpp"
#include "ebsl/enet_rvm.hpp"
#include "ebsl/errors.hpp"
#include "ebsl/io.hpp"
#include "ebsl/metrics.hpp"
#include "ebsl/mxn_rvm.hpp"
#include "ebsl/objective.hpp"
#include "ebsl/posterior.hpp"
#include "ebsl/problem.hpp"
#include "ebsl/simulate.hpp"
#include "ebsl/solver_types.hpp"
#include "ebsl/specfn.hpp"
