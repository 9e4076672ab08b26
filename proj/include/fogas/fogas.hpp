#pragma once

#include "fogas/common.hpp"
#include "fogas/linear_mdp.hpp"
#include "fogas/policy.hpp"
#include "fogas/covariance.hpp"
#include "fogas/oracle.hpp"
#include "fogas/offline_data.hpp"
#include "fogas/solver.hpp"
#include "fogas/diagnostics.hpp"
#include "fogas/experiment.hpp"
