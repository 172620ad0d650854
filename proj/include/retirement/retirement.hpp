#pragma once

#include "retirement/error.hpp"
#include "retirement/model.hpp"
#include "retirement/mortality.hpp"
#include "retirement/ode.hpp"
#include "retirement/post_retirement.hpp"
#include "retirement/grid.hpp"
#include "retirement/pre_retirement.hpp"
#include "retirement/policy_sim.hpp"
#include "retirement/calibrate.hpp"
#include "retirement/csv.hpp"
