#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "exprlang.hpp"
#include "problem.hpp"
#include "solver.hpp"
#include "bounds.hpp"
#include "splitting.hpp"
#include "io.hpp"
#include "scenario.hpp"
#include "commands.hpp"
