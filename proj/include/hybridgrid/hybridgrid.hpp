#pragma once

#include "hybridgrid/certification.hpp"
#include "hybridgrid/controllers.hpp"
#include "hybridgrid/delay.hpp"
#include "hybridgrid/dynamics.hpp"
#include "hybridgrid/errors.hpp"
#include "hybridgrid/network.hpp"
#include "hybridgrid/runner.hpp"
#include "hybridgrid/scenario.hpp"
#include "hybridgrid/state.hpp"
#include "hybridgrid/steady_state.hpp"
#include "hybridgrid/units.hpp"
