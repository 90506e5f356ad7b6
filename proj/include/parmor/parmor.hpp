#pragma once

// Umbrella header: the whole library in dependency order.

#include "parmor/types.hpp"
#include "parmor/errors.hpp"
#include "parmor/linalg.hpp"
#include "parmor/coeff.hpp"
#include "parmor/psys.hpp"
#include "parmor/siggen.hpp"
#include "parmor/moment_series.hpp"
#include "parmor/moment_basis.hpp"
#include "parmor/rom.hpp"
#include "parmor/nonlinear.hpp"
#include "parmor/sim.hpp"
#include "parmor/eval.hpp"
#include "parmor/io.hpp"
#include "parmor/experiment.hpp"
#include "parmor/cli.hpp"
