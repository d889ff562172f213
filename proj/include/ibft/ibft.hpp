#pragma once

#include "ibft/core.hpp"
#include "ibft/justification.hpp"
#include "ibft/instance.hpp"
#include "ibft/smr.hpp"
#include "ibft/adversary.hpp"
#include "ibft/trace.hpp"
#include "ibft/scenario.hpp"
#include "ibft/simnet.hpp"
#include "ibft/checks.hpp"
#include "ibft/report.hpp"
#include "ibft/fuzz.hpp"
#include "ibft/explore.hpp"
