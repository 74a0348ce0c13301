#pragma once

#include "hmdsim/units.hpp"
#include "hmdsim/error.hpp"
#include "hmdsim/mem_model.hpp"
#include "hmdsim/telemetry.hpp"
#include "hmdsim/network_link.hpp"
#include "hmdsim/cost_model.hpp"
#include "hmdsim/policies.hpp"
#include "hmdsim/oracle.hpp"
#include "hmdsim/workload.hpp"
#include "hmdsim/engine.hpp"
#include "hmdsim/bandit.hpp"
#include "hmdsim/training.hpp"
#include "hmdsim/config.hpp"
#include "hmdsim/report.hpp"
