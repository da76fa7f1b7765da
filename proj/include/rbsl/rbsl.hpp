#pragma once

#include "rbsl/agent.hpp"
#include "rbsl/config.hpp"
#include "rbsl/csv.hpp"
#include "rbsl/dataset_io.hpp"
#include "rbsl/goal_trainer.hpp"
#include "rbsl/plot.hpp"
#include "rbsl/recovery_trainer.hpp"
#include "rbsl/run.hpp"
