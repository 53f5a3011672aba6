#pragma once

// Concurrent sets with interchangeable linearizable size methods, plus the
// linearizability harness and benchmark driver used to validate them.

#include "sizable/bench.hpp"
#include "sizable/common.hpp"
#include "sizable/harness.hpp"
#include "sizable/history.hpp"
#include "sizable/linearizability_checker.hpp"
#include "sizable/sized_set.hpp"
#include "sizable/thread_registry.hpp"
#include "sizable/workload.hpp"
