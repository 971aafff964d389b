#pragma once

#include "gridcast/analysis.hpp"
#include "gridcast/baselines.hpp"
#include "gridcast/grid.hpp"
#include "gridcast/ingest.hpp"
#include "gridcast/metrics.hpp"
#include "gridcast/outliers.hpp"
#include "gridcast/static_graph.hpp"
#include "gridcast/tensor.hpp"
#include "gridcast/tensor_io.hpp"
#include "gridcast/test_slots.hpp"
#include "gridcast/util.hpp"
