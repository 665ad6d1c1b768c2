#pragma once

#include "fedcdh/error.hpp"
#include "fedcdh/rng.hpp"
#include "fedcdh/graph.hpp"
#include "fedcdh/features.hpp"
#include "fedcdh/summary.hpp"
#include "fedcdh/citest.hpp"
#include "fedcdh/icp.hpp"
#include "fedcdh/discovery.hpp"
#include "fedcdh/federation.hpp"
#include "fedcdh/wire.hpp"
#include "fedcdh/bundle.hpp"
#include "fedcdh/datagen.hpp"
#include "fedcdh/metrics.hpp"
