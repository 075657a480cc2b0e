#pragma once

#include "netcf/ccv.hpp"
#include "netcf/core.hpp"
#include "netcf/dpnb.hpp"
#include "netcf/envs/env.hpp"
#include "netcf/errors.hpp"
#include "netcf/estimators.hpp"
#include "netcf/graph.hpp"
#include "netcf/harness.hpp"
#include "netcf/io.hpp"
#include "netcf/linalg.hpp"
#include "netcf/rng.hpp"
