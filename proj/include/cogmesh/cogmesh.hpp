#pragma once

#include "cogmesh/engine.hpp"
#include "cogmesh/error.hpp"
#include "cogmesh/knowledge.hpp"
#include "cogmesh/l2conf.hpp"
#include "cogmesh/markov.hpp"
#include "cogmesh/qos.hpp"
#include "cogmesh/scenario.hpp"
#include "cogmesh/selfmgmt.hpp"
#include "cogmesh/spectrum.hpp"
#include "cogmesh/trace.hpp"
