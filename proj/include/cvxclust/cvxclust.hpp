#pragma once

#include "errors.hpp"
#include "dataio.hpp"
#include "weight_graph.hpp"
#include "prox.hpp"
#include "exact_solvers.hpp"
#include "carp.hpp"
#include "cbass.hpp"
#include "dendrogram.hpp"
#include "metrics.hpp"
#include "io.hpp"
