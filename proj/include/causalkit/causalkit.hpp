#pragma once

#include "causalkit/consensus.hpp"
#include "causalkit/constraints.hpp"
#include "causalkit/dataset.hpp"
#include "causalkit/elicitation.hpp"
#include "causalkit/errors.hpp"
#include "causalkit/experiment.hpp"
#include "causalkit/graph.hpp"
#include "causalkit/graph_io.hpp"
#include "causalkit/metrics.hpp"
#include "causalkit/scoring.hpp"
#include "causalkit/search.hpp"
