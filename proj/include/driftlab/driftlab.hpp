#pragma once

#include "driftlab/checkpoint.hpp"
#include "driftlab/config.hpp"
#include "driftlab/core.hpp"
#include "driftlab/drift.hpp"
#include "driftlab/eval.hpp"
#include "driftlab/experiment.hpp"
#include "driftlab/extractor.hpp"
#include "driftlab/nn.hpp"
#include "driftlab/optim.hpp"
#include "driftlab/prototypes.hpp"
#include "driftlab/stream.hpp"
#include "driftlab/toy.hpp"
