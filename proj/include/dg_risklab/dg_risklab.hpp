#pragma once

#include "dg_risklab/bayes.hpp"
#include "dg_risklab/commands.hpp"
#include "dg_risklab/distribution.hpp"
#include "dg_risklab/erm.hpp"
#include "dg_risklab/error.hpp"
#include "dg_risklab/experiment.hpp"
#include "dg_risklab/generators.hpp"
#include "dg_risklab/random.hpp"
#include "dg_risklab/spec_format.hpp"
