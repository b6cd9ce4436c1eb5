#pragma once

#include "tglab/constructions.hpp"
#include "tglab/dbn.hpp"
#include "tglab/engine.hpp"
#include "tglab/error.hpp"
#include "tglab/explainers.hpp"
#include "tglab/graph.hpp"
#include "tglab/model.hpp"
#include "tglab/parallel.hpp"
#include "tglab/perturbation.hpp"
#include "tglab/report.hpp"
#include "tglab/rng.hpp"
#include "tglab/scalar.hpp"
#include "tglab/transparency.hpp"
#include "tglab/verification.hpp"
