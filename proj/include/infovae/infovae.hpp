#pragma once

#include "infovae/autodiff.hpp"
#include "infovae/diagnostics.hpp"
#include "infovae/distributions.hpp"
#include "infovae/divergences.hpp"
#include "infovae/errors.hpp"
#include "infovae/extended.hpp"
#include "infovae/models.hpp"
#include "infovae/nn.hpp"
#include "infovae/objectives.hpp"
#include "infovae/random.hpp"
#include "infovae/sampling.hpp"
#include "infovae/tabular.hpp"
#include "infovae/tabular_model.hpp"
#include "infovae/training.hpp"
