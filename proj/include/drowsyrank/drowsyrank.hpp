#pragma once

#include "drowsyrank/baselines.hpp"
#include "drowsyrank/data.hpp"
#include "drowsyrank/eval.hpp"
#include "drowsyrank/features.hpp"
#include "drowsyrank/lasso.hpp"
#include "drowsyrank/pipeline.hpp"
#include "drowsyrank/ranker.hpp"
#include "drowsyrank/rng.hpp"
#include "drowsyrank/synth.hpp"
