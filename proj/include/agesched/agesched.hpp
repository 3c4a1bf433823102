#pragma once

#include "agesched/analysis.hpp"
#include "agesched/baselines.hpp"
#include "agesched/benchmark.hpp"
#include "agesched/errors.hpp"
#include "agesched/model.hpp"
#include "agesched/optimizer.hpp"
#include "agesched/pattern.hpp"
#include "agesched/simulator.hpp"
#include "agesched/synthesis.hpp"
#include "agesched/truncated_mgf.hpp"
