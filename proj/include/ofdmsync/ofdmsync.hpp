#pragma once

#include "channel.hpp"
#include "config.hpp"
#include "core.hpp"
#include "estimators.hpp"
#include "experiment.hpp"
#include "harness.hpp"
#include "loops.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "tables.hpp"
