#pragma once

#include "crosscast/candles.hpp"
#include "crosscast/dataset.hpp"
#include "crosscast/eval.hpp"
#include "crosscast/indicators.hpp"
#include "crosscast/lstm.hpp"
#include "crosscast/mlr.hpp"
#include "crosscast/phase.hpp"
