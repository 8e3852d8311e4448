#pragma once

#include "apm/analysts.hpp"
#include "apm/backtest.hpp"
#include "apm/config.hpp"
#include "apm/error.hpp"
#include "apm/evaluate.hpp"
#include "apm/indicators.hpp"
#include "apm/ips.hpp"
#include "apm/market_data.hpp"
#include "apm/ml.hpp"
#include "apm/order.hpp"
#include "apm/portfolio.hpp"
#include "apm/strategies.hpp"
#include "apm/synthetic.hpp"
#include "apm/timestamp.hpp"
