/**
 * @file evaluate.hpp
 * @brief Performance report of an equity curve.
 *
 * With r_t = E_t / E_{t-1} - 1 over N returns and P periods per year:
 *
 *     annualized return = (E_N / E_0)^(P / N) - 1
 *     volatility        = sample stdev of r_t                (per period)
 *     annualized Sharpe = mean(r_t - rf_p) / stdev(r_t) * sqrt(P),
 *                         rf_p = (1 + rf)^(1 / P) - 1
 *
 * All three are reported in percent. Sharpe is undefined when the returns
 * have zero spread.
 */

#pragma once

#include "apm/backtest.hpp"
#include "apm/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace apm::evaluate
{

    inline double periods_per_year(Period p)
    {
        return p == Period::Daily ? trading_days_per_year : trading_days_per_year * 390.0;
    }

    struct PerformanceReport
    {
        double annualized_return_pct = 0.0;
        std::optional<double> annualized_sharpe_pct; ///< nullopt: zero volatility
        double volatility_pct = 0.0;                 ///< per-period (daily for daily bars)
        double annualized_volatility_pct = 0.0;
        double max_drawdown_pct = 0.0;
        std::size_t n_bars = 0;
        Timestamp start;
        Timestamp end;
    };

    inline PerformanceReport evaluate(const backtest::EquityFrame &equity, double risk_free = 0.0,
                                      double periods = trading_days_per_year)
    {
        if (equity.size() < 2)
            fail(Errc::TooFewRecords, "need at least 2 equity records, got " + std::to_string(equity.size()));
        for (const auto &r : equity)
            if (!(r.equity > 0.0))
                fail(Errc::InvalidArgument, "equity must stay positive to compute returns");

        const std::size_t n = equity.size() - 1;
        std::vector<double> returns(n);
        for (std::size_t t = 1; t <= n; ++t)
            returns[t - 1] = equity[t].equity / equity[t - 1].equity - 1.0;

        double mean = 0.0;
        for (double r : returns)
            mean += r;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double r : returns)
            var += (r - mean) * (r - mean);
        const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;

        PerformanceReport rep;
        rep.n_bars = equity.size();
        rep.start = equity.front().timestamp;
        rep.end = equity.back().timestamp;
        rep.annualized_return_pct =
            100.0 * (std::pow(equity.back().equity / equity.front().equity, periods / static_cast<double>(n)) - 1.0);
        rep.volatility_pct = 100.0 * sd;
        rep.annualized_volatility_pct = 100.0 * sd * std::sqrt(periods);
        if (sd > 0.0)
        {
            const double rf_period = std::pow(1.0 + risk_free, 1.0 / periods) - 1.0;
            rep.annualized_sharpe_pct = 100.0 * (mean - rf_period) / sd * std::sqrt(periods);
        }

        double peak = equity.front().equity;
        for (const auto &r : equity)
        {
            peak = std::max(peak, r.equity);
            rep.max_drawdown_pct = std::max(rep.max_drawdown_pct, 100.0 * (peak - r.equity) / peak);
        }
        return rep;
    }

    inline PerformanceReport evaluate_file(const std::string &path, double risk_free = 0.0,
                                           double periods = trading_days_per_year)
    {
        return evaluate(backtest::read_results_csv(path), risk_free, periods);
    }

    inline nlohmann::json to_json(const PerformanceReport &r)
    {
        return nlohmann::json{
            {"ann_return_pct", r.annualized_return_pct},
            {"ann_sharpe_pct", r.annualized_sharpe_pct ? nlohmann::json(*r.annualized_sharpe_pct) : nlohmann::json()},
            {"daily_vol_pct", r.volatility_pct},
            {"max_drawdown_pct", r.max_drawdown_pct},
            {"n_bars", r.n_bars},
        };
    }

    inline std::string fixed(double v, int digits)
    {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
        return buf;
    }

    inline std::string to_text(const PerformanceReport &r)
    {
        std::ostringstream out;
        const auto line = [&](const char *label, const std::string &value) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%-24s %14s\n", label, value.c_str());
            out << buf;
        };
        line("Period", r.start.to_string() + " .. " + r.end.to_string());
        line("Bars", std::to_string(r.n_bars));
        line("An. Return (%)", fixed(r.annualized_return_pct, 2));
        line("An. Sharpe Ratio (%)", r.annualized_sharpe_pct ? fixed(*r.annualized_sharpe_pct, 2) : "undefined");
        line("Volatility (%)", fixed(r.volatility_pct, 3));
        line("An. Volatility (%)", fixed(r.annualized_volatility_pct, 2));
        line("Max Drawdown (%)", fixed(r.max_drawdown_pct, 2));
        return out.str();
    }

} // namespace apm::evaluate
