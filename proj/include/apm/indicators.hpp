#pragma once

#include "apm/error.hpp"

#include <cstddef>
#include <numeric>
#include <span>
#include <string>

namespace apm::indicators
{

    namespace detail
    {
        inline void require_length(std::span<const double> closes, std::size_t n, const char *what)
        {
            if (closes.size() < n)
                fail(Errc::WindowTooShort, std::string(what) + " needs at least " + std::to_string(n) +
                                               " closes, got " + std::to_string(closes.size()));
        }
    } // namespace detail

    /// Relative strength index over the whole window with simple (unsmoothed)
    /// averages of the close-to-close gains and losses. A flat window reads 50.
    ///
    /// Note the trading rules built on this read rsi >= 70 as a buy signal,
    /// which is the opposite of the usual overbought interpretation.
    inline double rsi(std::span<const double> closes)
    {
        detail::require_length(closes, 2, "rsi");
        double gains = 0.0;
        double losses = 0.0;
        for (std::size_t i = 1; i < closes.size(); ++i)
        {
            const double diff = closes[i] - closes[i - 1];
            if (diff > 0)
                gains += diff;
            else
                losses -= diff;
        }
        if (gains == 0.0 && losses == 0.0)
            return 50.0;
        if (losses == 0.0)
            return 100.0;
        if (gains == 0.0)
            return 0.0;
        // Both averages share the n-1 denominator, so it cancels in the ratio.
        const double rs = gains / losses;
        return 100.0 - 100.0 / (1.0 + rs);
    }

    /// Arithmetic mean of the last `period` closes.
    inline double moving_average(std::span<const double> closes, std::size_t period)
    {
        if (period < 1)
            fail(Errc::InvalidArgument, "moving average period must be >= 1");
        detail::require_length(closes, period, "moving_average");
        const auto tail = closes.last(period);
        return std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(period);
    }

    /// OLS slope of close against bar index 0..n-1, in price units per bar.
    inline double trend(std::span<const double> closes)
    {
        detail::require_length(closes, 2, "trend");
        const auto n = static_cast<double>(closes.size());
        const double x_mean = (n - 1.0) / 2.0;
        const double y_mean = std::accumulate(closes.begin(), closes.end(), 0.0) / n;
        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t i = 0; i < closes.size(); ++i)
        {
            const double dx = static_cast<double>(i) - x_mean;
            sxy += dx * (closes[i] - y_mean);
            sxx += dx * dx;
        }
        return sxy / sxx;
    }

} // namespace apm::indicators
