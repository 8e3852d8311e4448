/**
 * @file synthetic.hpp
 * @brief Seeded geometric random-walk daily bars on weekdays, for demos and tests.
 */

#pragma once

#include "apm/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace apm::synthetic
{

    struct WalkOptions
    {
        double start_price = 100.0;
        double drift = 0.0003;     ///< mean daily log return
        double volatility = 0.015; ///< stdev of daily log return
    };

    inline BarSeries random_walk(const std::string &asset, std::size_t n_bars, std::uint64_t seed,
                                 Timestamp first = Timestamp::from_date(2018, 1, 2), WalkOptions opt = {})
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> step(opt.drift, opt.volatility);
        std::uniform_real_distribution<double> wick(0.0, opt.volatility / 2);
        std::uniform_int_distribution<int> volume(10'000, 1'000'000);

        BarSeries s{asset, Period::Daily, {}};
        s.bars.reserve(n_bars);
        std::int64_t day = first.epoch_seconds() / 86400;
        double prev = opt.start_price;
        while (s.bars.size() < n_bars)
        {
            const auto weekday = ((day + 4) % 7 + 7) % 7; // 0 = Sunday
            if (weekday != 0 && weekday != 6)
            {
                Bar b;
                b.timestamp = Timestamp::from_epoch_seconds(day * 86400, true);
                b.open = prev * std::exp(step(rng) / 4);
                b.close = b.open * std::exp(step(rng));
                b.high = std::max(b.open, b.close) * (1.0 + wick(rng));
                b.low = std::min(b.open, b.close) * (1.0 - wick(rng));
                b.volume = volume(rng);
                s.bars.push_back(b);
                prev = b.close;
            }
            ++day;
        }
        return s;
    }

} // namespace apm::synthetic
