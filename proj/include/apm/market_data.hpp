/**
 * @file market_data.hpp
 * @brief OHLCV bars, per-asset series, CSV I/O, calendar alignment and
 *        trailing decision windows.
 *
 * Bar CSV schema (header required):
 *
 *     timestamp,open,high,low,close,volume
 *
 * Timestamps are `YYYY-MM-DD` (daily) or `YYYY-MM-DDTHH:MM:SS` (intraday).
 * Prices are written in shortest round-trip form, so write + load is exact.
 */

#pragma once

#include "apm/detail/text.hpp"
#include "apm/error.hpp"
#include "apm/timestamp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iterator>
#include <istream>
#include <optional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace apm
{

    enum class Period
    {
        Daily,
        Intraday, ///< one-minute bars
    };

    struct Bar
    {
        Timestamp timestamp;
        double open = 0.0;
        double high = 0.0;
        double low = 0.0;
        double close = 0.0;
        double volume = 0.0;

        friend bool operator==(const Bar &, const Bar &) = default;
    };

    struct BarSeries
    {
        std::string asset;
        Period period = Period::Daily;
        std::vector<Bar> bars;

        std::size_t size() const noexcept { return bars.size(); }
        bool empty() const noexcept { return bars.empty(); }
        const Bar &operator[](std::size_t i) const { return bars[i]; }
        std::span<const Bar> view() const noexcept { return bars; }
    };

    using SeriesMap = std::map<std::string, BarSeries>;

    /// Throws InvariantViolation if the bar breaks the OHLC ordering or sign rules.
    inline void validate_bar(const Bar &b)
    {
        const auto finite = [](double v) { return std::isfinite(v); };
        if (!finite(b.open) || !finite(b.high) || !finite(b.low) || !finite(b.close) || !finite(b.volume))
            fail(Errc::InvariantViolation, "non-finite field at " + b.timestamp.to_string());
        if (b.open <= 0 || b.high <= 0 || b.low <= 0 || b.close <= 0)
            fail(Errc::InvariantViolation, "non-positive price at " + b.timestamp.to_string());
        if (b.low > b.high)
            fail(Errc::InvariantViolation, "low > high at " + b.timestamp.to_string());
        if (b.open < b.low || b.open > b.high || b.close < b.low || b.close > b.high)
            fail(Errc::InvariantViolation, "open/close outside [low, high] at " + b.timestamp.to_string());
        if (b.volume < 0)
            fail(Errc::InvariantViolation, "negative volume at " + b.timestamp.to_string());
    }

    inline void validate_series(const BarSeries &s)
    {
        for (std::size_t i = 0; i < s.bars.size(); ++i)
        {
            validate_bar(s.bars[i]);
            if (i > 0 && !(s.bars[i - 1].timestamp < s.bars[i].timestamp))
                fail(s.bars[i - 1].timestamp == s.bars[i].timestamp ? Errc::DuplicateTimestamp
                                                                    : Errc::InvariantViolation,
                     s.asset + ": timestamps not strictly increasing at " + s.bars[i].timestamp.to_string());
        }
    }

    /// Parses bar CSV text. `origin` only labels error messages.
    inline BarSeries parse_bar_csv(std::istream &in, const std::string &asset, const std::string &origin = "<stream>")
    {
        std::string line;
        if (!std::getline(in, line))
            fail(Errc::MalformedRow, origin + ": missing header");
        const auto header = detail::split(detail::trim(line), ',');
        static const char *const expected[] = {"timestamp", "open", "high", "low", "close", "volume"};
        if (header.size() != 6 || !std::equal(header.begin(), header.end(), std::begin(expected),
                                              [](std::string_view a, const char *b) { return detail::trim(a) == b; }))
            fail(Errc::MalformedRow, origin + ": header must be timestamp,open,high,low,close,volume");

        BarSeries series;
        series.asset = asset;
        bool any_intraday = false;
        std::size_t line_no = 1;
        while (std::getline(in, line))
        {
            ++line_no;
            const auto body = detail::trim(line);
            if (body.empty())
                continue;
            const auto cols = detail::split(body, ',');
            const std::string where = origin + ":" + std::to_string(line_no);
            if (cols.size() != 6)
                fail(Errc::MalformedRow, where + ": expected 6 columns, got " + std::to_string(cols.size()));
            Bar bar;
            try
            {
                bar.timestamp = Timestamp::parse(detail::trim(cols[0]));
            }
            catch (const Error &e)
            {
                fail(Errc::MalformedRow, where + ": " + e.what());
            }
            double *fields[] = {&bar.open, &bar.high, &bar.low, &bar.close, &bar.volume};
            for (std::size_t c = 0; c < 5; ++c)
            {
                const auto v = detail::parse_double(cols[c + 1]);
                if (!v)
                    fail(Errc::MalformedRow, where + ": bad number '" + std::string(cols[c + 1]) + "'");
                *fields[c] = *v;
            }
            try
            {
                validate_bar(bar);
            }
            catch (const Error &e)
            {
                fail(Errc::InvariantViolation, where + ": " + e.what());
            }
            any_intraday = any_intraday || !bar.timestamp.date_only();
            series.bars.push_back(bar);
        }

        std::stable_sort(series.bars.begin(), series.bars.end(),
                         [](const Bar &a, const Bar &b) { return a.timestamp < b.timestamp; });
        for (std::size_t i = 1; i < series.bars.size(); ++i)
            if (series.bars[i - 1].timestamp == series.bars[i].timestamp)
                fail(Errc::DuplicateTimestamp, origin + ": duplicate timestamp " + series.bars[i].timestamp.to_string());
        series.period = any_intraday ? Period::Intraday : Period::Daily;
        return series;
    }

    inline BarSeries load_bar_csv(const std::string &path, const std::string &asset)
    {
        std::ifstream in(path);
        if (!in)
            fail(Errc::FileNotFound, "cannot open bar file '" + path + "'");
        return parse_bar_csv(in, asset, path);
    }

    inline void write_bar_csv(std::ostream &out, const BarSeries &series)
    {
        out << "timestamp,open,high,low,close,volume\n";
        for (const auto &b : series.bars)
            out << b.timestamp.to_string() << ',' << detail::format_double(b.open) << ','
                << detail::format_double(b.high) << ',' << detail::format_double(b.low) << ','
                << detail::format_double(b.close) << ',' << detail::format_double(b.volume) << '\n';
    }

    inline void write_bar_csv(const std::string &path, const BarSeries &series)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            fail(Errc::FileNotFound, "cannot write bar file '" + path + "'");
        write_bar_csv(out, series);
    }

    /// Restricts every series to the timestamps shared by all of them.
    inline SeriesMap align(const SeriesMap &series_map)
    {
        if (series_map.empty())
            fail(Errc::InvalidArgument, "align needs at least one series");
        std::set<Timestamp> common;
        bool first = true;
        for (const auto &[asset, s] : series_map)
        {
            if (s.empty())
                fail(Errc::InvalidArgument, "series '" + asset + "' is empty");
            std::set<Timestamp> stamps;
            for (const auto &b : s.bars)
                stamps.insert(b.timestamp);
            if (first)
            {
                common = std::move(stamps);
                first = false;
                continue;
            }
            std::set<Timestamp> kept;
            std::set_intersection(common.begin(), common.end(), stamps.begin(), stamps.end(),
                                  std::inserter(kept, kept.end()));
            common = std::move(kept);
        }
        if (common.empty())
            fail(Errc::EmptyIntersection, "series share no common timestamp");

        SeriesMap out;
        for (const auto &[asset, s] : series_map)
        {
            BarSeries r{s.asset, s.period, {}};
            r.bars.reserve(common.size());
            for (const auto &b : s.bars)
                if (common.count(b.timestamp))
                    r.bars.push_back(b);
            out.emplace(asset, std::move(r));
        }
        return out;
    }

    /// Trailing windows handed to traders and analysts at one simulation step.
    /// Windows are views into the series they were cut from.
    class MarketSnapshot
    {
    public:
        MarketSnapshot() = default;
        MarketSnapshot(Timestamp time, std::map<std::string, std::span<const Bar>> windows)
            : time_(time), windows_(std::move(windows))
        {
        }

        Timestamp time() const noexcept { return time_; }
        const std::map<std::string, std::span<const Bar>> &windows() const noexcept { return windows_; }
        bool contains(const std::string &asset) const { return windows_.count(asset) != 0; }

        std::span<const Bar> window(const std::string &asset) const
        {
            const auto it = windows_.find(asset);
            if (it == windows_.end())
                fail(Errc::MissingAsset, "snapshot has no window for '" + asset + "'");
            return it->second;
        }

        double last_close(const std::string &asset) const { return window(asset).back().close; }

        std::map<std::string, double> last_closes() const
        {
            std::map<std::string, double> out;
            for (const auto &[asset, w] : windows_)
                out[asset] = w.back().close;
            return out;
        }

    private:
        Timestamp time_;
        std::map<std::string, std::span<const Bar>> windows_;
    };

    /// Windows of bars [max(0, end_index - mem + 1), end_index] for every series.
    inline MarketSnapshot snapshot(const SeriesMap &series_map, std::size_t end_index, std::size_t mem)
    {
        if (mem < 1)
            fail(Errc::InvalidArgument, "mem must be >= 1");
        if (series_map.empty())
            fail(Errc::InvalidArgument, "snapshot needs at least one series");
        std::map<std::string, std::span<const Bar>> windows;
        std::optional<Timestamp> clock;
        for (const auto &[asset, s] : series_map)
        {
            if (end_index >= s.size())
                fail(Errc::IndexOutOfRange, "bar index " + std::to_string(end_index) + " beyond series '" + asset +
                                                "' of length " + std::to_string(s.size()));
            const std::size_t begin = end_index + 1 >= mem ? end_index + 1 - mem : 0;
            const auto w = s.view().subspan(begin, end_index - begin + 1);
            if (clock && !(w.back().timestamp == *clock))
                fail(Errc::DataGap, "series '" + asset + "' is not aligned with the others");
            clock = w.back().timestamp;
            windows.emplace(asset, w);
        }
        return MarketSnapshot(*clock, std::move(windows));
    }

    inline std::vector<double> closes_of(std::span<const Bar> bars)
    {
        std::vector<double> out;
        out.reserve(bars.size());
        for (const auto &b : bars)
            out.push_back(b.close);
        return out;
    }

} // namespace apm
