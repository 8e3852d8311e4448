/**
 * @file backtest.hpp
 * @brief Bar-by-bar simulation of a trader against historical data with a
 *        long-only netting account.
 *
 * Per bar in [start, end]:
 *   1. (NextOpen only) orders decided on the previous bar fill at this bar's open;
 *   2. the trader receives the trailing `mem`-bar snapshot ending at this bar;
 *   3. orders are vetted by the investment policy, if one is configured;
 *   4. (DecisionClose only) orders fill at this bar's close, in emitted order;
 *   5. one equity record is appended, marked at this bar's closes.
 *
 * Orders decided on the last bar under NextOpen are never filled.
 */

#pragma once

#include "apm/detail/text.hpp"
#include "apm/error.hpp"
#include "apm/ips.hpp"
#include "apm/market_data.hpp"
#include "apm/order.hpp"
#include "apm/portfolio.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace apm::backtest
{

    enum class FillPolicy
    {
        DecisionClose, ///< fill at the close of the decision bar
        NextOpen,      ///< fill at the open of the following bar
    };

    struct CostModel
    {
        double fixed = 0.0;        ///< currency per filled order
        double proportional = 0.0; ///< fraction of traded notional

        double cost(double notional) const { return fixed + proportional * notional; }
    };

    struct Fill
    {
        std::size_t decision_index = 0; ///< data index of the bar the order was decided on
        std::size_t price_index = 0;    ///< data index of the bar whose price was used
        Timestamp price_time;
        std::string asset;
        Side side = Side::Buy;
        Shares volume = 0;
        double price = 0.0;
        double cost = 0.0;

        friend bool operator==(const Fill &, const Fill &) = default;
    };

    enum class RejectReason
    {
        InsufficientCash,
        NoPosition,
        LimitNotReached,
        InvalidVolume,
    };

    inline std::string_view reason_name(RejectReason r)
    {
        switch (r)
        {
        case RejectReason::InsufficientCash: return "InsufficientCash";
        case RejectReason::NoPosition: return "NoPosition";
        case RejectReason::LimitNotReached: return "LimitNotReached";
        case RejectReason::InvalidVolume: return "InvalidVolume";
        }
        return "?";
    }

    struct Rejection
    {
        Order order;
        RejectReason reason;
    };

    struct AccountState
    {
        double cash = 0.0;
        VolumeMap positions;
        std::vector<Fill> fills;

        friend bool operator==(const AccountState &, const AccountState &) = default;
    };

    inline double get_balance(const AccountState &account) { return account.cash; }

    inline Shares get_shares(const AccountState &account, const std::string &asset)
    {
        const auto it = account.positions.find(asset);
        return it == account.positions.end() ? 0 : it->second;
    }

    using ExecutionResult = std::variant<Fill, Rejection>;

    /// Fills one order against the account or rejects it leaving the account
    /// untouched. Buys never fill partially; sells are clipped to the position.
    inline ExecutionResult execute_order(AccountState &account, const Order &order, double fill_price,
                                         const CostModel &costs = {}, Shares step = 1)
    {
        if (!(fill_price > 0.0))
            fail(Errc::InvalidArgument, "fill price must be > 0");
        if (order.volume <= 0 || step < 1 || order.volume % step != 0)
            return Rejection{order, RejectReason::InvalidVolume};
        if (order.limit)
        {
            const bool marketable = order.side == Side::Buy ? fill_price <= *order.limit : fill_price >= *order.limit;
            if (!marketable)
                return Rejection{order, RejectReason::LimitNotReached};
        }

        Fill fill;
        fill.asset = order.asset;
        fill.side = order.side;
        fill.price = fill_price;
        if (order.side == Side::Buy)
        {
            const double notional = static_cast<double>(order.volume) * fill_price;
            const double fee = costs.cost(notional);
            if (account.cash < notional + fee)
                return Rejection{order, RejectReason::InsufficientCash};
            account.cash -= notional + fee;
            account.positions[order.asset] += order.volume;
            fill.volume = order.volume;
            fill.cost = fee;
        }
        else
        {
            const Shares held = get_shares(account, order.asset);
            const Shares volume = std::min(order.volume, held);
            if (volume <= 0)
                return Rejection{order, RejectReason::NoPosition};
            const double notional = static_cast<double>(volume) * fill_price;
            const double fee = costs.cost(notional);
            if (account.cash + notional < fee)
                return Rejection{order, RejectReason::InsufficientCash};
            account.cash += notional - fee;
            account.positions[order.asset] = held - volume;
            fill.volume = volume;
            fill.cost = fee;
        }
        account.fills.push_back(fill);
        return fill;
    }

    /// What a trader may see of the account at decision time.
    class AccountView
    {
    public:
        AccountView(const AccountState &account, const LotSpec &lots, double capital, const PriceMap &marks)
            : account_(account), lots_(lots), capital_(capital), marks_(marks)
        {
        }

        double balance() const { return account_.cash; }
        Shares shares(const std::string &asset) const { return get_shares(account_, asset); }
        VolumeMap positions(const std::vector<std::string> &assets) const
        {
            VolumeMap out;
            for (const auto &a : assets)
                out[a] = shares(a);
            return out;
        }
        Shares volume_step(const std::string &asset) const { return lot_step(lots_, asset); }
        double initial_capital() const { return capital_; }

        /// Cash plus holdings marked at the decision bar's closes.
        double equity() const
        {
            double total = account_.cash;
            for (const auto &[asset, held] : account_.positions)
                if (held != 0)
                    total += static_cast<double>(held) * marks_.at(asset);
            return total;
        }

    private:
        const AccountState &account_;
        const LotSpec &lots_;
        double capital_;
        const PriceMap &marks_;
    };

    struct SetupContext
    {
        std::vector<std::string> assets;
        MarketSnapshot history; ///< bars in [prestart, start)
        double capital = 0.0;
        LotSpec lots;
        std::uint64_t seed = 0;
        Period period = Period::Daily;
        std::size_t mem = 1;
    };

    class Trader
    {
    public:
        virtual ~Trader() = default;
        virtual void setup(const SetupContext &) {}
        virtual std::vector<Order> trade(const AccountView &account, const MarketSnapshot &snapshot) = 0;
        virtual std::string name() const = 0;
    };

    struct BacktestSetup
    {
        std::vector<std::string> assets;
        Timestamp prestart;
        Timestamp start;
        Timestamp end;
        Period period = Period::Daily;
        double capital = 100000.0;
        std::size_t mem = 10;
        std::string results_file; ///< not written when empty
        bool verbose = false;
        std::uint64_t seed = 0;
        FillPolicy fill_policy = FillPolicy::DecisionClose;
        CostModel costs;
        std::optional<ips::PolicyStatement> policy;
        LotSpec lots;
        std::ostream *log = nullptr; ///< verbose sink; std::cerr when null

        void validate() const
        {
            if (assets.empty())
                fail(Errc::ConfigError, "backtest needs at least one asset");
            if (!(prestart <= start && start < end))
                fail(Errc::ConfigError, "need prestart <= start < end");
            if (!(capital > 0.0))
                fail(Errc::ConfigError, "capital must be > 0");
            if (mem < 1)
                fail(Errc::ConfigError, "mem must be >= 1");
            for (const auto &[asset, step] : lots)
                if (step < 1)
                    fail(Errc::ConfigError, "lot step for '" + asset + "' must be >= 1");
            if (policy)
                policy->validate();
        }
    };

    struct EquityRecord
    {
        std::size_t bar_index = 0;
        Timestamp timestamp;
        double cash = 0.0;
        double holdings_value = 0.0;
        double equity = 0.0;
    };

    using EquityFrame = std::vector<EquityRecord>;

    struct BacktestResult
    {
        EquityFrame equity;
        std::vector<Fill> fills;
        std::vector<Rejection> rejections;
        std::size_t vetoed_orders = 0;
        AccountState final_account;
    };

    inline void write_results_csv(std::ostream &out, const EquityFrame &frame)
    {
        out << "bar_index,timestamp,cash,holdings_value,equity\n";
        for (const auto &r : frame)
            out << r.bar_index << ',' << r.timestamp.to_string() << ',' << detail::format_double(r.cash) << ','
                << detail::format_double(r.holdings_value) << ',' << detail::format_double(r.equity) << '\n';
    }

    inline void write_results_csv(const std::string &path, const EquityFrame &frame)
    {
        const auto parent = std::filesystem::path(path).parent_path();
        std::error_code ec;
        if (!parent.empty())
            std::filesystem::create_directories(parent, ec);
        std::ofstream out(path, std::ios::binary);
        if (!out)
            fail(Errc::FileNotFound, "cannot write results file '" + path + "'");
        write_results_csv(out, frame);
    }

    inline EquityFrame read_results_csv(std::istream &in, const std::string &origin = "<stream>")
    {
        std::string line;
        if (!std::getline(in, line) || detail::trim(line) != "bar_index,timestamp,cash,holdings_value,equity")
            fail(Errc::MalformedRow, origin + ": header must be bar_index,timestamp,cash,holdings_value,equity");
        EquityFrame frame;
        std::size_t line_no = 1;
        while (std::getline(in, line))
        {
            ++line_no;
            const auto body = detail::trim(line);
            if (body.empty())
                continue;
            const std::string where = origin + ":" + std::to_string(line_no);
            const auto cols = detail::split(body, ',');
            if (cols.size() != 5)
                fail(Errc::MalformedRow, where + ": expected 5 columns");
            EquityRecord r;
            const auto index = detail::parse_int(cols[0]);
            const auto cash = detail::parse_double(cols[2]);
            const auto holdings = detail::parse_double(cols[3]);
            const auto equity = detail::parse_double(cols[4]);
            if (!index || *index < 0 || !cash || !holdings || !equity)
                fail(Errc::MalformedRow, where + ": bad number");
            try
            {
                r.timestamp = Timestamp::parse(detail::trim(cols[1]));
            }
            catch (const Error &e)
            {
                fail(Errc::MalformedRow, where + ": " + e.what());
            }
            r.bar_index = static_cast<std::size_t>(*index);
            r.cash = *cash;
            r.holdings_value = *holdings;
            r.equity = *equity;
            frame.push_back(r);
        }
        return frame;
    }

    inline EquityFrame read_results_csv(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            fail(Errc::FileNotFound, "cannot open results file '" + path + "'");
        return read_results_csv(in, path);
    }

    namespace internal
    {
        inline std::string describe(const Order &o)
        {
            std::ostringstream s;
            s << (o.side == Side::Buy ? "BUY " : "SELL ") << o.volume << ' ' << o.asset;
            if (o.limit)
                s << " @" << apm::detail::format_double(*o.limit);
            return s.str();
        }
    } // namespace internal

    /// Runs `trader` over `data` (aligned series, possibly holding more assets
    /// than the setup trades) and returns the equity curve plus the fill log.
    inline BacktestResult run(Trader &trader, const BacktestSetup &setup, const SeriesMap &data)
    {
        setup.validate();
        std::ostream &log = setup.log ? *setup.log : std::cerr;

        SeriesMap universe;
        for (const auto &asset : setup.assets)
        {
            const auto it = data.find(asset);
            if (it == data.end())
                fail(Errc::MissingAsset, "no data for asset '" + asset + "'");
            universe.emplace(asset, it->second);
        }
        const BarSeries &reference = universe.begin()->second;
        for (const auto &[asset, s] : universe)
        {
            if (s.size() != reference.size())
                fail(Errc::DataGap, "series '" + asset + "' is not aligned");
            for (std::size_t i = 0; i < s.size(); ++i)
                if (!(s[i].timestamp == reference[i].timestamp))
                    fail(Errc::DataGap, "series '" + asset + "' misses bar " + reference[i].timestamp.to_string());
        }

        const auto &bars = reference.bars;
        std::size_t first = 0;
        while (first < bars.size() && bars[first].timestamp < setup.prestart)
            ++first;
        std::size_t start_idx = first;
        while (start_idx < bars.size() && bars[start_idx].timestamp < setup.start)
            ++start_idx;
        std::size_t stop = start_idx; // one past the last traded bar
        while (stop < bars.size() && bars[stop].timestamp <= setup.end)
            ++stop;
        if (start_idx >= stop)
            fail(Errc::InsufficientHistory, "no bars inside [start, end]");
        if (start_idx - first < setup.mem)
            fail(Errc::InsufficientHistory, "need " + std::to_string(setup.mem) + " bars in [prestart, start), have " +
                                                std::to_string(start_idx - first));

        std::map<std::string, std::span<const Bar>> history_windows;
        for (const auto &[asset, s] : universe)
            history_windows.emplace(asset, s.view().subspan(first, start_idx - first));

        SetupContext ctx;
        ctx.assets = setup.assets;
        ctx.history = MarketSnapshot(bars[start_idx - 1].timestamp, std::move(history_windows));
        ctx.capital = setup.capital;
        ctx.lots = setup.lots;
        ctx.seed = setup.seed;
        ctx.period = setup.period;
        ctx.mem = setup.mem;
        trader.setup(ctx);

        BacktestResult result;
        AccountState account;
        account.cash = setup.capital;

        const auto prices_at = [&](std::size_t index, bool open) {
            PriceMap p;
            for (const auto &[asset, s] : universe)
                p[asset] = open ? s[index].open : s[index].close;
            return p;
        };

        const auto execute_all = [&](const std::vector<Order> &orders, std::size_t decision, std::size_t price_index,
                                     const PriceMap &prices) {
            for (const auto &order : orders)
            {
                const auto it = prices.find(order.asset);
                if (it == prices.end())
                    fail(Errc::MissingAsset, "order for unknown asset '" + order.asset + "'");
                auto outcome = execute_order(account, order, it->second, setup.costs, lot_step(setup.lots, order.asset));
                if (auto *fill = std::get_if<Fill>(&outcome))
                {
                    fill->decision_index = decision;
                    fill->price_index = price_index;
                    fill->price_time = bars[price_index].timestamp;
                    account.fills.back() = *fill;
                    if (setup.verbose)
                        log << bars[price_index].timestamp.to_string() << " FILL " << internal::describe(order)
                            << " x" << fill->volume << " @" << apm::detail::format_double(fill->price) << '\n';
                }
                else
                {
                    const auto &rej = std::get<Rejection>(outcome);
                    if (setup.verbose)
                        log << bars[price_index].timestamp.to_string() << " REJECT " << internal::describe(order) << " ("
                            << reason_name(rej.reason) << ")\n";
                    result.rejections.push_back(rej);
                }
            }
        };

        std::vector<Order> pending;
        for (std::size_t t = start_idx; t < stop; ++t)
        {
            if (setup.fill_policy == FillPolicy::NextOpen && !pending.empty())
            {
                execute_all(pending, t - 1, t, prices_at(t, true));
                pending.clear();
            }

            const MarketSnapshot snap = snapshot(universe, t, setup.mem);
            const PriceMap closes = prices_at(t, false);
            const AccountView view(account, setup.lots, setup.capital, closes);
            std::vector<Order> orders = trader.trade(view, snap);
            if (setup.verbose)
                for (const auto &o : orders)
                    log << bars[t].timestamp.to_string() << " ORDER " << internal::describe(o) << '\n';

            if (setup.policy)
            {
                auto vetted = ips::vet_orders(*setup.policy, orders, account.positions, closes, account.cash);
                result.vetoed_orders += orders.size() - vetted.size();
                orders = std::move(vetted);
            }

            if (setup.fill_policy == FillPolicy::DecisionClose)
                execute_all(orders, t, t, closes);
            else
                pending = std::move(orders);

            EquityRecord rec;
            rec.bar_index = t - start_idx;
            rec.timestamp = bars[t].timestamp;
            rec.cash = account.cash;
            for (const auto &asset : setup.assets)
            {
                const Shares held = get_shares(account, asset);
                if (held != 0)
                    rec.holdings_value += static_cast<double>(held) * closes.at(asset);
            }
            rec.equity = rec.cash + rec.holdings_value;
            result.equity.push_back(rec);
        }

        result.fills = account.fills;
        result.final_account = account;
        if (!setup.results_file.empty())
            write_results_csv(setup.results_file, result.equity);
        return result;
    }

} // namespace apm::backtest
