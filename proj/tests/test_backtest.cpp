#include "apm/backtest.hpp"
#include "apm/strategies.hpp"
#include "apm/synthetic.hpp"
#include "test_helpers.hpp"

#include <functional>
#include <sstream>

using namespace apm;
using namespace apm::backtest;

namespace
{
    /// Trader driven by a callback, recording what it was shown.
    class ScriptedTrader final : public Trader
    {
    public:
        using Script = std::function<std::vector<Order>(std::size_t call, const AccountView &, const MarketSnapshot &)>;
        explicit ScriptedTrader(Script script) : script_(std::move(script)) {}

        void setup(const SetupContext &ctx) override { context = ctx; }
        std::vector<Order> trade(const AccountView &account, const MarketSnapshot &snap) override
        {
            seen.push_back(snap.time());
            return script_(calls++, account, snap);
        }
        std::string name() const override { return "scripted"; }

        SetupContext context;
        std::vector<Timestamp> seen;
        std::size_t calls = 0;

    private:
        Script script_;
    };

    SeriesMap market(std::size_t n = 40)
    {
        return {{"A", synthetic::random_walk("A", n, 1)}, {"B", synthetic::random_walk("B", n, 2)}};
    }

    BacktestSetup base_setup(const SeriesMap &data, std::size_t first_trade = 10)
    {
        const auto &bars = data.begin()->second.bars;
        BacktestSetup s;
        for (const auto &[a, _] : data)
            s.assets.push_back(a);
        s.prestart = bars.front().timestamp;
        s.start = bars[first_trade].timestamp;
        s.end = bars.back().timestamp;
        s.capital = 10000;
        s.mem = 5;
        return s;
    }
} // namespace

TEST(ExecuteOrder, InsufficientCash)
{
    AccountState acc{100.0, {}, {}};
    const auto before = acc;
    const auto r = execute_order(acc, buy_order("A", 1000), 10.0);
    ASSERT_TRUE(std::holds_alternative<Rejection>(r));
    EXPECT_EQ(std::get<Rejection>(r).reason, RejectReason::InsufficientCash);
    EXPECT_EQ(acc, before);
}

TEST(ExecuteOrder, SellClippedToPosition)
{
    AccountState acc{0.0, {{"A", 50}}, {}};
    const auto r = execute_order(acc, sell_order("A", 80), 10.0);
    ASSERT_TRUE(std::holds_alternative<Fill>(r));
    EXPECT_EQ(std::get<Fill>(r).volume, 50);
    EXPECT_EQ(get_shares(acc, "A"), 0);
    EXPECT_DOUBLE_EQ(get_balance(acc), 500.0);
}

TEST(ExecuteOrder, BuyLedger)
{
    AccountState acc{1000.0, {}, {}};
    EXPECT_EQ(get_balance(acc), 1000.0);
    EXPECT_EQ(get_shares(acc, "A"), 0);
    const auto r = execute_order(acc, buy_order("A", 10), 10.0);
    ASSERT_TRUE(std::holds_alternative<Fill>(r));
    EXPECT_DOUBLE_EQ(get_balance(acc), 900.0);
    EXPECT_EQ(get_shares(acc, "A"), 10);
    EXPECT_EQ(acc.fills.size(), 1u);
}

TEST(ExecuteOrder, NoPositionAndInvalidVolume)
{
    AccountState acc{1000.0, {}, {}};
    const auto before = acc;
    EXPECT_EQ(std::get<Rejection>(execute_order(acc, sell_order("A", 5), 10.0)).reason, RejectReason::NoPosition);
    EXPECT_EQ(std::get<Rejection>(execute_order(acc, buy_order("A", 0), 10.0)).reason, RejectReason::InvalidVolume);
    EXPECT_EQ(std::get<Rejection>(execute_order(acc, buy_order("A", 150), 1.0, {}, 100)).reason,
              RejectReason::InvalidVolume);
    EXPECT_EQ(acc, before);
    EXPECT_ERRC(execute_order(acc, buy_order("A", 1), 0.0), Errc::InvalidArgument);
}

TEST(ExecuteOrder, Costs)
{
    AccountState acc{1000.0, {}, {}};
    const CostModel costs{1.0, 0.01};
    // notional 900, fee 1 + 9 = 10, total 910
    const auto fill = std::get<Fill>(execute_order(acc, buy_order("A", 90), 10.0, costs));
    EXPECT_DOUBLE_EQ(fill.cost, 10.0);
    EXPECT_DOUBLE_EQ(acc.cash, 90.0);
    // 9 more shares cost 90 + 1.9: cannot afford.
    EXPECT_EQ(std::get<Rejection>(execute_order(acc, buy_order("A", 9), 10.0, costs)).reason,
              RejectReason::InsufficientCash);
    execute_order(acc, sell_order("A", 90), 10.0, costs);
    EXPECT_DOUBLE_EQ(acc.cash, 90.0 + 900.0 - 10.0);
}

TEST(ExecuteOrder, LimitPrices)
{
    AccountState acc{1000.0, {{"A", 10}}, {}};
    EXPECT_EQ(std::get<Rejection>(execute_order(acc, buy_order("A", 1, 9.0), 10.0)).reason,
              RejectReason::LimitNotReached);
    EXPECT_TRUE(std::holds_alternative<Fill>(execute_order(acc, buy_order("A", 1, 10.0), 10.0)));
    EXPECT_EQ(std::get<Rejection>(execute_order(acc, sell_order("A", 1, 11.0), 10.0)).reason,
              RejectReason::LimitNotReached);
    EXPECT_TRUE(std::holds_alternative<Fill>(execute_order(acc, sell_order("A", 1, 9.5), 10.0)));
}

TEST(Run, NoOrdersKeepsEquityFlat)
{
    const auto data = market();
    ScriptedTrader t([](auto, auto &, auto &) { return std::vector<Order>{}; });
    const auto res = run(t, base_setup(data), data);
    EXPECT_EQ(res.equity.size(), 30u);
    for (const auto &r : res.equity)
    {
        EXPECT_EQ(r.equity, 10000.0);
        EXPECT_EQ(r.holdings_value, 0.0);
    }
    EXPECT_EQ(res.equity.front().bar_index, 0u);
    EXPECT_EQ(res.equity.back().bar_index, 29u);
}

TEST(Run, BuyAndHoldOneShare)
{
    const auto data = market(15);
    ScriptedTrader t([](std::size_t call, auto &, auto &) {
        return call == 0 ? std::vector<Order>{buy_order("A", 1)} : std::vector<Order>{};
    });
    auto setup = base_setup(data);
    setup.assets = {"A"};
    const auto res = run(t, setup, data);
    const auto &a = data.at("A").bars;
    const double fill_price = a[10].close;
    ASSERT_EQ(res.equity.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_NEAR(res.equity[i].equity, 10000.0 + (a[10 + i].close - fill_price), 1e-9);
    ASSERT_EQ(res.fills.size(), 1u);
    EXPECT_EQ(res.fills[0].decision_index, 10u);
    EXPECT_EQ(res.fills[0].price_index, 10u);
}

TEST(Run, SetupSeesOnlyPrestartHistory)
{
    const auto data = market();
    ScriptedTrader t([](auto, auto &, auto &) { return std::vector<Order>{}; });
    auto setup = base_setup(data);
    setup.prestart = data.at("A")[2].timestamp;
    run(t, setup, data);
    const auto h = t.context.history.window("A");
    EXPECT_EQ(h.size(), 8u);
    EXPECT_EQ(h.front().timestamp, data.at("A")[2].timestamp);
    EXPECT_EQ(h.back().timestamp, data.at("A")[9].timestamp);
    EXPECT_EQ(t.context.capital, 10000.0);
}

TEST(Run, SnapshotsEndAtDecisionBar)
{
    const auto data = market();
    ScriptedTrader t([](auto, auto &, const MarketSnapshot &snap) {
        for (const auto &[asset, w] : snap.windows())
            EXPECT_EQ(w.back().timestamp, snap.time());
        EXPECT_EQ(snap.window("A").size(), 5u);
        return std::vector<Order>{};
    });
    run(t, base_setup(data), data);
    ASSERT_EQ(t.seen.size(), 30u);
    for (std::size_t i = 0; i < t.seen.size(); ++i)
        EXPECT_EQ(t.seen[i], data.at("A")[10 + i].timestamp);
}

TEST(Run, NextOpenFillsAtFollowingOpenAndDropsLastBar)
{
    const auto data = market(20);
    ScriptedTrader t([](auto, auto &, auto &) { return std::vector<Order>{buy_order("A", 1)}; });
    auto setup = base_setup(data);
    setup.fill_policy = FillPolicy::NextOpen;
    const auto res = run(t, setup, data);
    ASSERT_EQ(res.fills.size(), 9u); // 10 decisions, the last never fills
    for (const auto &f : res.fills)
    {
        EXPECT_EQ(f.price_index, f.decision_index + 1);
        EXPECT_EQ(f.price, data.at("A")[f.price_index].open);
    }
    EXPECT_EQ(res.final_account.positions.at("A"), 9);
}

TEST(Run, VerboseLogging)
{
    const auto data = market(14);
    ScriptedTrader t([](auto, auto &, auto &) { return std::vector<Order>{buy_order("A", 1), sell_order("B", 1)}; });
    std::ostringstream log;
    auto setup = base_setup(data);
    setup.verbose = true;
    setup.log = &log;
    run(t, setup, data);
    EXPECT_NE(log.str().find("ORDER BUY 1 A"), std::string::npos);
    EXPECT_NE(log.str().find("FILL BUY 1 A"), std::string::npos);
    EXPECT_NE(log.str().find("REJECT SELL 1 B (NoPosition)"), std::string::npos);
}

TEST(Run, PolicyVetoesOrders)
{
    const auto data = market(14);
    ScriptedTrader t([](auto, auto &, auto &) { return std::vector<Order>{buy_order("A", 1), buy_order("B", 1)}; });
    auto setup = base_setup(data);
    ips::PolicyStatement p;
    p.allowed_assets = {"A"};
    setup.policy = p;
    const auto res = run(t, setup, data);
    EXPECT_EQ(res.vetoed_orders, 4u);
    for (const auto &f : res.fills)
        EXPECT_EQ(f.asset, "A");
}

TEST(Run, Errors)
{
    const auto data = market();
    ScriptedTrader t([](auto, auto &, auto &) { return std::vector<Order>{}; });
    auto s = base_setup(data);
    s.mem = 11;
    EXPECT_ERRC(run(t, s, data), Errc::InsufficientHistory);
    s = base_setup(data);
    s.assets.push_back("Z");
    EXPECT_ERRC(run(t, s, data), Errc::MissingAsset);
    s = base_setup(data);
    s.capital = 0;
    EXPECT_ERRC(run(t, s, data), Errc::ConfigError);
    s = base_setup(data);
    s.start = s.end;
    EXPECT_ERRC(run(t, s, data), Errc::ConfigError);
    s = base_setup(data);
    s.start = Timestamp::from_date(2030, 1, 1);
    s.end = Timestamp::from_date(2030, 2, 1);
    EXPECT_ERRC(run(t, s, data), Errc::InsufficientHistory);

    auto gap = data;
    gap.at("B").bars.erase(gap.at("B").bars.begin() + 20);
    EXPECT_ERRC(run(t, base_setup(data), gap), Errc::DataGap);
}

TEST(ResultsCsv, RoundTripAndRerunDeterminism)
{
    testing_support::TempDir dir;
    const auto data = market(200);
    auto setup = base_setup(data, 20);
    setup.seed = 77;
    setup.costs = {0.5, 0.001};
    setup.results_file = dir.file("a.csv");
    strategies::RandomTrader t1;
    const auto res = run(t1, setup, data);
    setup.results_file = dir.file("b.csv");
    strategies::RandomTrader t2;
    run(t2, setup, data);
    EXPECT_EQ(testing_support::slurp(dir.file("a.csv")), testing_support::slurp(dir.file("b.csv")));

    const auto back = read_results_csv(dir.file("a.csv"));
    ASSERT_EQ(back.size(), res.equity.size());
    for (std::size_t i = 0; i < back.size(); ++i)
    {
        EXPECT_EQ(back[i].equity, res.equity[i].equity);
        EXPECT_EQ(back[i].cash, res.equity[i].cash);
        EXPECT_EQ(back[i].timestamp, res.equity[i].timestamp);
    }
}

TEST(ResultsCsv, Malformed)
{
    std::istringstream bad_header("a,b\n");
    EXPECT_ERRC(read_results_csv(bad_header), Errc::MalformedRow);
    std::istringstream bad_row("bar_index,timestamp,cash,holdings_value,equity\n0,2020-01-01,1,x,1\n");
    EXPECT_ERRC(read_results_csv(bad_row), Errc::MalformedRow);
    EXPECT_ERRC(read_results_csv(std::string("/nonexistent/results.csv")), Errc::FileNotFound);
}
