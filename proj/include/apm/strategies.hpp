/**
 * @file strategies.hpp
 * @brief The bundled traders: random, RSI, moving average and random forest
 *        mono-asset rules, and the max-Sharpe portfolio manager in its
 *        historical-return (HR) and analyst-ensemble (APM1) variants.
 */

#pragma once

#include "apm/analysts.hpp"
#include "apm/backtest.hpp"
#include "apm/indicators.hpp"
#include "apm/ml.hpp"
#include "apm/portfolio.hpp"

#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace apm::strategies
{
    using backtest::AccountView;
    using backtest::SetupContext;
    using backtest::Trader;

    /// Draws one volume in [1, 1000] per decision and an independent
    /// buy/sell coin flip per asset.
    class RandomTrader final : public Trader
    {
    public:
        void setup(const SetupContext &ctx) override
        {
            assets_ = ctx.assets;
            rng_.seed(ctx.seed);
        }

        std::vector<Order> trade(const AccountView &account, const MarketSnapshot &) override
        {
            std::uniform_int_distribution<Shares> volume(1, 1000);
            std::uniform_int_distribution<int> coin(0, 1);
            std::vector<Order> orders;
            const Shares shares = volume(rng_);
            for (const auto &asset : assets_)
            {
                const Shares step = account.volume_step(asset);
                const Shares v = std::max(step, shares / step * step);
                orders.push_back(coin(rng_) == 1 ? buy_order(asset, v) : sell_order(asset, v));
            }
            return orders;
        }

        std::string name() const override { return "random"; }

    private:
        std::vector<std::string> assets_;
        std::mt19937_64 rng_;
    };

    namespace detail
    {
        /// Buy everything affordable with an equal cash share per asset, or
        /// sell the whole position, depending on the per-asset signal.
        enum class Signal
        {
            Buy,
            Sell,
            Hold,
        };

        inline std::optional<Order> act(const AccountView &account, const std::string &asset, double last_close,
                                        std::size_t n_assets, Signal signal)
        {
            const double money = account.balance() / static_cast<double>(n_assets);
            const Shares held = account.shares(asset);
            if (signal == Signal::Buy)
            {
                const Shares free = portfolio::get_affor_shares(money, last_close, account.volume_step(asset));
                if (free > 0)
                    return buy_order(asset, free);
            }
            else if (signal == Signal::Sell && held > 0)
            {
                return sell_order(asset, held);
            }
            return std::nullopt;
        }

        class SignalTrader : public Trader
        {
        public:
            void setup(const SetupContext &ctx) override { assets_ = ctx.assets; }

            std::vector<Order> trade(const AccountView &account, const MarketSnapshot &snapshot) override
            {
                std::vector<Order> orders;
                for (const auto &asset : assets_)
                {
                    const auto window = snapshot.window(asset);
                    if (auto order = act(account, asset, window.back().close, assets_.size(), signal(asset, window)))
                        orders.push_back(*order);
                }
                return orders;
            }

        protected:
            virtual Signal signal(const std::string &asset, std::span<const Bar> window) const = 0;
            std::vector<std::string> assets_;
        };
    } // namespace detail

    /// rsi >= 70 buys, rsi < 70 liquidates.
    class RsiTrader final : public detail::SignalTrader
    {
    public:
        std::string name() const override { return "rsi"; }

    protected:
        detail::Signal signal(const std::string &, std::span<const Bar> window) const override
        {
            return indicators::rsi(closes_of(window)) >= 70.0 ? detail::Signal::Buy : detail::Signal::Sell;
        }
    };

    /// Same entry/exit conditions as the moving-average analyst.
    class MovingAverageTrader final : public detail::SignalTrader
    {
    public:
        explicit MovingAverageTrader(std::size_t period = 10) : period_(period) {}
        std::string name() const override { return "ma"; }

    protected:
        detail::Signal signal(const std::string &, std::span<const Bar> window) const override
        {
            const auto closes = closes_of(window);
            const double ma = indicators::moving_average(closes, period_);
            const double slope = indicators::trend(closes);
            if (slope > 0 && closes.back() < ma)
                return detail::Signal::Buy;
            if (slope < 0 && ma < closes.back())
                return detail::Signal::Sell;
            return detail::Signal::Hold;
        }

    private:
        std::size_t period_;
    };

    struct ForestTraderOptions
    {
        std::size_t time_frame = 10;
        std::size_t horizon = 1;
        std::size_t n_bins = 3;
        std::size_t n_estimators = 10;
    };

    /// Top price bin buys, bottom bin liquidates, middle bin holds.
    class RandomForestTrader final : public detail::SignalTrader
    {
    public:
        explicit RandomForestTrader(ForestTraderOptions options = {}) : options_(options) {}

        void setup(const SetupContext &ctx) override
        {
            SignalTrader::setup(ctx);
            models_.clear();
            for (std::size_t i = 0; i < ctx.assets.size(); ++i)
            {
                ml::ForestOptions fo;
                fo.n_estimators = options_.n_estimators;
                fo.seed = ctx.seed + i;
                models_.emplace(ctx.assets[i],
                                ml::PricePredictor::train(ctx.history.window(ctx.assets[i]), options_.time_frame,
                                                          options_.horizon, options_.n_bins, fo));
            }
        }

        std::string name() const override { return "rfor"; }
        const ml::PricePredictor &model(const std::string &asset) const { return models_.at(asset); }

    protected:
        detail::Signal signal(const std::string &asset, std::span<const Bar> window) const override
        {
            const int predicted = models_.at(asset).predict(window);
            if (predicted == static_cast<int>(options_.n_bins) - 1)
                return detail::Signal::Buy;
            if (predicted == 0)
                return detail::Signal::Sell;
            return detail::Signal::Hold;
        }

    private:
        ForestTraderOptions options_;
        std::map<std::string, ml::PricePredictor> models_;
    };

    struct PortfolioTraderOptions
    {
        bool use_analysts = false; ///< false: HR, true: APM1
        double alpha = 0.5;
        std::size_t ma_period = 10;
        analysts::ForestAnalystOptions forest;
        double risk_free = 0.0;
        std::ostream *log = nullptr; ///< warnings; std::cerr when null
    };

    /// Re-optimizes a long-only max-Sharpe portfolio every bar and trades
    /// toward it. mu and Sigma are estimated once from the setup history and
    /// kept fixed; APM1 replaces mu each bar with the analyst ensemble.
    class PortfolioTrader final : public Trader
    {
    public:
        explicit PortfolioTrader(PortfolioTraderOptions options = {}) : options_(std::move(options)) {}

        void setup(const SetupContext &ctx) override
        {
            assets_ = ctx.assets;
            const auto table = portfolio::price_table(ctx.history, assets_);
            const double ppy = ctx.period == Period::Daily ? trading_days_per_year : trading_days_per_year * 390.0;
            mu_ = portfolio::to_map(assets_, portfolio::mean_historical_return(table, ppy));
            sigma_ = portfolio::sample_cov(table, ppy);

            analysts_.clear();
            if (options_.use_analysts)
            {
                analysts_.push_back(std::make_unique<analysts::RsiAnalyst>(options_.alpha));
                analysts_.push_back(std::make_unique<analysts::MovingAverageAnalyst>(options_.alpha, options_.ma_period));
                auto forest = options_.forest;
                forest.alpha = options_.alpha;
                forest.seed = ctx.seed;
                analysts_.push_back(std::make_unique<analysts::RandomForestAnalyst>(forest));
                for (auto &a : analysts_)
                {
                    a->setup(ctx.history);
                    // Every analyst shares the trader's baseline.
                    a->set_state(analysts::AnalystState{mu_, options_.alpha});
                }
            }
        }

        ExpectedReturns expected_returns(const MarketSnapshot &snapshot) const
        {
            if (analysts_.empty())
                return mu_;
            std::vector<analysts::Analysis> views;
            for (const auto &a : analysts_)
                views.push_back(a->analyze(snapshot));
            return analysts::ensemble_analyses(views, mu_);
        }

        /// Target weights for this snapshot; empty when no asset beats the risk-free rate.
        std::optional<WeightVector> target_weights(const MarketSnapshot &snapshot) const
        {
            portfolio::ReturnEstimates est{assets_, portfolio::to_vector(assets_, expected_returns(snapshot)), sigma_,
                                           options_.risk_free};
            try
            {
                return portfolio::clean_weights(portfolio::max_sharpe(est));
            }
            catch (const Error &e)
            {
                if (e.code() != Errc::NoExcessReturn)
                    throw;
                (options_.log ? *options_.log : std::cerr)
                    << snapshot.time().to_string() << " warning: " << e.what() << "; holding\n";
                return std::nullopt;
            }
        }

        std::vector<Order> trade(const AccountView &account, const MarketSnapshot &snapshot) override
        {
            const auto weights = target_weights(snapshot);
            if (!weights)
                return {};
            const PriceMap last = snapshot.last_closes();
            LotSpec lots;
            for (const auto &a : assets_)
                lots[a] = account.volume_step(a);
            const auto target = portfolio::volumes_from_weights(assets_, *weights, last, account.equity(), lots);
            const auto delta = portfolio::orders_from_curr_shares(target, account.positions(assets_));

            // Sells go first so their proceeds fund the buys within the same bar.
            std::vector<Order> sells, buys;
            for (const auto &asset : assets_)
            {
                const Shares d = delta.at(asset);
                if (d < 0)
                    sells.push_back(sell_order(asset, -d, last.at(asset)));
                else if (d > 0)
                    buys.push_back(buy_order(asset, d, last.at(asset)));
            }
            sells.insert(sells.end(), buys.begin(), buys.end());
            return sells;
        }

        std::string name() const override { return options_.use_analysts ? "apm1" : "hr"; }
        const ExpectedReturns &baseline_mu() const noexcept { return mu_; }
        const Eigen::MatrixXd &covariance() const noexcept { return sigma_; }

    private:
        PortfolioTraderOptions options_;
        std::vector<std::string> assets_;
        ExpectedReturns mu_;
        Eigen::MatrixXd sigma_;
        std::vector<std::unique_ptr<analysts::Analyst>> analysts_;
    };

} // namespace apm::strategies
