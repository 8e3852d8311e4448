/**
 * @file analysts.hpp
 * @brief Analyst agents that turn market windows into per-asset expected
 *        annualized returns, plus the averaging ensemble.
 *
 * Every analyst starts from the historical mean return of an asset (mu) and
 * nudges it by alpha * |mu|: up on a buy signal, down on a sell signal. An
 * analyst without a signal for an asset abstains (std::nullopt).
 */

#pragma once

#include "apm/error.hpp"
#include "apm/indicators.hpp"
#include "apm/market_data.hpp"
#include "apm/ml.hpp"
#include "apm/portfolio.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace apm::analysts
{

    using Analysis = std::map<std::string, std::optional<double>>;

    struct AnalystState
    {
        ExpectedReturns mu;
        double alpha = 0.5;
    };

    inline double raise(double er, double alpha) { return er + alpha * std::abs(er); }
    inline double lower(double er, double alpha) { return er - alpha * std::abs(er); }

    inline AnalystState baseline_from_history(const MarketSnapshot &history, double alpha)
    {
        if (alpha < 0.0)
            fail(Errc::InvalidArgument, "alpha must be >= 0");
        std::vector<std::string> assets;
        for (const auto &[asset, w] : history.windows())
            assets.push_back(asset);
        const auto table = portfolio::price_table(history, assets);
        return AnalystState{portfolio::to_map(assets, portfolio::mean_historical_return(table)), alpha};
    }

    inline double baseline(const AnalystState &state, const std::string &asset)
    {
        const auto it = state.mu.find(asset);
        if (it == state.mu.end())
            fail(Errc::MissingAsset, "no baseline return for '" + asset + "'");
        return it->second;
    }

    class Analyst
    {
    public:
        virtual ~Analyst() = default;

        /// Fits the analyst on the pre-trading history.
        virtual void setup(const MarketSnapshot &history) = 0;
        virtual Analysis analyze(const MarketSnapshot &snapshot) const = 0;
        virtual std::string name() const = 0;

        const AnalystState &state() const noexcept { return state_; }
        void set_state(AnalystState state) { state_ = std::move(state); }

    protected:
        AnalystState state_;
    };

    /// rsi >= 70 raises the estimate, anything lower cuts it.
    class RsiAnalyst final : public Analyst
    {
    public:
        explicit RsiAnalyst(double alpha = 0.5) : alpha_(alpha) {}

        void setup(const MarketSnapshot &history) override { state_ = baseline_from_history(history, alpha_); }

        Analysis analyze(const MarketSnapshot &snapshot) const override
        {
            Analysis out;
            for (const auto &[asset, window] : snapshot.windows())
            {
                const double er = baseline(state_, asset);
                const double value = indicators::rsi(closes_of(window));
                out[asset] = value >= 70.0 ? raise(er, state_.alpha) : lower(er, state_.alpha);
            }
            return out;
        }

        std::string name() const override { return "rsi"; }

    private:
        double alpha_;
    };

    /// Rising trend with the last close under its moving average reads as a
    /// buy; falling trend with the last close above it reads as a sell.
    class MovingAverageAnalyst final : public Analyst
    {
    public:
        explicit MovingAverageAnalyst(double alpha = 0.5, std::size_t period = 10) : alpha_(alpha), period_(period) {}

        void setup(const MarketSnapshot &history) override { state_ = baseline_from_history(history, alpha_); }

        Analysis analyze(const MarketSnapshot &snapshot) const override
        {
            Analysis out;
            for (const auto &[asset, window] : snapshot.windows())
            {
                const double er = baseline(state_, asset);
                const auto closes = closes_of(window);
                const double ma = indicators::moving_average(closes, period_);
                const double slope = indicators::trend(closes);
                const double last = closes.back();
                if (slope > 0 && last < ma)
                    out[asset] = raise(er, state_.alpha);
                else if (slope < 0 && ma < last)
                    out[asset] = lower(er, state_.alpha);
                else
                    out[asset] = std::nullopt;
            }
            return out;
        }

        std::string name() const override { return "ma"; }
        std::size_t period() const noexcept { return period_; }

    private:
        double alpha_;
        std::size_t period_;
    };

    struct ForestAnalystOptions
    {
        double alpha = 0.5;
        std::size_t time_frame = 10;
        std::size_t horizon = 1;
        std::size_t n_bins = 3;
        std::size_t n_estimators = 10;
        std::uint64_t seed = 0;
    };

    /// Predicted top price bin raises the estimate, bottom bin lowers it,
    /// the middle bin abstains. One model per asset, trained on that asset's
    /// own history.
    class RandomForestAnalyst final : public Analyst
    {
    public:
        explicit RandomForestAnalyst(ForestAnalystOptions options = {}) : options_(options) {}

        void setup(const MarketSnapshot &history) override
        {
            state_ = baseline_from_history(history, options_.alpha);
            models_.clear();
            std::uint64_t index = 0;
            for (const auto &[asset, window] : history.windows())
            {
                ml::ForestOptions fo;
                fo.n_estimators = options_.n_estimators;
                fo.seed = options_.seed + index++;
                models_.emplace(asset, ml::PricePredictor::train(window, options_.time_frame, options_.horizon,
                                                                 options_.n_bins, fo));
            }
        }

        /// Installs a pre-trained predictor for one asset.
        void set_model(const std::string &asset, ml::PricePredictor model) { models_[asset] = std::move(model); }

        Analysis analyze(const MarketSnapshot &snapshot) const override
        {
            Analysis out;
            for (const auto &[asset, window] : snapshot.windows())
            {
                const double er = baseline(state_, asset);
                const auto it = models_.find(asset);
                if (it == models_.end())
                    fail(Errc::ModelMissing, "no trained model for '" + asset + "'");
                out[asset] = from_class(it->second.predict(window), er);
            }
            return out;
        }

        std::optional<double> from_class(int predicted, double er) const
        {
            const int top = static_cast<int>(options_.n_bins) - 1;
            if (predicted == top)
                return raise(er, state_.alpha);
            if (predicted == 0)
                return lower(er, state_.alpha);
            return std::nullopt;
        }

        std::string name() const override { return "rfor"; }

    private:
        ForestAnalystOptions options_;
        std::map<std::string, ml::PricePredictor> models_;
    };

    /// Per asset, the mean of mu and every non-abstaining estimate. Written as
    /// mu + mean(estimate - mu) so that estimates equal to mu return mu bit for bit.
    inline ExpectedReturns ensemble_analyses(const std::vector<Analysis> &analyses, const ExpectedReturns &mu)
    {
        ExpectedReturns out;
        for (const auto &[asset, base] : mu)
        {
            double deviation = 0.0;
            std::size_t votes = 1;
            for (const auto &analysis : analyses)
            {
                const auto it = analysis.find(asset);
                if (it == analysis.end() || !it->second)
                    continue;
                deviation += *it->second - base;
                ++votes;
            }
            out[asset] = base + deviation / static_cast<double>(votes);
        }
        for (const auto &analysis : analyses)
            for (const auto &[asset, value] : analysis)
                if (!mu.count(asset))
                    fail(Errc::MissingAsset, "analysis covers '" + asset + "' which has no baseline return");
        return out;
    }

} // namespace apm::analysts
