/**
 * @file app.hpp
 * @brief Command implementations behind the `apm` executable: run,
 *        evaluate and experiment. Exit codes: 0 success, 2 configuration
 *        error, 3 data error, 1 anything else.
 */

#pragma once

#include "apm/backtest.hpp"
#include "apm/config.hpp"
#include "apm/evaluate.hpp"
#include "apm/market_data.hpp"
#include "apm/strategies.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace apm::app
{

    enum ExitCode : int
    {
        Ok = 0,
        Unexpected = 1,
        ConfigFailure = 2,
        DataFailure = 3,
    };

    struct Overrides
    {
        std::optional<std::uint64_t> seed;
        bool verbose = false;
        bool json = false;
    };

    inline int exit_code_for(const Error &e)
    {
        if (is_data_error(e.code()) || e.code() == Errc::DegenerateRange)
            return DataFailure;
        return ConfigFailure;
    }

    inline std::unique_ptr<backtest::Trader> make_trader(const config::StrategyConfig &s, std::ostream *log = nullptr)
    {
        if (s.name == "random")
            return std::make_unique<strategies::RandomTrader>();
        if (s.name == "rsi")
            return std::make_unique<strategies::RsiTrader>();
        if (s.name == "ma")
            return std::make_unique<strategies::MovingAverageTrader>(s.ma_period);
        if (s.name == "rfor")
        {
            strategies::ForestTraderOptions o;
            o.time_frame = s.time_frame;
            o.n_estimators = s.n_estimators;
            return std::make_unique<strategies::RandomForestTrader>(o);
        }
        if (s.name == "hr" || s.name == "apm1")
        {
            strategies::PortfolioTraderOptions o;
            o.use_analysts = s.name == "apm1";
            o.alpha = s.alpha;
            o.ma_period = s.ma_period;
            o.forest.time_frame = s.time_frame;
            o.forest.n_estimators = s.n_estimators;
            o.risk_free = s.risk_free;
            o.log = log;
            return std::make_unique<strategies::PortfolioTrader>(o);
        }
        fail(Errc::ConfigError, "unknown strategy '" + s.name + "'");
    }

    /// Rejects window settings the chosen strategy cannot work with.
    inline void check_windows(const config::StrategyConfig &s, std::size_t mem)
    {
        if ((s.name == "rsi" || s.name == "ma" || s.name == "apm1") && mem < 2)
            fail(Errc::ConfigError, "strategy '" + s.name + "' needs mem >= 2");
        if ((s.name == "ma" || s.name == "apm1") && mem < s.ma_period)
            fail(Errc::ConfigError, "mem must be >= ma_period");
        if ((s.name == "rfor" || s.name == "apm1") && mem < s.time_frame)
            fail(Errc::ConfigError, "mem must be >= time_frame");
    }

    inline SeriesMap load_assets(const config::RunConfig &cfg, const std::vector<std::string> &assets)
    {
        SeriesMap raw;
        for (const auto &asset : assets)
            raw.emplace(asset, load_bar_csv(cfg.bar_file(asset), asset));
        return raw;
    }

    inline void write_text(const std::string &path, const std::string &text)
    {
        if (path.empty())
            return;
        const auto parent = std::filesystem::path(path).parent_path();
        if (!parent.empty())
            std::filesystem::create_directories(parent);
        std::ofstream out(path, std::ios::binary);
        if (!out)
            fail(Errc::FileNotFound, "cannot write '" + path + "'");
        out << text;
    }

    /// Equity curve as a standalone SVG polyline chart.
    inline std::string equity_svg(const backtest::EquityFrame &frame, const std::string &title)
    {
        const double width = 800, height = 400, pad = 50;
        double lo = frame.empty() ? 0.0 : frame.front().equity;
        double hi = lo;
        for (const auto &r : frame)
        {
            lo = std::min(lo, r.equity);
            hi = std::max(hi, r.equity);
        }
        if (hi <= lo)
            hi = lo + 1.0;
        const auto n = frame.size() > 1 ? static_cast<double>(frame.size() - 1) : 1.0;
        std::ostringstream svg;
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << "<text x=\"" << pad << "\" y=\"25\" font-family=\"sans-serif\" font-size=\"14\">" << title
            << "</text>\n"
            << "<text x=\"5\" y=\"" << pad << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << evaluate::fixed(hi, 2) << "</text>\n"
            << "<text x=\"5\" y=\"" << height - pad << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << evaluate::fixed(lo, 2) << "</text>\n"
            << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < frame.size(); ++i)
        {
            const double x = pad + (width - 2 * pad) * static_cast<double>(i) / n;
            const double y = height - pad - (height - 2 * pad) * (frame[i].equity - lo) / (hi - lo);
            svg << evaluate::fixed(x, 2) << ',' << evaluate::fixed(y, 2) << ' ';
        }
        svg << "\"/>\n</svg>\n";
        return svg.str();
    }

    inline int cmd_run(const std::string &config_path, const Overrides &ov, std::ostream &out, std::ostream &err)
    {
        config::RunConfig cfg;
        try
        {
            cfg = config::load_config(config_path);
            if (ov.seed)
                cfg.setup.seed = *ov.seed;
            cfg.setup.verbose = cfg.setup.verbose || ov.verbose;
            cfg.setup.log = &err;
            check_windows(cfg.strategy, cfg.setup.mem);
        }
        catch (const Error &e)
        {
            err << "config error: " << e.what() << '\n';
            return ConfigFailure;
        }

        try
        {
            const SeriesMap data = align(load_assets(cfg, cfg.setup.assets));
            auto trader = make_trader(cfg.strategy, &err);
            const auto result = backtest::run(*trader, cfg.setup, data);
            const auto report = evaluate::evaluate(result.equity, cfg.strategy.risk_free,
                                                   evaluate::periods_per_year(cfg.setup.period));
            const std::string text = evaluate::to_text(report);
            write_text(cfg.report_file, text);
            if (!cfg.plot_file.empty())
                write_text(cfg.plot_file, equity_svg(result.equity, trader->name()));
            if (ov.json)
                out << evaluate::to_json(report).dump(2) << '\n';
            else
                out << text;
            return Ok;
        }
        catch (const Error &e)
        {
            err << "error: " << e.what() << '\n';
            return exit_code_for(e);
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << '\n';
            return Unexpected;
        }
    }

    inline int cmd_evaluate(const std::string &results_path, const Overrides &ov, std::ostream &out,
                            std::ostream &err, Period period = Period::Daily)
    {
        try
        {
            const auto report = evaluate::evaluate_file(results_path, 0.0, evaluate::periods_per_year(period));
            if (ov.json)
                out << evaluate::to_json(report).dump(2) << '\n';
            else
                out << evaluate::to_text(report);
            return Ok;
        }
        catch (const Error &e)
        {
            err << "error: " << e.what() << '\n';
            return DataFailure;
        }
    }

    struct Scenario
    {
        std::string id;       ///< e.g. "rsi_AAL" or "hr"
        std::string strategy;
        std::string asset;    ///< empty for portfolio scenarios
        evaluate::PerformanceReport report;
        backtest::EquityFrame equity;
    };

    namespace detail
    {
        inline std::string row(const std::string &label, const std::vector<std::string> &cells)
        {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%-22s", label.c_str());
            std::string line = buf;
            for (const auto &c : cells)
            {
                std::snprintf(buf, sizeof(buf), " %10s", c.c_str());
                line += buf;
            }
            return line + "\n";
        }

        inline std::string sharpe_cell(const evaluate::PerformanceReport &r)
        {
            return r.annualized_sharpe_pct ? evaluate::fixed(*r.annualized_sharpe_pct, 2) : "undef";
        }

        inline std::string upper(std::string s)
        {
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
            return s;
        }
    } // namespace detail

    /// Tables in the layout: one per asset (strategies as columns), the
    /// per-strategy average over assets, and the portfolio strategies.
    inline std::string summary_table(const std::vector<Scenario> &scenarios, const config::ExperimentConfig &ex,
                                     const std::vector<std::string> &assets)
    {
        std::ostringstream s;
        const auto find = [&](const std::string &strategy, const std::string &asset) -> const Scenario & {
            return *std::find_if(scenarios.begin(), scenarios.end(), [&](const Scenario &sc) {
                return sc.strategy == strategy && sc.asset == asset;
            });
        };
        std::vector<std::string> heads;
        for (const auto &st : ex.strategies)
            heads.push_back(detail::upper(st));

        if (!ex.strategies.empty())
        {
            for (const auto &asset : assets)
            {
                std::vector<std::string> ret, shp, vol;
                for (const auto &st : ex.strategies)
                {
                    const auto &r = find(st, asset).report;
                    ret.push_back(evaluate::fixed(r.annualized_return_pct, 2));
                    shp.push_back(detail::sharpe_cell(r));
                    vol.push_back(evaluate::fixed(r.volatility_pct, 3));
                }
                s << "Results for asset " << asset << "\n"
                  << detail::row("Value - Strategy", heads) << detail::row("An. Return (%)", ret)
                  << detail::row("An. Sharpe Ratio (%)", shp) << detail::row("Volatility (%)", vol) << "\n";
            }

            std::vector<std::string> ret, shp;
            for (const auto &st : ex.strategies)
            {
                double sum_ret = 0.0, sum_shp = 0.0;
                std::size_t n_shp = 0;
                for (const auto &asset : assets)
                {
                    const auto &r = find(st, asset).report;
                    sum_ret += r.annualized_return_pct;
                    if (r.annualized_sharpe_pct)
                    {
                        sum_shp += *r.annualized_sharpe_pct;
                        ++n_shp;
                    }
                }
                ret.push_back(evaluate::fixed(sum_ret / static_cast<double>(assets.size()), 2));
                shp.push_back(n_shp ? evaluate::fixed(sum_shp / static_cast<double>(n_shp), 2) : "undef");
            }
            s << "Average results over " << assets.size() << " assets\n"
              << detail::row("Value - Strategy", heads) << detail::row("An. Return (%)", ret)
              << detail::row("An. Sharpe Ratio (%)", shp) << "\n";
        }

        if (!ex.portfolio.empty())
        {
            std::vector<std::string> pheads, ret, shp, vol;
            for (const auto &st : ex.portfolio)
            {
                const auto &r = find(st, "").report;
                pheads.push_back(detail::upper(st));
                ret.push_back(evaluate::fixed(r.annualized_return_pct, 2));
                shp.push_back(detail::sharpe_cell(r));
                vol.push_back(evaluate::fixed(r.volatility_pct, 3));
            }
            s << "Portfolio results\n"
              << detail::row("Value - Strategy", pheads) << detail::row("An. Return (%)", ret)
              << detail::row("An. Sharpe Ratio (%)", shp) << detail::row("Volatility (%)", vol);
        }
        return s.str();
    }

    /// Runs every scenario of an experiment config in memory. Nothing is
    /// written here.
    inline std::vector<Scenario> run_experiment(const config::RunConfig &cfg, std::ostream &err)
    {
        if (!cfg.experiment)
            fail(Errc::ConfigError, "config has no [experiment] section");
        const auto &ex = *cfg.experiment;
        if (ex.strategies.empty() && ex.portfolio.empty())
            fail(Errc::ConfigError, "[experiment] lists no strategies");
        const SeriesMap raw = load_assets(cfg, cfg.setup.assets);

        std::vector<Scenario> out;
        const auto one = [&](const std::string &strategy, const std::vector<std::string> &assets,
                             const SeriesMap &data, const std::string &asset_label) {
            auto sc = cfg.strategy;
            sc.name = strategy;
            check_windows(sc, cfg.setup.mem);
            auto setup = cfg.setup;
            setup.assets = assets;
            setup.results_file.clear();
            setup.log = &err;
            auto trader = make_trader(sc, &err);
            auto result = backtest::run(*trader, setup, data);
            Scenario s;
            s.id = asset_label.empty() ? strategy : strategy + "_" + asset_label;
            s.strategy = strategy;
            s.asset = asset_label;
            s.report = evaluate::evaluate(result.equity, sc.risk_free, evaluate::periods_per_year(setup.period));
            s.equity = std::move(result.equity);
            out.push_back(std::move(s));
        };

        for (const auto &asset : cfg.setup.assets)
        {
            const SeriesMap single{{asset, raw.at(asset)}};
            for (const auto &st : ex.strategies)
                one(st, {asset}, single, asset);
        }
        if (!ex.portfolio.empty())
        {
            const SeriesMap aligned = align(raw);
            for (const auto &st : ex.portfolio)
                one(st, cfg.setup.assets, aligned, "");
        }
        return out;
    }

    inline int cmd_experiment(const std::string &config_path, const Overrides &ov, std::ostream &out,
                              std::ostream &err)
    {
        config::RunConfig cfg;
        try
        {
            cfg = config::load_config(config_path);
            if (ov.seed)
                cfg.setup.seed = *ov.seed;
            cfg.setup.verbose = cfg.setup.verbose || ov.verbose;
            if (!cfg.experiment)
                fail(Errc::ConfigError, "config has no [experiment] section");
        }
        catch (const Error &e)
        {
            err << "config error: " << e.what() << '\n';
            return ConfigFailure;
        }

        try
        {
            const auto scenarios = run_experiment(cfg, err);
            const std::string summary = summary_table(scenarios, *cfg.experiment, cfg.setup.assets);
            write_text(cfg.experiment->summary_file, summary);
            if (!cfg.experiment->results_dir.empty())
            {
                std::filesystem::create_directories(cfg.experiment->results_dir);
                for (const auto &sc : scenarios)
                    backtest::write_results_csv(
                        (std::filesystem::path(cfg.experiment->results_dir) / (sc.id + ".csv")).string(), sc.equity);
            }
            if (ov.json)
            {
                nlohmann::json j = nlohmann::json::array();
                for (const auto &sc : scenarios)
                {
                    auto item = evaluate::to_json(sc.report);
                    item["scenario"] = sc.id;
                    j.push_back(item);
                }
                out << j.dump(2) << '\n';
            }
            else
            {
                out << summary;
            }
            return Ok;
        }
        catch (const Error &e)
        {
            err << "error: " << e.what() << '\n';
            return exit_code_for(e);
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << '\n';
            return Unexpected;
        }
    }

} // namespace apm::app
