/**
 * @file config.hpp
 * @brief Run and experiment configuration read from an INI-style file.
 *
 * Comments start with `;` and must sit on their own line. Relative paths resolve
 * against the directory holding the config file.
 *
 *     [data]
 *     dir = data
 *     assets = AAL, MSFT
 *
 *     [backtest]
 *     prestart = 2018-01-02
 *     start = 2018-10-01
 *     end = 2019-12-31
 *     period = daily                 (daily | intraday)
 *     capital = 100000
 *     mem = 10
 *     seed = 42
 *     fill_policy = decision_close   (decision_close | next_open)
 *     fixed_cost = 0
 *     proportional_cost = 0
 *     results_file = out/results.csv
 *     report_file = out/report.txt
 *     plot_file = out/equity.svg     (optional)
 *     verbose = false
 *
 *     [strategy]
 *     name = apm1                    (random | rsi | ma | rfor | hr | apm1)
 *     alpha = 0.5
 *     ma_period = 10
 *     time_frame = 10
 *     n_estimators = 10
 *     risk_free = 0
 *
 *     [lots]          ASSET = step
 *     [ips]           allowed = A, B
 *     [ips_classes]   ASSET = class
 *     [ips_bounds]    class = min, max
 *
 *     [experiment]
 *     strategies = rsi, ma, rfor     (one mono-asset run per strategy and asset)
 *     portfolio = hr, apm1           (one run each over all assets)
 *     summary_file = out/summary.txt
 *     results_dir = out/runs         (optional per-scenario equity files)
 */

#pragma once

#include "apm/backtest.hpp"
#include "apm/detail/text.hpp"
#include "apm/error.hpp"
#include "apm/ips.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace apm::config
{

    inline const std::set<std::string> &strategy_names()
    {
        static const std::set<std::string> names{"random", "rsi", "ma", "rfor", "hr", "apm1"};
        return names;
    }

    struct StrategyConfig
    {
        std::string name = "random";
        double alpha = 0.5;
        std::size_t ma_period = 10;
        std::size_t time_frame = 10;
        std::size_t n_estimators = 10;
        double risk_free = 0.0;
    };

    struct ExperimentConfig
    {
        std::vector<std::string> strategies;
        std::vector<std::string> portfolio;
        std::string summary_file;
        std::string results_dir;
    };

    struct RunConfig
    {
        std::string data_dir;
        backtest::BacktestSetup setup;
        StrategyConfig strategy;
        std::string report_file;
        std::string plot_file;
        std::optional<ExperimentConfig> experiment;

        std::string bar_file(const std::string &asset) const
        {
            return (std::filesystem::path(data_dir) / (asset + ".csv")).string();
        }
    };

    namespace detail
    {
        using boost::property_tree::ptree;

        inline ptree::path_type key(const std::string &k) { return ptree::path_type(k, '\x1f'); }

        inline const ptree *section(const ptree &root, const std::string &name)
        {
            const auto child = root.get_child_optional(key(name));
            return child ? &*child : nullptr;
        }

        inline std::optional<std::string> get(const ptree *sec, const std::string &k)
        {
            if (!sec)
                return std::nullopt;
            const auto v = sec->get_optional<std::string>(key(k));
            if (!v)
                return std::nullopt;
            return std::string(apm::detail::trim(*v));
        }

        inline std::string require(const ptree *sec, const std::string &sec_name, const std::string &k)
        {
            auto v = get(sec, k);
            if (!v || v->empty())
                fail(Errc::ConfigError, "missing [" + sec_name + "] " + k);
            return *v;
        }

        inline double as_double(const std::string &text, const std::string &what)
        {
            const auto v = apm::detail::parse_double(text);
            if (!v)
                fail(Errc::ConfigError, what + ": expected a number, got '" + text + "'");
            return *v;
        }

        inline std::int64_t as_int(const std::string &text, const std::string &what)
        {
            const auto v = apm::detail::parse_int(text);
            if (!v)
                fail(Errc::ConfigError, what + ": expected an integer, got '" + text + "'");
            return *v;
        }

        inline std::size_t as_count(const std::string &text, const std::string &what)
        {
            const auto v = as_int(text, what);
            if (v < 1)
                fail(Errc::ConfigError, what + " must be >= 1");
            return static_cast<std::size_t>(v);
        }

        inline bool as_bool(const std::string &text, const std::string &what)
        {
            if (text == "true" || text == "1" || text == "yes")
                return true;
            if (text == "false" || text == "0" || text == "no")
                return false;
            fail(Errc::ConfigError, what + ": expected true/false, got '" + text + "'");
        }

        inline Timestamp as_time(const std::string &text, const std::string &what)
        {
            try
            {
                return Timestamp::parse(text);
            }
            catch (const Error &)
            {
                fail(Errc::ConfigError, what + ": bad date '" + text + "'");
            }
        }

        inline std::string resolve(const std::filesystem::path &base, const std::string &p)
        {
            if (p.empty())
                return p;
            const std::filesystem::path path(p);
            return path.is_absolute() ? p : (base / path).lexically_normal().string();
        }
    } // namespace detail

    inline RunConfig parse_config(std::istream &in, const std::filesystem::path &base_dir = ".")
    {
        using namespace detail;
        ptree root;
        try
        {
            boost::property_tree::ini_parser::read_ini(in, root);
        }
        catch (const boost::property_tree::ini_parser_error &e)
        {
            fail(Errc::ConfigError, e.what());
        }

        RunConfig cfg;
        const ptree *data = section(root, "data");
        cfg.data_dir = resolve(base_dir, get(data, "dir").value_or("."));
        auto &s = cfg.setup;
        s.assets = apm::detail::split_list(require(data, "data", "assets"));
        if (s.assets.empty())
            fail(Errc::ConfigError, "[data] assets is empty");

        const ptree *bt = section(root, "backtest");
        s.prestart = as_time(require(bt, "backtest", "prestart"), "prestart");
        s.start = as_time(require(bt, "backtest", "start"), "start");
        s.end = as_time(require(bt, "backtest", "end"), "end");
        const auto period = get(bt, "period").value_or("daily");
        if (period == "daily")
            s.period = Period::Daily;
        else if (period == "intraday")
            s.period = Period::Intraday;
        else
            fail(Errc::ConfigError, "period must be daily or intraday");
        s.capital = as_double(get(bt, "capital").value_or("100000"), "capital");
        s.mem = as_count(get(bt, "mem").value_or("10"), "mem");
        s.seed = static_cast<std::uint64_t>(as_int(get(bt, "seed").value_or("0"), "seed"));
        const auto fill = get(bt, "fill_policy").value_or("decision_close");
        if (fill == "decision_close")
            s.fill_policy = backtest::FillPolicy::DecisionClose;
        else if (fill == "next_open")
            s.fill_policy = backtest::FillPolicy::NextOpen;
        else
            fail(Errc::ConfigError, "fill_policy must be decision_close or next_open");
        s.costs.fixed = as_double(get(bt, "fixed_cost").value_or("0"), "fixed_cost");
        s.costs.proportional = as_double(get(bt, "proportional_cost").value_or("0"), "proportional_cost");
        if (s.costs.fixed < 0 || s.costs.proportional < 0)
            fail(Errc::ConfigError, "costs must be >= 0");
        s.results_file = resolve(base_dir, get(bt, "results_file").value_or(""));
        cfg.report_file = resolve(base_dir, get(bt, "report_file").value_or(""));
        cfg.plot_file = resolve(base_dir, get(bt, "plot_file").value_or(""));
        s.verbose = as_bool(get(bt, "verbose").value_or("false"), "verbose");

        const ptree *st = section(root, "strategy");
        auto &sc = cfg.strategy;
        sc.name = get(st, "name").value_or("random");
        if (!strategy_names().count(sc.name))
            fail(Errc::ConfigError, "unknown strategy '" + sc.name + "'");
        sc.alpha = as_double(get(st, "alpha").value_or("0.5"), "alpha");
        if (sc.alpha < 0)
            fail(Errc::ConfigError, "alpha must be >= 0");
        sc.ma_period = as_count(get(st, "ma_period").value_or("10"), "ma_period");
        sc.time_frame = as_count(get(st, "time_frame").value_or("10"), "time_frame");
        sc.n_estimators = as_count(get(st, "n_estimators").value_or("10"), "n_estimators");
        sc.risk_free = as_double(get(st, "risk_free").value_or("0"), "risk_free");

        if (const ptree *lots = section(root, "lots"))
            for (const auto &[asset, node] : *lots)
                s.lots[asset] = as_int(std::string(apm::detail::trim(node.data())), "lot step for " + asset);

        const ptree *ips_sec = section(root, "ips");
        const ptree *classes = section(root, "ips_classes");
        const ptree *bounds = section(root, "ips_bounds");
        if (ips_sec || classes || bounds)
        {
            ips::PolicyStatement policy;
            for (const auto &a : apm::detail::split_list(get(ips_sec, "allowed").value_or("")))
                policy.allowed_assets.insert(a);
            if (classes)
                for (const auto &[asset, node] : *classes)
                    policy.asset_class[asset] = std::string(apm::detail::trim(node.data()));
            if (bounds)
                for (const auto &[cls, node] : *bounds)
                {
                    const auto parts = apm::detail::split_list(node.data());
                    if (parts.size() != 2)
                        fail(Errc::ConfigError, "[ips_bounds] " + cls + " needs 'min, max'");
                    policy.class_bounds[cls] = {as_double(parts[0], cls), as_double(parts[1], cls)};
                }
            policy.validate();
            s.policy = std::move(policy);
        }

        if (const ptree *ex = section(root, "experiment"))
        {
            ExperimentConfig e;
            e.strategies = apm::detail::split_list(get(ex, "strategies").value_or(""));
            e.portfolio = apm::detail::split_list(get(ex, "portfolio").value_or(""));
            for (const auto &n : e.strategies)
                if (!strategy_names().count(n) || n == "hr" || n == "apm1")
                    fail(Errc::ConfigError, "experiment mono-asset strategy '" + n + "' is not allowed");
            for (const auto &n : e.portfolio)
                if (n != "hr" && n != "apm1")
                    fail(Errc::ConfigError, "experiment portfolio strategy must be hr or apm1, got '" + n + "'");
            e.summary_file = resolve(base_dir, get(ex, "summary_file").value_or(""));
            e.results_dir = resolve(base_dir, get(ex, "results_dir").value_or(""));
            cfg.experiment = std::move(e);
        }

        try
        {
            s.validate();
        }
        catch (const Error &e)
        {
            fail(Errc::ConfigError, e.what());
        }
        return cfg;
    }

    inline RunConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            fail(Errc::ConfigError, "cannot open config file '" + path + "'");
        return parse_config(in, std::filesystem::path(path).parent_path());
    }

} // namespace apm::config
