#include "apm/app.hpp"
#include "apm/synthetic.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char **argv)
{
    CLI::App cli{"Autonomous portfolio manager backtester"};
    cli.require_subcommand(1);

    std::string config_path;
    std::string results_path;
    std::string period = "daily";
    std::uint64_t seed = 0;
    apm::app::Overrides ov;

    auto *run = cli.add_subcommand("run", "run one backtest from a config file");
    run->add_option("--config", config_path, "config file")->required();
    auto *run_seed = run->add_option("--seed", seed, "override the config seed");
    run->add_flag("--verbose", ov.verbose, "log orders and fills to stderr");
    run->add_flag("--json", ov.json, "print the report as JSON");

    auto *eval = cli.add_subcommand("evaluate", "report on a results CSV");
    eval->add_option("results", results_path, "results CSV")->required();
    eval->add_option("--period", period, "daily or intraday")->check(CLI::IsMember({"daily", "intraday"}));
    eval->add_flag("--json", ov.json, "print the report as JSON");

    auto *exp = cli.add_subcommand("experiment", "run the strategy x asset grid and portfolio strategies");
    exp->add_option("--config", config_path, "config file")->required();
    auto *exp_seed = exp->add_option("--seed", seed, "override the config seed");
    exp->add_flag("--verbose", ov.verbose, "log orders and fills to stderr");
    exp->add_flag("--json", ov.json, "print per-scenario reports as JSON");

    std::string out_dir, start = "2018-01-02";
    std::string assets = "AAA,BBB,CCC";
    std::size_t n_bars = 500;
    std::uint64_t synth_seed = 1;
    auto *synth = cli.add_subcommand("synth", "write random-walk daily bar files for demos");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--assets", assets, "comma-separated asset names");
    synth->add_option("--bars", n_bars, "bars per asset")->check(CLI::PositiveNumber);
    synth->add_option("--start", start, "first bar date");
    synth->add_option("--seed", synth_seed, "generator seed");

    try
    {
        cli.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = cli.exit(e);
        return code == 0 ? 0 : apm::app::ConfigFailure;
    }

    if (*run)
    {
        if (*run_seed)
            ov.seed = seed;
        return apm::app::cmd_run(config_path, ov, std::cout, std::cerr);
    }
    if (*exp)
    {
        if (*exp_seed)
            ov.seed = seed;
        return apm::app::cmd_experiment(config_path, ov, std::cout, std::cerr);
    }
    if (*eval)
        return apm::app::cmd_evaluate(results_path, ov, std::cout, std::cerr,
                                      period == "daily" ? apm::Period::Daily : apm::Period::Intraday);
    try
    {
        const auto start_ts = apm::Timestamp::parse(start);
        std::filesystem::create_directories(out_dir);
        std::uint64_t k = 0;
        for (const auto &asset : apm::detail::split_list(assets))
        {
            const auto series = apm::synthetic::random_walk(asset, n_bars, synth_seed + k++, start_ts);
            apm::write_bar_csv((std::filesystem::path(out_dir) / (asset + ".csv")).string(), series);
        }
        return 0;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return apm::app::ConfigFailure;
    }
}
