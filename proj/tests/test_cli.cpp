#include "apm/app.hpp"
#include "apm/synthetic.hpp"
#include "test_helpers.hpp"

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

using namespace apm;
using testing_support::slurp;
using testing_support::TempDir;

namespace
{
    void write_data(const TempDir &dir, const std::vector<std::string> &assets, std::size_t n = 120)
    {
        std::filesystem::create_directories(dir.path() / "data");
        std::uint64_t seed = 1;
        for (const auto &a : assets)
            write_bar_csv(dir.file("data/" + a + ".csv"), synthetic::random_walk(a, n, seed++));
    }

    std::string ini_text(const std::string &strategy, const std::string &assets = "AAA, BBB",
                       const std::string &extra = "")
    {
        return "[data]\ndir = data\nassets = " + assets +
               "\n\n[backtest]\nprestart = 2018-01-02\nstart = 2018-03-01\nend = 2018-06-29\ncapital = 100000\n"
               "mem = 10\nseed = 42\nresults_file = out/results.csv\nreport_file = out/report.txt\n\n"
               "[strategy]\nname = " +
               strategy + "\nn_estimators = 5\n" + extra;
    }

    struct Captured
    {
        int code;
        std::string out, err;
    };

    Captured run_cmd(const std::string &path, app::Overrides ov = {})
    {
        std::ostringstream out, err;
        const int code = app::cmd_run(path, ov, out, err);
        return {code, out.str(), err.str()};
    }

    Captured experiment(const std::string &path, app::Overrides ov = {})
    {
        std::ostringstream out, err;
        const int code = app::cmd_experiment(path, ov, out, err);
        return {code, out.str(), err.str()};
    }

    int shell(const std::string &cmd)
    {
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
} // namespace

TEST(Config, ParsesAllSections)
{
    std::istringstream in(ini_text("apm1", "AAA, BBB",
                                 "alpha = 0.25\nma_period = 5\ntime_frame = 7\n\n[lots]\nAAA = 100\n\n[ips]\nallowed = AAA, BBB\n\n"
                                 "[ips_classes]\nAAA = stocks\nBBB = stocks\n\n[ips_bounds]\nstocks = 0.25, 0.75\n\n"
                                 "[experiment]\nstrategies = rsi, ma\nportfolio = hr, apm1\nsummary_file = out/s.txt\n"));
    const auto cfg = config::parse_config(in, "/base");
    EXPECT_EQ(cfg.data_dir, "/base/data");
    EXPECT_EQ(cfg.setup.assets, (std::vector<std::string>{"AAA", "BBB"}));
    EXPECT_EQ(cfg.setup.start, Timestamp::from_date(2018, 3, 1));
    EXPECT_EQ(cfg.setup.seed, 42u);
    EXPECT_EQ(cfg.setup.results_file, "/base/out/results.csv");
    EXPECT_EQ(cfg.strategy.name, "apm1");
    EXPECT_EQ(cfg.strategy.alpha, 0.25);
    EXPECT_EQ(cfg.strategy.ma_period, 5u);
    EXPECT_EQ(cfg.strategy.time_frame, 7u);
    EXPECT_EQ(cfg.setup.lots.at("AAA"), 100);
    ASSERT_TRUE(cfg.setup.policy);
    EXPECT_EQ(cfg.setup.policy->class_bounds.at("stocks").max_weight, 0.75);
    ASSERT_TRUE(cfg.experiment);
    EXPECT_EQ(cfg.experiment->portfolio, (std::vector<std::string>{"hr", "apm1"}));
    EXPECT_EQ(cfg.bar_file("AAA"), "/base/data/AAA.csv");
}

TEST(Config, Errors)
{
    const auto bad = [](const std::string &text) {
        std::istringstream in(text);
        SCOPED_TRACE(text);
        EXPECT_ERRC(config::parse_config(in), Errc::ConfigError);
    };
    bad(ini_text("magic"));
    bad("[data]\nassets = A\n");
    bad(ini_text("rsi") + "alpha = -1\n");
    bad(ini_text("rsi") + "\n[experiment]\nstrategies = hr\n");
    bad(ini_text("rsi") + "\n[lots]\nAAA = 0\n");
    bad(ini_text("rsi") + "\n[ips_bounds]\nstocks = 0.9\n");
    bad(std::string("[data]\nassets = A\n[backtest]\nprestart = 2018-01-02\nstart = 2018-01-01\nend = 2018-02-01\n"));
    bad("[data\nbroken");
    EXPECT_ERRC(config::load_config("/nonexistent/config.ini"), Errc::ConfigError);
}

TEST(CmdRun, RandomStrategyWritesBothFiles)
{
    TempDir dir;
    write_data(dir, {"AAA", "BBB"});
    const auto cfg = dir.write("run.ini", ini_text("random") + "\n");
    const auto r = run_cmd(cfg);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir.file("out/results.csv")));
    EXPECT_TRUE(std::filesystem::exists(dir.file("out/report.txt")));
    EXPECT_EQ(slurp(dir.file("out/report.txt")), r.out);
    EXPECT_NO_THROW(evaluate::evaluate_file(dir.file("out/results.csv")));
}

TEST(CmdRun, EveryStrategyRunsAndIsDeterministic)
{
    TempDir dir;
    write_data(dir, {"AAA", "BBB"});
    for (const auto &name : config::strategy_names())
    {
        const auto cfg = dir.write(name + ".ini", ini_text(name));
        const auto a = run_cmd(cfg);
        ASSERT_EQ(a.code, 0) << name << ": " << a.err;
        const auto first = slurp(dir.file("out/results.csv"));
        const auto b = run_cmd(cfg);
        ASSERT_EQ(b.code, 0);
        EXPECT_EQ(first, slurp(dir.file("out/results.csv"))) << name;
        EXPECT_EQ(a.out, b.out);
    }
}

TEST(CmdRun, SeedOverrideAndJson)
{
    TempDir dir;
    write_data(dir, {"AAA", "BBB"});
    const auto cfg = dir.write("run.ini", ini_text("random"));
    const auto a = run_cmd(cfg, {.seed = 1, .json = true});
    ASSERT_EQ(a.code, 0) << a.err;
    const auto j = nlohmann::json::parse(a.out);
    EXPECT_TRUE(j.contains("ann_return_pct"));
    EXPECT_TRUE(j.contains("ann_sharpe_pct"));
    EXPECT_TRUE(j.contains("daily_vol_pct"));
    const auto b = run_cmd(cfg, {.seed = 2, .json = true});
    EXPECT_NE(a.out, b.out);
}

TEST(CmdRun, VerboseLogsToStderr)
{
    TempDir dir;
    write_data(dir, {"AAA"});
    const auto cfg = dir.write("run.ini", ini_text("random", "AAA"));
    const auto r = run_cmd(cfg, {.verbose = true});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find(" ORDER "), std::string::npos);
}

TEST(CmdRun, PlotFile)
{
    TempDir dir;
    write_data(dir, {"AAA"});
    auto text = ini_text("rsi", "AAA");
    const std::string anchor = "report_file = out/report.txt\n";
    text.insert(text.find(anchor) + anchor.size(), "plot_file = out/eq.svg\n");
    const auto cfg = dir.write("run.ini", text);
    const auto r = run_cmd(cfg);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto svg = slurp(dir.file("out/eq.svg"));
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
}

TEST(CmdRun, ExitCodes)
{
    TempDir dir;
    write_data(dir, {"AAA"});
    EXPECT_EQ(run_cmd(dir.write("missing.ini", ini_text("random", "AAA, ZZZ"))).code, 3);
    EXPECT_EQ(run_cmd(dir.write("unknown.ini", ini_text("magic", "AAA"))).code, 2);
    EXPECT_EQ(run_cmd(dir.file("nope.ini")).code, 2);
    EXPECT_EQ(run_cmd(dir.write("mem.ini", ini_text("ma", "AAA", "ma_period = 20\n"))).code, 2);
    dir.write("data/BAD.csv", "timestamp,open,high,low,close,volume\n2018-01-02,1,2\n");
    const auto bad = run_cmd(dir.write("bad.ini", ini_text("random", "BAD")));
    EXPECT_EQ(bad.code, 3);
    EXPECT_NE(bad.err.find("expected 6 columns"), std::string::npos);
    EXPECT_FALSE(std::filesystem::exists(dir.file("out/results.csv")));
}

TEST(CmdEvaluate, ReportsAndFailsOnMalformed)
{
    TempDir dir;
    write_data(dir, {"AAA"});
    ASSERT_EQ(run_cmd(dir.write("run.ini", ini_text("random", "AAA"))).code, 0);
    std::ostringstream out, err;
    EXPECT_EQ(app::cmd_evaluate(dir.file("out/results.csv"), {}, out, err), 0);
    EXPECT_EQ(out.str(), slurp(dir.file("out/report.txt")));

    std::ostringstream jout;
    EXPECT_EQ(app::cmd_evaluate(dir.file("out/results.csv"), {.json = true}, jout, err), 0);
    const auto parsed = nlohmann::json::parse(jout.str());
    EXPECT_TRUE(parsed.contains("ann_return_pct"));

    const auto bad = dir.write("bad.csv", "bar_index,timestamp,cash,holdings_value,equity\n0,2018-01-01,x\n");
    EXPECT_EQ(app::cmd_evaluate(bad, {}, out, err), 3);
    EXPECT_EQ(app::cmd_evaluate(dir.file("none.csv"), {}, out, err), 3);
}

TEST(CmdExperiment, GridCountsAndDeterminism)
{
    TempDir dir;
    write_data(dir, {"AAA", "BBB"});
    const auto cfg = dir.write("exp.ini", ini_text("random") +
                                              "\n[experiment]\nstrategies = rsi, ma, rfor\nportfolio = hr, apm1\n"
                                              "summary_file = out/summary.txt\nresults_dir = out/runs\n");
    const auto a = experiment(cfg);
    ASSERT_EQ(a.code, 0) << a.err;
    std::size_t files = 0;
    for (const auto &e : std::filesystem::directory_iterator(dir.file("out/runs")))
        files += e.path().extension() == ".csv";
    EXPECT_EQ(files, 8u);
    EXPECT_TRUE(std::filesystem::exists(dir.file("out/runs/rsi_AAA.csv")));
    EXPECT_TRUE(std::filesystem::exists(dir.file("out/runs/apm1.csv")));
    const auto summary = slurp(dir.file("out/summary.txt"));
    EXPECT_EQ(summary, a.out);
    EXPECT_NE(summary.find("Results for asset AAA"), std::string::npos);
    EXPECT_NE(summary.find("Results for asset BBB"), std::string::npos);
    EXPECT_NE(summary.find("Portfolio results"), std::string::npos);
    EXPECT_NE(summary.find("APM1"), std::string::npos);

    const auto b = experiment(cfg);
    EXPECT_EQ(b.out, a.out);
    EXPECT_EQ(slurp(dir.file("out/summary.txt")), summary);

    std::ostringstream out, err;
    ASSERT_EQ(app::cmd_experiment(cfg, {.json = true}, out, err), 0);
    EXPECT_EQ(nlohmann::json::parse(out.str()).size(), 8u);
}

TEST(CmdExperiment, BadAssetAbortsWithoutOutputs)
{
    TempDir dir;
    write_data(dir, {"AAA"});
    dir.write("data/BBB.csv", "timestamp,open,high,low,close,volume\n2018-01-02,5,4,6,5,1\n");
    const auto cfg = dir.write("exp.ini", ini_text("random") +
                                              "\n[experiment]\nstrategies = rsi\nportfolio = hr\n"
                                              "summary_file = out/summary.txt\nresults_dir = out/runs\n");
    const auto r = experiment(cfg);
    EXPECT_EQ(r.code, 3);
    EXPECT_TRUE(r.out.empty());
    EXPECT_FALSE(std::filesystem::exists(dir.file("out")));
}

TEST(CmdExperiment, NeedsExperimentSection)
{
    TempDir dir;
    write_data(dir, {"AAA"});
    EXPECT_EQ(experiment(dir.write("e.ini", ini_text("random", "AAA"))).code, 2);
}

TEST(Binary, SubcommandsAndExitCodes)
{
    TempDir dir;
    write_data(dir, {"AAA"});
    const std::string exe = APM_CLI_PATH;
    const auto q = [](const std::string &s) { return "'" + s + "'"; };
    const auto cfg = dir.write("run.ini", ini_text("random", "AAA"));
    EXPECT_EQ(shell(exe + " run --config " + q(cfg) + " --seed 3 --json > /dev/null"), 0);
    EXPECT_EQ(shell(exe + " evaluate " + q(dir.file("out/results.csv")) + " > /dev/null"), 0);
    EXPECT_EQ(shell(exe + " run --config " + q(dir.file("none.ini")) + " 2> /dev/null"), 2);
    EXPECT_EQ(shell(exe + " run 2> /dev/null"), 2);
    EXPECT_EQ(shell(exe + " evaluate " + q(dir.file("none.csv")) + " 2> /dev/null"), 3);
    EXPECT_EQ(shell(exe + " --help > /dev/null"), 0);
    EXPECT_EQ(shell(exe + " synth --out " + q(dir.file("gen")) + " --assets X,Y --bars 30 --seed 4"), 0);
    EXPECT_EQ(load_bar_csv(dir.file("gen/X.csv"), "X").size(), 30u);
}
