#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "zeronoise/lab/config.hpp"
#include "zeronoise/lab/experiments.hpp"
#include "zeronoise/lab/report.hpp"

using namespace zeronoise;
using namespace zeronoise::lab;
namespace fs = std::filesystem;

namespace {

ConfigMap parse_text(const std::string& text) {
    std::istringstream in(text);
    return ConfigMap::parse(in);
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("zeronoise_lab_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_lab(const std::string& args, const fs::path& log) {
    std::string cmd = std::string(LAB_BINARY) + " " + args + " > '" + log.string() + "' 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig small_sweep(Experiment e, const fs::path& out) {
    ConfigMap m;
    m.set("cells", "256");
    m.set("eps_ladder", "0.1, 0.05");
    m.set("output", out.string());
    return ExperimentConfig::from(m, e);
}

}  // namespace

TEST(ConfigMap, ParsesCommentsWhitespaceAndOverrides) {
    auto m = parse_text("# header\n  alpha = 0.75  # trailing\n\ncells=128\nalpha = 0.5\n");
    EXPECT_EQ(m.get("alpha"), "0.5");
    EXPECT_EQ(m.get("cells"), "128");
    ASSERT_EQ(m.entries().size(), 2u);
    EXPECT_EQ(m.entries()[0].first, "alpha");
    EXPECT_FALSE(m.has("tol"));
    EXPECT_THROW(m.get("tol"), ConfigError);
}

TEST(ConfigMap, ReportsTheOffendingLine) {
    try {
        parse_text("alpha = 1\nbogus line\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_text(" = 3\n"), ConfigError);
    EXPECT_THROW(ConfigMap::load("/nonexistent/zeronoise.cfg"), ConfigError);
}

TEST(ConfigValues, ScalarParsers) {
    EXPECT_EQ(parse_int("keep", "1e6"), 1'000'000);
    EXPECT_THROW(parse_int("keep", "2.5"), ConfigError);
    EXPECT_EQ(parse_seed("seed", "18446744073709551615"), 18446744073709551615ULL);
    EXPECT_THROW(parse_seed("seed", "-1"), ConfigError);
    EXPECT_THROW(parse_double("alpha", "abc"), ConfigError);
    EXPECT_EQ(parse_list("arcs", "0.4, 0.01 ,0.2"), (std::vector<double>{0.4, 0.01, 0.2}));
}

TEST(ConfigValues, NoiseSpecifications) {
    NoiseKernel u = parse_noise("uniform(0.02)");
    EXPECT_DOUBLE_EQ(u.lo(), -0.02);
    EXPECT_DOUBLE_EQ(u.hi(), 0.02);
    NoiseKernel i = parse_noise(" interval(0.9, 0.95) ");
    EXPECT_DOUBLE_EQ(i.lo(), 0.9);
    EXPECT_DOUBLE_EQ(i.hi(), 0.95);
    EXPECT_THROW(parse_noise("gauss(1)"), ConfigError);
    EXPECT_THROW(parse_noise("uniform(-1)"), ConfigError);
    EXPECT_THROW(parse_noise("uniform 0.1"), ConfigError);
}

TEST(ExperimentConfig, FillsDefaultsAndEchoesUserText) {
    ConfigMap user;
    user.set("tol", "1.0e-9");
    auto c = ExperimentConfig::from(user, Experiment::thmB_sweep);
    EXPECT_EQ(c.alpha, 1.5);
    EXPECT_EQ(c.cells, 4096);
    EXPECT_EQ(c.eps_ladder, (std::vector<double>{0.05, 0.02, 0.01, 0.005}));
    EXPECT_EQ(c.seeds.master_seed, 20240601u);
    EXPECT_EQ(c.echo.get("tol"), "1.0e-9");
    EXPECT_EQ(c.echo.get("experiment"), "thmB_sweep");
    EXPECT_EQ(c.echo.entries().front().first, "experiment");

    EXPECT_EQ(ExperimentConfig::from({}, Experiment::thmA_sweep).alpha, 0.5);
    EXPECT_EQ(ExperimentConfig::from({}, Experiment::thmC_instability).alpha, 0.5);
    EXPECT_EQ(ExperimentConfig::from({}, Experiment::mixing).alpha, 1.0);
}

TEST(ExperimentConfig, RejectsUnknownKeysAndBadLadders) {
    ConfigMap typo;
    typo.set("alhpa", "1.5");
    EXPECT_THROW(ExperimentConfig::from(typo, Experiment::thmB_sweep), ConfigError);

    for (const char* ladder : {"0.01, 0.02", "0.05, 0.05", "0.05, -0.01", ""}) {
        ConfigMap m;
        m.set("eps_ladder", ladder);
        EXPECT_THROW(ExperimentConfig::from(m, Experiment::thmA_sweep), ConfigError) << ladder;
    }
    ConfigMap arcs;
    arcs.set("arcs", "0.4, 0.01, 0.2");
    EXPECT_THROW(ExperimentConfig::from(arcs, Experiment::mixing), ConfigError);
    ConfigMap delta;
    delta.set("delta", "0.7");
    EXPECT_THROW(ExperimentConfig::from(delta, Experiment::thmB_sweep), ConfigError);
}

TEST(Format, SeventeenDigitsRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 0.17764912345678901, 1e-300, 6.02214076e23}) {
        EXPECT_EQ(std::stod(fmt(v)), v);
    }
}

TEST(SweepB, EmitsIdenticalFilesOnRerun) {
    auto dir = scratch("sweep_rerun");
    emit(run_thmB(small_sweep(Experiment::thmB_sweep, dir)));
    std::string csv = slurp(dir / "thmB_sweep.csv");
    std::string json = slurp(dir / "thmB_sweep.json");
    emit(run_thmB(small_sweep(Experiment::thmB_sweep, dir)));
    EXPECT_EQ(slurp(dir / "thmB_sweep.csv"), csv);
    EXPECT_EQ(slurp(dir / "thmB_sweep.json"), json);
}

TEST(SweepB, JsonCarriesConfigRowsAndVerdicts) {
    auto dir = scratch("sweep_json");
    auto r = run_thmB(small_sweep(Experiment::thmB_sweep, dir));
    emit(r);
    auto j = Json::parse(slurp(dir / "thmB_sweep.json"));
    EXPECT_EQ(j["experiment"], "thmB_sweep");
    EXPECT_EQ(j["config"]["cells"], "256");
    EXPECT_EQ(j["master_seed"], 20240601u);
    ASSERT_EQ(j["rows"].size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(j["rows"][i]["w1_to_dirac"].get<double>(), r.rows[i].w1_to_dirac);
        EXPECT_EQ(j["rows"][i]["mass_near_zero"].get<double>(), r.rows[i].mass_near_zero);
        EXPECT_EQ(j["rows"][i]["mixture_t"].get<double>(), 1.0);
    }
    EXPECT_TRUE(j["verdicts"].contains("w1_to_dirac_decreasing"));
    EXPECT_FALSE(j["rows"][0].contains("runtime"));

    std::string csv = slurp(dir / "thmB_sweep.csv");
    EXPECT_NE(csv.find("# alpha = 1.5\n"), std::string::npos);
    EXPECT_NE(csv.find("# version = "), std::string::npos);
    EXPECT_NE(csv.find("eps,w1_to_dirac,w1_to_srb,mass_near_zero,mixture_t,mixture_distance\n"), std::string::npos);
}

TEST(SweepB, RowsAgreeWithDirectComputation) {
    auto r = run_thmB(small_sweep(Experiment::thmB_sweep, scratch("sweep_direct")));
    auto sys = RandomSystem::additive(IntermittentMap(1.5), uniform_kernel(0.05));
    auto mu = stationary(assemble_annealed(sys, 256, 5), 1e-10).measure;
    EXPECT_NEAR(r.rows[1].w1_to_dirac, w1_circle(mu, dirac_zero()), 1e-8);
    EXPECT_NEAR(r.rows[1].mass_near_zero, mass_near_zero(mu, 0.05), 1e-8);
    EXPECT_NEAR(r.ratio_last_first, r.rows[1].w1_to_dirac / r.rows[0].w1_to_dirac, 1e-15);
}

TEST(SweepA, RequiresWeakTangency) {
    auto c = small_sweep(Experiment::thmA_sweep, scratch("sweep_weak"));
    auto r = run_thmA(c);
    ASSERT_EQ(r.rows.size(), 2u);
    for (const auto& row : r.rows) {
        EXPECT_GE(row.mixture_t, 0.0);
        EXPECT_LE(row.mixture_t, 1.0);
        EXPECT_LE(row.mixture_distance, row.w1_to_srb + 1e-12);
    }
    c.alpha = 1.5;
    EXPECT_THROW(run_thmA(c), ParameterError);
}

TEST(Mixing, CoversTheDefaultArcAndFlagsExhaustion) {
    ConfigMap m;
    m.set("arcs", "0.4, 0.01, 0.1, 0.001");
    auto r = run_mixing(ExperimentConfig::from(m, Experiment::mixing));
    ASSERT_EQ(r.arcs.size(), 2u);
    ASSERT_TRUE(r.arcs[0].covering.steps.has_value());
    EXPECT_EQ(*r.arcs[0].covering.steps, 6);
    EXPECT_TRUE(r.arcs[0].nondecreasing);
    EXPECT_EQ(r.checks[0].name, "arc_0_covered");
    EXPECT_EQ(r.checks[0].verdict, Verdict::pass);

    m.set("mixing_nmax", "2");
    auto capped = run_mixing(ExperimentConfig::from(m, Experiment::mixing));
    EXPECT_EQ(capped.checks[0].verdict, Verdict::flagged);
    EXPECT_FALSE(any_failed(capped.checks));
    auto j = mixing_json(capped);
    EXPECT_TRUE(j["arcs"][0]["covering_time"].is_null());
    EXPECT_TRUE(j["arcs"][0]["exhausted"].get<bool>());
}

TEST(Instability, SmallRunEscapesAndConcentrates) {
    ConfigMap m;
    m.set("cells", "256");
    m.set("trials", "50");
    m.set("orbits", "16");
    m.set("burn_in", "20000");
    m.set("keep", "2000");
    m.set("hist_cells", "256");
    m.set("funnel_starts", "8");
    m.set("output", scratch("instability").string());
    auto r = run_thmC(ExperimentConfig::from(m, Experiment::thmC_instability));
    EXPECT_EQ(r.trials.size(), 50u);
    EXPECT_EQ(r.escaped_fraction, 1.0);
    EXPECT_GT(r.band.min_derivative, 1.0);
    EXPECT_GE(r.stationary_mass, 0.99);
    EXPECT_FALSE(any_failed(r.checks)) << dump(checks_json(r.checks));
    auto files = emit(r);
    ASSERT_EQ(files.size(), 3u);
    std::string escape = slurp(files[0]);
    EXPECT_NE(escape.find("trial,x0,escape_step,escaped\n"), std::string::npos);
}

TEST(Stage, PrefixesTheFailingStep) {
    try {
        stage("ladder", [] { throw ParameterError("bad"); });
        FAIL();
    } catch (const ParameterError& e) {
        EXPECT_EQ(std::string(e.what()), "ladder: bad");
    }
}

TEST(Cli, ExitCodes) {
    auto dir = scratch("cli");
    auto log = dir / "log.txt";
    {
        std::ofstream cfg(dir / "typo.cfg");
        cfg << "alhpa = 1.5\n";
    }
    {
        std::ofstream cfg(dir / "ladder.cfg");
        cfg << "eps_ladder = 0.01, 0.05\n";
    }
    {
        std::ofstream cfg(dir / "wrong.cfg");
        cfg << "experiment = thmA_sweep\n";
    }
    EXPECT_EQ(run_lab("sweep-b --config " + (dir / "typo.cfg").string(), log), 2);
    EXPECT_NE(slurp(log).find("alhpa"), std::string::npos);
    EXPECT_EQ(run_lab("sweep-b --config " + (dir / "ladder.cfg").string(), log), 2);
    EXPECT_EQ(run_lab("sweep-b --config " + (dir / "wrong.cfg").string(), log), 2);
    EXPECT_EQ(run_lab("sweep-b --config " + (dir / "missing.cfg").string(), log), 2);
    EXPECT_EQ(run_lab("sweep-a --alpha 1.5 --cells 64", log), 2);
    EXPECT_EQ(run_lab("no-such-command", log), 2);
    EXPECT_EQ(run_lab("ulam --mode sideways", log), 2);
}

TEST(Cli, UlamThenMeasure) {
    auto dir = scratch("cli_ulam");
    auto log = dir / "log.txt";
    auto a = dir / "a.csv";
    auto b = dir / "b.csv";
    ASSERT_EQ(run_lab("ulam --alpha 0.5 --eps 0.05 --cells 128 --out " + a.string(), log), 0) << slurp(log);
    ASSERT_EQ(run_lab("ulam --alpha 0.5 --eps 0.02 --cells 128 --out " + b.string(), log), 0) << slurp(log);
    ASSERT_EQ(run_lab("measure --a " + a.string() + " --b " + a.string(), log), 0) << slurp(log);
    EXPECT_NE(slurp(log).find('0'), std::string::npos);
    ASSERT_EQ(run_lab("measure --metric tv --a " + a.string() + " --b " + b.string(), log), 0) << slurp(log);
    EXPECT_EQ(run_lab("measure --a " + a.string() + " --b " + (dir / "none.csv").string(), log), 2);
}

TEST(Cli, SweepOverridesReachTheEcho) {
    auto dir = scratch("cli_sweep");
    auto log = dir / "log.txt";
    int code = run_lab("sweep-b --cells 128 --eps-ladder '0.1, 0.05' --output " + dir.string(), log);
    EXPECT_TRUE(code == 0 || code == 1) << slurp(log);
    std::string csv = slurp(dir / "thmB_sweep.csv");
    EXPECT_NE(csv.find("# cells = 128\n"), std::string::npos);
    EXPECT_NE(csv.find("# eps_ladder = 0.1, 0.05\n"), std::string::npos);
}
