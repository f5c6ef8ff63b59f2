#include "openphase/sweep.hpp"

#include <gtest/gtest.h>

using namespace openphase;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "test.ini");
}

std::string csv_text(const SweepTable& t) {
    std::ostringstream out;
    write_csv(out, t);
    return out.str();
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigParse& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, DefaultPulseValues) {
    const RunConfig c = parse("");
    EXPECT_DOUBLE_EQ(c.pulse.g01, 15.0);
    EXPECT_DOUBLE_EQ(c.pulse.t0, 4.0 / 3.0);
    EXPECT_EQ(c.grid.N, 2000);
    EXPECT_TRUE(c.schedule.empty());
}

TEST(Config, ReadsAllSections) {
    const RunConfig c = parse(
        "[pulse]\ng01 = 10\nt0 = -1.5\n"
        "[rates]\ngamma13 = 0.25\n"
        "[schedule]\npoints = 0.5,1,0,0; 0,0,1,0.5\nmodel = printed\n"
        "[grid]\nN = 500\ntMin = -5\ntMax = 7\nlabels = 1, 2, 3\n"
        "[loop]\nkappa = 2\n"
        "[output]\ndir = results\nname = run1\nthreads = 2\nseed = 9\n");
    EXPECT_DOUBLE_EQ(c.pulse.g01, 10.0);
    EXPECT_DOUBLE_EQ(c.pulse.t0, -1.5);
    EXPECT_DOUBLE_EQ(c.rates.gamma13, 0.25);
    ASSERT_EQ(c.schedule.size(), 2u);
    EXPECT_DOUBLE_EQ(c.schedule[1].rates.gamma21, 0.5);
    EXPECT_EQ(c.loop.model, SuperoperatorModel::Printed);
    EXPECT_EQ(c.grid.N, 500);
    EXPECT_EQ(c.labels, (std::set<int>{1, 2, 3}));
    EXPECT_DOUBLE_EQ(c.loop.kappa, 2.0);
    EXPECT_EQ(c.outDir, "results");
    EXPECT_EQ(c.threads, 2u);
    EXPECT_EQ(c.seed, 9);
}

TEST(Config, UnknownKeyNamed) {
    EXPECT_NE(error_of("[grid]\nNN = 10\n").find("grid.NN"), std::string::npos);
}

TEST(Config, UnknownSectionNamed) {
    EXPECT_NE(error_of("[plot]\nx = 1\n").find("[plot]"), std::string::npos);
}

TEST(Config, SyntaxErrorCarriesLine) {
    EXPECT_NE(error_of("[grid]\nN = 500\nthis is not a key\n").find("test.ini:3"), std::string::npos);
}

TEST(Config, BadValuesRejected) {
    EXPECT_FALSE(error_of("[grid]\nN = 50\n").empty());
    EXPECT_FALSE(error_of("[grid]\ntMin = 1\n").empty());
    EXPECT_FALSE(error_of("[grid]\nlabels = 0\n").empty());
    EXPECT_FALSE(error_of("[grid]\nN = 12.5\n").empty());
    EXPECT_FALSE(error_of("[pulse]\ntau = abc\n").empty());
    EXPECT_FALSE(error_of("[schedule]\npoints = 1,2,3\n").empty());
    EXPECT_FALSE(error_of("[rates]\ngamma13 = -1\n").empty());
    EXPECT_FALSE(error_of("[schedule]\nfigure = nope\n").empty());
}

TEST(Config, FigureScheduleResolved) {
    const RunConfig c = parse("[schedule]\nfigure = emission\n");
    EXPECT_EQ(c.schedule.size(), 60u);
    EXPECT_EQ(c.labels, (std::set<int>{1, 9}));
    EXPECT_DOUBLE_EQ(c.schedule.back().x, 2.0);
}

TEST(Figures, AllIdsKnown) {
    for (const auto& id : figure_ids()) {
        RunConfig c;
        EXPECT_NO_THROW(apply_figure(c, id)) << id;
    }
    RunConfig c;
    EXPECT_THROW(apply_figure(c, "fig9"), UnknownFigure);
}

TEST(Figures, ReversedFlipsDelay) {
    RunConfig c;
    apply_figure(c, "reversed");
    EXPECT_DOUBLE_EQ(c.pulse.t0, -4.0 / 3.0);
}

TEST(Figures, CombinedUsesEulerRatio) {
    RunConfig c;
    apply_figure(c, "combined");
    const auto& r = c.schedule.front().rates;
    EXPECT_NEAR(r.gamma23 / r.gamma13, std::numbers::e, 1e-14);
    EXPECT_DOUBLE_EQ(r.gamma21, r.gamma13);
}

TEST(Csv, TwelveSignificantDigits) {
    EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(format_number(-2.5e-7), "-2.5e-07");
}

TEST(Sweep, EmptyScheduleGivesHeaderOnly) {
    const auto t = run_config(parse("[grid]\nlabels = 1\n"), "sweep");
    EXPECT_TRUE(t.rows.empty());
    EXPECT_FALSE(t.header.empty());
}

TEST(Sweep, SinglePointOneRow) {
    const auto t = run_config(parse("[schedule]\npoints = 0.5,1,0,0\n[grid]\nlabels = 1\n"), "sweep");
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][7], "1");
    EXPECT_NEAR(std::stod(t.rows[0][8]), -0.00209, 2e-5);
}

TEST(Sweep, Deterministic) {
    const std::string cfg = "[schedule]\npoints = 0.5,1,0,0; 0,0,1,0.5\n[grid]\nN = 400\nlabels = 1,9\n[output]\nthreads = 2\n";
    EXPECT_EQ(csv_text(run_config(parse(cfg), "sweep")), csv_text(run_config(parse(cfg), "sweep")));
}

TEST(Sweep, MetadataEchoesConfig) {
    const auto t = run_config(parse("[schedule]\npoints = 0.5,1,0,0\n[grid]\nN = 400\nlabels = 1\n"), "sweep");
    const std::string text = csv_text(t);
    EXPECT_NE(text.find("# config N = 400"), std::string::npos);
    EXPECT_NE(text.find("# openphase "), std::string::npos);
    EXPECT_NE(text.find("grid convergence"), std::string::npos);
}

// the echoed configuration parses back to the same run
TEST(Sweep, EchoReparses) {
    const RunConfig c = parse("[pulse]\nt0 = 1.1\n[schedule]\npoints = 0.3,0.2,0,0.1\n[grid]\nN = 300\nlabels = 4,5\n");
    std::string ini;
    for (const auto& l : config_echo(c)) ini += l + "\n";
    const RunConfig back = parse(ini);
    EXPECT_EQ(back.grid.N, 300);
    EXPECT_DOUBLE_EQ(back.pulse.t0, 1.1);
    EXPECT_EQ(back.labels, (std::set<int>{4, 5}));
    ASSERT_EQ(back.schedule.size(), 1u);
    EXPECT_DOUBLE_EQ(back.schedule[0].rates.gamma21, 0.1);
}

TEST(Adiabaticity, ColumnIsLogOfLhs) {
    RunConfig c;
    apply_figure(c, "adiabaticity");
    const auto t = run_config(c, "figure");
    ASSERT_EQ(t.rows.size(), 2000u);
    EXPECT_NEAR(std::stod(t.rows[0][2]), std::log(std::stod(t.rows[0][1])), 1e-9);
}

TEST(Propagate, TraceColumnIsOne) {
    const auto t = run_propagate(parse("[grid]\nsteps = 2000\n"), 1);
    for (const auto& r : t.rows) EXPECT_NEAR(std::stod(r[4]), 1.0, 1e-10);
    EXPECT_GE(std::stod(t.rows.back()[2]), 0.98);
}

TEST(Propagate, LevelRange) {
    EXPECT_THROW(run_propagate(parse(""), 4), std::invalid_argument);
}

TEST(JordanReport, SingleDefectiveBlock) {
    CMat M(2, 2);
    M << 2.0, 1.0, 0.0, 2.0;
    const auto rep = jordan_report(M, {});
    EXPECT_EQ(rep.rfind("1 block, sizes 2", 0), 0u);
    EXPECT_NE(rep.find("lambda=2 size=2"), std::string::npos);
}

TEST(JordanReport, DiagonalThreeBlocks) {
    CMat M = CMat::Zero(3, 3);
    M.diagonal() << 1.0, 2.0, 3.0;
    EXPECT_EQ(jordan_report(M, {}).rfind("3 blocks, sizes 1,1,1", 0), 0u);
}

TEST(Output, FilesWrittenWithSafeNames) {
    RunConfig c;
    apply_figure(c, "adiabaticity");
    const auto dir = std::filesystem::temp_directory_path() / "openphase_test_out";
    const std::string path = write_outputs(run_config(c, "figure"), dir.string(), "pair-g13/2", "adiabaticity");
    EXPECT_TRUE(std::filesystem::exists(path));
    EXPECT_TRUE(std::filesystem::exists(dir / "pair-g13_2.gp"));
    std::filesystem::remove_all(dir);
}
