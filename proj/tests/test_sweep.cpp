#include "twm/sweep.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace twm;
using namespace twm::cli;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "twm_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

SweepConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

int run(const SweepConfig& c) {
    std::ostringstream os, err;
    return dispatch(c, os, err);
}

}  // namespace

TEST(Config, ParsesAssignmentsAndComments) {
    const auto c = parse("mode = sweep  # grid\n\n P0 = 0.5:0.9:5\nm=0.3\nw = tilde\nworkers = 3\n");
    EXPECT_EQ(c.mode, "sweep");
    EXPECT_EQ(c.workers, 3u);
    ASSERT_NE(c.range("P0"), nullptr);
    EXPECT_EQ(c.range("P0")->count, 5);
    EXPECT_EQ(c.values.at("m"), 0.3);
    EXPECT_FALSE(c.has("w"));
}

TEST(Config, LaterAssignmentsWin) {
    const auto c = parse("m = 0.1:0.2:3\nm = 0.4\nw = 0.3\nw = tilde\n");
    EXPECT_EQ(c.range("m"), nullptr);
    EXPECT_EQ(c.values.at("m"), 0.4);
    EXPECT_FALSE(c.has("w"));
}

TEST(Config, RoundTrip) {
    SweepConfig c = parse("mode = opfind\ncoherence = fraction\nP0 = 0.1:0.9:9\nQ0sq = 0.25\ntau = 123.5\nW_bound = 1e-6\n"
                          "out = a.csv\nresolution = 48\ntol = 1e-10\n");
    c.ranges.emplace_back("m", Range{0.0, 1.0 / 3.0, 7});
    const auto again = parse(write_config(c));
    EXPECT_EQ(again, c);
}

TEST(Config, Errors) {
    for (const char* bad : {"bogus = 1\n", "m = abc\n", "m = 0.1:0.2\n", "P0 = 0:1:0\n", "workers = 0\n",
                            "resolution = 2.5\n", "just words\n"}) {
        EXPECT_THROW(parse(bad), Error) << bad;
    }
    for (const char* bad : {"mode = fly\n", "P0 = 1.5\n", "f = 0.5\n", "gamma = 0\n", "tau = -1\n", "Q0sq = 0.3\n",
                            "system = three\n", "m = 0:2:3\n"}) {
        EXPECT_EQ(run(parse(bad)), kConfigError) << bad;
    }
    EXPECT_NO_THROW(validate(parse("coherence = fraction\nQ0sq = 0.9\n")));
    EXPECT_THROW(load_config(scratch("missing.cfg").string()), Error);
}

TEST(Grid, LexicographicOrder) {
    const auto c = parse("P0 = 0.5:0.7:3\nm = 0.1:0.2:2\nf = 0.2\n");
    const auto pts = grid_points(c);
    ASSERT_EQ(pts.size(), 6u);
    EXPECT_EQ(pts[0].at("P0"), 0.5);
    EXPECT_EQ(pts[1].at("P0"), 0.5);
    EXPECT_EQ(pts[1].at("m"), 0.2);
    EXPECT_EQ(pts[2].at("P0"), 0.6);
    EXPECT_EQ(pts[5].at("f"), 0.2);
}

TEST(Grid, Defaults) {
    const Point p;
    EXPECT_EQ(param(p, "P0"), 0.9);
    EXPECT_EQ(param(p, "tau"), 100.0);
    EXPECT_EQ(param(p, "J"), 0.02);
    EXPECT_THROW(param(p, "w1"), Error);
    EXPECT_NEAR(resolve_w(p).value, null_energy_w_tilde(0.9, 0.4, BathParams{}, 100.0).value, 0.0);
}

TEST(Sweep, SinglePointMatchesDirectRun) {
    const auto path = scratch("one.csv");
    SweepConfig c = parse("mode = sweep\nP0 = 0.9:0.9:1\nQ0sq = 0.0767\nm = 0.4\n");
    c.out = path.string();
    ASSERT_EQ(run(c), kOk);

    const BathParams bath;
    const double w = null_energy_w_tilde(0.9, 0.4, bath, 100.0).value;
    const auto o = run_twm_single({0.9, std::sqrt(0.0767)}, bath, ProtocolParams::scalar(0.4, w, 100.0));
    ResultRow r{0.9, 0.0767, 0.4, w, 100.0, 0.3, 0.01, 1.0};
    fill_outcome(r, o, kTolerance);
    EXPECT_EQ(slurp(path), csv_header(false) + "\n" + csv_line(r, false) + "\n");
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".partial"));
}

TEST(Sweep, UnphysicalPointsBecomeNanRows) {
    SweepConfig c = parse("P0 = 0.1:0.9:2\n");
    const auto rows = [&] {
        std::vector<ResultRow> v;
        for (const auto& p : grid_points(c)) v.push_back(evaluate_single(p, c));
        return v;
    }();
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_TRUE(std::isnan(rows[0].gain_total));  // P0 < f has no w~
    EXPECT_FALSE(std::isnan(rows[1].gain_total));
    EXPECT_NE(csv_line(rows[0], false).find("nan"), std::string::npos);
}

TEST(Sweep, WorkerCountGivesIdenticalBytes) {
    std::string first;
    for (unsigned workers : {1u, 2u, 5u}) {
        const auto path = scratch("det" + std::to_string(workers) + ".csv");
        SweepConfig c = parse("mode = sweep\nP0 = 0.05:0.95:13\nm = 0.0:1.0:11\nQ0sq = 0.5\ncoherence = fraction\n");
        c.workers = workers;
        c.out = path.string();
        ASSERT_EQ(run(c), kOk);
        const auto text = slurp(path);
        if (first.empty()) first = text;
        EXPECT_EQ(text, first) << workers;
    }
    EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 1 + 13 * 11);
}

TEST(Sweep, TwoCellRows) {
    SweepConfig c = parse("mode = sweep\nsystem = two\nw1 = 0.0:0.2:2\nw2 = 0.2\n");
    const auto pts = grid_points(c);
    ASSERT_EQ(pts.size(), 2u);
    const auto r = evaluate_two(pts[1], c);
    EXPECT_EQ(r.w1, 0.2);
    EXPECT_FALSE(std::isnan(r.concurrence_final));
    const std::string header = csv_header(true);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), 21);
}

TEST(Output, AtomicWriteLeavesNoPartialFile) {
    const auto path = scratch("atomic.csv");
    write_output(path.string(), "a,b\n");
    EXPECT_EQ(slurp(path), "a,b\n");
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".partial"));
    const auto bad = scratch("no_such_dir") / "x.csv";
    EXPECT_THROW(write_output(bad.string(), "x"), Error);
    EXPECT_FALSE(std::filesystem::exists(bad.string() + ".partial"));
}

TEST(ExitCodes, Mapping) {
    EXPECT_EQ(run(parse("mode = figure\nfigure = fig99\n")), kConfigError);
    EXPECT_EQ(run(parse("mode = run\nf = 0\nw = 1\ntau = 10000\n")), kZeroProbability);
    SweepConfig opt = parse("mode = opfind\nf = 0\ncoherence = fraction\nQ0sq = 1\n");
    opt.out = scratch("none.csv").string();
    EXPECT_EQ(run(opt), kNoPoints);
    EXPECT_EQ(run(parse("mode = opfind\nw = 0.2\n")), kConfigError);
    EXPECT_EQ(run(parse("mode = run\nP0 = 0.5:0.9:3\n")), kConfigError);
    EXPECT_EQ(run(parse("mode = sweep\n")), kConfigError);
}

TEST(Commands, RunPrintsReport) {
    std::ostringstream os, err;
    ASSERT_EQ(dispatch(parse("mode = run\nQ0sq = 0.0767\n"), os, err), kOk);
    EXPECT_NE(os.str().find("(w~)"), std::string::npos);
}

TEST(Commands, SingleQubitOpfind) {
    const auto path = scratch("op.csv");
    SweepConfig c = parse("mode = opfind\nP0 = 0.9:0.9:1\nm = 0.01:1:100\nQ0sq = 0.0767\n");
    c.out = path.string();
    ASSERT_EQ(run(c), kOk);
    const auto text = slurp(path);
    EXPECT_GT(std::count(text.begin(), text.end(), '\n'), 1);
}

TEST(Commands, FigureNamesProduceCsv) {
    for (const auto& name : {"fig3", "fig10", "fig11", "fig15"}) {
        SweepConfig c;
        c.mode = "figure";
        c.figure = name;
        const auto text = figure_csv(name, c);
        EXPECT_GT(std::count(text.begin(), text.end(), '\n'), 50) << name;
        EXPECT_EQ(text.find("nan"), std::string::npos) << name;
    }
}
