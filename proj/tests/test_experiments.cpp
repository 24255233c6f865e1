#include "fracid/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace fracid;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("fracid_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST(Ladder, DofCountsMatchTheTables) {
    const auto full = full_ladder();
    const long expected[] = {3146, 10496, 25137, 49348, 85529};
    ASSERT_EQ(full.size(), 5u);
    for (std::size_t i = 0; i < full.size(); ++i) {
        EXPECT_EQ(full[i].dofs(2), expected[i]);
    }
    EXPECT_EQ(desk_ladder().size(), 3u);
    EXPECT_EQ(LadderLevel({16, 16}).dofs(1), 17 * 17);
}

TEST(Ladder, Parsing) {
    EXPECT_EQ(parse_ladder("desk"), desk_ladder());
    EXPECT_EQ(parse_ladder("full"), full_ladder());
    const auto custom = parse_ladder("4x5,6x7");
    ASSERT_EQ(custom.size(), 2u);
    EXPECT_EQ(custom[1], (LadderLevel{6, 7}));
    EXPECT_THROW((void)parse_ladder("4-5"), ConfigError);
    EXPECT_THROW((void)parse_ladder("ax5"), ConfigError);
}

TEST(Config, PresetsValidate) {
    for (const char* name : {"example1", "example2", "example3", "example4", "custom"}) {
        RunConfig c = preset(name);
        EXPECT_NO_THROW(validate(c)) << name;
    }
    EXPECT_NEAR(preset("example2").data.s_bar, 0.3819660112501051, 1e-15);
    EXPECT_EQ(preset("example4").noise_levels.size(), 6u);
    EXPECT_THROW((void)preset("example9"), ConfigError);
}

TEST(Config, ValidationRejectsBadValues) {
    const auto expect_bad = [](auto mutate) {
        RunConfig c = preset("example1");
        mutate(c);
        EXPECT_THROW(validate(c), ConfigError);
    };
    expect_bad([](RunConfig& c) { c.a = 0.0; });
    expect_bad([](RunConfig& c) { c.b = 1.0; });
    expect_bad([](RunConfig& c) { c.a = 0.6, c.b = 0.4; });
    expect_bad([](RunConfig& c) { c.sigma = 0.45; });
    expect_bad([](RunConfig& c) { c.ladder.clear(); });
    expect_bad([](RunConfig& c) { c.ladder = {{10, 25}, {10, 25}}; });
    expect_bad([](RunConfig& c) { c.tol = 0.0; });
    expect_bad([](RunConfig& c) { c.s_l0 = 0.95; });
    expect_bad([](RunConfig& c) { c.noise_levels = {-1.0}; });
    expect_bad([](RunConfig& c) { c.data.k = {2}; });
    expect_bad([](RunConfig& c) { c.regularizer = "none"; });
    expect_bad([](RunConfig& c) { c.dim = 3; });
}

TEST(Config, ValidationSortsTheLadder) {
    RunConfig c = preset("example1");
    c.ladder = {{20, 56}, {10, 25}, {15, 40}};
    validate(c);
    EXPECT_EQ(c.ladder, desk_ladder());
}

TEST(Config, JsonRoundTripAndStrictKeys) {
    RunConfig c = preset("example3");
    c.sigma = 0.01;
    c.Y = 2.5;
    c.ladder = {{4, 5}, {6, 7}};
    const RunConfig back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));

    const auto j = nlohmann::json::parse(R"({"experiment": "example2", "sigma": "coupled", "ladder": "4x4,6x6"})");
    const RunConfig parsed = config_from_json(j);
    EXPECT_EQ(parsed.regularizer, "example2");
    EXPECT_FALSE(parsed.sigma.has_value());
    EXPECT_EQ(parsed.ladder.size(), 2u);

    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"sigmaa": 1})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"sigma": "auto"})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"dim": "two"})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse("[1, 2]")), ConfigError);
}

TEST(Reference, KnownOnlyWhenPenaltyIsFlatAtTarget) {
    EXPECT_EQ(reference_order(preset("example1")), 0.5);
    // exp(1/(1-s))/s is stationary at the golden-section point.
    EXPECT_EQ(reference_order(preset("example2")), preset("example2").data.s_bar);
    RunConfig shifted = preset("example1");
    shifted.data.s_bar = 0.4;
    EXPECT_FALSE(reference_order(shifted).has_value());
    EXPECT_FALSE(reference_order(preset("example3")).has_value());
}

TEST(Noise, ScalarDrawIsSeededAndBounded) {
    const PointFunction f = [](const Point&) { return 1.0; };
    const auto a = inject_noise(f, 2.0, 7, NoiseMode::scalar);
    const auto b = inject_noise(f, 2.0, 7, NoiseMode::scalar);
    EXPECT_EQ(a.scalar_draw, b.scalar_draw);
    EXPECT_LE(std::abs(a.scalar_draw), 2.0);
    EXPECT_DOUBLE_EQ(a.f(make_point(0.3, 0.3)), 1.0 + a.scalar_draw);
    EXPECT_NE(inject_noise(f, 2.0, 8, NoiseMode::scalar).scalar_draw, a.scalar_draw);

    const auto none = inject_noise(f, 0.0, 7, NoiseMode::scalar);
    EXPECT_EQ(none.scalar_draw, 0.0);
    EXPECT_DOUBLE_EQ(none.f(make_point(0.3, 0.3)), 1.0);

    const auto field = inject_noise(f, 3.0, 7, NoiseMode::field);
    ASSERT_TRUE(field.field.has_value());
    EXPECT_EQ(field.field->amplitude, 3.0);
    EXPECT_THROW((void)inject_noise(f, -1.0, 7, NoiseMode::scalar), ConfigError);
    EXPECT_EQ(parse_noise_mode("field"), NoiseMode::field);
    EXPECT_THROW((void)parse_noise_mode("pink"), ConfigError);
}

TEST(RateFit, RecoversSyntheticSlope) {
    std::vector<double> x;
    std::vector<double> y;
    for (double d : {1e3, 4e3, 1.6e4, 6.4e4}) {
        x.push_back(d);
        y.push_back(3.0 * std::pow(d, -0.6));
    }
    const RateFit fit = fit_loglog(x, y);
    EXPECT_NEAR(fit.slope, -0.6, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-10);
    EXPECT_EQ(fit.points, 4);
    EXPECT_FALSE(fit.stagnation);
}

TEST(RateFit, FlagsStagnationAndRejectsTooFewPoints) {
    const RateFit flat = fit_loglog({1e3, 1e4, 1e5}, {1e-3, 1.01e-3, 0.99e-3});
    EXPECT_TRUE(flat.stagnation);
    // Zero errors are unusable in log space.
    EXPECT_THROW((void)fit_loglog({1e3, 1e4, 1e5}, {1e-3, 0.0, 1e-4}), InsufficientDataError);
    EXPECT_THROW((void)fit_loglog({1e3}, {1e-3, 1e-4}), DomainError);
}

TEST(Run, SmallLadderIsReproducibleAndWritesOutputs) {
    RunConfig c = preset("example1");
    c.ladder = {{4, 6}, {6, 8}, {8, 10}};
    c.solve_threads = 1;
    c.level_threads = 2;
    c.write_traces = true;
    const auto dir = scratch_dir("run");
    c.out_dir = dir.string();
    const RunRecord first = run_experiment(c);
    const RunRecord second = run_experiment(c);
    ASSERT_EQ(first.rows.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_TRUE(first.rows[i].ok) << first.rows[i].error;
        EXPECT_EQ(first.rows[i].s_star, second.rows[i].s_star);
        EXPECT_NEAR(first.rows[i].s_star, 0.5, 0.05);
        EXPECT_NEAR(first.rows[i].sigma, coupled_sigma(static_cast<double>(first.rows[i].dofs), c.sigma_eps), 1e-15);
        EXPECT_TRUE(std::filesystem::exists(dir / ("trace_" + std::to_string(first.rows[i].dofs) + ".jsonl")));
    }
    ASSERT_TRUE(first.rate.has_value());
    EXPECT_EQ(first.reference, 0.5);

    write_table_csv(first, dir / "table.csv");
    std::ifstream table(dir / "table.csv");
    std::string header;
    std::getline(table, header);
    EXPECT_EQ(header, "dofs,s,j,N");
    write_rate_csv(first, 0.5, dir / "rate.csv");
    std::ifstream rate(dir / "rate.csv");
    std::getline(rate, header);
    EXPECT_EQ(header, "log_dofs,log_error");

    const auto j = to_json(first);
    EXPECT_EQ(j["rows"].size(), 3u);
    EXPECT_EQ(j["code_version"], code_version());
    EXPECT_TRUE(j["rows"][0].contains("s"));
    std::filesystem::remove_all(dir);
}

TEST(Run, FailedLevelsAreRecordedNotThrown) {
    RunConfig c = preset("example1");
    c.ladder = {{4, 6}};
    c.s_l0 = 0.6;
    c.s_r0 = 0.7;
    c.sigma = 0.3;
    c.solve_threads = 1;
    const RunRecord r = run_experiment(c);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_FALSE(r.rows[0].ok);
    EXPECT_FALSE(r.rows[0].error.empty());
    EXPECT_FALSE(r.rate.has_value());
}

TEST(TraceStudy, ErrorsDecreaseOnASmallLadder) {
    TraceStudyConfig c;
    c.orders = {0.5};
    c.ladder = {{8, 8}, {16, 16}, {32, 32}};
    c.modes = 256;
    const auto result = trace_error_study(c);
    ASSERT_EQ(result.rows.size(), 3u);
    EXPECT_GT(result.rows[0].l2_error, result.rows[1].l2_error);
    EXPECT_GT(result.rows[1].l2_error, result.rows[2].l2_error);
    ASSERT_EQ(result.fits.size(), 1u);
    EXPECT_LT(result.fits[0].slope, -0.4);
    c.ladder.pop_back();
    EXPECT_THROW((void)trace_error_study(c), ConfigError);
}
