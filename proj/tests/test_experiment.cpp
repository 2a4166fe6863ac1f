#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "edgemon/experiment.hpp"

using namespace edgemon;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("edgemon_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const auto s = parse_config("");
  EXPECT_EQ(s.n, 15);
  EXPECT_EQ(s.k, 5);
  EXPECT_EQ(s.m, 5);
  EXPECT_EQ(s.sweep, SweepVar::kNone);
  EXPECT_EQ(s.aoi_max, 20);
  EXPECT_DOUBLE_EQ(s.lambda, 0.3);
  EXPECT_EQ(s.policies.size(), 3u);
}

TEST(Config, CommentsAndWhitespace) {
  const auto s = parse_config("# fixed parameters\nn=15\n  k = 5 \nm=5  # channels\n\nsweep=m\nsweep_values=1, 3,5\n");
  EXPECT_EQ(s.n, 15);
  EXPECT_EQ(s.sweep, SweepVar::kM);
  EXPECT_EQ(s.sweep_values, (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(s.points(), (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(s.m_at(3), 3);
  EXPECT_EQ(s.n_at(3), 15);
}

TEST(Config, ErrorsNameLineAndKey) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const auto range = message("n=4\nlambda=1.5\n");
  EXPECT_NE(range.find("line 2"), std::string::npos) << range;
  EXPECT_NE(range.find("lambda"), std::string::npos) << range;
  const auto unknown = message("colour=blue");
  EXPECT_NE(unknown.find("line 1"), std::string::npos);
  EXPECT_NE(unknown.find("colour"), std::string::npos);
  const auto malformed = message("\n\nk=three");
  EXPECT_NE(malformed.find("line 3"), std::string::npos);
  EXPECT_NE(malformed.find("'k'"), std::string::npos);
  EXPECT_NE(message("no equals sign").find("key=value"), std::string::npos);
  EXPECT_NE(message("policies=ngm,sometimes").find("sometimes"), std::string::npos);
  EXPECT_NE(message("sweep=n").find("sweep_values"), std::string::npos);
  EXPECT_NE(message("m=0").find("'m'"), std::string::npos);
  EXPECT_EQ(message("m=0\npolicies=rr,never"), "no error");
}

TEST(Config, DeskScaleAoiFallback) {
  auto s = parse_config("k=5");
  EXPECT_EQ(s.effective_aoi_max(), 10);
  s = parse_config("k=5\naoi_max=20");
  EXPECT_EQ(s.effective_aoi_max(), 20);
  s = parse_config("k=3");
  EXPECT_EQ(s.effective_aoi_max(), 20);
  s = parse_config("k=5\npolicies=rr");
  EXPECT_EQ(s.effective_aoi_max(), 20);
}

TEST(Results, RowRoundTrip) {
  ResultRow r;
  r.policy = "ngm";
  r.n = 15;
  r.k = 3;
  r.m = 5;
  r.lambda = 0.3;
  r.aoi_max = 10;
  r.seed = 4;
  r.t = 200000;
  r.success_rate = 0.61234567890123456;
  r.queries_per_slot = 4.999;
  r.mu_star = 0.0095812345;
  const auto back = parse_row(format_row(r));
  EXPECT_EQ(format_row(back), format_row(r));
  EXPECT_EQ(back.success_rate, r.success_rate);
  EXPECT_EQ(*back.mu_star, *r.mu_star);
  r.mu_star.reset();
  EXPECT_FALSE(parse_row(format_row(r)).mu_star.has_value());
  EXPECT_THROW(parse_row("ngm,1,2"), ValidationError);
}

TEST(Stats, ConfidenceHalfWidth) {
  EXPECT_EQ(ci95_half_width({0.5}), 0.0);
  // n=4, sd=1: t_{0.975,3} = 3.182446305
  const double h = ci95_half_width({1.0, 2.0, 3.0, 2.0 + std::sqrt(2.0)});
  std::vector<double> v{1.0, 2.0, 3.0, 2.0 + std::sqrt(2.0)};
  double mean = 0;
  for (double x : v) mean += x / 4;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(h, 3.182446305 * std::sqrt(ss / 3) / 2, 1e-8);
}

TEST(Stats, SummarizeGroupsByPolicyAndPoint) {
  std::vector<ResultRow> rows;
  for (int n : {5, 10})
    for (int s = 0; s < 3; ++s) {
      ResultRow r;
      r.policy = "never_query";
      r.n = n;
      r.k = 3;
      r.m = 5;
      r.success_rate = 0.5 + 0.01 * s + (n == 10 ? 0.1 : 0.0);
      rows.push_back(r);
    }
  EXPECT_EQ(infer_sweep(rows), SweepVar::kN);
  const auto sum = summarize(rows, SweepVar::kN);
  ASSERT_EQ(sum.size(), 2u);
  EXPECT_EQ(sum[0].x, 5.0);
  EXPECT_EQ(sum[0].count, 3);
  EXPECT_NEAR(sum[0].mean_success, 0.51, 1e-12);
  EXPECT_NEAR(sum[1].mean_success, 0.61, 1e-12);
  EXPECT_FALSE(sum[0].mu_star.has_value());
}

TEST(Chart, DeterministicAndWellFormed) {
  svg::Series s{"ngm & co", {{5, 0.6, 0.01}, {10, 0.58, 0.0}}};
  const auto a = svg::render_line_chart({"title", "N", "success", 720, 480}, {s});
  const auto b = svg::render_line_chart({"title", "N", "success", 720, 480}, {s});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("<?xml", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  EXPECT_NE(a.find("ngm &amp; co"), std::string::npos);
  EXPECT_NE(a.find("<polyline"), std::string::npos);
  EXPECT_EQ(svg::render_line_chart({}, {}).find("nan"), std::string::npos);
}

TEST(Chart, NiceTicks) {
  const auto t = svg::detail::nice_ticks(0.0, 1.0);
  ASSERT_FALSE(t.empty());
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_NEAR(t.back(), 1.0, 1e-12);
}

TEST(Experiment, SmallSweepWritesArtifactsDeterministically) {
  ExperimentSpec spec = parse_config("n=4\nk=2\nm=1\nt=4000\naoi_max=6\nreps=2\nsweep=m\nsweep_values=1,2\n"
                                     "dual_iters=5\neval_t=2000");
  const auto d1 = scratch("a");
  const auto d2 = scratch("b");
  spec.outdir = d1.string();
  const auto r1 = run_experiment(spec);
  spec.outdir = d2.string();
  const auto r2 = run_experiment(spec);
  EXPECT_EQ(r1.rows.size(), 2u * 3u * 2u);
  EXPECT_EQ(r1.budget_checked_slots, 12 * 4000);
  for (const char* f : {"results.csv", "summary.txt", "chart.svg", "dual_trace_N4_M1.csv", "dual_trace_N4_M2.csv"}) {
    ASSERT_TRUE(fs::exists(d1 / f)) << f;
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  std::ifstream csv(d1 / "results.csv");
  const auto rows = read_results_csv(csv);
  ASSERT_EQ(rows.size(), r1.rows.size());
  EXPECT_EQ(render_chart(rows, infer_sweep(rows)), slurp(d1 / "chart.svg"));
  for (const auto& r : rows) EXPECT_EQ(r.mu_star.has_value(), r.policy == "ngm");
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Experiment, NgmWithoutChannelsMatchesNeverQuery) {
  ExperimentSpec spec = parse_config("n=3\nk=2\nm=0\nt=5000\naoi_max=6\nreps=1\npolicies=never");
  const auto rc = spec.run_config(0, 9);
  const auto tables = TableSet::solve(rc.system, 0.0, {});
  EXPECT_EQ(run(rc, NgmPolicy{tables.solved(), 0.0}), run(rc, NeverQueryPolicy{}));
}
