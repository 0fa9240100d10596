// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "pulse/error.hpp"
#include "pulse/sam.hpp"
#include "pulse/verify.hpp"

namespace pulse {
namespace {

TEST(Checks, RowsAndCsv) {
  const CheckRow inside = make_check("s", "a", 0.5, 0.0, 1.0);
  const CheckRow outside = make_check("s", "b", 2.0, 0.0, 1.0);
  EXPECT_TRUE(inside.pass);
  EXPECT_FALSE(outside.pass);
  const std::vector<CheckRow> rows{inside, outside};
  EXPECT_FALSE(all_pass(rows));
  EXPECT_TRUE(all_pass(std::span<const CheckRow>(rows.data(), 1)));
  std::ostringstream out;
  write_check_csv(out, rows, "# h");
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# h");
  std::getline(in, line);
  EXPECT_EQ(line, "suite,check,value,lower,upper,pass");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 4), "s,a,");
  EXPECT_EQ(line.back(), '1');
}

TEST(Checks, RelativeError) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_NEAR(relative_error(0.0, 1e-6), 1e-6 / 1e-4, 1e-15);
}

TEST(Suites, GradcheckPassesEveryRow) {
  const auto rows = run_gradcheck_suite(2024);
  EXPECT_GE(rows.size(), 30u);
  for (const auto& r : rows) EXPECT_TRUE(r.pass) << r.check << " " << r.value;
}

TEST(Suites, Prop31ScalesAsClaimed) {
  Rng rng(31);
  const auto dominant = check_prop31(rng, 32, 100.0, 1.0, 20);
  EXPECT_GE(dominant.ratio, 0.5 * 100.0);
  EXPECT_LE(dominant.ratio, 2.0 * 100.0);
  EXPECT_TRUE(all_pass(dominant.rows));
  const auto balanced = check_prop31(rng, 32, 1.0, 1.0, 10);
  EXPECT_TRUE(all_pass(balanced.rows));
}

TEST(Suites, Thm32SmallGrid) {
  Rng rng(32);
  const std::vector<MixCell> grid{{1, 1, -1, 0.5}, {1, 1, 0, 0.25}, {2, 1, -1, 1.0 / 3.0}, {1.5, 0.5, 0.5, 0.75}};
  const auto cells = check_thm32(rng, grid, 1000, 50);
  ASSERT_EQ(cells.size(), grid.size());
  for (const auto& c : cells) {
    EXPECT_TRUE(c.pass) << c.cell.rho << " " << c.cell.lambda;
    EXPECT_TRUE(c.lower_bound_holds);
    EXPECT_DOUBLE_EQ(c.expected, collapse_ratio(c.cell.sigma_i, c.cell.sigma_j, c.cell.rho, c.cell.lambda));
  }
  EXPECT_LT(cells[0].max_sigma_naive, 1e-6);
  EXPECT_LT(cells[2].max_sigma_naive, 1e-6);
  EXPECT_TRUE(all_pass(thm32_rows(cells)));
}

TEST(Suites, DefaultGridCoversRhoLambdaAndCollapseCell) {
  const auto grid = default_mix_grid();
  bool collapse = false;
  std::size_t unit_pairs = 0;
  for (const auto& c : grid) {
    collapse = collapse || (c.sigma_i == 2 && c.sigma_j == 1 && c.rho == -1 && std::abs(c.lambda - 1.0 / 3.0) < 1e-15);
    unit_pairs += c.sigma_i == 1 && c.sigma_j == 1;
  }
  EXPECT_TRUE(collapse);
  EXPECT_GE(unit_pairs, 15u);  // rho {-1,-0.5,0,0.5,1} x lambda {0.25,0.5,0.75}
}

TEST(Suites, BetaAndComplexity) {
  Rng rng(33);
  EXPECT_TRUE(all_pass(check_beta(rng)));
  const std::vector<std::size_t> patches{4, 8, 12, 24}, lookbacks{96, 192, 336, 720};
  EXPECT_TRUE(all_pass(check_complexity(patches, lookbacks)));
}

TEST(Suites, RunVerifyDispatch) {
  EXPECT_TRUE(all_pass(run_verify("complexity", 2024)));
  EXPECT_TRUE(all_pass(run_verify("beta", 2024)));
  EXPECT_THROW(run_verify("everything", 2024), ConfigError);
}

}  // namespace
}  // namespace pulse
