#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "simemb/scoring.hpp"

using namespace simemb;

namespace {

std::vector<RawAnswer> full_coverage(int n, int per_pair, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> score(-3, 3);
  std::vector<RawAnswer> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int l = 0; l < per_pair; ++l) {
        // Alternate order so both (a,b) and (b,a) appear.
        if (l % 2) out.push_back({"L" + std::to_string(l), j, i, score(rng)});
        else out.push_back({"L" + std::to_string(l), i, j, score(rng)});
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate averages each unordered pair") {
  const std::vector<RawAnswer> answers = {
      {"a", 0, 1, -3}, {"b", 1, 0, -3}, {"c", 0, 1, 1}, {"d", 0, 2, 2}, {"e", 2, 0, 2},
      {"f", 1, 2, 0},  {"g", 2, 1, 0},  {"h", 0, 2, 2}, {"i", 1, 2, 0}};
  const auto m = aggregate(answers, 3, 3, 3);
  // Mean oracle over [-3, -3, 1].
  CHECK(m(0, 1) == doctest::Approx(-5.0 / 3.0).epsilon(1e-15));
  CHECK(m(1, 0) == m(0, 1));
  CHECK(m(0, 2) == 2.0);
  for (int i = 0; i < 3; ++i) CHECK(m(i, i) == 3.0);
  CHECK_FALSE(m.normalized());
}

TEST_CASE("aggregate coverage and input errors") {
  const std::vector<RawAnswer> answers = {{"a", 0, 1, 1}, {"b", 1, 2, 1}};
  CHECK_THROWS_AS(aggregate(answers, 3, 3, 1), CoverageError);
  try {
    aggregate(answers, 3, 3, 1);
  } catch (const CoverageError& e) {
    CHECK(std::string(e.what()).find("{0,2}") != std::string::npos);
  }
  CHECK_THROWS_AS(aggregate({}, 3, 3, 1), InputError);
  const std::vector<RawAnswer> self = {{"a", 1, 1, 1}};
  CHECK_THROWS_AS(aggregate(self, 2, 3, 1), InputError);
  const std::vector<RawAnswer> out_of_bound = {{"a", 0, 1, 4}};
  CHECK_THROWS_AS(aggregate(out_of_bound, 2, 3, 1), InputError);
  const std::vector<RawAnswer> bad_index = {{"a", 0, 5, 1}};
  CHECK_THROWS_AS(aggregate(bad_index, 2, 3, 1), InputError);
}

TEST_CASE("aggregate with the default minimum of ten answers") {
  std::mt19937_64 rng(3);
  auto answers = full_coverage(4, 10, rng);
  CHECK_NOTHROW(aggregate(answers, 4, 3));
  answers.pop_back();
  CHECK_THROWS_AS(aggregate(answers, 4, 3), CoverageError);
}

TEST_CASE("aggregate is order invariant and yields a valid matrix") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto answers = full_coverage(6, 5, rng);
    const auto a = aggregate(answers, 6, 3, 5);
    std::shuffle(answers.begin(), answers.end(), rng);
    const auto b = aggregate(answers, 6, 3, 5);
    CHECK(a.scores() == b.scores());
    CHECK(a.scores() == a.scores().transpose());
    CHECK(a.scores().cwiseAbs().maxCoeff() <= 3.0);
  }
}

TEST_CASE("constant answers give constant off-diagonals") {
  for (int k = -3; k <= 3; ++k) {
    std::vector<RawAnswer> answers;
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) answers.push_back({"x", i, j, k});
    }
    const auto m = aggregate(answers, 4, 3, 1);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (i != j) CHECK(m(i, j) == k);
      }
    }
  }
}

TEST_CASE("global histogram counts and cumulative ratio") {
  const std::vector<RawAnswer> answers = {{"a", 0, 1, -3}, {"b", 0, 1, -3}, {"c", 0, 2, 0},
                                          {"d", 1, 2, 2}};
  const auto h = global_histogram(answers);
  CHECK(h.bin_counts.size() == 3);
  CHECK(h.bin_counts.at(-3) == 2);
  CHECK(h.bin_counts.at(0) == 1);
  CHECK(h.bin_counts.at(2) == 1);
  CHECK(h.cumulative_ratio.at(-3) == 0.5);
  CHECK(h.cumulative_ratio.at(2) == 1.0);
  CHECK(h.cumulative_at(3) == 1.0);
  CHECK(h.cumulative_at(-4) == 0.0);

  std::vector<RawAnswer> same(5, {"z", 0, 1, 1});
  const auto hs = global_histogram(same);
  CHECK(hs.bin_counts.size() == 1);
  CHECK(hs.cumulative_ratio.at(1) == 1.0);

  std::vector<RawAnswer> uniform;
  for (int k = -3; k <= 3; ++k) uniform.push_back({"u", 0, 1, k});
  CHECK(global_histogram(uniform).cumulative_at(-1) == doctest::Approx(3.0 / 7.0).epsilon(1e-15));

  CHECK_THROWS_AS(global_histogram({}), InputError);
}

TEST_CASE("pair histogram") {
  const std::vector<RawAnswer> answers = {{"a", 0, 1, 2}, {"b", 1, 0, 3}, {"c", 0, 1, 3},
                                          {"d", 1, 2, -3}, {"e", 2, 1, -3}, {"f", 1, 2, 0}};
  const auto h = pair_histogram(answers, 0, 1);
  CHECK(h.bin_counts.at(2) == 1);
  CHECK(h.bin_counts.at(3) == 2);
  CHECK(pair_histogram(answers, 2, 1).mode() == -3);
  const std::vector<RawAnswer> one = {{"a", 0, 1, -1}};
  CHECK(pair_histogram(one, 0, 1).cumulative_ratio.at(-1) == 1.0);
  CHECK_THROWS_AS(pair_histogram(answers, 0, 2), CoverageError);
}

TEST_CASE("pair histograms partition the global histogram") {
  std::mt19937_64 rng(5);
  const int n = 5;
  const auto answers = full_coverage(n, 7, rng);
  const auto global = global_histogram(answers);
  CHECK(global.total() == static_cast<long>(answers.size()));
  std::map<int, long> summed;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (const auto& [score, count] : pair_histogram(answers, i, j).bin_counts) {
        summed[score] += count;
      }
    }
  }
  CHECK(summed == global.bin_counts);
}

TEST_CASE("negative fraction") {
  const std::vector<RawAnswer> answers = {{"a", 0, 1, -1}, {"b", 0, 1, 0}, {"c", 0, 1, -3},
                                          {"d", 0, 1, 2}};
  CHECK(negative_fraction(answers) == 0.5);
}
