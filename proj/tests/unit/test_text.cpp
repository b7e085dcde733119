#include "ragred/text.hpp"

#include <fstream>

#include <gtest/gtest.h>

namespace ragred {
namespace {

TEST(Tokenize, LowercasesAndSplitsOnNonAlnum) {
  EXPECT_EQ(tokenize("Cost-Effective  medicine!"),
            (std::vector<std::string>{"cost", "effective", "medicine"}));
  EXPECT_EQ(tokenize("a1b2 c3"), (std::vector<std::string>{"a1b2", "c3"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(Fnv1a64, MatchesPublishedConstants) {
  // Reference values from the bit-exact definition: offset basis
  // 14695981039346656037, prime 1099511628211.
  EXPECT_EQ(fnv1a64(""), 14695981039346656037ull);
  EXPECT_EQ(fnv1a64("cost"), 859913274118676344ull);
  EXPECT_EQ(fnv1a64("effective"), 11706337132583486002ull);
  EXPECT_EQ(fnv1a64("medicine"), 9201214486584835197ull);
}

TEST(WordCore, StripsEdgePunctuationAndLowercases) {
  EXPECT_EQ(word_core("Budget-friendly,"), "budget-friendly");
  EXPECT_EQ(word_core("(Quality)"), "quality");
  EXPECT_EQ(word_core("!!!"), "");
}

TEST(SplitWords, RoundTripsThroughJoin) {
  const std::string text = "Efficient medication procurement, at a budget-friendly price!";
  EXPECT_EQ(join_words(split_words(text)), text);
}

TEST(Percentile, NearestRank) {
  std::vector<double> v;
  for (int i = 1; i <= 20; ++i) v.push_back(static_cast<double>(i));
  EXPECT_DOUBLE_EQ(percentile(v, 95.0), 19.0);  // rank ceil(0.95*20)=19
  EXPECT_DOUBLE_EQ(percentile(v, 5.0), 1.0);    // rank ceil(0.05*20)=1
  EXPECT_DOUBLE_EQ(percentile(v, 100.0), 20.0);
  EXPECT_THROW(percentile({}, 50.0), PreconditionError);
}

TEST(SeededRng, DeterministicAcrossInstances) {
  SeededRng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
  }
  SeededRng c(42), d(42);
  EXPECT_EQ(c.sample_indices(50, 10), d.sample_indices(50, 10));
}

TEST(SeededRng, SampleIndicesAreDistinct) {
  SeededRng rng(7);
  auto picks = rng.sample_indices(10, 10);
  std::sort(picks.begin(), picks.end());
  for (size_t i = 0; i < picks.size(); ++i) EXPECT_EQ(picks[i], i);
}

TEST(Stopwords, AssetFileMatchesBuiltinList) {
  std::ifstream in(std::string(RAGRED_SOURCE_DIR) + "/data/stopwords.txt");
  ASSERT_TRUE(in.is_open());
  std::set<std::string> from_file;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) from_file.insert(line);
  }
  EXPECT_EQ(from_file, stopwords());
}

TEST(Stopwords, SpamFixtureTokensAreContent) {
  EXPECT_EQ(stopwords().count("buy"), 0u);
  EXPECT_EQ(stopwords().count("now"), 0u);
  EXPECT_EQ(stopwords().count("the"), 1u);
}

}  // namespace
}  // namespace ragred
