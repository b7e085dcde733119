#include "ragred/scoring.hpp"

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

namespace ragred {
namespace {

const EmbedderSpec kLocal = EmbedderSpec::local(256);

// Tiny training corpus with hand-computable counts:
// unigrams: the:4 cat:1 sat:2 on:2 mat:1 dog:1 rug:1 -> T=12, |vocab|=7, V=8
NgramLanguageModel tiny_lm() {
  const std::vector<std::string> texts = {"the cat sat on the mat", "the dog sat on the rug"};
  return NgramLanguageModel::train_texts(texts);
}

TEST(IntentScore, SelfSimilarityIsOne) {
  const std::string p = "Identify and suggest cost-effective treatments.";
  EXPECT_NEAR(intent_score(kLocal, p, p), 1.0, 1e-12);
}

TEST(IntentScore, TriggerSuffixFixture) {
  // p_adv keeps all 4 base tokens and adds 2 new ones; bag-of-tokens
  // oracle gives 4 / sqrt(4 * 6) (buckets verified collision-free).
  const std::string p_base = "recommend affordable treatment options";
  const std::string p_adv = p_base + " zelquira varnil";
  const double expected = 4.0 / std::sqrt(4.0 * 6.0);
  const double got = intent_score(kLocal, p_base, p_adv);
  EXPECT_NEAR(got, expected, 1e-12);
  EXPECT_GT(got, 0.0);
  EXPECT_LT(got, 1.0);
}

TEST(IntentScore, TokenDisjointPromptsScoreZero) {
  EXPECT_EQ(intent_score(kLocal, "alpha bravo charlie delta", "echo foxtrot golf hotel"), 0.0);
}

TEST(IntentScore, Symmetry) {
  const std::string a = "suggest budget friendly remedies";
  const std::string b = "recommend premium therapies quickly today";
  EXPECT_DOUBLE_EQ(intent_score(kLocal, a, b), intent_score(kLocal, b, a));
}

TEST(NgramLm, UnigramClosedForm) {
  const auto lm = tiny_lm();
  EXPECT_EQ(lm.vocab_size(), 7u);
  EXPECT_EQ(lm.total_tokens(), 12u);
  // P(cat) = (1+1)/(12+8)
  EXPECT_NEAR(lm.unigram_logprob("cat"), std::log(2.0 / 20.0), 1e-12);
  // OOV -> UNK: P = 1/(12+8)
  EXPECT_NEAR(lm.unigram_logprob("zzz"), std::log(1.0 / 20.0), 1e-12);
}

TEST(NgramLm, BigramClosedForm) {
  const auto lm = tiny_lm();
  // P(cat | the) = (1+1)/(4+8); row total of "the" is 4
  EXPECT_NEAR(lm.bigram_logprob("the", "cat"), std::log(2.0 / 12.0), 1e-12);
  // unseen continuation: P(rug | cat) = 1/(1+8)
  EXPECT_NEAR(lm.bigram_logprob("cat", "rug"), std::log(1.0 / 9.0), 1e-12);
  // OOV history -> uniform 1/V
  EXPECT_NEAR(lm.bigram_logprob("zzz", "cat"), std::log(1.0 / 8.0), 1e-12);
}

TEST(NgramLm, ConditionalsSumToOneOverVocabPlusUnk) {
  const auto lm = tiny_lm();
  const std::vector<std::string> vocab = {"the", "cat", "sat", "on", "mat", "dog", "rug"};
  for (const std::string prev : {"the", "mat", "zzz"}) {
    double sum = 0.0;
    for (const auto& w : vocab) sum += std::exp(lm.bigram_logprob(prev, w));
    sum += std::exp(lm.bigram_logprob(prev, "oov-token"));
    EXPECT_NEAR(sum, 1.0, 1e-12) << "prev=" << prev;
  }
  double unigram_sum = 0.0;
  for (const auto& w : vocab) unigram_sum += std::exp(lm.unigram_logprob(w));
  unigram_sum += std::exp(lm.unigram_logprob("oov-token"));
  EXPECT_NEAR(unigram_sum, 1.0, 1e-12);
}

TEST(PerplexityScore, SingleOovTokenClosedForm) {
  const auto lm = tiny_lm();
  // One UNK token: PPL = (T + V) / 1 = 20
  EXPECT_NEAR(perplexity_score("zzz", lm), 20.0, 1e-9);
}

TEST(PerplexityScore, TrainingSentenceBeatsShuffled) {
  const auto lm = tiny_lm();
  EXPECT_LT(perplexity_score("the cat sat on the mat", lm),
            perplexity_score("mat the on sat cat the", lm));
}

TEST(PerplexityScore, EmptyTextRejected) {
  const auto lm = tiny_lm();
  EXPECT_THROW(perplexity_score("", lm), PreconditionError);
  EXPECT_THROW(avg_token_loglik("...", lm), PreconditionError);
}

TEST(AvgTokenLoglik, IdentityWithPerplexity) {
  const auto lm = tiny_lm();
  for (const char* text : {"the cat", "zzz", "the cat sat on the mat", "dog rug mat on on"}) {
    EXPECT_NEAR(avg_token_loglik(text, lm), -std::log(perplexity_score(text, lm)), 1e-12);
  }
}

TEST(AvgTokenLoglik, FluentAboveDisfluent) {
  const auto lm = tiny_lm();
  EXPECT_GT(avg_token_loglik("the cat sat on the mat", lm),
            avg_token_loglik("zzz qqq xxx yyy", lm));
}

TEST(AvgTokenLoglik, SingleTokenIsUnigramBackoff) {
  const auto lm = tiny_lm();
  EXPECT_NEAR(avg_token_loglik("cat", lm), std::log(2.0 / 20.0), 1e-12);
}

TEST(NaturalnessScore, RepetitionDragsScoreBelowCleanFixture) {
  const auto lm = tiny_lm();
  std::string repeated;
  for (int i = 0; i < 50; ++i) repeated += "cat ";
  const double rep_score = naturalness_score(repeated, lm);
  const double clean_score = naturalness_score("the cat sat on the mat", lm);

  // Published-formula oracle for both fixtures.
  auto oracle = [&](const std::string& text) {
    const auto toks = tokenize(text);
    std::set<std::pair<std::string, std::string>> distinct;
    for (size_t i = 0; i + 1 < toks.size(); ++i) distinct.emplace(toks[i], toks[i + 1]);
    const double m = static_cast<double>(toks.size() - 1);
    const double rep_frac = toks.size() < 2 ? 0.0 : (m - distinct.size()) / m;
    return 0.6 * std::exp(lm.avg_loglik(text)) + 0.3 * (1.0 - rep_frac) + 0.1 * 1.0;
  };
  EXPECT_NEAR(rep_score, oracle(repeated), 1e-12);
  EXPECT_NEAR(clean_score, oracle("the cat sat on the mat"), 1e-12);
  EXPECT_LT(rep_score, clean_score);
}

TEST(NaturalnessScore, UnkSubstitutionNeverHelps) {
  const auto lm = tiny_lm();
  EXPECT_GE(naturalness_score("the cat sat on the mat", lm),
            naturalness_score("the qqq sat on zzz mat", lm));
}

TEST(NaturalnessScore, BoundedInUnitInterval) {
  const auto lm = tiny_lm();
  for (const char* text :
       {"the cat", "zzz zzz zzz zzz zzz", "one. two three. four five six!", "cat"}) {
    const double s = naturalness_score(text, lm);
    EXPECT_GE(s, 0.0) << text;
    EXPECT_LE(s, 1.0) << text;
  }
}

TEST(NaturalnessScore, DeterministicAcrossCalls) {
  const auto lm = tiny_lm();
  const std::string text = "the dog sat on the rug. the cat sat on the mat.";
  EXPECT_EQ(naturalness_score(text, lm), naturalness_score(text, lm));
}

TEST(SpamicityScore, DominanceFixture) {
  EXPECT_NEAR(spamicity_score("buy buy buy now"), 0.75, 1e-12);
}

TEST(SpamicityScore, AllDistinctTokensScoreOneOverN) {
  EXPECT_NEAR(spamicity_score("alpha bravo charlie delta"), 0.25, 1e-12);
}

TEST(SpamicityScore, AllStopwordsScoreZero) {
  EXPECT_EQ(spamicity_score("the and of a to"), 0.0);
}

TEST(SpamicityScore, DuplicationInvariant) {
  const std::string text = "buy cheap pills buy cheap now";
  EXPECT_DOUBLE_EQ(spamicity_score(text), spamicity_score(text + " " + text));
}

TEST(SpamicityScore, EmptyTextRejected) {
  EXPECT_THROW(spamicity_score(""), PreconditionError);
}

TEST(NgramLm, SaveLoadRoundTrip) {
  const auto lm = tiny_lm();
  const auto path = std::filesystem::temp_directory_path() / "ragred_lm_test.json";
  lm.save(path);
  const auto loaded = NgramLanguageModel::load(path);
  for (const char* text : {"the cat sat on the mat", "zzz", "dog rug"}) {
    EXPECT_NEAR(loaded.avg_loglik(text), lm.avg_loglik(text), 1e-12);
  }
  EXPECT_EQ(loaded.vocab_size(), lm.vocab_size());
}

}  // namespace
}  // namespace ragred
