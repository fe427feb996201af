#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "satori/rng.hpp"
#include "satori/text_metrics.hpp"

using namespace satori;
using text::TokenSeq;

namespace {

// expected values frozen from the reference implementation before the
// library was written
constexpr double kExpM1 = 0.36787944117144233;  // exp(-1)
constexpr double kCatSatCaption = 0.5172730539190544;

TokenSeq random_tokens(Rng& rng, std::size_t max_len) {
  static const std::vector<std::string> vocab{"a",   "the", "cat", "dog", "red",
                                              "mat", "sat", "on",  "ran", "big"};
  TokenSeq toks;
  const std::size_t len = rng.below(max_len + 1);
  for (std::size_t i = 0; i < len; ++i) {
    toks.push_back(vocab[rng.below(vocab.size())]);
  }
  return toks;
}

}  // namespace

TEST_CASE("tokenize lowercases, isolates punctuation, splits on whitespace") {
  CHECK(text::tokenize("A red Cat.") == TokenSeq{"a", "red", "cat", "."});
  CHECK(text::tokenize("") == TokenSeq{});
  CHECK(text::tokenize("x,y z") == TokenSeq{"x", ",", "y", "z"});
  CHECK(text::tokenize("  spaced\tout\nwords  ") == TokenSeq{"spaced", "out", "words"});
  // unicode whitespace (NBSP) splits too
  CHECK(text::tokenize("a\xc2\xa0" "b") == TokenSeq{"a", "b"});
  for (const auto& tok : text::tokenize("Hello, World!!")) {
    CHECK(!tok.empty());
    for (char c : tok) CHECK(!std::isspace(static_cast<unsigned char>(c)));
  }
}

TEST_CASE("bleu4_smoothed known values") {
  const TokenSeq six{"a", "red", "cat", "on", "a", "mat"};
  const double identical = text::bleu4_smoothed(six, six);
  CHECK(identical > 0.99);
  CHECK(identical <= 1.0);
  CHECK(identical == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(text::bleu4_smoothed({}, six) == 0.0);

  const TokenSeq prefix{"a", "red", "cat"};
  CHECK(text::bleu4_smoothed(prefix, six) == doctest::Approx(kExpM1).epsilon(1e-12));
  CHECK(text::bleu4_smoothed(prefix, six) ==
        doctest::Approx(oracle::ref_bleu4(prefix, six)).epsilon(1e-12));
}

TEST_CASE("rouge_l_f1 known values") {
  const TokenSeq a{"the", "cat", "sat"};
  const TokenSeq b{"the", "cat", "sat", "on", "the", "mat"};
  CHECK(text::rouge_l_f1(a, a) == doctest::Approx(1.0));
  CHECK(text::rouge_l_f1({"x", "y"}, {"p", "q"}) == 0.0);
  CHECK(text::rouge_l_f1(a, b) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(text::rouge_l_f1({}, b) == 0.0);
  CHECK(text::rouge_l_f1(a, {}) == 0.0);
}

TEST_CASE("caption_reward composes the two metrics") {
  CHECK(text::caption_reward("a red cat", "a red cat") == doctest::Approx(1.0));
  CHECK(text::caption_reward("", "anything") == 0.0);
  CHECK(text::caption_reward("the cat sat", "the cat sat on the mat") ==
        doctest::Approx(kCatSatCaption).epsilon(1e-12));
}

TEST_CASE("text metrics match the reference implementations") {
  Rng rng(0x7e57);
  for (int iter = 0; iter < 200; ++iter) {
    const TokenSeq cand = random_tokens(rng, 12);
    const TokenSeq ref = random_tokens(rng, 12);
    CHECK(text::bleu4_smoothed(cand, ref) ==
          doctest::Approx(oracle::ref_bleu4(cand, ref)).epsilon(1e-12));
    CHECK(text::rouge_l_f1(cand, ref) ==
          doctest::Approx(oracle::ref_rouge_l(cand, ref)).epsilon(1e-12));
  }
}

TEST_CASE("scores stay in [0,1] and rouge is symmetric") {
  Rng rng(0xbead);
  for (int iter = 0; iter < 500; ++iter) {
    const TokenSeq cand = random_tokens(rng, 10);
    const TokenSeq ref = random_tokens(rng, 10);
    const double bleu = text::bleu4_smoothed(cand, ref);
    const double rouge = text::rouge_l_f1(cand, ref);
    CHECK(bleu >= 0.0);
    CHECK(bleu <= 1.0);
    CHECK(rouge >= 0.0);
    CHECK(rouge <= 1.0);
    CHECK(rouge == doctest::Approx(text::rouge_l_f1(ref, cand)).epsilon(1e-12));
  }
}

TEST_CASE("caption_reward of a string with itself is at least 0.5") {
  Rng rng(0xc0de);
  for (int iter = 0; iter < 100; ++iter) {
    TokenSeq toks = random_tokens(rng, 8);
    if (toks.empty()) toks.push_back("cat");
    std::string joined;
    for (const auto& t : toks) joined += (joined.empty() ? "" : " ") + t;
    CHECK(text::caption_reward(joined, joined) >= 0.5);
  }
}

TEST_CASE("appending a matching token never decreases the rouge recall term") {
  Rng rng(0xfeed);
  for (int iter = 0; iter < 200; ++iter) {
    TokenSeq cand = random_tokens(rng, 8);
    TokenSeq ref = random_tokens(rng, 8);
    if (ref.empty()) ref.push_back("on");
    const double recall_before =
        static_cast<double>(oracle::ref_lcs(cand, ref)) / static_cast<double>(ref.size());
    cand.push_back(ref[rng.below(ref.size())]);  // a token that appears in ref
    const double recall_after =
        static_cast<double>(oracle::ref_lcs(cand, ref)) / static_cast<double>(ref.size());
    CHECK(recall_after >= recall_before - 1e-15);
  }
}
