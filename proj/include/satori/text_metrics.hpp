#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace satori::text {

using TokenSeq = std::vector<std::string>;

// Lowercases ASCII letters, splits ASCII punctuation into standalone tokens
// and splits on unicode whitespace. Total: never fails, "" -> {}.
TokenSeq tokenize(std::string_view text);

// Sentence-level BLEU-4 with add-one smoothing on the numerator and
// denominator of every modified n-gram precision, times the standard
// brevity penalty exp(min(0, 1 - |ref|/|cand|)). 0 for an empty candidate.
double bleu4_smoothed(const TokenSeq& candidate, const TokenSeq& reference);

// ROUGE-L F1 (beta = 1) from the longest common subsequence.
// 0 when either side is empty or the LCS is empty.
double rouge_l_f1(const TokenSeq& candidate, const TokenSeq& reference);

// (bleu4_smoothed + rouge_l_f1) / 2 over tokenized inputs.
double caption_reward(std::string_view candidate, std::string_view reference);

}  // namespace satori::text
