#include "satori/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace satori::text {

namespace {

// Decodes one UTF-8 codepoint starting at i; advances i. Invalid bytes are
// passed through as single-byte codepoints so the function stays total.
std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  std::uint32_t cp = b0;
  if (b0 >= 0xf0) {
    len = 4;
    cp = b0 & 0x07u;
  } else if (b0 >= 0xe0) {
    len = 3;
    cp = b0 & 0x0fu;
  } else if (b0 >= 0xc0) {
    len = 2;
    cp = b0 & 0x1fu;
  }
  if (len == 1 || i + len > s.size()) {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xc0u) != 0x80u) {  // truncated sequence, emit lead byte as-is
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3fu);
  }
  i += len;
  return cp;
}

bool is_space_cp(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d: case 0x20:
    case 0x85: case 0xa0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202f: case 0x205f: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200a;
  }
}

bool is_punct_cp(std::uint32_t cp) {
  if (cp >= 128) return false;
  const char c = static_cast<char>(cp);
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

void append_cp(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

}  // namespace

TokenSeq tokenize(std::string_view input) {
  TokenSeq tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  std::size_t i = 0;
  while (i < input.size()) {
    std::uint32_t cp = decode_utf8(input, i);
    if (is_space_cp(cp)) {
      flush();
    } else if (is_punct_cp(cp)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(cp));
    } else {
      if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
      append_cp(current, cp);
    }
  }
  flush();
  return tokens;
}

namespace {

// n-gram multiset keyed by tokens joined with a separator byte that cannot
// appear inside a token
std::unordered_map<std::string, int> ngram_counts(const TokenSeq& toks, std::size_t n) {
  std::unordered_map<std::string, int> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      key += toks[i + k];
      key.push_back('\x1f');
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

double bleu4_smoothed(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    long matched = 0;
    long total = 0;
    for (const auto& [gram, c] : cand) {
      const auto it = ref.find(gram);
      matched += std::min<long>(c, it == ref.end() ? 0 : it->second);
      total += c;
    }
    log_sum += std::log((static_cast<double>(matched) + 1.0) /
                        (static_cast<double>(total) + 1.0));
  }
  const double ratio = static_cast<double>(reference.size()) /
                       static_cast<double>(candidate.size());
  const double brevity = std::exp(std::min(0.0, 1.0 - ratio));
  return brevity * std::exp(log_sum / 4.0);
}

double rouge_l_f1(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const std::size_t n = candidate.size();
  const std::size_t m = reference.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1]
                   ? prev[j - 1] + 1
                   : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[m];
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(n);
  const double recall = lcs / static_cast<double>(m);
  return 2.0 * precision * recall / (precision + recall);
}

double caption_reward(std::string_view candidate, std::string_view reference) {
  const TokenSeq cand = tokenize(candidate);
  const TokenSeq ref = tokenize(reference);
  return 0.5 * (bleu4_smoothed(cand, ref) + rouge_l_f1(cand, ref));
}

}  // namespace satori::text
