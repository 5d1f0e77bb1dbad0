#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "storyline/corpus.hpp"
#include "storyline/errors.hpp"

namespace storyline {

using StopWords = std::set<std::string>;

/// Common English function words. Applied before scoring by the CLI.
inline const StopWords& default_stopwords() {
  static const StopWords words = {
      "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
      "are", "aren't", "as", "at", "be", "because", "been", "before", "being", "below", "between",
      "both", "but", "by", "can", "can't", "cannot", "could", "couldn't", "did", "didn't", "do",
      "does", "doesn't", "doing", "don't", "down", "during", "each", "few", "for", "from",
      "further", "get", "gets", "go", "going", "gonna", "got", "had", "hadn't", "has", "hasn't",
      "have", "haven't", "having", "he", "her", "here", "hers", "herself", "him", "himself",
      "his", "how", "i", "if", "in", "into", "is", "isn't", "it", "it's", "its", "itself", "just",
      "know", "let", "let's", "like", "me", "more", "most", "my", "myself", "no", "nor", "not",
      "now", "of", "off", "oh", "ok", "okay", "on", "once", "only", "or", "other", "ought", "our",
      "ours", "ourselves", "out", "over", "own", "really", "right", "same", "she", "should",
      "shouldn't", "so", "some", "such", "than", "that", "that's", "the", "their", "theirs",
      "them", "themselves", "then", "there", "there's", "these", "they", "this", "those",
      "through", "to", "too", "um", "under", "until", "up", "uh", "very", "want", "was", "wasn't",
      "we", "well", "were", "weren't", "what", "when", "where", "which", "while", "who", "whom",
      "why", "will", "with", "won't", "would", "yeah", "you", "your", "yours", "yourself",
      "yourselves"};
  return words;
}

/// One word per line; blank lines and lines starting with '#' are ignored.
inline StopWords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open stop-word file " + path.string());
  StopWords out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.insert(line);
  }
  return out;
}

struct TfidfStats {
  std::string word;
  long freq_in_document = 0;
  long collections_containing = 1;
  long total_collections = 1;
  double score = 0.0;
};

/// f * log(1 + N / n_w). `log_base` only rescales scores; the default is the
/// natural logarithm.
inline double tfidf_score(long freq, long total_collections, long collections_containing,
                          double log_base = std::numbers::e) {
  if (collections_containing <= 0)
    throw DomainError("tfidf_score: collections_containing must be positive");
  if (total_collections < 1 || collections_containing > total_collections || freq < 0)
    throw DomainError("tfidf_score: require freq >= 0 and 1 <= n_w <= N");
  const double idf = std::log1p(static_cast<double>(total_collections) /
                                static_cast<double>(collections_containing));
  return static_cast<double>(freq) * idf / std::log(log_base);
}

/// Scores every non-stop word of the target corpus's subtitle document against
/// all corpora. Sorted by descending score, ties lexicographic.
inline std::vector<TfidfStats> tfidf_table(const std::vector<Corpus>& corpora, std::size_t target,
                                           const StopWords& stopwords = {},
                                           double log_base = std::numbers::e) {
  if (corpora.empty()) throw ValidationError("tf-idf needs at least one corpus");
  if (target >= corpora.size()) throw ValidationError("target corpus index out of range");

  std::vector<std::set<std::string>> present(corpora.size());
  for (std::size_t c = 0; c < corpora.size(); ++c)
    for (const auto& seq : corpora[c].sequences)
      for (const auto& f : seq.frames)
        present[c].insert(f.subtitle_tokens.begin(), f.subtitle_tokens.end());

  std::map<std::string, long> freq;
  for (const auto& seq : corpora[target].sequences)
    for (const auto& f : seq.frames)
      for (const auto& tok : f.subtitle_tokens)
        if (!stopwords.contains(tok)) ++freq[tok];

  const long n = static_cast<long>(corpora.size());
  std::vector<TfidfStats> table;
  table.reserve(freq.size());
  for (const auto& [word, f] : freq) {
    long containing = 0;
    for (const auto& p : present) containing += p.contains(word) ? 1 : 0;
    table.push_back({word, f, containing, n, tfidf_score(f, n, containing, log_base)});
  }
  std::stable_sort(table.begin(), table.end(), [](const TfidfStats& a, const TfidfStats& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.word < b.word;
  });
  return table;
}

/// Top-k salient subtitle words of corpora[target] as language atoms, ids
/// 0..k-1 in descending score order.
inline std::vector<Atom> select_language_atoms(const std::vector<Corpus>& corpora, std::size_t target,
                                               std::size_t k, const StopWords& stopwords = {},
                                               double log_base = std::numbers::e) {
  if (k < 1) throw ValidationError("k must be at least 1");
  const auto table = tfidf_table(corpora, target, stopwords, log_base);
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < std::min(k, table.size()); ++i)
    atoms.push_back({static_cast<int>(i), Modality::language, table[i].word});
  return atoms;
}

}  // namespace storyline
