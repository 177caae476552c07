#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gaprouter/corpus/prompt_record.hpp"

namespace gaprouter::corpus {

struct MinHashParams {
  std::size_t num_perms = 128;
  std::size_t shingle_size = 3;
  std::uint64_t seed = 1;
};

struct MinHashSignature {
  std::vector<std::uint64_t> values;
  std::size_t num_perms = 0;
  std::size_t shingle_size = 0;
  /// Set when the text had fewer words than shingle_size and character
  /// 4-grams were used instead.
  bool char_shingles = false;
};

/// Lower-cased words with ASCII punctuation removed.
std::vector<std::string> normalized_words(std::string_view text);

/// Distinct 64-bit hashes of the text's shingles. Word n-grams of width
/// `shingle_size`; if the text has fewer words, character 4-grams.
std::vector<std::uint64_t> shingle_hashes(std::string_view text, std::size_t shingle_size,
                                          bool* used_char_shingles = nullptr);

MinHashSignature minhash_signature(std::string_view text, const MinHashParams& params = {});

/// Minima of the seeded permutation family over an explicit shingle-hash set.
std::vector<std::uint64_t> minhash_of_set(const std::vector<std::uint64_t>& shingles,
                                          std::size_t num_perms, std::uint64_t seed);

/// Fraction of matching minima.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

struct DedupParams {
  MinHashParams minhash;
  std::size_t bands = 32;
  std::size_t rows = 4;
  double jaccard_threshold = 0.8;
};

struct DedupResult {
  std::vector<PromptRecord> kept;
  /// (removed id, id of the kept record it duplicates)
  std::vector<std::pair<std::string, std::string>> removed;
};

/// LSH-banded near-duplicate removal. Records are visited in input order; a
/// record is removed when an earlier kept record shares a band bucket and its
/// estimated Jaccard reaches the threshold.
DedupResult dedup(const std::vector<PromptRecord>& records, const DedupParams& params = {});

void shuffle(std::vector<PromptRecord>& records, std::uint64_t seed);

}  // namespace gaprouter::corpus
