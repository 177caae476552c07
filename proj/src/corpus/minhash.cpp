#include "gaprouter/corpus/minhash.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <unordered_map>

#include "gaprouter/common/error.hpp"
#include "gaprouter/common/hashing.hpp"
#include "gaprouter/common/random.hpp"

namespace gaprouter::corpus {
namespace {

constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;
constexpr std::size_t kCharShingleWidth = 4;

std::uint64_t mod_mersenne61(unsigned __int128 x) {
  auto lo = static_cast<std::uint64_t>(x & kMersenne61);
  auto hi = static_cast<std::uint64_t>(x >> 61);
  std::uint64_t r = lo + hi;
  while (r >= kMersenne61) r -= kMersenne61;
  return r;
}

struct Permutation {
  std::uint64_t a;
  std::uint64_t b;
};

std::vector<Permutation> permutations(std::size_t count, std::uint64_t seed) {
  std::vector<Permutation> perms(count);
  std::uint64_t state = splitmix64(seed ^ 0x6d696e68617368ULL);
  for (auto& p : perms) {
    state = splitmix64(state);
    p.a = 1 + state % (kMersenne61 - 1);
    state = splitmix64(state);
    p.b = state % kMersenne61;
  }
  return perms;
}

}  // namespace

std::vector<std::string> normalized_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else if (c < 0x80 && std::ispunct(c)) {
      continue;
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<std::uint64_t> shingle_hashes(std::string_view text, std::size_t shingle_size,
                                          bool* used_char_shingles) {
  if (shingle_size == 0) throw Error("shingle_size must be >= 1");
  const auto words = normalized_words(text);
  std::vector<std::uint64_t> hashes;
  bool chars = false;
  if (words.size() >= shingle_size) {
    for (std::size_t i = 0; i + shingle_size <= words.size(); ++i) {
      std::uint64_t h = 0xcbf29ce484222325ULL;
      for (std::size_t k = 0; k < shingle_size; ++k) {
        if (k) h = fnv1a64(" ", h);
        h = fnv1a64(words[i + k], h);
      }
      hashes.push_back(h);
    }
  } else {
    chars = true;
    std::string joined;
    for (const auto& w : words) {
      if (!joined.empty()) joined.push_back(' ');
      joined += w;
    }
    if (joined.empty()) joined = std::string(text);
    if (joined.size() <= kCharShingleWidth) {
      hashes.push_back(fnv1a64(joined));
    } else {
      for (std::size_t i = 0; i + kCharShingleWidth <= joined.size(); ++i) {
        hashes.push_back(fnv1a64(std::string_view(joined).substr(i, kCharShingleWidth)));
      }
    }
  }
  std::sort(hashes.begin(), hashes.end());
  hashes.erase(std::unique(hashes.begin(), hashes.end()), hashes.end());
  if (used_char_shingles) *used_char_shingles = chars;
  return hashes;
}

std::vector<std::uint64_t> minhash_of_set(const std::vector<std::uint64_t>& shingles,
                                          std::size_t num_perms, std::uint64_t seed) {
  const auto perms = permutations(num_perms, seed);
  std::vector<std::uint64_t> minima(num_perms, std::numeric_limits<std::uint64_t>::max());
  for (std::uint64_t s : shingles) {
    const std::uint64_t x = s % kMersenne61;
    for (std::size_t k = 0; k < num_perms; ++k) {
      const auto h = mod_mersenne61(static_cast<unsigned __int128>(perms[k].a) * x + perms[k].b);
      minima[k] = std::min(minima[k], h);
    }
  }
  return minima;
}

MinHashSignature minhash_signature(std::string_view text, const MinHashParams& params) {
  if (params.num_perms < 16) throw Error("num_perms must be >= 16");
  if (params.shingle_size < 1) throw Error("shingle_size must be >= 1");
  if (text.empty()) throw Error("cannot sign empty text");
  MinHashSignature sig;
  sig.num_perms = params.num_perms;
  sig.shingle_size = params.shingle_size;
  const auto shingles = shingle_hashes(text, params.shingle_size, &sig.char_shingles);
  sig.values = minhash_of_set(shingles, params.num_perms, params.seed);
  return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.values.size() != b.values.size() || a.values.empty()) {
    throw Error("signatures have different lengths");
  }
  std::size_t same = 0;
  for (std::size_t k = 0; k < a.values.size(); ++k) same += a.values[k] == b.values[k];
  return static_cast<double>(same) / static_cast<double>(a.values.size());
}

DedupResult dedup(const std::vector<PromptRecord>& records, const DedupParams& params) {
  if (!(params.jaccard_threshold > 0.0 && params.jaccard_threshold <= 1.0)) {
    throw Error("jaccard_threshold must be in (0, 1]");
  }
  if (params.bands == 0 || params.rows == 0 ||
      params.bands * params.rows > params.minhash.num_perms) {
    throw Error("LSH bands x rows must be positive and fit within num_perms");
  }

  std::vector<MinHashSignature> sigs;
  sigs.reserve(records.size());
  for (const auto& r : records) sigs.push_back(minhash_signature(r.text, params.minhash));

  // One bucket table per band; values index into `records`.
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::size_t>>> buckets(params.bands);
  auto band_key = [&](const MinHashSignature& sig, std::size_t band) {
    std::uint64_t h = 0x9ae16a3b2f90404fULL;
    for (std::size_t r = 0; r < params.rows; ++r) {
      h = splitmix64(h ^ sig.values[band * params.rows + r]);
    }
    return h;
  };

  DedupResult result;
  std::vector<std::uint64_t> keys(params.bands);
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::size_t duplicate_of = records.size();
    for (std::size_t band = 0; band < params.bands; ++band) {
      keys[band] = band_key(sigs[i], band);
      const auto it = buckets[band].find(keys[band]);
      if (it == buckets[band].end()) continue;
      for (std::size_t candidate : it->second) {
        if (candidate < duplicate_of &&
            estimate_jaccard(sigs[i], sigs[candidate]) >= params.jaccard_threshold) {
          duplicate_of = candidate;
        }
      }
    }
    if (duplicate_of < records.size()) {
      result.removed.emplace_back(records[i].id, records[duplicate_of].id);
      continue;
    }
    result.kept.push_back(records[i]);
    for (std::size_t band = 0; band < params.bands; ++band) buckets[band][keys[band]].push_back(i);
  }
  return result;
}

void shuffle(std::vector<PromptRecord>& records, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(records);
}

}  // namespace gaprouter::corpus
