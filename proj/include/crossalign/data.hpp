#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "crossalign/rng.hpp"

namespace crossalign::data {

using Sentence = std::vector<std::string>;
using Sentences = std::vector<Sentence>;

// Special token ids are fixed project-wide.
inline constexpr int kPad = 0;
inline constexpr int kGo = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr const char* kPadTok = "<pad>";
inline constexpr const char* kGoTok = "<go>";
inline constexpr const char* kEosTok = "<eos>";
inline constexpr const char* kUnkTok = "<unk>";

inline constexpr int kMaxLen = 15;   // default sentence length cap, in words

// Token <-> id map. Ids 0-3 are the specials; content tokens follow, ordered
// by descending count and then lexicographically, so construction is
// deterministic for a given corpus.
struct Vocabulary {
    std::vector<std::string> tokens;            // index == id
    std::unordered_map<std::string, int> ids;
    int min_count = 1;

    int size() const { return static_cast<int>(tokens.size()); }
    int id(const std::string& tok) const;       // kUnk when absent
    const std::string& token(int id) const;     // IndexError when out of range

    std::vector<int> encode(const Sentence& s) const;    // content ids, no specials
    Sentence decode(const std::vector<int>& ids) const;  // specials dropped

    // FNV-1a over the token list; checkpoint compatibility check.
    std::uint64_t content_hash() const;

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
};

// Encoded corpus: content-token id lists (no specials) plus a style tag.
struct Corpus {
    std::vector<std::vector<int>> sentences;
    int style = 1;
};

// Padded id matrix for one mini-batch. Each row is the sentence's content ids
// followed by <eos> and then <pad> up to max_len; lengths include the <eos>.
struct SentenceBatch {
    std::vector<int> ids;        // row-major [batch x max_len]
    std::vector<int> lengths;
    int batch = 0;
    int max_len = 0;

    int at(int row, int t) const { return ids[static_cast<size_t>(row) * max_len + t]; }
};

// Substitution key over surface tokens. Bijective on its domain; tokens
// outside the mapped subset are implicitly identity.
struct CipherKey {
    std::map<std::string, std::string> mapping;

    const std::string& apply(const std::string& tok) const;
    CipherKey inverse() const;

    void save(const std::string& path) const;
    static CipherKey load(const std::string& path);
};

// -- corpus construction ------------------------------------------------

// Count tokens across both corpora and keep those with count >= min_count.
Vocabulary build_vocab(const Sentences& a, const Sentences& b, int min_count = 1);

// One sentence per line, whitespace tokenized, CRLF tolerated. Sentences
// longer than max_len words or empty are dropped.
Sentences read_sentences(const std::string& path, int max_len = kMaxLen);
void write_sentences(const std::string& path, const Sentences& s);

// Encode raw sentences against a vocabulary (unknown tokens -> <unk>).
Corpus encode_corpus(const Sentences& s, const Vocabulary& v, int style);

Sentences decode_corpus(const Corpus& c, const Vocabulary& v);

// Uniformly choose ceil(rate * content_vocab) tokens and map them onto fresh
// cipher surface forms ("c000", "c001", ... assigned in shuffled order).
// Specials are never selected. rate in [0, 1].
CipherKey gen_cipher_key(const Vocabulary& v, double rate, std::uint64_t seed);

Sentences apply_cipher(const Sentences& s, const CipherKey& key);

// Independent uniform permutation of each sentence's tokens.
Sentences shuffle_words(const Sentences& s, std::uint64_t seed);

// Random bigram language: transition matrix with Dirichlet(concentration)
// rows, resampled until the stationary distribution has all-distinct entries.
// Sentences are Markov chains started from the stationary distribution with
// lengths uniform in [min(4, max_len), max_len].
struct BigramModel {
    int n_vocab = 0;
    std::vector<double> transition;   // row-major [n x n], rows sum to 1
    std::vector<double> initial;      // stationary distribution of `transition`

    double at(int i, int j) const { return transition[static_cast<size_t>(i) * n_vocab + j]; }
};

BigramModel make_bigram_model(int n_vocab, std::uint64_t seed, double concentration = 0.3);
Sentences sample_bigram_corpus(const BigramModel& m, int n_sentences, int max_len, Rng& rng,
                               const std::string& token_prefix = "w");
// Convenience wrapper: model + corpus in one call.
std::pair<Sentences, BigramModel> synth_bigram_corpus(int n_vocab, int n_sentences, int max_len,
                                                      std::uint64_t seed);

// Uniform sample with replacement of k sentences; every sentence gets <eos>
// appended and rows are padded to the longest sampled sentence.
SentenceBatch sample_batch(const Corpus& c, int k, Rng& rng);
SentenceBatch make_batch(const std::vector<std::vector<int>>& sentences);

// -- review-file preprocessing (document-level ratings) ------------------
// Input lines: "<rating><TAB><review text>". Reviews with more than
// max_review_sentences sentences (split on '.') are dropped; rating > 3 is
// positive, < 3 negative, == 3 dropped. Sentences then pass the usual
// length filter.
struct LabeledSentences {
    Sentences positive;
    Sentences negative;
};
LabeledSentences load_reviews(const std::string& path, int max_review_sentences = 10,
                              int max_len = kMaxLen);

}  // namespace crossalign::data
