#pragma once

#include <array>
#include <map>
#include <string>

#include "crossalign/data.hpp"
#include "crossalign/nn.hpp"

namespace crossalign::eval {

// Corpus-level BLEU-4. Clipped n-gram precisions pooled over the corpus,
// geometric mean over n = 1..4, multiplied by the brevity penalty, scaled to
// [0, 100]. Smoothing: a zero-numerator precision for n >= 2 becomes
// (num + 1) / (den + 1); n levels with zero denominator are excluded from
// the mean; zero unigram overlap scores 0.
struct BleuReport {
    double bleu = 0.0;
    std::array<double, 4> precisions{};   // values entering the mean (0 when excluded)
    double brevity = 1.0;
    long cand_len = 0;
    long ref_len = 0;
};

BleuReport bleu(const data::Sentences& candidates, const data::Sentences& references);

// BLEU of the raw source against the references (the do-nothing transfer).
double copy_baseline(const data::Sentences& source, const data::Sentences& references);

// Surface-form mapping from x2's vocabulary into x1's. Shared tokens map to
// themselves; the remaining tokens on each side are ranked by corpus count
// (descending, ties broken lexicographically) and matched by rank. When the
// residual vocabularies differ in size, the extra x2 tokens map to <unk> and
// a warning is printed.
struct TokenMapping {
    std::map<std::string, std::string> map;

    const std::string& apply(const std::string& tok) const;
};

TokenMapping frequency_match(const data::Sentences& x1, const data::Sentences& x2);
data::Sentences apply_mapping(const data::Sentences& s, const TokenMapping& m);

// Binary style scorer: its own vocabulary and embedding, a sentence CNN, a
// single logit. predict() returns 1 or 2. Sentences shorter than the widest
// filter are padded.
struct StyleClassifier {
    data::Vocabulary vocab;
    nn::Embedding emb;
    nn::TextCnn cnn;

    int predict(const data::Sentence& s) const;
    double accuracy(const data::Sentences& sents, int label) const;
};

struct ClassifierConfig {
    int d_emb = 32;
    int n_filters = 32;
    double lr = 1e-3;
    int batch_size = 32;
    int epochs = 4;
    std::uint64_t seed = 7;
    int min_count = 1;
};

// Supervised training on labeled sentences (style 1 vs style 2).
StyleClassifier train_style_classifier(const data::Sentences& style1,
                                       const data::Sentences& style2,
                                       const ClassifierConfig& cfg = {});

// Fraction of transferred sentences the frozen classifier assigns to
// target_label.
double classifier_accuracy(const data::Sentences& transferred, const StyleClassifier& clf,
                           int target_label);

}  // namespace crossalign::eval
