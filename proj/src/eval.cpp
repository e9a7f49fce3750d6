#include "crossalign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "crossalign/errors.hpp"
#include "crossalign/training.hpp"

namespace crossalign::eval {

namespace {
constexpr int kMaxOrder = 4;

// flattened n-gram key; tokens joined with '\x1f' never collide with spaces
std::string ngram_key(const data::Sentence& s, size_t start, int n) {
    std::string k;
    for (int j = 0; j < n; ++j) {
        if (j) k += '\x1f';
        k += s[start + static_cast<size_t>(j)];
    }
    return k;
}
}  // namespace

BleuReport bleu(const data::Sentences& candidates, const data::Sentences& references) {
    if (candidates.size() != references.size())
        throw ContractError("bleu: candidate/reference counts differ");
    if (candidates.empty()) throw ContractError("bleu: empty corpus");

    long num[kMaxOrder + 1] = {0}, den[kMaxOrder + 1] = {0};
    BleuReport rep;
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto& r = references[i];
        rep.cand_len += static_cast<long>(c.size());
        rep.ref_len += static_cast<long>(r.size());
        for (int n = 1; n <= kMaxOrder; ++n) {
            if (static_cast<int>(c.size()) < n) continue;
            std::map<std::string, long> cc, rc;
            for (size_t t = 0; t + static_cast<size_t>(n) <= c.size(); ++t) ++cc[ngram_key(c, t, n)];
            for (size_t t = 0; t + static_cast<size_t>(n) <= r.size(); ++t) ++rc[ngram_key(r, t, n)];
            for (const auto& [k, v] : cc) {
                den[n] += v;
                auto it = rc.find(k);
                if (it != rc.end()) num[n] += std::min(v, it->second);
            }
        }
    }

    double log_sum = 0.0;
    int levels = 0;
    for (int n = 1; n <= kMaxOrder; ++n) {
        if (den[n] == 0) continue;   // no n-grams at this order anywhere
        double p;
        if (num[n] == 0) {
            if (n == 1) return rep;   // zero unigram overlap -> 0
            p = (num[n] + 1.0) / (den[n] + 1.0);
        } else {
            p = static_cast<double>(num[n]) / den[n];
        }
        rep.precisions[static_cast<size_t>(n - 1)] = p;
        log_sum += std::log(p);
        ++levels;
    }
    if (levels == 0 || rep.cand_len == 0) return rep;
    rep.brevity = rep.cand_len >= rep.ref_len
                      ? 1.0
                      : std::exp(1.0 - static_cast<double>(rep.ref_len) / rep.cand_len);
    rep.bleu = 100.0 * rep.brevity * std::exp(log_sum / levels);
    return rep;
}

double copy_baseline(const data::Sentences& source, const data::Sentences& references) {
    return bleu(source, references).bleu;
}

const std::string& TokenMapping::apply(const std::string& tok) const {
    auto it = map.find(tok);
    return it == map.end() ? tok : it->second;
}

TokenMapping frequency_match(const data::Sentences& x1, const data::Sentences& x2) {
    std::map<std::string, long> c1, c2;
    for (const auto& s : x1)
        for (const auto& t : s) ++c1[t];
    for (const auto& s : x2)
        for (const auto& t : s) ++c2[t];

    TokenMapping out;
    auto residual = [](const std::map<std::string, long>& own,
                       const std::map<std::string, long>& other) {
        std::vector<std::pair<std::string, long>> r;
        for (const auto& kv : own)
            if (!other.count(kv.first)) r.push_back(kv);
        std::stable_sort(r.begin(), r.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        return r;
    };
    for (const auto& kv : c2)
        if (c1.count(kv.first)) out.map[kv.first] = kv.first;   // shared surface forms

    auto r1 = residual(c1, c2);
    auto r2 = residual(c2, c1);
    const size_t n = std::min(r1.size(), r2.size());
    for (size_t i = 0; i < n; ++i) out.map[r2[i].first] = r1[i].first;
    if (r2.size() > n) {
        std::fprintf(stderr,
                     "frequency_match: %zu source tokens have no counterpart; mapping to %s\n",
                     r2.size() - n, data::kUnkTok);
        for (size_t i = n; i < r2.size(); ++i) out.map[r2[i].first] = data::kUnkTok;
    }
    return out;
}

data::Sentences apply_mapping(const data::Sentences& s, const TokenMapping& m) {
    data::Sentences out;
    out.reserve(s.size());
    for (const auto& sent : s) {
        data::Sentence ns;
        ns.reserve(sent.size());
        for (const auto& tok : sent) ns.push_back(m.apply(tok));
        out.push_back(std::move(ns));
    }
    return out;
}

namespace {

// ids padded so the CNN always has at least its widest window
std::vector<int> classifier_ids(const data::Vocabulary& v, const data::Sentence& s, int min_len) {
    std::vector<int> ids = v.encode(s);
    while (static_cast<int>(ids.size()) < min_len) ids.push_back(data::kPad);
    return ids;
}

}  // namespace

int StyleClassifier::predict(const data::Sentence& s) const {
    if (s.empty()) throw ContractError("StyleClassifier::predict: empty sentence");
    const int wmax = *std::max_element(cnn.widths.begin(), cnn.widths.end());
    auto ids = classifier_ids(vocab, s, wmax);
    ad::Graph g(false);
    Rng unused(0);
    auto x = emb.lookup(g, ids);
    auto seq = g.reshape(x, {1, static_cast<int>(ids.size()), emb.dim()});
    auto logit = cnn.forward(g, seq, false, unused,
                             {std::max(static_cast<int>(s.size()), wmax)});
    return logit->values[0] > 0.0 ? 2 : 1;
}

double StyleClassifier::accuracy(const data::Sentences& sents, int label) const {
    if (sents.empty()) throw ContractError("StyleClassifier::accuracy: empty corpus");
    long hit = 0;
    for (const auto& s : sents)
        if (predict(s) == label) ++hit;
    return static_cast<double>(hit) / static_cast<double>(sents.size());
}

StyleClassifier train_style_classifier(const data::Sentences& style1,
                                       const data::Sentences& style2,
                                       const ClassifierConfig& cfg) {
    if (style1.empty() || style2.empty())
        throw ContractError("train_style_classifier: both styles need sentences");
    StyleClassifier clf;
    clf.vocab = data::build_vocab(style1, style2, cfg.min_count);
    Rng rng(cfg.seed);
    clf.emb = nn::Embedding(clf.vocab.size(), cfg.d_emb, data::kPad, rng);
    clf.cnn = nn::TextCnn(cfg.d_emb, rng, {3, 4, 5}, cfg.n_filters, 0.5);
    const int wmax = 5;

    struct Example {
        std::vector<int> ids;
        int len;
        double label;   // 0 = style 1, 1 = style 2
    };
    std::vector<Example> examples;
    for (const auto& s : style1)
        examples.push_back({classifier_ids(clf.vocab, s, wmax),
                            std::max(static_cast<int>(s.size()), wmax), 0.0});
    for (const auto& s : style2)
        examples.push_back({classifier_ids(clf.vocab, s, wmax),
                            std::max(static_cast<int>(s.size()), wmax), 1.0});

    training::Adam opt(0.9, 0.999);
    std::vector<ad::TensorPtr> params{clf.emb.table};
    for (const auto& t : clf.cnn.params()) params.push_back(t);

    const long steps =
        static_cast<long>(cfg.epochs) *
        std::max<long>(1, static_cast<long>(examples.size()) / cfg.batch_size);
    for (long step = 0; step < steps; ++step) {
        // assemble a uniform batch padded to its own max length
        std::vector<const Example*> batch;
        int maxlen = wmax;
        for (int i = 0; i < cfg.batch_size; ++i) {
            const auto* e = &examples[static_cast<size_t>(rng.uniform_int(
                static_cast<int>(examples.size())))];
            batch.push_back(e);
            maxlen = std::max(maxlen, static_cast<int>(e->ids.size()));
        }
        std::vector<int> flat;
        std::vector<int> lengths;
        for (const auto* e : batch) {
            auto ids = e->ids;
            ids.resize(static_cast<size_t>(maxlen), data::kPad);
            flat.insert(flat.end(), ids.begin(), ids.end());
            lengths.push_back(e->len);
        }
        for (const auto& t : params) t->zero_grad();
        ad::Graph g;
        auto x = clf.emb.lookup(g, flat);
        auto seq = g.reshape(x, {cfg.batch_size, maxlen, cfg.d_emb});
        auto logit = clf.cnn.forward(g, seq, true, rng, lengths);
        auto prob = g.clamp(g.sigmoid(logit), 1e-7, 1.0 - 1e-7);
        // -mean(y log p + (1-y) log(1-p)) via per-row weights
        auto lp = g.log(prob);
        auto lq = g.log(g.rsub_const(1.0, prob));
        std::vector<double> w1(batch.size()), w0(batch.size());
        for (size_t i = 0; i < batch.size(); ++i) {
            w1[i] = batch[i]->label;
            w0[i] = 1.0 - batch[i]->label;
        }
        auto loss = g.scale(g.add(g.sum(g.mask_rows(lp, w1)), g.sum(g.mask_rows(lq, w0))),
                            -1.0 / cfg.batch_size);
        g.backward(loss);
        opt.step(params, cfg.lr, 5.0);
        clf.emb.pin_pad();
    }
    return clf;
}

double classifier_accuracy(const data::Sentences& transferred, const StyleClassifier& clf,
                           int target_label) {
    if (target_label != 1 && target_label != 2)
        throw ParameterError("classifier_accuracy: target label must be 1 or 2");
    return clf.accuracy(transferred, target_label);
}

}  // namespace crossalign::eval
