#include "crossalign/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "crossalign/errors.hpp"

namespace crossalign::data {

namespace {

bool is_special(const std::string& tok) {
    return tok == kPadTok || tok == kGoTok || tok == kEosTok || tok == kUnkTok;
}

Sentence split_ws(const std::string& line) {
    Sentence out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

}  // namespace

int Vocabulary::id(const std::string& tok) const {
    auto it = ids.find(tok);
    return it == ids.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int i) const {
    if (i < 0 || i >= size()) throw IndexError("Vocabulary::token: id out of range");
    return tokens[static_cast<size_t>(i)];
}

std::vector<int> Vocabulary::encode(const Sentence& s) const {
    std::vector<int> out;
    out.reserve(s.size());
    for (const auto& tok : s) out.push_back(id(tok));
    return out;
}

Sentence Vocabulary::decode(const std::vector<int>& sentence_ids) const {
    Sentence out;
    for (int i : sentence_ids) {
        if (i == kPad || i == kGo || i == kEos) continue;
        out.push_back(token(i));
    }
    return out;
}

std::uint64_t Vocabulary::content_hash() const {
    std::uint64_t h = 1469598103934665603ull;   // FNV-1a 64
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 1099511628211ull;
    };
    for (const auto& tok : tokens) {
        for (unsigned char c : tok) mix(c);
        mix('\n');
    }
    return h;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write vocabulary: " + path);
    os << "min_count " << min_count << "\n";
    for (const auto& tok : tokens) os << tok << "\n";
    if (!os) throw IoError("failed writing vocabulary: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read vocabulary: " + path);
    Vocabulary v;
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty vocabulary file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream hdr(line);
    std::string key;
    hdr >> key >> v.min_count;
    if (key != "min_count") throw IoError("malformed vocabulary header: " + path);
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        v.ids[line] = v.size();
        v.tokens.push_back(line);
    }
    if (v.size() < 4 || v.tokens[kPad] != kPadTok || v.tokens[kGo] != kGoTok ||
        v.tokens[kEos] != kEosTok || v.tokens[kUnk] != kUnkTok)
        throw IoError("vocabulary file missing special tokens: " + path);
    return v;
}

const std::string& CipherKey::apply(const std::string& tok) const {
    auto it = mapping.find(tok);
    return it == mapping.end() ? tok : it->second;
}

CipherKey CipherKey::inverse() const {
    CipherKey inv;
    for (const auto& [from, to] : mapping) {
        if (!inv.mapping.emplace(to, from).second)
            throw ContractError("CipherKey::inverse: mapping is not injective");
    }
    return inv;
}

void CipherKey::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write cipher key: " + path);
    for (const auto& [from, to] : mapping) os << from << "\t" << to << "\n";
    if (!os) throw IoError("failed writing cipher key: " + path);
}

CipherKey CipherKey::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read cipher key: " + path);
    CipherKey key;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw IoError("malformed key line: " + line);
        key.mapping[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return key;
}

Vocabulary build_vocab(const Sentences& a, const Sentences& b, int min_count) {
    if (min_count < 1) throw ParameterError("build_vocab: min_count must be >= 1");
    std::map<std::string, long long> counts;   // ordered map gives lexicographic ties for free
    for (const Sentences* src : {&a, &b})
        for (const auto& s : *src)
            for (const auto& tok : s) {
                if (is_special(tok))
                    throw ContractError("build_vocab: corpus contains a reserved token: " + tok);
                ++counts[tok];
            }
    std::vector<std::pair<std::string, long long>> kept;
    for (const auto& kv : counts)
        if (kv.second >= min_count) kept.push_back(kv);
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });

    Vocabulary v;
    v.min_count = min_count;
    v.tokens = {kPadTok, kGoTok, kEosTok, kUnkTok};
    for (const auto& kv : kept) v.tokens.push_back(kv.first);
    for (int i = 0; i < v.size(); ++i) v.ids[v.tokens[static_cast<size_t>(i)]] = i;
    return v;
}

Sentences read_sentences(const std::string& path, int max_len) {
    if (max_len < 1) throw ParameterError("read_sentences: max_len must be >= 1");
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read corpus: " + path);
    Sentences out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto s = split_ws(line);
        if (s.empty() || static_cast<int>(s.size()) > max_len) continue;
        out.push_back(std::move(s));
    }
    return out;
}

void write_sentences(const std::string& path, const Sentences& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write corpus: " + path);
    for (const auto& sent : s) {
        for (size_t i = 0; i < sent.size(); ++i) {
            if (i) os << ' ';
            os << sent[i];
        }
        os << '\n';
    }
    if (!os) throw IoError("failed writing corpus: " + path);
}

Corpus encode_corpus(const Sentences& s, const Vocabulary& v, int style) {
    if (style != 1 && style != 2) throw ParameterError("encode_corpus: style must be 1 or 2");
    Corpus c;
    c.style = style;
    c.sentences.reserve(s.size());
    for (const auto& sent : s) {
        if (sent.empty()) throw ContractError("encode_corpus: empty sentence");
        c.sentences.push_back(v.encode(sent));
    }
    return c;
}

Sentences decode_corpus(const Corpus& c, const Vocabulary& v) {
    Sentences out;
    out.reserve(c.sentences.size());
    for (const auto& s : c.sentences) out.push_back(v.decode(s));
    return out;
}

CipherKey gen_cipher_key(const Vocabulary& v, double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw ParameterError("gen_cipher_key: rate must be in [0, 1]");
    std::vector<std::string> content(v.tokens.begin() + 4, v.tokens.end());
    const int n = static_cast<int>(content.size());
    const int k = static_cast<int>(std::min<double>(n, std::ceil(rate * n)));
    CipherKey key;
    if (k == 0) return key;

    Rng rng(seed);
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    rng.shuffle(order);
    order.resize(static_cast<size_t>(k));
    std::sort(order.begin(), order.end());   // selected subset, stable over naming

    // fresh surface forms, assigned by a second shuffle
    std::vector<int> assign(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) assign[static_cast<size_t>(i)] = i;
    rng.shuffle(assign);
    for (int i = 0; i < k; ++i) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "c%03d", assign[static_cast<size_t>(i)]);
        key.mapping[content[static_cast<size_t>(order[static_cast<size_t>(i)])]] = buf;
    }
    return key;
}

Sentences apply_cipher(const Sentences& s, const CipherKey& key) {
    Sentences out;
    out.reserve(s.size());
    for (const auto& sent : s) {
        Sentence cs;
        cs.reserve(sent.size());
        for (const auto& tok : sent) cs.push_back(key.apply(tok));
        out.push_back(std::move(cs));
    }
    return out;
}

Sentences shuffle_words(const Sentences& s, std::uint64_t seed) {
    Rng rng(seed);
    Sentences out = s;
    for (auto& sent : out) rng.shuffle(sent);
    return out;
}

namespace {

// stationary distribution by power iteration
std::vector<double> stationary(const std::vector<double>& trans, int n) {
    std::vector<double> pi(static_cast<size_t>(n), 1.0 / n), next(static_cast<size_t>(n));
    for (int iter = 0; iter < 2000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double p = pi[static_cast<size_t>(i)];
            const double* row = trans.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) next[static_cast<size_t>(j)] += p * row[j];
        }
        double diff = 0.0;
        for (int j = 0; j < n; ++j) diff += std::fabs(next[static_cast<size_t>(j)] - pi[static_cast<size_t>(j)]);
        pi.swap(next);
        if (diff < 1e-13) break;
    }
    return pi;
}

bool all_distinct(std::vector<double> v, double gap) {
    std::sort(v.begin(), v.end());
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] - v[i - 1] < gap) return false;
    return true;
}

}  // namespace

BigramModel make_bigram_model(int n_vocab, std::uint64_t seed, double concentration) {
    if (n_vocab < 2) throw ParameterError("make_bigram_model: need at least 2 tokens");
    if (concentration <= 0.0)
        throw ParameterError("make_bigram_model: concentration must be positive");
    Rng rng(seed);
    BigramModel m;
    m.n_vocab = n_vocab;
    for (int attempt = 0; attempt < 200; ++attempt) {
        m.transition.clear();
        m.transition.reserve(static_cast<size_t>(n_vocab) * n_vocab);
        for (int i = 0; i < n_vocab; ++i) {
            auto row = rng.dirichlet(concentration, n_vocab);
            // floor keeps the chain irreducible so the stationary vector exists
            double total = 0.0;
            for (auto& p : row) {
                p += 1e-6;
                total += p;
            }
            for (auto& p : row) p /= total;
            m.transition.insert(m.transition.end(), row.begin(), row.end());
        }
        m.initial = stationary(m.transition, n_vocab);
        if (all_distinct(m.initial, 1e-9)) return m;
        // resample on stationary ties
    }
    throw ContractError("make_bigram_model: could not reach a tie-free stationary distribution");
}

namespace {

int draw_categorical(const std::vector<double>& p, int off, int n, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        acc += p[static_cast<size_t>(off) + j];
        if (u < acc) return j;
    }
    return n - 1;
}

}  // namespace

Sentences sample_bigram_corpus(const BigramModel& m, int n_sentences, int max_len, Rng& rng,
                               const std::string& token_prefix) {
    if (n_sentences < 0) throw ParameterError("sample_bigram_corpus: negative sentence count");
    if (max_len < 1) throw ParameterError("sample_bigram_corpus: max_len must be >= 1");
    const int min_len = std::min(4, max_len);
    std::vector<std::string> names(static_cast<size_t>(m.n_vocab));
    for (int i = 0; i < m.n_vocab; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%03d", token_prefix.c_str(), i);
        names[static_cast<size_t>(i)] = buf;
    }
    Sentences out;
    out.reserve(static_cast<size_t>(n_sentences));
    for (int s = 0; s < n_sentences; ++s) {
        const int len = min_len + rng.uniform_int(max_len - min_len + 1);
        Sentence sent;
        sent.reserve(static_cast<size_t>(len));
        int cur = draw_categorical(m.initial, 0, m.n_vocab, rng);
        sent.push_back(names[static_cast<size_t>(cur)]);
        for (int t = 1; t < len; ++t) {
            cur = draw_categorical(m.transition, cur * m.n_vocab, m.n_vocab, rng);
            sent.push_back(names[static_cast<size_t>(cur)]);
        }
        out.push_back(std::move(sent));
    }
    return out;
}

std::pair<Sentences, BigramModel> synth_bigram_corpus(int n_vocab, int n_sentences, int max_len,
                                                      std::uint64_t seed) {
    auto model = make_bigram_model(n_vocab, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    auto sents = sample_bigram_corpus(model, n_sentences, max_len, rng);
    return {std::move(sents), std::move(model)};
}

SentenceBatch make_batch(const std::vector<std::vector<int>>& sentences) {
    if (sentences.empty()) throw ContractError("make_batch: empty batch");
    SentenceBatch b;
    b.batch = static_cast<int>(sentences.size());
    int longest = 0;
    for (const auto& s : sentences) {
        if (s.empty()) throw ContractError("make_batch: empty sentence");
        longest = std::max(longest, static_cast<int>(s.size()));
    }
    b.max_len = longest + 1;   // room for <eos>
    b.ids.assign(static_cast<size_t>(b.batch) * b.max_len, kPad);
    b.lengths.resize(static_cast<size_t>(b.batch));
    for (int i = 0; i < b.batch; ++i) {
        const auto& s = sentences[static_cast<size_t>(i)];
        for (size_t t = 0; t < s.size(); ++t)
            b.ids[static_cast<size_t>(i) * b.max_len + t] = s[t];
        b.ids[static_cast<size_t>(i) * b.max_len + s.size()] = kEos;
        b.lengths[static_cast<size_t>(i)] = static_cast<int>(s.size()) + 1;
    }
    return b;
}

SentenceBatch sample_batch(const Corpus& c, int k, Rng& rng) {
    if (c.sentences.empty()) throw ContractError("sample_batch: empty corpus");
    if (k < 1) throw ParameterError("sample_batch: k must be positive");
    std::vector<std::vector<int>> picked;
    picked.reserve(static_cast<size_t>(k));
    const int n = static_cast<int>(c.sentences.size());
    for (int i = 0; i < k; ++i)
        picked.push_back(c.sentences[static_cast<size_t>(rng.uniform_int(n))]);
    return make_batch(picked);
}

LabeledSentences load_reviews(const std::string& path, int max_review_sentences, int max_len) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read reviews: " + path);
    LabeledSentences out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw IoError("malformed review line (no tab): " + line);
        int rating = 0;
        try {
            rating = std::stoi(line.substr(0, tab));
        } catch (const std::exception&) {
            throw IoError("malformed review rating: " + line.substr(0, tab));
        }
        if (rating == 3) continue;
        const std::string text = line.substr(tab + 1);
        // split into sentences on '.'
        Sentences sents;
        std::string cur;
        for (char ch : text) {
            if (ch == '.') {
                auto s = split_ws(cur);
                if (!s.empty()) sents.push_back(std::move(s));
                cur.clear();
            } else {
                cur += ch;
            }
        }
        auto tail = split_ws(cur);
        if (!tail.empty()) sents.push_back(std::move(tail));
        if (static_cast<int>(sents.size()) > max_review_sentences) continue;
        for (auto& s : sents) {
            if (static_cast<int>(s.size()) > max_len || s.empty()) continue;
            (rating > 3 ? out.positive : out.negative).push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace crossalign::data
