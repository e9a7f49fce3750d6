#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "crossalign/errors.hpp"
#include "crossalign/eval.hpp"

using namespace crossalign;
using data::Sentence;
using data::Sentences;

namespace {

Sentence words(const std::string& text) {
  Sentence out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("bleu of a corpus against itself is one hundred") {
  Sentences s{words("the cat sat on the mat"), words("a fish")};
  auto r = eval::bleu(s, s);
  CHECK(r.bleu == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(r.brevity == 1.0);
  for (double p : r.precisions) CHECK(p == 1.0);
}

TEST_CASE("bleu with zero unigram overlap is zero") {
  auto r = eval::bleu({words("aa bb cc")}, {words("dd ee ff")});
  CHECK(r.bleu == 0.0);
}

TEST_CASE("bleu matches its frozen single-pair value") {
  // candidate "the the cat" against reference "the cat sat": p1 clipped to
  // 2/3, p2 = 1/2 smoothed-free, p3 empty-smoothed, brevity e^(1 - 3/3) = 1
  auto r = eval::bleu({words("the the cat")}, {words("the cat sat")});
  CHECK(r.bleu == doctest::Approx(55.03212081491044).epsilon(1e-12));
  CHECK(r.cand_len == 3);
  CHECK(r.ref_len == 3);
  CHECK(r.brevity == 1.0);
}

TEST_CASE("bleu matches its frozen corpus value") {
  Sentences cand{words("the cat sat on the mat"), words("dogs run fast in the park"),
                 words("birds sing")};
  Sentences ref{words("the cat sat on the mat"), words("dogs run quickly in the park"),
                words("birds sing loudly")};
  auto r = eval::bleu(cand, ref);
  CHECK(r.bleu == doctest::Approx(64.99167892771487).epsilon(1e-12));
}

TEST_CASE("bleu applies the brevity penalty on short candidates") {
  // perfect unigram match at one third the reference length
  auto r = eval::bleu({words("the")}, {words("the cat sat")});
  CHECK(r.brevity == doctest::Approx(std::exp(1.0 - 3.0)).epsilon(1e-12));
  CHECK(r.bleu == doctest::Approx(13.53352832366127).epsilon(1e-12));
}

TEST_CASE("bleu is invariant to a consistent corpus reordering") {
  Sentences cand{words("a b c"), words("d e f g"), words("h i")};
  Sentences ref{words("a b x"), words("d e f y"), words("h z")};
  auto base = eval::bleu(cand, ref);
  Sentences cand2{cand[2], cand[0], cand[1]};
  Sentences ref2{ref[2], ref[0], ref[1]};
  auto moved = eval::bleu(cand2, ref2);
  CHECK(base.bleu == doctest::Approx(moved.bleu).epsilon(1e-12));
}

TEST_CASE("bleu rejects mismatched corpus sizes and empty corpora") {
  CHECK_THROWS_AS(eval::bleu({words("a")}, {}), ContractError);
  CHECK_THROWS_AS(eval::bleu({}, {}), ContractError);
}

TEST_CASE("copy baseline equals bleu of the source itself") {
  Sentences src{words("x1 x2 x3"), words("y1 y2")};
  Sentences ref{words("x1 x2 q"), words("y1 y2")};
  CHECK(eval::copy_baseline(src, ref) == eval::bleu(src, ref).bleu);
  CHECK(eval::copy_baseline(ref, ref) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("frequency matching maps shared tokens to themselves") {
  Sentences x1{words("tok tok other")};
  Sentences x2{words("tok strange strange")};
  auto m = eval::frequency_match(x1, x2);
  CHECK(m.apply("tok") == "tok");
  // the one residual x2 token pairs with the one residual x1 token
  CHECK(m.apply("strange") == "other");
}

TEST_CASE("frequency matching recovers a planted cipher from exact counts") {
  // counts 1..8 are all distinct, so rank matching is exact
  Sentences plain;
  for (int i = 0; i < 8; ++i) {
    Sentence s;
    for (int k = 0; k <= i; ++k) s.push_back("t" + std::to_string(i));
    plain.push_back(s);
  }
  auto v = data::build_vocab(plain, {});
  auto key = data::gen_cipher_key(v, 1.0, 13);
  auto ciphered = data::apply_cipher(plain, key);

  auto m = eval::frequency_match(plain, ciphered);
  auto inv = key.inverse();
  int correct = 0, total = 0;
  for (const auto& [from, to] : key.mapping) {
    ++total;
    if (m.apply(to) == from) ++correct;
  }
  CHECK(total == 8);
  CHECK(correct == 8);  // exact recovery, token for token
  CHECK(eval::bleu(eval::apply_mapping(ciphered, m), plain).bleu ==
        doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("frequency matching breaks count ties lexicographically") {
  // both residual sides have two tokens of count one: pairing is by name
  Sentences x1{words("aa bb")};
  Sentences x2{words("pp qq")};
  auto m = eval::frequency_match(x1, x2);
  CHECK(m.apply("pp") == "aa");
  CHECK(m.apply("qq") == "bb");
}

TEST_CASE("surplus source tokens fall back to unk") {
  Sentences x1{words("one one one")};
  Sentences x2{words("u1 u1 u2")};
  auto m = eval::frequency_match(x1, x2);
  CHECK(m.apply("u1") == "one");
  CHECK(m.apply("u2") == "<unk>");
  auto mapped = eval::apply_mapping(x2, m);
  CHECK(mapped[0] == Sentence{"one", "one", "<unk>"});
}

TEST_CASE("mapping application leaves unknown tokens untouched") {
  eval::TokenMapping m;
  m.map["a"] = "b";
  CHECK(m.apply("a") == "b");
  CHECK(m.apply("zz") == "zz");
  auto out = eval::apply_mapping({words("a zz a")}, m);
  CHECK(out[0] == Sentence{"b", "zz", "b"});
}

TEST_CASE("style classifier separates trivially distinct populations") {
  // style 1 sentences speak one vocabulary, style 2 another
  Sentences s1, s2;
  Rng rng(3);
  for (int i = 0; i < 120; ++i) {
    Sentence a, b;
    int len = 3 + static_cast<int>(rng.uniform_int(5));
    for (int t = 0; t < len; ++t) {
      a.push_back("left" + std::to_string(rng.uniform_int(6)));
      b.push_back("right" + std::to_string(rng.uniform_int(6)));
    }
    s1.push_back(a);
    s2.push_back(b);
  }
  Sentences hold1(s1.begin() + 100, s1.end());
  Sentences hold2(s2.begin() + 100, s2.end());
  Sentences train1(s1.begin(), s1.begin() + 100);
  Sentences train2(s2.begin(), s2.begin() + 100);

  eval::ClassifierConfig cfg;
  cfg.epochs = 6;
  auto clf = eval::train_style_classifier(train1, train2, cfg);
  CHECK(clf.accuracy(hold1, 1) == doctest::Approx(1.0));
  CHECK(clf.accuracy(hold2, 2) == doctest::Approx(1.0));
  CHECK(clf.predict(words("left0 left1")) == 1);
  CHECK(clf.predict(words("right0 right1")) == 2);

  // classifier_accuracy counts hits against the requested target label
  CHECK(eval::classifier_accuracy(hold2, clf, 2) == doctest::Approx(1.0));
  CHECK(eval::classifier_accuracy(hold2, clf, 1) == doctest::Approx(0.0));
}

TEST_CASE("classifier prediction handles sentences shorter than its filters") {
  Sentences s1{words("aa bb cc dd ee"), words("aa cc ee bb dd")};
  Sentences s2{words("vv ww xx yy zz"), words("zz xx vv ww yy")};
  eval::ClassifierConfig cfg;
  cfg.epochs = 2;
  auto clf = eval::train_style_classifier(s1, s2, cfg);
  // single-token input must not throw: it is padded up to the widest filter
  CHECK_NOTHROW(clf.predict(words("aa")));
  CHECK_THROWS_AS(clf.predict(Sentence{}), ContractError);
}

TEST_CASE("classifier training is seed-deterministic") {
  Sentences s1{words("aa bb cc"), words("cc bb aa"), words("bb aa cc")};
  Sentences s2{words("xx yy zz"), words("zz yy xx"), words("yy xx zz")};
  eval::ClassifierConfig cfg;
  cfg.epochs = 2;
  auto c1 = eval::train_style_classifier(s1, s2, cfg);
  auto c2 = eval::train_style_classifier(s1, s2, cfg);
  CHECK(c1.emb.table->values == c2.emb.table->values);
  CHECK(c1.cnn.out.w->values == c2.cnn.out.w->values);
}
