#include <doctest.h>

#include <cmath>
#include <vector>

#include "crossalign/nn.hpp"

using namespace crossalign;
using ad::Graph;
using ad::Tensor;
using ad::TensorPtr;

TEST_CASE("embedding pins the pad row to zero") {
  Rng rng(1);
  nn::Embedding emb(6, 4, 0, rng);
  for (int c = 0; c < 4; ++c) CHECK(emb.table->values[static_cast<size_t>(c)] == 0.0);
  // other rows carry signal
  double mag = 0.0;
  for (int i = 4; i < emb.table->size(); ++i) mag += std::abs(emb.table->values[static_cast<size_t>(i)]);
  CHECK(mag > 0.0);

  // simulate an optimizer nudging the pad row, then re-pin
  emb.table->values[1] = 0.7;
  emb.pin_pad();
  CHECK(emb.table->values[1] == 0.0);
}

TEST_CASE("embedding lookup returns the exact rows") {
  Rng rng(2);
  nn::Embedding emb(5, 3, 0, rng);
  Graph g;
  auto got = emb.lookup(g, {4, 0, 4});
  REQUIRE(got->shape == std::vector<int>{3, 3});
  for (int c = 0; c < 3; ++c) {
    CHECK(got->values[static_cast<size_t>(c)] == emb.table->values[static_cast<size_t>(4 * 3 + c)]);
    CHECK(got->values[static_cast<size_t>(3 + c)] == 0.0);  // pad row
    CHECK(got->values[static_cast<size_t>(6 + c)] == got->values[static_cast<size_t>(c)]);
  }
}

TEST_CASE("soft lookup with a one-hot distribution equals hard lookup") {
  Rng rng(3);
  nn::Embedding emb(4, 3, 0, rng);
  Graph g;
  auto dist = Tensor::from({2, 4}, {0, 0, 1, 0, 0, 1, 0, 0});
  auto soft = emb.lookup_soft(g, dist);
  auto hard = emb.lookup(g, {2, 1});
  CHECK(soft->values == hard->values);

  auto not_simplex = Tensor::from({1, 4}, {0.5, 0.5, 0.5, 0.0});
  CHECK_THROWS_AS(emb.lookup_soft(g, not_simplex), ContractError);
  auto wrong_width = Tensor::from({1, 3}, {1, 0, 0});
  CHECK_THROWS_AS(emb.lookup_soft(g, wrong_width), DimensionError);
}

TEST_CASE("gru step matches the gate equations on fixed weights") {
  Rng rng(4);
  nn::GruCell cell(2, 2, rng);
  // overwrite with hand values so the expectation is closed-form
  auto fill = [](TensorPtr& t, std::vector<double> v) { t->values = std::move(v); };
  fill(cell.wxz, {0.1, 0.2, 0.3, 0.4});
  fill(cell.whz, {0.0, 0.1, 0.1, 0.0});
  fill(cell.bz, {0.05, -0.05});
  fill(cell.wxr, {0.2, 0.1, 0.0, 0.3});
  fill(cell.whr, {0.1, 0.0, 0.0, 0.1});
  fill(cell.br, {0.0, 0.1});
  fill(cell.wxh, {0.3, -0.2, 0.1, 0.4});
  fill(cell.whh, {0.2, 0.1, -0.1, 0.2});
  fill(cell.bh, {-0.1, 0.1});

  const double x0 = 0.5, x1 = -1.0, h0 = 0.3, h1 = -0.2;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double z0 = sig(x0 * 0.1 + x1 * 0.3 + h0 * 0.0 + h1 * 0.1 + 0.05);
  const double z1 = sig(x0 * 0.2 + x1 * 0.4 + h0 * 0.1 + h1 * 0.0 - 0.05);
  const double r0 = sig(x0 * 0.2 + x1 * 0.0 + h0 * 0.1 + h1 * 0.0 + 0.0);
  const double r1 = sig(x0 * 0.1 + x1 * 0.3 + h0 * 0.0 + h1 * 0.1 + 0.1);
  const double rh0 = r0 * h0, rh1 = r1 * h1;
  const double hc0 = std::tanh(x0 * 0.3 + x1 * 0.1 + rh0 * 0.2 + rh1 * (-0.1) - 0.1);
  const double hc1 = std::tanh(x0 * (-0.2) + x1 * 0.4 + rh0 * 0.1 + rh1 * 0.2 + 0.1);

  Graph g;
  auto x = Tensor::from({1, 2}, {x0, x1});
  auto h = Tensor::from({1, 2}, {h0, h1});
  auto hn = cell.step(g, x, h);
  CHECK(hn->values[0] == doctest::Approx((1 - z0) * h0 + z0 * hc0).epsilon(1e-12));
  CHECK(hn->values[1] == doctest::Approx((1 - z1) * h1 + z1 * hc1).epsilon(1e-12));
}

TEST_CASE("gru with zero input and zero state stays near zero") {
  Rng rng(5);
  nn::GruCell cell(3, 4, rng);
  // zero biases so the fixed point is exact
  for (auto& b : {cell.bz, cell.br, cell.bh})
    for (auto& v : b->values) v = 0.0;
  Graph g;
  auto x = Tensor::zeros({2, 3});
  auto h = Tensor::zeros({2, 4});
  auto hn = cell.step(g, x, h);
  for (double v : hn->values) CHECK(v == 0.0);
}

TEST_CASE("gru params returns all nine tensors") {
  Rng rng(6);
  nn::GruCell cell(2, 3, rng);
  auto p = cell.params();
  CHECK(p.size() == 9);
  CHECK(cell.input_dim() == 2);
  CHECK(cell.hidden_dim() == 3);
}

TEST_CASE("dense applies weights, bias and activation") {
  Rng rng(7);
  nn::Dense lin(2, 2, nn::Activation::none, rng);
  lin.w->values = {1, 2, 3, 4};
  lin.b->values = {0.5, -0.5};
  Graph g;
  auto x = Tensor::from({1, 2}, {1, 1});
  CHECK(lin.forward(g, x)->values == std::vector<double>{4.5, 5.5});

  nn::Dense act(2, 2, nn::Activation::relu, rng);
  act.w->values = {1, 2, 3, 4};
  act.b->values = {-10.0, 0.0};
  CHECK(act.forward(g, x)->values == std::vector<double>{0.0, 6.0});

  nn::Dense sq(2, 1, nn::Activation::sigmoid, rng);
  sq.w->values = {0.0, 0.0};
  sq.b->values = {0.0};
  CHECK(sq.forward(g, x)->values[0] == 0.5);

  nn::Dense th(2, 1, nn::Activation::tanh, rng);
  th.w->values = {0.0, 0.0};
  th.b->values = {3.0};
  CHECK(th.forward(g, x)->values[0] == std::tanh(3.0));
}

TEST_CASE("textcnn output is invariant to trailing padding when lengths are given") {
  Rng rng(8);
  const int d = 4;
  nn::TextCnn cnn(d, rng, {2, 3}, 5, 0.5);
  Rng content(9);
  const int b = 2, T = 6;
  auto base = Tensor::uniform({b, T, d}, content, -1.0, 1.0, false);
  // zero everything past each row's true length
  std::vector<int> lengths{4, 3};
  for (int i = 0; i < b; ++i)
    for (int t = lengths[static_cast<size_t>(i)]; t < T; ++t)
      for (int c = 0; c < d; ++c) base->values[static_cast<size_t>((i * T + t) * d + c)] = 0.0;

  // same content, two extra pad steps
  auto longer = Tensor::zeros({b, T + 2, d});
  for (int i = 0; i < b; ++i)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < d; ++c)
        longer->values[static_cast<size_t>((i * (T + 2) + t) * d + c)] =
            base->values[static_cast<size_t>((i * T + t) * d + c)];

  Graph g;
  Rng drop(10);
  auto short_logits = cnn.forward(g, base, false, drop, lengths);
  auto long_logits = cnn.forward(g, longer, false, drop, lengths);
  REQUIRE(short_logits->shape == std::vector<int>{b, 1});
  CHECK(short_logits->values == long_logits->values);
}

TEST_CASE("textcnn rejects sequences shorter than its widest filter") {
  Rng rng(11);
  nn::TextCnn cnn(3, rng, {2, 4}, 2, 0.5);
  Graph g;
  auto seq = Tensor::zeros({1, 3, 3});
  CHECK_THROWS_AS(cnn.forward(g, seq, false, rng), ContractError);
}

TEST_CASE("textcnn dropout only acts in train mode") {
  Rng rng(12);
  nn::TextCnn cnn(2, rng, {2}, 3, 0.5);
  Graph g;
  Rng content(13);
  auto seq = Tensor::uniform({3, 4, 2}, content, -1.0, 1.0, false);
  Rng d1(14), d2(15);
  auto eval1 = cnn.forward(g, seq, false, d1);
  auto eval2 = cnn.forward(g, seq, false, d2);
  CHECK(eval1->values == eval2->values);  // eval mode never consumes noise

  Rng d3(16), d4(17);
  auto train1 = cnn.forward(g, seq, true, d3);
  auto train2 = cnn.forward(g, seq, true, d4);
  CHECK(train1->values != train2->values);
}

TEST_CASE("textcnn params cover filters, biases and the output layer") {
  Rng rng(18);
  nn::TextCnn cnn(3, rng, {2, 3}, 4, 0.5);
  auto p = cnn.params();
  CHECK(p.size() == 2 * 2 + 2);  // one filter + one bias per width, dense w + b
  CHECK(cnn.input_dim() == 3);
  CHECK(cnn.out.w->shape == std::vector<int>{2 * 4, 1});
}
