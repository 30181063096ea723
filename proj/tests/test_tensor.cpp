#include "doctest.h"

#include <cmath>
#include <vector>

#include "xltt/gradcheck.hpp"
#include "xltt/rng.hpp"
#include "xltt/tensor.hpp"

using namespace xltt;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, bool rg = true) {
  Tensor t(r, c, rg);
  rng.fill_uniform(t, -1.0, 1.0);
  return t;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul identity cases") {
  Tape tape;
  Tensor i2 = Tensor::identity(2);
  Tensor m = Tensor::from_rows({{2, 3}, {4, 5}});
  Tensor out = tape.matmul(i2, m);
  CHECK(out.at(0, 0) == 2);
  CHECK(out.at(0, 1) == 3);
  CHECK(out.at(1, 0) == 4);
  CHECK(out.at(1, 1) == 5);

  // orthonormal rows: I * I^T = I
  Tensor out2 = tape.matmul_nt(i2, i2);
  CHECK(out2.at(0, 0) == 1);
  CHECK(out2.at(0, 1) == 0);
  CHECK(out2.at(1, 1) == 1);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  Tensor a(3, 4), b(5, 2);
  CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("3x4"), ShapeError);
}

TEST_CASE("matmul gradcheck 3x4 * 4x2") {
  Rng rng(7);
  Tensor a = random_tensor(rng, 3, 4);
  Tensor b = random_tensor(rng, 4, 2);
  auto f = [&](Tape& t) { return t.sum(t.matmul(a, b)); };
  auto rep = gradcheck(f, {{"a", a}, {"b", b}});
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("row_softmax basics") {
  Tape tape;
  Tensor z = Tensor::from_rows({{0, 0}});
  Tensor p = tape.row_softmax(z);
  CHECK(p.at(0, 0) == doctest::Approx(0.5));
  CHECK(p.at(0, 1) == doctest::Approx(0.5));

  Tensor c = Tensor::from_rows({{4.2, 4.2, 4.2}});
  Tensor pc = tape.row_softmax(c);
  for (int j = 0; j < 3; ++j) CHECK(pc.at(0, j) == doctest::Approx(1.0 / 3.0));

  // softmax(I2), hand-computed: e/(e+1) and 1/(e+1)
  Tensor pi = tape.row_softmax(Tensor::identity(2));
  const double e = std::exp(1.0);
  CHECK(pi.at(0, 0) == doctest::Approx(e / (e + 1)).epsilon(1e-9));
  CHECK(pi.at(0, 1) == doctest::Approx(1 / (e + 1)).epsilon(1e-9));
  CHECK(pi.at(1, 0) == doctest::Approx(1 / (e + 1)).epsilon(1e-9));
}

TEST_CASE("row_softmax rows sum to 1, shift invariance") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    Tensor a = random_tensor(rng, 4, 6, false);
    Tensor p = tape.row_softmax(a);
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 6; ++j) s += p.at(i, j);
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
    const double c = rng.uniform(-50, 50);
    Tensor shifted(4, 6);
    for (std::size_t i = 0; i < a.size(); ++i)
      shifted.values()[i] = a.values()[i] + c;
    Tensor ps = tape.row_softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(std::abs(ps.values()[i] - p.values()[i]) < 1e-12);
  }
}

TEST_CASE("row_softmax column permutation equivariance") {
  Rng rng(13);
  Tensor a = random_tensor(rng, 3, 5, false);
  std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  Tensor ap(3, 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) ap.at(i, j) = a.at(i, perm[j]);
  Tape tape;
  Tensor p = tape.row_softmax(a);
  Tensor pp = tape.row_softmax(ap);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(pp.at(i, j) == doctest::Approx(p.at(i, perm[j])).epsilon(1e-14));
}

TEST_CASE("concat_cols and slice round trip") {
  Tape tape;
  Rng rng(3);
  Tensor a = random_tensor(rng, 5, 8, false);
  Tensor b = random_tensor(rng, 5, 8, false);
  Tensor c = tape.concat_cols(a, b);
  CHECK(c.rows() == 5);
  CHECK(c.cols() == 16);
  Tensor a2 = tape.slice_cols(c, 0, 8);
  Tensor b2 = tape.slice_cols(c, 8, 16);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a2.values()[i] == a.values()[i]);
    CHECK(b2.values()[i] == b.values()[i]);
  }

  Tensor empty(5, 0);
  Tensor same = tape.concat_cols(a, empty);
  CHECK(same.cols() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same.values()[i] == a.values()[i]);

  Tensor bad(4, 2);
  CHECK_THROWS_AS(tape.concat_cols(a, bad), ShapeError);
}

TEST_CASE("layer_norm values") {
  Tape tape;
  Tensor gain = Tensor::full(1, 4, 1.0);
  Tensor bias = Tensor::zeros(1, 4);

  Tensor constant = Tensor::from_rows({{3, 3, 3, 3}});
  Tensor out = tape.layer_norm(constant, gain, bias, 1e-5);
  for (int j = 0; j < 4; ++j) CHECK(out.at(0, j) == doctest::Approx(0.0));

  Tensor g2 = Tensor::full(1, 2, 1.0);
  Tensor b2 = Tensor::zeros(1, 2);
  Tensor r = Tensor::from_rows({{1, 3}});
  Tensor o = tape.layer_norm(r, g2, b2, 1e-12);
  CHECK(o.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(o.at(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm row statistics property") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    Tensor a = random_tensor(rng, 3, 8, false);
    Tensor gain = Tensor::full(1, 8, 1.0);
    Tensor bias = Tensor::zeros(1, 8);
    Tensor o = tape.layer_norm(a, gain, bias, 1e-9);
    for (std::size_t i = 0; i < 3; ++i) {
      double mean = 0, var = 0;
      for (std::size_t j = 0; j < 8; ++j) mean += o.at(i, j);
      mean /= 8;
      for (std::size_t j = 0; j < 8; ++j) var += (o.at(i, j) - mean) * (o.at(i, j) - mean);
      var /= 8;
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("layer_norm gradcheck") {
  Rng rng(23);
  Tensor a = random_tensor(rng, 4, 6);
  Tensor gain = random_tensor(rng, 1, 6);
  Tensor bias = random_tensor(rng, 1, 6);
  auto f = [&](Tape& t) {
    Tensor o = t.layer_norm(a, gain, bias, 1e-5);
    return t.sum(t.mul(o, o));  // quadratic readout exercises interactions
  };
  auto rep = gradcheck(f, {{"a", a}, {"gain", gain}, {"bias", bias}});
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("linear") {
  Tape tape;
  Rng rng(5);
  Tensor x = random_tensor(rng, 3, 4, false);
  Tensor out = tape.linear(x, Tensor::identity(4), Tensor::zeros(1, 4));
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(out.values()[i] == doctest::Approx(x.values()[i]));

  Tensor big = random_tensor(rng, 5, 16, false);
  Tensor w = random_tensor(rng, 16, 8, false);
  Tensor b = random_tensor(rng, 1, 8, false);
  Tensor y = tape.linear(big, w, b);
  CHECK(y.rows() == 5);
  CHECK(y.cols() == 8);

  CHECK_THROWS_AS(tape.linear(big, Tensor(4, 8), Tensor(1, 8)), ShapeError);
}

TEST_CASE("linear gradcheck") {
  Rng rng(29);
  Tensor x = random_tensor(rng, 3, 5);
  Tensor w = random_tensor(rng, 5, 2);
  Tensor b = random_tensor(rng, 1, 2);
  auto f = [&](Tape& t) { return t.sum(t.linear(x, w, b)); };
  auto rep = gradcheck(f, {{"x", x}, {"w", w}, {"b", b}});
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("cosine") {
  Tensor x = Tensor::row({1, 2, -3});
  CHECK(cosine(x, x) == doctest::Approx(1.0));
  CHECK(cosine(Tensor::row({1, 0}), Tensor::row({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine(Tensor::row({1, 1}), Tensor::row({1, 0})) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));

  bool zero = false;
  CHECK(cosine(Tensor::zeros(1, 3), x, &zero) == 0.0);
  CHECK(zero);
}

TEST_CASE("nll_of_index") {
  Tape tape;
  const int n = 5;
  Tensor uni = Tensor::full(1, n, 1.0 / n);
  CHECK(tape.nll_of_index(uni, 2).item() == doctest::Approx(std::log(5.0)));

  Tensor peaked = Tensor::from_rows({{0, 1, 0}});
  CHECK(tape.nll_of_index(peaked, 1).item() == doctest::Approx(0.0));

  Tensor quarter = Tensor::from_rows({{0.25, 0.75}});
  CHECK(tape.nll_of_index(quarter, 0).item() == doctest::Approx(std::log(4.0)));

  // probability floor keeps the loss finite
  Tensor zero = Tensor::from_rows({{0.0, 1.0}});
  CHECK(std::isfinite(tape.nll_of_index(zero, 0).item()));

  CHECK_THROWS_AS(tape.nll_of_index(uni, 5), std::out_of_range);
}

TEST_CASE("backward basics") {
  Rng rng(31);
  Tensor x = random_tensor(rng, 3, 3);

  {
    Tape tape;
    Tensor loss = tape.sum(x);
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
  }
  x.zero_grad();
  {
    Tape tape;
    Tensor loss = tape.scale(tape.sum(tape.mul(x, x)), 0.5);
    tape.backward(loss);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(x.grad()[i] == doctest::Approx(x.values()[i]));
  }
}

TEST_CASE("backward determinism and repeatability") {
  Rng rng(37);
  Tensor a = random_tensor(rng, 4, 3);
  Tensor b = random_tensor(rng, 3, 4);

  Tape tape;
  Tensor loss = tape.sum(tape.row_softmax(tape.matmul(a, b)));
  tape.backward(loss);
  std::vector<double> first(a.grad().begin(), a.grad().end());

  tape.zero_grads();
  tape.backward(loss);
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(a.grad()[i] == first[i]);

  Tape t2;
  CHECK_THROWS_AS(t2.backward(random_tensor(rng, 2, 2)), ShapeError);
}

TEST_CASE("gradcheck oracle behaviour") {
  Rng rng(41);
  Tensor x = random_tensor(rng, 2, 3);

  // quadratic: central differences are exact up to rounding
  auto quad = [&](Tape& t) { return t.scale(t.sum(t.mul(x, x)), 0.5); };
  CHECK(gradcheck(quad, {{"x", x}}).max_rel_error < 1e-7);

  // softmax chain
  Tensor w = random_tensor(rng, 3, 3);
  auto chain = [&](Tape& t) {
    return t.sum(t.mul(t.row_softmax(t.matmul(x, w)), t.row_softmax(t.matmul(x, w))));
  };
  CHECK(gradcheck(chain, {{"x", x}, {"w", w}}).max_rel_error < 1e-5);
}

TEST_CASE("gradcheck flags a corrupted gradient") {
  Rng rng(43);
  Tensor x = random_tensor(rng, 2, 2);
  auto f = [&](Tape& t) { return t.sum(t.mul(x, x)); };
  CHECK(gradcheck(f, {{"x", x}}, 1e-5, /*corrupt=*/true).max_rel_error > 1e-2);
  CHECK(gradcheck(f, {{"x", x}}).max_rel_error < 1e-7);
}

TEST_CASE("gather_rows and mean_rows gradcheck") {
  Rng rng(47);
  Tensor table = random_tensor(rng, 6, 4);
  std::vector<int> ids = {1, 1, 4, 0};
  auto f = [&](Tape& t) {
    Tensor g = t.gather_rows(table, ids);
    return t.sum(t.mul(t.mean_rows(g, 1, 3), t.mean_rows(g, 0, 2)));
  };
  CHECK(gradcheck(f, {{"table", table}}).max_rel_error < 1e-6);
}

TEST_CASE("gelu and transpose gradcheck") {
  Rng rng(53);
  Tensor x = random_tensor(rng, 3, 4);
  auto f = [&](Tape& t) { return t.sum(t.mul(t.gelu(x), t.transpose(t.transpose(x)))); };
  CHECK(gradcheck(f, {{"x", x}}).max_rel_error < 1e-5);
}

TEST_CASE("every differentiable op passes gradcheck over 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Tensor a = random_tensor(rng, 3, 4);
    Tensor b = random_tensor(rng, 4, 3);
    Tensor r = random_tensor(rng, 1, 3);
    Tensor gain = random_tensor(rng, 1, 3);
    Tensor bias = random_tensor(rng, 1, 3);
    auto f = [&](Tape& t) {
      Tensor m = t.matmul(a, b);                       // 3x3
      Tensor sm = t.row_softmax(m);
      Tensor ln = t.layer_norm(t.add_rowvec(m, r), gain, bias, 1e-5);
      Tensor cat = t.concat_cols(sm, t.gelu(ln));      // 3x6
      Tensor sl = t.slice_cols(cat, 1, 5);
      Tensor probs = t.row_softmax(t.mean_rows(sl, 0, 2));
      Tensor nll = t.nll_of_index(probs, seed % 4);
      return t.add(nll, t.scale(t.sum(t.mul(sl, sl)), 0.01));
    };
    auto rep = gradcheck(f, {{"a", a}, {"b", b}, {"r", r}, {"gain", gain}, {"bias", bias}});
    CHECK_MESSAGE(rep.max_rel_error < 1e-4, "seed ", seed, " worst ", rep.worst_param);
  }
}

TEST_CASE("finiteness after ops on finite inputs") {
  Rng rng(59);
  for (int trial = 0; trial < 10; ++trial) {
    Tape tape;
    Tensor a = random_tensor(rng, 4, 4, false);
    Tensor out = tape.row_softmax(tape.matmul(a, a));
    CHECK(out.all_finite());
  }
}

}  // TEST_SUITE
