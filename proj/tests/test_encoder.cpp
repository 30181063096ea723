#include "doctest.h"

#include <cmath>

#include "xltt/encoder.hpp"
#include "xltt/gradcheck.hpp"

using namespace xltt;

namespace {

std::vector<int> iota_ids(std::size_t n, int start) {
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = start + static_cast<int>(i % 7);
  return ids;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("output shape follows config") {
  Rng rng(3);
  EncoderConfig cfg{8, 2, 32, 1};
  auto params = EncoderParams::init(cfg, 40, rng);
  Tape tape;
  const auto ids = iota_ids(17, 4);
  const std::vector<int> types(17, 0);
  Tensor b = encode_ids(tape, ids, types, params);
  CHECK(b.rows() == 17);
  CHECK(b.cols() == 8);
  CHECK(b.all_finite());
}

TEST_CASE("zero layers reduce to the embedding sum") {
  Rng rng(7);
  EncoderConfig cfg{8, 0, 16, 1};
  auto params = EncoderParams::init(cfg, 20, rng);
  Tape tape;
  const std::vector<int> ids{4, 9, 11};
  const std::vector<int> types{0, 0, 1};
  Tensor b = encode_ids(tape, ids, types, params);
  REQUIRE(b.rows() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      const double expected = params.token_emb.at(static_cast<std::size_t>(ids[i]), j) +
                              (params.position_emb.at(i, j) +
                               params.segment_emb.at(static_cast<std::size_t>(types[i]), j));
      CHECK(b.at(i, j) == expected);
    }
}

TEST_CASE("language tag never enters the forward pass") {
  Rng rng(11);
  auto params = EncoderParams::init({8, 2, 32, 1}, 30, rng);
  TokenizedInstance a, b;
  a.input_ids = b.input_ids = iota_ids(9, 4);
  a.token_types = b.token_types = std::vector<int>(9, 0);
  a.language = "en";
  b.language = "zz-cipher";
  Tape ta, tb;
  Tensor ba = encode(ta, a, params);
  Tensor bb = encode(tb, b, params);
  for (std::size_t i = 0; i < ba.size(); ++i)
    CHECK(ba.values()[i] == bb.values()[i]);
}

TEST_CASE("initialization reproducible from seed") {
  Rng r1(99), r2(99);
  auto p1 = EncoderParams::init({8, 2, 16, 2}, 25, r1);
  auto p2 = EncoderParams::init({8, 2, 16, 2}, 25, r2);
  auto n1 = p1.named();
  auto n2 = p2.named();
  REQUIRE(n1.size() == n2.size());
  for (std::size_t i = 0; i < n1.size(); ++i) {
    CHECK(n1[i].first == n2[i].first);
    REQUIRE(n1[i].second.size() == n2[i].second.size());
    for (std::size_t j = 0; j < n1[i].second.size(); ++j)
      CHECK(n1[i].second.values()[j] == n2[i].second.values()[j]);
  }
}

TEST_CASE("multi-head forward stays finite and shaped") {
  Rng rng(13);
  auto params = EncoderParams::init({8, 1, 16, 2}, 20, rng);
  Tape tape;
  Tensor b = encode_ids(tape, iota_ids(6, 4), std::vector<int>(6, 0), params);
  CHECK(b.rows() == 6);
  CHECK(b.cols() == 8);
  CHECK(b.all_finite());
}

TEST_CASE("input validation") {
  Rng rng(5);
  auto params = EncoderParams::init({8, 1, 8, 1}, 10, rng);
  Tape tape;
  CHECK_THROWS(encode_ids(tape, {}, {}, params));
  CHECK_THROWS(encode_ids(tape, {1, 12}, {0, 0}, params));        // id past vocab
  CHECK_THROWS(encode_ids(tape, {1, 2}, {0, 3}, params));          // bad segment
  CHECK_THROWS(encode_ids(tape, iota_ids(9, 1), std::vector<int>(9, 0), params));
  CHECK_THROWS(EncoderParams::init({9, 1, 8, 2}, 10, rng));        // 9 % 2 != 0
  CHECK_THROWS(EncoderParams::init({8, 1, 8, 1}, 0, rng));
}

TEST_CASE("gradcheck through encode then sum") {
  Rng rng(17);
  auto params = EncoderParams::init({8, 1, 16, 1}, 12, rng);
  const std::vector<int> ids{4, 7, 9, 5, 11, 6};
  const std::vector<int> types{0, 0, 0, 1, 1, 1};
  auto report = gradcheck(
      [&](Tape& tape) { return tape.sum(encode_ids(tape, ids, types, params)); },
      params.named());
  CHECK(report.max_rel_error < 1e-4);
}

}  // TEST_SUITE
