#include "doctest.h"

#include <cstdio>

#include "as2/rng.hpp"
#include "as2/text.hpp"

using namespace as2;

TEST_CASE("tokenize lowercases, splits, and detaches punctuation") {
  auto toks = tokenize("Lady Gaga was born in 1986.");
  std::vector<std::string> want = {"lady", "gaga", "was", "born",
                                   "in",   "1986", "."};
  CHECK(toks == want);

  CHECK(tokenize("").empty());
  CHECK(tokenize("A  B") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("(hello), \"world\"!") ==
        std::vector<std::string>{"(", "hello", ")", ",", "\"", "world", "\"",
                                 "!"});
  CHECK(tokenize("it's") == std::vector<std::string>{"it", "'", "s"});
}

TEST_CASE("build_vocab keeps reserved ids and ranks by frequency") {
  Vocabulary v = Vocabulary::build({"a a b"}, 10, 1);
  CHECK(v.size() == 7);
  CHECK(v.id_of("a") == 5);  // most frequent first
  CHECK(v.id_of("b") == 6);
  CHECK(v.token_of(kPad) == "[PAD]");
  CHECK(v.token_of(kUnk) == "[UNK]");
  CHECK(v.token_of(kCls) == "[CLS]");
  CHECK(v.token_of(kSep) == "[SEP]");
  CHECK(v.token_of(kEos) == "[EOS]");

  Vocabulary empty = Vocabulary::build({}, 10, 1);
  CHECK(empty.size() == 5);

  Vocabulary filtered = Vocabulary::build({"a a b"}, 10, 2);
  CHECK(filtered.contains("a"));
  CHECK(!filtered.contains("b"));

  // ties broken lexicographically
  Vocabulary ties = Vocabulary::build({"pear apple pear apple cherry"}, 8, 1);
  CHECK(ties.id_of("apple") == 5);
  CHECK(ties.id_of("pear") == 6);
  CHECK(ties.id_of("cherry") == 7);

  // cap counts the reserved entries
  Vocabulary capped = Vocabulary::build({"a b c d e f"}, 7, 1);
  CHECK(capped.size() == 7);

  CHECK_THROWS_AS(Vocabulary::build({}, 4, 1), config_error);
}

TEST_CASE("encode maps unknown tokens to [UNK] and round-trips known ones") {
  Vocabulary v = Vocabulary::build({"alpha beta"}, 10, 1);
  CHECK(v.encode({"alpha"}) == std::vector<int>{v.id_of("alpha")});
  CHECK(v.encode({"zzz-unseen"}) == std::vector<int>{kUnk});
  for (const std::string& t : {"alpha", "beta"})
    CHECK(v.token_of(v.id_of(t)) == t);
}

TEST_CASE("encode of tokenize is deterministic and stays in range") {
  Vocabulary v = Vocabulary::build({"the quick brown fox", "jumps high"}, 12, 1);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    for (int w = 0; w < 6; ++w) {
      text += char('a' + rng.uniform_int(26));
      text += char('a' + rng.uniform_int(26));
      text += trial % 3 == 0 ? '.' : ' ';
    }
    auto ids1 = v.encode(tokenize(text));
    auto ids2 = v.encode(tokenize(text));
    CHECK(ids1 == ids2);
    for (int id : ids1) {
      CHECK(id < static_cast<int>(v.size()));
      CHECK(id != kPad);
      CHECK(id != kCls);
      CHECK(id != kSep);
      CHECK(id != kEos);
    }
  }
}

TEST_CASE("vocabulary file round-trip: one token per line, line = id") {
  Vocabulary v = Vocabulary::build({"zeta alpha zeta"}, 10, 1);
  std::string path = "vocab_roundtrip.txt";
  v.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(loaded.token_of(static_cast<int>(i)) ==
          v.token_of(static_cast<int>(i)));
  std::remove(path.c_str());
}
