#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "as2/errors.hpp"

namespace as2 {

// Reserved token ids. [UNK] is the only reserved id the tokenizer itself can
// emit; the others are inserted by sequence assembly.
enum ReservedId : int {
  kPad = 0,
  kUnk = 1,
  kCls = 2,
  kSep = 3,
  kEos = 4,
  kNumReserved = 5,
};

// Lowercases, splits on whitespace, and detaches .,:;?!()"' as single-char
// tokens. ASCII-only lowercasing; other bytes pass through.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  Vocabulary();  // just the 5 reserved tokens

  static Vocabulary build(const std::vector<std::string>& corpus,
                          std::size_t max_size, std::size_t min_count);

  int id_of(const std::string& token) const;     // kUnk when absent
  const std::string& token_of(int id) const;     // throws index_error
  bool contains(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  // one token per line, line number == id
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  void insert(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace as2
