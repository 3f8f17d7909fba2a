#include "as2/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace as2 {

namespace {

const char* kReservedNames[kNumReserved] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                            "[EOS]"};

bool is_detached_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case ':':
    case ';':
    case '?':
    case '!':
    case '(':
    case ')':
    case '"':
    case '\'':
      return true;
    default:
      return false;
  }
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    unsigned char u = static_cast<unsigned char>(raw);
    char c = u < 128 ? static_cast<char>(std::tolower(u)) : raw;
    if (std::isspace(u)) {
      flush();
    } else if (is_detached_punct(c)) {
      flush();
      out.push_back(std::string(1, c));
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* name : kReservedNames) insert(name);
}

void Vocabulary::insert(const std::string& token) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus,
                             std::size_t max_size, std::size_t min_count) {
  if (max_size < kNumReserved)
    throw config_error("vocabulary max_size must be at least " +
                       std::to_string(kNumReserved));
  std::map<std::string, std::size_t> counts;  // ordered: lexicographic ties
  for (const std::string& text : corpus)
    for (const std::string& tok : tokenize(text)) ++counts[tok];

  std::vector<std::pair<std::string, std::size_t>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [tok, n] : counts)
    if (n >= min_count) ranked.emplace_back(tok, n);
  // frequency descending; the map already yields lexicographic order for ties
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  for (const auto& [tok, n] : ranked) {
    if (v.size() >= max_size) break;
    v.insert(tok);
  }
  return v;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw index_error("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(id_of(t));
  return ids;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write vocabulary to " + path);
  for (const std::string& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot read vocabulary from " + path);
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  std::string line;
  while (std::getline(in, line)) v.insert(line);
  if (v.size() < kNumReserved)
    throw parse_error("vocabulary file " + path + " is missing reserved tokens");
  for (int i = 0; i < kNumReserved; ++i)
    if (v.tokens_[static_cast<std::size_t>(i)] != kReservedNames[i])
      throw parse_error("vocabulary file " + path +
                        " reserved token mismatch at id " + std::to_string(i));
  return v;
}

}  // namespace as2
