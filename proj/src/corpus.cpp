#include "as2/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace as2 {

using nlohmann::json;

namespace {

bool is_upper_or_digit(unsigned char c) {
  return std::isupper(c) || std::isdigit(c);
}

// candidates are labeled by character overlap of [start, start+len) with the
// sentence span
bool overlaps(std::size_t a_begin, std::size_t a_end, std::size_t b_begin,
              std::size_t b_end) {
  return a_begin < b_end && b_begin < a_end;
}

void validate_candidate(const AS2Corpus& corpus, const QuestionGroup& g,
                        const Candidate& c) {
  auto it = corpus.documents.find(c.doc_id);
  if (it == corpus.documents.end())
    throw integrity_error("candidate (question " + g.question_id +
                          ", sent_index " + std::to_string(c.sent_index) +
                          ") references unknown doc_id '" + c.doc_id + "'");
  const Document& d = it->second;
  if (c.sent_index < 0 ||
      static_cast<std::size_t>(c.sent_index) >= d.sentences.size())
    throw integrity_error("candidate (question " + g.question_id +
                          ") sent_index " + std::to_string(c.sent_index) +
                          " outside document '" + c.doc_id + "'");
  if (d.sentences[static_cast<std::size_t>(c.sent_index)] != c.sentence)
    throw integrity_error("candidate (question " + g.question_id +
                          ", doc '" + c.doc_id + "', sent_index " +
                          std::to_string(c.sent_index) +
                          ") text differs from the document sentence");
}

json candidate_to_json(const QuestionGroup& g, const Candidate& c) {
  json j;
  j["question_id"] = g.question_id;
  j["question"] = g.question;
  j["doc_id"] = c.doc_id;
  j["sent_index"] = c.sent_index;
  j["sentence"] = c.sentence;
  j["prev"] = c.prev ? json(*c.prev) : json(nullptr);
  j["next"] = c.next ? json(*c.next) : json(nullptr);
  j["label"] = c.label;
  return j;
}

const json& require_field(const json& j, const char* key,
                          const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw parse_error(where + ": missing required field \"" + key + "\"");
  return *it;
}

std::string json_string(const json& j, const char* key,
                        const std::string& where) {
  const json& v = require_field(j, key, where);
  if (!v.is_string())
    throw parse_error(where + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

}  // namespace

std::vector<SentenceSpan> split_sentences(const std::string& paragraph) {
  std::vector<SentenceSpan> out;
  const std::size_t n = paragraph.size();

  auto emit = [&](std::size_t lo, std::size_t hi) {  // [lo, hi) raw segment
    while (lo < hi && std::isspace(static_cast<unsigned char>(paragraph[lo])))
      ++lo;
    while (hi > lo &&
           std::isspace(static_cast<unsigned char>(paragraph[hi - 1])))
      --hi;
    if (lo < hi)
      out.push_back({lo, hi, paragraph.substr(lo, hi - lo)});
  };

  std::size_t seg_start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char c = paragraph[i];
    if (c != '.' && c != '?' && c != '!') continue;
    std::size_t j = i + 1;
    while (j < n && std::isspace(static_cast<unsigned char>(paragraph[j]))) ++j;
    bool had_space = j > i + 1;
    if (had_space && j < n &&
        is_upper_or_digit(static_cast<unsigned char>(paragraph[j]))) {
      emit(seg_start, i + 1);
      seg_start = j;
      i = j - 1;
    }
  }
  emit(seg_start, n);
  return out;
}

AS2Corpus convert_squad(const std::string& squad_json_text,
                        ConvertStats* stats) {
  json root;
  try {
    root = json::parse(squad_json_text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("SQuAD json: ") + e.what());
  }
  const json& data = require_field(root, "data", "SQuAD json");
  if (!data.is_array()) throw parse_error("SQuAD json: \"data\" must be an array");

  struct ArticleOut {
    AS2Corpus part;
    ConvertStats stats;
    std::string error;  // exceptions may not escape the parallel region
  };
  std::vector<ArticleOut> slots(data.size());

  // conversion is independent per article; slot order keeps the output
  // deterministic no matter how the work is scheduled
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ai = 0; ai < static_cast<std::ptrdiff_t>(data.size());
       ++ai) {
    const json& article = data[static_cast<std::size_t>(ai)];
    ArticleOut& slot = slots[static_cast<std::size_t>(ai)];
    try {
    slot.stats.n_articles = 1;
    std::string title = article.contains("title") && article["title"].is_string()
                            ? article["title"].get<std::string>()
                            : ("article" + std::to_string(ai));
    const json& paragraphs =
        require_field(article, "paragraphs",
                      "SQuAD json (article " + std::to_string(ai) + ")");
    for (std::size_t pi = 0; pi < paragraphs.size(); ++pi) {
      const json& para = paragraphs[pi];
      std::string where = "SQuAD json (article " + std::to_string(ai) +
                          ", paragraph " + std::to_string(pi) + ")";
      std::string context = json_string(para, "context", where);
      auto spans = split_sentences(context);
      slot.stats.n_paragraphs += 1;
      if (spans.empty()) {
        if (para.contains("qas") && !para["qas"].empty())
          slot.stats.warnings.push_back(where + ": empty context, " +
                                        std::to_string(para["qas"].size()) +
                                        " question(s) skipped");
        continue;
      }
      Document doc;
      doc.doc_id = title + "#" + std::to_string(pi);
      doc.title = title;
      for (const auto& s : spans) doc.sentences.push_back(s.text);
      slot.part.documents.emplace(doc.doc_id, doc);

      const json& qas = require_field(para, "qas", where);
      for (const json& qa : qas) {
        QuestionGroup g;
        g.question_id = json_string(qa, "id", where);
        g.question = json_string(qa, "question", where);
        const json& answers = require_field(qa, "answers", where);
        std::vector<std::pair<std::size_t, std::size_t>> answer_spans;
        for (const json& ans : answers) {
          long long start = require_field(ans, "answer_start", where)
                                .get<long long>();
          std::string text = json_string(ans, "text", where);
          if (start < 0 ||
              static_cast<std::size_t>(start) >= context.size()) {
            slot.stats.warnings.push_back(
                where + ": question " + g.question_id + " answer offset " +
                std::to_string(start) + " outside paragraph, span ignored");
            continue;
          }
          std::size_t begin = static_cast<std::size_t>(start);
          std::size_t end = std::min(begin + text.size(), context.size());
          answer_spans.emplace_back(begin, end);
        }
        if (answer_spans.empty())
          slot.stats.warnings.push_back(where + ": question " + g.question_id +
                                        " has no usable answers, all labels 0");
        for (std::size_t si = 0; si < spans.size(); ++si) {
          Candidate c;
          c.sentence = spans[si].text;
          c.doc_id = doc.doc_id;
          c.sent_index = static_cast<int>(si);
          c.label = 0;
          for (auto [ab, ae] : answer_spans)
            if (overlaps(ab, ae, spans[si].begin, spans[si].end)) {
              c.label = 1;
              break;
            }
          g.candidates.push_back(std::move(c));
        }
        slot.stats.n_questions += 1;
        slot.stats.n_pairs += g.candidates.size();
        for (const Candidate& c : g.candidates)
          slot.stats.n_positive_pairs += static_cast<std::size_t>(c.label);
        slot.part.groups.push_back(std::move(g));
      }
    }
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  }

  AS2Corpus corpus;
  ConvertStats total;
  for (const ArticleOut& slot : slots)
    if (!slot.error.empty()) throw parse_error(slot.error);
  for (ArticleOut& slot : slots) {
    for (auto& g : slot.part.groups) corpus.groups.push_back(std::move(g));
    for (auto& [id, d] : slot.part.documents)
      corpus.documents.emplace(id, std::move(d));
    total.n_articles += slot.stats.n_articles;
    total.n_paragraphs += slot.stats.n_paragraphs;
    total.n_questions += slot.stats.n_questions;
    total.n_pairs += slot.stats.n_pairs;
    total.n_positive_pairs += slot.stats.n_positive_pairs;
    for (auto& w : slot.stats.warnings) total.warnings.push_back(std::move(w));
  }
  if (stats) *stats = std::move(total);
  return attach_context(std::move(corpus));
}

AS2Corpus convert_squad_file(const std::string& path, ConvertStats* stats) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open SQuAD file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return convert_squad(buf.str(), stats);
}

AS2Corpus convert_asnq_tsv(const std::string& path, ConvertStats* stats) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open TSV file " + path);
  struct Row {
    std::string question, sentence;
    long long label;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  bool scale_1_to_4 = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos
                                             : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw parse_error(path + ":" + std::to_string(lineno) +
                        ": expected 3 tab-separated columns");
    Row r;
    r.question = line.substr(0, t1);
    r.sentence = line.substr(t1 + 1, t2 - t1 - 1);
    std::string label_text = line.substr(t2 + 1);
    try {
      r.label = std::stoll(label_text);
    } catch (...) {
      throw parse_error(path + ":" + std::to_string(lineno) +
                        ": label '" + label_text + "' is not an integer");
    }
    if (r.label > 1) scale_1_to_4 = true;
    rows.push_back(std::move(r));
  }

  AS2Corpus corpus;
  ConvertStats total;
  std::size_t qid = 0;
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].question == rows[i].question) ++j;
    QuestionGroup g;
    g.question_id = "asnq-q" + std::to_string(qid++);
    g.question = rows[i].question;
    Document doc;
    doc.doc_id = g.question_id + "#doc";
    for (std::size_t k = i; k < j; ++k) {
      Candidate c;
      c.sentence = rows[k].sentence;
      c.doc_id = doc.doc_id;
      c.sent_index = static_cast<int>(k - i);
      c.label = scale_1_to_4 ? (rows[k].label == 4 ? 1 : 0)
                             : (rows[k].label == 1 ? 1 : 0);
      doc.sentences.push_back(c.sentence);
      g.candidates.push_back(std::move(c));
    }
    total.n_questions += 1;
    total.n_pairs += g.candidates.size();
    for (const Candidate& c : g.candidates)
      total.n_positive_pairs += static_cast<std::size_t>(c.label);
    corpus.documents.emplace(doc.doc_id, std::move(doc));
    corpus.groups.push_back(std::move(g));
    i = j;
  }
  if (stats) *stats = std::move(total);
  return attach_context(std::move(corpus));
}

AS2Corpus filter_clean(const AS2Corpus& corpus) {
  AS2Corpus out;
  std::set<std::string> used;
  for (const QuestionGroup& g : corpus.groups) {
    bool pos = false, neg = false;
    for (const Candidate& c : g.candidates) (c.label ? pos : neg) = true;
    if (pos && neg) {
      out.groups.push_back(g);
      for (const Candidate& c : g.candidates) used.insert(c.doc_id);
    }
  }
  for (const auto& [id, d] : corpus.documents)
    if (used.count(id)) out.documents.emplace(id, d);
  return out;
}

AS2Corpus attach_context(AS2Corpus corpus) {
  for (QuestionGroup& g : corpus.groups) {
    for (Candidate& c : g.candidates) {
      validate_candidate(corpus, g, c);
      const Document& d = corpus.documents.at(c.doc_id);
      std::size_t i = static_cast<std::size_t>(c.sent_index);
      c.prev = i > 0 ? std::optional<std::string>(d.sentences[i - 1])
                     : std::nullopt;
      c.next = i + 1 < d.sentences.size()
                   ? std::optional<std::string>(d.sentences[i + 1])
                   : std::nullopt;
    }
  }
  return corpus;
}

std::map<int, std::size_t> doc_bow(const Document& doc,
                                   const Vocabulary& vocab) {
  std::map<int, std::size_t> counts;
  for (const std::string& s : doc.sentences)
    for (int id : vocab.encode(tokenize(s))) ++counts[id];
  return counts;
}

std::string default_docs_path(const std::string& pairs_path) {
  const std::string suffix = ".jsonl";
  if (pairs_path.size() > suffix.size() &&
      pairs_path.compare(pairs_path.size() - suffix.size(), suffix.size(),
                         suffix) == 0)
    return pairs_path.substr(0, pairs_path.size() - suffix.size()) +
           ".docs.jsonl";
  return pairs_path + ".docs.jsonl";
}

void save_corpus(const AS2Corpus& corpus, const std::string& pairs_path,
                 const std::string& docs_path) {
  std::string dpath = docs_path.empty() ? default_docs_path(pairs_path)
                                        : docs_path;
  std::ofstream pairs(pairs_path);
  if (!pairs) throw input_error("cannot write " + pairs_path);
  for (const QuestionGroup& g : corpus.groups)
    for (const Candidate& c : g.candidates)
      pairs << candidate_to_json(g, c).dump() << "\n";

  std::ofstream docs(dpath);
  if (!docs) throw input_error("cannot write " + dpath);
  for (const auto& [id, d] : corpus.documents) {
    json j;
    j["doc_id"] = id;
    j["title"] = d.title ? json(*d.title) : json(nullptr);
    j["sentences"] = d.sentences;
    docs << j.dump() << "\n";
  }
}

AS2Corpus load_corpus(const std::string& pairs_path,
                      const std::string& docs_path) {
  std::string dpath = docs_path.empty() ? default_docs_path(pairs_path)
                                        : docs_path;
  AS2Corpus corpus;

  std::ifstream docs(dpath);
  if (!docs)
    throw parse_error("cannot open documents sidecar " + dpath +
                      " (expected next to " + pairs_path + ")");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(docs, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = dpath + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw parse_error(where + ": " + e.what());
    }
    Document d;
    d.doc_id = json_string(j, "doc_id", where);
    const json& title = require_field(j, "title", where);
    if (title.is_string()) d.title = title.get<std::string>();
    const json& sentences = require_field(j, "sentences", where);
    if (!sentences.is_array() || sentences.empty())
      throw parse_error(where + ": \"sentences\" must be a non-empty array");
    for (const json& s : sentences) {
      if (!s.is_string())
        throw parse_error(where + ": sentences must be strings");
      d.sentences.push_back(s.get<std::string>());
    }
    if (!corpus.documents.emplace(d.doc_id, d).second)
      throw parse_error(where + ": duplicate doc_id '" + d.doc_id + "'");
  }

  std::ifstream pairs(pairs_path);
  if (!pairs) throw parse_error("cannot open " + pairs_path);
  std::map<std::string, std::size_t> group_of;  // question_id -> index
  lineno = 0;
  while (std::getline(pairs, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = pairs_path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw parse_error(where + ": " + e.what());
    }
    Candidate c;
    std::string qid = json_string(j, "question_id", where);
    std::string question = json_string(j, "question", where);
    c.doc_id = json_string(j, "doc_id", where);
    const json& si = require_field(j, "sent_index", where);
    if (!si.is_number_integer())
      throw parse_error(where + ": \"sent_index\" must be an integer");
    c.sent_index = si.get<int>();
    c.sentence = json_string(j, "sentence", where);
    const json& prev = require_field(j, "prev", where);
    if (prev.is_string()) c.prev = prev.get<std::string>();
    else if (!prev.is_null())
      throw parse_error(where + ": \"prev\" must be a string or null");
    const json& next = require_field(j, "next", where);
    if (next.is_string()) c.next = next.get<std::string>();
    else if (!next.is_null())
      throw parse_error(where + ": \"next\" must be a string or null");
    const json& label = require_field(j, "label", where);
    if (!label.is_number_integer() ||
        (label.get<int>() != 0 && label.get<int>() != 1))
      throw parse_error(where + ": \"label\" must be 0 or 1");
    c.label = label.get<int>();

    auto it = group_of.find(qid);
    if (it == group_of.end()) {
      group_of.emplace(qid, corpus.groups.size());
      QuestionGroup g;
      g.question_id = qid;
      g.question = question;
      corpus.groups.push_back(std::move(g));
      it = group_of.find(qid);
    } else if (corpus.groups[it->second].question != question) {
      throw parse_error(where + ": question text differs from earlier lines " +
                        "of question_id '" + qid + "'");
    }
    corpus.groups[it->second].candidates.push_back(std::move(c));
  }

  for (const QuestionGroup& g : corpus.groups) {
    if (g.question.empty())
      throw parse_error(pairs_path + ": empty question text for question_id '" +
                        g.question_id + "'");
    for (const Candidate& c : g.candidates) validate_candidate(corpus, g, c);
  }
  return corpus;
}

CorpusStats corpus_stats(const AS2Corpus& corpus) {
  CorpusStats s;
  s.n_questions = corpus.groups.size();
  s.n_documents = corpus.documents.size();
  for (const QuestionGroup& g : corpus.groups) {
    s.n_pairs += g.candidates.size();
    bool pos = false;
    for (const Candidate& c : g.candidates) {
      s.n_positive_pairs += static_cast<std::size_t>(c.label);
      pos = pos || c.label == 1;
    }
    s.n_groups_with_positive += pos ? 1 : 0;
  }
  s.avg_candidates_per_question =
      s.n_questions == 0
          ? 0.0
          : static_cast<double>(s.n_pairs) / static_cast<double>(s.n_questions);
  return s;
}

}  // namespace as2
