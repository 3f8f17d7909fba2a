#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "as2/errors.hpp"
#include "as2/text.hpp"

namespace as2 {

struct Document {
  std::string doc_id;
  std::optional<std::string> title;
  std::vector<std::string> sentences;  // source order, never empty
};

struct Candidate {
  std::string sentence;
  std::optional<std::string> prev;  // absent iff sent_index == 0
  std::optional<std::string> next;  // absent iff last in document
  std::string doc_id;
  int sent_index = 0;
  int label = 0;  // 0 or 1
};

struct QuestionGroup {
  std::string question_id;
  std::string question;
  std::vector<Candidate> candidates;
};

struct AS2Corpus {
  std::vector<QuestionGroup> groups;
  std::map<std::string, Document> documents;
};

// Sentence span over the source paragraph; [begin, end) covers the trimmed
// sentence text, so paragraph.substr(begin, end - begin) == text.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string text;
};

// Splits after . ? ! when followed by whitespace and an uppercase letter or
// digit. Abbreviations before lowercase words do not split (documented
// limitation).
std::vector<SentenceSpan> split_sentences(const std::string& paragraph);

struct ConvertStats {
  std::size_t n_articles = 0;
  std::size_t n_paragraphs = 0;
  std::size_t n_questions = 0;
  std::size_t n_pairs = 0;
  std::size_t n_positive_pairs = 0;
  std::vector<std::string> warnings;
};

// SQuAD 1.1 json -> AS2 corpus: every paragraph sentence becomes a candidate,
// labeled 1 iff an annotated answer span overlaps it. Context windows are
// attached from neighboring sentences.
AS2Corpus convert_squad(const std::string& squad_json_text,
                        ConvertStats* stats = nullptr);
AS2Corpus convert_squad_file(const std::string& path,
                             ConvertStats* stats = nullptr);

// ASNQ-style TSV adapter (question \t sentence \t label). Consecutive rows
// with the same question form one group and one synthetic document. Labels
// may be binary or ASNQ's 1..4 scale, where only 4 is a positive.
AS2Corpus convert_asnq_tsv(const std::string& path,
                           ConvertStats* stats = nullptr);

// Clean setting: keep exactly the groups with at least one positive and one
// negative candidate. Unreferenced documents are dropped.
AS2Corpus filter_clean(const AS2Corpus& corpus);

// Populate prev/next from the owning documents. Labels, sentence text, and
// group membership are untouched.
AS2Corpus attach_context(AS2Corpus corpus);

// Token counts over all sentences of a document. Out-of-vocabulary tokens
// count under [UNK]; other reserved ids never appear.
std::map<int, std::size_t> doc_bow(const Document& doc, const Vocabulary& vocab);

// JSONL persistence. The pairs file has one candidate per line; documents go
// to a sidecar (default: pairs path with .jsonl replaced by .docs.jsonl).
std::string default_docs_path(const std::string& pairs_path);
void save_corpus(const AS2Corpus& corpus, const std::string& pairs_path,
                 const std::string& docs_path = "");
AS2Corpus load_corpus(const std::string& pairs_path,
                      const std::string& docs_path = "");

struct CorpusStats {
  std::size_t n_questions = 0;
  std::size_t n_pairs = 0;
  std::size_t n_positive_pairs = 0;
  std::size_t n_groups_with_positive = 0;
  std::size_t n_documents = 0;
  double avg_candidates_per_question = 0.0;
};

CorpusStats corpus_stats(const AS2Corpus& corpus);

}  // namespace as2
