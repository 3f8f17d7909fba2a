#include "synth.hpp"

#include <array>

#include "as2/rng.hpp"

namespace as2::testing {

namespace {

const std::array<const char*, 24> kNames = {
    "gaga",    "adele",  "prince", "bowie",  "madonna", "cher",
    "elvis",   "dylan",  "lennon", "marley", "rihanna", "drake",
    "beyonce", "usher",  "shakira", "sting", "bjork",   "enya",
    "moby",    "lorde",  "aaliyah", "brandy", "monica",  "nas"};

const std::array<const char*, 20> kYears = {
    "1960", "1962", "1964", "1966", "1968", "1970", "1972", "1974",
    "1976", "1978", "1980", "1982", "1984", "1986", "1988", "1990",
    "1992", "1994", "1996", "1998"};

const std::array<const char*, 16> kTopics = {
    "gardens",  "bridges", "glaciers", "volcanoes", "comets", "orchids",
    "falcons",  "whales",  "castles",  "deserts",   "rivers", "canyons",
    "lighthouses", "meadows", "harbors", "islands"};

// four distinct indices, the one at `positive` fixed to `target`
std::array<std::size_t, 4> pick_distinct(Rng& rng, std::size_t pool,
                                         std::size_t target,
                                         std::size_t positive) {
  std::array<std::size_t, 4> out{};
  std::array<bool, 64> used{};
  used[target] = true;
  out[positive] = target;
  for (std::size_t k = 0; k < 4; ++k) {
    if (k == positive) continue;
    std::size_t pick = rng.uniform_int(pool);
    while (used[pick]) pick = rng.uniform_int(pool);
    used[pick] = true;
    out[k] = pick;
  }
  return out;
}

void add_local_group(AS2Corpus& corpus, std::size_t g, std::size_t positive,
                     Rng& rng, const std::string& tag) {
  std::size_t name = rng.uniform_int(kNames.size());
  std::size_t year = rng.uniform_int(kYears.size());
  auto names = pick_distinct(rng, kNames.size(), name, positive);

  std::string target = std::string("she was born in ") + kYears[year] + " .";
  std::string next = "fans loved the song .";

  Document doc;
  doc.doc_id = tag + "-doc-" + std::to_string(g);
  QuestionGroup group;
  group.question_id = tag + "-q-" + std::to_string(g);
  group.question = std::string("when was ") + kNames[name] + " born ?";
  for (std::size_t k = 0; k < 4; ++k) {
    doc.sentences.push_back(std::string(kNames[names[k]]) + " sang many hits .");
    doc.sentences.push_back(target);
    doc.sentences.push_back(next);
    Candidate c;
    c.sentence = target;
    c.doc_id = doc.doc_id;
    c.sent_index = static_cast<int>(3 * k + 1);
    c.label = k == positive ? 1 : 0;
    group.candidates.push_back(std::move(c));
  }
  corpus.documents.emplace(doc.doc_id, std::move(doc));
  corpus.groups.push_back(std::move(group));
}

void add_global_group(AS2Corpus& corpus, std::size_t g, std::size_t positive,
                      Rng& rng, const std::string& tag) {
  std::size_t topic = rng.uniform_int(kTopics.size());

  std::string target = "the answer is right here .";
  QuestionGroup group;
  group.question_id = tag + "-q-" + std::to_string(g);
  group.question = std::string("where is ") + kTopics[topic] + " discussed ?";
  for (std::size_t k = 0; k < 4; ++k) {
    Document doc;
    doc.doc_id = tag + "-doc-" + std::to_string(g) + "-" + std::to_string(k);
    std::size_t doc_topic = rng.uniform_int(kTopics.size());
    doc.sentences.push_back(std::string("people talk about ") +
                            kTopics[doc_topic] + " here .");
    doc.sentences.push_back(target);
    doc.sentences.push_back("readers come back often .");
    if (k == positive) {
      doc.sentences.push_back("the archive keeps verified records .");
      doc.sentences.push_back("curators retain official transcripts .");
    } else {
      doc.sentences.push_back("the forum hosts casual chatter .");
      doc.sentences.push_back("people post random comments .");
    }
    Candidate c;
    c.sentence = target;
    c.doc_id = doc.doc_id;
    c.sent_index = 1;
    c.label = k == positive ? 1 : 0;
    group.candidates.push_back(std::move(c));
    corpus.documents.emplace(doc.doc_id, std::move(doc));
  }
  corpus.groups.push_back(std::move(group));
}

}  // namespace

SynthSplit make_local_task(std::size_t n_train, std::size_t n_dev,
                           std::uint64_t seed) {
  SynthSplit s;
  Rng train_rng(derive_seed(seed, 1));
  for (std::size_t g = 0; g < n_train; ++g)
    add_local_group(s.train, g, g % 4, train_rng, "local-train");
  Rng dev_rng(derive_seed(seed, 2));
  for (std::size_t g = 0; g < n_dev; ++g)
    add_local_group(s.dev, g, g % 4, dev_rng, "local-dev");
  s.train = attach_context(std::move(s.train));
  s.dev = attach_context(std::move(s.dev));
  return s;
}

SynthSplit make_global_task(std::size_t n_train, std::size_t n_dev,
                            std::uint64_t seed) {
  SynthSplit s;
  Rng train_rng(derive_seed(seed, 3));
  for (std::size_t g = 0; g < n_train; ++g)
    add_global_group(s.train, g, g % 4, train_rng, "glob-train");
  Rng dev_rng(derive_seed(seed, 4));
  for (std::size_t g = 0; g < n_dev; ++g)
    add_global_group(s.dev, g, g % 4, dev_rng, "glob-dev");
  s.train = attach_context(std::move(s.train));
  s.dev = attach_context(std::move(s.dev));
  return s;
}

SynthSplit make_mixed_task(std::size_t n_train, std::size_t n_dev,
                           std::uint64_t seed) {
  SynthSplit s;
  Rng train_rng(derive_seed(seed, 5));
  for (std::size_t g = 0; g < n_train; ++g) {
    std::size_t positive = (g / 2) % 4;  // cycle within each style
    if (g % 2 == 0) add_local_group(s.train, g, positive, train_rng, "mixed-train");
    else add_global_group(s.train, g, positive, train_rng, "mixed-train");
  }
  Rng dev_rng(derive_seed(seed, 6));
  for (std::size_t g = 0; g < n_dev; ++g) {
    std::size_t positive = (g / 2) % 4;
    if (g % 2 == 0) add_local_group(s.dev, g, positive, dev_rng, "mixed-dev");
    else add_global_group(s.dev, g, positive, dev_rng, "mixed-dev");
  }
  s.train = attach_context(std::move(s.train));
  s.dev = attach_context(std::move(s.dev));
  return s;
}

}  // namespace as2::testing
