#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "as2/corpus.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* env = std::getenv("AS2RANK_BIN");
  return env ? env : "../tools/as2rank";
}

int run(const std::string& args) {
  int rc = std::system((bin() + " " + args + " > cli_out.txt 2> cli_err.txt")
                           .c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

const std::string kFixture =
    std::string(AS2_FIXTURES_DIR) + "/squad_small.json";

}  // namespace

TEST_CASE("cli: convert, train, eval, rank round trip") {
  fs::remove_all("cli_ws");
  fs::create_directories("cli_ws");

  CHECK(run("convert --squad " + kFixture + " --out cli_ws/corpus.jsonl") == 0);
  CHECK(fs::exists("cli_ws/corpus.jsonl"));
  CHECK(fs::exists("cli_ws/corpus.docs.jsonl"));
  CHECK(fs::exists("cli_ws/corpus.jsonl.manifest.json"));

  CHECK(run("convert --wikiqa-clean cli_ws/corpus.jsonl --out cli_ws/clean.jsonl") ==
        0);

  std::string train_args =
      "train --corpus cli_ws/clean.jsonl --dev cli_ws/clean.jsonl "
      "--variant base --out cli_ws/run --epochs 2 --runs 4 --batch-size 4 "
      "--d-model 16 --n-heads 2 --max-len 32 --seed 11";
  CHECK(run(train_args) == 0);
  // four run csvs plus the aggregate
  for (int r = 1; r <= 4; ++r)
    CHECK(fs::exists("cli_ws/run/metrics_run" + std::to_string(r) + ".csv"));
  CHECK(fs::exists("cli_ws/run/metrics_aggregate.csv"));
  CHECK(fs::exists("cli_ws/run/manifest.json"));

  // identical seeds reproduce the csv bytes
  std::string agg = slurp("cli_ws/run/metrics_aggregate.csv");
  CHECK(run("train --corpus cli_ws/clean.jsonl --dev cli_ws/clean.jsonl "
            "--variant base --out cli_ws/run2 --epochs 2 --runs 4 "
            "--batch-size 4 --d-model 16 --n-heads 2 --max-len 32 --seed 11") ==
        0);
  CHECK(slurp("cli_ws/run2/metrics_aggregate.csv") == agg);

  CHECK(run("eval --checkpoint cli_ws/run/checkpoint_run1_best.json "
            "--corpus cli_ws/clean.jsonl --out cli_ws/evald") == 0);
  CHECK(fs::exists("cli_ws/evald/per_question.tsv"));

  CHECK(run("rank --checkpoint cli_ws/run/checkpoint_run1_best.json "
            "--corpus cli_ws/clean.jsonl --question-id q1") == 0);
  CHECK(slurp("cli_out.txt").find("selected:") != std::string::npos);
}

TEST_CASE("cli: exit codes") {
  fs::create_directories("cli_ws");
  std::ofstream bad("cli_ws/bad.json");
  bad << "{this is not json";
  bad.close();
  CHECK(run("convert --squad cli_ws/bad.json --out cli_ws/x.jsonl") == 2);

  // unknown variant is a usage error (nonzero, not one of the typed codes)
  int usage = run("train --corpus a --dev b --variant nope --out c");
  CHECK(usage != 0);
  CHECK(usage != 2);
  CHECK(usage != 3);
  CHECK(usage != 4);

  // missing question id -> incompatibility
  CHECK(run("rank --checkpoint cli_ws/run/checkpoint_run1_best.json "
            "--corpus cli_ws/clean.jsonl --question-id missing-q") == 4);

  // missing documents sidecar is a parse failure
  CHECK(run("convert --squad " + kFixture + " --out cli_ws/g.jsonl") == 0);
  fs::remove("cli_ws/g.docs.jsonl");
  CHECK(run("eval --checkpoint cli_ws/run/checkpoint_run1_best.json "
            "--corpus cli_ws/g.jsonl") == 2);

  // tampered checkpoint (variant/shape mismatch) -> incompatibility
  std::string ck = slurp("cli_ws/run/checkpoint_run1_best.json");
  auto pos = ck.find("\"variant\":\"base\"");
  REQUIRE(pos != std::string::npos);
  ck.replace(pos, 16, "\"variant\":\"dual\"");
  std::ofstream tampered("cli_ws/tampered.json");
  tampered << ck;
  tampered.close();
  CHECK(run("eval --checkpoint cli_ws/tampered.json "
            "--corpus cli_ws/clean.jsonl") == 4);

  fs::remove_all("cli_ws");
  fs::remove("cli_out.txt");
  fs::remove("cli_err.txt");
}

TEST_CASE("cli: empty squad input yields an empty corpus, exit 0") {
  fs::create_directories("cli_ws2");
  std::ofstream empty("cli_ws2/empty.json");
  empty << "{\"data\": []}";
  empty.close();
  CHECK(run("convert --squad cli_ws2/empty.json --out cli_ws2/out.jsonl") == 0);
  CHECK(fs::file_size("cli_ws2/out.jsonl") == 0);
  fs::remove_all("cli_ws2");
}

TEST_CASE("cli: conversion output is byte-stable across runs") {
  fs::create_directories("cli_ws3");
  CHECK(run("convert --squad " + kFixture + " --out cli_ws3/a.jsonl") == 0);
  CHECK(run("convert --squad " + kFixture + " --out cli_ws3/b.jsonl") == 0);
  CHECK(slurp("cli_ws3/a.jsonl") == slurp("cli_ws3/b.jsonl"));
  CHECK(slurp("cli_ws3/a.docs.jsonl") == slurp("cli_ws3/b.docs.jsonl"));
  fs::remove_all("cli_ws3");
  fs::remove("cli_out.txt");
  fs::remove("cli_err.txt");
}

TEST_CASE("cli: a converged model evaluates at MAP 1.0") {
  fs::create_directories("cli_ws4");
  // one deciding token per candidate makes the task trivially separable
  as2::AS2Corpus corpus;
  for (int g = 0; g < 16; ++g) {
    as2::Document d;
    d.doc_id = "d" + std::to_string(g);
    d.sentences = {"this line is good .", "this line is bad ."};
    as2::QuestionGroup grp;
    grp.question_id = "q" + std::to_string(g);
    grp.question = "which line is good ?";
    for (int i = 0; i < 2; ++i) {
      as2::Candidate c;
      c.sentence = d.sentences[static_cast<std::size_t>(i)];
      c.doc_id = d.doc_id;
      c.sent_index = i;
      c.label = i == 0 ? 1 : 0;
      grp.candidates.push_back(c);
    }
    corpus.documents.emplace(d.doc_id, d);
    corpus.groups.push_back(grp);
  }
  corpus = as2::attach_context(std::move(corpus));
  as2::save_corpus(corpus, "cli_ws4/sep.jsonl");

  CHECK(run("train --corpus cli_ws4/sep.jsonl --dev cli_ws4/sep.jsonl "
            "--variant base --out cli_ws4/run --epochs 8 --runs 1 "
            "--batch-size 8 --d-model 16 --n-heads 2 --max-len 16 "
            "--lr 0.01 --seed 5") == 0);
  CHECK(run("eval --checkpoint cli_ws4/run/checkpoint_run1_best.json "
            "--corpus cli_ws4/sep.jsonl") == 0);
  CHECK(slurp("cli_out.txt").find("MAP 1.00000") != std::string::npos);
  fs::remove_all("cli_ws4");
  fs::remove("cli_out.txt");
  fs::remove("cli_err.txt");
}
