#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "drdoc/agents.hpp"
#include "drdoc/errors.hpp"

using namespace drdoc;
using nlohmann::json;

namespace {

struct CorpusEntry {
  std::string input;
  json expect;  // structured expectation, or the string "fail"
  int line = 0;
};

std::vector<CorpusEntry> load_corpus(const std::string& name) {
  std::string path = std::string(DRDOC_FIXTURES_DIR) + "/parses/" + name;
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open " << path);
  std::vector<CorpusEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row = json::parse(line);
    entries.push_back({row.at("input").get<std::string>(), row.at("expect"), line_no});
  }
  return entries;
}

// Runs one parser over the whole corpus. A labeled failure must raise exactly
// the parser's declared error type; anything else escaping is a defect.
template <typename Parse, typename Check>
void run_corpus(const std::string& name, Parse parse, Check check_success) {
  auto corpus = load_corpus(name);
  CHECK(corpus.size() >= 45);
  for (const auto& entry : corpus) {
    CAPTURE(entry.line);
    CAPTURE(entry.input);
    bool expect_fail = entry.expect.is_string() && entry.expect == "fail";
    try {
      auto result = parse(entry.input);
      CHECK_MESSAGE(!expect_fail, "parse succeeded but the corpus labels this a failure");
      if (!expect_fail) check_success(entry, result);
    } catch (const Error& e) {
      CHECK_MESSAGE(expect_fail, "declared-error failure on an entry labeled success: "
                                     << e.what());
    }
    // Any other exception type propagates and fails the test outright.
  }
}

}  // namespace

TEST_CASE("verdict corpus parses to its labels with no stray exceptions") {
  run_corpus("verdicts.jsonl",
             [](const std::string& text) { return parse_verdict(text); },
             [](const CorpusEntry& entry, const AgentVerdict& got) {
               CHECK(got.sufficient == entry.expect.at("sufficient").get<bool>());
               CHECK(got.explanation ==
                     entry.expect.at("explanation").get<std::vector<std::string>>());
             });
}

TEST_CASE("request corpus parses to its labels with no stray exceptions") {
  run_corpus("requests.jsonl",
             [](const std::string& text) { return parse_requests(text); },
             [](const CorpusEntry& entry, const std::vector<AugmentationRequest>& got) {
               REQUIRE(got.size() == entry.expect.size());
               for (size_t i = 0; i < got.size(); ++i) {
                 CHECK(got[i].frame_id == entry.expect[i].at("frame").get<int>());
                 CHECK(std::string(1, to_char(got[i].kind)) ==
                       entry.expect[i].at("type").get<std::string>());
               }
             });
}

TEST_CASE("answer corpus parses to its labels with no stray exceptions") {
  run_corpus("answers.jsonl",
             [](const std::string& text) { return parse_answer(text); },
             [](const CorpusEntry& entry, const AnswerRecord& got) {
               CHECK(std::string(1, got.letter) ==
                     entry.expect.at("letter").get<std::string>());
               CHECK(got.confidence == entry.expect.at("confidence").get<int>());
               CHECK(got.explanation ==
                     entry.expect.at("explanation").get<std::string>());
             });
}

TEST_CASE("the combined corpus is the documented ~150 entries") {
  size_t total = load_corpus("verdicts.jsonl").size() +
                 load_corpus("requests.jsonl").size() +
                 load_corpus("answers.jsonl").size();
  CHECK(total >= 145);
}
