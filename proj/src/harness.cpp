#include "drdoc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "drdoc/agents.hpp"
#include "drdoc/errors.hpp"

namespace drdoc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument(std::string(what) + " not found: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string resolve_path(const std::string& base_dir, const std::string& ref) {
  fs::path p(ref);
  if (p.is_absolute() || base_dir.empty()) return ref;
  return (fs::path(base_dir) / p).string();
}

// Calls fn(line_number, parsed_object) for every non-blank line.
template <typename Fn>
void for_each_jsonl_line(const std::string& text, Fn fn) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded()) throw SchemaError(line_no, "json", "line is not valid JSON");
    if (!parsed.is_object()) throw SchemaError(line_no, "json", "line is not a JSON object");
    fn(line_no, parsed);
  }
}

std::string require_string(const json& obj, const char* field, int line) {
  if (!obj.contains(field) || !obj[field].is_string()) {
    throw SchemaError(line, field, "required string field");
  }
  std::string value = obj[field].get<std::string>();
  if (value.empty()) throw SchemaError(line, field, "must not be empty");
  return value;
}

bool filename_safe(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) != 0 || c == '.' || c == '_' || c == '-';
  });
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

// ---- dataset ingestion ----

std::vector<QAItem> load_dataset(const std::string& path) {
  const std::string text = read_text_file(path, "dataset file");
  std::vector<QAItem> items;
  for_each_jsonl_line(text, [&](int line, const json& obj) {
    QAItem item;
    item.video_id = require_string(obj, "video_id", line);
    item.question = require_string(obj, "question", line);

    if (!obj.contains("options") || !obj["options"].is_array()) {
      throw SchemaError(line, "options", "required array field");
    }
    const auto& options = obj["options"];
    if (options.size() < 2 || options.size() > 6) {
      throw SchemaError(line, "options",
                        "expected 2..6 options, got " + std::to_string(options.size()));
    }
    for (const auto& option : options) {
      if (!option.is_string()) throw SchemaError(line, "options", "options must be strings");
      item.options.push_back(option.get<std::string>());
    }

    if (obj.contains("gold") && !obj["gold"].is_null()) {
      if (!obj["gold"].is_string() || obj["gold"].get<std::string>().size() != 1) {
        throw SchemaError(line, "gold", "expected a single letter");
      }
      const char letter =
          static_cast<char>(std::toupper(static_cast<unsigned char>(obj["gold"].get<std::string>()[0])));
      const char max_letter = static_cast<char>('A' + item.options.size() - 1);
      if (letter < 'A' || letter > max_letter) {
        throw SchemaError(line, "gold",
                          std::string("letter '") + obj["gold"].get<std::string>() +
                              "' outside the " + std::to_string(item.options.size()) +
                              "-option range");
      }
      item.gold_letter = letter;
    }

    item.captions_ref = require_string(obj, "captions", line);

    if (obj.contains("subtitles") && !obj["subtitles"].is_null()) {
      if (!obj["subtitles"].is_string()) throw SchemaError(line, "subtitles", "expected a path");
      item.subtitles_ref = obj["subtitles"].get<std::string>();
    }

    if (obj.contains("frame_range") && !obj["frame_range"].is_null()) {
      const auto& range = obj["frame_range"];
      if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() ||
          !range[1].is_number_integer()) {
        throw SchemaError(line, "frame_range", "expected [first, last]");
      }
      const int lo = range[0].get<int>();
      const int hi = range[1].get<int>();
      if (lo < 1 || hi < lo) throw SchemaError(line, "frame_range", "need 1 <= first <= last");
      item.frame_range = {lo, hi};
    }

    items.push_back(std::move(item));
  });
  return items;
}

// ---- caption cache management ----

std::vector<VideoCaptionStatus> precaption(const std::string& manifest_path,
                                           CaptionBackend& captioner, double fps,
                                           const std::string& cache_dir) {
  if (fps <= 0.0) throw std::invalid_argument("fps must be positive");
  const std::string text = read_text_file(manifest_path, "manifest file");

  struct Entry {
    std::string video_id;
    int target = 0;
  };
  std::vector<Entry> entries;
  for_each_jsonl_line(text, [&](int line, const json& obj) {
    Entry entry;
    entry.video_id = require_string(obj, "video_id", line);
    if (!filename_safe(entry.video_id)) {
      throw SchemaError(line, "video_id", "must use only [A-Za-z0-9._-]");
    }
    for (const Entry& prior : entries) {
      if (prior.video_id == entry.video_id) {
        throw SchemaError(line, "video_id", "duplicate video '" + entry.video_id + "'");
      }
    }
    if (obj.contains("frame_count")) {
      if (!obj["frame_count"].is_number_integer() || obj["frame_count"].get<int>() < 1) {
        throw SchemaError(line, "frame_count", "expected a positive integer");
      }
      entry.target = obj["frame_count"].get<int>();
    } else if (obj.contains("duration_seconds")) {
      if (!obj["duration_seconds"].is_number() || obj["duration_seconds"].get<double>() <= 0.0) {
        throw SchemaError(line, "duration_seconds", "expected a positive number");
      }
      entry.target = sample_count(obj["duration_seconds"].get<double>(), fps);
    } else {
      throw SchemaError(line, "duration_seconds", "need duration_seconds or frame_count");
    }
    entries.push_back(std::move(entry));
  });

  fs::create_directories(cache_dir);

  std::vector<VideoCaptionStatus> statuses;
  for (const Entry& entry : entries) {
    VideoCaptionStatus status;
    status.video_id = entry.video_id;
    status.target_frames = entry.target;
    const std::string cache_path =
        (fs::path(cache_dir) / (entry.video_id + ".doc.jsonl")).string();

    VideoDocument doc;
    if (fs::exists(cache_path)) {
      doc = load_file(cache_path);
      if (doc.video_id != entry.video_id) {
        status.cached_frames = doc.total_frames();
        status.error = "cache holds video '" + doc.video_id + "'";
        statuses.push_back(std::move(status));
        continue;
      }
    } else {
      doc.video_id = entry.video_id;
      doc.fps = fps;
    }

    bool appended = false;
    for (int f = doc.total_frames() + 1; f <= entry.target; ++f) {
      ++status.new_calls;
      try {
        std::string caption = captioner.caption(make_frame_ref(entry.video_id, f),
                                                kShortCaptionPrompt);
        doc.frames.push_back({f, std::move(caption), std::nullopt, std::nullopt, std::nullopt});
        appended = true;
      } catch (const Error& e) {
        status.error = e.what();
        break;
      }
    }
    if (appended) save_file(doc, cache_path);
    status.cached_frames = doc.total_frames();
    statuses.push_back(std::move(status));
  }
  return statuses;
}

// ---- subtitles and frame windows ----

std::vector<SubtitleCue> load_subtitles(const std::string& path) {
  const std::string text = read_text_file(path, "subtitle file");
  std::vector<SubtitleCue> cues;
  for_each_jsonl_line(text, [&](int line, const json& obj) {
    SubtitleCue cue;
    if (!obj.contains("start") || !obj["start"].is_number()) {
      throw SchemaError(line, "start", "required number field");
    }
    if (!obj.contains("end") || !obj["end"].is_number()) {
      throw SchemaError(line, "end", "required number field");
    }
    cue.start_seconds = obj["start"].get<double>();
    cue.end_seconds = obj["end"].get<double>();
    if (cue.start_seconds < 0.0 || cue.end_seconds < cue.start_seconds) {
      throw SchemaError(line, "end", "need 0 <= start <= end");
    }
    cue.text = require_string(obj, "text", line);
    cues.push_back(std::move(cue));
  });
  return cues;
}

VideoDocument attach_subtitles(const VideoDocument& doc, const std::vector<SubtitleCue>& cues) {
  VideoDocument out = doc;
  for (const FrameRecord& frame : doc.frames) {
    const double t = static_cast<double>(frame.frame_id - 1) / doc.fps;
    std::string joined;
    for (const SubtitleCue& cue : cues) {
      if (cue.start_seconds <= t && t <= cue.end_seconds) {
        if (!joined.empty()) joined += " ";
        joined += cue.text;
      }
    }
    if (!joined.empty()) out = with_subtitle(out, frame.frame_id, joined);
  }
  return out;
}

VideoDocument slice_frames(const VideoDocument& doc, int lo, int hi) {
  if (lo < 1 || hi < lo || hi > doc.total_frames()) {
    throw std::invalid_argument("frame range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                "] outside document with " +
                                std::to_string(doc.total_frames()) + " frames");
  }
  VideoDocument out;
  out.video_id = doc.video_id;
  out.fps = doc.fps;
  for (int f = lo; f <= hi; ++f) {
    FrameRecord frame = doc.frame(f);
    frame.frame_id = f - lo + 1;
    out.frames.push_back(std::move(frame));
  }
  return out;
}

namespace {

class OffsetCaptioner final : public CaptionBackend {
 public:
  OffsetCaptioner(std::shared_ptr<CaptionBackend> inner, int offset)
      : inner_(std::move(inner)), offset_(offset) {}

  std::string caption(const std::string& frame_ref, const std::string& prompt) override {
    const auto hash_pos = frame_ref.rfind('#');
    if (hash_pos != std::string::npos && hash_pos + 1 < frame_ref.size()) {
      const std::string digits = frame_ref.substr(hash_pos + 1);
      if (std::all_of(digits.begin(), digits.end(),
                      [](unsigned char c) { return std::isdigit(c) != 0; })) {
        const long long original = std::stoll(digits) + offset_;
        return inner_->caption(frame_ref.substr(0, hash_pos + 1) + std::to_string(original),
                               prompt);
      }
    }
    return inner_->caption(frame_ref, prompt);
  }

 private:
  std::shared_ptr<CaptionBackend> inner_;
  int offset_;
};

}  // namespace

std::shared_ptr<CaptionBackend> make_offset_captioner(std::shared_ptr<CaptionBackend> inner,
                                                      int offset) {
  if (inner == nullptr) throw std::invalid_argument("offset captioner requires a backend");
  return std::make_shared<OffsetCaptioner>(std::move(inner), offset);
}

VideoDocument load_item_document(const QAItem& item, const std::string& base_dir) {
  const std::string cache_path = resolve_path(base_dir, item.captions_ref);
  if (!fs::exists(cache_path)) throw MissingCache(item.video_id);
  VideoDocument doc = load_file(cache_path);
  if (doc.video_id != item.video_id) {
    throw CorruptDocument("cache at " + cache_path + " holds video '" + doc.video_id +
                          "', item expects '" + item.video_id + "'");
  }
  if (item.subtitles_ref) {
    doc = attach_subtitles(doc, load_subtitles(resolve_path(base_dir, *item.subtitles_ref)));
  }
  if (item.frame_range) {
    const auto [lo, hi] = *item.frame_range;
    if (hi > doc.total_frames()) {
      throw std::invalid_argument("frame_range [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "] for video '" + item.video_id +
                                  "' exceeds its " + std::to_string(doc.total_frames()) +
                                  " frames");
    }
    doc = slice_frames(doc, lo, hi);
  }
  return doc;
}

// ---- batch evaluation ----

namespace {

int count_plan_steps(const json& trace) {
  int n = 0;
  if (trace.contains("steps")) {
    for (const auto& step : trace["steps"]) {
      if (step.value("step", "") == "plan") ++n;
    }
  }
  return n;
}

}  // namespace

EvalReport evaluate(const std::vector<QAItem>& items, const RunConfig& config,
                    const std::function<Backends()>& backend_factory,
                    const EvalOptions& options) {
  if (options.concurrency < 1) throw std::invalid_argument("concurrency must be >= 1");
  if (!backend_factory) throw std::invalid_argument("backend factory must be callable");

  // Resolve every document before touching any backend, so cache problems
  // surface as exceptions rather than half-finished reports.
  std::vector<VideoDocument> documents;
  documents.reserve(items.size());
  for (const QAItem& item : items) {
    documents.push_back(load_item_document(item, options.dataset_dir));
  }
  if (!options.trace_dir.empty()) fs::create_directories(options.trace_dir);

  std::vector<ItemResult> results(items.size());
  std::atomic<std::size_t> next{0};

  auto run_one = [&](std::size_t index) {
    const QAItem& item = items[index];
    ItemResult result;
    result.item_index = static_cast<int>(index);
    result.video_id = item.video_id;

    RunConfig item_config = config;
    item_config.option_count = static_cast<int>(item.options.size());
    Backends backends = backend_factory();
    if (item.frame_range) {
      backends.captioner = make_offset_captioner(backends.captioner, item.frame_range->first - 1);
    }

    try {
      RunOutcome outcome = run(documents[index], item.question, item.options, item_config, backends);
      result.status = outcome.status;
      result.rounds = count_plan_steps(outcome.trace);
      result.call_counts = outcome.trace["call_counts"];
      if (outcome.answer) {
        result.predicted = std::string(1, outcome.answer->letter);
        result.confidence = outcome.answer->confidence;
      }
      if (outcome.status == "error") {
        result.error = outcome.trace["error"]["message"].get<std::string>();
      }
      if (!options.trace_dir.empty()) {
        const std::string name = item.video_id + "_" + std::to_string(index) + ".trace.json";
        std::ofstream out(fs::path(options.trace_dir) / name, std::ios::binary);
        out << trace_to_string(outcome.trace);
        result.trace_file = name;
      }
    } catch (const std::exception& e) {
      // Precondition-level failures (bad wiring) still yield a report row.
      result.status = "error";
      result.error = e.what();
    }
    if (item.gold_letter) {
      result.correct = result.predicted == std::string(1, *item.gold_letter);
    }
    return result;
  };

  const std::size_t worker_count =
      std::min<std::size_t>(static_cast<std::size_t>(options.concurrency), items.size());
  if (worker_count <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) results[i] = run_one(i);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < worker_count; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          const std::size_t index = next.fetch_add(1);
          if (index >= results.size()) return;
          results[index] = run_one(index);
        }
      });
    }
    for (std::thread& worker : workers) worker.join();
  }

  EvalReport report;
  for (ItemResult& result : results) {
    report.status_counts[result.status] += 1;
    if (result.correct.has_value()) {
      report.labeled += 1;
      if (*result.correct) report.correct_count += 1;
    }
    report.items.push_back(std::move(result));
  }
  if (report.labeled > 0) {
    report.accuracy = static_cast<double>(report.correct_count) / report.labeled;
  }
  return report;
}

nlohmann::json EvalReport::to_json() const {
  json out;
  out["report"] = "drdoc-eval-v1";
  out["accuracy"] = accuracy.has_value() ? json(*accuracy) : json(nullptr);
  out["labeled"] = labeled;
  out["correct"] = correct_count;
  json counts = json::object();
  for (const auto& [status, count] : status_counts) counts[status] = count;
  out["status_counts"] = counts;
  json rows = json::array();
  for (const ItemResult& item : items) {
    rows.push_back({{"index", item.item_index},
                    {"video_id", item.video_id},
                    {"status", item.status},
                    {"predicted", item.predicted},
                    {"confidence", item.confidence},
                    {"correct", item.correct.has_value() ? json(*item.correct) : json(nullptr)},
                    {"rounds", item.rounds},
                    {"call_counts", item.call_counts.is_null() ? json(nullptr) : item.call_counts},
                    {"trace_file", item.trace_file},
                    {"error", item.error}});
  }
  out["items"] = rows;
  return out;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char row[256];
  std::snprintf(row, sizeof(row), "%5s  %-20s  %-16s  %-4s  %-7s  %s\n", "index", "video",
                "status", "pred", "correct", "rounds");
  out << row;
  for (const ItemResult& item : items) {
    const std::string correct =
        item.correct.has_value() ? (*item.correct ? "yes" : "no") : "-";
    std::snprintf(row, sizeof(row), "%5d  %-20s  %-16s  %-4s  %-7s  %d\n", item.item_index,
                  item.video_id.c_str(), item.status.c_str(),
                  item.predicted.empty() ? "-" : item.predicted.c_str(), correct.c_str(),
                  item.rounds);
    out << row;
  }
  if (accuracy.has_value()) {
    std::snprintf(row, sizeof(row), "accuracy: %.3f (%d/%d labeled)\n", *accuracy, correct_count,
                  labeled);
    out << row;
  } else {
    out << "accuracy: n/a (0 labeled)\n";
  }
  return out.str();
}

// ---- trace replay ----

std::vector<std::string> replay_trace(const nlohmann::json& trace) {
  std::vector<std::string> mismatches = verify_trace(trace);
  if (!trace.is_object() || !trace.contains("steps") || !trace["steps"].is_array()) {
    return mismatches;
  }
  const int k = trace.contains("config") ? trace["config"].value("k", 0) : 0;
  const std::string augment_types =
      trace.contains("config") ? trace["config"].value("augment_types", "AB") : "AB";
  const int total_frames = trace.value("total_frames", 0);
  const int option_count =
      trace.contains("options") ? static_cast<int>(trace["options"].size()) : 0;

  std::set<int> held_a;
  std::set<int> held_b;
  int step_index = 0;
  for (const auto& step : trace["steps"]) {
    const std::string kind = step.value("step", "");
    const std::string at = "step " + std::to_string(step_index);
    const bool errored = step.value("outcome", "") == "error";

    auto completions = [&]() -> std::vector<std::string> {
      std::vector<std::string> out;
      if (step.contains("completions")) {
        for (const auto& completion : step["completions"]) out.push_back(completion.get<std::string>());
      }
      return out;
    }();

    if (kind == "plan") {
      for (std::size_t i = 0; i + 1 < completions.size(); ++i) {
        try {
          parse_verdict(completions[i]);
          mismatches.push_back(at + ": retried completion " + std::to_string(i) +
                               " now parses as a verdict");
        } catch (const Error&) {
        }
      }
      if (!errored && !completions.empty()) {
        try {
          AgentVerdict verdict = parse_verdict(completions.back());
          json expect = step.at("verdict");
          if (verdict.sufficient != expect.at("sufficient").get<bool>() ||
              verdict.explanation != expect.at("explanation").get<std::vector<std::string>>()) {
            mismatches.push_back(at + ": verdict parses differently now");
          }
        } catch (const Error& e) {
          mismatches.push_back(at + ": recorded verdict no longer parses: " + e.what());
        }
      } else if (errored && !completions.empty()) {
        try {
          parse_verdict(completions.back());
          mismatches.push_back(at + ": failed step's completion now parses");
        } catch (const Error&) {
        }
      }
    } else if (kind == "interact") {
      for (std::size_t i = 0; i + 1 < completions.size(); ++i) {
        try {
          parse_requests(completions[i]);
          mismatches.push_back(at + ": retried completion " + std::to_string(i) +
                               " now parses as requests");
        } catch (const Error&) {
        }
      }
      if (!errored && !completions.empty()) {
        try {
          auto requests = parse_requests(completions.back());
          requests = validate_requests(requests, held_a, held_b, total_frames, k);
          if (augment_types != "AB") {
            const AugmentationType disabled =
                augment_types == "A" ? AugmentationType::B : AugmentationType::A;
            std::erase_if(requests,
                          [&](const AugmentationRequest& r) { return r.kind == disabled; });
          }
          json expect = step.at("requests");
          bool same = requests.size() == expect.size();
          for (std::size_t i = 0; same && i < requests.size(); ++i) {
            same = requests[i].frame_id == expect[i].at("frame").get<int>() &&
                   std::string(1, to_char(requests[i].kind)) ==
                       expect[i].at("type").get<std::string>();
          }
          if (!same) mismatches.push_back(at + ": request list derives differently now");
        } catch (const Error& e) {
          mismatches.push_back(at + ": recorded requests no longer parse: " + e.what());
        }
      }
    } else if (kind == "answer") {
      const char max_letter = static_cast<char>('A' + option_count - 1);
      for (std::size_t i = 0; i + 1 < completions.size(); ++i) {
        try {
          AnswerRecord earlier = parse_answer(completions[i]);
          if (earlier.letter >= 'A' && earlier.letter <= max_letter) {
            mismatches.push_back(at + ": retried completion " + std::to_string(i) +
                                 " now parses to an in-range letter");
          }
        } catch (const Error&) {
        }
      }
      if (!errored && !completions.empty()) {
        try {
          AnswerRecord record = parse_answer(completions.back());
          json expect = step.at("answer");
          if (std::string(1, record.letter) != expect.at("letter").get<std::string>() ||
              record.confidence != expect.at("confidence").get<int>() ||
              record.explanation != expect.at("explanation").get<std::string>()) {
            mismatches.push_back(at + ": answer parses differently now");
          }
        } catch (const Error& e) {
          mismatches.push_back(at + ": recorded answer no longer parses: " + e.what());
        }
      }
    } else if (kind == "augment") {
      const char type = step.at("type").get<std::string>().at(0);
      (type == 'A' ? held_a : held_b).insert(step.at("frame").get<int>());
    }
    ++step_index;
  }
  return mismatches;
}

// ---- configuration files ----

namespace {

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + value +
                                "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value +
                                "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + value +
                              "'");
}

// Applies one backend.<field> assignment to a single role config.
bool apply_backend_field(BackendConfig& config, const std::string& field, const std::string& key,
                         const std::string& value) {
  if (field == "endpoint") {
    config.endpoint = value;
  } else if (field == "model") {
    config.model_name = value;
  } else if (field == "temperature") {
    config.temperature = parse_double(key, value);
  } else if (field == "max_retries") {
    config.max_retries = parse_int(key, value);
  } else if (field == "timeout_s") {
    config.timeout_seconds = parse_int(key, value);
  } else if (field == "backoff_ms") {
    config.backoff_base_ms = parse_int(key, value);
  } else if (field == "api_key") {
    config.api_key = value;
  } else {
    return false;
  }
  return true;
}

}  // namespace

HarnessConfig parse_config_text(const std::string& text) {
  HarnessConfig config;
  std::istringstream in(text);
  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    const auto comment = raw_line.find('#');
    if (comment != std::string::npos) raw_line.erase(comment);
    const std::string line = trim(raw_line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    }

    if (key == "k") {
      config.run.k = parse_int(key, value);
    } else if (key == "max_rounds") {
      config.run.max_rounds = parse_int(key, value);
    } else if (key == "fps") {
      config.run.fps = parse_double(key, value);
    } else if (key == "option_count") {
      config.run.option_count = parse_int(key, value);
    } else if (key == "augment_types") {
      if (value == "A") {
        config.run.enable_type_a = true;
        config.run.enable_type_b = false;
      } else if (value == "B") {
        config.run.enable_type_a = false;
        config.run.enable_type_b = true;
      } else if (value == "AB") {
        config.run.enable_type_a = true;
        config.run.enable_type_b = true;
      } else {
        throw std::invalid_argument("config key 'augment_types': expected A, B, or AB, got '" +
                                    value + "'");
      }
    } else if (key == "include_subtitles") {
      config.run.include_subtitles = parse_bool(key, value);
    } else if (key == "backend.mode") {
      if (value != "scripted" && value != "http") {
        throw std::invalid_argument("config key 'backend.mode': expected scripted or http");
      }
      config.backend.mode = value;
    } else if (key == "backend.script") {
      config.backend.script_path = value;
    } else if (key == "backend.embed.dimension") {
      config.backend.scripted.embed_dimension = parse_int(key, value);
    } else if (key.rfind("backend.", 0) == 0) {
      const std::string rest = key.substr(8);
      const auto dot = rest.find('.');
      bool applied = false;
      if (dot == std::string::npos) {
        // All-role default.
        applied = apply_backend_field(config.backend.http.plan, rest, key, value);
        if (applied) {
          apply_backend_field(config.backend.http.interact, rest, key, value);
          apply_backend_field(config.backend.http.answer, rest, key, value);
          apply_backend_field(config.backend.http.caption, rest, key, value);
          apply_backend_field(config.backend.http.embed, rest, key, value);
        }
      } else {
        const std::string role = rest.substr(0, dot);
        const std::string field = rest.substr(dot + 1);
        BackendConfig* target = role == "plan"       ? &config.backend.http.plan
                                : role == "interact" ? &config.backend.http.interact
                                : role == "answer"   ? &config.backend.http.answer
                                : role == "caption"  ? &config.backend.http.caption
                                : role == "embed"    ? &config.backend.http.embed
                                                     : nullptr;
        if (target != nullptr) applied = apply_backend_field(*target, field, key, value);
      }
      if (!applied) throw std::invalid_argument("unknown config key '" + key + "'");
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  return config;
}

HarnessConfig load_config(const std::string& path) {
  return parse_config_text(read_text_file(path, "config file"));
}

std::function<Backends()> make_backend_factory(const BackendSetup& setup,
                                               const std::string& base_dir) {
  if (setup.mode == "scripted") {
    auto script = std::make_shared<Script>();
    if (!setup.script_path.empty()) {
      *script = Script::load_file(resolve_path(base_dir, setup.script_path));
    }
    const ScriptedOptions options = setup.scripted;
    return [script, options] { return make_scripted_backends(script, options); };
  }
  if (setup.mode == "http") {
    const HttpBackendConfigs configs = setup.http;
    return [configs] { return make_http_backends(configs); };
  }
  throw std::invalid_argument("unknown backend mode '" + setup.mode + "'");
}

}  // namespace drdoc
