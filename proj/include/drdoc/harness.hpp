#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drdoc/backends.hpp"
#include "drdoc/docmodel.hpp"
#include "drdoc/pipeline.hpp"

namespace drdoc {

// ---- dataset ingestion ----

// One multiple-choice question over a pre-captioned video. Path refs are
// resolved relative to the dataset file's directory.
struct QAItem {
  std::string video_id;
  std::string question;
  std::vector<std::string> options;            // 2..6 entries
  std::optional<char> gold_letter;             // within the option range
  std::string captions_ref;                    // cached document (JSON Lines)
  std::optional<std::string> subtitles_ref;    // cue list (JSON Lines)
  std::optional<std::pair<int, int>> frame_range;  // inclusive 1-based window
};

// JSON Lines, one item per line:
//   {"video_id": "...", "question": "...", "options": [...], "gold": "B",
//    "captions": "caches/v.doc.jsonl", "subtitles": "subs/v.jsonl",
//    "frame_range": [10, 40]}
// gold, subtitles, and frame_range are optional. Throws SchemaError with the
// 1-based line number of the offending entry.
std::vector<QAItem> load_dataset(const std::string& path);

// ---- caption cache management ----

// Prompt used to produce the per-frame short captions.
inline constexpr char kShortCaptionPrompt[] = "describe the picture in no more than 50 words";

// Caption-cache pass over one manifest entry.
struct VideoCaptionStatus {
  std::string video_id;
  int target_frames = 0;  // frames the finished cache should hold
  int cached_frames = 0;  // frames on disk after this pass
  int new_calls = 0;      // captioner calls made during this pass
  std::string error;      // empty on success; cache still valid on failure
};

// Manifest is JSON Lines: {"video_id": "...", "duration_seconds": 180.0} or
// {"video_id": "...", "frame_count": 90}. Each video gets a cached document at
// {cache_dir}/{video_id}.doc.jsonl holding frames 1..N in order. Reruns load
// the existing cache and caption only the missing tail, so a completed cache
// costs zero captioner calls and an interrupted one resumes where it stopped.
// A captioner failure is recorded in that video's status (the partial cache
// stays valid) and the pass moves on to the next video.
std::vector<VideoCaptionStatus> precaption(const std::string& manifest_path,
                                           CaptionBackend& captioner, double fps,
                                           const std::string& cache_dir);

// ---- subtitles and frame windows ----

struct SubtitleCue {
  double start_seconds = 0.0;
  double end_seconds = 0.0;
  std::string text;
};

// JSON Lines: {"start": 3.0, "end": 7.5, "text": "..."}. Throws SchemaError.
std::vector<SubtitleCue> load_subtitles(const std::string& path);

// Attaches cues to frames by timestamp: frame f sits at (f-1)/fps seconds and
// picks up every cue whose [start, end] covers that instant, joined with
// single spaces in cue order.
VideoDocument attach_subtitles(const VideoDocument& doc, const std::vector<SubtitleCue>& cues);

// Restricts a document to frames lo..hi (inclusive), renumbered 1..(hi-lo+1).
// Window semantics for question-local items; captioner refs must be mapped
// back with the same offset (see make_offset_captioner).
VideoDocument slice_frames(const VideoDocument& doc, int lo, int hi);

// Wraps a captioner so refs "video_id#local" become "video_id#(local+offset)",
// undoing slice_frames renumbering for backends that address original frames.
std::shared_ptr<CaptionBackend> make_offset_captioner(std::shared_ptr<CaptionBackend> inner,
                                                      int offset);

// Loads, subtitles, and windows the document an item refers to. base_dir is
// the directory refs are relative to. Throws MissingCache when the caption
// cache is absent.
VideoDocument load_item_document(const QAItem& item, const std::string& base_dir);

// ---- batch evaluation ----

struct ItemResult {
  int item_index = 0;
  std::string video_id;
  std::string status;           // answered | budget_exhausted | error
  std::string predicted;        // "B"; empty when the run errored
  int confidence = 0;           // 0 when the run errored
  std::optional<bool> correct;  // present only for gold-labeled items
  int rounds = 0;               // planning rounds entered
  nlohmann::json call_counts;
  std::string trace_file;  // relative to the trace dir; empty if not written
  std::string error;       // error message for status == "error"
};

struct EvalReport {
  std::vector<ItemResult> items;               // dataset order
  std::optional<double> accuracy;              // absent without gold labels
  int labeled = 0;
  int correct_count = 0;
  std::map<std::string, int> status_counts;

  nlohmann::json to_json() const;  // schema-versioned, byte-stable
  std::string to_table() const;    // human-readable summary
};

struct EvalOptions {
  int concurrency = 4;
  std::string dataset_dir;  // base for item refs; "" = current directory
  std::string trace_dir;    // "" = do not write per-item traces
};

// Runs the pipeline over every item (bounded concurrency, one backend bundle
// per item from the factory so scripted runs stay independent), writes
// per-item traces named {video_id}_{item_idx}.trace.json, and aggregates
// accuracy over the gold-labeled subset. Per-item pipeline failures become
// status "error" rows; harness-level problems (unresolvable cache, bad item)
// throw before any backend call.
EvalReport evaluate(const std::vector<QAItem>& items, const RunConfig& config,
                    const std::function<Backends()>& backend_factory,
                    const EvalOptions& options);

// ---- trace replay ----

// Re-parses every completion recorded in a trace with the current parsers and
// re-derives each step's parsed value; returns one line per divergence (empty
// means the trace replays cleanly). Also re-checks the augmentation-request
// constraints.
std::vector<std::string> replay_trace(const nlohmann::json& trace);

// ---- configuration files ----

// Backend wiring parsed from a config file.
struct BackendSetup {
  std::string mode = "scripted";  // "scripted" | "http"
  std::string script_path;        // scripted mode
  ScriptedOptions scripted;
  HttpBackendConfigs http;
};

struct HarnessConfig {
  RunConfig run;
  BackendSetup backend;
};

// Plain `key = value` lines, '#' comments. Keys: k, max_rounds, fps,
// option_count, augment_types (A|B|AB), include_subtitles, backend.mode,
// backend.script, backend.embed.dimension, and per-role backend.<role>.<field>
// (role: plan/interact/answer/caption/embed; field: endpoint, model,
// temperature, max_retries, timeout_s, backoff_ms, api_key) with bare
// backend.<field> as the all-role default. Unknown keys are rejected.
HarnessConfig parse_config_text(const std::string& text);
HarnessConfig load_config(const std::string& path);

// Builds a per-item factory: scripted mode loads the script once and opens a
// fresh session per call; http mode constructs fresh clients per call.
// Relative paths inside the setup resolve against base_dir.
std::function<Backends()> make_backend_factory(const BackendSetup& setup,
                                               const std::string& base_dir);

}  // namespace drdoc
