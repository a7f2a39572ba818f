#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "drdoc/agents.hpp"
#include "drdoc/backends.hpp"
#include "drdoc/docmodel.hpp"
#include "drdoc/retrieval.hpp"

namespace drdoc {

// Knobs for one question run. Backend wiring is passed separately as Backends,
// so the same config can drive scripted and live runs.
struct RunConfig {
  int k = 5;           // retrieval budget; augmentation requests stay below it
  int max_rounds = 2;  // loop budget I
  double fps = 0.5;    // sampling rate used when building documents
  int option_count = 5;
  bool enable_type_a = true;  // detailed-description augmentation
  bool enable_type_b = true;  // question-conditioned augmentation
  bool include_subtitles = false;
};

// Throws std::invalid_argument on out-of-range values.
void validate_config(const RunConfig& config);

// Mutable loop state: the growing document, the augmentation ledgers, and the
// history fed back into the agent prompts.
struct LoopState {
  int iteration = 0;
  std::vector<MemoryEntry> memory;
  VideoDocument document;
  std::set<int> topk;
  std::set<int> already_a;
  std::set<int> already_b;
};

// One completed augmentation, as recorded in the trace.
struct AugmentationOutcome {
  int frame_id = 0;
  AugmentationType kind = AugmentationType::A;
  std::string frame_ref;
  std::string prompt;
  std::string caption;
};

// "video_id#frame_id" — the opaque handle captioners receive.
std::string make_frame_ref(const std::string& video_id, int frame_id);

// The caption-model prompt for each augmentation type. Type B embeds the
// question; type A is question-agnostic.
std::string augmentation_prompt(AugmentationType kind, const std::string& question);

// Executes validated requests in order: one captioner call and one merge per
// request, ledgers updated as each completes. A captioner failure on request j
// propagates, leaving merges 1..j-1 applied and the ledgers consistent.
void apply_requests(LoopState& state, const std::vector<AugmentationRequest>& requests,
                    CaptionBackend& captioner, const std::string& question,
                    std::vector<AugmentationOutcome>* log = nullptr);

struct RunOutcome {
  std::optional<AnswerRecord> answer;
  std::string status;  // "answered" | "budget_exhausted" | "error"
  nlohmann::json trace;
};

// The full state machine: embed + retrieve top-k, augment those frames, then
// plan/interact/augment rounds until the planner is satisfied or the budget
// runs out, then answer. Backend and parse failures are recorded in the trace
// with status "error"; precondition violations throw.
RunOutcome run(const VideoDocument& doc, const std::string& question,
               const std::vector<std::string>& options, const RunConfig& config,
               const Backends& backends);

inline constexpr char kTraceSchema[] = "drdoc-v1";

// Stable serialized form (2-space indent, sorted keys, trailing newline).
std::string trace_to_string(const nlohmann::json& trace);

// Rebuilds a script that replays every recorded completion, caption, and
// embedding, so the run can be re-executed offline.
Script script_from_trace(const nlohmann::json& trace);

// Post-hoc audit of the augmentation constraints over a trace: every interact
// step's request set must stay below k, target frames inside the document, and
// never repeat a (frame, type) pair. Returns human-readable violations.
std::vector<std::string> verify_trace(const nlohmann::json& trace);

}  // namespace drdoc
