#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "drdoc/backends.hpp"
#include "drdoc/docmodel.hpp"

namespace drdoc {

// Analysis history shown to the planning and interaction agents. Entries carry
// the loop step they were produced in; steps never decrease along the list.
enum class MemoryKind { initial_topk, planner_explanation, requested_frames };

struct MemoryEntry {
  MemoryKind kind = MemoryKind::planner_explanation;
  std::string text;            // planner_explanation payload
  std::vector<int> frame_ids;  // initial_topk / requested_frames payload
  int step = 0;

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

// Planner output: is the document sufficient, and why / what is missing.
struct AgentVerdict {
  bool sufficient = false;
  std::vector<std::string> explanation;

  friend bool operator==(const AgentVerdict&, const AgentVerdict&) = default;
};

// One frame the interaction agent wants enriched, and with which information type.
struct AugmentationRequest {
  int frame_id = 0;
  AugmentationType kind = AugmentationType::A;

  friend bool operator==(const AugmentationRequest&, const AugmentationRequest&) = default;
};

struct AnswerRecord {
  char letter = 'A';      // 'A'..'F', already validated against the option set
  int confidence = 1;     // 1..3
  std::string explanation;

  friend bool operator==(const AnswerRecord&, const AnswerRecord&) = default;
};

// Everything the prompt templates substitute besides per-call extras. The frame
// count and duration describe the full video; the document text may be any
// rendering the caller wants the agents to read.
struct PromptInputs {
  std::string document_text;
  std::string question;
  std::vector<MemoryEntry> memory;
  int total_frames = 0;
  int minutes = 0;
};

// Number of re-asks after a completion that fails structural parsing.
inline constexpr int kParseRetries = 2;

// ---- prompt rendering (pure; byte-stable against the golden fixtures) ----

// Empty history renders as "{}"; otherwise numbered tagged lines, one per entry.
std::string render_memory(const std::vector<MemoryEntry>& memory);

// "[3, 7]" for {3,7}, "[]" when empty.
std::string render_id_list(const std::set<int>& ids);

std::string render_planning_prompt(const PromptInputs& inputs);
std::string render_interaction_prompt(const PromptInputs& inputs,
                                      const std::set<int>& already_a,
                                      const std::set<int>& already_b);
// 2..6 options, lettered A upward.
std::string render_answering_prompt(const PromptInputs& inputs,
                                    const std::vector<std::string>& options);

// ---- completion parsing (single-shot; the agent entry points add retries) ----

// First balanced JSON object or array found in the text, fences and prose
// ignored. Throws NoStructureFound.
nlohmann::json extract_structured(const std::string& text);

// {"confidence": "0"|"1", "explanation": [...]}; numeric confidence and a bare
// string explanation are tolerated. Throws UnparseableVerdict.
AgentVerdict parse_verdict(const std::string& completion);

// [{"frame": "12", "type": "A"}, ...]; frames may be quoted digits or integers.
// Structural validation only. Throws UnparseableRequests.
std::vector<AugmentationRequest> parse_requests(const std::string& completion);

// {"final_answer", "confidence", "explaination"}; the misspelled key is the
// documented format and "explanation" is accepted too. The letter is normalized
// but not checked against any option set. Throws UnparseableAnswer.
AnswerRecord parse_answer(const std::string& completion);

// Domain filter over parsed requests: drops (frame, kind) pairs already held,
// ids outside 1..total_frames, and duplicate pairs within the list (first one
// wins), then truncates to at most k-1 requests in agent order.
std::vector<AugmentationRequest> validate_requests(
    const std::vector<AugmentationRequest>& requests, const std::set<int>& already_a,
    const std::set<int>& already_b, int total_frames, int k);

// ---- agent calls (render + chat + parse, with bounded re-asks) ----

AgentVerdict plan(const PromptInputs& inputs, ChatBackend& llm);

std::vector<AugmentationRequest> find_missing(const PromptInputs& inputs,
                                              const std::set<int>& already_a,
                                              const std::set<int>& already_b, int k,
                                              ChatBackend& llm);

// A parsed letter outside the option set earns exactly one re-ask before
// InvalidLetter; malformed completions use the shared kParseRetries budget.
AnswerRecord answer(const PromptInputs& inputs, const std::vector<std::string>& options,
                    ChatBackend& llm);

}  // namespace drdoc
