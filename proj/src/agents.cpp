#include "drdoc/agents.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <utility>

#include "drdoc/errors.hpp"

namespace drdoc {

namespace {

using nlohmann::json;

// The three agent templates. The wording, ordering, numbering quirks, and
// misspellings are all deliberate: downstream models were tuned against these
// exact instructions, and the golden fixture tests pin every byte.

constexpr const char* kPlanningTemplate =
    R"(You are given some language descriptions of a first-person view video along with a question about the video.

1.The video is {MINUTES} minutes long, containing a total of {TOTAL} frames.

2. Each sentence in these language descriptions represents the text description for a single frame.

3. The format of each sentence is {frame id, description}. The frame id indicates the temporal position of the frame, ranging from 1 to {TOTAL}.

Here are the original descriptions of this video: {Documents}

Here is the question: {Question}

Here is the memory: {Memory}

Your task is to determine whether these descriptions above can answer the question accurately, reasonably, and without contradiction.

If your answer is yes, please give me an reasonable explanation. the output will be as follows: {"confidence": "1", "explanation": ["xxxx"]}

If your answer is no, the confidence is 0, indicating the provided information is insufficient. Please give me a reasonable explanation for what frame is missing. For each frame identified as potentially relevant, provide a concise description focusing on essential visual elements(e.g., objects, humans, interactions, actions, and scenes) in the explanation. The output will be as follows: {"confidence": "0", "explanation": ["xxxx"]}

You must not provide any other response or explanation.)";

constexpr const char* kInteractionTemplate =
    R"(You are given some language descriptions of a first-person view video along with a question about the video.

1.The video is {MINUTES} minutes long, containing a total of {TOTAL} frames.

2. Each sentence in these language descriptions represents the text description for a single frame.

3. The format of each sentence is {frame id, description}. The frame id indicates the temporal position of the frame, ranging from 1 to {TOTAL}.

Here are the original descriptions of this video: {Documents}

Here are the memory: {Memory}

To answer the following question: {Question}

Theses descriptions are insufficient and cannot answer this question accurately, reasonably, and without contradiction.

Your task is to determine which frame needs which type of information and can answer this question accurately, reasonably, and without contradiction.

The two types of information are as follows:

A: Given an image, get a detailed description of the image (image caption, just like what is shown in this image?)

B: Given an image, get a response to the above question (visual question answering)

Please note that frame selections range from 1 to {TOTAL}. These frames ({type_A}) already have type A information and these frames ({type_B}) already have type B information, please note not to repeatedly select this type of information from these frames. Please note that the the key of frame only one number. The output must be as follows:
[{"frame": "1/2/3/.../{TOTAL}", "type": "A/B"}])";

constexpr const char* kAnsweringTemplate =
    R"(You are individual C, with others represented as O. Your task is to answer a question related to this video, choosing the correct option out of {NUMWORD} possible answers. You are given some language descriptions of a first person view video along with a question about the video.

1.The video is {MINUTES} minutes long, containing a total of {TOTAL} frames.

2. Each sentence in these language descriptions represents the text description for a single frame.

3. The format of each sentence is {frame id, description}. The frame id indicates the temporal position of the frame, ranging from 1 to {TOTAL}.

Here are the descriptions of this video: {Documents}

Please answer the following question: {Question}

Here are the choices. {CHOICES}

The question has {N} choices, labeled as {LABELS}. Please think step by step and write the best answer index. Note your final answer must be one of the letters {LETTERS}, the confidence must be one of the letters (1, 2, 3), please provide a concise one-sentence explanation for your chosen answer. the output must be the following format. You must not provide any other response or explanation.

{"final_answer": "xxx", "confidence": "xxx", "explaination": "xxx"})";

// Single-pass substitution: replaced text is never rescanned, so captions or
// questions containing a literal placeholder cannot corrupt the prompt.
std::string expand(const char* tmpl,
                   const std::vector<std::pair<std::string, std::string>>& subs) {
  std::string text(tmpl);
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      bool matched = false;
      for (const auto& [key, value] : subs) {
        if (text.compare(i, key.size(), key) == 0) {
          out += value;
          i += key.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    out += text[i++];
  }
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return std::string();
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string render_id_vector(const std::vector<int>& ids) {
  std::string out = "[";
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(ids[i]);
  }
  out += "]";
  return out;
}

const char* number_word(size_t n) {
  switch (n) {
    case 2: return "two";
    case 3: return "three";
    case 4: return "four";
    case 5: return "five";
    case 6: return "six";
  }
  throw std::invalid_argument("option count must be between 2 and 6");
}

void check_prompt_inputs(const PromptInputs& inputs) {
  if (inputs.document_text.empty()) {
    throw std::invalid_argument("prompt requires non-empty document text");
  }
  if (inputs.total_frames < 1) {
    throw std::invalid_argument("prompt requires a positive total frame count");
  }
  if (inputs.minutes < 0) {
    throw std::invalid_argument("prompt requires a non-negative duration");
  }
}

}  // namespace

// ---- memory and prompt rendering ----

std::string render_memory(const std::vector<MemoryEntry>& memory) {
  for (size_t i = 1; i < memory.size(); ++i) {
    if (memory[i].step < memory[i - 1].step) {
      throw std::invalid_argument("memory steps must be non-decreasing");
    }
  }
  if (memory.empty()) return "{}";
  std::string out;
  for (size_t i = 0; i < memory.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1);
    out += ". ";
    const MemoryEntry& entry = memory[i];
    switch (entry.kind) {
      case MemoryKind::initial_topk:
        out += "[top-k frames] " + render_id_vector(entry.frame_ids);
        break;
      case MemoryKind::planner_explanation:
        out += "[planner] " + entry.text;
        break;
      case MemoryKind::requested_frames:
        out += "[requested frames] " + render_id_vector(entry.frame_ids);
        break;
    }
  }
  return out;
}

std::string render_id_list(const std::set<int>& ids) {
  return render_id_vector(std::vector<int>(ids.begin(), ids.end()));
}

std::string render_planning_prompt(const PromptInputs& inputs) {
  check_prompt_inputs(inputs);
  return expand(kPlanningTemplate,
                {{"{MINUTES}", std::to_string(inputs.minutes)},
                 {"{TOTAL}", std::to_string(inputs.total_frames)},
                 {"{Documents}", inputs.document_text},
                 {"{Question}", inputs.question},
                 {"{Memory}", render_memory(inputs.memory)}});
}

std::string render_interaction_prompt(const PromptInputs& inputs,
                                      const std::set<int>& already_a,
                                      const std::set<int>& already_b) {
  check_prompt_inputs(inputs);
  return expand(kInteractionTemplate,
                {{"{MINUTES}", std::to_string(inputs.minutes)},
                 {"{TOTAL}", std::to_string(inputs.total_frames)},
                 {"{Documents}", inputs.document_text},
                 {"{Question}", inputs.question},
                 {"{Memory}", render_memory(inputs.memory)},
                 {"{type_A}", render_id_list(already_a)},
                 {"{type_B}", render_id_list(already_b)}});
}

std::string render_answering_prompt(const PromptInputs& inputs,
                                    const std::vector<std::string>& options) {
  check_prompt_inputs(inputs);
  if (options.size() < 2 || options.size() > 6) {
    throw std::invalid_argument("option count must be between 2 and 6, got " +
                                std::to_string(options.size()));
  }
  std::string choices, labels, letters;
  for (size_t i = 0; i < options.size(); ++i) {
    char letter = static_cast<char>('A' + i);
    if (i) choices += ' ';
    choices += letter;
    choices += ": ";
    choices += options[i];
    if (i) labels += ", ";
    labels += letter;
  }
  if (options.size() == 2) {
    letters = "(A or B)";
  } else {
    letters = "(";
    for (size_t i = 0; i + 1 < options.size(); ++i) {
      letters += static_cast<char>('A' + i);
      letters += ", ";
    }
    letters += "or ";
    letters += static_cast<char>('A' + options.size() - 1);
    letters += ")";
  }
  return expand(kAnsweringTemplate,
                {{"{NUMWORD}", number_word(options.size())},
                 {"{MINUTES}", std::to_string(inputs.minutes)},
                 {"{TOTAL}", std::to_string(inputs.total_frames)},
                 {"{Documents}", inputs.document_text},
                 {"{Question}", inputs.question},
                 {"{CHOICES}", choices},
                 {"{N}", std::to_string(options.size())},
                 {"{LABELS}", labels},
                 {"{LETTERS}", letters}});
}

// ---- structured extraction and single-shot parsers ----

nlohmann::json extract_structured(const std::string& text) {
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    int depth = 0;
    bool in_string = false, escaped = false;
    for (size_t j = i; j < text.size(); ++j) {
      char c = text[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{' || c == '[') {
        ++depth;
      } else if (c == '}' || c == ']') {
        if (--depth <= 0) {
          json parsed = json::parse(text.substr(i, j - i + 1), nullptr, false);
          if (!parsed.is_discarded()) return parsed;
          break;  // this span is not JSON; try the next opener
        }
      }
    }
  }
  throw NoStructureFound();
}

namespace {

std::optional<json> try_extract(const std::string& text) {
  try {
    return extract_structured(text);
  } catch (const NoStructureFound&) {
    return std::nullopt;
  }
}

// "0"/"1" (possibly padded) or the numbers 0/1.
std::optional<bool> parse_binary_confidence(const json& value) {
  if (value.is_string()) {
    std::string t = trim(value.get<std::string>());
    if (t == "1") return true;
    if (t == "0") return false;
    return std::nullopt;
  }
  if (value.is_number_integer()) {
    auto n = value.get<int64_t>();
    if (n == 1) return true;
    if (n == 0) return false;
  }
  return std::nullopt;
}

std::optional<AgentVerdict> try_parse_verdict(const std::string& completion) {
  auto v = try_extract(completion);
  if (!v || !v->is_object() || !v->contains("confidence")) return std::nullopt;
  auto sufficient = parse_binary_confidence((*v)["confidence"]);
  if (!sufficient) return std::nullopt;

  AgentVerdict verdict;
  verdict.sufficient = *sufficient;
  if (v->contains("explanation")) {
    const json& e = (*v)["explanation"];
    if (e.is_string()) {
      verdict.explanation.push_back(e.get<std::string>());
    } else if (e.is_array()) {
      for (const auto& item : e) {
        if (!item.is_string()) return std::nullopt;
        verdict.explanation.push_back(item.get<std::string>());
      }
    } else {
      return std::nullopt;
    }
  }
  // An insufficiency verdict with no reasons is useless to the interaction
  // agent, so it counts as a failed parse and earns a re-ask.
  if (!verdict.sufficient && verdict.explanation.empty()) return std::nullopt;
  return verdict;
}

std::optional<int> parse_frame_number(const json& value) {
  if (value.is_number_integer()) {
    auto n = value.get<int64_t>();
    if (n < INT32_MIN || n > INT32_MAX) return std::nullopt;
    return static_cast<int>(n);
  }
  if (value.is_string()) {
    std::string t = trim(value.get<std::string>());
    if (t.empty() || t.size() > 9) return std::nullopt;
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    }
    return std::stoi(t);
  }
  return std::nullopt;
}

std::optional<AugmentationType> parse_type_tag(const json& value) {
  if (!value.is_string()) return std::nullopt;
  std::string t = trim(value.get<std::string>());
  if (t == "A" || t == "a") return AugmentationType::A;
  if (t == "B" || t == "b") return AugmentationType::B;
  return std::nullopt;
}

std::optional<std::vector<AugmentationRequest>> try_parse_requests(
    const std::string& completion) {
  auto v = try_extract(completion);
  if (!v || !v->is_array()) return std::nullopt;
  std::vector<AugmentationRequest> out;
  for (const auto& item : *v) {
    if (!item.is_object() || !item.contains("frame") || !item.contains("type")) {
      return std::nullopt;
    }
    auto frame = parse_frame_number(item["frame"]);
    auto kind = parse_type_tag(item["type"]);
    if (!frame || !kind) return std::nullopt;
    out.push_back(AugmentationRequest{*frame, *kind});
  }
  return out;
}

// Trims whitespace, sheds wrapping punctuation like "(B)" or "B.", and demands
// exactly one alphabetic character.
std::optional<char> normalize_letter(const std::string& raw) {
  std::string t = trim(raw);
  size_t b = 0, e = t.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(t[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(t[e - 1]))) --e;
  if (e - b != 1) return std::nullopt;
  char c = t[b];
  if (!std::isalpha(static_cast<unsigned char>(c))) return std::nullopt;
  return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
}

std::optional<int> parse_answer_confidence(const json& value) {
  if (value.is_string()) {
    std::string t = trim(value.get<std::string>());
    if (t == "1" || t == "2" || t == "3") return t[0] - '0';
    return std::nullopt;
  }
  if (value.is_number_integer()) {
    auto n = value.get<int64_t>();
    if (n >= 1 && n <= 3) return static_cast<int>(n);
  }
  return std::nullopt;
}

std::optional<AnswerRecord> try_parse_answer(const std::string& completion) {
  auto v = try_extract(completion);
  if (!v || !v->is_object() || !v->contains("final_answer") ||
      !v->contains("confidence")) {
    return std::nullopt;
  }
  if (!(*v)["final_answer"].is_string()) return std::nullopt;
  auto letter = normalize_letter((*v)["final_answer"].get<std::string>());
  auto confidence = parse_answer_confidence((*v)["confidence"]);
  if (!letter || !confidence) return std::nullopt;

  AnswerRecord record;
  record.letter = *letter;
  record.confidence = *confidence;
  // The documented output format misspells the key; accept the correct spelling
  // too since models frequently "fix" it.
  for (const char* key : {"explaination", "explanation"}) {
    if (v->contains(key)) {
      if (!(*v)[key].is_string()) return std::nullopt;
      record.explanation = (*v)[key].get<std::string>();
      break;
    }
  }
  return record;
}

}  // namespace

AgentVerdict parse_verdict(const std::string& completion) {
  if (auto v = try_parse_verdict(completion)) return *v;
  throw UnparseableVerdict(completion);
}

std::vector<AugmentationRequest> parse_requests(const std::string& completion) {
  if (auto r = try_parse_requests(completion)) return *r;
  throw UnparseableRequests(completion);
}

AnswerRecord parse_answer(const std::string& completion) {
  if (auto a = try_parse_answer(completion)) return *a;
  throw UnparseableAnswer(completion);
}

std::vector<AugmentationRequest> validate_requests(
    const std::vector<AugmentationRequest>& requests, const std::set<int>& already_a,
    const std::set<int>& already_b, int total_frames, int k) {
  if (total_frames < 1) {
    throw std::invalid_argument("total_frames must be positive");
  }
  if (k < 1) {
    throw std::invalid_argument("k must be at least 1");
  }
  std::vector<AugmentationRequest> kept;
  std::set<std::pair<int, char>> seen;
  for (const AugmentationRequest& r : requests) {
    if (r.frame_id < 1 || r.frame_id > total_frames) continue;
    const std::set<int>& held = (r.kind == AugmentationType::A) ? already_a : already_b;
    if (held.count(r.frame_id)) continue;
    if (!seen.insert({r.frame_id, to_char(r.kind)}).second) continue;
    kept.push_back(r);
  }
  // Strictly fewer requests than the retrieval budget.
  size_t cap = static_cast<size_t>(k - 1);
  if (kept.size() > cap) kept.resize(cap);
  return kept;
}

// ---- agent calls ----

AgentVerdict plan(const PromptInputs& inputs, ChatBackend& llm) {
  const std::string prompt = render_planning_prompt(inputs);
  std::string last;
  for (int attempt = 0; attempt <= kParseRetries; ++attempt) {
    last = llm.chat({{ChatRole::user, prompt}});
    if (auto v = try_parse_verdict(last)) return *v;
  }
  throw UnparseableVerdict(last);
}

std::vector<AugmentationRequest> find_missing(const PromptInputs& inputs,
                                              const std::set<int>& already_a,
                                              const std::set<int>& already_b, int k,
                                              ChatBackend& llm) {
  const std::string prompt = render_interaction_prompt(inputs, already_a, already_b);
  std::string last;
  for (int attempt = 0; attempt <= kParseRetries; ++attempt) {
    last = llm.chat({{ChatRole::user, prompt}});
    if (auto r = try_parse_requests(last)) {
      return validate_requests(*r, already_a, already_b, inputs.total_frames, k);
    }
  }
  throw UnparseableRequests(last);
}

AnswerRecord answer(const PromptInputs& inputs, const std::vector<std::string>& options,
                    ChatBackend& llm) {
  const std::string prompt = render_answering_prompt(inputs, options);
  const char max_letter = static_cast<char>('A' + options.size() - 1);
  std::string last;
  int structural_left = kParseRetries;
  int letter_left = 1;
  while (true) {
    last = llm.chat({{ChatRole::user, prompt}});
    auto record = try_parse_answer(last);
    if (!record) {
      if (structural_left-- == 0) throw UnparseableAnswer(last);
      continue;
    }
    if (record->letter < 'A' || record->letter > max_letter) {
      if (letter_left-- == 0) {
        throw InvalidLetter(std::string(1, record->letter),
                            static_cast<int>(options.size()));
      }
      continue;
    }
    return *record;
  }
}

}  // namespace drdoc
