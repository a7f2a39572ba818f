#include "drdoc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "drdoc/errors.hpp"

namespace drdoc {
namespace {

using nlohmann::json;

// Wrappers that count backend calls and keep the raw exchanges for the trace.
// Counts are attempts (incremented before the inner call), so failed calls are
// visible in call_counts too.

class RecordingChat final : public ChatBackend {
 public:
  explicit RecordingChat(ChatBackend& inner) : inner_(inner) {}

  std::string chat(const std::vector<ChatMessage>& messages) override {
    ++attempts;
    std::string reply = inner_.chat(messages);
    log.emplace_back(messages.back().content, reply);
    return reply;
  }

  int attempts = 0;
  std::vector<std::pair<std::string, std::string>> log;  // (prompt, completion)

 private:
  ChatBackend& inner_;
};

class RecordingEmbedder final : public EmbedBackend {
 public:
  explicit RecordingEmbedder(EmbedBackend& inner) : inner_(inner) {}

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    ++attempts;
    auto vectors = inner_.embed(texts);
    log.emplace_back(texts, vectors);
    return vectors;
  }

  int attempts = 0;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::vector<double>>>> log;

 private:
  EmbedBackend& inner_;
};

class CountingCaptioner final : public CaptionBackend {
 public:
  explicit CountingCaptioner(CaptionBackend& inner) : inner_(inner) {}

  std::string caption(const std::string& frame_ref, const std::string& prompt) override {
    ++attempts;
    return inner_.caption(frame_ref, prompt);
  }

  int attempts = 0;

 private:
  CaptionBackend& inner_;
};

std::string join_explanation(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += " ";
    out += parts[i];
  }
  return out;
}

json completions_since(const std::vector<std::pair<std::string, std::string>>& log,
                       std::size_t mark) {
  json arr = json::array();
  for (std::size_t i = mark; i < log.size(); ++i) arr.push_back(log[i].second);
  return arr;
}

json requests_to_json(const std::vector<AugmentationRequest>& requests) {
  json arr = json::array();
  for (const auto& r : requests) {
    arr.push_back({{"frame", r.frame_id}, {"type", std::string(1, to_char(r.kind))}});
  }
  return arr;
}

json verdict_to_json(const AgentVerdict& verdict) {
  return {{"sufficient", verdict.sufficient}, {"explanation", verdict.explanation}};
}

json answer_to_json(const AnswerRecord& record) {
  return {{"letter", std::string(1, record.letter)},
          {"confidence", record.confidence},
          {"explanation", record.explanation}};
}

std::string augment_types_label(const RunConfig& config) {
  std::string label;
  if (config.enable_type_a) label += 'A';
  if (config.enable_type_b) label += 'B';
  return label;
}

}  // namespace

void validate_config(const RunConfig& config) {
  if (config.k < 1) throw std::invalid_argument("k must be >= 1");
  if (config.max_rounds < 0) throw std::invalid_argument("max_rounds must be >= 0");
  if (config.fps <= 0.0) throw std::invalid_argument("fps must be positive");
  if (config.option_count < 2 || config.option_count > 6) {
    throw std::invalid_argument("option_count must be between 2 and 6");
  }
  if (!config.enable_type_a && !config.enable_type_b) {
    throw std::invalid_argument("at least one augmentation type must be enabled");
  }
}

std::string make_frame_ref(const std::string& video_id, int frame_id) {
  return video_id + "#" + std::to_string(frame_id);
}

std::string augmentation_prompt(AugmentationType kind, const std::string& question) {
  if (kind == AugmentationType::A) {
    return "Please provide a detailed description of the image (image caption, just "
           "like what is shown in this image?).";
  }
  return "If there are factual errors in the question, provide a precise description "
         "of the image; if not, proceed to answer the question: " +
         question;
}

void apply_requests(LoopState& state, const std::vector<AugmentationRequest>& requests,
                    CaptionBackend& captioner, const std::string& question,
                    std::vector<AugmentationOutcome>* log) {
  for (const auto& request : requests) {
    const std::string frame_ref = make_frame_ref(state.document.video_id, request.frame_id);
    const std::string prompt = augmentation_prompt(request.kind, question);
    std::string caption = captioner.caption(frame_ref, prompt);
    state.document = merge_augmentation(state.document, request.frame_id, request.kind, caption);
    auto& ledger = request.kind == AugmentationType::A ? state.already_a : state.already_b;
    ledger.insert(request.frame_id);
    if (log != nullptr) {
      log->push_back({request.frame_id, request.kind, frame_ref, prompt, caption});
    }
  }
}

RunOutcome run(const VideoDocument& doc, const std::string& question,
               const std::vector<std::string>& options, const RunConfig& config,
               const Backends& backends) {
  validate_config(config);
  if (static_cast<int>(options.size()) != config.option_count) {
    throw std::invalid_argument("options count does not match configured option_count");
  }
  if (backends.planner == nullptr || backends.interactor == nullptr ||
      backends.answerer == nullptr || backends.embedder == nullptr ||
      backends.captioner == nullptr || backends.clock == nullptr) {
    throw std::invalid_argument("all backends must be provided");
  }

  RecordingChat plan_rec(*backends.planner);
  RecordingChat interact_rec(*backends.interactor);
  RecordingChat answer_rec(*backends.answerer);
  RecordingEmbedder embed_rec(*backends.embedder);
  CountingCaptioner caption_rec(*backends.captioner);
  Clock& clock = *backends.clock;

  const int total_frames = doc.total_frames();
  const int minutes =
      static_cast<int>(std::llround(static_cast<double>(total_frames) / doc.fps / 60.0));

  json trace;
  trace["trace"] = kTraceSchema;
  trace["video_id"] = doc.video_id;
  trace["question"] = question;
  trace["options"] = options;
  trace["total_frames"] = total_frames;
  trace["config"] = {{"k", config.k},
                     {"max_rounds", config.max_rounds},
                     {"fps", config.fps},
                     {"option_count", config.option_count},
                     {"augment_types", augment_types_label(config)},
                     {"include_subtitles", config.include_subtitles}};
  json steps = json::array();

  // Marks of already-flushed recorder entries, so an exception mid-call can
  // still surface the completions received before the failure.
  std::size_t plan_mark = 0;
  std::size_t interact_mark = 0;
  std::size_t answer_mark = 0;
  std::string phase = "setup";
  std::vector<AugmentationOutcome> augment_log;

  auto flush_embed_steps = [&](std::size_t& mark) {
    for (; mark < embed_rec.log.size(); ++mark) {
      const auto& [texts, vectors] = embed_rec.log[mark];
      steps.push_back({{"t", clock.now_ms()},
                       {"step", "embed"},
                       {"texts", texts},
                       {"vectors", vectors}});
    }
  };
  auto flush_augment_steps = [&](std::vector<AugmentationOutcome>& log) {
    for (const auto& outcome : log) {
      steps.push_back({{"t", clock.now_ms()},
                       {"step", "augment"},
                       {"frame", outcome.frame_id},
                       {"type", std::string(1, to_char(outcome.kind))},
                       {"frame_ref", outcome.frame_ref},
                       {"prompt", outcome.prompt},
                       {"caption", outcome.caption}});
    }
    log.clear();
  };

  std::optional<AnswerRecord> answer;
  std::string status;

  try {
    // Embed every short caption, then rank frames against the question once.
    phase = "retrieval";
    std::size_t embed_mark = 0;
    FrameEmbeddings embeddings = embed_frames(doc, embed_rec);
    RetrievalResult retrieved = retrieve_topk(question, embeddings, config.k, embed_rec);
    flush_embed_steps(embed_mark);
    json ranked = json::array();
    for (const auto& scored : retrieved.ranked) {
      ranked.push_back({{"frame", scored.frame_id}, {"score", scored.score}});
    }
    steps.push_back(
        {{"t", clock.now_ms()}, {"step", "retrieve"}, {"k", config.k}, {"ranked", ranked}});

    LoopState state;
    state.document = doc;

    // Augment the retrieved frames up front. The question-conditioned prompt is
    // preferred; when type B is disabled the description prompt stands in.
    phase = "initial_augment";
    const AugmentationType initial_kind =
        config.enable_type_b ? AugmentationType::B : AugmentationType::A;
    std::vector<AugmentationRequest> initial_requests;
    std::vector<int> ranked_ids;
    for (const auto& scored : retrieved.ranked) {
      state.topk.insert(scored.frame_id);
      ranked_ids.push_back(scored.frame_id);
      initial_requests.push_back({scored.frame_id, initial_kind});
    }
    apply_requests(state, initial_requests, caption_rec, question, &augment_log);
    flush_augment_steps(augment_log);
    state.memory.push_back({MemoryKind::initial_topk, "", ranked_ids, 0});

    auto make_inputs = [&]() {
      PromptInputs inputs;
      inputs.document_text = render(state.document, config.include_subtitles).rendered;
      inputs.question = question;
      inputs.memory = state.memory;
      inputs.total_frames = total_frames;
      inputs.minutes = minutes;
      return inputs;
    };

    for (int i = 0; i <= config.max_rounds;) {
      state.iteration = i;

      phase = "plan";
      AgentVerdict verdict = plan(make_inputs(), plan_rec);
      steps.push_back({{"t", clock.now_ms()},
                       {"step", "plan"},
                       {"round", i},
                       {"prompt", plan_rec.log[plan_mark].first},
                       {"completions", completions_since(plan_rec.log, plan_mark)},
                       {"verdict", verdict_to_json(verdict)}});
      plan_mark = plan_rec.log.size();

      if (verdict.sufficient) {
        status = "answered";
        break;
      }
      state.memory.push_back(
          {MemoryKind::planner_explanation, join_explanation(verdict.explanation), {}, i});
      if (i == config.max_rounds) {
        // Budget spent: no further interaction is allowed, answer with what we
        // have.
        status = "budget_exhausted";
        break;
      }

      phase = "interact";
      std::vector<AugmentationRequest> requests =
          find_missing(make_inputs(), state.already_a, state.already_b, config.k, interact_rec);
      if (!config.enable_type_a || !config.enable_type_b) {
        const AugmentationType disabled =
            config.enable_type_a ? AugmentationType::B : AugmentationType::A;
        std::erase_if(requests,
                      [&](const AugmentationRequest& r) { return r.kind == disabled; });
      }
      steps.push_back({{"t", clock.now_ms()},
                       {"step", "interact"},
                       {"round", i},
                       {"prompt", interact_rec.log[interact_mark].first},
                       {"completions", completions_since(interact_rec.log, interact_mark)},
                       {"requests", requests_to_json(requests)}});
      interact_mark = interact_rec.log.size();

      std::vector<int> requested_ids;
      for (const auto& request : requests) {
        if (std::find(requested_ids.begin(), requested_ids.end(), request.frame_id) ==
            requested_ids.end()) {
          requested_ids.push_back(request.frame_id);
        }
      }
      state.memory.push_back({MemoryKind::requested_frames, "", requested_ids, i});

      ++i;
      phase = "augment";
      apply_requests(state, requests, caption_rec, question, &augment_log);
      flush_augment_steps(augment_log);
    }

    phase = "answer";
    answer = drdoc::answer(make_inputs(), options, answer_rec);
    steps.push_back({{"t", clock.now_ms()},
                     {"step", "answer"},
                     {"prompt", answer_rec.log[answer_mark].first},
                     {"completions", completions_since(answer_rec.log, answer_mark)},
                     {"answer", answer_to_json(*answer)}});
    answer_mark = answer_rec.log.size();
  } catch (const Error& e) {
    // Backend and parse failures end the run but still produce a trace; merges
    // completed before the failure and any completions received during the
    // failing call are preserved.
    flush_augment_steps(augment_log);
    auto flush_partial = [&](RecordingChat& rec, std::size_t mark, const char* step_name) {
      if (rec.log.size() > mark) {
        steps.push_back({{"t", clock.now_ms()},
                         {"step", step_name},
                         {"prompt", rec.log[mark].first},
                         {"completions", completions_since(rec.log, mark)},
                         {"outcome", "error"}});
      }
    };
    flush_partial(plan_rec, plan_mark, "plan");
    flush_partial(interact_rec, interact_mark, "interact");
    flush_partial(answer_rec, answer_mark, "answer");
    status = "error";
    trace["error"] = {{"phase", phase}, {"message", e.what()}};
    answer.reset();
  }

  trace["steps"] = std::move(steps);
  trace["call_counts"] = {{"plan", plan_rec.attempts},
                          {"interact", interact_rec.attempts},
                          {"answer", answer_rec.attempts},
                          {"caption", caption_rec.attempts},
                          {"embed", embed_rec.attempts}};
  trace["status"] = status;
  trace["answer"] = answer.has_value() ? answer_to_json(*answer) : json(nullptr);
  return {std::move(answer), status, std::move(trace)};
}

std::string trace_to_string(const nlohmann::json& trace) { return trace.dump(2) + "\n"; }

Script script_from_trace(const nlohmann::json& trace) {
  if (!trace.is_object() || !trace.contains("steps") || !trace["steps"].is_array()) {
    throw std::invalid_argument("trace has no steps array");
  }
  Script script;
  for (const auto& step : trace["steps"]) {
    const std::string kind = step.value("step", "");
    if (kind == "embed") {
      const auto& texts = step.at("texts");
      const auto& vectors = step.at("vectors");
      for (std::size_t i = 0; i < texts.size(); ++i) {
        script.add_keyed(ScriptRole::embed, texts[i].get<std::string>(), vectors[i]);
      }
    } else if (kind == "augment") {
      script.add_keyed(ScriptRole::caption, step.at("frame_ref").get<std::string>(),
                       step.at("caption").get<std::string>());
    } else if (kind == "plan" || kind == "interact" || kind == "answer") {
      const ScriptRole role = kind == "plan"       ? ScriptRole::plan
                              : kind == "interact" ? ScriptRole::interact
                                                   : ScriptRole::answer;
      for (const auto& completion : step.at("completions")) {
        script.add(role, completion.get<std::string>());
      }
    }
  }
  return script;
}

std::vector<std::string> verify_trace(const nlohmann::json& trace) {
  std::vector<std::string> violations;
  if (!trace.is_object() || !trace.contains("steps") || !trace["steps"].is_array()) {
    violations.push_back("trace has no steps array");
    return violations;
  }
  const int k = trace.contains("config") ? trace["config"].value("k", 0) : 0;
  const int total_frames = trace.value("total_frames", 0);
  std::set<std::pair<int, char>> held;
  int step_index = 0;
  for (const auto& step : trace["steps"]) {
    const std::string kind = step.value("step", "");
    if (kind == "interact") {
      const auto& requests = step.at("requests");
      if (static_cast<int>(requests.size()) >= k) {
        violations.push_back("step " + std::to_string(step_index) + ": " +
                             std::to_string(requests.size()) +
                             " requests, budget requires fewer than " + std::to_string(k));
      }
      std::set<std::pair<int, char>> within;
      for (const auto& request : requests) {
        const int frame = request.at("frame").get<int>();
        const char type = request.at("type").get<std::string>().at(0);
        if (frame < 1 || frame > total_frames) {
          violations.push_back("step " + std::to_string(step_index) + ": frame " +
                               std::to_string(frame) + " outside 1.." +
                               std::to_string(total_frames));
        }
        if (held.count({frame, type}) != 0 || !within.insert({frame, type}).second) {
          violations.push_back("step " + std::to_string(step_index) + ": repeated request (" +
                               std::to_string(frame) + ", " + type + ")");
        }
      }
    } else if (kind == "augment") {
      const int frame = step.at("frame").get<int>();
      const char type = step.at("type").get<std::string>().at(0);
      if (!held.insert({frame, type}).second) {
        violations.push_back("step " + std::to_string(step_index) + ": duplicate augmentation (" +
                             std::to_string(frame) + ", " + type + ")");
      }
    }
    ++step_index;
  }
  return violations;
}

}  // namespace drdoc
