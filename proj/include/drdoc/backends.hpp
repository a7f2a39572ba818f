#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drdoc/errors.hpp"

namespace drdoc {

enum class ChatRole { system, user, assistant };

std::string to_string(ChatRole role);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;

  ChatMessage() = default;
  ChatMessage(ChatRole role, std::string content);
};

// Connection settings for one model role. Temperature defaults to 0; a client
// makes 1 + max_retries attempts before giving up on transient failures.
struct BackendConfig {
  std::string endpoint;
  std::string model_name;
  double temperature = 0.0;
  int max_retries = 2;
  int timeout_seconds = 60;
  int backoff_base_ms = 200;
  std::string api_key;  // empty -> DRDOC_API_KEY env var
};

// ---- abstract model roles ----

class ChatBackend {
public:
  virtual ~ChatBackend() = default;
  // messages must be non-empty and not start with an assistant turn.
  virtual std::string chat(const std::vector<ChatMessage>& messages) = 0;
};

class EmbedBackend {
public:
  virtual ~EmbedBackend() = default;
  // One vector per input text, order preserved, all the same dimension.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

class CaptionBackend {
public:
  virtual ~CaptionBackend() = default;
  // frame_ref is an opaque frame identifier (the harness uses "video_id#frame_id").
  virtual std::string caption(const std::string& frame_ref, const std::string& prompt) = 0;
};

// Monotonic step source recorded into traces. Scripted runs use StepClock so
// two identical runs produce identical trace bytes.
class Clock {
public:
  virtual ~Clock() = default;
  virtual int64_t now_ms() = 0;
};

class SystemClock : public Clock {
public:
  int64_t now_ms() override;
};

class StepClock : public Clock {
public:
  int64_t now_ms() override { return next_++; }

private:
  int64_t next_ = 0;
};

// ---- scripted backends ----

// Script roles match the script-file "role" field.
enum class ScriptRole { plan, interact, answer, caption, embed };

std::string to_string(ScriptRole role);
ScriptRole script_role_from_string(const std::string& s);

struct ScriptRule {
  ScriptRole role = ScriptRole::plan;
  // Keyed rules match before queued ones and behave like pure functions (they
  // are never consumed): for caption/embed the key must equal the frame_ref or
  // input text exactly, for chat roles it is matched as a substring of the last
  // user message. Unkeyed rules form a consumed-once FIFO queue per role, and
  // key "*" is a reusable catch-all tried last.
  std::optional<std::string> key;
  nlohmann::json response;
};

// Immutable canned-response table. Replay state lives in ScriptedSession, so a
// Script can be shared across any number of deterministic runs.
struct Script {
  std::vector<ScriptRule> rules;

  void add(ScriptRole role, nlohmann::json response);                  // queued
  void add_keyed(ScriptRole role, std::string key, nlohmann::json response);

  static Script parse_jsonl(const std::string& text);
  static Script load_file(const std::string& path);
  std::string dump_jsonl() const;
};

// Per-run cursor over a Script. Lookup precedence: keyed rules in file order,
// then the role's FIFO queue, then a "*" catch-all. Internally serialized so
// concurrent callers still observe a deterministic per-role order.
class ScriptedSession {
public:
  explicit ScriptedSession(std::shared_ptr<const Script> script);

  // Returns the matched response, or nullopt when the role has nothing left.
  std::optional<nlohmann::json> next(ScriptRole role, const std::string& probe);

private:
  std::shared_ptr<const Script> script_;
  std::vector<bool> consumed_;
  std::mutex mu_;
};

struct ScriptedOptions {
  int embed_dimension = 32;  // dimension of the hash-seeded unit vectors
};

class ScriptedChat : public ChatBackend {
public:
  ScriptedChat(std::shared_ptr<ScriptedSession> session, ScriptRole role);
  std::string chat(const std::vector<ChatMessage>& messages) override;

private:
  std::shared_ptr<ScriptedSession> session_;
  ScriptRole role_;
};

// Deterministic embedder: unit vectors seeded from a stable 64-bit hash of the
// text, overridable per text via keyed script entries (response = number array).
class ScriptedEmbedder : public EmbedBackend {
public:
  ScriptedEmbedder(std::shared_ptr<ScriptedSession> session, ScriptedOptions options);
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
  std::shared_ptr<ScriptedSession> session_;
  ScriptedOptions options_;
};

class ScriptedCaptioner : public CaptionBackend {
public:
  explicit ScriptedCaptioner(std::shared_ptr<ScriptedSession> session);
  std::string caption(const std::string& frame_ref, const std::string& prompt) override;

private:
  std::shared_ptr<ScriptedSession> session_;
};

// ---- HTTP (OpenAI-compatible) backends ----

class HttpChat : public ChatBackend {
public:
  explicit HttpChat(BackendConfig config);
  std::string chat(const std::vector<ChatMessage>& messages) override;

private:
  BackendConfig config_;
};

class HttpEmbedder : public EmbedBackend {
public:
  explicit HttpEmbedder(BackendConfig config);
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
  BackendConfig config_;
};

// Sends the prompt as the text part of a vision-style chat completion, with the
// frame_ref as the image reference.
class HttpCaptioner : public CaptionBackend {
public:
  explicit HttpCaptioner(BackendConfig config);
  std::string caption(const std::string& frame_ref, const std::string& prompt) override;

private:
  BackendConfig config_;
};

// ---- the full backend bundle the pipeline consumes ----

struct Backends {
  std::shared_ptr<ChatBackend> planner;
  std::shared_ptr<ChatBackend> interactor;
  std::shared_ptr<ChatBackend> answerer;
  std::shared_ptr<EmbedBackend> embedder;
  std::shared_ptr<CaptionBackend> captioner;
  std::shared_ptr<Clock> clock;
};

Backends make_scripted_backends(std::shared_ptr<const Script> script,
                                ScriptedOptions options = {});

struct HttpBackendConfigs {
  BackendConfig plan;
  BackendConfig interact;
  BackendConfig answer;
  BackendConfig caption;
  BackendConfig embed;
};

Backends make_http_backends(const HttpBackendConfigs& configs);

// Stable 64-bit FNV-1a, used for caption hashes and the scripted embedder seed.
uint64_t stable_hash64(const std::string& text);

// Unit vector derived deterministically from the text hash.
std::vector<double> hash_unit_vector(const std::string& text, int dimension);

void validate_chat_messages(const std::vector<ChatMessage>& messages);

}  // namespace drdoc
