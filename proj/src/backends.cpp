#include "drdoc/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace drdoc {

namespace {

using nlohmann::json;

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

// ---- chat messages ----

ChatMessage::ChatMessage(ChatRole role, std::string content)
    : role(role), content(std::move(content)) {}

std::string to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "user";
}

void validate_chat_messages(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) {
    throw std::invalid_argument("chat called with no messages");
  }
  if (messages.front().role == ChatRole::assistant) {
    throw std::invalid_argument("chat conversation cannot start with an assistant turn");
  }
}

// ---- stable hashing / deterministic vectors ----

uint64_t stable_hash64(const std::string& text) {
  // FNV-1a, 64-bit. Chosen over std::hash because the result must be identical
  // across platforms and standard library implementations.
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= static_cast<uint64_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> hash_unit_vector(const std::string& text, int dimension) {
  if (dimension <= 0) {
    throw std::invalid_argument("embedding dimension must be positive");
  }
  std::mt19937_64 rng(stable_hash64(text));
  // Box-Muller from raw engine output. std::normal_distribution is
  // implementation-defined, which would break cross-platform determinism.
  auto uniform01 = [&rng]() {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);  // [0, 1)
  };
  std::vector<double> v(static_cast<size_t>(dimension));
  for (size_t i = 0; i < v.size(); i += 2) {
    double u1 = 1.0 - uniform01();  // (0, 1], keeps the log finite
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    v[i] = r * std::cos(2.0 * M_PI * u2);
    if (i + 1 < v.size()) v[i + 1] = r * std::sin(2.0 * M_PI * u2);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    v[0] = 1.0;  // unreachable in practice, but keeps the unit-norm contract
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

// ---- scripts ----

std::string to_string(ScriptRole role) {
  switch (role) {
    case ScriptRole::plan: return "plan";
    case ScriptRole::interact: return "interact";
    case ScriptRole::answer: return "answer";
    case ScriptRole::caption: return "caption";
    case ScriptRole::embed: return "embed";
  }
  return "plan";
}

ScriptRole script_role_from_string(const std::string& s) {
  if (s == "plan") return ScriptRole::plan;
  if (s == "interact") return ScriptRole::interact;
  if (s == "answer") return ScriptRole::answer;
  if (s == "caption") return ScriptRole::caption;
  if (s == "embed") return ScriptRole::embed;
  throw std::invalid_argument("unknown script role: " + s);
}

void Script::add(ScriptRole role, json response) {
  rules.push_back(ScriptRule{role, std::nullopt, std::move(response)});
}

void Script::add_keyed(ScriptRole role, std::string key, json response) {
  rules.push_back(ScriptRule{role, std::move(key), std::move(response)});
}

Script Script::parse_jsonl(const std::string& text) {
  Script script;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json entry;
    try {
      entry = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("script line " + std::to_string(line_no) +
                                  ": invalid JSON: " + e.what());
    }
    if (!entry.is_object() || !entry.contains("role") || !entry["role"].is_string() ||
        !entry.contains("response")) {
      throw std::invalid_argument("script line " + std::to_string(line_no) +
                                  ": expected an object with \"role\" and \"response\"");
    }
    ScriptRule rule;
    rule.role = script_role_from_string(entry["role"].get<std::string>());
    if (entry.contains("key")) {
      if (!entry["key"].is_string()) {
        throw std::invalid_argument("script line " + std::to_string(line_no) +
                                    ": \"key\" must be a string");
      }
      rule.key = entry["key"].get<std::string>();
    }
    rule.response = entry["response"];
    script.rules.push_back(std::move(rule));
  }
  return script;
}

Script Script::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::invalid_argument("cannot open script file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str());
}

std::string Script::dump_jsonl() const {
  std::string out;
  for (const auto& rule : rules) {
    json entry;
    entry["role"] = to_string(rule.role);
    if (rule.key) entry["key"] = *rule.key;
    entry["response"] = rule.response;
    out += entry.dump();
    out += '\n';
  }
  return out;
}

// ---- scripted session ----

ScriptedSession::ScriptedSession(std::shared_ptr<const Script> script)
    : script_(std::move(script)) {
  if (!script_) {
    throw std::invalid_argument("ScriptedSession requires a script");
  }
  consumed_.assign(script_->rules.size(), false);
}

std::optional<json> ScriptedSession::next(ScriptRole role, const std::string& probe) {
  std::lock_guard<std::mutex> lock(mu_);
  bool exact_key = (role == ScriptRole::caption || role == ScriptRole::embed);
  // Keyed rules first, in file order; they are reusable.
  for (const auto& rule : script_->rules) {
    if (rule.role != role || !rule.key || *rule.key == "*") continue;
    bool hit = exact_key ? (probe == *rule.key)
                         : (probe.find(*rule.key) != std::string::npos);
    if (hit) return rule.response;
  }
  // Then the one-shot FIFO queue.
  for (size_t i = 0; i < script_->rules.size(); ++i) {
    const auto& rule = script_->rules[i];
    if (rule.role != role || rule.key || consumed_[i]) continue;
    consumed_[i] = true;
    return rule.response;
  }
  // Finally a reusable catch-all.
  for (const auto& rule : script_->rules) {
    if (rule.role == role && rule.key && *rule.key == "*") return rule.response;
  }
  return std::nullopt;
}

// ---- scripted backends ----

namespace {

ScriptRole chat_script_role(ScriptRole role) {
  if (role != ScriptRole::plan && role != ScriptRole::interact &&
      role != ScriptRole::answer) {
    throw std::invalid_argument("scripted chat role must be plan, interact, or answer");
  }
  return role;
}

std::string last_user_content(const std::vector<ChatMessage>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == ChatRole::user) return it->content;
  }
  return std::string();
}

}  // namespace

ScriptedChat::ScriptedChat(std::shared_ptr<ScriptedSession> session, ScriptRole role)
    : session_(std::move(session)), role_(chat_script_role(role)) {
  if (!session_) throw std::invalid_argument("ScriptedChat requires a session");
}

std::string ScriptedChat::chat(const std::vector<ChatMessage>& messages) {
  validate_chat_messages(messages);
  auto response = session_->next(role_, last_user_content(messages));
  if (!response) {
    throw BackendUnavailable("script has no remaining response for role '" +
                             to_string(role_) + "'");
  }
  if (!response->is_string()) {
    throw std::invalid_argument("script response for chat role '" + to_string(role_) +
                                "' must be a string");
  }
  return response->get<std::string>();
}

ScriptedEmbedder::ScriptedEmbedder(std::shared_ptr<ScriptedSession> session,
                                   ScriptedOptions options)
    : session_(std::move(session)), options_(options) {
  if (!session_) throw std::invalid_argument("ScriptedEmbedder requires a session");
  if (options_.embed_dimension <= 0) {
    throw std::invalid_argument("embedding dimension must be positive");
  }
}

std::vector<std::vector<double>> ScriptedEmbedder::embed(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  std::optional<size_t> dim;
  for (const auto& text : texts) {
    std::vector<double> v;
    auto response = session_->next(ScriptRole::embed, text);
    if (response) {
      if (!response->is_array()) {
        throw std::invalid_argument("script response for embed must be a number array");
      }
      v.reserve(response->size());
      for (const auto& x : *response) {
        if (!x.is_number()) {
          throw std::invalid_argument("script response for embed must be a number array");
        }
        v.push_back(x.get<double>());
      }
      if (v.empty()) {
        throw std::invalid_argument("script embed vector must be non-empty");
      }
    } else {
      v = hash_unit_vector(text, options_.embed_dimension);
    }
    if (dim && v.size() != *dim) {
      throw DimensionMismatch("embedding dimensions disagree: " +
                              std::to_string(*dim) + " vs " + std::to_string(v.size()));
    }
    dim = v.size();
    out.push_back(std::move(v));
  }
  return out;
}

ScriptedCaptioner::ScriptedCaptioner(std::shared_ptr<ScriptedSession> session)
    : session_(std::move(session)) {
  if (!session_) throw std::invalid_argument("ScriptedCaptioner requires a session");
}

std::string ScriptedCaptioner::caption(const std::string& frame_ref,
                                       const std::string& prompt) {
  (void)prompt;  // the canned caption already reflects whichever prompt was asked
  auto response = session_->next(ScriptRole::caption, frame_ref);
  if (!response) {
    throw EmptyCaptionReturned("script has no caption for frame '" + frame_ref + "'");
  }
  if (!response->is_string()) {
    throw std::invalid_argument("script response for caption must be a string");
  }
  std::string text = response->get<std::string>();
  if (is_blank(text)) {
    throw EmptyCaptionReturned("captioner returned an empty caption for frame '" +
                               frame_ref + "'");
  }
  return text;
}

// ---- clock ----

int64_t SystemClock::now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// ---- HTTP backends ----

namespace {

struct SplitEndpoint {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash, possibly empty
};

SplitEndpoint split_endpoint(std::string endpoint) {
  if (endpoint.find("://") == std::string::npos) {
    endpoint = "http://" + endpoint;
  }
  size_t scheme_end = endpoint.find("://") + 3;
  size_t path_start = endpoint.find('/', scheme_end);
  SplitEndpoint out;
  if (path_start == std::string::npos) {
    out.base = endpoint;
  } else {
    out.base = endpoint.substr(0, path_start);
    out.prefix = endpoint.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

std::string resolve_endpoint(const BackendConfig& config) {
  if (!config.endpoint.empty()) return config.endpoint;
  if (const char* env = std::getenv("DRDOC_ENDPOINT"); env && *env) return env;
  throw BackendUnavailable("no endpoint configured (set one or export DRDOC_ENDPOINT)");
}

std::string resolve_api_key(const BackendConfig& config) {
  if (!config.api_key.empty()) return config.api_key;
  if (const char* env = std::getenv("DRDOC_API_KEY"); env && *env) return env;
  return std::string();
}

bool transient_status(int status) {
  return status == 429 || (status >= 500 && status <= 599);
}

// POSTs JSON and retries transient failures (connection errors, 429, 5xx) with
// exponential backoff. Anything else fails fast; a 200 that does not parse as
// JSON is a MalformedResponse and is never retried.
json post_json(const BackendConfig& config, const std::string& path, const json& body) {
  SplitEndpoint ep = split_endpoint(resolve_endpoint(config));
  httplib::Client client(ep.base);
  client.set_connection_timeout(config.timeout_seconds, 0);
  client.set_read_timeout(config.timeout_seconds, 0);
  client.set_write_timeout(config.timeout_seconds, 0);
  httplib::Headers headers;
  if (std::string key = resolve_api_key(config); !key.empty()) {
    headers.emplace("Authorization", "Bearer " + key);
  }
  const std::string payload = body.dump();
  const std::string url_path = ep.prefix + path;
  const int attempts = std::max(0, config.max_retries) + 1;
  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      auto delay = std::chrono::milliseconds(
          static_cast<int64_t>(config.backoff_base_ms) << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    auto res = client.Post(url_path, headers, payload, "application/json");
    if (!res) {
      last_failure = "connection to " + ep.base + " failed (" +
                     httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw MalformedResponse(std::string("response body is not valid JSON: ") +
                                e.what());
      }
    }
    std::string detail = "HTTP " + std::to_string(res->status) + " from " + url_path;
    if (!res->body.empty()) {
      detail += ": " + res->body.substr(0, 200);
    }
    if (!transient_status(res->status)) {
      throw BackendUnavailable(detail);
    }
    last_failure = detail;
  }
  throw BackendUnavailable("giving up after " + std::to_string(attempts) +
                           " attempts: " + last_failure);
}

json chat_request_body(const BackendConfig& config, const json& messages) {
  return json{{"model", config.model_name},
              {"messages", messages},
              {"temperature", config.temperature}};
}

std::string completion_text(const json& reply) {
  if (!reply.contains("choices") || !reply["choices"].is_array() ||
      reply["choices"].empty()) {
    throw MalformedResponse("chat response has no choices");
  }
  const json& first = reply["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    throw MalformedResponse("chat response has no message content");
  }
  return first["message"]["content"].get<std::string>();
}

}  // namespace

HttpChat::HttpChat(BackendConfig config) : config_(std::move(config)) {}

std::string HttpChat::chat(const std::vector<ChatMessage>& messages) {
  validate_chat_messages(messages);
  json wire = json::array();
  for (const auto& m : messages) {
    wire.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json reply = post_json(config_, "/chat/completions", chat_request_body(config_, wire));
  return completion_text(reply);
}

HttpEmbedder::HttpEmbedder(BackendConfig config) : config_(std::move(config)) {}

std::vector<std::vector<double>> HttpEmbedder::embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  json body{{"model", config_.model_name}, {"input", texts}};
  json reply = post_json(config_, "/embeddings", body);
  if (!reply.contains("data") || !reply["data"].is_array()) {
    throw MalformedResponse("embedding response has no data array");
  }
  const json& data = reply["data"];
  if (data.size() != texts.size()) {
    throw MalformedResponse("embedding response has " + std::to_string(data.size()) +
                            " entries for " + std::to_string(texts.size()) + " inputs");
  }
  std::vector<std::vector<double>> out(texts.size());
  for (size_t pos = 0; pos < data.size(); ++pos) {
    const json& entry = data[pos];
    if (!entry.contains("embedding") || !entry["embedding"].is_array()) {
      throw MalformedResponse("embedding entry has no embedding array");
    }
    size_t index = pos;
    if (entry.contains("index") && entry["index"].is_number_unsigned()) {
      index = entry["index"].get<size_t>();
      if (index >= out.size()) {
        throw MalformedResponse("embedding index out of range: " + std::to_string(index));
      }
    }
    std::vector<double> v;
    v.reserve(entry["embedding"].size());
    for (const auto& x : entry["embedding"]) {
      if (!x.is_number()) {
        throw MalformedResponse("embedding vector holds a non-numeric value");
      }
      v.push_back(x.get<double>());
    }
    if (v.empty()) {
      throw MalformedResponse("embedding vector is empty");
    }
    out[index] = std::move(v);
  }
  size_t dim = out.front().size();
  for (const auto& v : out) {
    if (v.size() != dim) {
      throw DimensionMismatch("embedding dimensions disagree: " + std::to_string(dim) +
                              " vs " + std::to_string(v.size()));
    }
  }
  return out;
}

HttpCaptioner::HttpCaptioner(BackendConfig config) : config_(std::move(config)) {}

std::string HttpCaptioner::caption(const std::string& frame_ref,
                                   const std::string& prompt) {
  json content = json::array({
      json{{"type", "image_url"}, {"image_url", {{"url", frame_ref}}}},
      json{{"type", "text"}, {"text", prompt}},
  });
  json messages = json::array({json{{"role", "user"}, {"content", content}}});
  json reply = post_json(config_, "/chat/completions",
                         chat_request_body(config_, messages));
  std::string text = completion_text(reply);
  if (is_blank(text)) {
    throw EmptyCaptionReturned("captioner returned an empty caption for frame '" +
                               frame_ref + "'");
  }
  return text;
}

// ---- factories ----

Backends make_scripted_backends(std::shared_ptr<const Script> script,
                                ScriptedOptions options) {
  auto session = std::make_shared<ScriptedSession>(std::move(script));
  Backends b;
  b.planner = std::make_shared<ScriptedChat>(session, ScriptRole::plan);
  b.interactor = std::make_shared<ScriptedChat>(session, ScriptRole::interact);
  b.answerer = std::make_shared<ScriptedChat>(session, ScriptRole::answer);
  b.embedder = std::make_shared<ScriptedEmbedder>(session, options);
  b.captioner = std::make_shared<ScriptedCaptioner>(session);
  b.clock = std::make_shared<StepClock>();
  return b;
}

Backends make_http_backends(const HttpBackendConfigs& configs) {
  Backends b;
  b.planner = std::make_shared<HttpChat>(configs.plan);
  b.interactor = std::make_shared<HttpChat>(configs.interact);
  b.answerer = std::make_shared<HttpChat>(configs.answer);
  b.embedder = std::make_shared<HttpEmbedder>(configs.embed);
  b.captioner = std::make_shared<HttpCaptioner>(configs.caption);
  b.clock = std::make_shared<SystemClock>();
  return b;
}

}  // namespace drdoc
