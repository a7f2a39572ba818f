#include "drdoc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "drdoc/errors.hpp"

namespace drdoc {

namespace {

using nlohmann::json;

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine over vectors of size " + std::to_string(a.size()) +
                            " and " + std::to_string(b.size()));
  }
  if (a.empty()) {
    throw DimensionMismatch("cosine over empty vectors");
  }
  double na = norm(a);
  double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw ZeroVector("cosine undefined for a zero-norm vector");
  }
  double dot = 0.0;
  for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

// ---- embedding cache ----

std::string caption_hash(const std::string& caption) {
  static const char* hex = "0123456789abcdef";
  uint64_t h = stable_hash64(caption);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

void EmbeddingCache::put(const std::string& video_id, int frame_id,
                         const std::string& hash, std::vector<double> vector) {
  if (vector.empty()) {
    throw std::invalid_argument("cached embedding must be non-empty");
  }
  entries_[Key{video_id, frame_id, hash}] = std::move(vector);
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& video_id,
                                                       int frame_id,
                                                       const std::string& hash) const {
  auto it = entries_.find(Key{video_id, frame_id, hash});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

EmbeddingCache EmbeddingCache::parse_jsonl(const std::string& text) {
  EmbeddingCache cache;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json entry;
    try {
      entry = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("embedding cache line " + std::to_string(line_no) +
                                  ": invalid JSON: " + e.what());
    }
    if (!entry.is_object() || !entry.contains("video_id") ||
        !entry["video_id"].is_string() || !entry.contains("frame_id") ||
        !entry["frame_id"].is_number_integer() || !entry.contains("caption_hash") ||
        !entry["caption_hash"].is_string() || !entry.contains("vector") ||
        !entry["vector"].is_array() || entry["vector"].empty()) {
      throw std::invalid_argument("embedding cache line " + std::to_string(line_no) +
                                  ": expected video_id, frame_id, caption_hash, vector");
    }
    std::vector<double> v;
    v.reserve(entry["vector"].size());
    for (const auto& x : entry["vector"]) {
      if (!x.is_number()) {
        throw std::invalid_argument("embedding cache line " + std::to_string(line_no) +
                                    ": vector holds a non-numeric value");
      }
      v.push_back(x.get<double>());
    }
    cache.put(entry["video_id"].get<std::string>(), entry["frame_id"].get<int>(),
              entry["caption_hash"].get<std::string>(), std::move(v));
  }
  return cache;
}

EmbeddingCache EmbeddingCache::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return EmbeddingCache{};
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str());
}

std::string EmbeddingCache::dump_jsonl() const {
  std::string out;
  for (const auto& [key, vector] : entries_) {
    json entry;
    entry["video_id"] = std::get<0>(key);
    entry["frame_id"] = std::get<1>(key);
    entry["caption_hash"] = std::get<2>(key);
    entry["vector"] = vector;
    out += entry.dump();
    out += '\n';
  }
  return out;
}

void EmbeddingCache::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::invalid_argument("cannot write embedding cache file: " + path);
  }
  out << dump_jsonl();
}

// ---- framewise embedding ----

FrameEmbeddings embed_frames(const VideoDocument& doc, EmbedBackend& embedder,
                             EmbeddingCache* cache) {
  FrameEmbeddings out;
  out.video_id = doc.video_id;
  out.vectors.reserve(doc.frames.size());

  // Collect cache misses; a single batched call keeps backend traffic minimal
  // and the assembly below restores frame order regardless.
  std::vector<size_t> miss_index;
  std::vector<std::string> miss_texts;
  std::vector<std::optional<std::vector<double>>> resolved(doc.frames.size());
  for (size_t i = 0; i < doc.frames.size(); ++i) {
    const FrameRecord& frame = doc.frames[i];
    if (cache) {
      resolved[i] = cache->get(doc.video_id, frame.frame_id,
                               caption_hash(frame.short_caption));
    }
    if (!resolved[i]) {
      miss_index.push_back(i);
      miss_texts.push_back(frame.short_caption);
    }
  }
  if (!miss_texts.empty()) {
    auto fresh = embedder.embed(miss_texts);
    if (fresh.size() != miss_texts.size()) {
      throw MalformedResponse("embedder returned " + std::to_string(fresh.size()) +
                              " vectors for " + std::to_string(miss_texts.size()) +
                              " captions");
    }
    for (size_t j = 0; j < miss_index.size(); ++j) {
      size_t i = miss_index[j];
      if (cache) {
        cache->put(doc.video_id, doc.frames[i].frame_id,
                   caption_hash(doc.frames[i].short_caption), fresh[j]);
      }
      resolved[i] = std::move(fresh[j]);
    }
  }

  for (size_t i = 0; i < doc.frames.size(); ++i) {
    std::vector<double>& v = *resolved[i];
    if (v.empty()) {
      throw MalformedResponse("embedder returned an empty vector");
    }
    if (out.dimension == 0) {
      out.dimension = static_cast<int>(v.size());
    } else if (v.size() != static_cast<size_t>(out.dimension)) {
      throw DimensionMismatch("frame embeddings disagree on dimension: " +
                              std::to_string(out.dimension) + " vs " +
                              std::to_string(v.size()));
    }
    out.vectors.emplace_back(doc.frames[i].frame_id, std::move(v));
  }
  return out;
}

RetrievalResult retrieve_topk(const std::string& query,
                              const FrameEmbeddings& embeddings, int k,
                              EmbedBackend& embedder) {
  if (k < 1) {
    throw std::invalid_argument("retrieval k must be at least 1, got " +
                                std::to_string(k));
  }
  if (embeddings.vectors.empty()) {
    throw std::invalid_argument("retrieval over an empty embedding store");
  }
  auto q = embedder.embed({query});
  if (q.size() != 1) {
    throw MalformedResponse("embedder returned " + std::to_string(q.size()) +
                            " vectors for one query");
  }

  RetrievalResult result;
  result.k = k;
  result.ranked.reserve(embeddings.vectors.size());
  for (const auto& [frame_id, vector] : embeddings.vectors) {
    result.ranked.push_back(ScoredFrame{frame_id, cosine(q[0], vector)});
  }
  size_t keep = std::min(result.ranked.size(), static_cast<size_t>(k));
  auto better = [](const ScoredFrame& a, const ScoredFrame& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.frame_id < b.frame_id;
  };
  std::partial_sort(result.ranked.begin(), result.ranked.begin() + keep,
                    result.ranked.end(), better);
  result.ranked.resize(keep);
  return result;
}

}  // namespace drdoc
