#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "drdoc/backends.hpp"
#include "drdoc/docmodel.hpp"

namespace drdoc {

// Per-frame embedding store for one video document.
struct FrameEmbeddings {
  std::string video_id;
  int dimension = 0;
  // (frame_id, vector), frame ids unique and ascending, all vectors `dimension` wide.
  std::vector<std::pair<int, std::vector<double>>> vectors;
};

struct ScoredFrame {
  int frame_id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredFrame&, const ScoredFrame&) = default;
};

struct RetrievalResult {
  // Sorted by score descending, ties by ascending frame id; min(k, total frames) long.
  std::vector<ScoredFrame> ranked;
  int k = 0;
};

// dot(a,b) / (|a||b|). Throws DimensionMismatch on unequal sizes, ZeroVector if
// either norm is zero.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Write-through cache keyed by (video_id, frame_id, caption hash) so re-running
// questions on the same video does not re-embed unchanged captions.
class EmbeddingCache {
public:
  void put(const std::string& video_id, int frame_id, const std::string& caption_hash,
           std::vector<double> vector);
  std::optional<std::vector<double>> get(const std::string& video_id, int frame_id,
                                         const std::string& caption_hash) const;
  size_t size() const { return entries_.size(); }

  // JSON Lines, one entry per line; later duplicates of a key win on parse, and
  // dumps are key-sorted so the on-disk form is deterministic.
  static EmbeddingCache parse_jsonl(const std::string& text);
  static EmbeddingCache load_file(const std::string& path);  // missing file -> empty
  std::string dump_jsonl() const;
  void save_file(const std::string& path) const;

private:
  using Key = std::tuple<std::string, int, std::string>;
  std::map<Key, std::vector<double>> entries_;
};

// Stable hex digest of a caption, used as the cache key component.
std::string caption_hash(const std::string& caption);

// Embeds each frame's short caption (the initial-document text; augmentations do
// not participate in retrieval). Results are assembled in frame order. With a
// cache, only missing captions reach the backend and fresh vectors are written
// back.
FrameEmbeddings embed_frames(const VideoDocument& doc, EmbedBackend& embedder,
                             EmbeddingCache* cache = nullptr);

// Ranks all frames by cosine similarity between the embedded query text and each
// frame vector, returning the top min(k, T). Exact scan, no approximation.
RetrievalResult retrieve_topk(const std::string& query, const FrameEmbeddings& embeddings,
                              int k, EmbedBackend& embedder);

}  // namespace drdoc
