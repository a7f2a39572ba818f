#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drdoc/errors.hpp"

namespace drdoc {

// The two kinds of augmentation a frame record can carry.
// A = detailed, question-agnostic image description; B = question-conditioned answer.
enum class AugmentationType { A, B };

char to_char(AugmentationType kind);
AugmentationType augmentation_from_char(char c);

// One sampled frame of the video document. detail_caption and vqa_answer are
// write-once: merge_augmentation refuses to overwrite a slot that is already set.
struct FrameRecord {
  int frame_id = 0;  // 1-based temporal position
  std::string short_caption;
  std::optional<std::string> detail_caption;  // type A
  std::optional<std::string> vqa_answer;      // type B
  std::optional<std::string> subtitle;

  bool operator==(const FrameRecord&) const = default;
};

// Textual surrogate of a video: one caption line per sampled frame, ids 1..T
// with no gaps. Operations return new documents; a value is never mutated.
struct VideoDocument {
  std::string video_id;
  std::vector<FrameRecord> frames;  // sorted ascending by frame_id, ids exactly 1..T
  double fps = 0.0;                 // sampling rate the captions were produced at

  int total_frames() const { return static_cast<int>(frames.size()); }
  const FrameRecord& frame(int frame_id) const;  // throws UnknownFrame

  bool operator==(const VideoDocument&) const = default;
};

// Canonical rendering fed to the agents: one `{frame_id, description}` line per frame.
struct DocumentText {
  std::vector<std::string> lines;
  std::string rendered;  // lines joined with '\n'
};

// Assembles a fresh document from per-frame short captions. Frame ids are
// assigned 1..len(captions) in input order; augmentation slots start unset.
VideoDocument new_document(const std::string& video_id, const std::vector<std::string>& captions,
                           double fps);

// Number of frames drawn from a video of the given duration: floor(duration*fps),
// clamped to at least 1.
int sample_count(double duration_seconds, double fps);

// Returns a copy of doc with the (frame_id, kind) slot set to text.
// The slot must be unset; duplicates signal an agent-loop bookkeeping bug.
VideoDocument merge_augmentation(const VideoDocument& doc, int frame_id, AugmentationType kind,
                                 const std::string& text);

// Returns a copy of doc with the subtitle of frame_id set (overwriting any
// previous subtitle; subtitles are attached once at load, not by the loop).
VideoDocument with_subtitle(const VideoDocument& doc, int frame_id, const std::string& text);

// Renders one line per frame: `{id, short[; detail][; vqa][; subtitle]}`.
// Byte-deterministic for a given document; newlines inside texts become spaces.
DocumentText render(const VideoDocument& doc, bool include_subtitles);

// Renders a single frame's line with the same rules as render().
std::string render_line(const FrameRecord& frame, bool include_subtitles);

// Frame ids whose slot for the given kind is set.
std::set<int> augmented_ids(const VideoDocument& doc, AugmentationType kind);

// JSON Lines serialization: a `drdoc-v1` header line followed by one object per
// frame. load(save(doc)) == doc field for field.
std::string save(const VideoDocument& doc);
VideoDocument load(const std::string& bytes);

void save_file(const VideoDocument& doc, const std::string& path);
VideoDocument load_file(const std::string& path);

}  // namespace drdoc
