#include "drdoc/docmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace drdoc {

using nlohmann::json;

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Keeps every description on a single line.
std::string single_line(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace

char to_char(AugmentationType kind) { return kind == AugmentationType::A ? 'A' : 'B'; }

AugmentationType augmentation_from_char(char c) {
  if (c == 'A' || c == 'a') return AugmentationType::A;
  if (c == 'B' || c == 'b') return AugmentationType::B;
  throw std::invalid_argument(std::string("unknown augmentation type '") + c + "'");
}

const FrameRecord& VideoDocument::frame(int frame_id) const {
  if (frame_id < 1 || frame_id > total_frames()) throw UnknownFrame(frame_id, total_frames());
  return frames[static_cast<size_t>(frame_id) - 1];
}

VideoDocument new_document(const std::string& video_id, const std::vector<std::string>& captions,
                           double fps) {
  if (captions.empty()) throw EmptyDocument();
  VideoDocument doc;
  doc.video_id = video_id;
  doc.fps = fps;
  doc.frames.reserve(captions.size());
  for (size_t i = 0; i < captions.size(); ++i) {
    if (is_blank(captions[i])) throw EmptyCaption(static_cast<int>(i) + 1);
    FrameRecord rec;
    rec.frame_id = static_cast<int>(i) + 1;
    rec.short_caption = captions[i];
    doc.frames.push_back(std::move(rec));
  }
  return doc;
}

int sample_count(double duration_seconds, double fps) {
  if (!(duration_seconds > 0.0) || !(fps > 0.0)) throw InvalidSampling(duration_seconds, fps);
  double n = std::floor(duration_seconds * fps);
  if (n < 1.0) return 1;
  return static_cast<int>(n);
}

VideoDocument merge_augmentation(const VideoDocument& doc, int frame_id, AugmentationType kind,
                                 const std::string& text) {
  if (frame_id < 1 || frame_id > doc.total_frames())
    throw UnknownFrame(frame_id, doc.total_frames());
  if (is_blank(text)) throw std::invalid_argument("augmentation text is blank");
  VideoDocument out = doc;
  FrameRecord& rec = out.frames[static_cast<size_t>(frame_id) - 1];
  auto& slot = (kind == AugmentationType::A) ? rec.detail_caption : rec.vqa_answer;
  if (slot.has_value()) throw DuplicateAugmentation(frame_id, to_char(kind));
  slot = text;
  return out;
}

VideoDocument with_subtitle(const VideoDocument& doc, int frame_id, const std::string& text) {
  if (frame_id < 1 || frame_id > doc.total_frames())
    throw UnknownFrame(frame_id, doc.total_frames());
  VideoDocument out = doc;
  out.frames[static_cast<size_t>(frame_id) - 1].subtitle = text;
  return out;
}

std::string render_line(const FrameRecord& frame, bool include_subtitles) {
  std::string desc = single_line(frame.short_caption);
  if (frame.detail_caption) desc += "; " + single_line(*frame.detail_caption);
  if (frame.vqa_answer) desc += "; " + single_line(*frame.vqa_answer);
  if (include_subtitles && frame.subtitle) desc += "; " + single_line(*frame.subtitle);
  return "{" + std::to_string(frame.frame_id) + ", " + desc + "}";
}

DocumentText render(const VideoDocument& doc, bool include_subtitles) {
  DocumentText out;
  out.lines.reserve(doc.frames.size());
  for (const FrameRecord& frame : doc.frames) {
    out.lines.push_back(render_line(frame, include_subtitles));
  }
  for (size_t i = 0; i < out.lines.size(); ++i) {
    if (i > 0) out.rendered += '\n';
    out.rendered += out.lines[i];
  }
  return out;
}

std::set<int> augmented_ids(const VideoDocument& doc, AugmentationType kind) {
  std::set<int> ids;
  for (const FrameRecord& frame : doc.frames) {
    const auto& slot = (kind == AugmentationType::A) ? frame.detail_caption : frame.vqa_answer;
    if (slot.has_value()) ids.insert(frame.frame_id);
  }
  return ids;
}

std::string save(const VideoDocument& doc) {
  std::string out;
  json header = {{"format", "drdoc-v1"}, {"fps", doc.fps}, {"total_frames", doc.total_frames()}};
  out += header.dump();
  out += '\n';
  for (const FrameRecord& frame : doc.frames) {
    json rec = {{"video_id", doc.video_id},
                {"frame_id", frame.frame_id},
                {"caption", frame.short_caption},
                {"detail", frame.detail_caption ? json(*frame.detail_caption) : json(nullptr)},
                {"vqa", frame.vqa_answer ? json(*frame.vqa_answer) : json(nullptr)},
                {"subtitle", frame.subtitle ? json(*frame.subtitle) : json(nullptr)}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

VideoDocument load(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string line;
  if (!std::getline(in, line)) throw CorruptDocument("empty input");

  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CorruptDocument(std::string("bad header: ") + e.what());
  }
  if (!header.is_object() || header.value("format", "") != "drdoc-v1")
    throw CorruptDocument("missing drdoc-v1 header");
  if (!header.contains("fps") || !header["fps"].is_number())
    throw CorruptDocument("header lacks fps");
  if (!header.contains("total_frames") || !header["total_frames"].is_number_integer())
    throw CorruptDocument("header lacks total_frames");

  VideoDocument doc;
  doc.fps = header["fps"].get<double>();
  int expected = header["total_frames"].get<int>();

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorruptDocument("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("frame_id") || !rec["frame_id"].is_number_integer() ||
        !rec.contains("caption") || !rec["caption"].is_string() || !rec.contains("video_id") ||
        !rec["video_id"].is_string())
      throw CorruptDocument("line " + std::to_string(line_no) + ": not a frame record");

    FrameRecord frame;
    frame.frame_id = rec["frame_id"].get<int>();
    frame.short_caption = rec["caption"].get<std::string>();
    if (frame.short_caption.empty())
      throw CorruptDocument("line " + std::to_string(line_no) + ": empty caption");
    auto opt_field = [&](const char* key) -> std::optional<std::string> {
      if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
      if (!rec[key].is_string())
        throw CorruptDocument("line " + std::to_string(line_no) + ": field " + key +
                              " is not a string");
      return rec[key].get<std::string>();
    };
    frame.detail_caption = opt_field("detail");
    frame.vqa_answer = opt_field("vqa");
    frame.subtitle = opt_field("subtitle");

    std::string vid = rec["video_id"].get<std::string>();
    if (doc.frames.empty()) {
      doc.video_id = vid;
    } else if (vid != doc.video_id) {
      throw CorruptDocument("line " + std::to_string(line_no) + ": mixed video ids");
    }
    if (frame.frame_id != static_cast<int>(doc.frames.size()) + 1)
      throw CorruptDocument("line " + std::to_string(line_no) + ": frame ids not contiguous from 1");
    doc.frames.push_back(std::move(frame));
  }

  if (doc.frames.empty()) throw CorruptDocument("no frame records");
  if (doc.total_frames() != expected)
    throw CorruptDocument("header says " + std::to_string(expected) + " frames, found " +
                          std::to_string(doc.total_frames()));
  return doc;
}

void save_file(const VideoDocument& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << save(doc);
}

VideoDocument load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptDocument("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load(buf.str());
}

}  // namespace drdoc
