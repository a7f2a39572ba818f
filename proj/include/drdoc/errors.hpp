#pragma once

#include <stdexcept>
#include <string>

namespace drdoc {

// Base class for every error the library raises on its own behalf.
// Precondition violations on caller-supplied arguments use std::invalid_argument.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- document model ----

class EmptyDocument : public Error {
public:
  EmptyDocument() : Error("document has no captions") {}
};

class EmptyCaption : public Error {
public:
  explicit EmptyCaption(int frame_id)
      : Error("caption for frame " + std::to_string(frame_id) + " is blank"), frame_id(frame_id) {}
  int frame_id;
};

class InvalidSampling : public Error {
public:
  InvalidSampling(double duration_seconds, double fps)
      : Error("invalid sampling: duration=" + std::to_string(duration_seconds) +
              " fps=" + std::to_string(fps)) {}
};

class UnknownFrame : public Error {
public:
  UnknownFrame(int frame_id, int total_frames)
      : Error("frame " + std::to_string(frame_id) + " outside 1.." + std::to_string(total_frames)),
        frame_id(frame_id) {}
  int frame_id;
};

class DuplicateAugmentation : public Error {
public:
  DuplicateAugmentation(int frame_id, char kind)
      : Error("frame " + std::to_string(frame_id) + " already has type " + std::string(1, kind) +
              " augmentation"),
        frame_id(frame_id), kind(kind) {}
  int frame_id;
  char kind;
};

class CorruptDocument : public Error {
public:
  explicit CorruptDocument(const std::string& detail) : Error("corrupt document: " + detail) {}
};

// ---- backends ----

class BackendUnavailable : public Error {
public:
  explicit BackendUnavailable(const std::string& detail)
      : Error("backend unavailable: " + detail) {}
};

class MalformedResponse : public Error {
public:
  explicit MalformedResponse(const std::string& detail)
      : Error("malformed backend response: " + detail) {}
};

class DimensionMismatch : public Error {
public:
  explicit DimensionMismatch(const std::string& detail)
      : Error("dimension mismatch: " + detail) {}
};

class EmptyCaptionReturned : public Error {
public:
  explicit EmptyCaptionReturned(const std::string& frame_ref)
      : Error("captioner returned no text for " + frame_ref) {}
};

// ---- retrieval ----

class ZeroVector : public Error {
public:
  ZeroVector() : Error("vector has zero norm") {}
  explicit ZeroVector(const std::string& detail) : Error(detail) {}
};

// ---- agent output parsing ----

class NoStructureFound : public Error {
public:
  NoStructureFound() : Error("no JSON object or array found in text") {}
};

class UnparseableVerdict : public Error {
public:
  explicit UnparseableVerdict(const std::string& last_completion)
      : Error("planner reply unparseable after retries; last completion: " + last_completion) {}
};

class UnparseableRequests : public Error {
public:
  explicit UnparseableRequests(const std::string& last_completion)
      : Error("interaction reply unparseable after retries; last completion: " + last_completion) {}
};

class UnparseableAnswer : public Error {
public:
  explicit UnparseableAnswer(const std::string& last_completion)
      : Error("answer reply unparseable after retries; last completion: " + last_completion) {}
};

class InvalidLetter : public Error {
public:
  InvalidLetter(const std::string& letter, int option_count)
      : Error("answer letter '" + letter + "' outside the " + std::to_string(option_count) +
              "-option set") {}
};

// ---- harness ----

class SchemaError : public Error {
public:
  SchemaError(int line, const std::string& field, const std::string& detail)
      : Error("schema error at line " + std::to_string(line) + ", field '" + field + "': " + detail),
        line(line), field(field) {}
  int line;
  std::string field;
};

class MissingCache : public Error {
public:
  explicit MissingCache(const std::string& video_id)
      : Error("no caption cache for video '" + video_id + "'"), video_id(video_id) {}
  std::string video_id;
};

}  // namespace drdoc
