#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedstream {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  DimensionMismatch(size_t got, size_t want)
      : Error("dimension mismatch: got " + std::to_string(got) + ", model expects " +
              std::to_string(want)) {}
};

struct ParseError : Error {
  size_t position;
  ParseError(size_t pos, const std::string& reason)
      : Error("parse error at " + std::to_string(pos) + ": " + reason), position(pos) {}
};

struct MissingField : Error {
  explicit MissingField(const std::string& field) : Error("missing required field: " + field) {}
};

struct SchemaMismatch : Error {
  using Error::Error;
  SchemaMismatch() : Error("schema hash mismatch") {}
};

struct MixedKinds : Error {
  MixedKinds() : Error("cannot merge envelopes of different model kinds") {}
};

struct KindMismatch : Error {
  using Error::Error;
  KindMismatch() : Error("model kind mismatch") {}
};

struct WeightArityMismatch : Error {
  WeightArityMismatch(size_t weights, size_t models)
      : Error("merge weights arity " + std::to_string(weights) + " != model count " +
              std::to_string(models)) {}
};

struct ArchMismatch : Error {
  ArchMismatch() : Error("mlp architectures differ") {}
};

struct PayloadError : Error {
  using Error::Error;
};

struct UnknownMember : Error {
  explicit UnknownMember(const std::string& org) : Error("unknown community member: " + org) {}
};

struct DuplicatePost : Error {
  DuplicatePost(uint64_t round, const std::string& org)
      : Error("duplicate post for round " + std::to_string(round) + " from " + org) {}
};

struct EmptyRound : Error {
  explicit EmptyRound(uint64_t round) : Error("round " + std::to_string(round) + " has no envelopes") {}
};

struct UnknownRecord : Error {
  explicit UnknownRecord(const std::string& id)
      : Error("record not in retention window: " + id) {}
};

struct DuplicateFeedback : Error {
  DuplicateFeedback(const std::string& id, const std::string& op)
      : Error("duplicate feedback for record " + id + " from operator " + op) {}
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace fedstream
