#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedstream/record.hpp"

namespace fedstream {

class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual std::optional<LogRecord> next() = 0;
  virtual uint64_t parse_errors() const { return 0; }
  virtual uint64_t io_errors() const { return 0; }
};

class VectorSource final : public RecordSource {
 public:
  explicit VectorSource(std::vector<LogRecord> records) : records_(std::move(records)) {}

  std::optional<LogRecord> next() override {
    if (pos_ >= records_.size()) return std::nullopt;
    return records_[pos_++];
  }

 private:
  std::vector<LogRecord> records_;
  size_t pos_ = 0;
};

// Streams a JSONL or CSV file. Malformed lines are counted, not fatal;
// a missing file throws IoError at construction.
class FileSource final : public RecordSource {
 public:
  FileSource(const std::string& path, RecordFormat format);

  std::optional<LogRecord> next() override;
  uint64_t parse_errors() const override { return parse_errors_; }
  uint64_t io_errors() const override { return io_errors_; }

 private:
  std::ifstream in_;
  RecordFormat format_;
  std::unique_ptr<CsvHeader> header_;
  uint64_t parse_errors_ = 0;
  uint64_t io_errors_ = 0;
};

RecordFormat guess_format(const std::string& path);

}  // namespace fedstream
