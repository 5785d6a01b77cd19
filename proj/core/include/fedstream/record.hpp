#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedstream/types.hpp"

namespace fedstream {

// One ingested log line. Fields keep input order; lookups are linear
// (records are small and short-lived).
struct LogRecord {
  std::string record_id;
  int64_t timestamp_ms = 0;
  std::vector<std::pair<std::string, std::string>> fields;
  std::optional<ClassLabel> label;
  std::optional<std::string> label_source;

  const std::string* field(std::string_view name) const {
    for (const auto& [k, v] : fields)
      if (k == name) return &v;
    return nullptr;
  }
};

enum class RecordFormat : uint8_t { jsonl = 0, csv = 1 };

// Column mapping from a CSV header row. Columns "id" and "ts" are
// required, "label" is recognized, everything else lands in fields.
class CsvHeader {
 public:
  explicit CsvHeader(std::string_view header_line);
  LogRecord parse(std::string_view line) const;

 private:
  std::vector<std::string> columns_;
  int id_col_ = -1;
  int ts_col_ = -1;
  int label_col_ = -1;
};

LogRecord parse_jsonl_record(std::string_view line);

// CSV parsing needs header context; pass the header built from row one.
LogRecord parse_record(std::string_view line, RecordFormat format,
                       const CsvHeader* header = nullptr);

// RFC4180-style split of one CSV line (quotes, "" escapes).
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

}  // namespace fedstream
