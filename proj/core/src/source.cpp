#include "fedstream/source.hpp"

#include "fedstream/errors.hpp"

namespace fedstream {

FileSource::FileSource(const std::string& path, RecordFormat format)
    : in_(path, std::ios::binary), format_(format) {
  if (!in_) throw IoError("cannot open input file: " + path);
  if (format_ == RecordFormat::csv) {
    std::string header_line;
    if (!std::getline(in_, header_line)) throw IoError("CSV input has no header row: " + path);
    header_ = std::make_unique<CsvHeader>(header_line);
  }
}

std::optional<LogRecord> FileSource::next() {
  std::string line;
  while (std::getline(in_, line)) {
    if (line.empty()) continue;
    try {
      return parse_record(line, format_, header_.get());
    } catch (const Error&) {
      ++parse_errors_;
    }
  }
  if (in_.bad()) ++io_errors_;
  return std::nullopt;
}

RecordFormat guess_format(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return RecordFormat::csv;
  return RecordFormat::jsonl;
}

}  // namespace fedstream
