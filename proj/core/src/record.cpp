#include "fedstream/record.hpp"

#include <charconv>

#include <json.hpp>

#include "fedstream/errors.hpp"

namespace fedstream {

bool model_kind_from_string(const std::string& s, ModelKind& out) {
  if (s == "mlp") out = ModelKind::mlp;
  else if (s == "nb") out = ModelKind::nb;
  else if (s == "forest") out = ModelKind::forest;
  else return false;
  return true;
}

bool class_label_from_string(const std::string& s, ClassLabel& out) {
  if (s == "benign") out = ClassLabel::benign;
  else if (s == "malicious") out = ClassLabel::malicious;
  else return false;
  return true;
}

namespace {

int64_t parse_ts(std::string_view s) {
  int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ParseError(0, "timestamp is not an integer: '" + std::string(s) + "'");
  if (v < 0) throw ParseError(0, "timestamp is negative");
  return v;
}

std::string scalar_to_string(const nlohmann::ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();  // numbers keep their JSON text form
}

}  // namespace

LogRecord parse_jsonl_record(std::string_view line) {
  if (line.empty()) throw ParseError(0, "empty line");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ParseError(0, std::string("bad JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(0, "record line is not a JSON object");

  LogRecord r;
  for (const auto& [key, value] : j.items()) {
    if (key == "id") {
      if (!value.is_string()) throw ParseError(0, "'id' must be a string");
      r.record_id = value.get<std::string>();
    } else if (key == "ts") {
      if (value.is_number_integer()) {
        r.timestamp_ms = value.get<int64_t>();
        if (r.timestamp_ms < 0) throw ParseError(0, "timestamp is negative");
      } else if (value.is_string()) {
        r.timestamp_ms = parse_ts(value.get<std::string>());
      } else {
        throw ParseError(0, "'ts' must be an integer");
      }
    } else if (key == "label") {
      ClassLabel y;
      if (!value.is_string() || !class_label_from_string(value.get<std::string>(), y))
        throw ParseError(0, "'label' must be \"benign\" or \"malicious\"");
      r.label = y;
      r.label_source = "stream";
    } else if (value.is_structured()) {
      // nested objects/arrays are undeclared structure; ignored
      continue;
    } else if (value.is_null()) {
      continue;
    } else {
      r.fields.emplace_back(key, scalar_to_string(value));
    }
  }
  if (r.record_id.empty()) throw MissingField("id");
  if (!j.contains("ts")) throw MissingField("ts");
  return r;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\r' && i + 1 == line.size()) {
      // tolerate CRLF input
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError(line.size(), "unterminated quote in CSV line");
  out.push_back(std::move(cur));
  return out;
}

std::string csv_escape(std::string_view field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

CsvHeader::CsvHeader(std::string_view header_line) {
  columns_ = split_csv_line(header_line);
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == "id") id_col_ = static_cast<int>(i);
    else if (columns_[i] == "ts") ts_col_ = static_cast<int>(i);
    else if (columns_[i] == "label") label_col_ = static_cast<int>(i);
  }
  if (id_col_ < 0) throw MissingField("id");
  if (ts_col_ < 0) throw MissingField("ts");
}

LogRecord CsvHeader::parse(std::string_view line) const {
  if (line.empty()) throw ParseError(0, "empty line");
  auto cells = split_csv_line(line);
  if (cells.size() != columns_.size())
    throw ParseError(0, "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(columns_.size()));
  LogRecord r;
  for (size_t i = 0; i < cells.size(); ++i) {
    const int col = static_cast<int>(i);
    if (col == id_col_) {
      r.record_id = cells[i];
    } else if (col == ts_col_) {
      r.timestamp_ms = parse_ts(cells[i]);
    } else if (col == label_col_) {
      if (cells[i].empty()) continue;
      ClassLabel y;
      if (!class_label_from_string(cells[i], y))
        throw ParseError(0, "bad label value '" + cells[i] + "'");
      r.label = y;
      r.label_source = "stream";
    } else {
      r.fields.emplace_back(columns_[i], cells[i]);
    }
  }
  if (r.record_id.empty()) throw MissingField("id");
  return r;
}

LogRecord parse_record(std::string_view line, RecordFormat format, const CsvHeader* header) {
  if (line.empty()) throw ParseError(0, "empty line");
  if (format == RecordFormat::jsonl) return parse_jsonl_record(line);
  if (!header) throw ParseError(0, "CSV parsing requires a header");
  return header->parse(line);
}

}  // namespace fedstream
