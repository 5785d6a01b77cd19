#include "fedstream/schema.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "fedstream/bytes.hpp"

namespace fedstream {

namespace {

// Shortest round-trip decimal rendering; deterministic across runs.
std::string num_repr(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

FeatureSchema::FeatureSchema(std::vector<FeatureDef> features) : features_(std::move(features)) {
  validate();
  for (size_t i = 0; i < features_.size(); ++i) {
    by_source_[features_[i].source_field].push_back(i);
  }
  digest_ = fnv1a64(canonical_text());
}

void FeatureSchema::validate() const {
  if (features_.empty()) throw ConfigError("schema has no features");
  std::unordered_set<std::string> names;
  for (const auto& f : features_) {
    if (f.name.empty()) throw ConfigError("feature with empty name");
    if (!names.insert(f.name).second) throw ConfigError("duplicate feature name: " + f.name);
    if (f.source_field.empty()) throw ConfigError("feature " + f.name + " has empty source");
    if (f.kind == FeatureKind::numeric) {
      if (!(f.lo < f.hi)) throw ConfigError("feature " + f.name + " needs lo < hi");
      if (f.bins < 2) throw ConfigError("feature " + f.name + " needs >= 2 bins");
    } else {
      if (f.categories.empty()) throw ConfigError("feature " + f.name + " has no categories");
    }
  }
}

std::string FeatureSchema::canonical_text() const {
  std::string out = "fedstream-schema-v1\n";
  for (const auto& f : features_) {
    out += "feature;";
    out += f.name;
    out += ';';
    if (f.kind == FeatureKind::numeric) {
      out += "numeric;";
      out += f.source_field;
      out += ';';
      out += num_repr(f.lo);
      out += ';';
      out += num_repr(f.hi);
      out += ';';
      out += std::to_string(f.bins);
    } else {
      out += "categorical;";
      out += f.source_field;
      out += ';';
      for (size_t i = 0; i < f.categories.size(); ++i) {
        if (i) out += ',';
        out += f.categories[i];
      }
    }
    out += '\n';
  }
  return out;
}

const std::vector<size_t>* FeatureSchema::features_for_source(const std::string& source) const {
  auto it = by_source_.find(source);
  return it == by_source_.end() ? nullptr : &it->second;
}

uint64_t schema_digest(const FeatureSchema& schema) { return schema.digest(); }

namespace {

struct NumSpec {
  const char* name;
  double lo;
  double hi;
  uint32_t bins;
};

// 78 numeric features; source field = feature name.
constexpr NumSpec kDefaultNumeric[] = {
    {"url_length", 0, 2048, 32},
    {"url_path_depth", 0, 32, 32},
    {"url_entropy", 0, 8, 32},
    {"url_digit_ratio", 0, 1, 32},
    {"url_special_char_ratio", 0, 1, 32},
    {"query_param_count", 0, 64, 32},
    {"query_length", 0, 1024, 32},
    {"query_entropy", 0, 8, 32},
    {"fragment_length", 0, 256, 32},
    {"path_token_count", 0, 32, 32},
    {"path_max_token_len", 0, 256, 32},
    {"path_dot_count", 0, 16, 16},
    {"host_length", 0, 253, 32},
    {"host_entropy", 0, 8, 32},
    {"host_digit_ratio", 0, 1, 32},
    {"host_hyphen_count", 0, 16, 16},
    {"subdomain_count", 0, 10, 10},
    {"domain_age_days", 0, 10000, 32},
    {"domain_rank_log", 0, 9, 32},
    {"tld_abuse_score", 0, 1, 32},
    {"ip_host_flag", 0, 1, 2},
    {"port_nonstandard_flag", 0, 1, 2},
    {"req_header_count", 0, 64, 32},
    {"req_header_bytes", 0, 8192, 32},
    {"resp_header_count", 0, 64, 32},
    {"resp_header_bytes", 0, 8192, 32},
    {"cookie_count", 0, 32, 32},
    {"cookie_bytes", 0, 4096, 32},
    {"referer_present_flag", 0, 1, 2},
    {"referer_entropy", 0, 8, 32},
    {"ua_length", 0, 512, 32},
    {"ua_entropy", 0, 8, 32},
    {"ua_rarity_score", 0, 1, 32},
    {"content_length_log", 0, 9, 32},
    {"resp_bytes_log", 0, 9, 32},
    {"req_bytes_log", 0, 9, 32},
    {"bytes_ratio_log", -6, 6, 32},
    {"duration_ms_log", 0, 7, 32},
    {"status_code_class", 0, 5, 5},
    {"redirect_count", 0, 10, 10},
    {"error_4xx_ratio", 0, 1, 32},
    {"error_5xx_ratio", 0, 1, 32},
    {"req_per_minute_host", 0, 600, 32},
    {"req_per_minute_total", 0, 6000, 32},
    {"interarrival_ms_log", 0, 7, 32},
    {"interarrival_var_log", 0, 14, 32},
    {"burst_length", 0, 128, 32},
    {"night_hour_flag", 0, 1, 2},
    {"weekend_flag", 0, 1, 2},
    {"hour_of_day", 0, 24, 24},
    {"dns_query_count", 0, 64, 32},
    {"dns_fail_ratio", 0, 1, 32},
    {"tls_version_score", 0, 4, 8},
    {"tls_cipher_rarity", 0, 1, 32},
    {"tls_cert_age_days", 0, 3650, 32},
    {"tls_cert_valid_days", 0, 3650, 32},
    {"tls_san_count", 0, 64, 32},
    {"tls_self_signed_flag", 0, 1, 2},
    {"ja3_rarity_score", 0, 1, 32},
    {"http_version_score", 0, 3, 6},
    {"method_rarity_score", 0, 1, 32},
    {"upload_download_ratio", 0, 16, 32},
    {"post_no_referer_flag", 0, 1, 2},
    {"uri_encoded_ratio", 0, 1, 32},
    {"base64_token_ratio", 0, 1, 32},
    {"hex_token_ratio", 0, 1, 32},
    {"vowel_consonant_ratio", 0, 4, 32},
    {"bigram_rarity_score", 0, 1, 32},
    {"keyword_exe_flag", 0, 1, 2},
    {"keyword_script_flag", 0, 1, 2},
    {"ext_rarity_score", 0, 1, 32},
    {"mime_mismatch_flag", 0, 1, 2},
    {"host_fanout_degree", 0, 256, 32},
    {"dst_ip_count_host", 0, 64, 32},
    {"asn_rarity_score", 0, 1, 32},
    {"geo_distance_km_log", 0, 5, 32},
    {"proxy_chain_len", 0, 8, 8},
    {"conn_reuse_ratio", 0, 1, 32},
};

}  // namespace

SchemaPtr default_schema() {
  static const SchemaPtr schema = [] {
    std::vector<FeatureDef> defs;
    defs.reserve(81);
    for (const auto& n : kDefaultNumeric) {
      FeatureDef d;
      d.name = n.name;
      d.kind = FeatureKind::numeric;
      d.source_field = n.name;
      d.lo = n.lo;
      d.hi = n.hi;
      d.bins = n.bins;
      defs.push_back(std::move(d));
    }
    FeatureDef method;
    method.name = "http_method";
    method.kind = FeatureKind::categorical;
    method.source_field = "http_method";
    method.categories = {"GET", "POST", "HEAD", "PUT", "DELETE", "OPTIONS", "PATCH"};
    defs.push_back(std::move(method));

    FeatureDef ua;
    ua.name = "ua_category";
    ua.kind = FeatureKind::categorical;
    ua.source_field = "ua_category";
    ua.categories = {"browser", "mobile", "bot", "script", "crawler", "unknown_agent"};
    defs.push_back(std::move(ua));

    FeatureDef ct;
    ct.name = "content_type_category";
    ct.kind = FeatureKind::categorical;
    ct.source_field = "content_type_category";
    ct.categories = {"html", "json", "image", "script", "binary", "text", "media"};
    defs.push_back(std::move(ct));

    return std::make_shared<const FeatureSchema>(std::move(defs));
  }();
  return schema;
}

FeatureSchema load_schema_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schema file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("version") || !j.contains("features"))
    throw ConfigError("schema file needs top-level 'version' and 'features'");
  if (j["version"].get<int>() != 1) throw ConfigError("unsupported schema version");

  std::vector<FeatureDef> defs;
  for (const auto& jf : j["features"]) {
    FeatureDef d;
    d.name = jf.at("name").get<std::string>();
    d.source_field = jf.value("source", d.name);
    const std::string kind = jf.at("kind").get<std::string>();
    if (kind == "numeric") {
      d.kind = FeatureKind::numeric;
      const auto& range = jf.at("range");
      d.lo = range.at(0).get<double>();
      d.hi = range.at(1).get<double>();
      d.bins = jf.value("bins", 32u);
    } else if (kind == "categorical") {
      d.kind = FeatureKind::categorical;
      for (const auto& c : jf.at("categories")) d.categories.push_back(c.get<std::string>());
    } else {
      throw ConfigError("feature " + d.name + ": unknown kind '" + kind + "'");
    }
    defs.push_back(std::move(d));
  }
  return FeatureSchema(std::move(defs));
}

FeatureSchema load_schema_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open schema file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_schema_json(ss.str());
}

std::string schema_to_json(const FeatureSchema& schema) {
  nlohmann::json j;
  j["version"] = 1;
  auto& arr = j["features"] = nlohmann::json::array();
  for (const auto& f : schema.features()) {
    nlohmann::json jf;
    jf["name"] = f.name;
    jf["source"] = f.source_field;
    if (f.kind == FeatureKind::numeric) {
      jf["kind"] = "numeric";
      jf["range"] = {f.lo, f.hi};
      jf["bins"] = f.bins;
    } else {
      jf["kind"] = "categorical";
      jf["categories"] = f.categories;
    }
    arr.push_back(std::move(jf));
  }
  return j.dump(2);
}

}  // namespace fedstream
