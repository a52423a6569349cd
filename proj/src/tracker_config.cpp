#include <fstream>
#include <json.hpp>
#include <sstream>

#include "json_format.hpp"
#include "surftrack/tracker.hpp"

namespace surftrack {

void TrackerConfig::validate() const {
  if (!(lambda_L >= 0.0)) throw InputError("config: lambda_L must be >= 0");
  if (!(lambda_S >= 0.0)) throw InputError("config: lambda_S must be >= 0");
  if (scale_schedule.empty()) throw InputError("config: scale_schedule must not be empty");
  for (std::size_t i = 0; i < scale_schedule.size(); ++i) {
    if (!(scale_schedule[i] > 0.0)) throw InputError("config: scale_schedule entries must be positive");
    if (i > 0 && !(scale_schedule[i] < scale_schedule[i - 1]))
      throw InputError("config: scale_schedule must be strictly decreasing");
  }
  similarity.validate();
  if ((similarity.kind == SimilarityKind::Ncc || similarity.kind == SimilarityKind::Mi) &&
      descriptor != DescriptorKind::Intensity)
    throw InputError("config: NCC and MI similarities require the INTENSITY descriptor");
  if (max_iters_per_scale < 0) throw InputError("config: max_iters_per_scale must be >= 0");
  if (!(step_tolerance > 0.0)) throw InputError("config: step_tolerance must be > 0");
  if (anchor_stride < 1) throw InputError("config: anchor_stride must be >= 1");
  relevancy.validate();
}

std::vector<double> scale_preset(const std::string& name) {
  if (name == "wide") return {15.0, 7.0, 3.0};
  if (name == "narrow") return {5.0, 3.0, 2.0};
  throw InputError("unknown scale preset '" + name + "' (valid: wide, narrow)");
}

namespace {

using nlohmann::json;

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw InputError("config: unknown key '" + where + it.key() + "'");
  }
}

TrackerConfig config_from(const json& j) {
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  check_keys(j,
             {"lambda_L", "lambda_S", "scale_schedule", "scale_preset", "descriptor", "similarity", "use_relevancy",
              "use_rotation_handling", "max_iters_per_scale", "step_tolerance", "anchor_stride", "relevancy"},
             "");
  TrackerConfig c;
  read_field(j, "lambda_L", c.lambda_L);
  read_field(j, "lambda_S", c.lambda_S);
  if (j.contains("scale_preset")) c.scale_schedule = scale_preset(j.at("scale_preset").get<std::string>());
  read_field(j, "scale_schedule", c.scale_schedule);
  if (j.contains("descriptor")) c.descriptor = parse_descriptor_kind(j.at("descriptor").get<std::string>());
  if (j.contains("similarity")) {
    const json& s = j.at("similarity");
    if (s.is_string()) {
      c.similarity.kind = parse_similarity_kind(s.get<std::string>());
    } else {
      check_keys(s, {"kind", "huber_k", "tukey_c", "scale_by_mad", "mi_bins"}, "similarity.");
      if (s.contains("kind")) c.similarity.kind = parse_similarity_kind(s.at("kind").get<std::string>());
      read_field(s, "huber_k", c.similarity.huber_k);
      read_field(s, "tukey_c", c.similarity.tukey_c);
      read_field(s, "scale_by_mad", c.similarity.scale_by_mad);
      read_field(s, "mi_bins", c.similarity.mi_bins);
    }
  }
  read_field(j, "use_relevancy", c.use_relevancy);
  read_field(j, "use_rotation_handling", c.use_rotation_handling);
  read_field(j, "max_iters_per_scale", c.max_iters_per_scale);
  read_field(j, "step_tolerance", c.step_tolerance);
  read_field(j, "anchor_stride", c.anchor_stride);
  if (j.contains("relevancy")) {
    const json& r = j.at("relevancy");
    check_keys(r, {"patch_size", "delta_range", "stride", "min_valid_fraction", "tps_regularization"}, "relevancy.");
    read_field(r, "patch_size", c.relevancy.patch_size);
    read_field(r, "delta_range", c.relevancy.delta_range);
    read_field(r, "stride", c.relevancy.stride);
    read_field(r, "min_valid_fraction", c.relevancy.min_valid_fraction);
    read_field(r, "tps_regularization", c.relevancy.tps_regularization);
  }
  c.validate();
  return c;
}

}  // namespace

TrackerConfig tracker_config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

TrackerConfig read_tracker_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return tracker_config_from_json(ss.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string tracker_config_to_json(const TrackerConfig& c) {
  using detail::format_double;
  std::ostringstream o;
  o << "{\"lambda_L\": " << format_double(c.lambda_L) << ", \"lambda_S\": " << format_double(c.lambda_S)
    << ", \"scale_schedule\": [";
  for (std::size_t i = 0; i < c.scale_schedule.size(); ++i) o << (i ? ", " : "") << format_double(c.scale_schedule[i]);
  o << "], \"descriptor\": \"" << to_string(c.descriptor) << "\", \"similarity\": {\"kind\": \""
    << to_string(c.similarity.kind) << "\", \"huber_k\": " << format_double(c.similarity.huber_k)
    << ", \"tukey_c\": " << format_double(c.similarity.tukey_c)
    << ", \"scale_by_mad\": " << (c.similarity.scale_by_mad ? "true" : "false")
    << ", \"mi_bins\": " << c.similarity.mi_bins << "}, \"use_relevancy\": " << (c.use_relevancy ? "true" : "false")
    << ", \"use_rotation_handling\": " << (c.use_rotation_handling ? "true" : "false")
    << ", \"max_iters_per_scale\": " << c.max_iters_per_scale
    << ", \"step_tolerance\": " << format_double(c.step_tolerance) << ", \"anchor_stride\": " << c.anchor_stride
    << ", \"relevancy\": {\"patch_size\": " << c.relevancy.patch_size
    << ", \"delta_range\": " << c.relevancy.delta_range << ", \"stride\": " << c.relevancy.stride
    << ", \"min_valid_fraction\": " << format_double(c.relevancy.min_valid_fraction)
    << ", \"tps_regularization\": " << format_double(c.relevancy.tps_regularization) << "}}";
  return o.str();
}

void apply_config_override(TrackerConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InputError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  if (key == "scale_preset") {
    if (!value.is_string()) throw InputError("--set scale_preset expects a preset name");
    config.scale_schedule = scale_preset(value.get<std::string>());
    return;
  }
  json j = json::parse(tracker_config_to_json(config));
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw InputError("--set: unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw InputError("--set: '" + key + "' is not a scalar field");
  *node = value;
  try {
    config = config_from(j);
  } catch (const json::exception& e) {
    throw InputError("--set " + key + ": " + e.what());
  }
}

}  // namespace surftrack
