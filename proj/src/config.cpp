#include "ilap/config.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "ilap/errors.hpp"

namespace ilap {

Method parse_method(const std::string& s) {
  if (s == "ilap_ci") return Method::ilap_ci;
  if (s == "ilap_noci") return Method::ilap_noci;
  if (s == "msp") return Method::msp;
  if (s == "odin") return Method::odin;
  if (s == "feature_distance") return Method::feature_distance;
  if (s == "supervised") return Method::supervised;
  throw ConfigError("unknown method '" + s + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::ilap_ci: return "ilap_ci";
    case Method::ilap_noci: return "ilap_noci";
    case Method::msp: return "msp";
    case Method::odin: return "odin";
    case Method::feature_distance: return "feature_distance";
    case Method::supervised: return "supervised";
  }
  return "?";
}

bool is_unsupervised(Method m) {
  return m == Method::ilap_ci || m == Method::ilap_noci || m == Method::feature_distance;
}

namespace {

std::string trim(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(trim(text));
  T v{};
  in >> v;
  if (!in || !in.eof()) throw ConfigError(key + ": cannot parse '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = boost::algorithm::to_lower_copy(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + text + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::vector<std::string> parts;
  const auto t = trim(text);
  if (t.empty()) return out;
  boost::algorithm::split(parts, t, boost::algorithm::is_any_of(", "), boost::algorithm::token_compress_on);
  for (const auto& p : parts) {
    if (!p.empty()) out.push_back(parse_number<T>(key, p));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

std::optional<double> parse_optional(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t.empty() || t == "default" || t == "auto") return std::nullopt;
  return parse_number<double>(key, t);
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt_double(*v) : "auto"; }

struct Key {
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define ILAP_NUM(NAME, FIELD, TYPE)                                                        \
  Key {                                                                                    \
    NAME, [](const RunConfig& c) { return fmt::format("{}", c.FIELD); },                   \
        [](RunConfig& c, const std::string& k, const std::string& v) {                     \
          c.FIELD = parse_number<TYPE>(k, v);                                              \
        }                                                                                  \
  }
#define ILAP_BOOL(NAME, FIELD)                                                             \
  Key {                                                                                    \
    NAME, [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); },      \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_bool(k, v); } \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"run.method", [](const RunConfig& c) { return to_string(c.method); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.method = parse_method(trim(v)); }},
      {"run.seeds", [](const RunConfig& c) { return join(c.seeds); },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seeds = parse_list<std::uint64_t>(k, v);
       }},
      {"run.output_dir", [](const RunConfig& c) { return c.output_dir.string(); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); }},
      ILAP_NUM("run.eval_every", eval_every, int),
      ILAP_BOOL("run.checkpoint", checkpoint),
      ILAP_NUM("run.max_exposures", max_exposures, std::size_t),

      {"data.dataset", [](const RunConfig& c) { return c.dataset; },
       [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = trim(v); }},
      {"data.root", [](const RunConfig& c) { return c.data_root.string(); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.data_root = trim(v); }},
      ILAP_BOOL("data.normalize", normalize),
      ILAP_NUM("blobs.num_classes", blobs.num_classes, int),
      ILAP_NUM("blobs.train_per_class", blobs.train_per_class, int),
      ILAP_NUM("blobs.test_per_class", blobs.test_per_class, int),
      ILAP_NUM("blobs.radius", blobs.radius, double),
      ILAP_NUM("blobs.sigma", blobs.sigma, double),
      ILAP_NUM("blobs.seed", blobs.seed, std::uint64_t),

      {"stream.classes",
       [](const RunConfig& c) { return c.stream.class_ids.empty() ? std::string("all") : join(c.stream.class_ids); },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto t = trim(v);
         c.stream.class_ids = (t == "all" || t.empty()) ? std::vector<ClassId>{} : parse_list<ClassId>(k, t);
       }},
      ILAP_NUM("stream.repeats_per_class", stream.repeats_per_class, int),
      ILAP_NUM("stream.exposure_size", stream.exposure_size, int),
      ILAP_NUM("stream.split_ratio", stream.split_ratio, double),
      {"stream.order", [](const RunConfig& c) { return to_string(c.stream.order); },
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.stream.order = parse_schedule_order(trim(v));
       }},
      ILAP_BOOL("stream.allow_reuse", stream.allow_reuse),

      {"learner.arch", [](const RunConfig& c) { return to_string(c.learner.arch); },
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.learner.arch = parse_architecture(trim(v));
       }},
      ILAP_BOOL("learner.pretrained", learner.pretrained),
      {"learner.weights", [](const RunConfig& c) { return c.learner.weights.string(); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.learner.weights = trim(v); }},

      ILAP_NUM("train.epochs", train.epochs, int),
      ILAP_NUM("train.batch_size", train.batch_size, int),
      ILAP_NUM("train.lr_head", train.lr_head, float),
      ILAP_NUM("train.patience", train.patience, int),

      {"detector.lambda", [](const RunConfig& c) { return fmt_optional(c.lambda); },
       [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda = parse_optional(k, v); }},
      {"detector.theta", [](const RunConfig& c) { return fmt_optional(c.theta); },
       [](RunConfig& c, const std::string& k, const std::string& v) { c.theta = parse_optional(k, v); }},
      ILAP_NUM("detector.discard_floor", discard_floor, double),
      ILAP_BOOL("detector.detection_early_stopping", detection_early_stopping),

      ILAP_NUM("exemplar.cap_train", cap_train, std::size_t),
      ILAP_NUM("exemplar.cap_val", cap_val, std::size_t),

      ILAP_NUM("odin.temperature", odin.temperature, double),
      ILAP_NUM("odin.epsilon", odin.epsilon, double),
      {"feature_distance.threshold", [](const RunConfig& c) { return fmt_optional(c.distance_threshold); },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.distance_threshold = parse_optional(k, v);
       }},

      {"calibration.lambda_grid", [](const RunConfig& c) { return join(c.sweep.lambda_grid); },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sweep.lambda_grid = parse_list<double>(k, v);
       }},
      ILAP_NUM("calibration.trials", sweep.trials, int),
      ILAP_NUM("calibration.base_classes", sweep.base_classes, int),
      ILAP_NUM("calibration.seed", sweep.seed, std::uint64_t),
  };
  return table;
}

#undef ILAP_NUM
#undef ILAP_BOOL

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("run.seeds is empty");
  if (eval_every < 1) throw ConfigError("run.eval_every must be >= 1");
  if (stream.repeats_per_class < 1) throw ConfigError("stream.repeats_per_class must be >= 1");
  if (stream.exposure_size < 2) throw ConfigError("stream.exposure_size must be >= 2");
  if (!(stream.split_ratio > 0.0 && stream.split_ratio < 1.0)) {
    throw ConfigError("stream.split_ratio must lie in (0, 1)");
  }
  if (train.epochs < 0 || train.batch_size < 1 || train.patience < 1 || !(train.lr_head > 0.0f)) {
    throw ConfigError("train section has out-of-range values");
  }
  if (learner.pretrained && learner.weights.empty()) {
    throw ConfigError("learner.pretrained needs learner.weights");
  }
  detector().validate();
  const double theta_eff = detector().theta;
  if (!(theta_eff > 0.0 && theta_eff < 1.0)) throw ConfigError("detector.theta must lie in (0, 1)");
  if (method == Method::odin) odin.validate();
}

DetectorConfig RunConfig::detector() const {
  DetectorConfig d;
  const bool ci = method != Method::ilap_noci;
  d.lambda = lambda.value_or(ci ? 0.5 : 0.0);
  d.theta = theta.value_or(ci ? 0.6 : 0.4);
  d.discard_floor = discard_floor;
  d.train = train;
  d.detection_early_stopping = detection_early_stopping;
  return d;
}

std::filesystem::path RunConfig::resolved_data_root() const {
  if (!data_root.empty()) return data_root;
  if (const char* env = std::getenv("ILAP_DATA_ROOT"); env && *env) return env;
  return "data";
}

DatasetOptions RunConfig::dataset_options() const {
  DatasetOptions o;
  o.name = dataset;
  o.root = resolved_data_root();
  o.normalize = normalize;
  o.blobs = blobs;
  return o;
}

SweepConfig RunConfig::sweep_config() const {
  SweepConfig s = sweep;
  s.exposure_size = static_cast<std::size_t>(stream.exposure_size);
  s.split_ratio = stream.split_ratio;
  s.learner = learner;
  s.train = train;
  s.discard_floor = discard_floor;
  return s;
}

RunConfig parse_run_config(std::istream& in, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(source + ": key '" + section + "' outside any section");
    for (const auto& [key, value] : body) {
      set_key(cfg, section + "." + key, value.data());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in, path.string());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_key(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void write_run_config(std::ostream& out, const RunConfig& cfg) {
  std::string section;
  for (const auto& k : keys()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    const auto sec = name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << name.substr(dot + 1) << " = " << k.get(cfg) << '\n';
  }
}

std::string to_ini(const RunConfig& cfg) {
  std::ostringstream s;
  write_run_config(s, cfg);
  return s.str();
}

}  // namespace ilap
