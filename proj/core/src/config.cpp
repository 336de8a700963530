#include "ppdl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ppdl/digest.hpp"
#include "ppdl/errors.hpp"

namespace ppdl {

using nlohmann::json;

namespace {

std::string_view to_string(ModelKind k) { return k == ModelKind::logistic ? "logistic" : "mlp1"; }
std::string_view to_string(ShiftKind k) { return k == ShiftKind::rotation ? "rotation" : "labels"; }
std::string_view to_string(QSchedule k) { return k == QSchedule::constant ? "constant" : "exponential"; }
std::string_view to_string(LossMode k) {
  return k == LossMode::raw ? "raw" : "importance_weighted";
}
std::string_view to_string(RewardTiming k) {
  return k == RewardTiming::after_training ? "after_training" : "before_training";
}

template <typename E>
E parse_enum(std::string_view field, const std::string& text,
             std::initializer_list<E> options) {
  std::string expected;
  for (E e : options) {
    if (text == to_string(e)) return e;
    if (!expected.empty()) expected += ", ";
    expected += to_string(e);
  }
  throw ConfigError(std::string(field) + ": unknown value '" + text +
                    "' (expected " + expected + ")");
}

// Reads one JSON object, tracking which keys were consumed and which fields
// fell back to defaults.
class Section {
 public:
  Section(const json& obj, std::string path, std::vector<std::string>& defaults)
      : obj_(obj), path_(std::move(path)), defaults_(defaults) {
    if (!obj_.is_object()) throw ConfigError(where("") + " must be an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback, const std::string& shown = "") {
    seen_.insert(key);
    if (!obj_.contains(key)) {
      std::ostringstream s;
      if (shown.empty()) {
        s << where(key) << " = " << json(fallback).dump();
      } else {
        s << where(key) << " = " << shown;
      }
      defaults_.push_back(s.str());
      return fallback;
    }
    return convert<T>(key, obj_.at(key));
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) throw ConfigError("missing required key " + where(key));
    return convert<T>(key, obj_.at(key));
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(obj_.contains(key) ? obj_.at(key) : empty, where(key), defaults_);
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + where(it.key()));
    }
  }

  std::string where(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

 private:
  template <typename T>
  T convert(const std::string& key, const json& v) const {
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (v.is_number_integer() && v.get<long long>() < 0) {
          throw ConfigError(where(key) + " must be non-negative");
        }
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
          throw ConfigError(where(key) + " must be an integer");
        }
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  const json& obj_;
  std::string path_;
  std::vector<std::string>& defaults_;
  std::set<std::string> seen_;
};

SimConfig from_json(const json& root, std::optional<Method> method_override,
                    std::vector<std::string>& defaults) {
  SimConfig c;
  Section top(root, "", defaults);
  const auto method_name = top.require<std::string>("method");
  c.method = method_override ? *method_override : parse_method(method_name);
  c.nodes = top.require<std::size_t>("nodes");
  c.group_size = top.require<std::size_t>("group_size");
  c.rounds = top.require<std::uint64_t>("rounds");
  c.seed = top.get<std::uint64_t>("seed", 0);
  c.local_epochs = top.get<std::size_t>("local_epochs", 3);
  c.batch_size = top.get<std::size_t>("batch_size", 8);
  c.learning_rate = top.get<double>("learning_rate", SimConfig{}.learning_rate);
  c.threads = top.get<std::size_t>("threads", 1);
  c.reward_timing = parse_enum<RewardTiming>(
      "reward_timing",
      top.get<std::string>("reward_timing", "after_training"),
      {RewardTiming::after_training, RewardTiming::before_training});
  {
    const json w = top.get<json>("merge_weight", nullptr, "null (M / (M + 1))");
    if (!w.is_null()) {
      if (!w.is_number()) throw ConfigError("merge_weight must be a number or null");
      c.merge_weight = w.get<double>();
    }
  }

  {
    Section layout = top.child("layout");
    if (!root.contains("layout")) throw ConfigError("missing required key layout");
    c.layout.shift = parse_enum<ShiftKind>(
        "layout.shift", layout.require<std::string>("shift"),
        {ShiftKind::rotation, ShiftKind::labels});
    c.layout.sizes = layout.require<std::vector<std::size_t>>("cluster_sizes");
    if (c.layout.shift == ShiftKind::rotation) {
      c.layout.angles = layout.require<std::vector<double>>("angles");
      if (layout.has("label_sets")) {
        throw ConfigError("layout.label_sets is only valid for shift = labels");
      }
    } else {
      c.layout.label_sets = layout.require<std::vector<std::vector<int>>>("label_sets");
      if (layout.has("angles")) {
        throw ConfigError("layout.angles is only valid for shift = rotation");
      }
    }
    layout.finish();
  }

  {
    Section model = top.child("model");
    c.model = parse_enum<ModelKind>("model.kind", model.get<std::string>("kind", "logistic"),
                                    {ModelKind::logistic, ModelKind::mlp1});
    c.hidden = model.get<std::size_t>("hidden", 32);
    model.finish();
  }

  {
    Section task = top.child("task");
    c.task.classes = task.get<int>("classes", 4);
    c.task.dim = task.get<std::size_t>("dim", 16);
    c.task.radius = task.get<double>("radius", 3.0);
    c.task.noise = task.get<double>("noise", 1.0);
    c.samples_per_node = task.get<std::size_t>("samples_per_node", 200);
    c.pool_csv = task.get<std::string>("pool_csv", "");
    Section split = task.child("split");
    c.split.train = split.get<double>("train", 0.7);
    c.split.val = split.get<double>("val", 0.15);
    c.split.test = split.get<double>("test", 0.15);
    split.finish();
    task.finish();
  }

  {
    Section bandit = top.child("bandit");
    const bool var = c.method == Method::ppdl_var;
    c.pseudo.mode = parse_enum<QSchedule>(
        "bandit.q_schedule",
        bandit.get<std::string>("q_schedule", var ? "exponential" : "constant"),
        {QSchedule::constant, QSchedule::exponential});
    const bool exponential = c.pseudo.mode == QSchedule::exponential;
    const double q0_default =
        exponential ? 0.5 : (c.layout.shift == ShiftKind::rotation ? 0.2 : 0.1);
    c.pseudo.q0 = bandit.get<double>("q0", q0_default);
    c.pseudo.q_min = bandit.get<double>("q_min", 0.07);
    c.pseudo.horizon = bandit.get<std::uint64_t>("horizon", c.rounds);
    c.significance_divisor = bandit.get<std::uint64_t>(
        "significance_divisor", 0, "0 (number of nodes)");
    c.loss_mode = parse_enum<LossMode>(
        "bandit.loss", bandit.get<std::string>("loss", "raw"),
        {LossMode::raw, LossMode::importance_weighted});
    c.correlated = bandit.get<bool>("correlated", true);
    bandit.finish();
  }

  {
    Section dac = top.child("dac");
    c.dac_tau = dac.get<double>("tau", 30.0);
    dac.finish();
  }

  {
    Section sec = top.child("secagg");
    c.field.prime = sec.get<std::uint64_t>("prime", kMersenne61);
    c.field.frac_bits = sec.get<int>("frac_bits", 16);
    c.field.clip = sec.get<double>("clip", 64.0);
    c.secagg_threshold = sec.get<std::size_t>("threshold", 0, "0 (group size)");
    c.dropout_prob = sec.get<double>("dropout_prob", 0.0);
    sec.finish();
  }

  {
    Section topo = top.child("topology");
    c.adjacency = topo.get<std::vector<std::vector<NodeId>>>("adjacency", {},
                                                            "[] (fully connected)");
    topo.finish();
  }

  top.finish();
  c.validate();
  return c;
}

}  // namespace

ParsedConfig parse_config_text(std::string_view text,
                               std::optional<Method> method_override) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  ParsedConfig out;
  out.config = from_json(root, method_override, out.defaults_applied);
  return out;
}

ParsedConfig parse_config(const std::filesystem::path& path,
                          std::optional<Method> method_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str(), method_override);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

json to_json(const SimConfig& c) {
  json j;
  j["method"] = std::string(to_string(c.method));
  j["nodes"] = c.nodes;
  j["group_size"] = c.group_size;
  j["rounds"] = c.rounds;
  j["seed"] = c.seed;
  j["local_epochs"] = c.local_epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["threads"] = c.threads;
  j["reward_timing"] = std::string(to_string(c.reward_timing));
  j["merge_weight"] = c.merge_weight ? json(*c.merge_weight) : json(nullptr);
  j["model"] = {{"kind", std::string(to_string(c.model))}, {"hidden", c.hidden}};
  j["task"] = {{"classes", c.task.classes},
               {"dim", c.task.dim},
               {"radius", c.task.radius},
               {"noise", c.task.noise},
               {"samples_per_node", c.samples_per_node},
               {"pool_csv", c.pool_csv},
               {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}}};
  json layout = {{"shift", std::string(to_string(c.layout.shift))},
                 {"cluster_sizes", c.layout.sizes}};
  if (c.layout.shift == ShiftKind::rotation) {
    layout["angles"] = c.layout.angles;
  } else {
    layout["label_sets"] = c.layout.label_sets;
  }
  j["layout"] = layout;
  j["bandit"] = {{"q_schedule", std::string(to_string(c.pseudo.mode))},
                 {"q0", c.pseudo.q0},
                 {"q_min", c.pseudo.q_min},
                 {"horizon", c.pseudo.horizon},
                 {"significance_divisor", c.significance_divisor},
                 {"loss", std::string(to_string(c.loss_mode))},
                 {"correlated", c.correlated}};
  j["dac"] = {{"tau", c.dac_tau}};
  j["secagg"] = {{"prime", c.field.prime},
                 {"frac_bits", c.field.frac_bits},
                 {"clip", c.field.clip},
                 {"threshold", c.secagg_threshold},
                 {"dropout_prob", c.dropout_prob}};
  j["topology"] = {{"adjacency", c.adjacency}};
  return j;
}

}  // namespace

std::string serialize_config(const SimConfig& config) {
  return to_json(config).dump(2) + "\n";
}

std::string config_digest(const SimConfig& config) {
  json j = to_json(config);
  j.erase("seed");
  j.erase("threads");
  return digest_hex(j.dump());
}

}  // namespace ppdl
