#include <set>

#include "internal.hpp"
#include "lopt/error.hpp"

namespace lopt {

namespace {

using nlohmann::json;

// Reads one JSON object, rejecting unknown keys and mistyped values.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void read(const char* key, long& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    out = v.get<long>();
  }
  void read(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(where(key) + " must be a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }
  void read(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    out = v.get<double>();
  }
  void read(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    out = v.get<std::string>();
  }
  const json* child(const char* key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key " + where(key.c_str()));
    }
  }
  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? "<root>" : path_;
    if (key) p = path_.empty() ? std::string(key) : path_ + "." + key;
    return "'" + p + "'";
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<int> read_int_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError("'" + where + "' must be an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError("'" + where + "' must be an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

void read_task(const json& j, TaskSpec& t) {
  ObjectReader r(j, "task");
  std::string kind = to_string(t.kind);
  r.read("kind", kind);
  try {
    t.kind = parse_task_kind(kind);
  } catch (const KindError& e) {
    throw ConfigError(std::string("'task.kind': ") + e.what());
  }
  r.read("dim", t.dim);
  r.read("n_points", t.n_points);
  r.read("noise", t.noise);
  if (const json* w = r.child("mlp_widths")) t.mlp.widths = read_int_list(*w, "task.mlp_widths");
  r.finish();
}

void read_tune(const json& j, TuneSettings& t) {
  ObjectReader r(j, "tune");
  if (const json* k = r.child("kinds")) {
    if (!k->is_array()) throw ConfigError("'tune.kinds' must be an array of names");
    t.kinds.clear();
    for (const auto& e : *k) {
      if (!e.is_string()) throw ConfigError("'tune.kinds' must be an array of names");
      try {
        t.kinds.push_back(parse_baseline_kind(e.get<std::string>()));
      } catch (const KindError& err) {
        throw ConfigError(std::string("'tune.kinds': ") + err.what());
      }
    }
  }
  r.read("n_samples", t.n_samples);
  r.read("n_problems", t.n_problems);
  r.read("steps", t.steps);
  r.finish();
}

void read_meta(const json& j, MetaConfig& m, TaskKind kind) {
  ObjectReader r(j, "meta");
  std::string profile = "desk";
  r.read("profile", profile);
  if (profile == "desk") {
    m = desk_profile(kind);
  } else if (profile == "full") {
    m = MetaConfig{};
  } else {
    throw ConfigError("'meta.profile' must be \"desk\" or \"full\", got \"" + profile + "\"");
  }
  r.read("hidden_size", m.hidden_size);
  r.read("batch_size", m.batch_size);
  r.read("meta_steps", m.meta_steps);
  r.read("unroll", m.unroll);
  r.read("learning_rate", m.learning_rate);
  r.read("lr_decay", m.lr_decay);
  r.read("lr_decay_every", m.lr_decay_every);
  r.read("clip", m.clip);
  r.read("l2", m.l2);
  r.read("checkpoint_every", m.checkpoint_every);
  r.finish();
}

void read_evaluate(const json& j, EvaluateSettings& e) {
  ObjectReader r(j, "evaluate");
  r.read("n_eval_seeds", e.n_eval_seeds);
  r.read("n_meta_eval", e.n_meta_eval);
  r.read("steps", e.steps);
  r.finish();
}

void read_analysis(const json& j, AnalysisSettings& a) {
  ObjectReader r(j, "analysis");
  r.read("n_problems", a.n_problems);
  r.read("steps", a.steps);
  r.read("fixed_point_seeds", a.fixed_point_seeds);
  r.read("update_fn_points", a.update_fn_points);
  r.read("gradient_range", a.gradient_range);
  r.read("s_curve_points", a.s_curve_points);
  r.read("autonomous_steps", a.autonomous_steps);
  r.read("n_variance_problems", a.n_variance_problems);
  r.read("variance_steps", a.variance_steps);
  r.read("histogram_bins", a.histogram_bins);
  r.read("saturation_fraction", a.saturation_fraction);
  r.finish();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!outdir.empty(), "'outdir' must not be empty");
  require(task.dim >= 1, "'task.dim' must be >= 1");
  require(task.n_points >= 2, "'task.n_points' must be >= 2");
  require(task.noise >= 0.0, "'task.noise' must be >= 0");
  if (task.kind == TaskKind::kTwoMoons) {
    try {
      task.mlp.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("'task.mlp_widths': ") + e.what());
    }
  }
  require(!tune.kinds.empty(), "'tune.kinds' must not be empty");
  require(tune.n_samples >= 1, "'tune.n_samples' must be >= 1");
  require(tune.n_problems >= 1, "'tune.n_problems' must be >= 1");
  require(tune.steps >= 1, "'tune.steps' must be >= 1");
  meta.validate();
  require(evaluate.n_eval_seeds >= 1, "'evaluate.n_eval_seeds' must be >= 1");
  require(evaluate.n_meta_eval >= 1, "'evaluate.n_meta_eval' must be >= 1");
  require(evaluate.steps >= 1, "'evaluate.steps' must be >= 1");
  require(analysis.n_problems >= 1, "'analysis.n_problems' must be >= 1");
  require(analysis.steps >= 1, "'analysis.steps' must be >= 1");
  require(analysis.fixed_point_seeds >= 1, "'analysis.fixed_point_seeds' must be >= 1");
  require(analysis.update_fn_points >= 3, "'analysis.update_fn_points' must be >= 3");
  require(analysis.gradient_range >= 0.0, "'analysis.gradient_range' must be >= 0");
  require(analysis.s_curve_points >= 1, "'analysis.s_curve_points' must be >= 1");
  require(analysis.autonomous_steps >= 2, "'analysis.autonomous_steps' must be >= 2");
  require(analysis.n_variance_problems >= 2, "'analysis.n_variance_problems' must be >= 2");
  require(analysis.variance_steps >= 1, "'analysis.variance_steps' must be >= 1");
  require(analysis.histogram_bins >= 1 && analysis.histogram_bins % 2 == 1,
          "'analysis.histogram_bins' must be odd");
  require(analysis.saturation_fraction > 0.0 && analysis.saturation_fraction < 1.0,
          "'analysis.saturation_fraction' must be in (0, 1)");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  ObjectReader r(doc, "");
  r.read("seed", c.seed);
  r.read("outdir", c.outdir);
  r.read("checkpoint", c.checkpoint);
  bool widths_given = false;
  if (const json* t = r.child("task")) {
    read_task(*t, c.task);
    widths_given = t->is_object() && t->contains("mlp_widths");
  }
  c.meta = desk_profile(c.task.kind);
  if (const json* t = r.child("tune")) read_tune(*t, c.tune);
  if (const json* m = r.child("meta")) read_meta(*m, c.meta, c.task.kind);
  // The profile's network is the default; an explicit task.mlp_widths wins.
  if (!widths_given) c.task.mlp = c.meta.task.mlp;
  if (const json* e = r.child("evaluate")) read_evaluate(*e, c.evaluate);
  if (const json* a = r.child("analysis")) read_analysis(*a, c.analysis);
  r.finish();
  cli::sync_derived(c);
  c.validate();
  return c;
}

std::string experiment_config_json(const ExperimentConfig& config) {
  return cli::config_to_json(config).dump(2) + "\n";
}

namespace cli {

void sync_derived(ExperimentConfig& config) {
  config.task.seed = config.seed;
  config.meta.task = config.task;
  config.meta.seed = config.seed;
}

json config_to_json(const ExperimentConfig& c) {
  json kinds = json::array();
  for (auto k : c.tune.kinds) kinds.push_back(to_string(k));
  return json{
      {"seed", c.seed},
      {"outdir", c.outdir},
      {"checkpoint", c.checkpoint},
      {"task",
       {{"kind", to_string(c.task.kind)},
        {"dim", c.task.dim},
        {"n_points", c.task.n_points},
        {"noise", c.task.noise},
        {"mlp_widths", c.task.mlp.widths}}},
      {"tune",
       {{"kinds", kinds},
        {"n_samples", c.tune.n_samples},
        {"n_problems", c.tune.n_problems},
        {"steps", c.tune.steps}}},
      {"meta",
       {{"hidden_size", c.meta.hidden_size},
        {"batch_size", c.meta.batch_size},
        {"meta_steps", c.meta.meta_steps},
        {"unroll", c.meta.unroll},
        {"learning_rate", c.meta.learning_rate},
        {"lr_decay", c.meta.lr_decay},
        {"lr_decay_every", c.meta.lr_decay_every},
        {"clip", c.meta.clip},
        {"l2", c.meta.l2},
        {"checkpoint_every", c.meta.checkpoint_every}}},
      {"evaluate",
       {{"n_eval_seeds", c.evaluate.n_eval_seeds},
        {"n_meta_eval", c.evaluate.n_meta_eval},
        {"steps", c.evaluate.steps}}},
      {"analysis",
       {{"n_problems", c.analysis.n_problems},
        {"steps", c.analysis.steps},
        {"fixed_point_seeds", c.analysis.fixed_point_seeds},
        {"update_fn_points", c.analysis.update_fn_points},
        {"gradient_range", c.analysis.gradient_range},
        {"s_curve_points", c.analysis.s_curve_points},
        {"autonomous_steps", c.analysis.autonomous_steps},
        {"n_variance_problems", c.analysis.n_variance_problems},
        {"variance_steps", c.analysis.variance_steps},
        {"histogram_bins", c.analysis.histogram_bins},
        {"saturation_fraction", c.analysis.saturation_fraction}}},
  };
}

}  // namespace cli
}  // namespace lopt
