#include "vcd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace vcd {

ObjectiveMode ExperimentConfig::objective_mode() const {
  if (mode == "standard_kl") return ObjectiveMode::standard_kl;
  if (mode == "hoffman2017") return ObjectiveMode::hoffman2017;
  if (mode == "vcd") return ObjectiveMode::vcd;
  throw std::invalid_argument("config: unknown mode '" + mode + "'");
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig tc;
  tc.mode = objective_mode();
  tc.alpha = alpha;
  tc.kernel = {kernel_t, leapfrog_steps, step_size};
  tc.iterations = iterations;
  tc.minibatch_size = minibatch_size;
  tc.lr_mean = lr_mean;
  tc.lr_scale = lr_scale;
  tc.lr_weights = lr_weights;
  tc.lr_phi = lr_phi;
  tc.decay_every = decay_every;
  tc.decay_factor = decay_factor;
  tc.gamma = gamma;
  tc.cv_local_switch = cv_local_switch;
  tc.grad_clip = grad_clip;
  tc.seed = seed;
  tc.threads = deterministic ? 1 : threads;
  tc.trace_stride = trace_stride;
  return tc;
}

std::vector<int> ExperimentConfig::hidden_layout(const std::string& spec) const {
  std::vector<int> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  return out;
}

namespace {

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for '" + key + "': " + v);
  }
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer value for '" + key + "': " + v);
  }
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> m;
    auto str = [&m](const std::string& key, std::string ExperimentConfig::*p) {
      m[key] = {[p](ExperimentConfig& c, const std::string& v) { c.*p = v; },
                [p](const ExperimentConfig& c) { return c.*p; }};
    };
    auto dbl = [&m](const std::string& key, double ExperimentConfig::*p) {
      m[key] = {[p, key](ExperimentConfig& c, const std::string& v) {
                  c.*p = parse_double(key, v);
                },
                [p](const ExperimentConfig& c) { return fmt_double(c.*p); }};
    };
    auto i32 = [&m](const std::string& key, int ExperimentConfig::*p) {
      m[key] = {[p, key](ExperimentConfig& c, const std::string& v) {
                  c.*p = static_cast<int>(parse_long(key, v));
                },
                [p](const ExperimentConfig& c) { return std::to_string(c.*p); }};
    };
    auto i64 = [&m](const std::string& key, long ExperimentConfig::*p) {
      m[key] = {[p, key](ExperimentConfig& c, const std::string& v) {
                  c.*p = parse_long(key, v);
                },
                [p](const ExperimentConfig& c) { return std::to_string(c.*p); }};
    };
    str("experiment", &ExperimentConfig::experiment);
    str("target", &ExperimentConfig::target);
    str("family", &ExperimentConfig::family);
    str("mode", &ExperimentConfig::mode);
    dbl("alpha", &ExperimentConfig::alpha);
    i32("kernel_t", &ExperimentConfig::kernel_t);
    i32("leapfrog_steps", &ExperimentConfig::leapfrog_steps);
    dbl("step_size", &ExperimentConfig::step_size);
    i64("iterations", &ExperimentConfig::iterations);
    i32("minibatch_size", &ExperimentConfig::minibatch_size);
    dbl("lr_mean", &ExperimentConfig::lr_mean);
    dbl("lr_scale", &ExperimentConfig::lr_scale);
    dbl("lr_weights", &ExperimentConfig::lr_weights);
    dbl("lr_phi", &ExperimentConfig::lr_phi);
    i64("decay_every", &ExperimentConfig::decay_every);
    dbl("decay_factor", &ExperimentConfig::decay_factor);
    dbl("gamma", &ExperimentConfig::gamma);
    i64("cv_local_switch", &ExperimentConfig::cv_local_switch);
    dbl("grad_clip", &ExperimentConfig::grad_clip);
    i64("trace_stride", &ExperimentConfig::trace_stride);
    i32("latent_dim", &ExperimentConfig::latent_dim);
    str("encoder_hidden", &ExperimentConfig::encoder_hidden);
    str("decoder_hidden", &ExperimentConfig::decoder_hidden);
    str("dataset_path", &ExperimentConfig::dataset_path);
    dbl("binarize_threshold", &ExperimentConfig::binarize_threshold);
    i32("synth_n_train", &ExperimentConfig::synth_n_train);
    i32("synth_n_test", &ExperimentConfig::synth_n_test);
    i32("synth_dim", &ExperimentConfig::synth_dim);
    i32("synth_latent", &ExperimentConfig::synth_latent);
    i32("test_count", &ExperimentConfig::test_count);
    i32("eval_samples", &ExperimentConfig::eval_samples);
    dbl("proposal_inflation", &ExperimentConfig::proposal_inflation);
    i32("eval_hmc_total", &ExperimentConfig::eval_hmc_total);
    i32("eval_hmc_keep", &ExperimentConfig::eval_hmc_keep);
    str("output_dir", &ExperimentConfig::output_dir);
    m["seed"] = {[](ExperimentConfig& c, const std::string& v) {
                   c.seed = static_cast<std::uint64_t>(parse_long("seed", v));
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.seed); }};
    i32("threads", &ExperimentConfig::threads);
    m["deterministic"] = {
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "true" || v == "1")
            c.deterministic = true;
          else if (v == "false" || v == "0")
            c.deterministic = false;
          else
            throw std::invalid_argument("config: bad boolean for 'deterministic': " + v);
        },
        [](const ExperimentConfig& c) {
          return std::string(c.deterministic ? "true" : "false");
        }};
    return m;
  }();
  return table;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = fields().find(key);
    if (it == fields().end())
      throw std::invalid_argument("config: unknown key '" + key + "' at line " +
                                  std::to_string(lineno));
    it->second.set(cfg, value);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(cfg) << "\n";
  return os.str();
}

}  // namespace vcd
