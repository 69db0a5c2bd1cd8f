#include "rsad/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>

#include "rsad/errors.hpp"
#include "rsad/io.hpp"

namespace rsad {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "stage",       "backbone",     "data",         "split_file",
      "priors",      "out",          "optimizer",    "lr",
      "weight_decay", "momentum",    "nesterov",     "epochs",
      "batch_size",  "milestones",   "gamma",        "episodes",
      "way",         "shot",         "query",        "eval_way",
      "eval_shot",   "eval_query",   "val_every",    "val_episodes",
      "alpha",       "tau",          "sag",          "distill",
      "rhs",         "augment",      "pretrain_input", "image_size",
      "seed",        "threads",      "metrics_every"};
  return keys;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long n = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v +
                      "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<int>(to_long(key, item)));
  }
  return out;
}

void check_choice(const std::string& key, const std::string& v,
                  std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (v == a) return;
  std::string opts;
  for (const char* a : allowed) {
    if (!opts.empty()) opts += "|";
    opts += a;
  }
  throw ConfigError("key '" + key + "': '" + v + "' not in {" + opts + "}");
}

/// Pre-training and episodic recipes; only fields the file left unset.
void apply_stage_defaults(TrainConfig& c, bool nesterov_given) {
  if (c.stage == "pretrain") {
    if (c.optimizer.empty()) c.optimizer = "sgd";
    if (c.lr < 0) c.lr = 0.001;
    if (c.weight_decay < 0) c.weight_decay = 0.0005;
    if (c.backbone == "resnet12") {
      if (c.epochs < 0) c.epochs = 300;
      if (c.milestones.empty()) c.milestones = {75, 150};
      if (!nesterov_given && c.optimizer == "sgd") c.nesterov = true;
    } else {
      if (c.epochs < 0) c.epochs = 200;
      if (c.milestones.empty()) c.milestones = {85, 170};
    }
  } else {
    if (c.optimizer.empty()) c.optimizer = "adam";
    if (c.lr < 0) c.lr = 0.001;
    if (c.weight_decay < 0) c.weight_decay = 0.0;
    if (c.epochs < 0) c.epochs = 0;
  }
}

}  // namespace

std::map<std::string, std::string> parse_kv_file(
    const std::filesystem::path& path) {
  std::map<std::string, std::string> kv;
  for (const std::string& raw : read_lines(path)) {
    std::string line = raw;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line is not 'key = value': " + raw);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line has empty key: " + raw);
    kv[key] = value;
  }
  return kv;
}

TrainConfig parse_train_config(const std::map<std::string, std::string>& kv_in) {
  std::map<std::string, std::string> kv = kv_in;
  for (const auto& key : known_keys()) {
    std::string env_name = "RSAD_";
    for (char ch : key) env_name += static_cast<char>(std::toupper(ch));
    if (const char* env = std::getenv(env_name.c_str())) kv[key] = env;
  }

  TrainConfig c;
  for (const auto& [key, value] : kv) {
    if (!known_keys().count(key))
      throw ConfigError("unknown config key: '" + key + "'");
    if (key == "stage") c.stage = value;
    else if (key == "backbone") c.backbone = value;
    else if (key == "data") c.data = value;
    else if (key == "split_file") c.split_file = value;
    else if (key == "priors") c.priors = value;
    else if (key == "out") c.out = value;
    else if (key == "optimizer") c.optimizer = value;
    else if (key == "lr") c.lr = to_double(key, value);
    else if (key == "weight_decay") c.weight_decay = to_double(key, value);
    else if (key == "momentum") c.momentum = to_double(key, value);
    else if (key == "nesterov") c.nesterov = to_bool(key, value);
    else if (key == "epochs") c.epochs = static_cast<int>(to_long(key, value));
    else if (key == "batch_size") c.batch_size = static_cast<int>(to_long(key, value));
    else if (key == "milestones") c.milestones = to_int_list(key, value);
    else if (key == "gamma") c.gamma = to_double(key, value);
    else if (key == "episodes") c.episodes = to_long(key, value);
    else if (key == "way") c.way = static_cast<int>(to_long(key, value));
    else if (key == "shot") c.shot = static_cast<int>(to_long(key, value));
    else if (key == "query") c.query = static_cast<int>(to_long(key, value));
    else if (key == "eval_way") c.eval_way = static_cast<int>(to_long(key, value));
    else if (key == "eval_shot") c.eval_shot = static_cast<int>(to_long(key, value));
    else if (key == "eval_query") c.eval_query = static_cast<int>(to_long(key, value));
    else if (key == "val_every") c.val_every = static_cast<int>(to_long(key, value));
    else if (key == "val_episodes") c.val_episodes = static_cast<int>(to_long(key, value));
    else if (key == "alpha") c.alpha = to_double(key, value);
    else if (key == "tau") c.tau = to_double(key, value);
    else if (key == "sag") c.sag = value;
    else if (key == "distill") c.distill = value;
    else if (key == "rhs") c.rhs = value;
    else if (key == "augment") c.augment = value;
    else if (key == "pretrain_input") c.pretrain_input = value;
    else if (key == "image_size") c.image_size = static_cast<int>(to_long(key, value));
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "threads") c.threads = static_cast<int>(to_long(key, value));
    else if (key == "metrics_every") c.metrics_every = static_cast<int>(to_long(key, value));
  }

  check_choice("stage", c.stage, {"pretrain", "episodic"});
  check_choice("backbone", c.backbone, {"conv4", "resnet12"});
  if (!c.optimizer.empty())
    check_choice("optimizer", c.optimizer, {"sgd", "adam", "adamw"});
  check_choice("sag", c.sag, {"on", "off"});
  check_choice("distill", c.distill, {"mutual", "ud", "udp"});
  check_choice("rhs", c.rhs, {"rhs", "none", "cross_attention"});
  check_choice("augment", c.augment, {"standard", "none"});
  check_choice("pretrain_input", c.pretrain_input, {"raw", "prior"});

  if (c.alpha < 0.0) throw ConfigError("key 'alpha': must be >= 0");
  if (c.tau <= 0.0) throw ConfigError("key 'tau': must be > 0");
  for (std::size_t i = 1; i < c.milestones.size(); ++i)
    if (c.milestones[i] <= c.milestones[i - 1])
      throw ConfigError("key 'milestones': must be strictly increasing");
  if (c.way < 1 || c.shot < 1 || c.query < 1)
    throw ConfigError("episode shape (way/shot/query) must be positive");
  if (c.eval_way < 1 || c.eval_shot < 1 || c.eval_query < 1)
    throw ConfigError("eval episode shape must be positive");
  if (c.image_size < 16) throw ConfigError("key 'image_size': minimum is 16");
  if (c.threads < 1) throw ConfigError("key 'threads': must be >= 1");

  apply_stage_defaults(c, kv.count("nesterov") > 0);
  if (c.split_file.empty() && !c.data.empty())
    c.split_file = (std::filesystem::path(c.data) / "split.ndjson").string();
  return c;
}

TrainConfig parse_train_config(const std::filesystem::path& path) {
  return parse_train_config(parse_kv_file(path));
}

std::string serialize_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "stage = " << c.stage << '\n';
  os << "backbone = " << c.backbone << '\n';
  os << "data = " << c.data << '\n';
  os << "split_file = " << c.split_file << '\n';
  os << "priors = " << c.priors << '\n';
  os << "out = " << c.out << '\n';
  os << "optimizer = " << c.optimizer << '\n';
  os << "lr = " << format_exact(c.lr) << '\n';
  os << "weight_decay = " << format_exact(c.weight_decay) << '\n';
  os << "momentum = " << format_exact(c.momentum) << '\n';
  os << "nesterov = " << (c.nesterov ? "true" : "false") << '\n';
  os << "epochs = " << c.epochs << '\n';
  os << "batch_size = " << c.batch_size << '\n';
  os << "milestones = ";
  for (std::size_t i = 0; i < c.milestones.size(); ++i)
    os << (i ? "," : "") << c.milestones[i];
  os << '\n';
  os << "gamma = " << format_exact(c.gamma) << '\n';
  os << "episodes = " << c.episodes << '\n';
  os << "way = " << c.way << '\n';
  os << "shot = " << c.shot << '\n';
  os << "query = " << c.query << '\n';
  os << "eval_way = " << c.eval_way << '\n';
  os << "eval_shot = " << c.eval_shot << '\n';
  os << "eval_query = " << c.eval_query << '\n';
  os << "val_every = " << c.val_every << '\n';
  os << "val_episodes = " << c.val_episodes << '\n';
  os << "alpha = " << format_exact(c.alpha) << '\n';
  os << "tau = " << format_exact(c.tau) << '\n';
  os << "sag = " << c.sag << '\n';
  os << "distill = " << c.distill << '\n';
  os << "rhs = " << c.rhs << '\n';
  os << "augment = " << c.augment << '\n';
  os << "pretrain_input = " << c.pretrain_input << '\n';
  os << "image_size = " << c.image_size << '\n';
  os << "seed = " << c.seed << '\n';
  os << "threads = " << c.threads << '\n';
  os << "metrics_every = " << c.metrics_every << '\n';
  return os.str();
}

}  // namespace rsad
