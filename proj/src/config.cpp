#include "adrbm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "adrbm/errors.hpp"

namespace adrbm {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(fmt::format("{}: cannot parse '{}' as a number", key, value));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true") {
    return true;
  }
  if (value == "false") {
    return false;
  }
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, value));
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view, const fs::path&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Member>
Field number_field(std::string key, Member member) {
  return Field{
      key,
      [key, member](RunConfig& c, std::string_view v, const fs::path&) {
        member(c) = parse_number<T>(key, v);
      },
      [member](const RunConfig& c) {
        if constexpr (std::is_floating_point_v<T>) {
          return fmt_double(member(c));
        } else {
          return fmt::format("{}", member(c));
        }
      }};
}

template <typename Member>
Field path_field(std::string key, Member member) {
  return Field{key,
               [member](RunConfig& c, std::string_view v, const fs::path& base) {
                 fs::path p{std::string(v)};
                 member(c) = p.is_relative() && !p.empty() ? base / p : p;
               },
               [member](const RunConfig& c) {
                 return member(c).string();
               }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"model.kind",
                 [](RunConfig& c, std::string_view v, const fs::path&) {
                   c.kind = parse_model_kind(v);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.kind)); }});
    f.push_back({"model.adaptive",
                 [](RunConfig& c, std::string_view v, const fs::path&) {
                   c.train.adaptive = parse_bool("model.adaptive", v);
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.adaptive ? "true" : "false");
                 }});
    f.push_back(number_field<Index>("model.n_hidden",
                                    [](auto& c) -> auto& { return c.train.n_hidden; }));
    f.push_back(number_field<Index>("model.state_dim",
                                    [](auto& c) -> auto& { return c.train.state_dim; }));
    f.push_back(number_field<int>("train.epochs",
                                  [](auto& c) -> auto& { return c.train.epochs; }));
    f.push_back(number_field<std::uint64_t>(
        "train.seed", [](auto& c) -> auto& { return c.seed; }));
    f.push_back(number_field<int>("train.k", [](auto& c) -> auto& { return c.train.cd.k; }));
    f.push_back(number_field<double>(
        "train.learning_rate", [](auto& c) -> auto& { return c.train.cd.learning_rate; }));
    f.push_back(number_field<int>("train.batch_size",
                                  [](auto& c) -> auto& { return c.train.cd.batch_size; }));
    f.push_back(number_field<double>("train.clip_norm",
                                     [](auto& c) -> auto& { return c.train.clip_norm; }));
    f.push_back(number_field<double>("adapt.alpha_c",
                                     [](auto& c) -> auto& { return c.train.adapt.alpha_c; }));
    f.push_back(number_field<double>("adapt.alpha_W",
                                     [](auto& c) -> auto& { return c.train.adapt.alpha_W; }));
    f.push_back(number_field<double>("adapt.theta_G",
                                     [](auto& c) -> auto& { return c.train.adapt.theta_G; }));
    f.push_back(number_field<double>("adapt.theta_A",
                                     [](auto& c) -> auto& { return c.train.adapt.theta_A; }));
    f.push_back(number_field<int>("adapt.generation_phase_epochs", [](auto& c) -> auto& {
      return c.train.adapt.generation_phase_epochs;
    }));
    f.push_back(number_field<Index>("adapt.min_hidden",
                                    [](auto& c) -> auto& { return c.train.adapt.min_hidden; }));
    f.push_back(number_field<Index>("adapt.max_hidden",
                                    [](auto& c) -> auto& { return c.train.adapt.max_hidden; }));
    f.push_back(number_field<double>("adapt.split_noise_sd", [](auto& c) -> auto& {
      return c.train.adapt.split_noise_sd;
    }));
    f.push_back(number_field<double>("adapt.stats_decay", [](auto& c) -> auto& {
      return c.train.adapt.stats_decay;
    }));
    f.push_back(number_field<double>("forget.epsilon1",
                                     [](auto& c) -> auto& { return c.train.forget.epsilon1; }));
    f.push_back(number_field<double>("forget.epsilon2",
                                     [](auto& c) -> auto& { return c.train.forget.epsilon2; }));
    f.push_back(number_field<double>("forget.epsilon3",
                                     [](auto& c) -> auto& { return c.train.forget.epsilon3; }));
    f.push_back(number_field<double>("forget.theta", [](auto& c) -> auto& {
      return c.train.forget.theta_selective;
    }));
    f.push_back(number_field<int>("forget.forgetting_epochs", [](auto& c) -> auto& {
      return c.train.forget.forgetting_epochs;
    }));
    f.push_back(number_field<int>("forget.selective_epochs", [](auto& c) -> auto& {
      return c.train.forget.selective_epochs;
    }));
    f.push_back(number_field<double>("layers.alpha_WD",
                                     [](auto& c) -> auto& { return c.train.layers.alpha_WD; }));
    f.push_back(number_field<double>("layers.alpha_E",
                                     [](auto& c) -> auto& { return c.train.layers.alpha_E; }));
    f.push_back(number_field<double>("layers.theta_L1",
                                     [](auto& c) -> auto& { return c.train.layers.theta_L1; }));
    f.push_back(number_field<double>("layers.theta_L2",
                                     [](auto& c) -> auto& { return c.train.layers.theta_L2; }));
    f.push_back(number_field<int>("layers.max_layers",
                                  [](auto& c) -> auto& { return c.train.layers.max_layers; }));
    f.push_back(path_field("data.train", [](auto& c) -> auto& { return c.train_path; }));
    f.push_back(path_field("data.test", [](auto& c) -> auto& { return c.test_path; }));
    f.push_back(path_field("out.dir", [](auto& c) -> auto& { return c.out_dir; }));
    return f;
  }();
  return table;
}

} // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
  case ModelKind::rbm:
    return "rbm";
  case ModelKind::dbn:
    return "dbn";
  case ModelKind::rnn_rbm:
    return "rnn-rbm";
  case ModelKind::rnn_dbn:
    return "rnn-dbn";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::rbm, ModelKind::dbn, ModelKind::rnn_rbm, ModelKind::rnn_dbn}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw ConfigError(fmt::format("unknown model kind '{}' (expected rbm, dbn, rnn-rbm, rnn-dbn)",
                                name));
}

bool is_recurrent(ModelKind kind) {
  return kind == ModelKind::rnn_rbm || kind == ModelKind::rnn_dbn;
}

void RunConfig::validate(bool check_paths) const {
  train.validate();
  if (check_paths) {
    if (train_path.empty()) {
      throw ConfigError("data.train is required");
    }
    if (!fs::exists(train_path)) {
      throw ConfigError("data.train not found: " + train_path.string());
    }
    if (!test_path.empty() && !fs::exists(test_path)) {
      throw ConfigError("data.test not found: " + test_path.string());
    }
  }
}

TrainConfig RunConfig::effective_train() const {
  TrainConfig t = train;
  if (kind == ModelKind::rbm || kind == ModelKind::rnn_rbm) {
    t.layers.max_layers = 1;
  }
  return t;
}

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return f.key == key; });
    if (it == table.end()) {
      throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
    }
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(fmt::format("line {}: key '{}' given twice", line_no, key));
    }
    try {
      it->set(cfg, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  cfg.validate(false);
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

std::string render_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    const std::string value = f.get(cfg);
    if (value.empty()) {
      continue;
    }
    out += f.key + " = " + value + "\n";
  }
  return out;
}

} // namespace adrbm
