#include "lbe/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lbe/common.hpp"

namespace lbe {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  return x;
}

long parse_long(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': bad bool '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<int>(parse_long(key, item)));
  }
  return out;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define LBE_FIELD_STR(member)                                                    \
  Field{[](RunConfig& c, const std::string&, const std::string& v) { c.member = v; }, \
        [](const RunConfig& c) { return c.member; }}
#define LBE_FIELD_DBL(member)                                             \
  Field{[](RunConfig& c, const std::string& k, const std::string& v) {   \
          c.member = parse_double(k, v);                                  \
        },                                                                \
        [](const RunConfig& c) { return fmt_double(c.member); }}
#define LBE_FIELD_INT(member)                                                       \
  Field{[](RunConfig& c, const std::string& k, const std::string& v) {             \
          c.member = static_cast<int>(parse_long(k, v));                            \
        },                                                                          \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define LBE_FIELD_BOOL(member)                                            \
  Field{[](RunConfig& c, const std::string& k, const std::string& v) {   \
          c.member = parse_bool(k, v);                                    \
        },                                                                \
        [](const RunConfig& c) { return c.member ? "true" : "false"; }}

const std::map<std::string, Field>& field_table() {
  static const std::map<std::string, Field> table = {
      {"dataset.kind", LBE_FIELD_STR(dataset_kind)},
      {"dataset.path", LBE_FIELD_STR(dataset_path)},
      {"dataset.classes", LBE_FIELD_INT(dataset_classes)},
      {"dataset.per_class", LBE_FIELD_INT(dataset_per_class)},
      {"dataset.dim", LBE_FIELD_INT(dataset_dim)},
      {"dataset.spread", LBE_FIELD_DBL(dataset_spread)},
      {"dataset.noise", LBE_FIELD_DBL(dataset_noise)},
      {"data.val_fraction", LBE_FIELD_DBL(val_fraction)},
      {"model.hidden",
       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
               c.hidden = parse_int_list(k, v);
             },
             [](const RunConfig& c) { return fmt_int_list(c.hidden); }}},
      {"model.embed_dim", LBE_FIELD_INT(embed_dim)},
      {"model.tau", LBE_FIELD_DBL(tau)},
      {"model.tie_weights", LBE_FIELD_BOOL(tie_weights)},
      {"hash.gumbel_temp", LBE_FIELD_DBL(gumbel_temp)},
      {"hash.code_bits", LBE_FIELD_INT(code_bits)},
      {"hash.code_mode", LBE_FIELD_STR(code_mode)},
      {"variant", LBE_FIELD_STR(variant)},
      {"loss.mode", LBE_FIELD_STR(loss_mode)},
      {"predict.mode", LBE_FIELD_STR(predict_mode)},
      {"predict.k", LBE_FIELD_INT(predict_k)},
      {"predict.allow_self_match", LBE_FIELD_BOOL(allow_self_match)},
      {"init.label_informed", LBE_FIELD_BOOL(label_informed_init)},
      {"train.epochs", LBE_FIELD_INT(epochs)},
      {"train.batch_size", LBE_FIELD_INT(batch_size)},
      {"train.patience", LBE_FIELD_INT(patience)},
      {"optimizer.t.lr", LBE_FIELD_DBL(t_lr)},
      {"optimizer.t.momentum", LBE_FIELD_DBL(t_momentum)},
      {"optimizer.t.weight_decay", LBE_FIELD_DBL(t_wd)},
      {"optimizer.s.lr", LBE_FIELD_DBL(s_lr)},
      {"optimizer.s.momentum", LBE_FIELD_DBL(s_momentum)},
      {"optimizer.s.weight_decay", LBE_FIELD_DBL(s_wd)},
      {"optimizer.a.lr", LBE_FIELD_DBL(a_lr)},
      {"optimizer.a.weight_decay", LBE_FIELD_DBL(a_wd)},
      {"xi.policy", LBE_FIELD_STR(xi_policy)},
      {"xi.t", LBE_FIELD_DBL(xi_t)},
      {"xi.s", LBE_FIELD_DBL(xi_s)},
      {"episode.n_way", LBE_FIELD_INT(ep_n_way)},
      {"episode.k_shot", LBE_FIELD_INT(ep_k_shot)},
      {"episode.q_query", LBE_FIELD_INT(ep_q_query)},
      {"episode.count", LBE_FIELD_INT(ep_count)},
      {"episode.epochs", LBE_FIELD_INT(ep_epochs)},
      {"seed",
       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
               c.seed = static_cast<std::uint64_t>(parse_long(k, v));
             },
             [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"out.dir", LBE_FIELD_STR(out_dir)},
  };
  return table;
}

#undef LBE_FIELD_STR
#undef LBE_FIELD_DBL
#undef LBE_FIELD_INT
#undef LBE_FIELD_BOOL

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = field_table().find(key);
    if (it == field_table().end())
      throw ConfigError("unknown config key '" + key + "' at line " + std::to_string(line_no));
    it->second.set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [key, field] : field_table()) {
    out += key;
    out += " = ";
    out += field.get(*this);
    out += "\n";
  }
  return out;
}

void RunConfig::validate() const {
  const auto one_of = [](const std::string& key, const std::string& v,
                         std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
      if (v == a) return;
    throw ConfigError("config key '" + key + "': invalid value '" + v + "'");
  };
  one_of("dataset.kind", dataset_kind, {"blobs", "moons", "csv"});
  one_of("variant", variant, {"lbe", "fast-T", "fast-S", "fast-TS"});
  one_of("loss.mode", loss_mode, {"bce", "literal"});
  one_of("predict.mode", predict_mode, {"soft", "topk"});
  one_of("xi.policy", xi_policy, {"scheduled", "fixed"});
  one_of("hash.code_mode", code_mode, {"threshold", "sample"});
  const auto positive = [](const std::string& key, double v) {
    if (!(v > 0.0)) throw ConfigError("config key '" + key + "': must be positive");
  };
  positive("model.tau", tau);
  positive("hash.gumbel_temp", gumbel_temp);
  positive("optimizer.t.lr", t_lr);
  positive("optimizer.s.lr", s_lr);
  positive("optimizer.a.lr", a_lr);
  positive("xi.t", xi_t);
  positive("xi.s", xi_s);
  if (val_fraction <= 0.0 || val_fraction >= 1.0)
    throw ConfigError("config key 'data.val_fraction': must be in (0,1)");
  if (epochs < 0) throw ConfigError("config key 'train.epochs': must be >= 0");
  if (batch_size < 2) throw ConfigError("config key 'train.batch_size': must be >= 2");
  if (code_bits < 1) throw ConfigError("config key 'hash.code_bits': must be >= 1");
  if (predict_k < 1) throw ConfigError("config key 'predict.k': must be >= 1");
  if (t_wd < 0 || s_wd < 0 || a_wd < 0)
    throw ConfigError("config: weight decay must be >= 0");
  if (t_momentum < 0 || t_momentum >= 1 || s_momentum < 0 || s_momentum >= 1)
    throw ConfigError("config: momentum must be in [0,1)");
}

Variant RunConfig::variant_enum() const {
  if (variant == "lbe") return Variant::kVanilla;
  if (variant == "fast-T") return Variant::kFastT;
  if (variant == "fast-S") return Variant::kFastS;
  return Variant::kFastTS;
}

LossMode RunConfig::loss_mode_enum() const {
  return loss_mode == "literal" ? LossMode::kLiteral : LossMode::kBce;
}

PredictMode RunConfig::predict_mode_enum() const {
  return predict_mode == "topk" ? PredictMode::kTopK : PredictMode::kSoft;
}

bool RunConfig::hash_t() const {
  const Variant v = variant_enum();
  return v == Variant::kFastT || v == Variant::kFastTS;
}

bool RunConfig::hash_s() const {
  const Variant v = variant_enum();
  return v == Variant::kFastS || v == Variant::kFastTS;
}

}  // namespace lbe
