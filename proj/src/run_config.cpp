#include "dslite/run_config.hpp"

#include <charconv>
#include <limits>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>
#include <zlib.h>

#include "dslite/csv.hpp"
#include "dslite/error.hpp"
#include "dslite/model_store.hpp"

namespace dslite {

namespace {

using Value = std::variant<bool, std::int64_t, double, std::string>;

struct Key {
  const char* name;
  const char* section;
  std::function<Value(const RunConfig&)> get;
  std::function<void(RunConfig&, const Value&)> set;
};

template <class T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  if constexpr (std::is_same_v<T, std::int64_t>) return "an integer";
  if constexpr (std::is_same_v<T, double>) return "a number";
  if constexpr (std::is_same_v<T, std::string>) return "a quoted string";
}

// Integers are accepted where reals are expected, never the reverse.
template <class T>
T as(const Value& v) {
  if constexpr (std::is_same_v<T, double>) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  }
  if (const auto* t = std::get_if<T>(&v)) return *t;
  throw ConfigError(std::string("expected ") + type_name<T>());
}

int as_int(const Value& v) {
  const auto i = as<std::int64_t>(v);
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
    throw ConfigError("integer out of range");
  }
  return static_cast<int>(i);
}

std::uint64_t as_seed(const Value& v) {
  const auto i = as<std::int64_t>(v);
  if (i < 0) throw ConfigError("seed must be nonnegative");
  return static_cast<std::uint64_t>(i);
}

#define DSLITE_INT(key, sec, field) \
  Key { key, sec, [](const RunConfig& c) { return Value(std::int64_t{c.field}); }, [](RunConfig& c, const Value& v) { c.field = as_int(v); } }
#define DSLITE_REAL(key, sec, field) \
  Key { key, sec, [](const RunConfig& c) { return Value(c.field); }, [](RunConfig& c, const Value& v) { c.field = as<double>(v); } }
#define DSLITE_BOOL(key, sec, field) \
  Key { key, sec, [](const RunConfig& c) { return Value(c.field); }, [](RunConfig& c, const Value& v) { c.field = as<bool>(v); } }
#define DSLITE_STR(key, sec, field) \
  Key { key, sec, [](const RunConfig& c) { return Value(c.field); }, [](RunConfig& c, const Value& v) { c.field = as<std::string>(v); } }
#define DSLITE_SEED(key, sec, field) \
  Key { key, sec, [](const RunConfig& c) { return Value(static_cast<std::int64_t>(c.field)); }, [](RunConfig& c, const Value& v) { c.field = as_seed(v); } }

const std::vector<Key>& keys() {
  static const std::vector<Key> k{
      DSLITE_STR("manifest", "data", manifest),
      DSLITE_STR("out", "data", out),
      DSLITE_REAL("chunk_len_s", "data", train.chunk_len_s),
      DSLITE_INT("batch_size", "training", train.batch_size),
      DSLITE_REAL("initial_lr", "training", train.initial_lr),
      DSLITE_INT("epochs_phase1", "training", train.epochs_phase1),
      DSLITE_INT("epochs_phase2", "training", train.epochs_phase2),
      DSLITE_INT("finetune_layers", "training", train.finetune_layers),
      DSLITE_REAL("dropout_rate", "training", train.dropout_rate),
      DSLITE_INT("classifier_units", "training", train.classifier_units),
      DSLITE_SEED("seed", "training", train.seed),
      DSLITE_INT("arch.stem_pool", "extractor", arch.stem_pool),
      DSLITE_INT("arch.blocks", "extractor", arch.blocks),
      DSLITE_INT("arch.convs_per_block", "extractor", arch.convs_per_block),
      DSLITE_INT("arch.growth", "extractor", arch.growth),
      DSLITE_INT("arch.kernel", "extractor", arch.kernel),
      DSLITE_BOOL("augment.cutmix", "augmentation", augment.cutmix),
      DSLITE_BOOL("augment.spec_augment", "augmentation", augment.spec_augment),
      DSLITE_REAL("augment.a", "augmentation", augment.a),
      DSLITE_REAL("augment.s", "augmentation", augment.s),
      DSLITE_INT("augment.cutmix_max_px", "augmentation", augment.cutmix_max_px),
      DSLITE_INT("augment.specaug_max_px", "augmentation", augment.specaug_max_px),
      DSLITE_REAL("augment.p_min", "augmentation", augment.p_min),
      DSLITE_REAL("augment.p_max", "augmentation", augment.p_max),
      DSLITE_INT("eval.n_bootstrap", "evaluation", n_bootstrap),
      DSLITE_REAL("eval.confidence", "evaluation", confidence),
      DSLITE_SEED("eval.bootstrap_seed", "evaluation", bootstrap_seed),
      DSLITE_REAL("stream.hop_s", "inference", hop_s),
      DSLITE_STR("precision", "inference", precision),
  };
  return k;
}

#undef DSLITE_INT
#undef DSLITE_REAL
#undef DSLITE_BOOL
#undef DSLITE_STR
#undef DSLITE_SEED

std::string format_value(const Value& v) {
  struct {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, d);
      std::string s(buf, res.ptr);
      // Keep reals recognisable as reals.
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    std::string operator()(const std::string& s) const {
      std::string out = "\"";
      for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      return out + '"';
    }
  } fmt;
  return std::visit(fmt, v);
}

Value parse_value(const std::string& raw) {
  if (raw.empty()) throw ConfigError("missing value");
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < raw.size() && raw[i] != '"'; ++i) {
      if (raw[i] == '\\') {
        if (++i == raw.size()) break;
      }
      out += raw[i];
    }
    if (i >= raw.size()) throw ConfigError("unterminated string");
    if (i + 1 != raw.size()) throw ConfigError("trailing characters after string");
    return out;
  }
  const char* first = raw.data();
  const char* last = raw.data() + raw.size();
  std::int64_t i = 0;
  if (auto r = std::from_chars(first, last, i); r.ec == std::errc() && r.ptr == last) return i;
  double d = 0.0;
  if (auto r = std::from_chars(first, last, d); r.ec == std::errc() && r.ptr == last) return d;
  throw ConfigError("cannot parse value '" + raw + "' (strings need double quotes)");
}

// Cuts a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  augment.validate(arch.input_side);
  if (arch.blocks < 1) throw ConfigError("arch.blocks must be at least 1");
  if (arch.convs_per_block < 1) throw ConfigError("arch.convs_per_block must be at least 1");
  if (arch.growth < 1) throw ConfigError("arch.growth must be at least 1");
  if (arch.kernel < 1 || arch.kernel % 2 == 0) throw ConfigError("arch.kernel must be a positive odd number");
  if (arch.stem_pool < 0) throw ConfigError("arch.stem_pool must be nonnegative");
  if (train.finetune_layers > nn::extractor_depth(arch)) {
    throw ConfigError("finetune_layers = " + std::to_string(train.finetune_layers) + " exceeds the " +
                      std::to_string(nn::extractor_depth(arch)) + " extractor layers");
  }
  if (n_bootstrap < 1) throw ConfigError("eval.n_bootstrap must be positive");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("eval.confidence must lie in (0, 1)");
  if (!(hop_s > 0.0)) throw ConfigError("stream.hop_s must be positive");
  parse_precision(precision);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& k : keys()) {
    if (section != k.section) {
      if (!section.empty()) os << '\n';
      section = k.section;
      os << "# " << section << '\n';
    }
    os << k.name << " = " << format_value(k.get(cfg)) << '\n';
  }
  return os.str();
}

RunConfig parse_config(const std::string& text, const std::string& source, RunConfig base) {
  std::map<std::string, const Key*> index;
  for (const auto& k : keys()) index[k.name] = &k;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const std::string body = csv::trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = csv::trim(body.substr(0, eq));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->second->set(base, parse_value(csv::trim(body.substr(eq + 1))));
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), std::move(base));
}

std::uint32_t config_hash(const RunConfig& cfg) {
  const std::string d = dump_config(cfg);
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(d.data()), static_cast<uInt>(d.size())));
}

}  // namespace dslite
