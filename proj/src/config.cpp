#include "ras/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "text_util.hpp"

namespace ras {

namespace {

enum class Type { Uint, Double, Bool, String, Choice };

struct FieldDef {
  ConfigField info;
  Type type;
  std::vector<std::string> choices;
  std::function<void(CliConfig &, const nlohmann::json &)> set;
};

template <class T> auto uint_field(T CliConfig::*member) {
  return [member](CliConfig &c, const nlohmann::json &v) {
    c.*member = v.get<T>();
  };
}

const std::vector<FieldDef> &registry() {
  static const std::vector<FieldDef> defs = [] {
    std::vector<FieldDef> d;
    auto add = [&](std::string name, std::string env, std::string help, Type type,
                   std::function<void(CliConfig &, const nlohmann::json &)> set,
                   std::vector<std::string> choices = {}) {
      d.push_back({{std::move(name), std::move(env), std::move(help)},
                   type,
                   std::move(choices),
                   std::move(set)});
    };
    auto str = [](std::string CliConfig::*member) {
      return [member](CliConfig &c, const nlohmann::json &v) {
        c.*member = v.get<std::string>();
      };
    };

    add("max_iterations", "RAS_MAX_ITERATIONS", "iteration cap", Type::Uint,
        [](CliConfig &c, const nlohmann::json &v) {
          c.session.max_iterations = v.get<std::size_t>();
        });
    add("top_k", "RAS_TOP_K", "passages per retrieval", Type::Uint,
        [](CliConfig &c, const nlohmann::json &v) {
          c.session.top_k = v.get<std::size_t>();
        });
    add("retriever", "RAS_RETRIEVER", "dense or bm25", Type::Choice,
        [](CliConfig &c, const nlohmann::json &v) {
          c.session.retriever =
              v == "bm25" ? RetrieverKind::Bm25 : RetrieverKind::Dense;
        },
        {"dense", "bm25"});
    add("mode", "RAS_MODE", "dynamic or static", Type::Choice,
        [](CliConfig &c, const nlohmann::json &v) {
          c.session.mode =
              v == "static" ? InferenceMode::Static : InferenceMode::Dynamic;
        },
        {"dynamic", "static"});
    add("max_new_tokens", "RAS_MAX_NEW_TOKENS", "generation limit", Type::Uint,
        [](CliConfig &c, const nlohmann::json &v) {
          c.session.max_new_tokens = v.get<std::size_t>();
        });
    add("task", "RAS_TASK",
        "short_form, arc_challenge, pubhealth, asqa or eli5", Type::Choice,
        [](CliConfig &c, const nlohmann::json &v) {
          c.session.task = *parse_task(v.get<std::string>());
          c.session.long_form = is_long_form(c.session.task);
        },
        {"short_form", "popqa", "triviaqa", "2wqa", "arc_challenge", "arc",
         "pubhealth", "asqa", "eli5"});
    add("history_budget", "RAS_HISTORY_BUDGET", "history token budget",
        Type::Uint, [](CliConfig &c, const nlohmann::json &v) {
          c.session.history_budget = v.get<std::size_t>();
        });
    add("on_plan_failure", "RAS_ON_PLAN_FAILURE", "answer or fail", Type::Choice,
        [](CliConfig &c, const nlohmann::json &v) {
          c.session.on_plan_failure =
              v == "fail" ? PlanFailurePolicy::Fail : PlanFailurePolicy::Answer;
        },
        {"answer", "fail"});
    add("backend", "RAS_BACKEND", "remote or scripted", Type::Choice,
        [](CliConfig &c, const nlohmann::json &v) {
          c.backend = v == "scripted" ? BackendKind::Scripted : BackendKind::Remote;
        },
        {"remote", "scripted"});
    add("script", "RAS_SCRIPT", "scripted responses file", Type::String,
        str(&CliConfig::script));
    add("extractor_script", "RAS_EXTRACTOR_SCRIPT",
        "scripted responses for triple extraction", Type::String,
        str(&CliConfig::extractor_script));
    add("endpoint", "RAS_ENDPOINT", "chat completions URL", Type::String,
        [](CliConfig &c, const nlohmann::json &v) {
          c.remote.endpoint = v.get<std::string>();
        });
    add("api_key", "RAS_API_KEY", "bearer credential", Type::String,
        [](CliConfig &c, const nlohmann::json &v) {
          c.remote.api_key = v.get<std::string>();
        });
    add("model", "RAS_MODEL", "model name sent to the endpoint", Type::String,
        [](CliConfig &c, const nlohmann::json &v) {
          c.remote.model = v.get<std::string>();
        });
    add("temperature", "RAS_TEMPERATURE", "sampling temperature", Type::Double,
        [](CliConfig &c, const nlohmann::json &v) {
          c.remote.temperature = v.get<double>();
        });
    add("max_attempts", "RAS_MAX_ATTEMPTS", "remote attempts per call",
        Type::Uint, [](CliConfig &c, const nlohmann::json &v) {
          c.remote.max_attempts = v.get<std::size_t>();
        });
    add("timeout_seconds", "RAS_TIMEOUT_SECONDS", "remote timeout", Type::Uint,
        [](CliConfig &c, const nlohmann::json &v) {
          c.remote.timeout_seconds = v.get<int>();
        });
    add("embedder", "RAS_EMBEDDER", "hash or remote", Type::Choice,
        [](CliConfig &c, const nlohmann::json &v) {
          c.embedder = v == "remote" ? EmbedderKind::Remote : EmbedderKind::Hash;
        },
        {"hash", "remote"});
    add("embed_endpoint", "RAS_EMBED_ENDPOINT", "embedding service URL",
        Type::String, str(&CliConfig::embed_endpoint));
    add("embed_dim", "RAS_EMBED_DIM", "embedding dimension", Type::Uint,
        uint_field(&CliConfig::embed_dim));
    add("seed", "RAS_SEED", "hash embedding seed", Type::Uint,
        uint_field(&CliConfig::seed));
    add("corpus", "RAS_CORPUS", "corpus JSONL", Type::String,
        str(&CliConfig::corpus));
    add("index_dir", "RAS_INDEX_DIR", "dense index directory", Type::String,
        str(&CliConfig::index_dir));
    add("shards", "RAS_SHARDS", "dense index shards", Type::Uint,
        uint_field(&CliConfig::shards));
    add("triples", "RAS_TRIPLES", "precomputed triples, one line per passage",
        Type::String, str(&CliConfig::triples));
    add("extract_template", "RAS_EXTRACT_TEMPLATE", "extraction template file",
        Type::String, str(&CliConfig::extract_template));
    add("plan_exemplars", "RAS_PLAN_EXEMPLARS", "planner exemplars file",
        Type::String, str(&CliConfig::plan_exemplars_file));
    add("answer_exemplars", "RAS_ANSWER_EXEMPLARS", "answerer exemplars file",
        Type::String, str(&CliConfig::answer_exemplars_file));
    add("encoder_params", "RAS_ENCODER_PARAMS", "graph encoder weights",
        Type::String, str(&CliConfig::encoder_params));
    add("workers", "RAS_WORKERS", "worker threads", Type::Uint,
        uint_field(&CliConfig::workers));
    return d;
  }();
  return defs;
}

const char *type_name(Type t) {
  switch (t) {
  case Type::Uint:
    return "a non-negative integer";
  case Type::Double:
    return "a number";
  case Type::Bool:
    return "a boolean";
  case Type::String:
    return "a string";
  case Type::Choice:
    return "one of the listed choices";
  }
  return "?";
}

// Checks a JSON value against the field type, returning the value to store.
nlohmann::json check_json(const FieldDef &f, const nlohmann::json &v,
                          const std::string &source) {
  switch (f.type) {
  case Type::Uint:
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0))
      return v;
    break;
  case Type::Double:
    if (v.is_number())
      return v.get<double>();
    break;
  case Type::Bool:
    if (v.is_boolean())
      return v;
    break;
  case Type::String:
    if (v.is_string())
      return v;
    break;
  case Type::Choice:
    if (v.is_string()) {
      for (const auto &c : f.choices)
        if (c == v.get<std::string>())
          return v;
      std::string list;
      for (const auto &c : f.choices)
        list += (list.empty() ? "" : ", ") + c;
      throw ConfigError(source, f.info.name,
                        "'" + v.get<std::string>() + "' is not one of: " + list);
    }
    break;
  }
  throw ConfigError(source, f.info.name,
                    std::string("expected ") + type_name(f.type) + ", got " +
                        v.dump());
}

nlohmann::json from_text(const FieldDef &f, const std::string &text,
                         const std::string &source) {
  const std::string_view t = detail::trim(text);
  switch (f.type) {
  case Type::Uint: {
    unsigned long long value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
      throw ConfigError(source, f.info.name,
                        "expected a non-negative integer, got '" + text + "'");
    return value;
  }
  case Type::Double: {
    char *end = nullptr;
    const std::string s(t);
    const double value = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
      throw ConfigError(source, f.info.name,
                        "expected a number, got '" + text + "'");
    return value;
  }
  case Type::Bool:
    if (t == "true" || t == "1")
      return true;
    if (t == "false" || t == "0")
      return false;
    throw ConfigError(source, f.info.name,
                      "expected true or false, got '" + text + "'");
  case Type::String:
    return text;
  case Type::Choice:
    return check_json(f, nlohmann::json(std::string(t)), source);
  }
  return text;
}

const FieldDef *find_field(const std::string &name) {
  for (const auto &f : registry())
    if (f.info.name == name)
      return &f;
  return nullptr;
}

} // namespace

const std::vector<ConfigField> &config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> out;
    for (const auto &f : registry())
      out.push_back(f.info);
    return out;
  }();
  return fields;
}

Environment process_environment() {
  Environment env;
  for (const auto &f : registry())
    if (!f.info.env.empty())
      if (const char *v = std::getenv(f.info.env.c_str()))
        env[f.info.env] = v;
  return env;
}

CliConfig resolve_config(const nlohmann::json &file, const Environment &env,
                         const std::map<std::string, std::string> &flags) {
  CliConfig cfg;
  if (!file.is_null()) {
    if (!file.is_object())
      throw ConfigError("config file", "<root>", "expected a JSON object");
    for (const auto &[key, value] : file.items()) {
      const FieldDef *f = find_field(key);
      if (!f)
        throw ConfigError("config file", key, "unknown field");
      f->set(cfg, check_json(*f, value, "config file"));
    }
  }
  for (const auto &f : registry()) {
    if (f.info.env.empty())
      continue;
    auto it = env.find(f.info.env);
    if (it != env.end())
      f.set(cfg, from_text(f, it->second, "environment " + f.info.env));
  }
  for (const auto &[key, value] : flags) {
    const FieldDef *f = find_field(key);
    if (!f)
      throw ConfigError("flags", key, "unknown field");
    f->set(cfg, from_text(*f, value, "flag --" + key));
  }
  try {
    cfg.session.check();
  } catch (const InvalidArgument &e) {
    throw ConfigError("resolved config", "session", e.what());
  }
  if (cfg.embed_dim == 0)
    throw ConfigError("resolved config", "embed_dim", "must be positive");
  if (cfg.shards == 0)
    throw ConfigError("resolved config", "shards", "must be positive");
  return cfg;
}

CliConfig resolve_config(const std::optional<std::filesystem::path> &file,
                         const Environment &env,
                         const std::map<std::string, std::string> &flags) {
  nlohmann::json parsed;
  if (file) {
    std::ifstream in(*file);
    if (!in)
      throw ConfigError("config file", file->string(), "cannot open");
    parsed = nlohmann::json::parse(in, nullptr, false);
    if (parsed.is_discarded())
      throw ConfigError("config file", file->string(), "invalid JSON");
  }
  return resolve_config(parsed, env, flags);
}

nlohmann::json CliConfig::snapshot() const {
  nlohmann::json j;
  j["session"] = session.to_json();
  j["backend"] = backend == BackendKind::Scripted ? "scripted" : "remote";
  j["script"] = script;
  j["extractor_script"] = extractor_script;
  j["endpoint"] = remote.endpoint;
  j["api_key"] = remote.api_key.empty() ? "unset" : "set";
  j["model"] = remote.model;
  j["temperature"] = remote.temperature;
  j["max_attempts"] = remote.max_attempts;
  j["timeout_seconds"] = remote.timeout_seconds;
  j["embedder"] = embedder == EmbedderKind::Remote ? "remote" : "hash";
  j["embed_endpoint"] = embed_endpoint;
  j["embed_dim"] = embed_dim;
  j["seed"] = seed;
  j["corpus"] = corpus;
  j["index_dir"] = index_dir;
  j["shards"] = shards;
  j["triples"] = triples;
  j["extract_template"] = extract_template;
  j["plan_exemplars"] = plan_exemplars_file;
  j["answer_exemplars"] = answer_exemplars_file;
  j["encoder_params"] = encoder_params;
  j["workers"] = workers;
  return j;
}

} // namespace ras
