#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ras/engine.hpp"
#include "ras/error.hpp"
#include "ras/llm_gateway.hpp"

namespace ras {

enum class BackendKind { Remote, Scripted };
enum class EmbedderKind { Hash, Remote };

struct CliConfig {
  SessionConfig session;

  BackendKind backend = BackendKind::Remote;
  std::string script;            // scripted planner/answerer responses
  std::string extractor_script;  // optional separate script for extraction
  RemoteConfig remote;

  EmbedderKind embedder = EmbedderKind::Hash;
  std::string embed_endpoint;
  std::size_t embed_dim = 256;
  std::uint64_t seed = 0;

  std::string corpus;
  std::string index_dir;
  std::size_t shards = 5;
  std::string triples;           // sidecar triples paired with the corpus
  std::string extract_template;
  std::string plan_exemplars_file;
  std::string answer_exemplars_file;
  std::string encoder_params;
  std::size_t workers = 1;

  /// Resolved settings; the API key is reported only as set or unset.
  nlohmann::json snapshot() const;
};

class ConfigError : public Error {
public:
  ConfigError(std::string source, std::string field, const std::string &what)
      : Error(source + ": " + field + ": " + what), source_(std::move(source)),
        field_(std::move(field)) {}
  const std::string &source() const noexcept { return source_; }
  const std::string &field() const noexcept { return field_; }

private:
  std::string source_;
  std::string field_;
};

struct ConfigField {
  std::string name;     // config-file key; flags use dashes instead of '_'
  std::string env;      // environment variable, empty when none
  std::string help;
};

const std::vector<ConfigField> &config_fields();

using Environment = std::map<std::string, std::string>;

/// Current process values for every registered environment variable.
Environment process_environment();

/// defaults < file < environment < flags, field by field. Flags are keyed by
/// field name.
CliConfig resolve_config(const std::optional<std::filesystem::path> &file,
                         const Environment &env,
                         const std::map<std::string, std::string> &flags);

/// Same, with the file given as parsed JSON.
CliConfig resolve_config(const nlohmann::json &file, const Environment &env,
                         const std::map<std::string, std::string> &flags);

} // namespace ras
