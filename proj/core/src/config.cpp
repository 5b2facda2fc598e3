// SPDX-License-Identifier: Apache-2.0
#include "gva/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gva/error.hpp"

namespace gva {

using nlohmann::json;

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("GVA_DATA_DIR"); env && *env) return env;
  std::filesystem::path build_dir = GVA_BUILD_DATA_DIR;
  std::error_code ec;
  if (std::filesystem::is_directory(build_dir / "lexicon", ec)) return build_dir;
  return GVA_INSTALL_DATA_DIR;
}

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw Error(ErrorKind::Config, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Config, std::string("bad value for ") + where + "." + key);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

void read_path(const json& obj, const char* key, std::filesystem::path& out, const std::filesystem::path& base,
               const std::string& where) {
  std::string s;
  read(obj, key, s, where);
  if (!s.empty()) out = resolve(base, s);
}

ProviderConfig parse_provider(const json& j, const std::string& name, const std::filesystem::path& base) {
  const std::string where = "providers." + name;
  check_keys(j, where,
             {"kind", "endpoint", "model_name", "api_key_env", "timeout_seconds", "max_retries", "temperature",
              "backoff_seconds", "script", "dimension", "seed"});
  ProviderConfig p;
  std::string kind;
  read(j, "kind", kind, where);
  if (kind.empty()) throw Error(ErrorKind::Config, where + ".kind is required");
  try {
    p.kind = provider_kind_from_string(kind);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, where + ": " + e.what());
  }
  read(j, "endpoint", p.endpoint, where);
  read(j, "model_name", p.model_name, where);
  read(j, "api_key_env", p.api_key_env, where);
  read(j, "timeout_seconds", p.timeout_seconds, where);
  read(j, "max_retries", p.max_retries, where);
  read(j, "temperature", p.temperature, where);
  read(j, "backoff_seconds", p.backoff_seconds, where);
  read_path(j, "script", p.script, base, where);
  read(j, "dimension", p.dimension, where);
  read(j, "seed", p.seed, where);
  return p;
}

std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const ProviderConfig& lookup(const std::map<std::string, ProviderConfig>& providers, const std::string& name,
                             const char* role) {
  auto it = providers.find(name);
  if (it == providers.end()) {
    throw Error(ErrorKind::Config, std::string(role) + " provider '" + name + "' is not defined");
  }
  return it->second;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "config",
             {"agent", "selector", "graph", "providers", "chat_provider", "caption_provider", "embed_provider",
              "cache", "max_in_flight", "lexicon_dir"});

  RunConfig cfg;
  auto& a = cfg.agent;
  if (auto it = doc.find("agent"); it != doc.end()) {
    check_keys(*it, "agent",
               {"initial_frames", "max_rounds", "confidence_threshold", "prompt_char_budget", "extract_relations",
                "prompt_template"});
    read(*it, "initial_frames", a.initial_frames, "agent");
    read(*it, "max_rounds", a.max_rounds, "agent");
    read(*it, "confidence_threshold", a.confidence_threshold, "agent");
    read(*it, "prompt_char_budget", a.prompt_char_budget, "agent");
    read(*it, "extract_relations", a.extract_relations, "agent");
    std::filesystem::path tmpl;
    read_path(*it, "prompt_template", tmpl, base_dir, "agent");
    if (!tmpl.empty()) a.prompt_template = slurp(tmpl);
  }
  if (auto it = doc.find("selector"); it != doc.end()) {
    check_keys(*it, "selector",
               {"weight_graph", "weight_visual", "weight_temporal", "k", "decay_len", "expanded_decay_multiplier"});
    auto& s = a.selector;
    read(*it, "weight_graph", s.weight_graph, "selector");
    read(*it, "weight_visual", s.weight_visual, "selector");
    read(*it, "weight_temporal", s.weight_temporal, "selector");
    read(*it, "k", s.k, "selector");
    read(*it, "decay_len", s.decay_len, "selector");
    read(*it, "expanded_decay_multiplier", s.expanded_decay_multiplier, "selector");
  }
  if (auto it = doc.find("graph"); it != doc.end()) {
    check_keys(*it, "graph", {"coherence_alpha", "window", "merge_similarity"});
    read(*it, "coherence_alpha", a.graph.coherence_alpha, "graph");
    read(*it, "window", a.graph.window, "graph");
    read(*it, "merge_similarity", a.graph.merge_similarity, "graph");
  }
  if (auto it = doc.find("providers"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorKind::Config, "providers must be an object");
    for (const auto& [name, p] : it->items()) cfg.providers[name] = parse_provider(p, name, base_dir);
  }
  read(doc, "chat_provider", cfg.chat_provider, "config");
  read(doc, "caption_provider", cfg.caption_provider, "config");
  read(doc, "embed_provider", cfg.embed_provider, "config");
  if (auto it = doc.find("cache"); it != doc.end()) {
    check_keys(*it, "cache", {"enabled", "dir"});
    read(*it, "enabled", cfg.cache_enabled, "cache");
    read_path(*it, "dir", cfg.cache_dir, base_dir, "cache");
  }
  read(doc, "max_in_flight", cfg.max_in_flight, "config");
  read_path(doc, "lexicon_dir", cfg.lexicon_dir, base_dir, "config");

  if (cfg.chat_provider.empty() && cfg.providers.size() == 1) cfg.chat_provider = cfg.providers.begin()->first;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  return parse_run_config(slurp(file), file.parent_path());
}

void RunConfig::validate() const {
  agent.validate();
  if (chat_provider.empty()) throw Error(ErrorKind::Config, "no chat provider configured");
  lookup(providers, chat_provider, "chat");
  if (!caption_provider.empty()) lookup(providers, caption_provider, "caption");
  if (!embed_provider.empty()) lookup(providers, embed_provider, "embed");
  for (const auto& [_, p] : providers) p.validate();
  if (max_in_flight < 1 || max_in_flight > 64) throw Error(ErrorKind::Config, "max_in_flight must be in [1, 64]");
}

GatewayConfig RunConfig::gateway_config() const {
  GatewayConfig g;
  g.chat = lookup(providers, chat_provider, "chat");
  if (!caption_provider.empty()) g.caption = lookup(providers, caption_provider, "caption");
  if (!embed_provider.empty()) g.embed = lookup(providers, embed_provider, "embed");
  g.cache_enabled = cache_enabled;
  g.cache_dir = cache_dir;
  g.max_in_flight = max_in_flight;
  return g;
}

void RunConfig::use_chat_provider(const std::string& name) {
  lookup(providers, name, "chat");
  chat_provider = name;
}

void RunConfig::set_seed(std::uint64_t seed) {
  for (auto& [_, p] : providers) p.seed = seed;
}

}  // namespace gva
