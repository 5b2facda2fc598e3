// SPDX-License-Identifier: Apache-2.0
#include "gva/model_gateway.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "gva/error.hpp"
#include "gva/hash.hpp"

namespace gva {

using json = nlohmann::json;

namespace {

struct SplitEndpoint {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

SplitEndpoint split_endpoint(const std::string& endpoint) {
  auto scheme = endpoint.find("://");
  auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  auto slash = endpoint.find('/', host_start);
  SplitEndpoint out{endpoint.substr(0, slash), slash == std::string::npos ? "" : endpoint.substr(slash)};
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

bool is_transient(int status) { return status == 408 || status == 429 || status >= 500; }

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<64>& sem) : sem_(sem) { sem_.acquire(); }
  ~SemaphoreGuard() { sem_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<64>& sem_;
};

std::string frame_reference(const VideoBundle& bundle, FrameIndex frame) {
  return "frame:" + bundle.video_id + ":" + std::to_string(frame);
}

void check_frame(const VideoBundle& bundle, FrameIndex frame) {
  if (frame < 0 || frame >= bundle.total_frames) {
    throw Error(ErrorKind::InvalidArgument, "frame " + std::to_string(frame) + " outside video '" + bundle.video_id +
                                                "' (" + std::to_string(bundle.total_frames) + " frames)");
  }
}

Embedding decode_embedding(const std::string& body, int attempts) {
  try {
    auto doc = json::parse(body);
    const auto& arr = doc.at("data").at(0).at("embedding");
    Embedding v;
    v.reserve(arr.size());
    for (const auto& x : arr) v.push_back(x.get<double>());
    if (v.empty()) throw std::runtime_error("empty embedding");
    return v;
  } catch (const std::exception& e) {
    throw GatewayError(std::string("malformed embeddings payload: ") + e.what(), 200, attempts);
  }
}

}  // namespace

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::RemoteChat:
      return "remote_chat";
    case ProviderKind::RemoteEmbed:
      return "remote_embed";
    case ProviderKind::PrecomputedCaption:
      return "precomputed_caption";
    case ProviderKind::PrecomputedEmbed:
      return "precomputed_embed";
    case ProviderKind::Scripted:
      return "scripted";
  }
  return "unknown";
}

ProviderKind provider_kind_from_string(std::string_view name) {
  for (auto k : {ProviderKind::RemoteChat, ProviderKind::RemoteEmbed, ProviderKind::PrecomputedCaption,
                 ProviderKind::PrecomputedEmbed, ProviderKind::Scripted}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::Config, "unknown provider kind '" + std::string(name) + "'");
}

void ProviderConfig::validate() const {
  if (kind == ProviderKind::RemoteChat || kind == ProviderKind::RemoteEmbed) {
    if (endpoint.empty() || model_name.empty()) {
      throw Error(ErrorKind::Config, std::string(to_string(kind)) + " provider needs endpoint and model_name");
    }
  }
  if (max_retries < 0) throw Error(ErrorKind::Config, "max_retries must be >= 0");
  if (!(timeout_seconds > 0)) throw Error(ErrorKind::Config, "timeout must be positive");
  if (backoff_seconds < 0) throw Error(ErrorKind::Config, "backoff must be >= 0");
}

std::string ProviderConfig::id() const {
  std::ostringstream out;
  out << to_string(kind) << '|' << endpoint << '|' << model_name << '|' << temperature << '|' << script.string() << '|'
      << dimension << '|' << seed;
  return out.str();
}

ModelGateway::ModelGateway(GatewayConfig config) : config_(std::move(config)) {
  config_.chat.validate();
  config_.caption.validate();
  config_.embed.validate();
  if (config_.max_in_flight < 1 || config_.max_in_flight > 64) {
    throw Error(ErrorKind::Config, "max_in_flight must be in [1, 64]");
  }
  in_flight_ = std::make_unique<std::counting_semaphore<64>>(config_.max_in_flight);
  if (!config_.cache_dir.empty()) std::filesystem::create_directories(config_.cache_dir);
}

ModelGateway::~ModelGateway() = default;

GatewayStats ModelGateway::stats() const {
  return {wire_attempts_.load(), cache_hits_.load(), cache_misses_.load()};
}

std::optional<std::string> ModelGateway::cache_get(const std::string& key) {
  std::lock_guard lock(cache_mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  if (!config_.cache_dir.empty()) {
    std::ifstream in(config_.cache_dir / key, std::ios::binary);
    if (in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      cache_[key] = ss.str();
      return ss.str();
    }
  }
  return std::nullopt;
}

void ModelGateway::cache_put(const std::string& key, const std::string& value) {
  std::lock_guard lock(cache_mutex_);
  cache_[key] = value;
  if (!config_.cache_dir.empty()) {
    auto tmp = config_.cache_dir / (key + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << value;
    }
    std::error_code ec;
    std::filesystem::rename(tmp, config_.cache_dir / key, ec);
    if (ec) spdlog::warn("cache: could not persist {}: {}", key, ec.message());
  }
}

std::string ModelGateway::cached(const ProviderConfig& provider, const std::string& body,
                                 const std::function<std::string()>& compute) {
  if (!config_.cache_enabled) return compute();
  auto key = sha256_hex(provider.id() + "\n" + body);
  if (auto hit = cache_get(key)) {
    ++cache_hits_;
    return *hit;
  }
  ++cache_misses_;
  auto value = compute();
  cache_put(key, value);
  return value;
}

std::string ModelGateway::remote_post(const ProviderConfig& provider, const std::string& path,
                                      const std::string& body) {
  httplib::Headers headers;
  if (!provider.api_key_env.empty()) {
    const char* key = std::getenv(provider.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorKind::Config, "environment variable " + provider.api_key_env + " (API key) is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto [base, prefix] = split_endpoint(provider.endpoint);
  httplib::Client client(base);
  auto secs = std::chrono::duration<double>(provider.timeout_seconds);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(secs);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const int max_attempts = provider.max_retries + 1;
  int last_status = 0;
  std::string last_reason;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      SemaphoreGuard guard(*in_flight_);
      ++wire_attempts_;
      res = client.Post(prefix + path, headers, body, "application/json");
    }
    if (res && res->status >= 200 && res->status < 300) return res->body;

    last_status = res ? res->status : 0;
    last_reason = res ? "HTTP " + std::to_string(res->status) : "connection failed: " + httplib::to_string(res.error());
    if (res && !is_transient(res->status)) {
      throw GatewayError(provider.endpoint + path + ": " + last_reason, last_status, attempt);
    }
    spdlog::warn("gateway: {}{} attempt {}/{}: {}", provider.endpoint, path, attempt, max_attempts, last_reason);
    if (attempt < max_attempts) {
      auto delay = provider.backoff_seconds * static_cast<double>(1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
  }
  throw GatewayError(provider.endpoint + path + ": retries exhausted (" + last_reason + ")", last_status,
                     max_attempts);
}

std::string ModelGateway::remote_chat(const ProviderConfig& provider, const std::vector<ChatMessage>& messages) {
  json body = {{"model", provider.model_name}, {"temperature", provider.temperature}, {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  auto payload = body.dump();
  return cached(provider, payload, [&] {
    auto raw = remote_post(provider, "/v1/chat/completions", payload);
    try {
      return json::parse(raw).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw GatewayError(std::string("malformed chat completion payload: ") + e.what(), 200, 1);
    }
  });
}

const std::vector<ScriptEntry>& ModelGateway::script_for(const ProviderConfig& provider) {
  if (provider.script.empty()) throw Error(ErrorKind::Config, "scripted provider has no script file");
  std::lock_guard lock(script_mutex_);
  auto it = scripts_.find(provider.script);
  if (it == scripts_.end()) it = scripts_.emplace(provider.script, load_script(provider.script)).first;
  return it->second;
}

std::string ModelGateway::chat(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(ErrorKind::InvalidArgument, "chat: no messages");
  const auto& p = config_.chat;
  switch (p.kind) {
    case ProviderKind::Scripted:
      return script_reply(script_for(p), request);
    case ProviderKind::RemoteChat:
      return remote_chat(p, request.messages);
    default:
      throw Error(ErrorKind::Config, "chat provider cannot be of kind " + std::string(to_string(p.kind)));
  }
}

std::string ModelGateway::caption(FrameIndex frame, const VideoBundle& bundle) {
  check_frame(bundle, frame);
  const auto& p = config_.caption;
  switch (p.kind) {
    case ProviderKind::PrecomputedCaption: {
      auto it = bundle.captions.find(frame);
      if (it == bundle.captions.end()) {
        throw Error(ErrorKind::MissingCaption,
                    "no caption for frame " + std::to_string(frame) + " in bundle '" + bundle.video_id + "'");
      }
      return it->second;
    }
    case ProviderKind::Scripted: {
      ChatRequest req{{{"user", "caption " + frame_reference(bundle, frame)}}, 0};
      return script_reply(script_for(p), req);
    }
    case ProviderKind::RemoteChat: {
      std::string where = "Video '" + bundle.video_id + "', frame " + std::to_string(frame);
      if (bundle.fps && *bundle.fps > 0) {
        std::ostringstream t;
        t << " (t=" << frame / *bundle.fps << "s)";
        where += t.str();
      }
      std::vector<ChatMessage> messages = {
          {"system", "You write one-sentence factual captions of video frames."},
          {"user", where + ". Describe the entities visible and what they are doing. Reference: " +
                       frame_reference(bundle, frame)}};
      auto text = remote_chat(p, messages);
      auto b = text.find_first_not_of(" \t\r\n");
      auto e = text.find_last_not_of(" \t\r\n");
      return b == std::string::npos ? std::string{} : text.substr(b, e - b + 1);
    }
    default:
      throw Error(ErrorKind::Config, "caption provider cannot be of kind " + std::string(to_string(p.kind)));
  }
}

std::optional<Embedding> ModelGateway::embed(const EmbedInput& input, const VideoBundle* bundle) {
  const auto& p = config_.embed;
  const auto* frame = std::get_if<FrameIndex>(&input);
  if (frame && !bundle) throw Error(ErrorKind::InvalidArgument, "embed: frame input requires a bundle");
  if (frame) check_frame(*bundle, *frame);
  const std::string text = frame ? frame_reference(*bundle, *frame) : std::get<std::string>(input);

  std::optional<Embedding> out;
  switch (p.kind) {
    case ProviderKind::PrecomputedEmbed:
      if (frame) {
        if (auto it = bundle->embeddings.find(*frame); it != bundle->embeddings.end()) out = it->second;
      }
      return out;
    case ProviderKind::Scripted:
      out = pseudo_embedding(text, p.dimension, p.seed);
      break;
    case ProviderKind::RemoteEmbed: {
      json body = {{"model", p.model_name}, {"input", text}};
      auto payload = body.dump();
      auto stored = cached(p, payload, [&] {
        auto v = decode_embedding(remote_post(p, "/v1/embeddings", payload), 1);
        return json(v).dump();
      });
      out = json::parse(stored).get<Embedding>();
      break;
    }
    default:
      throw Error(ErrorKind::Config, "embed provider cannot be of kind " + std::string(to_string(p.kind)));
  }
  if (frame && bundle->embedding_dim != 0 && out->size() != bundle->embedding_dim) {
    throw Error(ErrorKind::Dimension, "embedding for frame " + std::to_string(*frame) + " has dimension " +
                                          std::to_string(out->size()) + ", bundle uses " +
                                          std::to_string(bundle->embedding_dim));
  }
  return out;
}

std::optional<std::vector<FrameIndex>> ModelGateway::captionable_frames(const VideoBundle& bundle) const {
  if (config_.caption.kind != ProviderKind::PrecomputedCaption) return std::nullopt;
  std::vector<FrameIndex> frames;
  frames.reserve(bundle.captions.size());
  for (const auto& [f, text] : bundle.captions) frames.push_back(f);
  return frames;
}

}  // namespace gva
