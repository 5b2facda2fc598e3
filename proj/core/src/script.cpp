// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <sstream>

#include "gva/error.hpp"
#include "gva/model_gateway.hpp"

namespace gva {

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

[[noreturn]] void script_error(int line_no, const std::string& what) {
  throw Error(ErrorKind::Config, "script line " + std::to_string(line_no) + ": " + what);
}

ScriptEntry parse_header(std::string_view header, int line_no) {
  ScriptEntry entry;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < header.size() && (header[i] == ' ' || header[i] == '\t')) ++i;
  };
  auto word = [&] {
    skip_ws();
    auto start = i;
    while (i < header.size() && header[i] != ' ' && header[i] != '\t') ++i;
    return header.substr(start, i - start);
  };
  bool saw_default = false;
  while (true) {
    auto w = word();
    if (w.empty()) break;
    if (w == "default") {
      saw_default = true;
    } else if (w == "round") {
      auto n = word();
      try {
        std::size_t used = 0;
        int r = std::stoi(std::string(n), &used);
        if (used != n.size() || r < 1) throw std::invalid_argument("round");
        entry.round = r;
      } catch (const std::exception&) {
        script_error(line_no, "expected a positive round number after 'round'");
      }
    } else if (w == "contains") {
      int count = 0;
      while (true) {
        skip_ws();
        if (i >= header.size() || header[i] != '"') break;
        ++i;
        std::string needle;
        bool closed = false;
        while (i < header.size()) {
          char c = header[i++];
          if (c == '\\' && i < header.size()) {
            needle.push_back(header[i++]);
          } else if (c == '"') {
            closed = true;
            break;
          } else {
            needle.push_back(c);
          }
        }
        if (!closed) script_error(line_no, "unterminated string");
        entry.contains.push_back(std::move(needle));
        ++count;
      }
      if (count == 0) script_error(line_no, "'contains' needs at least one quoted string");
    } else {
      script_error(line_no, "unknown condition '" + std::string(w) + "'");
    }
  }
  if (saw_default && !entry.is_catch_all()) script_error(line_no, "'default' cannot carry conditions");
  if (!saw_default && entry.is_catch_all()) script_error(line_no, "empty header; use '== default'");
  return entry;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

bool ScriptEntry::matches(const ChatRequest& request) const {
  if (round && *round != request.round) return false;
  if (contains.empty()) return true;
  std::string all;
  for (const auto& m : request.messages) {
    all += m.content;
    all += '\n';
  }
  for (const auto& needle : contains) {
    if (all.find(needle) == std::string::npos) return false;
  }
  return true;
}

std::vector<ScriptEntry> parse_script(std::string_view text) {
  std::vector<ScriptEntry> entries;
  std::vector<std::string> body;
  auto flush = [&] {
    if (entries.empty()) return;
    while (!body.empty() && trim(body.back()).empty()) body.pop_back();
    std::string reply;
    for (std::size_t i = 0; i < body.size(); ++i) reply += (i ? "\n" : "") + body[i];
    entries.back().reply = std::move(reply);
    body.clear();
  };

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("==", 0) == 0) {
      flush();
      entries.push_back(parse_header(std::string_view(line).substr(2), line_no));
      continue;
    }
    if (entries.empty()) {
      auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      script_error(line_no, "text before the first '==' header");
    }
    body.push_back(line);
  }
  flush();
  if (entries.empty() || !entries.back().is_catch_all()) {
    throw Error(ErrorKind::Config, "script must end with a '== default' catch-all entry");
  }
  return entries;
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot open script " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_script(ss.str());
}

const std::string& script_reply(const std::vector<ScriptEntry>& script, const ChatRequest& request) {
  for (const auto& entry : script) {
    if (entry.matches(request)) return entry.reply;
  }
  throw Error(ErrorKind::Config, "script has no matching entry");
}

Embedding pseudo_embedding(std::string_view input, std::size_t dimension, std::uint64_t seed) {
  if (dimension == 0) throw Error(ErrorKind::Config, "scripted embedding dimension must be positive");
  std::string seed_bytes = std::to_string(seed) + ":";
  std::uint64_t state = fnv1a(input, fnv1a(seed_bytes));
  Embedding v(dimension);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace gva
