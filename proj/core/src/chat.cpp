// SPDX-License-Identifier: Apache-2.0
#include "rampforge/chat.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "rampforge/error.hpp"
#include "text_util.hpp"

namespace rampforge {

namespace {

nlohmann::ordered_json messages_json(std::span<const ChatMessage> messages) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    nlohmann::ordered_json o;
    o["role"] = m.role;
    o["content"] = m.content;
    arr.push_back(std::move(o));
  }
  return arr;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0x0f];
  }
  return out;
}

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw InvalidArgument("chat endpoint base_url is empty");
  if (config_.max_retries < 0) throw InvalidArgument("max_retries must be non-negative");
}

std::string chat_request_body(const EndpointConfig& config, std::span<const ChatMessage> messages) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  body["messages"] = messages_json(messages);
  body["temperature"] = config.temperature;
  return dump_compact(body);
}

std::string chat_response_text(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    if (auto choices = j.find("choices"); choices != j.end() && !choices->empty()) {
      const auto& first = choices->at(0);
      if (auto msg = first.find("message"); msg != first.end()) {
        return msg->at("content").get<std::string>();
      }
      return first.at("text").get<std::string>();
    }
    // Ollama-style {"message":{"content":...}}
    if (auto msg = j.find("message"); msg != j.end()) return msg->at("content").get<std::string>();
    throw ClientError("chat response has no completion text");
  } catch (const nlohmann::json::exception& e) {
    throw ClientError(std::string("malformed chat response: ") + e.what());
  }
}

std::string HttpChatClient::complete(std::span<const ChatMessage> messages) {
  const auto body = chat_request_body(config_, messages);
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    client.set_write_timeout(config_.timeout_seconds);
    auto res = client.Post(config_.path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ClientError("chat endpoint answered HTTP " + std::to_string(res->status) + ": " +
                        res->body.substr(0, 200));
    }
    return chat_response_text(res->body);
  }
  throw ClientError("chat endpoint " + config_.base_url + config_.path + " failed after " +
                    std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

std::string message_hash(std::span<const ChatMessage> messages) {
  return sha256_hex(dump_compact(messages_json(messages)));
}

std::string replay_line(std::span<const ChatMessage> messages, std::string_view output) {
  nlohmann::ordered_json j;
  j["input_hash"] = message_hash(messages);
  j["output"] = output;
  return dump_compact(j);
}

ScriptedChatClient::ScriptedChatClient(const std::filesystem::path& replay_file) {
  std::ifstream in(replay_file, std::ios::binary);
  if (!in) throw InputError("cannot open replay file " + replay_file.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      replies_[j.at("input_hash").get<std::string>()] = j.at("output").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("invalid replay entry: ") + e.what(), line_no);
    }
  }
}

ScriptedChatClient::ScriptedChatClient(std::unordered_map<std::string, std::string> replies)
    : replies_(std::move(replies)) {}

std::string ScriptedChatClient::complete(std::span<const ChatMessage> messages) {
  const auto key = message_hash(messages);
  auto it = replies_.find(key);
  if (it == replies_.end()) throw ClientError("no scripted reply for input " + key);
  return it->second;
}

RecordingChatClient::RecordingChatClient(ChatClient& inner, std::filesystem::path replay_file)
    : inner_(inner), replay_file_(std::move(replay_file)) {}

std::string RecordingChatClient::complete(std::span<const ChatMessage> messages) {
  auto output = inner_.complete(messages);
  std::lock_guard lock(mutex_);
  std::ofstream out(replay_file_, std::ios::binary | std::ios::app);
  out << replay_line(messages, output) << '\n';
  return output;
}

}  // namespace rampforge
