// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rampforge {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Anything that turns a conversation into one text completion. Throws
/// ClientError when no completion can be produced.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(std::span<const ChatMessage> messages) = 0;
};

struct EndpointConfig {
  std::string base_url;                        // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  int timeout_seconds = 60;
  int max_retries = 2;
  double temperature = 0.0;
  std::string api_key_env;                     // env var holding a bearer token, optional
};

/// OpenAI-compatible chat completions endpoint. Sends
/// {"model","messages":[{"role","content"}...],"temperature"} and reads
/// choices[0].message.content. Transport errors and 5xx responses are retried
/// up to max_retries times.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(EndpointConfig config);
  std::string complete(std::span<const ChatMessage> messages) override;

  const EndpointConfig& config() const noexcept { return config_; }

 private:
  EndpointConfig config_;
};

/// Request body sent by HttpChatClient, exposed for adapters and tests.
std::string chat_request_body(const EndpointConfig& config, std::span<const ChatMessage> messages);

/// Pulls the completion text out of a provider response body.
std::string chat_response_text(std::string_view body);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Hex SHA-256 of the canonical JSON of `messages`; the replay-file key.
std::string message_hash(std::span<const ChatMessage> messages);

/// Answers from a replay file of {"input_hash","output"} JSONL lines.
/// Unknown inputs raise ClientError.
class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(const std::filesystem::path& replay_file);
  explicit ScriptedChatClient(std::unordered_map<std::string, std::string> replies);

  std::string complete(std::span<const ChatMessage> messages) override;

  std::size_t size() const noexcept { return replies_.size(); }

 private:
  std::unordered_map<std::string, std::string> replies_;
};

std::string replay_line(std::span<const ChatMessage> messages, std::string_view output);

/// Adapts a callable; the callable owns any thread-safety concerns.
class FunctionChatClient final : public ChatClient {
 public:
  using Fn = std::function<std::string(std::span<const ChatMessage>)>;
  explicit FunctionChatClient(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(std::span<const ChatMessage> messages) override { return fn_(messages); }

 private:
  Fn fn_;
};

/// Wraps another client and appends every exchange to a replay file, so a
/// live run can be replayed offline with ScriptedChatClient.
class RecordingChatClient final : public ChatClient {
 public:
  RecordingChatClient(ChatClient& inner, std::filesystem::path replay_file);
  std::string complete(std::span<const ChatMessage> messages) override;

 private:
  ChatClient& inner_;
  std::filesystem::path replay_file_;
  std::mutex mutex_;
};

}  // namespace rampforge
