#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"
#include "medcorpus/error.hpp"
#include "medcorpus/promptgen.hpp"

namespace medcorpus {

struct ClientConfig {
  std::string backend = "mock";  // "mock" or "http"
  std::string endpoint_url;
  std::string api_key_env;  // name of the env var holding the bearer token, never the token
  std::string model_name;
  int max_parallel = 4;
  int requests_per_minute = 60;
  int max_retries = 3;
  double timeout_seconds = 60.0;
  double temperature = 0.7;
  double backoff_initial_seconds = 1.0;
  double backoff_multiplier = 2.0;

  void validate() const;
  /// Delay before retry number `attempt` (1-based); strictly increasing.
  std::chrono::nanoseconds backoff(int attempt) const;

  static ClientConfig from_json(const json& j);
  ordered_json to_json() const;
};

enum class FinishReason { ok, truncated, refused };
std::string_view to_string(FinishReason r) noexcept;
FinishReason parse_finish_reason(std::string_view s);

struct GenerationResult {
  std::string request_id;
  std::string text;
  std::string backend;
  std::int64_t latency_ms = 0;
  int attempt = 1;
  FinishReason finish_reason = FinishReason::ok;

  ordered_json to_json() const;
  static GenerationResult from_json(const json& j);
};

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  using duration = std::chrono::steady_clock::duration;

  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point t) = 0;
  void sleep_for(duration d) { sleep_until(now() + d); }
};

class SteadyClock final : public Clock {
 public:
  static SteadyClock& instance();
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_until(time_point t) override;
};

/// Simulated time: sleeping advances the clock instantly.
class VirtualClock final : public Clock {
 public:
  time_point now() override;
  void sleep_until(time_point t) override;
  void advance(duration d);

 private:
  std::mutex mu_;
  time_point now_{};
};

/// Admits at most `limit` acquisitions in any window of length `window`
/// (exact sliding log, no burst allowance beyond the limit).
class SlidingWindowRateLimiter {
 public:
  SlidingWindowRateLimiter(int limit, Clock::duration window, Clock& clock);

  /// Blocks until a send is allowed; returns the admitted send time.
  Clock::time_point acquire();

 private:
  int limit_;
  Clock::duration window_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> sends_;
};

struct BackendCall {
  enum class Kind { generate, translate };
  Kind kind = Kind::generate;
  std::string request_id;
  std::string prompt;
  std::optional<std::string> image_ref;
  InstructionFormat format = InstructionFormat::image_caption;
  std::string label;
};

struct BackendReply {
  enum class Status { ok, truncated, refused, rate_limited, server_error, timeout, malformed, client_error };
  Status status = Status::ok;
  std::string text;
  std::string detail;
  std::int64_t latency_ms = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual BackendReply complete(const BackendCall& call) = 0;
};

/// Deterministic offline backend:
///   generate  -> "MOCK:" + first 16 hex of SHA-256(request_id) + " " + label
///                (dialogue requests wrap that answer in two Q:/A: pairs)
///   translate -> "ZH(" + text + ")"
class MockBackend final : public Backend {
 public:
  std::string name() const override { return "mock"; }
  BackendReply complete(const BackendCall& call) override;
};

std::string mock_generation_text(const std::string& request_id, const std::string& label,
                                 InstructionFormat format);
std::string mock_translation(std::string_view text);
/// Inverse of mock_translation; nullopt when `text` is not in marker form.
std::optional<std::string> strip_mock_translation(std::string_view text);

/// Chat-completion style JSON over HTTP(S). Images are attached as base64
/// data URLs read from `image_root / image_ref`.
class HttpBackend final : public Backend {
 public:
  /// Throws Config when the API key env var is unset or the URL is invalid.
  HttpBackend(const ClientConfig& cfg, std::filesystem::path image_root);
  std::string name() const override { return "http:" + cfg_.model_name; }
  BackendReply complete(const BackendCall& call) override;

  /// Request body for `call` (exposed for wire-format tests).
  json build_payload(const BackendCall& call) const;

 private:
  ClientConfig cfg_;
  std::filesystem::path image_root_;
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

std::unique_ptr<Backend> make_backend(const ClientConfig& cfg, const std::filesystem::path& image_root);

/// Shared by all callers: one rate limiter, bounded parallelism, retries
/// with exponential backoff on transient failures.
class GenerationClient {
 public:
  GenerationClient(ClientConfig cfg, std::unique_ptr<Backend> backend, Clock& clock = SteadyClock::instance());

  GenerationResult generate(const GenerationRequest& req);
  GenerationResult translate(const std::string& request_id, std::string_view text);

  struct Outcome {
    std::optional<GenerationResult> result;
    std::optional<Error> error;
  };
  using CompletionFn = std::function<void(std::size_t index, const Outcome&)>;

  /// Runs up to max_parallel requests concurrently. Outcomes are returned
  /// in submission order; `on_complete` fires in completion order,
  /// serialized.
  std::vector<Outcome> generate_all(std::span<const GenerationRequest> reqs, const CompletionFn& on_complete = {});

  std::vector<Clock::time_point> send_log() const;
  const ClientConfig& config() const noexcept { return cfg_; }

 private:
  GenerationResult call_with_retry(const BackendCall& call);

  ClientConfig cfg_;
  std::unique_ptr<Backend> backend_;
  Clock& clock_;
  SlidingWindowRateLimiter limiter_;
  mutable std::mutex log_mu_;
  std::vector<Clock::time_point> send_log_;
};

/// Exactly round_half_up(n * fraction) distinct indices in [0, n), sorted,
/// chosen by seeded sampling without replacement.
std::vector<std::size_t> select_for_translation(std::size_t n, double fraction, std::uint64_t seed);

}  // namespace medcorpus
