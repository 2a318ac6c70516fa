#include "medcorpus/genclient.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <thread>

#include <httplib.h>

#include "medcorpus/hashing.hpp"
#include "medcorpus/image_io.hpp"
#include "medcorpus/rng.hpp"

namespace medcorpus {
namespace fs = std::filesystem;
using namespace std::chrono;

// ---------------------------------------------------------------- config

void ClientConfig::validate() const {
  if (backend != "mock" && backend != "http") throw Error(ErrorCode::Config, "unknown backend '" + backend + "'");
  if (max_parallel < 1) throw Error(ErrorCode::Config, "max_parallel must be >= 1");
  if (requests_per_minute < 1) throw Error(ErrorCode::Config, "requests_per_minute must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::Config, "max_retries must be >= 0");
  if (!(timeout_seconds > 0)) throw Error(ErrorCode::Config, "timeout_seconds must be > 0");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error(ErrorCode::Config, "temperature must be in [0,2]");
  if (!(backoff_initial_seconds > 0) || !(backoff_multiplier > 1.0)) {
    throw Error(ErrorCode::Config, "backoff must start > 0 and grow by a multiplier > 1");
  }
}

nanoseconds ClientConfig::backoff(int attempt) const {
  const double s = backoff_initial_seconds * std::pow(backoff_multiplier, attempt - 1);
  return duration_cast<nanoseconds>(duration<double>(s));
}

ClientConfig ClientConfig::from_json(const json& j) {
  ClientConfig c;
  c.backend = j.value("backend", c.backend);
  c.endpoint_url = j.value("endpoint_url", c.endpoint_url);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.model_name = j.value("model_name", c.model_name);
  c.max_parallel = j.value("max_parallel", c.max_parallel);
  c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.temperature = j.value("temperature", c.temperature);
  c.backoff_initial_seconds = j.value("backoff_initial_seconds", c.backoff_initial_seconds);
  c.backoff_multiplier = j.value("backoff_multiplier", c.backoff_multiplier);
  c.validate();
  return c;
}

ordered_json ClientConfig::to_json() const {
  ordered_json j;
  j["backend"] = backend;
  j["endpoint_url"] = endpoint_url;
  j["api_key_env"] = api_key_env;
  j["model_name"] = model_name;
  j["max_parallel"] = max_parallel;
  j["requests_per_minute"] = requests_per_minute;
  j["max_retries"] = max_retries;
  j["timeout_seconds"] = timeout_seconds;
  j["temperature"] = temperature;
  j["backoff_initial_seconds"] = backoff_initial_seconds;
  j["backoff_multiplier"] = backoff_multiplier;
  return j;
}

std::string_view to_string(FinishReason r) noexcept {
  switch (r) {
    case FinishReason::ok: return "ok";
    case FinishReason::truncated: return "truncated";
    case FinishReason::refused: return "refused";
  }
  return "";
}

FinishReason parse_finish_reason(std::string_view s) {
  if (s == "ok") return FinishReason::ok;
  if (s == "truncated") return FinishReason::truncated;
  if (s == "refused") return FinishReason::refused;
  throw Error(ErrorCode::InvalidField, "finish_reason '" + std::string(s) + "'");
}

ordered_json GenerationResult::to_json() const {
  ordered_json j;
  j["request_id"] = request_id;
  j["text"] = text;
  j["backend"] = backend;
  j["latency_ms"] = latency_ms;
  j["attempt"] = attempt;
  j["finish_reason"] = to_string(finish_reason);
  return j;
}

GenerationResult GenerationResult::from_json(const json& j) {
  GenerationResult r;
  r.request_id = j.at("request_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.backend = j.value("backend", "");
  r.latency_ms = j.value("latency_ms", std::int64_t{0});
  r.attempt = j.value("attempt", 1);
  r.finish_reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
  return r;
}

// ---------------------------------------------------------------- clocks

SteadyClock& SteadyClock::instance() {
  static SteadyClock clock;
  return clock;
}

void SteadyClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

Clock::time_point VirtualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_until(time_point t) {
  std::lock_guard lock(mu_);
  if (t > now_) now_ = t;
}

void VirtualClock::advance(duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

SlidingWindowRateLimiter::SlidingWindowRateLimiter(int limit, Clock::duration window, Clock& clock)
    : limit_(limit), window_(window), clock_(clock) {
  if (limit < 1) throw Error(ErrorCode::Config, "rate limit must be >= 1");
}

Clock::time_point SlidingWindowRateLimiter::acquire() {
  // Holding the lock while waiting serializes admission in arrival order.
  std::lock_guard lock(mu_);
  for (;;) {
    const auto now = clock_.now();
    while (!sends_.empty() && sends_.front() <= now - window_) sends_.pop_front();
    if (static_cast<int>(sends_.size()) < limit_) {
      sends_.push_back(now);
      return now;
    }
    clock_.sleep_until(sends_.front() + window_);
  }
}

// ---------------------------------------------------------------- mock

std::string mock_generation_text(const std::string& request_id, const std::string& label,
                                 InstructionFormat format) {
  const std::string answer = "MOCK:" + sha256_hex(request_id).substr(0, 16) + " " + label;
  if (format == InstructionFormat::dialogue) {
    return "Q: What is the main finding in this image?\nA: " + answer +
           "\nQ: What should be examined next?\nA: " + answer;
  }
  return answer;
}

std::string mock_translation(std::string_view text) { return "ZH(" + std::string(text) + ")"; }

std::optional<std::string> strip_mock_translation(std::string_view text) {
  if (text.size() < 4 || text.substr(0, 3) != "ZH(" || text.back() != ')') return std::nullopt;
  return std::string(text.substr(3, text.size() - 4));
}

BackendReply MockBackend::complete(const BackendCall& call) {
  BackendReply r;
  r.status = BackendReply::Status::ok;
  r.text = call.kind == BackendCall::Kind::translate ? mock_translation(call.prompt)
                                                     : mock_generation_text(call.request_id, call.label, call.format);
  return r;
}

// ---------------------------------------------------------------- http

namespace {

std::string translation_prompt(std::string_view text) {
  return "Translate the following medical text into Simplified Chinese. Keep medical terminology precise "
         "and reply with the translation only.\n\n" +
         std::string(text);
}

}  // namespace

HttpBackend::HttpBackend(const ClientConfig& cfg, fs::path image_root)
    : cfg_(cfg), image_root_(std::move(image_root)) {
  if (cfg_.api_key_env.empty()) throw Error(ErrorCode::Config, "http backend needs api_key_env");
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (!key || !*key) throw Error(ErrorCode::Config, "environment variable " + cfg_.api_key_env + " is not set");
  api_key_ = key;

  const auto scheme_end = cfg_.endpoint_url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::Config, "endpoint_url needs a scheme: '" + cfg_.endpoint_url + "'");
  const auto path_start = cfg_.endpoint_url.find('/', scheme_end + 3);
  scheme_host_port_ = cfg_.endpoint_url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : cfg_.endpoint_url.substr(path_start);
}

json HttpBackend::build_payload(const BackendCall& call) const {
  json content = json::array();
  const std::string text = call.kind == BackendCall::Kind::translate ? translation_prompt(call.prompt) : call.prompt;
  content.push_back({{"type", "text"}, {"text", text}});
  if (call.kind == BackendCall::Kind::generate && call.image_ref) {
    const fs::path file = fs::path(*call.image_ref).is_absolute() ? fs::path(*call.image_ref) : image_root_ / *call.image_ref;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read image " + file.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:" + image_mime_type(file) + ";base64," + base64_encode(bytes)}}}});
  }
  json payload;
  payload["model"] = cfg_.model_name;
  payload["messages"] = json::array({{{"role", "user"}, {"content", content}}});
  payload["temperature"] = cfg_.temperature;
  return payload;
}

BackendReply HttpBackend::complete(const BackendCall& call) {
  BackendReply reply;
  const auto body = build_payload(call).dump();
  httplib::Client cli(scheme_host_port_);
  const auto t = duration<double>(cfg_.timeout_seconds);
  const auto secs = static_cast<time_t>(t.count());
  const auto usecs = static_cast<time_t>((t.count() - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

  const auto start = steady_clock::now();
  auto res = cli.Post(path_, headers, body, "application/json");
  reply.latency_ms = duration_cast<milliseconds>(steady_clock::now() - start).count();

  if (!res) {
    const auto err = res.error();
    reply.status = (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
                       ? BackendReply::Status::timeout
                       : BackendReply::Status::server_error;
    reply.detail = httplib::to_string(err);
    return reply;
  }
  if (res->status == 429) {
    reply.status = BackendReply::Status::rate_limited;
    reply.detail = "HTTP 429";
    return reply;
  }
  if (res->status >= 500) {
    reply.status = BackendReply::Status::server_error;
    reply.detail = "HTTP " + std::to_string(res->status);
    return reply;
  }
  if (res->status != 200) {
    reply.status = BackendReply::Status::client_error;
    reply.detail = "HTTP " + std::to_string(res->status);
    return reply;
  }
  try {
    const auto doc = json::parse(res->body);
    const auto& choice = doc.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    const std::string finish = choice.value("finish_reason", "stop");
    reply.text = content.is_string() ? content.get<std::string>() : std::string();
    if (finish == "content_filter" || (choice.at("message").contains("refusal") &&
                                       choice["message"]["refusal"].is_string())) {
      reply.status = BackendReply::Status::refused;
    } else if (finish == "length") {
      reply.status = BackendReply::Status::truncated;
    } else if (!content.is_string()) {
      reply.status = BackendReply::Status::malformed;
      reply.detail = "message content is not a string";
    } else {
      reply.status = BackendReply::Status::ok;
    }
  } catch (const json::exception& e) {
    reply.status = BackendReply::Status::malformed;
    reply.detail = e.what();
  }
  return reply;
}

std::unique_ptr<Backend> make_backend(const ClientConfig& cfg, const fs::path& image_root) {
  cfg.validate();
  if (cfg.backend == "http") return std::make_unique<HttpBackend>(cfg, image_root);
  return std::make_unique<MockBackend>();
}

// ---------------------------------------------------------------- client

GenerationClient::GenerationClient(ClientConfig cfg, std::unique_ptr<Backend> backend, Clock& clock)
    : cfg_(std::move(cfg)),
      backend_(std::move(backend)),
      clock_(clock),
      limiter_(cfg_.requests_per_minute, minutes(1), clock) {
  cfg_.validate();
  if (!backend_) throw Error(ErrorCode::Config, "no backend");
}

GenerationResult GenerationClient::call_with_retry(const BackendCall& call) {
  using Status = BackendReply::Status;
  for (int attempt = 1;; ++attempt) {
    const auto sent = limiter_.acquire();
    {
      std::lock_guard lock(log_mu_);
      send_log_.push_back(sent);
    }
    const BackendReply reply = backend_->complete(call);

    GenerationResult result;
    result.request_id = call.request_id;
    result.backend = backend_->name();
    result.latency_ms = reply.latency_ms;
    result.attempt = attempt;
    result.text = reply.text;
    switch (reply.status) {
      case Status::ok:
        if (reply.text.empty()) throw Error(ErrorCode::MalformedResponse, call.request_id + ": empty text");
        result.finish_reason = FinishReason::ok;
        return result;
      case Status::truncated:
        result.finish_reason = FinishReason::truncated;
        return result;
      case Status::refused:
        result.finish_reason = FinishReason::refused;
        return result;
      case Status::malformed:
        throw Error(ErrorCode::MalformedResponse, call.request_id + ": " + reply.detail);
      case Status::client_error:
        throw Error(ErrorCode::BackendUnavailable, call.request_id + ": " + reply.detail);
      case Status::rate_limited:
      case Status::server_error:
      case Status::timeout:
        if (attempt <= cfg_.max_retries) {
          clock_.sleep_for(duration_cast<Clock::duration>(cfg_.backoff(attempt)));
          continue;
        }
        if (reply.status == Status::rate_limited) throw Error(ErrorCode::RateLimited, call.request_id + ": retries exhausted");
        if (reply.status == Status::timeout) throw Error(ErrorCode::Timeout, call.request_id + ": " + reply.detail);
        throw Error(ErrorCode::BackendUnavailable, call.request_id + ": " + reply.detail);
    }
  }
}

GenerationResult GenerationClient::generate(const GenerationRequest& req) {
  BackendCall call;
  call.kind = BackendCall::Kind::generate;
  call.request_id = req.request_id;
  call.prompt = req.prompt_text;
  call.image_ref = req.image_ref;
  call.format = req.format;
  call.label = req.label;
  return call_with_retry(call);
}

GenerationResult GenerationClient::translate(const std::string& request_id, std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "translate: empty text");
  BackendCall call;
  call.kind = BackendCall::Kind::translate;
  call.request_id = request_id;
  call.prompt = std::string(text);
  auto result = call_with_retry(call);
  if (result.finish_reason == FinishReason::refused) throw Error(ErrorCode::BackendRefusal, request_id);
  return result;
}

std::vector<GenerationClient::Outcome> GenerationClient::generate_all(std::span<const GenerationRequest> reqs,
                                                                      const CompletionFn& on_complete) {
  std::vector<Outcome> outcomes(reqs.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= reqs.size()) return;
      Outcome out;
      try {
        out.result = generate(reqs[i]);
      } catch (const Error& e) {
        out.error = e;
      }
      outcomes[i] = out;
      if (on_complete) {
        std::lock_guard lock(callback_mu);
        on_complete(i, outcomes[i]);
      }
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg_.max_parallel), reqs.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return outcomes;
}

std::vector<Clock::time_point> GenerationClient::send_log() const {
  std::lock_guard lock(log_mu_);
  return send_log_;
}

std::vector<std::size_t> select_for_translation(std::size_t n, double fraction, std::uint64_t seed) {
  const auto k = round_half_up_fraction(n, fraction);
  SeededRng rng(seed);
  auto picked = rng.sample_indices(static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(k));
  std::vector<std::size_t> out(picked.begin(), picked.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace medcorpus
