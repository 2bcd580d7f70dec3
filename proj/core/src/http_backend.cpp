#include "vrs/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <random>
#include <semaphore>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "nlohmann/json.hpp"

#include "vrs/errors.hpp"

namespace vrs {

namespace {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /v1/chat/completions
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("endpoint URL must include a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

struct HttpBackend::Impl {
    explicit Impl(BackendConfig cfg)
        : config(std::move(cfg)),
          url(split_url(config.endpoint_url)),
          gate(config.max_in_flight > 0 ? config.max_in_flight : 1) {}

    BackendConfig config;
    ParsedUrl url;
    std::counting_semaphore<> gate;

    std::string api_key() const {
        if (config.api_key_env.empty()) return {};
        const char* value = std::getenv(config.api_key_env.c_str());
        if (value == nullptr || *value == '\0') {
            throw AuthError("API key environment variable " + config.api_key_env +
                            " is not set");
        }
        return value;
    }
};

HttpBackend::HttpBackend(BackendConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::model_label() const { return impl_->config.model_name; }

const BackendConfig& HttpBackend::config() const { return impl_->config; }

std::string HttpBackend::complete(const PromptBundle& bundle) {
    const BackendConfig& cfg = impl_->config;
    const std::string key = impl_->api_key();

    // The request carries the model and a single user message, nothing
    // else: decoding stays at the provider defaults.
    nlohmann::json body{
        {"model", cfg.model_name},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", bundle.text}}})},
    };
    const std::string payload = body.dump();

    impl_->gate.acquire();
    struct Release {
        std::counting_semaphore<>& gate;
        ~Release() { gate.release(); }
    } release{impl_->gate};

    std::minstd_rand jitter_rng(std::random_device{}());
    std::string last_error = "no attempt made";
    int last_status = 0;

    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto base = cfg.backoff_base.count();
            const auto backoff = base << (attempt - 1);
            const auto jitter = base > 0 ? static_cast<long>(jitter_rng() % (base / 2 + 1)) : 0;
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff + jitter));
        }

        httplib::Client client(impl_->url.base);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(
            cfg.timeout));
        client.set_read_timeout(cfg.timeout);
        client.set_write_timeout(cfg.timeout);
        httplib::Headers headers;
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        auto result = client.Post(impl_->url.path, headers, payload, "application/json");
        if (!result) {
            last_error = "transport failure: " + httplib::to_string(result.error());
            last_status = 0;
            continue;
        }

        last_status = result->status;
        if (result->status == 401 || result->status == 403) {
            throw AuthError("endpoint rejected credentials with HTTP " +
                            std::to_string(result->status));
        }
        if (result->status == 429 || result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw MalformedApiResponse("unexpected HTTP " + std::to_string(result->status) +
                                       ": " + result->body.substr(0, 200));
        }

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::exception& err) {
            throw MalformedApiResponse(std::string("response body is not JSON: ") + err.what());
        }
        try {
            return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw MalformedApiResponse("response lacks choices[0].message.content");
        }
    }

    if (last_status == 429) {
        throw RateLimitedError("rate limited after " + std::to_string(cfg.max_retries) +
                               " retries");
    }
    throw TransportError("request failed after " + std::to_string(cfg.max_retries) +
                         " retries: " + last_error);
}

}  // namespace vrs
