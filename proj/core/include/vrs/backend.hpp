#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "vrs/prompts.hpp"

namespace vrs {

/// Connection settings for a chat-completions endpoint. There are
/// deliberately no decoding parameters here: requests never carry
/// temperature, top-k or the like, so the provider defaults apply.
struct BackendConfig {
    std::string endpoint_url;  // full URL of the chat-completions route
    std::string model_name;
    std::string api_key_env;   // environment variable holding the key; may be empty
    std::chrono::milliseconds timeout{60'000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{1'000};  // doubled per retry, plus jitter
    int max_in_flight = 8;
};

/// A text-completion source: one prompt in, one assistant message out.
class TextBackend {
public:
    virtual ~TextBackend() = default;

    virtual std::string complete(const PromptBundle& bundle) = 0;

    /// Stable label identifying the underlying model, used in cache keys.
    virtual std::string model_label() const = 0;
};

/// Chat-completions HTTP client with exponential-backoff retries on
/// transport errors and 429/5xx responses.
class HttpBackend final : public TextBackend {
public:
    explicit HttpBackend(BackendConfig config);
    ~HttpBackend() override;

    std::string complete(const PromptBundle& bundle) override;
    std::string model_label() const override;

    const BackendConfig& config() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vrs
