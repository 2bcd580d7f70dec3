#pragma once

#include <stdexcept>
#include <string>

namespace vrs {

/// Base class for recoverable failures raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A model response did not conform to the expected output format.
/// Callers with a retry budget (the rejection engine, the experiment
/// runner) treat this as retryable; everything else propagates.
struct MalformedResponse : Error {
    using Error::Error;
};

/// Could not reach the endpoint (connect/read/write failure, timeout).
struct TransportError : Error {
    using Error::Error;
};

/// Endpoint rejected the credentials (HTTP 401/403).
struct AuthError : Error {
    using Error::Error;
};

/// Endpoint kept returning 429/5xx after the retry budget was spent.
struct RateLimitedError : Error {
    using Error::Error;
};

/// HTTP call succeeded but the body is not a usable chat completion.
struct MalformedApiResponse : Error {
    using Error::Error;
};

/// Replay-mode backend was asked for a prompt that was never recorded.
struct ReplayMiss : Error {
    ReplayMiss(std::string key_, std::string prompt_sha256_)
        : Error("replay miss for key " + key_ + " (prompt sha256 " + prompt_sha256_ + ")"),
          key(std::move(key_)),
          prompt_sha256(std::move(prompt_sha256_)) {}

    std::string key;
    std::string prompt_sha256;
};

}  // namespace vrs
