#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "vrs/backend.hpp"

namespace vrs {

enum class CacheMode { Record, Replay, Passthrough };

/// Append-only prompt/response store wrapped around another backend.
///
/// Keys digest (model label, prompt text, occurrence index), so the
/// k-th issue of an identical prompt maps to its own entry -- i.i.d.
/// queries never collapse to one cached answer. Entries are immutable:
/// Record serves an already-present key from the store instead of
/// re-recording it, and a store containing duplicate keys is rejected
/// at load time.
class ReplayCache final : public TextBackend {
public:
    /// Record and Passthrough require `inner`. Replay never touches the
    /// network; it may omit `inner` by supplying `model_label_override`.
    ReplayCache(CacheMode mode, std::filesystem::path file, std::shared_ptr<TextBackend> inner,
                std::optional<std::string> model_label_override = std::nullopt);

    std::string complete(const PromptBundle& bundle) override;
    std::string model_label() const override { return label_; }

    CacheMode mode() const { return mode_; }
    std::size_t size() const { return entries_.size(); }

    static std::string make_key(std::string_view model, std::string_view prompt,
                                std::int64_t index);

private:
    void load();
    void append(const std::string& key, const std::string& prompt_sha,
                std::int64_t index, const std::string& response);

    CacheMode mode_;
    std::filesystem::path file_;
    std::shared_ptr<TextBackend> inner_;
    std::string label_;
    std::unordered_map<std::string, std::string> entries_;
    std::unordered_map<std::string, std::int64_t> next_index_;
    std::mutex mutex_;
};

}  // namespace vrs
