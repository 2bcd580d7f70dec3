#include "vrs/replay.hpp"

#include <fstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

#include "vrs/errors.hpp"
#include "vrs/sha256.hpp"
#include "vrs/util.hpp"

namespace vrs {

ReplayCache::ReplayCache(CacheMode mode, std::filesystem::path file,
                         std::shared_ptr<TextBackend> inner,
                         std::optional<std::string> model_label_override)
    : mode_(mode), file_(std::move(file)), inner_(std::move(inner)) {
    if (model_label_override) {
        label_ = *model_label_override;
    } else if (inner_) {
        label_ = inner_->model_label();
    } else {
        throw std::invalid_argument("replay cache needs an inner backend or a model label");
    }
    if (mode_ != CacheMode::Replay && !inner_) {
        throw std::invalid_argument("record/passthrough cache modes need an inner backend");
    }
    if (mode_ != CacheMode::Passthrough) {
        load();
    }
    if (mode_ == CacheMode::Replay && entries_.empty()) {
        throw std::runtime_error("replay store " + file_.string() + " is missing or empty");
    }
}

void ReplayCache::load() {
    std::ifstream in(file_, std::ios::binary);
    if (!in) return;  // fine for Record: start a fresh store
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json entry;
        try {
            entry = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& err) {
            throw std::runtime_error("corrupt cache line " + std::to_string(line_no) + " in " +
                                     file_.string() + ": " + err.what());
        }
        const std::string key = entry.at("key").get<std::string>();
        if (!entries_.emplace(key, entry.at("response").get<std::string>()).second) {
            throw std::runtime_error("duplicate cache key " + key + " in " + file_.string());
        }
    }
}

std::string ReplayCache::make_key(std::string_view model, std::string_view prompt,
                                  std::int64_t index) {
    std::string material;
    material.reserve(model.size() + prompt.size() + 24);
    material.append(model);
    material.push_back('\0');
    material.append(prompt);
    material.push_back('\0');
    material.append(std::to_string(index));
    return sha256_hex(material);
}

void ReplayCache::append(const std::string& key, const std::string& prompt_sha,
                         std::int64_t index, const std::string& response) {
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to cache store " + file_.string());
    nlohmann::json entry{
        {"key", key},
        {"prompt_sha256", prompt_sha},
        {"index", index},
        {"response", response},
        {"recorded_at", iso8601_now()},
    };
    out << entry.dump() << '\n';
    if (!out) throw std::runtime_error("short append to cache store " + file_.string());
}

std::string ReplayCache::complete(const PromptBundle& bundle) {
    if (mode_ == CacheMode::Passthrough) {
        return inner_->complete(bundle);
    }

    std::string key;
    std::string prompt_sha = sha256_hex(bundle.text);
    std::int64_t index = 0;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        index = next_index_[label_ + ":" + prompt_sha]++;
        key = make_key(label_, bundle.text, index);
        const auto hit = entries_.find(key);
        if (hit != entries_.end()) {
            return hit->second;
        }
        if (mode_ == CacheMode::Replay) {
            throw ReplayMiss(key, prompt_sha);
        }
    }

    // Record mode, fresh key: one live call, then an immutable append.
    const std::string response = inner_->complete(bundle);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto inserted = entries_.emplace(key, response);
        if (!inserted.second) {
            throw std::runtime_error("cache key recorded twice: " + key);
        }
        append(key, prompt_sha, index, response);
    }
    return response;
}

}  // namespace vrs
