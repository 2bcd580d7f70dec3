#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "vrs/bernoulli.hpp"

namespace vrs {

/// How a Bernoulli target is described to the model. P1 states only the
/// probability of 1, P0 only of 0, P10 and P01 state both (1-first and
/// 0-first respectively).
enum class Phrasing { P1, P0, P10, P01 };

std::string_view phrasing_name(Phrasing phrasing);
Phrasing phrasing_from_name(std::string_view name);

/// Reasoning-length directive for sampling prompts. ExactWords injects
/// "Your analysis must have around N words" into the Explanations
/// instruction; NoReasoning drops the Explanations block and asks for a
/// direct answer.
struct CotDirective {
    enum class Mode { Auto, ExactWords, NoReasoning };

    Mode mode = Mode::Auto;
    int words = 0;

    static CotDirective auto_mode() { return {Mode::Auto, 0}; }
    static CotDirective exact_words(int n);
    static CotDirective no_reasoning() { return {Mode::NoReasoning, 0}; }

    std::string tag() const;  // "auto", "words:100", "none"
};

enum class VrsVariant { Standard, WithMInstruction };

enum class ParseKind { Binary01, AcceptTF, YesNo };

enum class Decision { Accept, Reject };

enum class YesNo { Yes, No };

/// Provenance carried with a rendered prompt so offline backends can
/// answer without re-parsing the text, and so the runner can log and
/// seed each query deterministically.
struct BundleMeta {
    ParseKind kind = ParseKind::Binary01;
    double p = -1.0;     // target parameter (possibly derived)
    double q = -1.0;     // proposal parameter, when applicable
    int x = -1;          // proposed sample, when applicable
    Phrasing phrasing = Phrasing::P1;
    std::string variant;            // runner-facing discriminator
    std::int64_t ones = -1;         // recognition: dataset one-count
    std::int64_t n_samples = -1;    // recognition: dataset size
    std::optional<std::uint64_t> query_seed;
    int attempt = 0;
};

/// A rendered prompt plus its parse contract and provenance.
struct PromptBundle {
    std::string text;
    ParseKind expected_parse = ParseKind::Binary01;
    BundleMeta meta;
};

/// The prompt wordings, keyed by template name (direct_p1, vrs_m_p01,
/// recognition, ...). Defaults are the pinned canonical texts; a
/// directory of <name>.txt files can override any of them. Slots:
/// {p}, {one_minus_p}, {q}, {x}, {cot_sentence}, {samples}.
class PromptTemplates {
public:
    static const PromptTemplates& defaults();

    /// Defaults overlaid with any <name>.txt found under `dir`.
    static PromptTemplates load_dir(const std::filesystem::path& dir);

    const std::string& get(const std::string& name) const;
    const std::map<std::string, std::string>& all() const { return templates_; }

private:
    std::map<std::string, std::string> templates_;
};

/// Canonical probability formatting for prompt text: two decimals with
/// a single trailing zero stripped ("0.75", "0.5", "0.0").
std::string format_probability(double p);

PromptBundle render_direct_prompt(Probability p, Phrasing phrasing, CotDirective cot,
                                  const PromptTemplates& templates = PromptTemplates::defaults());

PromptBundle render_vrs_prompt(const ProposalPair& pair, int x, VrsVariant variant,
                               Phrasing target_phrasing,
                               const PromptTemplates& templates = PromptTemplates::defaults());

PromptBundle render_recognition_prompt(std::span<const std::uint8_t> samples, Probability p_hyp,
                                       const PromptTemplates& templates =
                                           PromptTemplates::defaults());

/// Extract the integer after the final "Output:" marker. Tolerates
/// whitespace, newlines and code fences; anything else is malformed.
int parse_binary_sample(std::string_view text);

/// Final-"Output:"-anchored single letter: T accepts, F rejects.
/// Case-sensitive on the letter.
Decision parse_accept_decision(std::string_view text);

/// Final-answer-anchored Yes/No, case-insensitive.
YesNo parse_yes_no(std::string_view text);

/// Minimal response conforming to a bundle's output contract, e.g.
/// "Output:\n1". Used by the simulated backend and the duality tests.
std::string conforming_response(ParseKind kind, std::string_view value);

}  // namespace vrs
