#include "vrs/prompts.hpp"

#include "vrs/errors.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace vrs {

namespace {

// ---------------------------------------------------------------------------
// Canonical template texts. The direct and VRS wordings (including the
// trailing space after "Explanations: " and the bare "Output:" in the
// direct format block vs "Output: " in the VRS one) are pinned and must
// not be edited casually: golden tests compare renders byte-for-byte.
// ---------------------------------------------------------------------------

const char* direct_description(Phrasing phrasing) {
    switch (phrasing) {
        case Phrasing::P1:
            return "Your task is to generate a sample from the set {0, 1}, "
                   "where the probability of 1 is {p}.";
        case Phrasing::P0:
            return "Your task is to generate a sample from the set {0, 1}, "
                   "where the probability of 0 is {one_minus_p}.";
        case Phrasing::P10:
            return "Your task is to generate a sample from the set {0, 1}, "
                   "where the probability of 1 is {p} and the probability of 0 is "
                   "{one_minus_p}.";
        case Phrasing::P01:
            return "Your task is to generate a sample from the set {0, 1}, "
                   "where the probability of 0 is {one_minus_p} and the probability of 1 is "
                   "{p}.";
    }
    throw std::logic_error("unreachable phrasing");
}

const char* vrs_target_description(Phrasing phrasing) {
    switch (phrasing) {
        case Phrasing::P1:
            return "When sampling from the set {0, 1} the probability of 1 is {p}.";
        case Phrasing::P0:
            return "When sampling from the set {0, 1} the probability of 0 is {one_minus_p}.";
        case Phrasing::P10:
            return "When sampling from the set {0, 1} the probability of 1 is {p} and the "
                   "probability of 0 is {one_minus_p}.";
        case Phrasing::P01:
            return "When sampling from the set {0, 1} the probability of 0 is {one_minus_p} "
                   "and the probability of 1 is {p}.";
    }
    throw std::logic_error("unreachable phrasing");
}

std::string direct_template(Phrasing phrasing, bool no_reasoning) {
    std::string text;
    text += "You are a sampler. You will come up with a sample based on the descriptions "
            "below.\n\n";
    text += "** Descriptions: **\n";
    text += direct_description(phrasing);
    text += "\n\nPlease give your output strictly in the following format:\n\n```\n";
    if (no_reasoning) {
        text += "Output:\n[Your output MUST be an integer in {0, 1}; answer directly without "
                "any analysis]\n";
    } else {
        text += "Explanations: \n";
        text += "[Your step-by-step analyses and results; {cot_sentence}You DO NOT have access "
                "to a computer or a random number generator]\n\n";
        text += "Output:\n[Your output MUST be an integer in {0, 1}]\n";
    }
    text += "```\n\nPlease ONLY reply according to this format, don't give me any other words.";
    return text;
}

std::string vrs_template(Phrasing phrasing, bool with_m_instruction) {
    std::string text;
    text += "You are a rejection sampler. Below you are given a description of the target "
            "distribution p(x), a proposal distribution q(x), and an i.i.d. sample from q(x). "
            "You need to decide whether or not to accept the sample.\n\n";
    if (with_m_instruction) {
        text += "To make your decision, you must first compute the constant "
                "M = max{p(1)/q(1), p(0)/q(0)} and then accept the sample x with probability "
                "p(x) / (M * q(x)).\n\n";
    }
    text += "** Target Distribution p(x): **\n";
    text += vrs_target_description(phrasing);
    text += "\n\n** Proposal Distribution q(x): **\n";
    text += "A Bernoulli distribution with probability of having 1 in the set of {0,1} "
            "being {q}";
    text += "\n\n** Sample from q(x): **\n{x}";
    text += "\n\nPlease give your output strictly in the following format:\n\n```\n";
    text += "Explanations: \n";
    text += "[Your step-by-step analyses and results; You DO NOT have access to a computer or "
            "a random number generator]\n\n";
    text += "Output: \n[Your output MUST be a letter in {T, F}]\n";
    text += "```\n\nPlease ONLY reply according to this format, don't give me any other words.";
    return text;
}

std::string recognition_template() {
    std::string text;
    text += "You are a statistician. Below you are given a dataset of i.i.d. binary samples "
            "and a candidate Bernoulli distribution. You need to decide whether the dataset "
            "was drawn from the candidate distribution.\n\n";
    text += "** Dataset: **\n{samples}";
    text += "\n\n** Candidate Distribution: **\n";
    text += "A Bernoulli distribution over the set {0, 1} where the probability of 1 is {p}.";
    text += "\n\nPlease give your output strictly in the following format:\n\n```\n";
    text += "Explanations: \n";
    text += "[Your step-by-step analyses and results; You DO NOT have access to a computer or "
            "a random number generator]\n\n";
    text += "Output: \n[Your output MUST be a word in {Yes, No}]\n";
    text += "```\n\nPlease ONLY reply according to this format, don't give me any other words.";
    return text;
}

std::string template_name_direct(Phrasing phrasing, bool no_reasoning) {
    std::string name = "direct_";
    if (no_reasoning) name += "noreasoning_";
    std::string ph(phrasing_name(phrasing));
    for (char& ch : ph) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return name + ph;
}

std::string template_name_vrs(Phrasing phrasing, VrsVariant variant) {
    std::string name = variant == VrsVariant::WithMInstruction ? "vrs_m_" : "vrs_";
    std::string ph(phrasing_name(phrasing));
    for (char& ch : ph) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return name + ph;
}

void replace_all(std::string& text, std::string_view slot, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(slot, pos)) != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos += value.size();
    }
}

std::string ascii_lower(std::string_view text) {
    std::string out(text);
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

// Tail of the response after the final "Output:" marker (any case),
// with code fences removed and whitespace trimmed. Parsers demand the
// remainder be exactly the expected token.
std::optional<std::string> final_answer_token(std::string_view text) {
    const std::string lowered = ascii_lower(text);
    const std::size_t pos = lowered.rfind("output:");
    if (pos == std::string::npos) return std::nullopt;
    std::string tail(text.substr(pos + 7));
    replace_all(tail, "```", "");
    replace_all(tail, "'''", "");
    const auto is_space = [](char ch) {
        return std::isspace(static_cast<unsigned char>(ch)) != 0;
    };
    std::size_t begin = 0;
    while (begin < tail.size() && is_space(tail[begin])) ++begin;
    std::size_t end = tail.size();
    while (end > begin && is_space(tail[end - 1])) --end;
    return tail.substr(begin, end - begin);
}

}  // namespace

std::string_view phrasing_name(Phrasing phrasing) {
    switch (phrasing) {
        case Phrasing::P1: return "P1";
        case Phrasing::P0: return "P0";
        case Phrasing::P10: return "P10";
        case Phrasing::P01: return "P01";
    }
    throw std::logic_error("unreachable phrasing");
}

Phrasing phrasing_from_name(std::string_view name) {
    if (name == "P1") return Phrasing::P1;
    if (name == "P0") return Phrasing::P0;
    if (name == "P10") return Phrasing::P10;
    if (name == "P01") return Phrasing::P01;
    throw std::invalid_argument("unknown phrasing: " + std::string(name));
}

CotDirective CotDirective::exact_words(int n) {
    if (n < 1 || n > 500) {
        throw std::invalid_argument("CoT word count must lie in [1, 500]");
    }
    return {Mode::ExactWords, n};
}

std::string CotDirective::tag() const {
    switch (mode) {
        case Mode::Auto: return "auto";
        case Mode::ExactWords: return "words:" + std::to_string(words);
        case Mode::NoReasoning: return "none";
    }
    throw std::logic_error("unreachable cot mode");
}

const PromptTemplates& PromptTemplates::defaults() {
    static const PromptTemplates instance = [] {
        PromptTemplates t;
        for (Phrasing ph : {Phrasing::P1, Phrasing::P0, Phrasing::P10, Phrasing::P01}) {
            t.templates_[template_name_direct(ph, false)] = direct_template(ph, false);
            t.templates_[template_name_direct(ph, true)] = direct_template(ph, true);
            t.templates_[template_name_vrs(ph, VrsVariant::Standard)] = vrs_template(ph, false);
            t.templates_[template_name_vrs(ph, VrsVariant::WithMInstruction)] =
                vrs_template(ph, true);
        }
        t.templates_["recognition"] = recognition_template();
        return t;
    }();
    return instance;
}

PromptTemplates PromptTemplates::load_dir(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    for (auto& [name, text] : t.templates_) {
        const std::filesystem::path file = dir / (name + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read template file " + file.string());
        std::ostringstream buffer;
        buffer << in.rdbuf();
        text = buffer.str();
    }
    return t;
}

const std::string& PromptTemplates::get(const std::string& name) const {
    const auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw std::invalid_argument("unknown prompt template: " + name);
    }
    return it->second;
}

std::string format_probability(double p) {
    (void)Probability(p);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", p);
    std::string s(buf);
    // "0.50" -> "0.5", "0.00" -> "0.0"; "0.75" is untouched.
    if (s.size() > 2 && s.back() == '0' && s[s.size() - 2] != '.') {
        s.pop_back();
    }
    return s;
}

PromptBundle render_direct_prompt(Probability p, Phrasing phrasing, CotDirective cot,
                                  const PromptTemplates& templates) {
    const bool no_reasoning = cot.mode == CotDirective::Mode::NoReasoning;
    std::string text = templates.get(template_name_direct(phrasing, no_reasoning));

    std::string cot_sentence;
    if (cot.mode == CotDirective::Mode::ExactWords) {
        cot_sentence = "Your analysis must have around " + std::to_string(cot.words) +
                       " words; ";
    }
    replace_all(text, "{cot_sentence}", cot_sentence);
    replace_all(text, "{one_minus_p}", format_probability(1.0 - p.value()));
    replace_all(text, "{p}", format_probability(p.value()));

    PromptBundle bundle;
    bundle.text = std::move(text);
    bundle.expected_parse = ParseKind::Binary01;
    bundle.meta.kind = ParseKind::Binary01;
    bundle.meta.p = p.value();
    bundle.meta.phrasing = phrasing;
    bundle.meta.variant = "direct:cot=" + cot.tag();
    return bundle;
}

PromptBundle render_vrs_prompt(const ProposalPair& pair, int x, VrsVariant variant,
                               Phrasing target_phrasing, const PromptTemplates& templates) {
    if (x != 0 && x != 1) {
        throw std::invalid_argument("proposed sample must be 0 or 1");
    }
    std::string text = templates.get(template_name_vrs(target_phrasing, variant));
    replace_all(text, "{one_minus_p}", format_probability(1.0 - pair.p()));
    replace_all(text, "{p}", format_probability(pair.p()));
    replace_all(text, "{q}", format_probability(pair.q()));
    replace_all(text, "{x}", std::to_string(x));

    PromptBundle bundle;
    bundle.text = std::move(text);
    bundle.expected_parse = ParseKind::AcceptTF;
    bundle.meta.kind = ParseKind::AcceptTF;
    bundle.meta.p = pair.p();
    bundle.meta.q = pair.q();
    bundle.meta.x = x;
    bundle.meta.phrasing = target_phrasing;
    bundle.meta.variant = variant == VrsVariant::WithMInstruction ? "vrs-m" : "vrs";
    return bundle;
}

PromptBundle render_recognition_prompt(std::span<const std::uint8_t> samples, Probability p_hyp,
                                       const PromptTemplates& templates) {
    if (samples.empty()) {
        throw std::invalid_argument("recognition prompt needs at least one sample");
    }
    std::string joined;
    std::int64_t ones = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i] != 0 && samples[i] != 1) {
            throw std::invalid_argument("recognition samples must be 0 or 1");
        }
        if (i > 0) joined += ", ";
        joined += samples[i] ? '1' : '0';
        ones += samples[i];
    }

    std::string text = templates.get("recognition");
    replace_all(text, "{samples}", joined);
    replace_all(text, "{p}", format_probability(p_hyp.value()));

    PromptBundle bundle;
    bundle.text = std::move(text);
    bundle.expected_parse = ParseKind::YesNo;
    bundle.meta.kind = ParseKind::YesNo;
    bundle.meta.p = p_hyp.value();
    bundle.meta.ones = ones;
    bundle.meta.n_samples = static_cast<std::int64_t>(samples.size());
    bundle.meta.variant = "recognition";
    return bundle;
}

int parse_binary_sample(std::string_view text) {
    const auto token = final_answer_token(text);
    if (!token) throw MalformedResponse("no \"Output:\" marker in response");
    if (*token == "0") return 0;
    if (*token == "1") return 1;
    throw MalformedResponse("expected a bare 0 or 1 after \"Output:\", got \"" + *token + "\"");
}

Decision parse_accept_decision(std::string_view text) {
    const auto token = final_answer_token(text);
    if (!token) throw MalformedResponse("no \"Output:\" marker in response");
    if (*token == "T") return Decision::Accept;
    if (*token == "F") return Decision::Reject;
    throw MalformedResponse("expected a bare T or F after \"Output:\", got \"" + *token + "\"");
}

YesNo parse_yes_no(std::string_view text) {
    const auto token = final_answer_token(text);
    if (!token) throw MalformedResponse("no \"Output:\" marker in response");
    const std::string lowered = ascii_lower(*token);
    if (lowered == "yes") return YesNo::Yes;
    if (lowered == "no") return YesNo::No;
    throw MalformedResponse("expected Yes or No after \"Output:\", got \"" + *token + "\"");
}

std::string conforming_response(ParseKind kind, std::string_view value) {
    (void)kind;
    return "Output:\n" + std::string(value);
}

}  // namespace vrs
