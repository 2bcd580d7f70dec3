#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "vrs/errors.hpp"
#include "vrs/prompts.hpp"

using namespace vrs;

namespace {

std::filesystem::path golden_dir() {
    if (const char* env = std::getenv("VRS_GOLDEN_DIR")) return env;
    return std::filesystem::path(VRS_SOURCE_DIR) / "tests" / "golden";
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(bool(in), "missing file: " << path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

constexpr std::initializer_list<Phrasing> kAllPhrasings{Phrasing::P1, Phrasing::P0,
                                                        Phrasing::P10, Phrasing::P01};

}  // namespace

TEST_CASE("probability formatting follows the two-decimal stripped style") {
    CHECK(format_probability(0.75) == "0.75");
    CHECK(format_probability(0.5) == "0.5");
    CHECK(format_probability(0.0) == "0.0");
    CHECK(format_probability(1.0) == "1.0");
    CHECK(format_probability(0.01) == "0.01");
    CHECK(format_probability(0.1) == "0.1");
    CHECK(format_probability(0.33) == "0.33");
}

TEST_CASE("grid probabilities round-trip through format and parse exactly") {
    for (int i = 0; i <= 100; ++i) {
        const double p = i / 100.0;
        const std::string s = format_probability(p);
        CHECK(s.size() <= 4);
        CHECK(std::strtod(s.c_str(), nullptr) == p);
    }
}

TEST_CASE("direct prompt at the worked parameters matches the golden bytes") {
    const PromptBundle bundle =
        render_direct_prompt(Probability(0.75), Phrasing::P1, CotDirective::auto_mode());
    CHECK(bundle.text == read_file(golden_dir() / "direct_p1_auto_p075.txt"));
    CHECK(bundle.expected_parse == ParseKind::Binary01);
    CHECK(bundle.text.find("the probability of 1 is 0.75.") != std::string::npos);
    const std::string closing =
        "Please ONLY reply according to this format, don't give me any other words.";
    CHECK(bundle.text.rfind(closing) == bundle.text.size() - closing.size());
}

TEST_CASE("direct prompt at p = 0 renders the one-decimal description") {
    const PromptBundle bundle =
        render_direct_prompt(Probability(0.0), Phrasing::P1, CotDirective::auto_mode());
    CHECK(bundle.text.find("Your task is to generate a sample from the set {0, 1}, where the "
                           "probability of 1 is 0.0.") != std::string::npos);
}

TEST_CASE("exact-words directive inserts only the length sentence") {
    const PromptBundle auto_bundle =
        render_direct_prompt(Probability(0.75), Phrasing::P1, CotDirective::auto_mode());
    const PromptBundle words_bundle =
        render_direct_prompt(Probability(0.75), Phrasing::P1, CotDirective::exact_words(100));
    const std::string sentence = "Your analysis must have around 100 words; ";
    const std::size_t at = words_bundle.text.find(sentence);
    REQUIRE(at != std::string::npos);
    std::string stripped = words_bundle.text;
    stripped.erase(at, sentence.size());
    CHECK(stripped == auto_bundle.text);
    CHECK(words_bundle.text == read_file(golden_dir() / "direct_p1_words100_p075.txt"));
}

TEST_CASE("no-reasoning directive drops the explanations block") {
    const PromptBundle bundle =
        render_direct_prompt(Probability(0.75), Phrasing::P1, CotDirective::no_reasoning());
    CHECK(bundle.text.find("Explanations") == std::string::npos);
    CHECK(bundle.text.find("answer directly without any analysis") != std::string::npos);
    CHECK(bundle.text == read_file(golden_dir() / "direct_p1_none_p075.txt"));
}

TEST_CASE("cot word counts are validated") {
    CHECK_THROWS_AS(CotDirective::exact_words(0), std::invalid_argument);
    CHECK_THROWS_AS(CotDirective::exact_words(501), std::invalid_argument);
    CHECK_NOTHROW(CotDirective::exact_words(500));
}

TEST_CASE("vrs prompt at the worked parameters matches the golden bytes") {
    const PromptBundle bundle = render_vrs_prompt(ProposalPair(0.75, 0.5), 1,
                                                  VrsVariant::Standard, Phrasing::P1);
    CHECK(bundle.text == read_file(golden_dir() / "vrs_p1_x1_p075_q05.txt"));
    CHECK(bundle.expected_parse == ParseKind::AcceptTF);
    CHECK(bundle.text.find("** Sample from q(x): **\n1") != std::string::npos);
    CHECK(bundle.text.find("being 0.5") != std::string::npos);
}

TEST_CASE("vrs prompt differs only in the sample line between x = 1 and x = 0") {
    const PromptBundle one = render_vrs_prompt(ProposalPair(0.75, 0.5), 1,
                                               VrsVariant::Standard, Phrasing::P1);
    const PromptBundle zero = render_vrs_prompt(ProposalPair(0.75, 0.5), 0,
                                                VrsVariant::Standard, Phrasing::P1);
    std::string patched = zero.text;
    const std::string zero_line = "** Sample from q(x): **\n0";
    const std::size_t at = patched.find(zero_line);
    REQUIRE(at != std::string::npos);
    patched.replace(at, zero_line.size(), "** Sample from q(x): **\n1");
    CHECK(patched == one.text);
}

TEST_CASE("m-instruction variant adds exactly one paragraph") {
    const PromptBundle plain = render_vrs_prompt(ProposalPair(0.75, 0.5), 1,
                                                 VrsVariant::Standard, Phrasing::P1);
    const PromptBundle with_m = render_vrs_prompt(ProposalPair(0.75, 0.5), 1,
                                                  VrsVariant::WithMInstruction, Phrasing::P1);
    const std::string paragraph =
        "To make your decision, you must first compute the constant "
        "M = max{p(1)/q(1), p(0)/q(0)} and then accept the sample x with probability "
        "p(x) / (M * q(x)).\n\n";
    const std::size_t at = with_m.text.find(paragraph);
    REQUIRE(at != std::string::npos);
    std::string stripped = with_m.text;
    stripped.erase(at, paragraph.size());
    CHECK(stripped == plain.text);
    CHECK(with_m.text == read_file(golden_dir() / "vrs_m_p1_x1_p075_q05.txt"));
}

TEST_CASE("recognition prompt embeds the sample digits recoverably") {
    std::vector<std::uint8_t> samples;
    for (int i = 0; i < 100; ++i) samples.push_back(static_cast<std::uint8_t>(i % 3 == 0));
    const PromptBundle bundle =
        render_recognition_prompt(samples, Probability(0.5));
    CHECK(bundle.expected_parse == ParseKind::YesNo);
    CHECK(bundle.text.find("0.5") != std::string::npos);

    // Recover the embedded digits from the dataset section.
    const std::size_t begin = bundle.text.find("** Dataset: **\n");
    REQUIRE(begin != std::string::npos);
    const std::size_t end = bundle.text.find("\n\n** Candidate Distribution", begin);
    REQUIRE(end != std::string::npos);
    std::vector<std::uint8_t> recovered;
    for (std::size_t i = begin; i < end; ++i) {
        if (bundle.text[i] == '0') recovered.push_back(0);
        if (bundle.text[i] == '1') recovered.push_back(1);
    }
    CHECK(recovered == samples);

    // Minimal case renders fine.
    std::vector<std::uint8_t> single{1};
    CHECK_NOTHROW(render_recognition_prompt(single, Probability(0.0)));
    CHECK(bundle.meta.ones == 34);
    CHECK(bundle.meta.n_samples == 100);
}

TEST_CASE("golden files cover every phrasing and variant combination") {
    for (Phrasing ph : kAllPhrasings) {
        const std::string tag(phrasing_name(ph));
        std::string lower = tag;
        for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

        CHECK(render_direct_prompt(Probability(0.37), ph, CotDirective::auto_mode()).text ==
              read_file(golden_dir() / ("direct_" + lower + "_auto_p037.txt")));
        CHECK(render_direct_prompt(Probability(0.37), ph, CotDirective::no_reasoning()).text ==
              read_file(golden_dir() / ("direct_" + lower + "_none_p037.txt")));
        CHECK(render_vrs_prompt(ProposalPair(0.37, 0.5), 0, VrsVariant::Standard, ph).text ==
              read_file(golden_dir() / ("vrs_" + lower + "_x0_p037_q05.txt")));
        CHECK(render_vrs_prompt(ProposalPair(0.37, 0.5), 0, VrsVariant::WithMInstruction,
                                ph).text ==
              read_file(golden_dir() / ("vrs_m_" + lower + "_x0_p037_q05.txt")));
    }
}

TEST_CASE("renders are deterministic") {
    for (Phrasing ph : kAllPhrasings) {
        const auto a = render_direct_prompt(Probability(0.42), ph, CotDirective::auto_mode());
        const auto b = render_direct_prompt(Probability(0.42), ph, CotDirective::auto_mode());
        CHECK(a.text == b.text);
        const auto c = render_vrs_prompt(ProposalPair(0.42, 0.5), 1, VrsVariant::Standard, ph);
        const auto d = render_vrs_prompt(ProposalPair(0.42, 0.5), 1, VrsVariant::Standard, ph);
        CHECK(c.text == d.text);
    }
}

TEST_CASE("shipped template files equal the built-in defaults") {
    const std::filesystem::path dir = std::filesystem::path(VRS_SOURCE_DIR) / "core" /
                                      "templates";
    const PromptTemplates& defaults = PromptTemplates::defaults();
    for (const auto& [name, text] : defaults.all()) {
        CHECK(read_file(dir / (name + ".txt")) == text);
    }
    // Loading the shipped directory is a no-op relative to the defaults.
    const PromptTemplates loaded = PromptTemplates::load_dir(dir);
    for (const auto& [name, text] : defaults.all()) {
        CHECK(loaded.get(name) == text);
    }
}

TEST_CASE("template overrides substitute the same slots") {
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "vrs_templates_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "direct_p1.txt", std::ios::binary);
        out << "p is {p}, complement {one_minus_p}.{cot_sentence}\n\nOutput:";
    }
    const PromptTemplates templates = PromptTemplates::load_dir(dir);
    const PromptBundle bundle = render_direct_prompt(Probability(0.25), Phrasing::P1,
                                                     CotDirective::auto_mode(), templates);
    CHECK(bundle.text == "p is 0.25, complement 0.75.\n\nOutput:");
    // Other templates still come from the defaults.
    CHECK(templates.get("vrs_p1") == PromptTemplates::defaults().get("vrs_p1"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("binary sample parsing accepts the worked responses") {
    CHECK(parse_binary_sample("Explanations: \nreasoning here\n\nOutput: \n1") == 1);
    CHECK(parse_binary_sample("Output:\n0") == 0);
    CHECK(parse_binary_sample("Output: 1\n```") == 1);
    CHECK(parse_binary_sample("```\nOutput:\n1\n```") == 1);
    // The final marker wins.
    CHECK(parse_binary_sample("Output: discussion of format\n...\nOutput:\n0") == 0);
    CHECK_THROWS_AS(parse_binary_sample("Output: maybe 1 or 0"), MalformedResponse);
    CHECK_THROWS_AS(parse_binary_sample("no marker at all 1"), MalformedResponse);
    CHECK_THROWS_AS(parse_binary_sample(""), MalformedResponse);
    CHECK_THROWS_AS(parse_binary_sample("Output:\n2"), MalformedResponse);
}

TEST_CASE("accept decision parsing is strict about the letter") {
    CHECK(parse_accept_decision("Explanations: \n...\n\nOutput: \nT") == Decision::Accept);
    CHECK(parse_accept_decision("Output:\nF") == Decision::Reject);
    CHECK_THROWS_AS(parse_accept_decision("Output: True"), MalformedResponse);
    CHECK_THROWS_AS(parse_accept_decision("Output: t"), MalformedResponse);
    CHECK_THROWS_AS(parse_accept_decision("Output: accept"), MalformedResponse);
    CHECK_THROWS_AS(parse_accept_decision("T"), MalformedResponse);
}

TEST_CASE("yes/no parsing is case-insensitive on marker and word") {
    CHECK(parse_yes_no("Output: Yes") == YesNo::Yes);
    CHECK(parse_yes_no("output:\nno") == YesNo::No);
    CHECK(parse_yes_no("OUTPUT: YES") == YesNo::Yes);
    CHECK_THROWS_AS(parse_yes_no(""), MalformedResponse);
    CHECK_THROWS_AS(parse_yes_no("Output: nah"), MalformedResponse);
}

TEST_CASE("every rendered prompt's conforming response parses") {
    for (Phrasing ph : kAllPhrasings) {
        for (CotDirective cot : {CotDirective::auto_mode(), CotDirective::exact_words(250),
                                 CotDirective::no_reasoning()}) {
            const PromptBundle bundle = render_direct_prompt(Probability(0.6), ph, cot);
            CHECK(parse_binary_sample(conforming_response(bundle.expected_parse, "1")) == 1);
            CHECK(parse_binary_sample("Explanations: \nsome reasoning\n\nOutput: \n0\n") == 0);
        }
        for (VrsVariant variant : {VrsVariant::Standard, VrsVariant::WithMInstruction}) {
            for (int x : {0, 1}) {
                const PromptBundle bundle =
                    render_vrs_prompt(ProposalPair(0.6, 0.5), x, variant, ph);
                CHECK(parse_accept_decision(conforming_response(bundle.expected_parse, "T")) ==
                      Decision::Accept);
                CHECK(parse_accept_decision(conforming_response(bundle.expected_parse, "F")) ==
                      Decision::Reject);
            }
        }
    }
    std::vector<std::uint8_t> samples{0, 1, 1};
    const PromptBundle recog = render_recognition_prompt(samples, Probability(0.3));
    CHECK(parse_yes_no(conforming_response(recog.expected_parse, "Yes")) == YesNo::Yes);
}
