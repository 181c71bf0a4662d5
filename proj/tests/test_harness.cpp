// ----------------------------------------------------------------------------
// Copyright 2026 the nvib authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nvib/config.hpp"
#include "nvib/corpus.hpp"
#include "nvib/metrics.hpp"
#include "nvib/plots.hpp"
#include "nvib/trainer.hpp"
#include "nvib/verify.hpp"

using namespace nvib;
namespace fs = std::filesystem;

namespace {

fs::path scratch()
{
    const auto dir = fs::temp_directory_path() / "nvib_harness_tests";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("tokenizers split as documented")
{
    CHECK(tokenize("the cat  sat", TokenizerMode::Whitespace) ==
          std::vector<std::string>{"the", "cat", "sat"});
    CHECK(tokenize("ab c", TokenizerMode::Char) ==
          std::vector<std::string>{"a", "b", "c"});
    CHECK_THROWS_AS(parse_tokenizer("bpe"), InputError);
}

TEST_CASE("ingest filters by length and builds a deterministic vocabulary")
{
    const auto path = scratch() / "tiny.txt";
    {
        std::ofstream os(path);
        os << "b a a\n";
        os << "c b a\n";
        os << "a b c d e f g h i j k\n"; // over the bound below
    }
    const Corpus c1 = ingest(path.string(), TokenizerMode::Whitespace, 1, 5);
    CHECK(c1.sentence_count() == 2);
    // Frequencies: a=3, b=2, c=1 -> ids after the three specials.
    CHECK(c1.token_to_id.at("a") == 3);
    CHECK(c1.token_to_id.at("b") == 4);
    CHECK(c1.token_to_id.at("c") == 5);
    CHECK(c1.length_histogram[3] == 2);

    const Corpus c2 = ingest(path.string(), TokenizerMode::Whitespace, 1, 5);
    CHECK(c1.id_to_token == c2.id_to_token);

    const Corpus wide = ingest(path.string(), TokenizerMode::Whitespace, 1, 100);
    CHECK(wide.sentence_count() == 3);

    CHECK_THROWS_AS(ingest(path.string(), TokenizerMode::Whitespace, 50, 100), InputError);
    CHECK_THROWS_AS(ingest("/nonexistent/file.txt", TokenizerMode::Whitespace, 1, 5),
                    InputError);
}

TEST_CASE("corpus round-trips text through ids")
{
    const std::vector<std::string> lines{"a b c", "b c d"};
    const Corpus c = corpus_from_lines(lines, TokenizerMode::Whitespace, 1, 10);
    const TokenSequence s = c.encode_line("a d q", TokenizerMode::Whitespace);
    CHECK(s.length() == 3);
    CHECK(s.content()[2] == kUnkId);
    CHECK(c.decode(s) == "a d <unk>");
}

TEST_CASE("corpus BLEU endpoints")
{
    const std::vector<std::vector<int>> refs{{3, 4, 5, 6, 7}, {8, 9, 10, 11}};
    CHECK(corpus_bleu(refs, refs) == doctest::Approx(100.0));

    const std::vector<std::vector<int>> disjoint{{20, 21, 22, 23, 24}, {25, 26, 27, 28}};
    CHECK(corpus_bleu(disjoint, refs) < 0.1);

    CHECK_THROWS_AS(corpus_bleu({}, {}), InputError);
}

TEST_CASE("corpus BLEU matches a hand-computed two-sentence table")
{
    // Candidate 1: "a b c d" vs reference "a b c e":
    //   1-grams 3/4, 2-grams 2/3, 3-grams 1/2, 4-grams 0/1.
    // Candidate 2: "x y" vs reference "x y":
    //   1-grams 2/2, 2-grams 1/1, none longer.
    // Pooled counts, raw unigrams, add-one on the higher orders:
    //   p1 = 5/6, p2 = (3+1)/(4+1), p3 = (1+1)/(2+1), p4 = (0+1)/(1+1)
    // Candidate length 6 = reference length 6, so no brevity penalty.
    const std::vector<std::vector<int>> cand{{3, 4, 5, 6}, {7, 8}};
    const std::vector<std::vector<int>> refs{{3, 4, 5, 9}, {7, 8}};
    const double expected =
        100.0 * std::pow((5.0 / 6.0) * (4.0 / 5.0) * (2.0 / 3.0) * (1.0 / 2.0), 0.25);
    CHECK(corpus_bleu(cand, refs) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("uniform scorer perplexity equals the vocabulary size")
{
    const int vocab = 24;
    LanguageModel lm(vocab, 8, 16, 12, 71);
    // Zero-initialized output head gives uniform logits; one zero-rate
    // update marks the model trained without changing it.
    AdamOptimizer frozen(0.0, 0.0);
    NoiseSource noise(72);
    std::vector<TokenSequence> corpus;
    NoiseSource rng(73);
    for (int i = 0; i < 8; ++i) {
        std::vector<int> content;
        for (int j = 0; j < 6; ++j) {
            content.push_back(kSpecialTokens +
                              static_cast<int>(rng.integer(vocab - kSpecialTokens)));
        }
        corpus.push_back(make_sequence(content, 12));
    }
    lm.step_train(corpus, frozen, noise);
    CHECK(perplexity(lm, corpus) == doctest::Approx(vocab).epsilon(0.01));
}

TEST_CASE("scoring an untrained model is rejected")
{
    LanguageModel lm(12, 8, 16, 12, 74);
    CHECK_THROWS_AS(perplexity(lm, {make_sequence({5, 6}, 12)}), ContractError);
}

TEST_CASE("a memorized single sentence approaches perplexity one")
{
    const int vocab = 12;
    const TokenSequence sentence = make_sequence({4, 7, 5, 9, 6}, 12);
    LanguageModel lm(vocab, 16, 32, 12, 75);
    AdamOptimizer adam(5e-3, 1.0);
    NoiseSource noise(76);
    for (int step = 0; step < 400; ++step) {
        lm.step_train({sentence}, adam, noise);
    }
    CHECK(perplexity(lm, {sentence}) < 1.05);
}

TEST_CASE("structured text scores better than random strings under its own model")
{
    const auto lines = synthetic_corpus_lines(96, 20, 4, 8, 81);
    const Corpus corpus = corpus_from_lines(lines, TokenizerMode::Whitespace, 1, 20);
    LmOptions opts;
    opts.model_dim = 16;
    opts.ff_dim = 32;
    opts.max_len = 20;
    opts.steps = 400;
    opts.seed = 82;

    NoiseSource rng(83);
    std::vector<TokenSequence> random_strings;
    for (int i = 0; i < 48; ++i) {
        const int n = 4 + static_cast<int>(rng.integer(5));
        std::vector<int> content;
        for (int j = 0; j < n; ++j) {
            content.push_back(kSpecialTokens +
                              static_cast<int>(rng.integer(
                                  static_cast<std::uint64_t>(corpus.vocab_size() - kSpecialTokens))));
        }
        random_strings.push_back(make_sequence(content, 20));
    }
    const double on_data =
        lm_perplexity_of(corpus.sentences, corpus.sentences, corpus.vocab_size(), opts);
    const double on_random =
        lm_perplexity_of(corpus.sentences, random_strings, corpus.vocab_size(), opts);
    CHECK(on_data < on_random);
}

TEST_CASE("config files parse with comments and overrides")
{
    const auto path = scratch() / "run.conf";
    {
        std::ofstream os(path);
        os << "# comment line\n";
        os << "variant = vts\n";
        os << "stride=0.25\n";
        os << "lambda_d_prime = 1.5  # trailing comment\n";
        os << "seed=99\n";
    }
    const RunConfig cfg = load_config_file(path.string());
    CHECK(cfg.variant == "vts");
    CHECK(cfg.stride == doctest::Approx(0.25));
    CHECK(cfg.lambda_d_prime == doctest::Approx(1.5));
    CHECK(cfg.seed == 99);

    RunConfig overridden = cfg;
    apply_config_entry(overridden, "variant", "nvae");
    CHECK(overridden.variant == "nvae");

    RunConfig bad;
    CHECK_THROWS_AS(apply_config_entry(bad, "no_such_key", "1"), InputError);

    const auto broken = scratch() / "broken.conf";
    {
        std::ofstream os(broken);
        os << "just words\n";
    }
    CHECK_THROWS_AS(load_config_file(broken.string()), InputError);
}

TEST_CASE("default output directory honors the environment variable")
{
    ::setenv("NVIB_OUT", "/tmp/custom_out", 1);
    CHECK(default_out_dir() == "/tmp/custom_out");
    ::unsetenv("NVIB_OUT");
    CHECK(default_out_dir() == "out");
}

TEST_CASE("plot emission writes the documented CSV layouts")
{
    const auto dir = scratch() / "plots";
    SUBCASE("loss curves")
    {
        const auto losses = scratch() / "losses.csv";
        {
            std::ofstream os(losses);
            os << "step,l_r,l_d,l_g,total\n";
            os << "50,2.0,0.1,0.3,2.4\n";
            os << "100,1.5,0.2,0.2,1.9\n";
        }
        emit_loss_curves(losses.string(), dir.string());
        std::ifstream in(dir / "loss_curves.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "step,l_r,l_d,l_g,total");
        CHECK(fs::exists(dir / "loss_curves.svg"));
    }
    SUBCASE("gamma error curves cross once in the scanned band")
    {
        emit_fig3(dir.string());
        std::ifstream in(dir / "fig3.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "alpha,inverse_cdf_error,gaussian_error");
        int sign_changes = 0;
        double prev = 0.0;
        bool have_prev = false;
        std::string line;
        while (std::getline(in, line)) {
            std::istringstream is(line);
            double a, e1, e2;
            char comma;
            is >> a >> comma >> e1 >> comma >> e2;
            const double diff = e1 - e2;
            if (have_prev && diff * prev < 0.0) {
                ++sign_changes;
            }
            prev = diff;
            have_prev = true;
        }
        CHECK(sign_changes == 1);
        CHECK(fs::exists(dir / "fig3.svg"));
    }
}

TEST_CASE("forward and reverse perplexity wrap the two scoring directions")
{
    const auto lines = synthetic_corpus_lines(48, 14, 4, 7, 85);
    const Corpus corpus = corpus_from_lines(lines, TokenizerMode::Whitespace, 1, 20);
    const auto [train_set, val_set] = split_train_val(corpus, 0.2);
    LmOptions opts;
    opts.model_dim = 8;
    opts.ff_dim = 16;
    opts.max_len = 20;
    opts.steps = 60;
    opts.seed = 86;
    const FpplRppl out =
        eval_fppl_rppl(val_set, train_set, val_set, corpus.vocab_size(), opts);
    CHECK(out.f_ppl > 1.0);
    CHECK(out.r_ppl > 1.0);
    CHECK(std::isfinite(out.f_ppl));
    CHECK(std::isfinite(out.r_ppl));
}

TEST_CASE("unknown verify suites are rejected")
{
    std::ostringstream sink;
    CHECK_THROWS_AS(verify::run_verify("everything", sink), InputError);
}

TEST_CASE("the attention suite finishes well inside a minute")
{
    const auto start = std::chrono::steady_clock::now();
    std::ostringstream sink;
    const int failures = verify::run_verify("attention", sink);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(failures == 0);
    CHECK(secs < 60.0);
}

TEST_CASE("train/validation split is deterministic and exhaustive")
{
    const auto lines = synthetic_corpus_lines(40, 12, 3, 6, 84);
    const Corpus corpus = corpus_from_lines(lines, TokenizerMode::Whitespace, 1, 10);
    const auto [train1, val1] = split_train_val(corpus, 0.1);
    const auto [train2, val2] = split_train_val(corpus, 0.1);
    CHECK(train1.size() + val1.size() == corpus.sentences.size());
    CHECK(train1.size() == train2.size());
    CHECK(val1.size() == val2.size());
    CHECK(val1.size() > 0);
}
