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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nvib/checkpoint.hpp"
#include "nvib/config.hpp"
#include "nvib/corpus.hpp"
#include "nvib/metrics.hpp"
#include "nvib/plots.hpp"
#include "nvib/trainer.hpp"
#include "nvib/verify.hpp"

namespace fs = std::filesystem;
using namespace nvib;

namespace {

struct CliOverrides {
    std::string config_file;
    std::string variant, data, out, checkpoint;
    double lambda_d = -1.0, lambda_g = -1.0, delta_p = -1.0;
    long long seed = -1;
    int steps = -1, samples = -1;
};

RunConfig resolve_config(const CliOverrides& cli)
{
    RunConfig cfg;
    if (!cli.config_file.empty()) {
        cfg = load_config_file(cli.config_file, cfg);
    }
    if (!cli.variant.empty()) cfg.variant = cli.variant;
    if (!cli.data.empty()) cfg.data = cli.data;
    if (!cli.out.empty()) cfg.out = cli.out;
    if (!cli.checkpoint.empty()) cfg.checkpoint = cli.checkpoint;
    if (cli.lambda_d >= 0.0) cfg.lambda_d_prime = cli.lambda_d;
    if (cli.lambda_g >= 0.0) cfg.lambda_g_prime = cli.lambda_g;
    if (cli.delta_p >= 0.0) cfg.delta_p = cli.delta_p;
    if (cli.seed >= 0) cfg.seed = static_cast<std::uint64_t>(cli.seed);
    if (cli.steps >= 0) cfg.steps = cli.steps;
    if (cli.samples >= 0) cfg.samples = cli.samples;
    if (cfg.out.empty()) cfg.out = default_out_dir();
    return cfg;
}

void add_common_flags(CLI::App* cmd, CliOverrides& cli)
{
    cmd->add_option("--config", cli.config_file, "key=value config file");
    cmd->add_option("--seed", cli.seed, "random seed");
    cmd->add_option("--variant", cli.variant, "t|vt|vtp|vts|nvae");
    cmd->add_option("--lambda-d", cli.lambda_d, "weight-term loss scale");
    cmd->add_option("--lambda-g", cli.lambda_g, "vector-term loss scale");
    cmd->add_option("--delta-p", cli.delta_p, "per-token prior pseudo-count");
    cmd->add_option("--data", cli.data, "corpus file, one sentence per line");
    cmd->add_option("--out", cli.out, "output directory (default $NVIB_OUT or ./out)");
    cmd->add_option("--checkpoint", cli.checkpoint, "checkpoint path");
}

Corpus load_corpus(const RunConfig& cfg)
{
    if (cfg.data.empty()) {
        throw InputError("--data is required");
    }
    return ingest(cfg.data, parse_tokenizer(cfg.tokenizer), cfg.min_len,
                  std::min(cfg.max_len, cfg.max_len_filter));
}

int cmd_train(const CliOverrides& cli)
{
    RunConfig cfg = resolve_config(cli);
    const Corpus corpus = load_corpus(cfg);
    const auto [train_set, val_set] = split_train_val(corpus, cfg.val_fraction);
    std::printf("corpus: %ld sentences, vocab %d, train %zu / val %zu\n",
                corpus.sentence_count(), corpus.vocab_size(), train_set.size(),
                val_set.size());

    TrainResult result = train_autoencoder(cfg, train_set, corpus.vocab_size());
    fs::create_directories(cfg.out);
    write_loss_csv((fs::path(cfg.out) / "losses.csv").string(), result.log);

    Checkpoint ckpt;
    ckpt.config = result.model->config();
    ckpt.params = result.model->params();
    ckpt.seed = cfg.seed;
    ckpt.vocab = corpus.id_to_token;
    ckpt.length_histogram = corpus.length_histogram;
    const std::string ckpt_path = (fs::path(cfg.out) / "model.ckpt").string();
    save_checkpoint(ckpt_path, ckpt);

    const std::vector<TokenSequence>& eval_set = val_set.empty() ? train_set : val_set;
    const double ppl = perplexity(*result.model, eval_set);
    const double acc = token_accuracy(*result.model, eval_set);
    const double nu = mean_retained(*result.model, eval_set);
    std::ofstream metrics((fs::path(cfg.out) / "metrics.csv").string());
    metrics << "metric,value\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "ppl,%.17g\naccuracy,%.17g\nnu,%.17g\n", ppl, acc, nu);
    metrics << buf;
    std::printf("final: ppl %.4f  accuracy %.4f  nu %.4f\ncheckpoint: %s\n", ppl, acc,
                nu, ckpt_path.c_str());
    return 0;
}

int cmd_eval(const CliOverrides& cli)
{
    RunConfig cfg = resolve_config(cli);
    if (cfg.checkpoint.empty()) {
        throw InputError("--checkpoint is required");
    }
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    Autoencoder model = model_from_checkpoint(ckpt);
    const Corpus corpus = load_corpus(cfg);
    const auto [train_set, val_set] = split_train_val(corpus, cfg.val_fraction);
    const std::vector<TokenSequence>& eval_set = val_set.empty() ? train_set : val_set;

    const double ppl = perplexity(model, eval_set);
    const double acc = token_accuracy(model, eval_set);
    const double bleu = reconstruction_bleu(model, eval_set);
    const double nu = mean_retained(model, eval_set);

    fs::create_directories(cfg.out);
    std::ofstream metrics((fs::path(cfg.out) / "metrics.csv").string());
    metrics << "metric,value\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "bleu,%.17g\nppl,%.17g\naccuracy,%.17g\nnu,%.17g\n",
                  bleu, ppl, acc, nu);
    metrics << buf;
    std::printf("bleu %.2f  ppl %.4f  accuracy %.4f  nu %.4f\n", bleu, ppl, acc, nu);
    return 0;
}

int cmd_generate(const CliOverrides& cli)
{
    RunConfig cfg = resolve_config(cli);
    if (cfg.checkpoint.empty()) {
        throw InputError("--checkpoint is required");
    }
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    Autoencoder model = model_from_checkpoint(ckpt);
    Corpus vocab_holder;
    vocab_holder.id_to_token = ckpt.vocab;

    NoiseSource noise = NoiseSource(cfg.seed).fork(0x9e4e);
    fs::create_directories(cfg.out);
    const std::string path = (fs::path(cfg.out) / "samples.txt").string();
    std::ofstream os(path);
    for (int i = 0; i < cfg.samples; ++i) {
        const TokenSequence s = model.generate_from_prior(ckpt.length_histogram, noise);
        os << vocab_holder.decode(s) << "\n";
    }
    std::printf("wrote %d samples to %s\n", cfg.samples, path.c_str());
    return 0;
}

int cmd_verify(const std::string& suite)
{
    const int failures = verify::run_verify(suite, std::cout);
    return failures == 0 ? 0 : 1;
}

int cmd_plot(const CliOverrides& cli, const std::string& what, const std::string& input)
{
    RunConfig cfg = resolve_config(cli);
    if (what == "fig3") {
        emit_fig3(cfg.out);
    } else if (what == "nu_vs_length") {
        if (cfg.checkpoint.empty() || cfg.data.empty()) {
            throw InputError("nu_vs_length needs --checkpoint and --data");
        }
        emit_nu_vs_length(cfg.checkpoint, cfg.data, cfg.tokenizer, cfg.out);
    } else if (what == "loss_curves") {
        if (input.empty()) {
            throw InputError("loss_curves needs --input losses.csv");
        }
        emit_loss_curves(input, cfg.out);
    } else {
        throw InputError("unknown plot: " + what);
    }
    std::printf("plots written to %s\n", cfg.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dirichlet-process latent bottleneck for Transformer autoencoders"};
    app.require_subcommand(1);
    CliOverrides cli;

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common_flags(train, cli);
    train->add_option("--steps", cli.steps, "training steps");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common_flags(eval, cli);

    CLI::App* generate = app.add_subcommand("generate", "sample from the prior");
    add_common_flags(generate, cli);
    generate->add_option("--samples", cli.samples, "number of sentences");

    std::string suite = "all";
    CLI::App* verify_cmd = app.add_subcommand("verify", "run the verification suite");
    verify_cmd->add_option("--suite", suite,
                           "all|attention|distributions|kl|gradients|fdp|model|harness");

    std::string what, plot_input;
    CLI::App* plot = app.add_subcommand("plot", "emit CSV + SVG plots");
    add_common_flags(plot, cli);
    plot->add_option("what", what, "fig3|nu_vs_length|loss_curves")->required();
    plot->add_option("--input", plot_input, "input CSV for loss_curves");

    try {
        app.parse(argc, argv);
        if (train->parsed()) {
            return cmd_train(cli);
        }
        if (eval->parsed()) {
            return cmd_eval(cli);
        }
        if (generate->parsed()) {
            return cmd_generate(cli);
        }
        if (verify_cmd->parsed()) {
            return cmd_verify(suite);
        }
        if (plot->parsed()) {
            return cmd_plot(cli, what, plot_input);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
