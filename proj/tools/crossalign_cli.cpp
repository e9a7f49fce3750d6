// Command-line front end: synthetic data generation, training, transfer,
// evaluation, gradient diagnostics, and the identifiability demos.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 divergence.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crossalign/checkpoint.hpp"
#include "crossalign/data.hpp"
#include "crossalign/errors.hpp"
#include "crossalign/eval.hpp"
#include "crossalign/gradcheck.hpp"
#include "crossalign/model.hpp"
#include "crossalign/theory.hpp"
#include "crossalign/training.hpp"

namespace fs = std::filesystem;
using namespace crossalign;

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Raw line-preserving read: no length filter, empty lines allowed. Used where
// line counts must survive (transfer inputs, eval candidates).
data::Sentences read_lines_tokenized(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    data::Sentences out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        data::Sentence s;
        std::string tok;
        while (ls >> tok) s.push_back(tok);
        out.push_back(std::move(s));
    }
    return out;
}

struct GenDataArgs {
    std::string task;
    std::string out;
    std::uint64_t seed = 0;
    double rate = 1.0;
    int vocab = 100;
    int n_train = 10000;
    int n_dev = 500;
    int n_test = 2000;
    int max_len = data::kMaxLen;
    bool force = false;
};

void write_and_report(const std::string& path, const data::Sentences& s) {
    data::write_sentences(path, s);
    std::printf("wrote %s sentences=%zu\n", path.c_str(), s.size());
}

int cmd_gen_data(const GenDataArgs& a) {
    if (a.rate < 0.0 || a.rate > 1.0) throw ConfigError("--rate must be in [0, 1]");
    if (a.vocab < 5) throw ConfigError("--vocab must be at least 5");
    if (a.n_train < 1 || a.n_dev < 0 || a.n_test < 1)
        throw ConfigError("sentence counts must be positive");
    if (fs::exists(a.out) && !a.force)
        throw ConfigError("output dir " + a.out + " exists; pass --force to overwrite");
    fs::create_directories(a.out);
    auto p = [&a](const char* name) { return (fs::path(a.out) / name).string(); };

    const int total = 2 * a.n_train + a.n_dev + a.n_test;
    // sentiment-synth inserts one marker token per sentence, so content
    // sentences leave room for it
    const int content_len = a.task == "sentiment-synth" ? a.max_len - 1 : a.max_len;
    auto [pool, _model] = data::synth_bigram_corpus(a.vocab, total, content_len, a.seed);
    size_t cursor = 0;
    auto take = [&pool, &cursor](int n) {
        data::Sentences s(pool.begin() + static_cast<long>(cursor),
                          pool.begin() + static_cast<long>(cursor) + n);
        cursor += static_cast<size_t>(n);
        return s;
    };
    data::Sentences x1 = take(a.n_train), x2_src = take(a.n_train);
    data::Sentences dev1 = take(a.n_dev);
    data::Sentences test1 = take(a.n_test);

    data::Sentences x2, dev2, test2;
    if (a.task == "cipher") {
        const auto vocab = data::build_vocab(pool, {}, 1);
        const auto key = data::gen_cipher_key(vocab, a.rate, a.seed + 1);
        x2 = data::apply_cipher(x2_src, key);
        dev2 = data::apply_cipher(dev1, key);
        test2 = data::apply_cipher(test1, key);
        key.save(p("key.tsv"));
        std::printf("wrote %s pairs=%zu\n", p("key.tsv").c_str(), key.mapping.size());
    } else if (a.task == "order") {
        x2 = data::shuffle_words(x2_src, a.seed + 2);
        dev2 = data::shuffle_words(dev1, a.seed + 3);
        test2 = data::shuffle_words(test1, a.seed + 4);
    } else {   // sentiment-synth: shared content, style-marked surface forms
        Rng rng(a.seed + 5);
        auto mark = [](const data::Sentence& s, const char* prefix, int k, int pos) {
            data::Sentence out = s;
            out.insert(out.begin() + pos, std::string(prefix) + std::to_string(k));
            return out;
        };
        auto mark_corpus = [&rng, &mark](const data::Sentences& src, const char* prefix) {
            data::Sentences out;
            out.reserve(src.size());
            for (const auto& s : src)
                out.push_back(mark(s, prefix, rng.uniform_int(4),
                                   rng.uniform_int(static_cast<int>(s.size()) + 1)));
            return out;
        };
        x1 = mark_corpus(x1, "pos");
        x2 = mark_corpus(x2_src, "neg");
        // parallel pairs share content, marker index and position
        auto mark_pair = [&rng, &mark](const data::Sentences& src, data::Sentences& s1,
                                       data::Sentences& s2) {
            for (const auto& s : src) {
                const int k = rng.uniform_int(4);
                const int pos = rng.uniform_int(static_cast<int>(s.size()) + 1);
                s1.push_back(mark(s, "pos", k, pos));
                s2.push_back(mark(s, "neg", k, pos));
            }
        };
        data::Sentences d1, d2, t1, t2;
        mark_pair(dev1, d1, d2);
        mark_pair(test1, t1, t2);
        dev1 = std::move(d1);
        dev2 = std::move(d2);
        test1 = std::move(t1);
        test2 = std::move(t2);
    }

    write_and_report(p("x1.txt"), x1);
    write_and_report(p("x2.txt"), x2);
    write_and_report(p("dev1.txt"), dev1);
    write_and_report(p("dev2.txt"), dev2);
    write_and_report(p("test1.txt"), test1);
    write_and_report(p("test2.txt"), test2);
    return 0;
}

struct TrainArgs {
    std::string x1, x2, out, resume;
    std::string variant = "cross";
    training::TrainingConfig cfg;
    bool paper_dims = false;
    int d_emb = -1, d_y = -1, d_z = -1, n_filters = -1;
    int min_count = 1;
    int max_len = data::kMaxLen;
};

ckpt::CheckpointFile snapshot(const training::TrainState& st, const training::TrainingConfig& cfg,
                              training::Variant variant, const data::Vocabulary& vocab,
                              int min_count, int max_len) {
    ckpt::CheckpointFile f;
    f.epoch = st.next_epoch;
    f.step = st.global_step;
    f.vocab_hash = vocab.content_hash();
    f.rng_state = st.rng.serialize();
    f.config = {
        {"d_emb", std::to_string(cfg.dims.d_emb)},
        {"d_y", std::to_string(cfg.dims.d_y)},
        {"d_z", std::to_string(cfg.dims.d_z)},
        {"n_filters", std::to_string(cfg.dims.n_filters)},
        {"vocab_size", std::to_string(vocab.size())},
        {"variant", training::to_string(variant)},
        {"lambda", fmt_double(cfg.lambda)},
        {"gamma", fmt_double(cfg.gamma)},
        {"lr", fmt_double(cfg.lr)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"max_epochs", std::to_string(cfg.max_epochs)},
        {"seed", std::to_string(cfg.seed)},
        {"clip_norm", fmt_double(cfg.clip_norm)},
        {"min_count", std::to_string(min_count)},
        {"max_len", std::to_string(max_len)},
    };
    ckpt::pack_params(f, st.params);
    ckpt::pack_adam(f, st.opt, st.params);
    return f;
}

int cmd_train(TrainArgs& a) {
    const auto variant = training::variant_from_string(a.variant);
    a.cfg.dims = a.paper_dims ? model::Dims::paper() : model::Dims::desk();
    if (a.d_emb > 0) a.cfg.dims.d_emb = a.d_emb;
    if (a.d_y > 0) a.cfg.dims.d_y = a.d_y;
    if (a.d_z > 0) a.cfg.dims.d_z = a.d_z;
    if (a.n_filters > 0) a.cfg.dims.n_filters = a.n_filters;

    const auto s1 = data::read_sentences(a.x1, a.max_len);
    const auto s2 = data::read_sentences(a.x2, a.max_len);
    if (s1.empty() || s2.empty()) throw IoError("training corpora must be non-empty");
    const auto vocab = data::build_vocab(s1, s2, a.min_count);
    const auto c1 = data::encode_corpus(s1, vocab, 1);
    const auto c2 = data::encode_corpus(s2, vocab, 2);

    training::TrainState st;
    if (!a.resume.empty()) {
        const auto f = ckpt::read_checkpoint(a.resume);
        if (f.vocab_hash != vocab.content_hash())
            throw ContractError("resume: vocabulary differs from the checkpoint's");
        a.cfg.dims = ckpt::dims_from_config(f);   // geometry always follows the checkpoint
        Rng scratch(a.cfg.seed);
        st.params = model::ModelParams(a.cfg.dims, ckpt::vocab_size_from_config(f), scratch);
        ckpt::unpack_params(f, st.params);
        ckpt::unpack_adam(f, st.opt, st.params);
        st.rng.restore(f.rng_state);
        st.next_epoch = f.epoch;
        st.global_step = f.step;
    } else {
        a.cfg.validate();
        st = training::init_state(a.cfg, vocab.size());
    }

    fs::create_directories(a.out);
    auto p = [&a](const std::string& name) { return (fs::path(a.out) / name).string(); };
    vocab.save(p("vocab.txt"));

    std::ofstream metrics(p("metrics.log"), std::ios::app);
    if (!metrics) throw IoError("cannot open metrics log in " + a.out);

    double rec_sum = 0.0;
    long rec_n = 0;
    training::TrainHooks hooks;
    hooks.on_step = [&metrics, &rec_sum, &rec_n](const training::StepMetrics& m) {
        metrics << training::format_metrics(m) << '\n';
        rec_sum += m.rec;
        ++rec_n;
    };
    std::string last_ckpt;
    hooks.on_epoch = [&](int epoch, training::TrainState& state) {
        metrics.flush();
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch + 1);
        last_ckpt = p(name);
        ckpt::write_checkpoint(last_ckpt, snapshot(state, a.cfg, variant, vocab, a.min_count, a.max_len));
        std::printf("epoch=%d steps=%ld rec_mean=%.6f\n", epoch + 1, state.global_step,
                    rec_n ? rec_sum / static_cast<double>(rec_n) : 0.0);
        std::fflush(stdout);
        rec_sum = 0.0;
        rec_n = 0;
    };

    try {
        training::train_loop(st, variant, c1, c2, a.cfg, hooks);
    } catch (const DivergenceError& e) {
        metrics.flush();
        std::fprintf(stderr, "%s\n", e.what());
        std::fprintf(stderr, "last good checkpoint: %s\n",
                     last_ckpt.empty() ? "(none)" : last_ckpt.c_str());
        throw;
    }
    ckpt::write_checkpoint(p("model.ckpt"), snapshot(st, a.cfg, variant, vocab, a.min_count, a.max_len));
    std::printf("final checkpoint %s epochs=%d steps=%ld\n", p("model.ckpt").c_str(),
                st.next_epoch, st.global_step);
    return 0;
}

struct TransferArgs {
    std::string ckpt_path, in, out, direction, vocab_path;
    int max_len = 20;
};

int cmd_transfer(const TransferArgs& a) {
    int src = 0, tgt = 0;
    if (a.direction == "1to2") {
        src = 1;
        tgt = 2;
    } else if (a.direction == "2to1") {
        src = 2;
        tgt = 1;
    } else {
        throw ConfigError("--direction must be 1to2 or 2to1");
    }

    const auto f = ckpt::read_checkpoint(a.ckpt_path);
    const std::string vocab_path =
        a.vocab_path.empty() ? (fs::path(a.ckpt_path).parent_path() / "vocab.txt").string()
                             : a.vocab_path;
    const auto vocab = data::Vocabulary::load(vocab_path);
    if (vocab.content_hash() != f.vocab_hash)
        throw ContractError("vocabulary " + vocab_path + " does not match the checkpoint");

    Rng scratch(0);
    model::ModelParams params(ckpt::dims_from_config(f), ckpt::vocab_size_from_config(f), scratch);
    ckpt::unpack_params(f, params);

    const auto lines = read_lines_tokenized(a.in);
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw IoError("cannot open output file " + a.out);

    const int chunk = 64;
    std::vector<std::string> rendered(lines.size());
    std::vector<size_t> pending;
    std::vector<std::vector<int>> encoded;
    auto flush = [&]() {
        if (pending.empty()) return;
        const auto batch = data::make_batch(encoded);
        const auto ids = model::transfer(params, batch, src, tgt, a.max_len);
        for (size_t i = 0; i < pending.size(); ++i) {
            const auto toks = vocab.decode(ids[i]);
            std::string line;
            for (size_t j = 0; j < toks.size(); ++j) {
                if (j) line += ' ';
                line += toks[j];
            }
            rendered[pending[i]] = std::move(line);
        }
        pending.clear();
        encoded.clear();
    };
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;   // empty line passes through empty
        pending.push_back(i);
        encoded.push_back(vocab.encode(lines[i]));
        if (static_cast<int>(pending.size()) == chunk) flush();
    }
    flush();
    for (const auto& line : rendered) out << line << '\n';
    if (!out) throw IoError("short write to " + a.out);
    std::printf("transferred lines=%zu\n", lines.size());
    return 0;
}

struct EvalArgs {
    std::string cand, ref, src, x1, x2, out;
    std::string clf_x1, clf_x2;
    int clf_target = 1;
    std::uint64_t clf_seed = 7;
};

int cmd_eval(const EvalArgs& a) {
    const auto cand = read_lines_tokenized(a.cand);
    const auto ref = read_lines_tokenized(a.ref);
    const auto rep = eval::bleu(cand, ref);

    std::ostringstream report;
    report << "bleu=" << fmt_double(rep.bleu) << '\n';
    for (int n = 0; n < 4; ++n)
        report << 'p' << (n + 1) << '=' << fmt_double(rep.precisions[static_cast<size_t>(n)])
               << '\n';
    report << "brevity=" << fmt_double(rep.brevity) << '\n';
    report << "cand_len=" << rep.cand_len << '\n';
    report << "ref_len=" << rep.ref_len << '\n';

    if (!a.src.empty()) {
        const auto src = read_lines_tokenized(a.src);
        report << "copy=" << fmt_double(eval::copy_baseline(src, ref)) << '\n';
        if (!a.x1.empty() && !a.x2.empty()) {
            const auto t1 = data::read_sentences(a.x1);
            const auto t2 = data::read_sentences(a.x2);
            const auto mapping = eval::frequency_match(t1, t2);
            const auto mapped = eval::apply_mapping(src, mapping);
            report << "unigram-match=" << fmt_double(eval::bleu(mapped, ref).bleu) << '\n';
        }
    }
    if (!a.clf_x1.empty() && !a.clf_x2.empty()) {
        if (a.clf_target != 1 && a.clf_target != 2)
            throw ConfigError("--clf-target must be 1 or 2");
        eval::ClassifierConfig cc;
        cc.seed = a.clf_seed;
        const auto clf = eval::train_style_classifier(data::read_sentences(a.clf_x1),
                                                      data::read_sentences(a.clf_x2), cc);
        report << "classifier_accuracy="
               << fmt_double(eval::classifier_accuracy(cand, clf, a.clf_target)) << '\n';
    }

    if (a.out.empty()) {
        std::fputs(report.str().c_str(), stdout);
    } else {
        std::ofstream out(a.out, std::ios::trunc);
        if (!out) throw IoError("cannot open report file " + a.out);
        out << report.str();
    }
    return 0;
}

int cmd_grad_check(int n_seeds, std::uint64_t base_seed, double tol) {
    if (n_seeds < 1) throw ConfigError("--seeds must be positive");
    if (tol <= 0) throw ConfigError("--tol must be positive");
    const auto worst = diag::grad_check_sweep(n_seeds, base_seed);
    double overall = 0.0;
    for (const auto& c : worst) {
        std::printf("%-28s max_rel_err=%.3e\n", c.name.c_str(), c.max_rel_err);
        overall = std::max(overall, c.max_rel_err);
    }
    std::printf("checks=%zu seeds=%d worst=%.3e tol=%.1e %s\n", worst.size(), n_seeds, overall,
                tol, overall < tol ? "ok" : "FAIL");
    return overall < tol ? 0 : 1;
}

int cmd_theory_demo(std::uint64_t seed) {
    const auto rep = theory::run_theory_suite(seed);
    std::printf("rotation_indistinguishable=%d/%d\n", rep.rotation_indistinguishable,
                rep.rotation_trials);
    std::printf("mixture_distinguishable=%d/%d\n", rep.mixture_distinguishable,
                rep.mixture_trials);
    std::printf("planted_recovered=%d/%d\n", rep.planted_recovered, rep.planted_trials);
    std::printf("degree_agree=%d/%d\n", rep.degree_agree, rep.degree_trials);
    return rep.all_clean() ? 0 : 1;
}

// --config FILE holds key=value lines where each key is a long flag without
// the dashes ("seeds=30", "lr=0.001", flags as "force=true"). Values fill in
// only flags the command line leaves unset, so explicit flags always win.
std::vector<std::string> merge_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            path = args[i].substr(9);
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    auto given = [&args](const std::string& flag) {
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("malformed config line: " + line);
        const std::string flag = "--" + line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (given(flag) || value == "false") continue;
        args.push_back(flag);
        if (value != "true") args.push_back(value);
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-aligned auto-encoder style transfer toolkit"};
    app.require_subcommand(1);
    std::string config_path;

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic task dataset");
    gen->add_option("--task", gd.task, "cipher | order | sentiment-synth")
        ->required()
        ->check(CLI::IsMember({"cipher", "order", "sentiment-synth"}));
    gen->add_option("--out", gd.out, "output directory")->required();
    gen->add_option("--seed", gd.seed, "generator seed");
    gen->add_option("--rate", gd.rate, "cipher substitution rate in [0, 1]");
    gen->add_option("--vocab", gd.vocab, "generator vocabulary size");
    gen->add_option("--n-train", gd.n_train, "training sentences per side");
    gen->add_option("--n-dev", gd.n_dev, "parallel dev pairs");
    gen->add_option("--n-test", gd.n_test, "parallel test pairs");
    gen->add_option("--max-len", gd.max_len, "max sentence length in words");
    gen->add_flag("--force", gd.force, "overwrite an existing output directory");
    gen->add_option("--config", config_path, "key=value defaults for unset flags");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "train a style-transfer model");
    tr->add_option("--x1", ta.x1, "style-1 training corpus")->required();
    tr->add_option("--x2", ta.x2, "style-2 training corpus")->required();
    tr->add_option("--out", ta.out, "output directory")->required();
    tr->add_option("--variant", ta.variant, "cross | vae | aligned")
        ->check(CLI::IsMember({"cross", "vae", "aligned"}));
    tr->add_option("--seed", ta.cfg.seed, "training seed");
    tr->add_option("--lambda", ta.cfg.lambda, "adversarial loss weight");
    tr->add_option("--gamma", ta.cfg.gamma, "soft-feed softmax temperature");
    tr->add_option("--lr", ta.cfg.lr, "learning rate");
    tr->add_option("--batch-size", ta.cfg.batch_size, "mini-batch size");
    tr->add_option("--max-epochs", ta.cfg.max_epochs, "number of epochs");
    tr->add_option("--clip-norm", ta.cfg.clip_norm, "gradient norm clip per group");
    tr->add_option("--min-count", ta.min_count, "vocabulary count threshold");
    tr->add_option("--max-len", ta.max_len, "sentence length filter");
    tr->add_flag("--paper-dims", ta.paper_dims, "use full-size layer widths");
    tr->add_option("--d-emb", ta.d_emb, "embedding width override");
    tr->add_option("--d-y", ta.d_y, "style width override");
    tr->add_option("--d-z", ta.d_z, "content width override");
    tr->add_option("--n-filters", ta.n_filters, "discriminator filters per width");
    tr->add_option("--resume", ta.resume, "checkpoint to continue from");
    tr->add_option("--config", config_path, "key=value defaults for unset flags");

    TransferArgs xa;
    auto* xf = app.add_subcommand("transfer", "rewrite sentences into the other style");
    xf->add_option("--ckpt", xa.ckpt_path, "model checkpoint")->required();
    xf->add_option("--in", xa.in, "input file, one sentence per line")->required();
    xf->add_option("--out", xa.out, "output file")->required();
    xf->add_option("--direction", xa.direction, "1to2 | 2to1")->required();
    xf->add_option("--vocab", xa.vocab_path, "vocabulary file (default: next to checkpoint)");
    xf->add_option("--max-len", xa.max_len, "decoding length cap");
    xf->add_option("--config", config_path, "key=value defaults for unset flags");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "score candidates against references");
    ev->add_option("--cand", ea.cand, "candidate sentences")->required();
    ev->add_option("--ref", ea.ref, "reference sentences")->required();
    ev->add_option("--src", ea.src, "raw source side; adds copy / unigram-match baselines");
    ev->add_option("--x1", ea.x1, "style-1 training corpus for the frequency baseline");
    ev->add_option("--x2", ea.x2, "style-2 training corpus for the frequency baseline");
    ev->add_option("--out", ea.out, "report file (default: stdout)");
    ev->add_option("--clf-x1", ea.clf_x1, "style-1 corpus to train the accuracy classifier");
    ev->add_option("--clf-x2", ea.clf_x2, "style-2 corpus to train the accuracy classifier");
    ev->add_option("--clf-target", ea.clf_target, "style the candidates should read as");
    ev->add_option("--clf-seed", ea.clf_seed, "classifier training seed");
    ev->add_option("--config", config_path, "key=value defaults for unset flags");

    int gc_seeds = 20;
    std::uint64_t gc_seed = 1;
    double gc_tol = 1e-4;
    auto* gc = app.add_subcommand("grad-check", "finite-difference gradient audit");
    gc->add_option("--seeds", gc_seeds, "number of random restarts");
    gc->add_option("--seed", gc_seed, "base seed");
    gc->add_option("--tol", gc_tol, "max relative error allowed");
    gc->add_option("--config", config_path, "key=value defaults for unset flags");

    std::uint64_t th_seed = 0;
    auto* th = app.add_subcommand("theory-demo", "identifiability experiments");
    th->add_option("--seed", th_seed, "experiment seed");
    th->add_option("--config", config_path, "key=value defaults for unset flags");

    try {
        auto args = merge_config_args(argc, argv);
        std::reverse(args.begin(), args.end());   // CLI11's vector overload wants reversed args
        app.parse(args);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gd);
        if (tr->parsed()) return cmd_train(ta);
        if (xf->parsed()) return cmd_transfer(xa);
        if (ev->parsed()) return cmd_eval(ea);
        if (gc->parsed()) return cmd_grad_check(gc_seeds, gc_seed, gc_tol);
        if (th->parsed()) return cmd_theory_demo(th_seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "diverged: %s\n", e.what());
        return 4;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}
