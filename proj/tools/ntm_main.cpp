// Command-line front end: ingest -> train -> eval/topics/repr, plus lifelong
// sequence training. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ntm/checkpoint.hpp"
#include "ntm/corpus.hpp"
#include "ntm/ctx_model.hpp"
#include "ntm/eval.hpp"
#include "ntm/lifelong.hpp"

namespace fs = std::filesystem;
using namespace ntm;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_readable(const std::string& path, const std::string& what) {
    if (path.empty()) throw UsageError(what + " path missing");
    std::ifstream in(path);
    if (!in) throw UsageError(what + " not readable: " + path);
}

std::vector<double> parse_fractions(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::strtod(item.c_str(), nullptr));
    }
    if (out.empty()) throw UsageError("no fractions given");
    return out;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string train_path, valid_path, test_path, outdir;
    std::string mode = "fv";
    std::size_t max_vocab = 2000;
    std::string stopwords_path;
    bool keep_case = false;
};

int cmd_ingest(const IngestArgs& a) {
    require_readable(a.train_path, "--train");
    if (!a.valid_path.empty()) require_readable(a.valid_path, "--valid");
    if (!a.test_path.empty()) require_readable(a.test_path, "--test");
    if (a.outdir.empty()) throw UsageError("--outdir missing");
    if (!a.stopwords_path.empty()) require_readable(a.stopwords_path, "--stopwords");

    fs::create_directories(a.outdir);
    const VocabMode mode = a.mode == "rv" ? VocabMode::RV : VocabMode::FV;
    const std::set<std::string> stopwords = a.stopwords_path.empty()
                                                ? default_stopwords()
                                                : load_stopwords(a.stopwords_path);

    const auto raw_train = read_raw_corpus(a.train_path, !a.keep_case);
    Vocabulary vocab = build_vocabulary(raw_train, mode, a.max_vocab, stopwords);
    vocab.save((fs::path(a.outdir) / "vocab.txt").string());
    std::cout << "vocabulary: " << vocab.size() << " tokens ("
              << (mode == VocabMode::RV ? "rv" : "fv") << ")\n";

    auto encode_split = [&](const std::string& path, Split split, const std::string& name) {
        if (path.empty()) return;
        const auto raw = path == a.train_path ? raw_train : read_raw_corpus(path, !a.keep_case);
        EncodeReport rep;
        Corpus corpus = encode_corpus(raw, vocab, split, &rep);
        write_encoded_corpus(corpus, (fs::path(a.outdir) / (name + ".ids")).string());
        std::cout << name << ": " << rep.documents_kept << '/' << rep.documents_in
                  << " documents kept, " << rep.documents_dropped_empty
                  << " dropped empty, " << rep.tokens_dropped_oov << " tokens oov\n";
    };
    encode_split(a.train_path, Split::train, "train");
    encode_split(a.valid_path, Split::validation, "valid");
    encode_split(a.test_path, Split::test, "test");
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string train_path, valid_path, vocab_path, out_path = "model.ckpt";
    std::string log_path;
    std::string model = "docnade", head = "linear";
    std::size_t hidden = 200;
    double lr = 0.001;
    std::size_t iters = 2000;
    long epochs = -1;  // when >= 0, overrides iters
    long pretrain_epochs = -1;
    std::string activation = "sigmoid";
    double lambda = 0.0;
    std::string optimizer = "sgd";
    std::size_t minibatch = 1;
    std::size_t depth = 1;
    std::string embeddings_path;
    double clip = 5.0;
    std::uint64_t seed = 42;
    std::size_t threads = 1;
};

int cmd_train(const TrainArgs& a) {
    require_readable(a.train_path, "--train");
    require_readable(a.valid_path, "--valid");
    require_readable(a.vocab_path, "--vocab");
    const ModelKind kind = model_kind_from_string(a.model);
    if (kind == ModelKind::ctx_e) require_readable(a.embeddings_path, "--embeddings");

    const Vocabulary vocab = Vocabulary::load(a.vocab_path);
    const Corpus train_set = read_encoded_corpus(a.train_path, vocab, Split::train);
    const Corpus valid_set = read_encoded_corpus(a.valid_path, vocab, Split::validation);

    TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.activation = activation_from_string(a.activation);
    cfg.optimizer = optimizer_from_string(a.optimizer);
    cfg.seed = a.seed;
    cfg.minibatch = a.minibatch;
    cfg.lm_grad_clip = a.clip;
    cfg.threads = a.threads;
    const std::size_t steps_per_epoch =
        (train_set.size() + a.minibatch - 1) / a.minibatch;
    cfg.iterations = a.epochs >= 0 ? static_cast<std::size_t>(a.epochs) * steps_per_epoch
                                   : a.iters;
    cfg.pretrain_epochs = a.pretrain_epochs >= 0
                              ? static_cast<std::size_t>(a.pretrain_epochs)
                              : (kind == ModelKind::docnade ? 0 : 10);

    Matrix emb;
    const Matrix* embp = nullptr;
    if (kind == ModelKind::ctx_e) {
        EmbeddingMatrix loaded = load_embeddings(a.embeddings_path, vocab, a.hidden);
        std::cout << "embeddings: coverage " << loaded.coverage << '\n';
        emb = std::move(loaded.values);
        embp = &emb;
    }

    Rng rng(a.seed);
    CtxModel model = make_model(kind, a.hidden, vocab.size(), a.depth, cfg.activation,
                                a.lambda, rng, embp,
                                a.head == "tree" ? OutputHead::tree : OutputHead::linear);
    TrainResult result = train(train_set, valid_set, std::move(model), cfg);

    save_model(result.model, a.out_path);
    if (!a.log_path.empty()) {
        std::ofstream log(a.log_path);
        for (const auto& e : result.log)
            log << e.epoch << '\t' << format_double(e.train_loss) << '\t'
                << format_double(e.val_ppl) << '\n';
    }
    std::cout << "best validation ppl " << result.best_val_ppl << " at epoch "
              << result.best_epoch << "; checkpoint written to " << a.out_path << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint, vocab_path, test_path, train_path;
    std::string metrics = "ppl";
    std::string fractions = "0.0001,0.005,0.01,0.02,0.05";
    std::size_t window = 20;
    std::size_t top_n = 10;
    double l2_weight = 1e-4;
    std::string out_path = "eval_report.txt";
    std::string ir_csv_path;
    std::size_t threads = 1;
};

int cmd_eval(const EvalArgs& a) {
    require_readable(a.checkpoint, "--checkpoint");
    require_readable(a.vocab_path, "--vocab");
    require_readable(a.test_path, "--test");

    std::set<std::string> wanted;
    {
        std::stringstream ss(a.metrics);
        std::string m;
        while (std::getline(ss, m, ',')) wanted.insert(m);
    }
    const bool need_train = wanted.count("ir") || wanted.count("f1");
    if (need_train) {
        require_readable(a.train_path, "--train");
        if (a.train_path == a.test_path)
            throw UsageError("ir/f1 need disjoint --train and --test splits");
    }

    const Vocabulary vocab = Vocabulary::load(a.vocab_path);
    const CtxModel model = load_model(a.checkpoint);
    if (model.vocab_size() != vocab.size())
        throw UsageError("vocabulary size disagrees with the checkpoint");
    const Corpus test_set = read_encoded_corpus(a.test_path, vocab, Split::test);

    EvalReport report;
    report.metadata["model_kind"] = to_string(model.kind);
    report.metadata["lambda_train"] = format_double(model.lambda);
    report.metadata["lambda_eval_ppl"] = "0";
    report.metadata["dataset"] = a.test_path;

    if (wanted.count("ppl")) report.ppl = perplexity(test_set, model, nullptr, &report.nll);

    if (wanted.count("coherence")) {
        std::vector<std::vector<int>> topics;
        for (std::size_t k = 0; k < model.hidden_size(); ++k)
            topics.push_back(topic_words(model.dn, k, a.top_n));
        const CoherenceResult coh = npmi_coherence(topics, test_set, a.window, a.threads);
        report.coherence_per_topic = coh.per_topic;
        report.coherence_mean = coh.mean;
        report.coherence_skipped_pairs = coh.skipped_pairs;
    }

    if (need_train) {
        const Corpus train_set = read_encoded_corpus(a.train_path, vocab, Split::train);
        const auto train_reps = corpus_representations(train_set, model, nullptr, a.threads);
        const auto test_reps = corpus_representations(test_set, model, nullptr, a.threads);
        if (wanted.count("ir"))
            report.ir = ir_precision(train_reps, train_set, test_reps, test_set,
                                     parse_fractions(a.fractions), a.threads);
        if (wanted.count("f1"))
            report.f1 = f1_classify(train_reps, single_labels(train_set), test_reps,
                                    single_labels(test_set), a.l2_weight);
    }

    report.save(a.out_path);
    if (!a.ir_csv_path.empty()) report.save_ir_csv(a.ir_csv_path);
    if (wanted.count("ppl")) std::cout << "ppl " << report.ppl << '\n';
    if (wanted.count("coherence")) std::cout << "coherence " << report.coherence_mean << '\n';
    for (const auto& [f, p] : report.ir) std::cout << "ir@" << f << ' ' << p << '\n';
    if (report.f1 >= 0) std::cout << "f1 " << report.f1 << '\n';
    std::cout << "report written to " << a.out_path << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct LifelongArgs {
    std::string manifest, outdir = "kb";
    bool embtf = false, sal = false, rk = false;
    double lambda_embtf = 1.0, lambda_sal = 1.0, lambda_rk = 1.0;
    std::size_t hidden = 200;
    double lr = 0.001;
    std::size_t iters = 2000;
    std::string activation = "sigmoid";
    std::string optimizer = "sgd";
    std::uint64_t seed = 42;
    std::size_t minibatch = 1;
    std::size_t sal_cap = 10000;
    bool sal_per_step = false;
    double ir_fraction = 0.02;
    bool no_ir = false;
    std::size_t threads = 1;
};

std::vector<DatasetStage> read_manifest(const std::string& path) {
    std::ifstream in(path);
    std::vector<DatasetStage> stages;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string name, train_p, valid_p, test_p, vocab_p, overrides;
        if (!std::getline(ss, name, '\t') || !std::getline(ss, train_p, '\t') ||
            !std::getline(ss, valid_p, '\t') || !std::getline(ss, test_p, '\t') ||
            !std::getline(ss, vocab_p, '\t'))
            throw std::runtime_error("manifest line " + std::to_string(lineno) +
                                     ": expected name, train, valid, test, vocab");
        std::getline(ss, overrides, '\t');
        for (const auto& [p, what] :
             {std::pair{train_p, "train"}, {valid_p, "valid"}, {test_p, "test"},
              {vocab_p, "vocab"}})
            require_readable(p, std::string(what) + " (manifest line " +
                                    std::to_string(lineno) + ")");

        DatasetStage stage;
        stage.name = name;
        stage.vocab = Vocabulary::load(vocab_p);
        stage.train = read_encoded_corpus(train_p, stage.vocab, Split::train);
        stage.valid = read_encoded_corpus(valid_p, stage.vocab, Split::validation);
        stage.test = read_encoded_corpus(test_p, stage.vocab, Split::test);
        if (!overrides.empty()) {
            std::stringstream os(overrides);
            std::string kv;
            while (std::getline(os, kv, ';')) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = kv.substr(0, eq);
                const double value = std::strtod(kv.c_str() + eq + 1, nullptr);
                if (key == "embtf") stage.embtf_weight = value;
                else if (key == "sal") stage.sal_weight = value;
                else if (key == "rk") stage.rk_weight = value;
            }
        }
        stages.push_back(std::move(stage));
    }
    return stages;
}

int cmd_lifelong(const LifelongArgs& a) {
    require_readable(a.manifest, "--manifest");
    const auto stages = read_manifest(a.manifest);
    if (stages.empty()) throw UsageError("manifest lists no datasets");

    LifelongConfig cfg;
    cfg.embtf = a.embtf;
    cfg.sal = a.sal;
    cfg.rk = a.rk;
    cfg.lambda_embtf = a.lambda_embtf;
    cfg.lambda_sal = a.lambda_sal;
    cfg.lambda_rk = a.lambda_rk;
    cfg.hidden = a.hidden;
    cfg.base.learning_rate = a.lr;
    cfg.base.iterations = a.iters;
    cfg.base.activation = activation_from_string(a.activation);
    cfg.base.optimizer = optimizer_from_string(a.optimizer);
    cfg.base.seed = a.seed;
    cfg.base.minibatch = a.minibatch;
    cfg.base.threads = a.threads;
    cfg.sal_cap = a.sal_cap;
    cfg.sal_per_step = a.sal_per_step;
    cfg.ir_fraction = a.ir_fraction;
    cfg.eval_ir = !a.no_ir;

    const SequenceResult result = run_sequence(stages, cfg);
    fs::create_directories(a.outdir);
    result.kb.save(a.outdir);

    for (std::size_t s = 0; s < result.stages.size(); ++s) {
        const StageReport& r = result.stages[s];
        std::ofstream out(fs::path(a.outdir) /
                          ("stage_" + std::to_string(s) + "_" + r.target + ".txt"));
        out << "target=" << r.target << '\n';
        out << "test_ppl=" << format_double(r.test_ppl) << '\n';
        if (r.test_ir >= 0) out << "test_ir=" << format_double(r.test_ir) << '\n';
        out << "best_val_ppl=" << format_double(r.best_val_ppl) << '\n';
        for (const auto& f : r.forgetting) {
            out << "forget_" << f.source << "_ppl_before=" << format_double(f.ppl_before)
                << '\n';
            out << "forget_" << f.source << "_ppl_after=" << format_double(f.ppl_after)
                << '\n';
            if (f.ir_before >= 0) {
                out << "forget_" << f.source << "_ir_before=" << format_double(f.ir_before)
                    << '\n';
                out << "forget_" << f.source << "_ir_after=" << format_double(f.ir_after)
                    << '\n';
            }
        }
        for (const auto& w : r.warnings) out << "warning=" << w << '\n';
        std::ofstream log(fs::path(a.outdir) /
                          ("stage_" + std::to_string(s) + "_metrics.tsv"));
        for (const auto& e : r.log)
            log << e.epoch << '\t' << format_double(e.train_loss) << '\t'
                << format_double(e.val_ppl) << '\n';
        std::cout << "stage " << s << " (" << r.target << "): test ppl " << r.test_ppl;
        if (r.test_ir >= 0) std::cout << ", ir@" << a.ir_fraction << ' ' << r.test_ir;
        std::cout << '\n';
        for (const auto& f : r.forgetting)
            std::cout << "  " << f.source << ": ppl " << f.ppl_before << " -> "
                      << f.ppl_after << '\n';
        for (const auto& w : r.warnings) std::cout << "  warning: " << w << '\n';
    }
    std::cout << "knowledge base written to " << a.outdir << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct TopicsArgs {
    std::string checkpoint, vocab_path;
    std::size_t top_n = 10;
};

int cmd_topics(const TopicsArgs& a) {
    require_readable(a.checkpoint, "--checkpoint");
    require_readable(a.vocab_path, "--vocab");
    const Vocabulary vocab = Vocabulary::load(a.vocab_path);
    const CtxModel model = load_model(a.checkpoint);
    if (model.vocab_size() != vocab.size())
        throw UsageError("vocabulary size disagrees with the checkpoint");
    if (a.top_n > vocab.size()) throw UsageError("--top exceeds vocabulary size");
    for (std::size_t k = 0; k < model.hidden_size(); ++k) {
        std::cout << "topic " << k << ':';
        for (int id : topic_words(model.dn, k, a.top_n))
            std::cout << ' ' << vocab.token(static_cast<std::size_t>(id));
        std::cout << '\n';
    }
    return 0;
}

struct ReprArgs {
    std::string checkpoint, vocab_path, corpus_path, out_path = "representations.csv";
    std::size_t threads = 1;
};

int cmd_repr(const ReprArgs& a) {
    require_readable(a.checkpoint, "--checkpoint");
    require_readable(a.vocab_path, "--vocab");
    require_readable(a.corpus_path, "--corpus");
    const Vocabulary vocab = Vocabulary::load(a.vocab_path);
    const CtxModel model = load_model(a.checkpoint);
    if (model.vocab_size() != vocab.size())
        throw UsageError("vocabulary size disagrees with the checkpoint");
    const Corpus corpus = read_encoded_corpus(a.corpus_path, vocab, Split::test);
    const auto reps = corpus_representations(corpus, model, nullptr, a.threads);
    std::ofstream out(a.out_path);
    for (const auto& r : reps) {
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (k) out << ',';
            out << format_double(r[k]);
        }
        out << '\n';
    }
    std::cout << reps.size() << " representations written to " << a.out_path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neural autoregressive topic models: training, lifelong sequences, evaluation"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* s_ingest = app.add_subcommand("ingest", "tokenize corpora and build a vocabulary");
    s_ingest->set_config("--config");
    s_ingest->add_option("--train", ingest.train_path)->required();
    s_ingest->add_option("--valid", ingest.valid_path);
    s_ingest->add_option("--test", ingest.test_path);
    s_ingest->add_option("--outdir", ingest.outdir)->required();
    s_ingest->add_option("--mode", ingest.mode)->check(CLI::IsMember({"rv", "fv"}));
    s_ingest->add_option("--max-vocab", ingest.max_vocab);
    s_ingest->add_option("--stopwords", ingest.stopwords_path);
    s_ingest->add_flag("--keep-case", ingest.keep_case);

    TrainArgs train_args;
    auto* s_train = app.add_subcommand("train", "train a model");
    s_train->set_config("--config");
    s_train->add_option("--train", train_args.train_path)->required();
    s_train->add_option("--valid", train_args.valid_path)->required();
    s_train->add_option("--vocab", train_args.vocab_path)->required();
    s_train->add_option("--out", train_args.out_path);
    s_train->add_option("--log", train_args.log_path);
    s_train->add_option("--model", train_args.model)
        ->check(CLI::IsMember({"docnade", "ctx", "ctx_e"}));
    s_train->add_option("--head", train_args.head)
        ->check(CLI::IsMember({"linear", "tree"}));
    s_train->add_option("--hidden", train_args.hidden);
    s_train->add_option("--lr", train_args.lr);
    s_train->add_option("--iters", train_args.iters);
    s_train->add_option("--epochs", train_args.epochs);
    s_train->add_option("--pretrain-epochs", train_args.pretrain_epochs);
    s_train->add_option("--activation", train_args.activation)
        ->check(CLI::IsMember({"sigmoid", "tanh"}));
    s_train->add_option("--lambda", train_args.lambda);
    s_train->add_option("--optimizer", train_args.optimizer)
        ->check(CLI::IsMember({"sgd", "adam"}));
    s_train->add_option("--minibatch", train_args.minibatch);
    s_train->add_option("--depth", train_args.depth);
    s_train->add_option("--embeddings", train_args.embeddings_path);
    s_train->add_option("--clip", train_args.clip);
    s_train->add_option("--seed", train_args.seed);
    s_train->add_option("--threads", train_args.threads);

    EvalArgs eval_args;
    auto* s_eval = app.add_subcommand("eval", "evaluate a checkpoint");
    s_eval->set_config("--config");
    s_eval->add_option("--checkpoint", eval_args.checkpoint)->required();
    s_eval->add_option("--vocab", eval_args.vocab_path)->required();
    s_eval->add_option("--test", eval_args.test_path)->required();
    s_eval->add_option("--train", eval_args.train_path);
    s_eval->add_option("--metrics", eval_args.metrics);
    s_eval->add_option("--fractions", eval_args.fractions);
    s_eval->add_option("--window", eval_args.window);
    s_eval->add_option("--top", eval_args.top_n);
    s_eval->add_option("--l2", eval_args.l2_weight);
    s_eval->add_option("--out", eval_args.out_path);
    s_eval->add_option("--ir-csv", eval_args.ir_csv_path);
    s_eval->add_option("--threads", eval_args.threads);

    LifelongArgs ll;
    auto* s_ll = app.add_subcommand("lifelong", "train a dataset sequence with transfers");
    s_ll->set_config("--config");
    s_ll->add_option("--manifest", ll.manifest)->required();
    s_ll->add_option("--outdir", ll.outdir);
    s_ll->add_flag("--embtf", ll.embtf);
    s_ll->add_flag("--sal", ll.sal);
    s_ll->add_flag("--rk", ll.rk);
    s_ll->add_option("--lambda-embtf", ll.lambda_embtf);
    s_ll->add_option("--lambda-sal", ll.lambda_sal);
    s_ll->add_option("--lambda-rk", ll.lambda_rk);
    s_ll->add_option("--hidden", ll.hidden);
    s_ll->add_option("--lr", ll.lr);
    s_ll->add_option("--iters", ll.iters);
    s_ll->add_option("--activation", ll.activation)
        ->check(CLI::IsMember({"sigmoid", "tanh"}));
    s_ll->add_option("--optimizer", ll.optimizer)->check(CLI::IsMember({"sgd", "adam"}));
    s_ll->add_option("--seed", ll.seed);
    s_ll->add_option("--minibatch", ll.minibatch);
    s_ll->add_option("--sal-cap", ll.sal_cap);
    s_ll->add_flag("--sal-per-step", ll.sal_per_step);
    s_ll->add_option("--ir-fraction", ll.ir_fraction);
    s_ll->add_flag("--no-ir", ll.no_ir);
    s_ll->add_option("--threads", ll.threads);

    TopicsArgs topics_args;
    auto* s_topics = app.add_subcommand("topics", "print the top words of every topic");
    s_topics->add_option("--checkpoint", topics_args.checkpoint)->required();
    s_topics->add_option("--vocab", topics_args.vocab_path)->required();
    s_topics->add_option("--top", topics_args.top_n);

    ReprArgs repr_args;
    auto* s_repr = app.add_subcommand("repr", "write one representation per document as CSV");
    s_repr->add_option("--checkpoint", repr_args.checkpoint)->required();
    s_repr->add_option("--vocab", repr_args.vocab_path)->required();
    s_repr->add_option("--corpus", repr_args.corpus_path)->required();
    s_repr->add_option("--out", repr_args.out_path);
    s_repr->add_option("--threads", repr_args.threads);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (s_ingest->parsed()) return cmd_ingest(ingest);
        if (s_train->parsed()) return cmd_train(train_args);
        if (s_eval->parsed()) return cmd_eval(eval_args);
        if (s_ll->parsed()) return cmd_lifelong(ll);
        if (s_topics->parsed()) return cmd_topics(topics_args);
        if (s_repr->parsed()) return cmd_repr(repr_args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
