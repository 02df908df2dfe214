#include "ntm/lifelong.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ntm/checkpoint.hpp"
#include "ntm/eval.hpp"

namespace ntm {

namespace fs = std::filesystem;

DocNadeParams KbEntry::params() const {
    DocNadeParams p;
    p.W = W;
    p.U = U;
    p.b = b;
    p.c = c;
    p.activation = activation;
    return p;
}

ProjectionSet ProjectionSet::identity(std::size_t hidden, std::size_t sources) {
    ProjectionSet ps;
    ps.P_W.assign(sources, Matrix(hidden, hidden));
    ps.P_U.assign(sources, Matrix(hidden, hidden));
    for (std::size_t t = 0; t < sources; ++t)
        for (std::size_t k = 0; k < hidden; ++k) {
            ps.P_W[t](k, k) = 1.0;
            ps.P_U[t](k, k) = 1.0;
        }
    return ps;
}

SharedVocab shared_vocabulary(const Vocabulary& target, const Vocabulary& source) {
    SharedVocab shared;
    for (std::size_t j = 0; j < target.size(); ++j) {
        const int src = source.id_of(target.token(j));
        if (src >= 0) shared.emplace_back(static_cast<int>(j), src);
    }
    return shared;
}

Vec embtf_prior(int target_word, const KnowledgeBase& kb, const Vocabulary& target_vocab,
                const std::vector<double>& lambda_embtf) {
    if (lambda_embtf.size() != kb.size())
        throw std::runtime_error("embtf_prior: weight list length != number of sources");
    std::size_t hidden = 0;
    for (const auto& e : kb.entries) hidden = std::max(hidden, e.W.rows());
    Vec out(hidden, 0.0);
    const std::string& token = target_vocab.token(static_cast<std::size_t>(target_word));
    for (std::size_t t = 0; t < kb.size(); ++t) {
        if (lambda_embtf[t] == 0.0) continue;
        const int src = kb.entries[t].vocab.id_of(token);
        if (src < 0) continue;
        for (std::size_t k = 0; k < kb.entries[t].W.rows(); ++k)
            out[k] += lambda_embtf[t] * kb.entries[t].W(k, static_cast<std::size_t>(src));
    }
    return out;
}

Matrix build_embtf_prior(const KnowledgeBase& kb, const Vocabulary& target_vocab,
                         const std::vector<double>& lambda_embtf, std::size_t hidden) {
    Matrix prior(hidden, target_vocab.size(), 0.0);
    if (lambda_embtf.size() != kb.size())
        throw std::runtime_error("build_embtf_prior: weight list length != number of sources");
    for (std::size_t t = 0; t < kb.size(); ++t) {
        if (lambda_embtf[t] == 0.0) continue;
        const KbEntry& e = kb.entries[t];
        if (e.W.rows() != hidden)
            throw std::runtime_error("build_embtf_prior: hidden size mismatch with source");
        const SharedVocab shared = shared_vocabulary(target_vocab, e.vocab);
        for (const auto& [tgt, src] : shared)
            for (std::size_t k = 0; k < hidden; ++k)
                prior(k, static_cast<std::size_t>(tgt)) +=
                    lambda_embtf[t] * e.W(k, static_cast<std::size_t>(src));
    }
    return prior;
}

std::vector<bool> sal_select(const std::vector<Document>& source_docs,
                             const DocNadeParams& current, double ppl_old) {
    std::vector<bool> beta(source_docs.size(), false);
    for (std::size_t i = 0; i < source_docs.size(); ++i) {
        if (source_docs[i].word_ids.empty())
            throw std::runtime_error("sal_select: empty source document");
        const double ll = log_likelihood(source_docs[i], current);
        const double ppl_new = std::exp(-ll / static_cast<double>(source_docs[i].length()));
        beta[i] = ppl_new < ppl_old;  // strict; equality keeps beta = 0
    }
    return beta;
}

double sal_loss(const std::vector<std::vector<Document>>& source_docs,
                const std::vector<std::vector<bool>>& beta,
                const DocNadeParams& current, const std::vector<double>& lambda_sal) {
    if (source_docs.size() != beta.size() || source_docs.size() != lambda_sal.size())
        throw std::runtime_error("sal_loss: per-source list sizes disagree");
    double loss = 0.0;
    for (std::size_t t = 0; t < source_docs.size(); ++t) {
        if (lambda_sal[t] == 0.0) continue;
        for (std::size_t i = 0; i < source_docs[t].size(); ++i)
            if (beta[t][i]) loss -= lambda_sal[t] * log_likelihood(source_docs[t][i], current);
    }
    return loss;
}

RkResult rk_penalty(const DocNadeParams& current, const KnowledgeBase& kb,
                    const ProjectionSet& projections, const Vocabulary& target_vocab,
                    const std::vector<double>& lambda_rk) {
    if (lambda_rk.size() != kb.size() || projections.P_W.size() != kb.size())
        throw std::runtime_error("rk_penalty: per-source list sizes disagree");
    const std::size_t H = current.hidden_size();
    RkResult r;
    r.dW = Matrix(H, current.vocab_size());
    r.dU = Matrix(current.vocab_size(), H);
    r.dP_W.assign(kb.size(), Matrix(H, H));
    r.dP_U.assign(kb.size(), Matrix(H, H));

    Vec proj(H), resid(H), back(H);
    for (std::size_t t = 0; t < kb.size(); ++t) {
        const double lam = lambda_rk[t];
        if (lam == 0.0) continue;
        const KbEntry& e = kb.entries[t];
        const SharedVocab shared = shared_vocabulary(target_vocab, e.vocab);
        const Matrix& PW = projections.P_W[t];
        const Matrix& PU = projections.P_U[t];
        for (const auto& [tgt, src] : shared) {
            const std::size_t jt = static_cast<std::size_t>(tgt);
            const std::size_t js = static_cast<std::size_t>(src);
            // encoding side: columns of W are the word vectors
            Vec wcol(H);
            for (std::size_t k = 0; k < H; ++k) wcol[k] = current.W(k, jt);
            std::fill(proj.begin(), proj.end(), 0.0);
            gemv_add(PW, wcol.data(), proj.data());
            for (std::size_t k = 0; k < H; ++k) {
                resid[k] = proj[k] - e.W(k, js);
                r.penalty += lam * resid[k] * resid[k];
            }
            std::fill(back.begin(), back.end(), 0.0);
            gemv_t_add(PW, resid.data(), back.data());
            for (std::size_t k = 0; k < H; ++k) r.dW(k, jt) += 2.0 * lam * back[k];
            ger_add(r.dP_W[t], resid.data(), wcol.data(), 2.0 * lam);

            // decoding side: rows of U play the same role
            const double* urow = current.U.row(jt);
            std::fill(proj.begin(), proj.end(), 0.0);
            gemv_add(PU, urow, proj.data());
            for (std::size_t k = 0; k < H; ++k) {
                resid[k] = proj[k] - e.U(js, k);
                r.penalty += lam * resid[k] * resid[k];
            }
            std::fill(back.begin(), back.end(), 0.0);
            gemv_t_add(PU, resid.data(), back.data());
            double* durow = r.dU.row(jt);
            for (std::size_t k = 0; k < H; ++k) durow[k] += 2.0 * lam * back[k];
            ger_add(r.dP_U[t], resid.data(), urow, 2.0 * lam);
        }
    }
    return r;
}

ConsolidatedResult consolidated_loss(const Document& target_doc,
                                     const std::vector<std::vector<Document>>& source_docs,
                                     const DocNadeParams& current,
                                     const ProjectionSet& projections,
                                     const KnowledgeBase& kb,
                                     const Vocabulary& target_vocab,
                                     const LifelongConfig& cfg,
                                     const LifelongWeights& weights) {
    ConsolidatedResult out;

    Matrix prior;
    const Matrix* prior_ptr = nullptr;
    if (cfg.embtf && kb.size() > 0) {
        prior = build_embtf_prior(kb, target_vocab, weights.embtf, current.hidden_size());
        prior_ptr = &prior;
    }

    double target_nll = 0.0;
    out.grad = gradients(target_doc, current, &target_nll, prior_ptr);
    out.loss = target_nll;

    out.beta.assign(kb.size(), {});
    if (cfg.sal && kb.size() > 0) {
        if (source_docs.size() != kb.size())
            throw std::runtime_error("consolidated_loss: source doc lists != sources");
        for (std::size_t t = 0; t < kb.size(); ++t) {
            out.beta[t] = sal_select(source_docs[t], current, kb.entries[t].ppl);
            const double lam = weights.sal[t];
            if (lam == 0.0) continue;
            for (std::size_t i = 0; i < source_docs[t].size(); ++i) {
                if (!out.beta[t][i]) continue;
                double nll = 0.0;
                DocNadeGradients g = gradients(source_docs[t][i], current, &nll);
                out.grad.accumulate(g, lam);
                out.loss += lam * nll;
            }
        }
    }

    if (cfg.rk && kb.size() > 0) {
        RkResult rk = rk_penalty(current, kb, projections, target_vocab, weights.rk);
        out.loss += rk.penalty;
        for (std::size_t i = 0; i < out.grad.W.size(); ++i)
            out.grad.W.data()[i] += rk.dW.data()[i];
        for (std::size_t i = 0; i < out.grad.U.size(); ++i)
            out.grad.U.data()[i] += rk.dU.data()[i];
        out.dP_W = std::move(rk.dP_W);
        out.dP_U = std::move(rk.dP_U);
    }
    return out;
}

void kb_append(KnowledgeBase& kb, const DocNadeParams& effective, const std::string& name,
               const Corpus& test_split, const Corpus& train_split,
               const Vocabulary& vocab, std::size_t sal_cap) {
    KbEntry entry;
    entry.name = name;
    entry.W = effective.W;
    entry.U = effective.U;
    entry.b = effective.b;
    entry.c = effective.c;
    entry.activation = effective.activation;
    entry.vocab = vocab;

    CtxModel wrap;
    wrap.kind = ModelKind::docnade;
    wrap.dn = effective;
    entry.ppl = perplexity(test_split, wrap);

    const std::size_t keep = std::min(sal_cap, train_split.documents.size());
    entry.sal_docs.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i)
        entry.sal_docs.push_back(decode_document(train_split.documents[i], vocab));

    kb.entries.push_back(std::move(entry));
}

LifelongWeights stage_weights(const std::vector<DatasetStage>& stages,
                              std::size_t target_index, const LifelongConfig& cfg) {
    LifelongWeights w;
    for (std::size_t t = 0; t < target_index; ++t) {
        const DatasetStage& s = stages[t];
        w.embtf.push_back(s.embtf_weight.value_or(cfg.lambda_embtf));
        w.sal.push_back(s.sal_weight.value_or(cfg.lambda_sal));
        w.rk.push_back(s.rk_weight.value_or(cfg.lambda_rk));
    }
    return w;
}

namespace {

// target parameters expressed in a source's vocabulary; words the target
// never saw get zero rows/columns
DocNadeParams restrict_to_source(const DocNadeParams& eff, const Vocabulary& target_vocab,
                                 const Vocabulary& source_vocab) {
    const std::size_t H = eff.hidden_size();
    const std::size_t Vs = source_vocab.size();
    DocNadeParams p;
    p.W = Matrix(H, Vs);
    p.U = Matrix(Vs, H);
    p.b = eff.b;
    p.c.assign(Vs, 0.0);
    p.activation = eff.activation;
    for (std::size_t j = 0; j < Vs; ++j) {
        const int tgt = target_vocab.id_of(source_vocab.token(j));
        if (tgt < 0) continue;
        const std::size_t jt = static_cast<std::size_t>(tgt);
        for (std::size_t k = 0; k < H; ++k) {
            p.W(k, j) = eff.W(k, jt);
            p.U(j, k) = eff.U(jt, k);
        }
        p.c[j] = eff.c[jt];
    }
    return p;
}

std::vector<Document> reencode_tokens(const std::vector<std::vector<std::string>>& docs,
                                      const Vocabulary& vocab) {
    std::vector<Document> out;
    for (const auto& tokens : docs) {
        Document d;
        for (const auto& tok : tokens) {
            const int id = vocab.id_of(tok);
            if (id >= 0) d.word_ids.push_back(id);
        }
        if (!d.word_ids.empty()) out.push_back(std::move(d));
    }
    return out;
}

double source_ir(const DocNadeParams& params, const DatasetStage& stage, double fraction,
                 std::size_t threads) {
    CtxModel wrap;
    wrap.kind = ModelKind::docnade;
    wrap.dn = params;
    const auto train_reps = corpus_representations(stage.train, wrap, nullptr, threads);
    const auto test_reps = corpus_representations(stage.test, wrap, nullptr, threads);
    const auto prec = ir_precision(train_reps, stage.train, test_reps, stage.test,
                                   {fraction}, threads);
    return prec.begin()->second;
}

}  // namespace

SequenceResult run_sequence(const std::vector<DatasetStage>& stages,
                            const LifelongConfig& cfg) {
    if (stages.empty()) throw std::runtime_error("run_sequence: no datasets");
    SequenceResult res;
    KnowledgeBase& kb = res.kb;

    for (std::size_t s = 0; s < stages.size(); ++s) {
        const DatasetStage& stage = stages[s];
        StageReport report;
        report.target = stage.name;
        const LifelongWeights weights = stage_weights(stages, s, cfg);
        const std::size_t H = cfg.hidden;

        for (std::size_t t = 0; t < kb.size(); ++t)
            if (shared_vocabulary(stage.vocab, kb.entries[t].vocab).empty())
                report.warnings.push_back("source '" + kb.entries[t].name +
                                          "' shares no vocabulary with '" + stage.name +
                                          "'; it contributes nothing");

        Matrix prior;
        bool have_prior = false;
        if (cfg.embtf && kb.size() > 0) {
            prior = build_embtf_prior(kb, stage.vocab, weights.embtf, H);
            have_prior = true;
        }

        // replay pools re-encoded in the target vocabulary, one per source
        std::vector<std::vector<Document>> pools;
        if (cfg.sal) {
            pools.resize(kb.size());
            for (std::size_t t = 0; t < kb.size(); ++t)
                pools[t] = reencode_tokens(kb.entries[t].sal_docs, stage.vocab);
        }

        ProjectionSet projections;
        if (cfg.rk && kb.size() > 0)
            projections = ProjectionSet::identity(H, kb.size());

        Rng init_rng(cfg.base.seed + s);
        CtxModel model = make_model(ModelKind::docnade, H, stage.vocab.size(), 1,
                                    cfg.base.activation, 0.0, init_rng);
        TrainConfig tcfg = cfg.base;
        tcfg.seed = cfg.base.seed + s;
        tcfg.pretrain_epochs = 0;  // no LM side in lifelong training

        TrainHooks hooks;
        const bool sal_active = cfg.sal && !pools.empty();
        const bool rk_active = cfg.rk && kb.size() > 0;
        hooks.embedding_prior = have_prior ? &prior : nullptr;
        if (sal_active && !cfg.sal_per_step) {
            hooks.epoch_extra_docs =
                [&](const CtxModel& m) {
                    std::vector<std::pair<const Document*, double>> extras;
                    for (std::size_t t = 0; t < pools.size(); ++t) {
                        if (weights.sal[t] == 0.0 || pools[t].empty()) continue;
                        const auto beta = sal_select(pools[t], m.dn, kb.entries[t].ppl);
                        for (std::size_t i = 0; i < pools[t].size(); ++i)
                            if (beta[i]) extras.push_back({&pools[t][i], weights.sal[t]});
                    }
                    return extras;
                };
        }
        if (rk_active || (sal_active && cfg.sal_per_step)) {
            hooks.per_step = [&](const CtxModel& m, CtxGradients& g, double lr) {
                if (sal_active && cfg.sal_per_step) {
                    for (std::size_t t = 0; t < pools.size(); ++t) {
                        if (weights.sal[t] == 0.0 || pools[t].empty()) continue;
                        const auto beta = sal_select(pools[t], m.dn, kb.entries[t].ppl);
                        for (std::size_t i = 0; i < pools[t].size(); ++i) {
                            if (!beta[i]) continue;
                            DocNadeGradients dg = gradients(pools[t][i], m.dn);
                            g.dn.accumulate(dg, weights.sal[t]);
                        }
                    }
                }
                if (rk_active) {
                    RkResult rk =
                        rk_penalty(m.dn, kb, projections, stage.vocab, weights.rk);
                    for (std::size_t i = 0; i < g.dn.W.size(); ++i)
                        g.dn.W.data()[i] += rk.dW.data()[i];
                    for (std::size_t i = 0; i < g.dn.U.size(); ++i)
                        g.dn.U.data()[i] += rk.dU.data()[i];
                    for (std::size_t t = 0; t < kb.size(); ++t) {
                        for (std::size_t i = 0; i < projections.P_W[t].size(); ++i)
                            projections.P_W[t].data()[i] -= lr * rk.dP_W[t].data()[i];
                        for (std::size_t i = 0; i < projections.P_U[t].size(); ++i)
                            projections.P_U[t].data()[i] -= lr * rk.dP_U[t].data()[i];
                    }
                }
            };
        }

        const bool any_hook = hooks.embedding_prior || hooks.epoch_extra_docs || hooks.per_step;
        TrainResult tr = train(stage.train, stage.valid, std::move(model), tcfg,
                               any_hook ? &hooks : nullptr);
        report.best_val_ppl = tr.best_val_ppl;
        report.log = tr.log;

        DocNadeParams effective = tr.model.dn;
        if (have_prior)
            for (std::size_t i = 0; i < effective.W.size(); ++i)
                effective.W.data()[i] += prior.data()[i];

        CtxModel eff_model;
        eff_model.kind = ModelKind::docnade;
        eff_model.dn = effective;
        report.test_ppl = perplexity(stage.test, eff_model);
        if (cfg.eval_ir)
            report.test_ir = source_ir(effective, stage, cfg.ir_fraction, cfg.base.threads);

        // forgetting: re-evaluate every earlier dataset under the new parameters
        for (std::size_t r = 0; r < kb.size(); ++r) {
            ForgettingEntry f;
            f.source = kb.entries[r].name;
            f.ppl_before = kb.entries[r].ppl;
            const DocNadeParams restricted =
                restrict_to_source(effective, stage.vocab, stages[r].vocab);
            CtxModel rmodel;
            rmodel.kind = ModelKind::docnade;
            rmodel.dn = restricted;
            f.ppl_after = perplexity(stages[r].test, rmodel);
            if (cfg.eval_ir) {
                f.ir_before = res.stages[r].test_ir;
                f.ir_after = source_ir(restricted, stages[r], cfg.ir_fraction,
                                       cfg.base.threads);
            }
            report.forgetting.push_back(std::move(f));
        }

        kb_append(kb, effective, stage.name, stage.test, stage.train, stage.vocab,
                  cfg.sal_cap);
        res.stage_models.push_back(std::move(effective));
        res.stages.push_back(std::move(report));
    }
    return res;
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

void KnowledgeBase::save(const std::string& dir) const {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw std::runtime_error("knowledge base: cannot write manifest");
    for (std::size_t t = 0; t < entries.size(); ++t) {
        const KbEntry& e = entries[t];
        const std::string stem = "entry_" + std::to_string(t);
        Checkpoint ck;
        ck.set_meta("kind", "docnade");
        ck.set_meta("head", "linear");
        ck.set_meta_int("H", static_cast<long>(e.W.rows()));
        ck.set_meta_int("V", static_cast<long>(e.W.cols()));
        ck.set_meta("activation", to_string(e.activation));
        ck.set_meta_double("lambda", 0.0);
        ck.set_meta_int("depth", 1);
        ck.set_meta_int("version", 1);
        ck.add_tensor("W", e.W);
        ck.add_tensor("U", e.U);
        ck.add_vector("b", e.b);
        ck.add_vector("c", e.c);
        ck.save((fs::path(dir) / (stem + "_model.ckpt")).string());
        e.vocab.save((fs::path(dir) / (stem + "_vocab.txt")).string());
        std::ofstream sal(fs::path(dir) / (stem + "_sal.txt"));
        for (const auto& tokens : e.sal_docs) {
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                if (i) sal << ' ';
                sal << tokens[i];
            }
            sal << '\n';
        }
        manifest << e.name << '\t' << stem + "_model.ckpt" << '\t' << stem + "_vocab.txt"
                 << '\t' << format_double(e.ppl) << '\t' << stem + "_sal.txt" << '\t'
                 << e.sal_docs.size() << '\n';
    }
}

KnowledgeBase KnowledgeBase::load(const std::string& dir) {
    std::ifstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw std::runtime_error("knowledge base: cannot read manifest in " + dir);
    KnowledgeBase kb;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string name, model_file, vocab_file, ppl_str, sal_file, count_str;
        if (!std::getline(ss, name, '\t') || !std::getline(ss, model_file, '\t') ||
            !std::getline(ss, vocab_file, '\t') || !std::getline(ss, ppl_str, '\t') ||
            !std::getline(ss, sal_file, '\t'))
            throw std::runtime_error("knowledge base: malformed manifest line");
        std::getline(ss, count_str, '\t');

        KbEntry e;
        e.name = name;
        Checkpoint ck = Checkpoint::load((fs::path(dir) / model_file).string());
        e.W = ck.tensor("W");
        e.U = ck.tensor("U");
        e.b = ck.vector("b");
        e.c = ck.vector("c");
        e.activation = activation_from_string(ck.meta_at("activation"));
        e.ppl = std::strtod(ppl_str.c_str(), nullptr);
        e.vocab = Vocabulary::load((fs::path(dir) / vocab_file).string());
        std::ifstream sal(fs::path(dir) / sal_file);
        std::string doc_line;
        while (std::getline(sal, doc_line)) {
            if (doc_line.empty()) continue;
            std::stringstream ds(doc_line);
            std::vector<std::string> tokens;
            std::string tok;
            while (ds >> tok) tokens.push_back(tok);
            if (!tokens.empty()) e.sal_docs.push_back(std::move(tokens));
        }
        kb.entries.push_back(std::move(e));
    }
    return kb;
}

}  // namespace ntm
