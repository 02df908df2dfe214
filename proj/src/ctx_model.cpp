#include "ntm/ctx_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace ntm {

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "docnade") return ModelKind::docnade;
    if (s == "ctx") return ModelKind::ctx;
    if (s == "ctx_e") return ModelKind::ctx_e;
    throw std::runtime_error("unknown model kind: " + s);
}

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::docnade: return "docnade";
        case ModelKind::ctx: return "ctx";
        case ModelKind::ctx_e: return "ctx_e";
    }
    return "docnade";
}

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "sgd") return Optimizer::sgd;
    if (s == "adam") return Optimizer::adam;
    throw std::runtime_error("unknown optimizer: " + s);
}

CtxModel make_model(ModelKind kind, std::size_t hidden, std::size_t vocab,
                    std::size_t depth, Activation act, double lambda, Rng& rng,
                    const Matrix* pretrained_embeddings, OutputHead head) {
    if (depth < 1) throw std::runtime_error("make_model: depth must be >= 1");
    if (head == OutputHead::tree && kind != ModelKind::docnade)
        throw std::runtime_error("make_model: tree head is only supported for docnade");
    CtxModel m;
    m.kind = kind;
    m.head = head;
    m.lambda = lambda;
    m.dn = DocNadeParams::init(hidden, vocab, act, rng);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t d = 2; d <= depth; ++d) {
        Matrix wd(hidden, hidden);
        fill_uniform(wd, -scale, scale, rng);
        m.deep_W.push_back(std::move(wd));
    }
    if (kind != ModelKind::docnade) {
        m.lm = LstmParams::init(hidden, depth, rng);
        if (kind == ModelKind::ctx_e) {
            if (!pretrained_embeddings)
                throw std::runtime_error("make_model: ctx_e requires pretrained embeddings");
            if (pretrained_embeddings->rows() != hidden ||
                pretrained_embeddings->cols() != vocab)
                throw std::runtime_error("make_model: embedding matrix shape mismatch");
            m.E = *pretrained_embeddings;
        }
    }
    if (head == OutputHead::tree) {
        m.tree = BinaryTreeSoftmax::balanced(vocab, hidden);
        fill_uniform(m.tree->node_weights, -scale, scale, rng);
    }
    return m;
}

Vec combined_hidden(const Vec& h_dn, const Vec& h_lm, double lambda) {
    if (h_dn.size() != h_lm.size())
        throw std::runtime_error("combined_hidden: width mismatch");
    Vec h = h_dn;
    for (std::size_t k = 0; k < h.size(); ++k) h[k] += lambda * h_lm[k];
    return h;
}

namespace {

bool lm_active(const CtxModel& model) { return model.has_lm() && model.lambda != 0.0; }

// DocNADE states at every depth: trace[d][i] for d = 0..n-1, i = 0..N-1
std::vector<std::vector<Vec>> dn_deep_trace(const Document& doc, const CtxModel& model,
                                            const Matrix* prior) {
    std::vector<std::vector<Vec>> trace;
    trace.push_back(hidden_states(doc, model.dn, prior));
    const std::size_t H = model.hidden_size();
    for (const Matrix& wd : model.deep_W)
        if (wd.rows() != H || wd.cols() != H)
            throw std::runtime_error("deep_hidden_states: missing or misshapen W_d");
    for (const Matrix& wd : model.deep_W) {
        const auto& below = trace.back();
        std::vector<Vec> level(below.size(), Vec(H));
        for (std::size_t i = 0; i < below.size(); ++i) {
            Vec pre = model.dn.b;
            gemv_add(wd, below[i].data(), pre.data());
            for (std::size_t k = 0; k < H; ++k)
                level[i][k] = apply_activation(model.dn.activation, pre[k]);
        }
        trace.push_back(std::move(level));
    }
    return trace;
}

Vec lm_state_after_all_words(const Document& doc, const CtxModel& model) {
    const std::size_t H = model.hidden_size();
    const std::size_t L = model.lm.depth();
    std::vector<LmState> states(L, LmState::zeros(H));
    for (int v : doc.word_ids) {
        Vec x(H);
        const std::size_t col = static_cast<std::size_t>(v);
        for (std::size_t k = 0; k < H; ++k) x[k] = model.dn.W(k, col);
        if (model.embedding_mode() == EmbeddingMode::W_plus_E)
            for (std::size_t k = 0; k < H; ++k) x[k] += model.E(k, col);
        for (std::size_t l = 0; l < L; ++l) {
            states[l] = lstm_step(x, states[l], model.lm.layers[l]);
            x = states[l].h;
        }
    }
    return states[L - 1].h;
}

}  // namespace

CtxHiddenStates deep_hidden_states(const Document& doc, const CtxModel& model,
                                   const Matrix* embedding_prior) {
    CtxHiddenStates out;
    auto trace = dn_deep_trace(doc, model, embedding_prior);
    out.dn = std::move(trace.back());
    if (lm_active(model)) {
        out.lm = lm_hidden_states(doc, model.embedding_mode(), model.dn.W,
                                  model.kind == ModelKind::ctx_e ? &model.E : nullptr,
                                  model.lm);
    }
    return out;
}

double pseudo_log_likelihood(const Document& doc, const CtxModel& model,
                             const Matrix* embedding_prior) {
    CtxHiddenStates states = deep_hidden_states(doc, model, embedding_prior);
    const bool mix = !states.lm.empty();
    double ll = 0.0;
    for (std::size_t i = 0; i < doc.length(); ++i) {
        const Vec& h = mix ? combined_hidden(states.dn[i], states.lm[i], model.lambda)
                           : states.dn[i];
        ll += log_conditional(h, doc.word_ids[i], model.dn);
    }
    return ll;
}

CtxGradients CtxGradients::zeros_like(const CtxModel& model) {
    CtxGradients g;
    g.dn = DocNadeGradients::zeros_like(model.dn);
    for (const Matrix& wd : model.deep_W) g.deep_W.emplace_back(wd.rows(), wd.cols());
    g.lm = LstmGradients::zeros_like(model.lm, model.has_lm() ? model.vocab_size() : 0);
    return g;
}

void CtxGradients::accumulate(const CtxGradients& other, double s) {
    dn.accumulate(other.dn, s);
    for (std::size_t d = 0; d < deep_W.size(); ++d)
        for (std::size_t i = 0; i < deep_W[d].size(); ++i)
            deep_W[d].data()[i] += s * other.deep_W[d].data()[i];
    lm.accumulate(other.lm, s);
}

void CtxGradients::scale(double s) {
    dn.scale(s);
    for (Matrix& m : deep_W)
        for (double& x : m.data()) x *= s;
    lm.scale(s);
}

void fold_embedding_gradient(CtxGradients& g) {
    if (g.lm.W_embed.size() == 0) return;
    for (std::size_t i = 0; i < g.dn.W.size(); ++i)
        g.dn.W.data()[i] += g.lm.W_embed.data()[i];
    g.lm.W_embed.fill(0.0);
}

void clip_lm_gradient(CtxGradients& g, double max_norm) {
    if (max_norm <= 0.0 || g.lm.layers.empty()) return;
    const double norm = std::sqrt(g.lm.squared_norm());
    if (norm > max_norm) g.lm.scale(max_norm / norm);
}

CtxGradients ctx_gradients(const Document& doc, const CtxModel& model, double* nll,
                           const Matrix* embedding_prior) {
    const std::size_t N = doc.length();
    const std::size_t H = model.hidden_size();
    const std::size_t V = model.vocab_size();
    const std::size_t depth = model.depth();
    const bool mix = lm_active(model);

    auto dn_trace = dn_deep_trace(doc, model, embedding_prior);
    std::vector<Vec> lm_states;
    if (mix)
        lm_states = lm_hidden_states(doc, model.embedding_mode(), model.dn.W,
                                     model.kind == ModelKind::ctx_e ? &model.E : nullptr,
                                     model.lm);

    // forward through the decoder, keeping softmax outputs
    std::vector<Vec> combined(N);
    std::vector<Vec> ys(N);
    double ll = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        combined[i] = mix ? combined_hidden(dn_trace[depth - 1][i], lm_states[i], model.lambda)
                          : dn_trace[depth - 1][i];
        ys[i] = conditional_distribution(combined[i], model.dn);
        ll += std::log(ys[i][static_cast<std::size_t>(doc.word_ids[i])]);
    }
    if (nll) *nll = -ll;

    CtxGradients g = CtxGradients::zeros_like(model);
    std::vector<Vec> lm_upstream;
    if (mix) lm_upstream.assign(N, Vec(H, 0.0));

    Vec suffix(H, 0.0);
    Vec dh(H), da(H);
    for (std::size_t i = N; i-- > 0;) {
        Vec& r = ys[i];
        r[static_cast<std::size_t>(doc.word_ids[i])] -= 1.0;
        for (std::size_t w = 0; w < V; ++w) g.dn.c[w] += r[w];
        ger_add(g.dn.U, r.data(), combined[i].data());
        std::fill(dh.begin(), dh.end(), 0.0);
        gemv_t_add(model.dn.U, r.data(), dh.data());
        if (mix)
            for (std::size_t k = 0; k < H; ++k) lm_upstream[i][k] = model.lambda * dh[k];
        // DocNADE stack, top depth down to 2
        for (std::size_t d = depth; d-- > 1;) {
            const Vec& out = dn_trace[d][i];
            for (std::size_t k = 0; k < H; ++k)
                da[k] = dh[k] * activation_grad(model.dn.activation, out[k]);
            for (std::size_t k = 0; k < H; ++k) g.dn.b[k] += da[k];
            ger_add(g.deep_W[d - 1], da.data(), dn_trace[d - 1][i].data());
            std::fill(dh.begin(), dh.end(), 0.0);
            gemv_t_add(model.deep_W[d - 1], da.data(), dh.data());
        }
        // depth 1: running-sum layer
        for (std::size_t k = 0; k < H; ++k)
            da[k] = dh[k] * activation_grad(model.dn.activation, dn_trace[0][i][k]);
        for (std::size_t k = 0; k < H; ++k) g.dn.b[k] += da[k];
        if (i > 0) {
            for (std::size_t k = 0; k < H; ++k) suffix[k] += da[k];
            const std::size_t col = static_cast<std::size_t>(doc.word_ids[i - 1]);
            for (std::size_t k = 0; k < H; ++k) g.dn.W(k, col) += suffix[k];
        }
    }

    if (mix) {
        LstmGradients lmg = bptt_gradients(doc, lm_upstream, model.lm,
                                           model.embedding_mode(), model.dn.W,
                                           model.kind == ModelKind::ctx_e ? &model.E
                                                                          : nullptr);
        g.lm = std::move(lmg);
    }
    return g;
}

Vec combined_representation(const Document& doc, const CtxModel& model,
                            const Matrix* embedding_prior) {
    // full-document DocNADE state through the deep stack
    const std::size_t H = model.hidden_size();
    Vec h = document_representation(doc, model.dn, embedding_prior);
    for (const Matrix& wd : model.deep_W) {
        Vec pre = model.dn.b;
        gemv_add(wd, h.data(), pre.data());
        for (std::size_t k = 0; k < H; ++k)
            h[k] = apply_activation(model.dn.activation, pre[k]);
    }
    if (lm_active(model)) {
        Vec hlm = lm_state_after_all_words(doc, model);
        for (std::size_t k = 0; k < H; ++k) h[k] += model.lambda * hlm[k];
    }
    return h;
}

double validation_perplexity(const Corpus& corpus, const CtxModel& model,
                             const Matrix* embedding_prior) {
    if (corpus.documents.empty())
        throw std::runtime_error("validation_perplexity: empty corpus");
    double acc = 0.0;
    for (const Document& doc : corpus.documents) {
        const double ll = model.head == OutputHead::tree
                              ? tree_log_likelihood(doc, model.dn, *model.tree)
                              : log_likelihood(doc, model.dn, embedding_prior);
        acc += ll / static_cast<double>(doc.length());
    }
    return std::exp(-acc / static_cast<double>(corpus.documents.size()));
}

// ---------------------------------------------------------------------------
// training engine
// ---------------------------------------------------------------------------

namespace {

struct ParamSlot {
    double* param;
    double* grad;
    std::size_t n;
};

void collect_slots(CtxModel& model, CtxGradients& grad, std::vector<ParamSlot>& slots) {
    auto add_m = [&](Matrix& p, Matrix& g) {
        if (p.size()) slots.push_back({p.data().data(), g.data().data(), p.size()});
    };
    auto add_v = [&](Vec& p, Vec& g) {
        if (p.size()) slots.push_back({p.data(), g.data(), p.size()});
    };
    add_m(model.dn.W, grad.dn.W);
    add_m(model.dn.U, grad.dn.U);
    add_v(model.dn.b, grad.dn.b);
    add_v(model.dn.c, grad.dn.c);
    for (std::size_t d = 0; d < model.deep_W.size(); ++d)
        add_m(model.deep_W[d], grad.deep_W[d]);
    for (std::size_t l = 0; l < model.lm.layers.size(); ++l) {
        auto& lp = model.lm.layers[l];
        auto& lg = grad.lm.layers[l];
        add_m(lp.Wxf, lg.Wxf); add_m(lp.Wxi, lg.Wxi);
        add_m(lp.Wxc, lg.Wxc); add_m(lp.Wxo, lg.Wxo);
        add_m(lp.Whf, lg.Whf); add_m(lp.Whi, lg.Whi);
        add_m(lp.Whc, lg.Whc); add_m(lp.Who, lg.Who);
        add_v(lp.bf, lg.bf); add_v(lp.bi, lg.bi);
        add_v(lp.bc, lg.bc); add_v(lp.bo, lg.bo);
    }
    return;
}

void collect_tree_slots(CtxModel& model, TreeGradients& grad,
                        std::vector<ParamSlot>& slots) {
    slots.push_back({model.dn.W.data().data(), grad.W.data().data(), model.dn.W.size()});
    slots.push_back({model.dn.b.data(), grad.b.data(), model.dn.b.size()});
    if (model.tree->node_weights.size())
        slots.push_back({model.tree->node_weights.data().data(),
                         grad.node_weights.data().data(),
                         model.tree->node_weights.size()});
    if (model.tree->node_bias.size())
        slots.push_back({model.tree->node_bias.data(), grad.node_bias.data(),
                         model.tree->node_bias.size()});
}

class Updater {
public:
    Updater(Optimizer opt, double lr) : opt_(opt), lr_(lr) {}

    void bind(std::vector<ParamSlot> slots) {
        slots_ = std::move(slots);
        if (opt_ == Optimizer::adam) {
            m_.clear();
            v_.clear();
            for (const auto& s : slots_) {
                m_.emplace_back(s.n, 0.0);
                v_.emplace_back(s.n, 0.0);
            }
        }
    }

    void step() {
        if (opt_ == Optimizer::sgd) {
            for (const auto& s : slots_)
                for (std::size_t i = 0; i < s.n; ++i) s.param[i] -= lr_ * s.grad[i];
            return;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t j = 0; j < slots_.size(); ++j) {
            const auto& s = slots_[j];
            Vec& m = m_[j];
            Vec& v = v_[j];
            for (std::size_t i = 0; i < s.n; ++i) {
                const double g = s.grad[i];
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                s.param[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
        }
    }

private:
    Optimizer opt_;
    double lr_;
    std::vector<ParamSlot> slots_;
    std::vector<Vec> m_, v_;
    std::uint64_t t_ = 0;
    static constexpr double beta1_ = 0.9;
    static constexpr double beta2_ = 0.999;
    static constexpr double eps_ = 1e-8;
};

using WeightedDoc = std::pair<const Document*, double>;

}  // namespace

TrainResult train(const Corpus& train_set, const Corpus& valid_set, CtxModel model,
                  const TrainConfig& cfg, const TrainHooks* hooks) {
    if (train_set.documents.empty() || valid_set.documents.empty())
        throw std::runtime_error("train: empty corpus");
    if (cfg.iterations < 1) throw std::runtime_error("train: iterations must be >= 1");
    if (cfg.learning_rate <= 0.0) throw std::runtime_error("train: learning rate must be > 0");
    if (cfg.minibatch < 1) throw std::runtime_error("train: minibatch must be >= 1");
    if (hooks && model.head == OutputHead::tree)
        throw std::runtime_error("train: hooks are only supported with the linear head");

    const Matrix* prior = hooks ? hooks->embedding_prior : nullptr;
    const double lambda_configured = model.lambda;
    const bool tree_head = model.head == OutputHead::tree;

    Rng rng(cfg.seed);
    Updater updater(cfg.optimizer, cfg.learning_rate);
    CtxGradients batch_grad = CtxGradients::zeros_like(model);
    TreeGradients tree_grad;
    if (tree_head) {
        tree_grad = TreeGradients::zeros_like(model.dn, *model.tree);
        std::vector<ParamSlot> slots;
        collect_tree_slots(model, tree_grad, slots);
        updater.bind(std::move(slots));
    } else {
        std::vector<ParamSlot> slots;
        collect_slots(model, batch_grad, slots);
        updater.bind(std::move(slots));
    }

    TrainResult result;
    result.best_val_ppl = std::numeric_limits<double>::infinity();
    CtxModel best = model;
    std::size_t epoch = 0;

    auto zero_batch = [&] {
        if (tree_head) {
            tree_grad.W.fill(0.0);
            std::fill(tree_grad.b.begin(), tree_grad.b.end(), 0.0);
            tree_grad.node_weights.fill(0.0);
            std::fill(tree_grad.node_bias.begin(), tree_grad.node_bias.end(), 0.0);
        } else {
            batch_grad.dn.W.fill(0.0);
            batch_grad.dn.U.fill(0.0);
            std::fill(batch_grad.dn.b.begin(), batch_grad.dn.b.end(), 0.0);
            std::fill(batch_grad.dn.c.begin(), batch_grad.dn.c.end(), 0.0);
            for (Matrix& m : batch_grad.deep_W) m.fill(0.0);
            for (auto& l : batch_grad.lm.layers) {
                l.Wxf.fill(0.0); l.Wxi.fill(0.0); l.Wxc.fill(0.0); l.Wxo.fill(0.0);
                l.Whf.fill(0.0); l.Whi.fill(0.0); l.Whc.fill(0.0); l.Who.fill(0.0);
                std::fill(l.bf.begin(), l.bf.end(), 0.0);
                std::fill(l.bi.begin(), l.bi.end(), 0.0);
                std::fill(l.bc.begin(), l.bc.end(), 0.0);
                std::fill(l.bo.begin(), l.bo.end(), 0.0);
            }
            batch_grad.lm.W_embed.fill(0.0);
        }
    };

    // gradient of one weighted document accumulated into the batch buffers
    auto accumulate_doc = [&](const Document& doc, double weight) -> double {
        double nll = 0.0;
        if (tree_head) {
            TreeGradients g = tree_gradients(doc, model.dn, *model.tree, &nll);
            for (std::size_t i = 0; i < tree_grad.W.size(); ++i)
                tree_grad.W.data()[i] += weight * g.W.data()[i];
            for (std::size_t i = 0; i < tree_grad.b.size(); ++i)
                tree_grad.b[i] += weight * g.b[i];
            for (std::size_t i = 0; i < tree_grad.node_weights.size(); ++i)
                tree_grad.node_weights.data()[i] += weight * g.node_weights.data()[i];
            for (std::size_t i = 0; i < tree_grad.node_bias.size(); ++i)
                tree_grad.node_bias[i] += weight * g.node_bias[i];
        } else {
            CtxGradients g = ctx_gradients(doc, model, &nll, prior);
            clip_lm_gradient(g, cfg.lm_grad_clip);
            fold_embedding_gradient(g);
            batch_grad.accumulate(g, weight);
        }
        return weight * nll;
    };

    // one pass over the work list; returns number of update steps consumed
    auto run_epoch = [&](std::size_t step_budget, double* mean_loss) -> std::size_t {
        std::vector<WeightedDoc> work;
        work.reserve(train_set.documents.size());
        for (const Document& d : train_set.documents) work.push_back({&d, 1.0});
        if (hooks && hooks->epoch_extra_docs) {
            auto extras = hooks->epoch_extra_docs(model);
            work.insert(work.end(), extras.begin(), extras.end());
        }
        const auto order = shuffled_indices(work.size(), rng);

        double loss_sum = 0.0;
        std::size_t docs_done = 0, steps = 0, pos = 0;
        while (pos < order.size() && steps < step_budget) {
            zero_batch();
            const std::size_t batch_end = std::min(pos + cfg.minibatch, order.size());
            if (cfg.threads > 1 && !tree_head && batch_end - pos > 1) {
                const std::size_t count = batch_end - pos;
                std::vector<CtxGradients> partial(count);
                std::vector<double> nlls(count, 0.0);
                const std::size_t workers = std::min(cfg.threads, count);
                std::vector<std::thread> pool;
                for (std::size_t w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w] {
                        for (std::size_t j = w; j < count; j += workers) {
                            const auto& [docp, weight] = work[order[pos + j]];
                            partial[j] = ctx_gradients(*docp, model, &nlls[j], prior);
                            clip_lm_gradient(partial[j], cfg.lm_grad_clip);
                            fold_embedding_gradient(partial[j]);
                            nlls[j] *= weight;
                        }
                    });
                }
                for (auto& t : pool) t.join();
                for (std::size_t j = 0; j < count; ++j) {
                    batch_grad.accumulate(partial[j], work[order[pos + j]].second);
                    loss_sum += nlls[j];
                }
            } else {
                for (std::size_t j = pos; j < batch_end; ++j) {
                    const auto& [docp, weight] = work[order[j]];
                    loss_sum += accumulate_doc(*docp, weight);
                }
            }
            if (!std::isfinite(loss_sum))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch + 1));
            if (hooks && hooks->per_step)
                hooks->per_step(model, batch_grad, cfg.learning_rate);
            updater.step();
            docs_done += batch_end - pos;
            pos = batch_end;
            ++steps;
        }
        *mean_loss = docs_done ? loss_sum / static_cast<double>(docs_done) : 0.0;
        return steps;
    };

    auto end_epoch = [&](double mean_loss) {
        ++epoch;
        const double val_ppl = validation_perplexity(valid_set, model, prior);
        result.log.push_back({epoch, mean_loss, val_ppl});
        if (val_ppl < result.best_val_ppl) {
            result.best_val_ppl = val_ppl;
            result.best_epoch = epoch;
            best = model;
            best.lambda = lambda_configured;
        }
    };

    // phase 1: lambda forced to zero
    model.lambda = 0.0;
    for (std::size_t e = 0; e < cfg.pretrain_epochs; ++e) {
        double mean_loss = 0.0;
        run_epoch(std::numeric_limits<std::size_t>::max(), &mean_loss);
        end_epoch(mean_loss);
    }

    // phase 2: full objective for cfg.iterations update steps
    model.lambda = lambda_configured;
    std::size_t remaining = cfg.iterations;
    while (remaining > 0) {
        double mean_loss = 0.0;
        const std::size_t used = run_epoch(remaining, &mean_loss);
        remaining -= used;
        end_epoch(mean_loss);
        if (used == 0) break;  // empty work list safeguard
    }

    result.model = std::move(best);
    return result;
}

// ---------------------------------------------------------------------------
// checkpoint io
// ---------------------------------------------------------------------------

namespace {

Matrix vec_as_row(const Vec& v) {
    Matrix m(1, v.size());
    m.data() = v;
    return m;
}

}  // namespace

void save_model(const CtxModel& model, const std::string& path) {
    Checkpoint ck;
    ck.set_meta("kind", to_string(model.kind));
    ck.set_meta("head", model.head == OutputHead::tree ? "tree" : "linear");
    ck.set_meta_int("H", static_cast<long>(model.hidden_size()));
    ck.set_meta_int("V", static_cast<long>(model.vocab_size()));
    ck.set_meta("activation", to_string(model.dn.activation));
    ck.set_meta_double("lambda", model.lambda);
    ck.set_meta_int("depth", static_cast<long>(model.depth()));
    ck.set_meta_int("version", 1);
    ck.add_tensor("W", model.dn.W);
    ck.add_tensor("U", model.dn.U);
    ck.add_vector("b", model.dn.b);
    ck.add_vector("c", model.dn.c);
    for (std::size_t d = 0; d < model.deep_W.size(); ++d)
        ck.add_tensor("W_d" + std::to_string(d + 2), model.deep_W[d]);
    for (std::size_t l = 0; l < model.lm.layers.size(); ++l) {
        const auto& lp = model.lm.layers[l];
        const std::string p = "lstm" + std::to_string(l + 1) + "_";
        ck.add_tensor(p + "Wxf", lp.Wxf); ck.add_tensor(p + "Wxi", lp.Wxi);
        ck.add_tensor(p + "Wxc", lp.Wxc); ck.add_tensor(p + "Wxo", lp.Wxo);
        ck.add_tensor(p + "Whf", lp.Whf); ck.add_tensor(p + "Whi", lp.Whi);
        ck.add_tensor(p + "Whc", lp.Whc); ck.add_tensor(p + "Who", lp.Who);
        ck.add_vector(p + "bf", lp.bf); ck.add_vector(p + "bi", lp.bi);
        ck.add_vector(p + "bc", lp.bc); ck.add_vector(p + "bo", lp.bo);
    }
    if (model.kind == ModelKind::ctx_e) ck.add_tensor("E", model.E);
    if (model.tree) {
        ck.add_tensor("tree_V", model.tree->node_weights);
        ck.add_vector("tree_b", model.tree->node_bias);
    }
    ck.save(path);
}

CtxModel load_model(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    CtxModel m;
    m.kind = model_kind_from_string(ck.meta_at("kind"));
    const std::size_t H = static_cast<std::size_t>(ck.meta_int("H"));
    const std::size_t V = static_cast<std::size_t>(ck.meta_int("V"));
    m.dn.activation = activation_from_string(ck.meta_at("activation"));
    m.lambda = ck.meta_double("lambda");
    m.dn.W = ck.tensor("W");
    m.dn.U = ck.tensor("U");
    m.dn.b = ck.vector("b");
    m.dn.c = ck.vector("c");
    if (m.dn.W.rows() != H || m.dn.W.cols() != V || m.dn.U.rows() != V ||
        m.dn.U.cols() != H || m.dn.b.size() != H || m.dn.c.size() != V)
        throw std::runtime_error("load_model: tensor shapes disagree with meta");
    const std::size_t depth = static_cast<std::size_t>(ck.meta_int("depth"));
    for (std::size_t d = 2; d <= depth; ++d)
        m.deep_W.push_back(ck.tensor("W_d" + std::to_string(d)));
    if (m.kind != ModelKind::docnade) {
        m.lm.layers.resize(depth);
        for (std::size_t l = 0; l < depth; ++l) {
            const std::string p = "lstm" + std::to_string(l + 1) + "_";
            auto& lp = m.lm.layers[l];
            lp.Wxf = ck.tensor(p + "Wxf"); lp.Wxi = ck.tensor(p + "Wxi");
            lp.Wxc = ck.tensor(p + "Wxc"); lp.Wxo = ck.tensor(p + "Wxo");
            lp.Whf = ck.tensor(p + "Whf"); lp.Whi = ck.tensor(p + "Whi");
            lp.Whc = ck.tensor(p + "Whc"); lp.Who = ck.tensor(p + "Who");
            lp.bf = ck.vector(p + "bf"); lp.bi = ck.vector(p + "bi");
            lp.bc = ck.vector(p + "bc"); lp.bo = ck.vector(p + "bo");
        }
        if (m.kind == ModelKind::ctx_e) m.E = ck.tensor("E");
    }
    if (ck.meta_at("head") == "tree") {
        m.head = OutputHead::tree;
        m.tree = BinaryTreeSoftmax::balanced(V, H);
        m.tree->node_weights = ck.tensor("tree_V");
        m.tree->node_bias = ck.vector("tree_b");
    }
    return m;
}

}  // namespace ntm
