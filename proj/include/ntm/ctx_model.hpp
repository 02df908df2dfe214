#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ntm/checkpoint.hpp"
#include "ntm/corpus.hpp"
#include "ntm/docnade.hpp"
#include "ntm/lstm.hpp"
#include "ntm/tree_softmax.hpp"

namespace ntm {

enum class ModelKind { docnade, ctx, ctx_e };
enum class OutputHead { linear, tree };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

/// Composite topic + language model. The DocNADE side supplies the
/// bag-of-words hidden state, the LSTM side the ordered-context state; the
/// two are mixed as h = h_dn + lambda * h_lm before decoding. A depth n > 1
/// stacks W_d matrices on the DocNADE side (shared bias b) and LSTM cells on
/// the language-model side; only the depth-n states are combined.
struct CtxModel {
    ModelKind kind = ModelKind::docnade;
    OutputHead head = OutputHead::linear;
    DocNadeParams dn;
    std::vector<Matrix> deep_W;  // H x H, for depths d = 2..n
    LstmParams lm;               // empty for plain docnade
    double lambda = 0.0;
    Matrix E;  // H x V static embedding prior; used only by kind ctx_e
    std::optional<BinaryTreeSoftmax> tree;  // only with head == tree

    std::size_t depth() const { return deep_W.size() + 1; }
    std::size_t hidden_size() const { return dn.hidden_size(); }
    std::size_t vocab_size() const { return dn.vocab_size(); }
    bool has_lm() const { return !lm.layers.empty(); }
    EmbeddingMode embedding_mode() const {
        return kind == ModelKind::ctx_e ? EmbeddingMode::W_plus_E : EmbeddingMode::W;
    }
};

/// Fresh model with the spec initialization. E is required for ctx_e.
CtxModel make_model(ModelKind kind, std::size_t hidden, std::size_t vocab,
                    std::size_t depth, Activation act, double lambda, Rng& rng,
                    const Matrix* pretrained_embeddings = nullptr,
                    OutputHead head = OutputHead::linear);

/// h_dn + lambda * h_lm, elementwise.
Vec combined_hidden(const Vec& h_dn, const Vec& h_lm, double lambda);

struct CtxHiddenStates {
    std::vector<Vec> dn;  // depth-n DocNADE states, one per position
    std::vector<Vec> lm;  // depth-n LM states; empty when the LM path is off
};

/// Per-position top-layer states of both streams. The LM side is skipped
/// entirely when lambda == 0 or the model has no LM (exact DocNADE reduction).
CtxHiddenStates deep_hidden_states(const Document& doc, const CtxModel& model,
                                   const Matrix* embedding_prior = nullptr);

/// sum_i log softmax(c + U (h_i_dn + lambda h_i_lm))[v_i]
double pseudo_log_likelihood(const Document& doc, const CtxModel& model,
                             const Matrix* embedding_prior = nullptr);

struct CtxGradients {
    DocNadeGradients dn;
    std::vector<Matrix> deep_W;
    LstmGradients lm;  // lm.W_embed holds the embedding-path part of dW

    static CtxGradients zeros_like(const CtxModel& model);
    void accumulate(const CtxGradients& other, double scale = 1.0);
    void scale(double s);
};

/// Exact gradients of -pseudo_log_likelihood. The shared-W gradient arrives
/// in two parts: dn.W (bag-of-words path) and lm.W_embed (embedding path);
/// call fold_embedding_gradient to combine them after any LM-side clipping.
CtxGradients ctx_gradients(const Document& doc, const CtxModel& model,
                           double* nll = nullptr,
                           const Matrix* embedding_prior = nullptr);

void fold_embedding_gradient(CtxGradients& g);

/// Scales the LM-path tensors (gate weights, biases, W_embed) so their global
/// norm is at most max_norm. No-op when max_norm <= 0.
void clip_lm_gradient(CtxGradients& g, double max_norm);

/// h_DN over all N words (full sum through the deep stack) plus lambda times
/// the LM state after consuming the whole document.
Vec combined_representation(const Document& doc, const CtxModel& model,
                            const Matrix* embedding_prior = nullptr);

enum class Optimizer { sgd, adam };
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t iterations = 2000;   // parameter-update steps in the main phase
    std::size_t pretrain_epochs = 0; // full passes with lambda forced to 0
    Activation activation = Activation::sigmoid;
    Optimizer optimizer = Optimizer::sgd;
    std::uint64_t seed = 42;
    std::size_t minibatch = 1;       // gradients are summed over the batch
    double lm_grad_clip = 5.0;       // global-norm clip of the BPTT path; <= 0 disables
    std::size_t threads = 1;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean per-document NLL seen this epoch
    double val_ppl = 0.0;
};

struct TrainResult {
    CtxModel model;  // parameters with the best validation perplexity
    std::vector<EpochLog> log;
    double best_val_ppl = 0.0;
    std::size_t best_epoch = 0;
};

/// Hooks that let the lifelong trainer reuse this engine. With every member
/// empty the engine behaves exactly like plain training (same RNG draws).
struct TrainHooks {
    /// Static H x V prior added to W's columns in the DocNADE pre-activation
    /// (and in validation-perplexity evaluation).
    const Matrix* embedding_prior = nullptr;
    /// Called at every epoch start; returns extra weighted documents to
    /// interleave with the target documents for this epoch.
    std::function<std::vector<std::pair<const Document*, double>>(const CtxModel&)>
        epoch_extra_docs;
    /// Called once per update step with the assembled minibatch gradient;
    /// may add regularization gradients and update external parameters.
    std::function<void(const CtxModel&, CtxGradients&, double lr)> per_step;
};

/// Two-phase training: pretrain_epochs full passes at lambda = 0, then
/// `iterations` update steps of the full objective. Validation perplexity is
/// computed at lambda = 0 after every epoch; the best checkpoint is returned.
/// Throws on a non-finite loss.
TrainResult train(const Corpus& train_set, const Corpus& valid_set, CtxModel model,
                  const TrainConfig& cfg, const TrainHooks* hooks = nullptr);

/// Mean per-word log-likelihood based validation perplexity at lambda = 0.
double validation_perplexity(const Corpus& corpus, const CtxModel& model,
                             const Matrix* embedding_prior = nullptr);

void save_model(const CtxModel& model, const std::string& path);
CtxModel load_model(const std::string& path);

}  // namespace ntm
