#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/ctx_model.hpp"
#include "ntm/docnade.hpp"

namespace ntm {

/// Immutable archive of one finished training stage: the effective encoding
/// and decoding parameters, the corpus-average perplexity of that source
/// under them, the source vocabulary, and a capped pool of source training
/// documents (as tokens) kept for selective replay.
struct KbEntry {
    std::string name;
    Matrix W;  // H x V_t, effective encoding (any embedding prior folded in)
    Matrix U;  // V_t x H
    Vec b;     // H
    Vec c;     // V_t
    Activation activation = Activation::sigmoid;
    double ppl = 0.0;
    Vocabulary vocab;
    std::vector<std::vector<std::string>> sal_docs;

    DocNadeParams params() const;
};

struct KnowledgeBase {
    std::vector<KbEntry> entries;

    std::size_t size() const { return entries.size(); }

    void save(const std::string& dir) const;
    static KnowledgeBase load(const std::string& dir);
};

/// Per-source attention weights, aligned with the knowledge-base entries.
struct LifelongWeights {
    std::vector<double> embtf, sal, rk;
};

struct LifelongConfig {
    bool embtf = false;
    bool sal = false;
    bool rk = false;
    double lambda_embtf = 1.0;  // defaults applied to every source
    double lambda_sal = 1.0;
    double lambda_rk = 1.0;
    std::size_t hidden = 200;
    TrainConfig base;
    std::size_t sal_cap = 10000;   // max replay documents archived per stage
    bool sal_per_step = false;     // recompute beta every update instead of per epoch
    double ir_fraction = 0.02;     // forgetting IR measurement fraction
    bool eval_ir = true;
};

/// One dataset of a lifelong sequence, already encoded in its own vocabulary.
struct DatasetStage {
    std::string name;
    Corpus train, valid, test;
    Vocabulary vocab;
    // optional weight overrides used when this dataset acts as a source
    std::optional<double> embtf_weight, sal_weight, rk_weight;
};

/// Trainable H x H maps from the target parameter space onto each source's.
struct ProjectionSet {
    std::vector<Matrix> P_W, P_U;  // one pair per source

    static ProjectionSet identity(std::size_t hidden, std::size_t sources);
};

/// (target_id, source_id) pairs of the string-keyed vocabulary intersection.
using SharedVocab = std::vector<std::pair<int, int>>;
SharedVocab shared_vocabulary(const Vocabulary& target, const Vocabulary& source);

/// sum_t lambda_embtf[t] * W^t[:,v], with a zero contribution from sources
/// whose vocabulary lacks the target word.
Vec embtf_prior(int target_word, const KnowledgeBase& kb, const Vocabulary& target_vocab,
                const std::vector<double>& lambda_embtf);

/// The whole prior as an H x V_target matrix (column v = embtf_prior(v)).
Matrix build_embtf_prior(const KnowledgeBase& kb, const Vocabulary& target_vocab,
                         const std::vector<double>& lambda_embtf, std::size_t hidden);

/// beta flag per document: 1 iff exp(-log p(v|theta_new)/N) is strictly below
/// the source's archived corpus-average perplexity.
std::vector<bool> sal_select(const std::vector<Document>& source_docs,
                             const DocNadeParams& current, double ppl_old);

/// -sum_t lambda_sal[t] sum_i beta_i log p(v_i | theta_new) over beta=1 docs.
double sal_loss(const std::vector<std::vector<Document>>& source_docs,
                const std::vector<std::vector<bool>>& beta,
                const DocNadeParams& current, const std::vector<double>& lambda_sal);

struct RkResult {
    double penalty = 0.0;
    Matrix dW;                    // H x V_target
    Matrix dU;                    // V_target x H
    std::vector<Matrix> dP_W, dP_U;  // per source, H x H
};

/// sum_t lambda_rk[t] (||P_W^t W_new - W^t||_F^2 + ||P_U^t U_new - U^t||_F^2)
/// over the shared-vocabulary columns of W (rows of U), with exact gradients
/// for W_new, U_new and the projections.
RkResult rk_penalty(const DocNadeParams& current, const KnowledgeBase& kb,
                    const ProjectionSet& projections, const Vocabulary& target_vocab,
                    const std::vector<double>& lambda_rk);

struct ConsolidatedResult {
    double loss = 0.0;
    DocNadeGradients grad;
    std::vector<Matrix> dP_W, dP_U;
    std::vector<std::vector<bool>> beta;
};

/// Full per-document training loss L(v) + SAL + RK and its exact gradients.
/// The EmbTF prior enters only the target document's pre-activation; the kb
/// tensors never receive gradient. With all toggles off this is exactly the
/// plain DocNADE negative log-likelihood.
ConsolidatedResult consolidated_loss(const Document& target_doc,
                                     const std::vector<std::vector<Document>>& source_docs,
                                     const DocNadeParams& current,
                                     const ProjectionSet& projections,
                                     const KnowledgeBase& kb,
                                     const Vocabulary& target_vocab,
                                     const LifelongConfig& cfg,
                                     const LifelongWeights& weights);

/// Appends an immutable entry: deep-copied tensors, the perplexity of the
/// model on the source's own test split, and up to `sal_cap` training
/// documents decoded back to tokens for replay.
void kb_append(KnowledgeBase& kb, const DocNadeParams& effective,
               const std::string& name, const Corpus& test_split,
               const Corpus& train_split, const Vocabulary& vocab,
               std::size_t sal_cap);

struct ForgettingEntry {
    std::string source;
    double ppl_before = 0.0, ppl_after = 0.0;
    double ir_before = -1.0, ir_after = -1.0;  // -1 when IR was not evaluated
};

struct StageReport {
    std::string target;
    double test_ppl = 0.0;
    double test_ir = -1.0;
    double best_val_ppl = 0.0;
    std::vector<EpochLog> log;
    std::vector<ForgettingEntry> forgetting;
    std::vector<std::string> warnings;
};

struct SequenceResult {
    KnowledgeBase kb;
    std::vector<StageReport> stages;
    std::vector<DocNadeParams> stage_models;  // effective parameters per stage
};

/// Resolves the per-source weight vectors for the stage at `target_index`.
LifelongWeights stage_weights(const std::vector<DatasetStage>& stages,
                              std::size_t target_index, const LifelongConfig& cfg);

/// Trains every dataset in order with all enabled transfers from the
/// accumulated knowledge base, appends an entry after each stage, and
/// re-evaluates all earlier datasets under the new parameters. Stage s uses
/// seed base.seed + s for both initialization and the training loop.
SequenceResult run_sequence(const std::vector<DatasetStage>& stages,
                            const LifelongConfig& cfg);

}  // namespace ntm
