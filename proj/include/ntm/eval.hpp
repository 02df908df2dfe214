#pragma once

#include <map>
#include <string>
#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/ctx_model.hpp"

namespace ntm {

struct EvalReport {
    double ppl = 0.0;
    double nll = 0.0;  // document-level mean negative log-likelihood
    std::vector<double> coherence_per_topic;
    double coherence_mean = 0.0;
    std::size_t coherence_skipped_pairs = 0;
    std::map<double, double> ir;  // fraction -> mean precision
    double f1 = -1.0;             // -1 when not computed
    std::map<std::string, std::string> metadata;

    void save(const std::string& path) const;        // flat key=value lines
    void save_ir_csv(const std::string& path) const; // fraction,precision rows
};

/// Average perplexity-per-word exp(-(1/D) sum_i (1/N_i) log p(v_i)).
/// The mixture weight is forced to zero: only the DocNADE path scores
/// documents, whatever the model's training lambda was. `nll_out` receives
/// the document-level mean NLL.
double perplexity(const Corpus& corpus, const CtxModel& model,
                  const Matrix* embedding_prior = nullptr, double* nll_out = nullptr);

struct CoherenceResult {
    std::vector<double> per_topic;
    double mean = 0.0;
    std::size_t skipped_pairs = 0;  // pairs with a word absent from the reference
};

/// Mean NPMI over unordered pairs of each topic's words, with probabilities
/// estimated as occurrence frequencies over all sliding windows of the
/// reference corpus. Pairs with zero joint count score -1; pairs involving a
/// word absent from the reference corpus are skipped and counted.
CoherenceResult npmi_coherence(const std::vector<std::vector<int>>& topics,
                               const Corpus& reference, std::size_t window,
                               std::size_t threads = 1);

/// Retrieval precision at each fraction: every query ranks all training
/// documents by cosine similarity (ties by lower index, zero vectors last);
/// precision is the share of the top ceil(f*|train|) docs with >= 1 label in
/// common with the query, averaged over queries.
std::map<double, double> ir_precision(const std::vector<Vec>& train_reps,
                                      const Corpus& train_corpus,
                                      const std::vector<Vec>& query_reps,
                                      const Corpus& query_corpus,
                                      const std::vector<double>& fractions,
                                      std::size_t threads = 1);

/// Macro-averaged F1 of an L2-regularized multinomial logistic regression
/// trained in-module by full-batch gradient descent (stops at gradient norm
/// < 1e-6 or 5000 steps). Labels must be single strings; a test class absent
/// from training throws.
double f1_classify(const std::vector<Vec>& train_reps,
                   const std::vector<std::string>& train_labels,
                   const std::vector<Vec>& test_reps,
                   const std::vector<std::string>& test_labels, double l2_weight);

/// Representations for every document of a corpus under a model.
std::vector<Vec> corpus_representations(const Corpus& corpus, const CtxModel& model,
                                        const Matrix* embedding_prior = nullptr,
                                        std::size_t threads = 1);

/// Extracts the single label of each document; throws on multi-label docs.
std::vector<std::string> single_labels(const Corpus& corpus);

}  // namespace ntm
