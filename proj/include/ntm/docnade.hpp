#pragma once

#include <string>
#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/linalg.hpp"
#include "ntm/rng.hpp"

namespace ntm {

enum class Activation { sigmoid, tanh };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

inline double apply_activation(Activation a, double x) {
    return a == Activation::sigmoid ? sigmoid(x) : std::tanh(x);
}

/// Derivative of the activation expressed through its output value.
inline double activation_grad(Activation a, double h) {
    return a == Activation::sigmoid ? h * (1.0 - h) : 1.0 - h * h;
}

/// Parameters of the base autoregressive topic model.
/// W (H x V) encodes words: column W[:,v] is word v's representation and row
/// W[k,:] scores the vocabulary under topic k. U (V x H) decodes hidden
/// states into word logits. b encodes (H), c decodes (V).
struct DocNadeParams {
    Matrix W;  // H x V
    Matrix U;  // V x H
    Vec b;     // H
    Vec c;     // V
    Activation activation = Activation::sigmoid;

    std::size_t hidden_size() const { return W.rows(); }
    std::size_t vocab_size() const { return W.cols(); }

    /// W, U ~ uniform(-1/sqrt(H), 1/sqrt(H)); biases zero.
    static DocNadeParams init(std::size_t hidden, std::size_t vocab, Activation act,
                              Rng& rng);
};

struct DocNadeGradients {
    Matrix W;  // H x V
    Matrix U;  // V x H
    Vec b;     // H
    Vec c;     // V

    static DocNadeGradients zeros_like(const DocNadeParams& p);
    void accumulate(const DocNadeGradients& other, double scale = 1.0);
    void scale(double s);
};

/// All autoregressive hidden states h_1..h_N, h_i = g(b + sum_{k<i} W[:,v_k]),
/// computed in O(N*H) with a running pre-activation. When `embedding_prior`
/// is given (H x V, static), its columns are added to W's inside the sum.
std::vector<Vec> hidden_states(const Document& doc, const DocNadeParams& p,
                               const Matrix* embedding_prior = nullptr);

/// softmax(c + U h), max-shifted.
Vec conditional_distribution(const Vec& h, const DocNadeParams& p);

/// log softmax(c + U h)[word], computed without materializing the softmax.
double log_conditional(const Vec& h, int word, const DocNadeParams& p);

/// Exact log p(v) = sum_i log p(v_i | v_{<i}) with the linear softmax head.
double log_likelihood(const Document& doc, const DocNadeParams& p,
                      const Matrix* embedding_prior = nullptr);

/// Exact gradients of -log p(v) w.r.t. W, U, b, c (linear softmax head).
/// Returns the NLL through `nll` when non-null.
DocNadeGradients gradients(const Document& doc, const DocNadeParams& p,
                           double* nll = nullptr,
                           const Matrix* embedding_prior = nullptr);

/// Full-document representation g(b + sum over ALL words W[:,v_k]).
Vec document_representation(const Document& doc, const DocNadeParams& p,
                            const Matrix* embedding_prior = nullptr);

/// Ids of the n largest entries of row W[topic,:], descending, ties by
/// smaller id. Throws if n > V or topic >= H.
std::vector<int> topic_words(const DocNadeParams& p, std::size_t topic, std::size_t n);

}  // namespace ntm
