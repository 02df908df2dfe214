#pragma once

#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/linalg.hpp"
#include "ntm/rng.hpp"

namespace ntm {

/// Gate parameters of one LSTM cell. Input width equals H for every layer:
/// layer 1 consumes H-dimensional word embeddings, deeper layers consume the
/// H-dimensional output of the layer below.
struct LstmLayerParams {
    Matrix Wxf, Wxi, Wxc, Wxo;  // H x H input weights
    Matrix Whf, Whi, Whc, Who;  // H x H recurrent weights
    Vec bf, bi, bc, bo;         // H biases
};

struct LstmParams {
    std::vector<LstmLayerParams> layers;

    std::size_t depth() const { return layers.size(); }
    std::size_t hidden_size() const { return layers.empty() ? 0 : layers[0].bf.size(); }

    /// Gate weights ~ uniform(-1/sqrt(H), 1/sqrt(H)); forget bias +1, others 0.
    static LstmParams init(std::size_t hidden, std::size_t depth, Rng& rng);
};

struct LmState {
    Vec h;  // hidden
    Vec C;  // cell

    static LmState zeros(std::size_t hidden) { return {Vec(hidden, 0.0), Vec(hidden, 0.0)}; }
};

/// One cell update:
///   f = sig(Whf h + Wxf x + bf)      i = sig(Whi h + Wxi x + bi)
///   Chat = tanh(Whc h + Wxc x + bc)  C = f*C_prev + i*Chat
///   o = sig(Who h + Wxo x + bo)      h = tanh(C)*o
LmState lstm_step(const Vec& x, const LmState& state, const LstmLayerParams& layer);

enum class EmbeddingMode { W, W_plus_E };

/// Per-position top-layer language-model states h_1..h_N. h_i is the state
/// after consuming the prefix x_1..x_{i-1}, where word k is embedded as
/// W[:,v_k] (plus E[:,v_k] in W_plus_E mode). h_1 is the zero vector.
std::vector<Vec> lm_hidden_states(const Document& doc, EmbeddingMode mode,
                                  const Matrix& W, const Matrix* E,
                                  const LstmParams& params);

struct LstmLayerGradients {
    Matrix Wxf, Wxi, Wxc, Wxo;
    Matrix Whf, Whi, Whc, Who;
    Vec bf, bi, bc, bo;
};

struct LstmGradients {
    std::vector<LstmLayerGradients> layers;
    Matrix W_embed;  // H x V gradient through the embedding lookup; E gets none

    static LstmGradients zeros_like(const LstmParams& params, std::size_t vocab);
    void accumulate(const LstmGradients& other, double scale = 1.0);
    void scale(double s);

    /// Sum of squares over every entry, including W_embed.
    double squared_norm() const;
};

/// Exact reverse-mode accumulation through all gates and the embedding.
/// `upstream[i]` is dLoss/dh_i for the per-position outputs of
/// lm_hidden_states; upstream[0] lands on the constant zero state and is
/// discarded. E is a static prior and receives no gradient.
LstmGradients bptt_gradients(const Document& doc, const std::vector<Vec>& upstream,
                             const LstmParams& params, EmbeddingMode mode,
                             const Matrix& W, const Matrix* E);

}  // namespace ntm
