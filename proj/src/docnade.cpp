#include "ntm/docnade.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ntm {

Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "tanh") return Activation::tanh;
    throw std::runtime_error("unknown activation: " + s);
}

std::string to_string(Activation a) {
    return a == Activation::sigmoid ? "sigmoid" : "tanh";
}

DocNadeParams DocNadeParams::init(std::size_t hidden, std::size_t vocab, Activation act,
                                  Rng& rng) {
    DocNadeParams p;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
    p.W = Matrix(hidden, vocab);
    p.U = Matrix(vocab, hidden);
    fill_uniform(p.W, -scale, scale, rng);
    fill_uniform(p.U, -scale, scale, rng);
    p.b.assign(hidden, 0.0);
    p.c.assign(vocab, 0.0);
    p.activation = act;
    return p;
}

DocNadeGradients DocNadeGradients::zeros_like(const DocNadeParams& p) {
    DocNadeGradients g;
    g.W = Matrix(p.W.rows(), p.W.cols());
    g.U = Matrix(p.U.rows(), p.U.cols());
    g.b.assign(p.b.size(), 0.0);
    g.c.assign(p.c.size(), 0.0);
    return g;
}

void DocNadeGradients::accumulate(const DocNadeGradients& other, double scale) {
    for (std::size_t i = 0; i < W.size(); ++i) W.data()[i] += scale * other.W.data()[i];
    for (std::size_t i = 0; i < U.size(); ++i) U.data()[i] += scale * other.U.data()[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += scale * other.b[i];
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += scale * other.c[i];
}

void DocNadeGradients::scale(double s) {
    for (double& x : W.data()) x *= s;
    for (double& x : U.data()) x *= s;
    for (double& x : b) x *= s;
    for (double& x : c) x *= s;
}

namespace {

void check_ids(const Document& doc, std::size_t vocab) {
    if (doc.word_ids.empty()) throw std::runtime_error("docnade: empty document");
    for (int id : doc.word_ids)
        if (id < 0 || static_cast<std::size_t>(id) >= vocab)
            throw std::runtime_error("docnade: word id out of range");
}

inline void add_word_column(Vec& a, const DocNadeParams& p, const Matrix* prior, int v) {
    const std::size_t H = a.size();
    for (std::size_t k = 0; k < H; ++k) a[k] += p.W(k, static_cast<std::size_t>(v));
    if (prior)
        for (std::size_t k = 0; k < H; ++k) a[k] += (*prior)(k, static_cast<std::size_t>(v));
}

}  // namespace

std::vector<Vec> hidden_states(const Document& doc, const DocNadeParams& p,
                               const Matrix* embedding_prior) {
    check_ids(doc, p.vocab_size());
    const std::size_t N = doc.length();
    const std::size_t H = p.hidden_size();
    std::vector<Vec> states(N, Vec(H));
    Vec a = p.b;  // running pre-activation
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < H; ++k) states[i][k] = apply_activation(p.activation, a[k]);
        add_word_column(a, p, embedding_prior, doc.word_ids[i]);
    }
    return states;
}

Vec conditional_distribution(const Vec& h, const DocNadeParams& p) {
    const std::size_t V = p.vocab_size();
    Vec logits = p.c;
    gemv_add(p.U, h.data(), logits.data());
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
    }
    for (std::size_t w = 0; w < V; ++w) logits[w] /= z;
    return logits;
}

double log_conditional(const Vec& h, int word, const DocNadeParams& p) {
    Vec logits = p.c;
    gemv_add(p.U, h.data(), logits.data());
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    return logits[static_cast<std::size_t>(word)] - mx - std::log(z);
}

double log_likelihood(const Document& doc, const DocNadeParams& p,
                      const Matrix* embedding_prior) {
    check_ids(doc, p.vocab_size());
    const std::size_t H = p.hidden_size();
    Vec a = p.b;
    Vec h(H);
    double ll = 0.0;
    for (int v : doc.word_ids) {
        for (std::size_t k = 0; k < H; ++k) h[k] = apply_activation(p.activation, a[k]);
        ll += log_conditional(h, v, p);
        add_word_column(a, p, embedding_prior, v);
    }
    return ll;
}

DocNadeGradients gradients(const Document& doc, const DocNadeParams& p, double* nll,
                           const Matrix* embedding_prior) {
    check_ids(doc, p.vocab_size());
    const std::size_t N = doc.length();
    const std::size_t H = p.hidden_size();
    const std::size_t V = p.vocab_size();

    // forward, keeping h_i and the softmax y_i of every step
    std::vector<Vec> hs(N, Vec(H));
    std::vector<Vec> ys(N);
    Vec a = p.b;
    double ll = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < H; ++k) hs[i][k] = apply_activation(p.activation, a[k]);
        ys[i] = conditional_distribution(hs[i], p);
        ll += std::log(ys[i][static_cast<std::size_t>(doc.word_ids[i])]);
        add_word_column(a, p, embedding_prior, doc.word_ids[i]);
    }
    if (nll) *nll = -ll;

    DocNadeGradients g = DocNadeGradients::zeros_like(p);
    // W[:,v_k] feeds every later step, so its gradient is the suffix sum of
    // the per-step pre-activation gradients da_i for i > k.
    Vec suffix(H, 0.0);
    Vec dh(H), da(H);
    for (std::size_t i = N; i-- > 0;) {
        Vec& r = ys[i];  // becomes softmax - onehot in place
        r[static_cast<std::size_t>(doc.word_ids[i])] -= 1.0;
        for (std::size_t w = 0; w < V; ++w) g.c[w] += r[w];
        ger_add(g.U, r.data(), hs[i].data());
        std::fill(dh.begin(), dh.end(), 0.0);
        gemv_t_add(p.U, r.data(), dh.data());
        for (std::size_t k = 0; k < H; ++k)
            da[k] = dh[k] * activation_grad(p.activation, hs[i][k]);
        for (std::size_t k = 0; k < H; ++k) g.b[k] += da[k];
        if (i > 0) {
            for (std::size_t k = 0; k < H; ++k) suffix[k] += da[k];
            const std::size_t col = static_cast<std::size_t>(doc.word_ids[i - 1]);
            for (std::size_t k = 0; k < H; ++k) g.W(k, col) += suffix[k];
        }
    }
    return g;
}

Vec document_representation(const Document& doc, const DocNadeParams& p,
                            const Matrix* embedding_prior) {
    check_ids(doc, p.vocab_size());
    const std::size_t H = p.hidden_size();
    Vec a = p.b;
    for (int v : doc.word_ids) add_word_column(a, p, embedding_prior, v);
    Vec h(H);
    for (std::size_t k = 0; k < H; ++k) h[k] = apply_activation(p.activation, a[k]);
    return h;
}

std::vector<int> topic_words(const DocNadeParams& p, std::size_t topic, std::size_t n) {
    if (topic >= p.hidden_size()) throw std::runtime_error("topic_words: topic out of range");
    if (n > p.vocab_size()) throw std::runtime_error("topic_words: n exceeds vocabulary size");
    std::vector<int> ids(p.vocab_size());
    std::iota(ids.begin(), ids.end(), 0);
    const double* row = p.W.row(topic);
    std::stable_sort(ids.begin(), ids.end(), [&](int x, int y) {
        if (row[x] != row[y]) return row[x] > row[y];
        return x < y;
    });
    ids.resize(n);
    return ids;
}

}  // namespace ntm
