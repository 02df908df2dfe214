#include "ntm/tree_softmax.hpp"

#include <cmath>
#include <stdexcept>

namespace ntm {

namespace {

// log(sigmoid(x)) without overflow for large |x|
inline double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

struct TreeBuilder {
    BinaryTreeSoftmax* tree;
    int next_node = 0;

    // splits the id range [lo, hi) at its midpoint, left half first
    void build(std::size_t lo, std::size_t hi, std::vector<int>& path,
               std::vector<uint8_t>& bits) {
        if (hi - lo == 1) {
            tree->paths[lo] = path;
            tree->bits[lo] = bits;
            return;
        }
        const int node = next_node++;
        const std::size_t mid = lo + (hi - lo) / 2;
        path.push_back(node);
        bits.push_back(0);
        build(lo, mid, path, bits);
        bits.back() = 1;
        build(mid, hi, path, bits);
        path.pop_back();
        bits.pop_back();
    }
};

}  // namespace

BinaryTreeSoftmax BinaryTreeSoftmax::balanced(std::size_t vocab, std::size_t hidden) {
    if (vocab == 0) throw std::runtime_error("tree softmax: empty vocabulary");
    BinaryTreeSoftmax tree;
    tree.node_weights = Matrix(vocab > 1 ? vocab - 1 : 0, hidden);
    tree.node_bias.assign(vocab > 1 ? vocab - 1 : 0, 0.0);
    tree.paths.resize(vocab);
    tree.bits.resize(vocab);
    if (vocab > 1) {
        TreeBuilder builder{&tree};
        std::vector<int> path;
        std::vector<uint8_t> bits;
        builder.build(0, vocab, path, bits);
    }
    return tree;
}

TreeGradients TreeGradients::zeros_like(const DocNadeParams& p,
                                        const BinaryTreeSoftmax& tree) {
    TreeGradients g;
    g.node_weights = Matrix(tree.node_weights.rows(), tree.node_weights.cols());
    g.node_bias.assign(tree.node_bias.size(), 0.0);
    g.W = Matrix(p.W.rows(), p.W.cols());
    g.b.assign(p.b.size(), 0.0);
    return g;
}

double tree_conditional(const Vec& h, int word, const BinaryTreeSoftmax& tree) {
    return std::exp(tree_log_conditional(h, word, tree));
}

double tree_log_conditional(const Vec& h, int word, const BinaryTreeSoftmax& tree) {
    if (word < 0 || static_cast<std::size_t>(word) >= tree.vocab_size())
        throw std::runtime_error("tree softmax: word not in tree");
    const auto& path = tree.paths[static_cast<std::size_t>(word)];
    const auto& bits = tree.bits[static_cast<std::size_t>(word)];
    double lp = 0.0;
    for (std::size_t m = 0; m < path.size(); ++m) {
        const std::size_t node = static_cast<std::size_t>(path[m]);
        const double logit =
            tree.node_bias[node] + dot(tree.node_weights.row(node), h.data(), h.size());
        lp += bits[m] ? log_sigmoid(logit) : log_sigmoid(-logit);
    }
    return lp;
}

double tree_log_likelihood(const Document& doc, const DocNadeParams& p,
                           const BinaryTreeSoftmax& tree) {
    const std::size_t H = p.hidden_size();
    Vec a = p.b;
    Vec h(H);
    double ll = 0.0;
    for (int v : doc.word_ids) {
        for (std::size_t k = 0; k < H; ++k) h[k] = apply_activation(p.activation, a[k]);
        ll += tree_log_conditional(h, v, tree);
        for (std::size_t k = 0; k < H; ++k) a[k] += p.W(k, static_cast<std::size_t>(v));
    }
    return ll;
}

TreeGradients tree_gradients(const Document& doc, const DocNadeParams& p,
                             const BinaryTreeSoftmax& tree, double* nll) {
    const std::size_t N = doc.length();
    const std::size_t H = p.hidden_size();
    if (N == 0) throw std::runtime_error("tree softmax: empty document");

    std::vector<Vec> hs(N, Vec(H));
    Vec a = p.b;
    double ll = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < H; ++k) hs[i][k] = apply_activation(p.activation, a[k]);
        ll += tree_log_conditional(hs[i], doc.word_ids[i], tree);
        const std::size_t col = static_cast<std::size_t>(doc.word_ids[i]);
        for (std::size_t k = 0; k < H; ++k) a[k] += p.W(k, col);
    }
    if (nll) *nll = -ll;

    TreeGradients g = TreeGradients::zeros_like(p, tree);
    Vec suffix(H, 0.0);
    Vec dh(H), da(H);
    for (std::size_t i = N; i-- > 0;) {
        const auto& path = tree.paths[static_cast<std::size_t>(doc.word_ids[i])];
        const auto& bits = tree.bits[static_cast<std::size_t>(doc.word_ids[i])];
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t m = 0; m < path.size(); ++m) {
            const std::size_t node = static_cast<std::size_t>(path[m]);
            const double logit = tree.node_bias[node] +
                                 dot(tree.node_weights.row(node), hs[i].data(), H);
            // d(-log p)/dlogit = sigmoid(logit) - bit
            const double residual = sigmoid(logit) - static_cast<double>(bits[m]);
            g.node_bias[node] += residual;
            double* wrow = g.node_weights.row(node);
            const double* trow = tree.node_weights.row(node);
            for (std::size_t k = 0; k < H; ++k) {
                wrow[k] += residual * hs[i][k];
                dh[k] += residual * trow[k];
            }
        }
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

}  // namespace ntm
