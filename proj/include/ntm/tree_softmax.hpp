#pragma once

#include <cstdint>
#include <vector>

#include "ntm/docnade.hpp"
#include "ntm/linalg.hpp"

namespace ntm {

/// Probabilistic binary tree output head. Every vocabulary word is a leaf;
/// its probability is the product over the root-to-leaf path of per-node
/// sigmoid decisions (bit 1 = right subtree). V-1 internal nodes, each with
/// an H weight row and a bias.
struct BinaryTreeSoftmax {
    Matrix node_weights;                     // (V-1) x H
    Vec node_bias;                           // V-1
    std::vector<std::vector<int>> paths;     // per word: internal node ids, root first
    std::vector<std::vector<uint8_t>> bits;  // per word: decision at each path node

    std::size_t vocab_size() const { return paths.size(); }

    /// Balanced tree over word ids in id order (ids are frequency-ordered by
    /// construction of the vocabulary). Weights and biases start at zero.
    static BinaryTreeSoftmax balanced(std::size_t vocab, std::size_t hidden);
};

struct TreeGradients {
    Matrix node_weights;  // (V-1) x H
    Vec node_bias;        // V-1
    Matrix W;             // H x V
    Vec b;                // H

    static TreeGradients zeros_like(const DocNadeParams& p, const BinaryTreeSoftmax& tree);
};

/// p(word | h): product over path nodes of sigmoid(bias + w.h) or its
/// complement. Throws if the word is not a leaf of the tree.
double tree_conditional(const Vec& h, int word, const BinaryTreeSoftmax& tree);

/// log p(word | h) via numerically stable log-sigmoid.
double tree_log_conditional(const Vec& h, int word, const BinaryTreeSoftmax& tree);

/// Exact log p(v) with the tree head.
double tree_log_likelihood(const Document& doc, const DocNadeParams& p,
                           const BinaryTreeSoftmax& tree);

/// Exact gradients of -log p(v) w.r.t. tree weights/biases and W, b.
TreeGradients tree_gradients(const Document& doc, const DocNadeParams& p,
                             const BinaryTreeSoftmax& tree, double* nll = nullptr);

}  // namespace ntm
