#include "ntm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "ntm/checkpoint.hpp"
#include "ntm/tree_softmax.hpp"

namespace ntm {

namespace {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(threads, n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

void EvalReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("eval report: cannot write " + path);
    out << "ppl=" << format_double(ppl) << '\n';
    out << "nll=" << format_double(nll) << '\n';
    if (!coherence_per_topic.empty()) {
        out << "coherence_mean=" << format_double(coherence_mean) << '\n';
        out << "coherence_skipped_pairs=" << coherence_skipped_pairs << '\n';
        for (std::size_t k = 0; k < coherence_per_topic.size(); ++k)
            out << "coherence_topic_" << k << '=' << format_double(coherence_per_topic[k])
                << '\n';
    }
    for (const auto& [f, p] : ir)
        out << "ir_" << format_double(f) << '=' << format_double(p) << '\n';
    if (f1 >= 0.0) out << "f1=" << format_double(f1) << '\n';
    for (const auto& [k, v] : metadata) out << k << '=' << v << '\n';
}

void EvalReport::save_ir_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("eval report: cannot write " + path);
    out << "fraction,precision\n";
    for (const auto& [f, p] : ir)
        out << format_double(f) << ',' << format_double(p) << '\n';
}

double perplexity(const Corpus& corpus, const CtxModel& model,
                  const Matrix* embedding_prior, double* nll_out) {
    if (corpus.documents.empty()) throw std::runtime_error("perplexity: empty corpus");
    double per_word = 0.0, per_doc = 0.0;
    for (const Document& doc : corpus.documents) {
        const double ll = model.head == OutputHead::tree
                              ? tree_log_likelihood(doc, model.dn, *model.tree)
                              : log_likelihood(doc, model.dn, embedding_prior);
        per_word += ll / static_cast<double>(doc.length());
        per_doc += ll;
    }
    const double d = static_cast<double>(corpus.documents.size());
    if (nll_out) *nll_out = -per_doc / d;
    return std::exp(-per_word / d);
}

CoherenceResult npmi_coherence(const std::vector<std::vector<int>>& topics,
                               const Corpus& reference, std::size_t window,
                               std::size_t threads) {
    if (window < 2) throw std::runtime_error("npmi_coherence: window must be >= 2");
    if (topics.empty()) throw std::runtime_error("npmi_coherence: no topics");

    // words we actually need counts for
    std::unordered_map<int, int> word_slot;
    for (const auto& t : topics)
        for (int w : t)
            if (!word_slot.count(w)) {
                const int slot = static_cast<int>(word_slot.size());
                word_slot[w] = slot;
            }
    const std::size_t Q = word_slot.size();

    std::vector<std::size_t> occur(Q, 0);
    std::vector<std::unordered_map<int, std::size_t>> joint(Q);  // slot -> count, a < b
    std::size_t total_windows = 0;

    std::vector<int> present;
    for (const Document& doc : reference.documents) {
        const auto& ids = doc.word_ids;
        const std::size_t n = ids.size();
        const std::size_t win = std::min(window, n);
        const std::size_t count = n - win + 1;
        for (std::size_t s = 0; s < count; ++s) {
            ++total_windows;
            present.clear();
            for (std::size_t j = s; j < s + win; ++j) {
                auto it = word_slot.find(ids[j]);
                if (it != word_slot.end()) present.push_back(it->second);
            }
            std::sort(present.begin(), present.end());
            present.erase(std::unique(present.begin(), present.end()), present.end());
            for (std::size_t a = 0; a < present.size(); ++a) {
                ++occur[static_cast<std::size_t>(present[a])];
                for (std::size_t b = a + 1; b < present.size(); ++b)
                    ++joint[static_cast<std::size_t>(present[a])][present[b]];
            }
        }
    }
    if (total_windows == 0) throw std::runtime_error("npmi_coherence: empty reference corpus");

    const double T = static_cast<double>(total_windows);
    const double eps = 1e-12;
    CoherenceResult result;
    result.per_topic.assign(topics.size(), 0.0);
    std::vector<std::size_t> skipped(topics.size(), 0);

    parallel_for(topics.size(), threads, [&](std::size_t t) {
        const auto& words = topics[t];
        double sum = 0.0;
        std::size_t pairs = 0, skip = 0;
        for (std::size_t a = 0; a < words.size(); ++a) {
            for (std::size_t b = a + 1; b < words.size(); ++b) {
                int sa = word_slot.at(words[a]);
                int sb = word_slot.at(words[b]);
                const std::size_t ca = occur[static_cast<std::size_t>(sa)];
                const std::size_t cb = occur[static_cast<std::size_t>(sb)];
                if (ca == 0 || cb == 0) {
                    ++skip;
                    continue;
                }
                if (sa > sb) std::swap(sa, sb);
                const auto& row = joint[static_cast<std::size_t>(sa)];
                auto it = row.find(sb);
                const std::size_t cab = it == row.end() ? 0 : it->second;
                double score;
                if (cab == 0) {
                    score = -1.0;
                } else if (cab == total_windows) {
                    score = 1.0;  // limit of the ratio as p(a,b) -> 1
                } else {
                    const double pab = (static_cast<double>(cab) + eps) / T;
                    const double pa = static_cast<double>(ca) / T;
                    const double pb = static_cast<double>(cb) / T;
                    score = std::log(pab / (pa * pb)) / (-std::log(pab));
                    score = std::clamp(score, -1.0, 1.0);
                }
                sum += score;
                ++pairs;
            }
        }
        result.per_topic[t] = pairs ? sum / static_cast<double>(pairs) : 0.0;
        skipped[t] = skip;
    });

    result.mean = std::accumulate(result.per_topic.begin(), result.per_topic.end(), 0.0) /
                  static_cast<double>(result.per_topic.size());
    result.skipped_pairs = std::accumulate(skipped.begin(), skipped.end(), std::size_t{0});
    return result;
}

namespace {

double cosine_or_floor(const Vec& a, const Vec& b) {
    const double na = dot(a.data(), a.data(), a.size());
    const double nb = dot(b.data(), b.data(), b.size());
    if (na == 0.0 || nb == 0.0) return -1.0;  // zero vectors rank last
    return dot(a.data(), b.data(), a.size()) / (std::sqrt(na) * std::sqrt(nb));
}

bool shares_label(const std::set<std::string>& a, const std::set<std::string>& b) {
    for (const auto& l : a)
        if (b.count(l)) return true;
    return false;
}

}  // namespace

std::map<double, double> ir_precision(const std::vector<Vec>& train_reps,
                                      const Corpus& train_corpus,
                                      const std::vector<Vec>& query_reps,
                                      const Corpus& query_corpus,
                                      const std::vector<double>& fractions,
                                      std::size_t threads) {
    const std::size_t T = train_reps.size();
    const std::size_t Qn = query_reps.size();
    if (T == 0 || Qn == 0) throw std::runtime_error("ir_precision: empty input");
    if (T != train_corpus.documents.size() || Qn != query_corpus.documents.size())
        throw std::runtime_error("ir_precision: representation/corpus size mismatch");
    if (&train_corpus == &query_corpus)
        throw std::runtime_error("ir_precision: query and training splits must be disjoint");
    for (double f : fractions)
        if (f <= 0.0 || f > 1.0)
            throw std::runtime_error("ir_precision: fractions must lie in (0, 1]");

    // per-query relevant counts among the top-k for every needed k
    std::vector<std::size_t> ks;
    ks.reserve(fractions.size());
    for (double f : fractions)
        ks.push_back(static_cast<std::size_t>(std::ceil(f * static_cast<double>(T))));

    std::vector<std::vector<double>> precision(Qn,
                                               std::vector<double>(fractions.size(), 0.0));
    parallel_for(Qn, threads, [&](std::size_t q) {
        std::vector<std::pair<double, std::size_t>> scored(T);
        for (std::size_t i = 0; i < T; ++i)
            scored[i] = {cosine_or_floor(query_reps[q], train_reps[i]), i};
        std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first > y.first;
            return x.second < y.second;
        });
        const auto& qlabels = query_corpus.documents[q].labels;
        std::size_t max_k = *std::max_element(ks.begin(), ks.end());
        std::vector<std::size_t> relevant_prefix(max_k + 1, 0);
        for (std::size_t i = 0; i < max_k; ++i) {
            const bool rel =
                shares_label(qlabels, train_corpus.documents[scored[i].second].labels);
            relevant_prefix[i + 1] = relevant_prefix[i] + (rel ? 1 : 0);
        }
        for (std::size_t j = 0; j < ks.size(); ++j)
            precision[q][j] = static_cast<double>(relevant_prefix[ks[j]]) /
                              static_cast<double>(ks[j]);
    });

    std::map<double, double> out;
    for (std::size_t j = 0; j < fractions.size(); ++j) {
        double acc = 0.0;
        for (std::size_t q = 0; q < Qn; ++q) acc += precision[q][j];
        out[fractions[j]] = acc / static_cast<double>(Qn);
    }
    return out;
}

std::vector<std::string> single_labels(const Corpus& corpus) {
    std::vector<std::string> out;
    out.reserve(corpus.documents.size());
    for (const auto& doc : corpus.documents) {
        if (doc.labels.size() != 1)
            throw std::runtime_error("f1_classify: dataset is not single-label");
        out.push_back(*doc.labels.begin());
    }
    return out;
}

double f1_classify(const std::vector<Vec>& train_reps,
                   const std::vector<std::string>& train_labels,
                   const std::vector<Vec>& test_reps,
                   const std::vector<std::string>& test_labels, double l2_weight) {
    if (train_reps.empty() || test_reps.empty())
        throw std::runtime_error("f1_classify: empty input");
    if (train_reps.size() != train_labels.size() || test_reps.size() != test_labels.size())
        throw std::runtime_error("f1_classify: label count mismatch");

    std::vector<std::string> classes;
    std::unordered_map<std::string, std::size_t> class_of;
    for (const auto& l : train_labels)
        if (!class_of.count(l)) {
            class_of[l] = classes.size();
            classes.push_back(l);
        }
    for (const auto& l : test_labels)
        if (!class_of.count(l))
            throw std::runtime_error("f1_classify: test class '" + l + "' absent from training");

    const std::size_t K = classes.size();
    const std::size_t D = train_reps[0].size();
    const std::size_t n = train_reps.size();
    Matrix W(K, D, 0.0);
    Vec bias(K, 0.0);

    auto forward = [&](const Vec& x, Vec& probs) {
        for (std::size_t k = 0; k < K; ++k) probs[k] = bias[k] + dot(W.row(k), x.data(), D);
        const double mx = *std::max_element(probs.begin(), probs.end());
        double z = 0.0;
        for (double& p : probs) {
            p = std::exp(p - mx);
            z += p;
        }
        for (double& p : probs) p /= z;
    };

    auto loss_at = [&](const Matrix& w, const Vec& bs) {
        double loss = 0.0;
        Vec logits(K);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < K; ++k)
                logits[k] = bs[k] + dot(w.row(k), train_reps[i].data(), D);
            const double mx = *std::max_element(logits.begin(), logits.end());
            double z = 0.0;
            for (double l : logits) z += std::exp(l - mx);
            loss -= logits[class_of.at(train_labels[i])] - mx - std::log(z);
        }
        loss /= static_cast<double>(n);
        for (double x : w.data()) loss += l2_weight * x * x;
        return loss;
    };

    Matrix gW(K, D);
    Vec gb(K);
    Vec probs(K);
    double step = 1.0;
    for (std::size_t iter = 0; iter < 5000; ++iter) {
        gW.fill(0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            forward(train_reps[i], probs);
            probs[class_of.at(train_labels[i])] -= 1.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double r = probs[k] / static_cast<double>(n);
                gb[k] += r;
                double* grow = gW.row(k);
                const double* x = train_reps[i].data();
                for (std::size_t d = 0; d < D; ++d) grow[d] += r * x[d];
            }
        }
        for (std::size_t i = 0; i < gW.size(); ++i)
            gW.data()[i] += 2.0 * l2_weight * W.data()[i];

        double gnorm = dot(gb.data(), gb.data(), K);
        gnorm += dot(gW.data().data(), gW.data().data(), gW.size());
        gnorm = std::sqrt(gnorm);
        if (gnorm < 1e-6) break;

        // backtracking line search keeps full-batch descent stable
        const double base = loss_at(W, bias);
        step = std::min(step * 2.0, 1024.0);
        while (step > 1e-12) {
            Matrix Wn = W;
            Vec bn = bias;
            for (std::size_t i = 0; i < Wn.size(); ++i)
                Wn.data()[i] -= step * gW.data()[i];
            for (std::size_t k = 0; k < K; ++k) bn[k] -= step * gb[k];
            if (loss_at(Wn, bn) <= base - 0.5 * step * gnorm * gnorm) {
                W = std::move(Wn);
                bias = std::move(bn);
                break;
            }
            step *= 0.5;
        }
    }

    // macro F1 over the training classes
    std::vector<std::size_t> tp(K, 0), fp(K, 0), fn(K, 0);
    for (std::size_t i = 0; i < test_reps.size(); ++i) {
        forward(test_reps[i], probs);
        const std::size_t pred = static_cast<std::size_t>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        const std::size_t truth = class_of.at(test_labels[i]);
        if (pred == truth) {
            ++tp[truth];
        } else {
            ++fp[pred];
            ++fn[truth];
        }
    }
    double f1_sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double denom = static_cast<double>(2 * tp[k] + fp[k] + fn[k]);
        f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[k]) / denom : 0.0;
    }
    return f1_sum / static_cast<double>(K);
}

std::vector<Vec> corpus_representations(const Corpus& corpus, const CtxModel& model,
                                        const Matrix* embedding_prior,
                                        std::size_t threads) {
    std::vector<Vec> reps(corpus.documents.size());
    parallel_for(corpus.documents.size(), threads, [&](std::size_t i) {
        reps[i] = combined_representation(corpus.documents[i], model, embedding_prior);
    });
    return reps;
}

}  // namespace ntm
