#include "ntm/lstm.hpp"

#include <stdexcept>

namespace ntm {

namespace {

Matrix init_gate(std::size_t hidden, double scale, Rng& rng) {
    Matrix m(hidden, hidden);
    fill_uniform(m, -scale, scale, rng);
    return m;
}

// per-step, per-layer forward cache
struct CellTrace {
    Vec x, h_prev, C_prev;
    Vec f, i, chat, C, o, h, tanhC;
};

CellTrace step_traced(const Vec& x, const LmState& state, const LstmLayerParams& p) {
    const std::size_t H = state.h.size();
    CellTrace t;
    t.x = x;
    t.h_prev = state.h;
    t.C_prev = state.C;
    t.f.assign(H, 0.0);
    t.i.assign(H, 0.0);
    t.chat.assign(H, 0.0);
    t.o.assign(H, 0.0);

    Vec pf = p.bf, pi = p.bi, pc = p.bc, po = p.bo;
    gemv_add(p.Whf, state.h.data(), pf.data());
    gemv_add(p.Wxf, x.data(), pf.data());
    gemv_add(p.Whi, state.h.data(), pi.data());
    gemv_add(p.Wxi, x.data(), pi.data());
    gemv_add(p.Whc, state.h.data(), pc.data());
    gemv_add(p.Wxc, x.data(), pc.data());
    gemv_add(p.Who, state.h.data(), po.data());
    gemv_add(p.Wxo, x.data(), po.data());

    t.C.assign(H, 0.0);
    t.h.assign(H, 0.0);
    t.tanhC.assign(H, 0.0);
    for (std::size_t k = 0; k < H; ++k) {
        t.f[k] = sigmoid(pf[k]);
        t.i[k] = sigmoid(pi[k]);
        t.chat[k] = std::tanh(pc[k]);
        t.C[k] = t.f[k] * state.C[k] + t.i[k] * t.chat[k];
        t.o[k] = sigmoid(po[k]);
        t.tanhC[k] = std::tanh(t.C[k]);
        t.h[k] = t.tanhC[k] * t.o[k];
    }
    return t;
}

Vec embed_word(int v, EmbeddingMode mode, const Matrix& W, const Matrix* E) {
    const std::size_t H = W.rows();
    Vec x(H);
    const std::size_t col = static_cast<std::size_t>(v);
    for (std::size_t k = 0; k < H; ++k) x[k] = W(k, col);
    if (mode == EmbeddingMode::W_plus_E) {
        if (!E) throw std::runtime_error("lstm: W_plus_E mode requires an embedding matrix");
        for (std::size_t k = 0; k < H; ++k) x[k] += (*E)(k, col);
    }
    return x;
}

}  // namespace

LstmParams LstmParams::init(std::size_t hidden, std::size_t depth, Rng& rng) {
    if (depth == 0) throw std::runtime_error("lstm: depth must be >= 1");
    const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
    LstmParams p;
    p.layers.resize(depth);
    for (auto& layer : p.layers) {
        layer.Wxf = init_gate(hidden, scale, rng);
        layer.Wxi = init_gate(hidden, scale, rng);
        layer.Wxc = init_gate(hidden, scale, rng);
        layer.Wxo = init_gate(hidden, scale, rng);
        layer.Whf = init_gate(hidden, scale, rng);
        layer.Whi = init_gate(hidden, scale, rng);
        layer.Whc = init_gate(hidden, scale, rng);
        layer.Who = init_gate(hidden, scale, rng);
        layer.bf.assign(hidden, 1.0);  // keeps the forget gate open early on
        layer.bi.assign(hidden, 0.0);
        layer.bc.assign(hidden, 0.0);
        layer.bo.assign(hidden, 0.0);
    }
    return p;
}

LmState lstm_step(const Vec& x, const LmState& state, const LstmLayerParams& layer) {
    if (x.size() != layer.Wxf.cols() || state.h.size() != layer.Whf.cols())
        throw std::runtime_error("lstm_step: dimension mismatch");
    CellTrace t = step_traced(x, state, layer);
    return {std::move(t.h), std::move(t.C)};
}

std::vector<Vec> lm_hidden_states(const Document& doc, EmbeddingMode mode,
                                  const Matrix& W, const Matrix* E,
                                  const LstmParams& params) {
    const std::size_t N = doc.length();
    const std::size_t H = params.hidden_size();
    const std::size_t L = params.depth();
    if (N == 0) throw std::runtime_error("lstm: empty document");
    for (int id : doc.word_ids)
        if (id < 0 || static_cast<std::size_t>(id) >= W.cols())
            throw std::runtime_error("lstm: word id out of range");

    std::vector<Vec> out(N);
    std::vector<LmState> states(L, LmState::zeros(H));
    out[0] = Vec(H, 0.0);  // empty prefix
    for (std::size_t i = 1; i < N; ++i) {
        Vec x = embed_word(doc.word_ids[i - 1], mode, W, E);
        for (std::size_t l = 0; l < L; ++l) {
            states[l] = lstm_step(x, states[l], params.layers[l]);
            x = states[l].h;
        }
        out[i] = states[L - 1].h;
    }
    return out;
}

LstmGradients LstmGradients::zeros_like(const LstmParams& params, std::size_t vocab) {
    const std::size_t H = params.hidden_size();
    LstmGradients g;
    g.layers.resize(params.depth());
    for (auto& layer : g.layers) {
        layer.Wxf = Matrix(H, H);
        layer.Wxi = Matrix(H, H);
        layer.Wxc = Matrix(H, H);
        layer.Wxo = Matrix(H, H);
        layer.Whf = Matrix(H, H);
        layer.Whi = Matrix(H, H);
        layer.Whc = Matrix(H, H);
        layer.Who = Matrix(H, H);
        layer.bf.assign(H, 0.0);
        layer.bi.assign(H, 0.0);
        layer.bc.assign(H, 0.0);
        layer.bo.assign(H, 0.0);
    }
    g.W_embed = Matrix(H, vocab);
    return g;
}

void LstmGradients::accumulate(const LstmGradients& other, double scale) {
    auto addm = [scale](Matrix& a, const Matrix& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += scale * b.data()[i];
    };
    auto addv = [scale](Vec& a, const Vec& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        addm(layers[l].Wxf, other.layers[l].Wxf);
        addm(layers[l].Wxi, other.layers[l].Wxi);
        addm(layers[l].Wxc, other.layers[l].Wxc);
        addm(layers[l].Wxo, other.layers[l].Wxo);
        addm(layers[l].Whf, other.layers[l].Whf);
        addm(layers[l].Whi, other.layers[l].Whi);
        addm(layers[l].Whc, other.layers[l].Whc);
        addm(layers[l].Who, other.layers[l].Who);
        addv(layers[l].bf, other.layers[l].bf);
        addv(layers[l].bi, other.layers[l].bi);
        addv(layers[l].bc, other.layers[l].bc);
        addv(layers[l].bo, other.layers[l].bo);
    }
    addm(W_embed, other.W_embed);
}

void LstmGradients::scale(double s) {
    auto sm = [s](Matrix& a) {
        for (double& x : a.data()) x *= s;
    };
    auto sv = [s](Vec& a) {
        for (double& x : a) x *= s;
    };
    for (auto& l : layers) {
        sm(l.Wxf); sm(l.Wxi); sm(l.Wxc); sm(l.Wxo);
        sm(l.Whf); sm(l.Whi); sm(l.Whc); sm(l.Who);
        sv(l.bf); sv(l.bi); sv(l.bc); sv(l.bo);
    }
    sm(W_embed);
}

double LstmGradients::squared_norm() const {
    double acc = 0.0;
    auto nm = [&acc](const Matrix& a) {
        for (double x : a.data()) acc += x * x;
    };
    auto nv = [&acc](const Vec& a) {
        for (double x : a) acc += x * x;
    };
    for (const auto& l : layers) {
        nm(l.Wxf); nm(l.Wxi); nm(l.Wxc); nm(l.Wxo);
        nm(l.Whf); nm(l.Whi); nm(l.Whc); nm(l.Who);
        nv(l.bf); nv(l.bi); nv(l.bc); nv(l.bo);
    }
    nm(W_embed);
    return acc;
}

LstmGradients bptt_gradients(const Document& doc, const std::vector<Vec>& upstream,
                             const LstmParams& params, EmbeddingMode mode,
                             const Matrix& W, const Matrix* E) {
    const std::size_t N = doc.length();
    const std::size_t H = params.hidden_size();
    const std::size_t L = params.depth();
    if (upstream.size() != N) throw std::runtime_error("bptt: upstream size mismatch");
    for (const auto& u : upstream)
        if (u.size() != H) throw std::runtime_error("bptt: upstream width mismatch");

    LstmGradients g = LstmGradients::zeros_like(params, W.cols());
    const std::size_t T = N - 1;  // steps actually consumed
    if (T == 0) return g;

    // forward with full trace
    std::vector<std::vector<CellTrace>> trace(T, std::vector<CellTrace>(L));
    std::vector<LmState> states(L, LmState::zeros(H));
    for (std::size_t t = 0; t < T; ++t) {
        Vec x = embed_word(doc.word_ids[t], mode, W, E);
        for (std::size_t l = 0; l < L; ++l) {
            trace[t][l] = step_traced(x, states[l], params.layers[l]);
            states[l] = {trace[t][l].h, trace[t][l].C};
            x = trace[t][l].h;
        }
    }

    // reverse pass; dh/dC carry the gradient flowing into each layer's state
    std::vector<Vec> dh_carry(L, Vec(H, 0.0));
    std::vector<Vec> dC_carry(L, Vec(H, 0.0));
    Vec dpre_f(H), dpre_i(H), dpre_c(H), dpre_o(H), dx(H);
    for (std::size_t t = T; t-- > 0;) {
        // upstream[t+1] lands on the top-layer output of step t
        for (std::size_t k = 0; k < H; ++k) dh_carry[L - 1][k] += upstream[t + 1][k];
        for (std::size_t l = L; l-- > 0;) {
            const CellTrace& tr = trace[t][l];
            LstmLayerGradients& lg = g.layers[l];
            const LstmLayerParams& lp = params.layers[l];
            Vec dh = std::move(dh_carry[l]);
            Vec dC = std::move(dC_carry[l]);
            for (std::size_t k = 0; k < H; ++k) {
                const double do_ = dh[k] * tr.tanhC[k];
                dpre_o[k] = do_ * tr.o[k] * (1.0 - tr.o[k]);
                dC[k] += dh[k] * tr.o[k] * (1.0 - tr.tanhC[k] * tr.tanhC[k]);
                const double df = dC[k] * tr.C_prev[k];
                dpre_f[k] = df * tr.f[k] * (1.0 - tr.f[k]);
                const double di = dC[k] * tr.chat[k];
                dpre_i[k] = di * tr.i[k] * (1.0 - tr.i[k]);
                const double dchat = dC[k] * tr.i[k];
                dpre_c[k] = dchat * (1.0 - tr.chat[k] * tr.chat[k]);
            }
            ger_add(lg.Wxf, dpre_f.data(), tr.x.data());
            ger_add(lg.Wxi, dpre_i.data(), tr.x.data());
            ger_add(lg.Wxc, dpre_c.data(), tr.x.data());
            ger_add(lg.Wxo, dpre_o.data(), tr.x.data());
            ger_add(lg.Whf, dpre_f.data(), tr.h_prev.data());
            ger_add(lg.Whi, dpre_i.data(), tr.h_prev.data());
            ger_add(lg.Whc, dpre_c.data(), tr.h_prev.data());
            ger_add(lg.Who, dpre_o.data(), tr.h_prev.data());
            for (std::size_t k = 0; k < H; ++k) {
                lg.bf[k] += dpre_f[k];
                lg.bi[k] += dpre_i[k];
                lg.bc[k] += dpre_c[k];
                lg.bo[k] += dpre_o[k];
            }
            std::fill(dx.begin(), dx.end(), 0.0);
            gemv_t_add(lp.Wxf, dpre_f.data(), dx.data());
            gemv_t_add(lp.Wxi, dpre_i.data(), dx.data());
            gemv_t_add(lp.Wxc, dpre_c.data(), dx.data());
            gemv_t_add(lp.Wxo, dpre_o.data(), dx.data());
            Vec dh_prev(H, 0.0);
            gemv_t_add(lp.Whf, dpre_f.data(), dh_prev.data());
            gemv_t_add(lp.Whi, dpre_i.data(), dh_prev.data());
            gemv_t_add(lp.Whc, dpre_c.data(), dh_prev.data());
            gemv_t_add(lp.Who, dpre_o.data(), dh_prev.data());
            dh_carry[l] = std::move(dh_prev);
            Vec dC_prev(H);
            for (std::size_t k = 0; k < H; ++k) dC_prev[k] = dC[k] * tr.f[k];
            dC_carry[l] = std::move(dC_prev);
            if (l > 0) {
                // dx feeds the layer below's output at this same step
                for (std::size_t k = 0; k < H; ++k) dh_carry[l - 1][k] += dx[k];
            } else {
                const std::size_t col = static_cast<std::size_t>(doc.word_ids[t]);
                for (std::size_t k = 0; k < H; ++k) g.W_embed(k, col) += dx[k];
            }
        }
    }
    return g;
}

}  // namespace ntm
