#include "tagmt/toymt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <set>

#include "json.hpp"
#include "tagmt/textmetrics.hpp"
#include "tagmt/unicode.hpp"

namespace tagmt::toymt {

using nlohmann::ordered_json;

// --- config ----------------------------------------------------------------

std::string ToyMtConfig::to_json() const {
  ordered_json j;
  j["embedding_dim"] = embedding_dim;
  j["hidden_dim"] = hidden_dim;
  j["max_decode_length"] = max_decode_length;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["ema_decay"] = ema_decay;
  j["epochs"] = epochs;
  j["eval_interval"] = eval_interval;
  j["seed"] = seed;
  return j.dump();
}

ToyMtConfig ToyMtConfig::from_json(std::string_view text) {
  ToyMtConfig c;
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("toy model config: ") + e.what());
  }
  if (!j.is_object()) throw Error("toy model config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "embedding_dim") c.embedding_dim = value.get<std::size_t>();
      else if (key == "hidden_dim") c.hidden_dim = value.get<std::size_t>();
      else if (key == "max_decode_length") c.max_decode_length = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "ema_decay") c.ema_decay = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "eval_interval") c.eval_interval = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw Error("toy model config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw Error("toy model config: bad value for '" + key + "'");
    }
  }
  c.validate();
  return c;
}

void ToyMtConfig::validate() const {
  if (embedding_dim == 0 || hidden_dim == 0) throw Error("toy model config: dimensions must be positive");
  if (max_decode_length == 0 || batch_size == 0 || eval_interval == 0) {
    throw Error("toy model config: max_decode_length, batch_size and eval_interval must be positive");
  }
  if (!(learning_rate > 0)) throw Error("toy model config: learning rate must be positive");
  if (!(ema_decay >= 0 && ema_decay <= 1)) throw Error("toy model config: ema_decay must lie in [0, 1]");
}

// --- vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 4 || tokens_[kUnk] != kUnknown || tokens_[kBos] != kBegin || tokens_[kEos] != kEnd ||
      tokens_[kTag] != kTagToken) {
    throw Error("toy vocabulary: the first four entries must be <unk>, <s>, </s> and the tag token");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<std::uint32_t>(i)).second) {
      throw Error("toy vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
}

namespace {
std::vector<std::string> collect_tokens(const ParallelCorpus& corpus) {
  std::set<std::string> seen;
  for (const auto& p : corpus) {
    for (auto t : unicode::split_whitespace(p.source)) seen.emplace(t);
    for (auto t : unicode::split_whitespace(p.target)) seen.emplace(t);
  }
  std::vector<std::string> out = {std::string(kUnknown), std::string(kBegin), std::string(kEnd),
                                  std::string(kTagToken)};
  for (const auto& s : out) seen.erase(s);
  out.insert(out.end(), seen.begin(), seen.end());
  return out;
}
}  // namespace

Vocabulary::Vocabulary(const ParallelCorpus& corpus) : Vocabulary(collect_tokens(corpus)) {}

std::uint32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? static_cast<std::uint32_t>(kUnk) : it->second;
}

std::vector<std::uint32_t> Vocabulary::encode(std::string_view line) const {
  std::vector<std::uint32_t> ids;
  for (auto t : unicode::split_whitespace(line)) ids.push_back(id(t));
  return ids;
}

// --- network -----------------------------------------------------------------

namespace {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// y[out] += x[in] . W[in][out]
template <typename T>
void affine(T* y, const T* x, const T* w, std::size_t in, std::size_t out) {
  for (std::size_t i = 0; i < in; ++i) {
    const T xi = x[i];
    if (xi == T(0)) continue;
    const T* wr = w + i * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * wr[o];
  }
}

// Gradients of affine(): grad_w += x (outer) dy; dx += W dy.
template <typename T>
void affine_backward(const T* x, const T* dy, const T* w, T* grad_w, T* dx, std::size_t in, std::size_t out) {
  for (std::size_t i = 0; i < in; ++i) {
    const T xi = x[i];
    T* gr = grad_w + i * out;
    if (xi != T(0)) {
      for (std::size_t o = 0; o < out; ++o) gr[o] += xi * dy[o];
    }
    if (dx) dx[i] += dot(w + i * out, dy, out);
  }
}

template <typename T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
struct Gru {
  nn::Parameter<T>* w;    // [in][3H]   gates ordered reset | update | candidate
  nn::Parameter<T>* u;    // [H][3H]
  nn::Parameter<T>* b;    // [3H]
  nn::Parameter<T>* bhn;  // [H] recurrent bias of the candidate
};

template <typename T>
struct GruCache {
  std::vector<T> x, h, r, z, n, hn;
};

template <typename T>
void gru_forward(const Gru<T>& g, const T* x, std::size_t in, const T* h, std::size_t H, GruCache<T>& c, T* h_out) {
  c.x.assign(x, x + in);
  c.h.assign(h, h + H);
  std::vector<T> gx(g.b->value), gh(3 * H, T(0));
  affine(gx.data(), x, g.w->value.data(), in, 3 * H);
  affine(gh.data(), h, g.u->value.data(), H, 3 * H);
  c.r.resize(H);
  c.z.resize(H);
  c.n.resize(H);
  c.hn.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    c.r[k] = sigmoid(gx[k] + gh[k]);
    c.z[k] = sigmoid(gx[H + k] + gh[H + k]);
    c.hn[k] = gh[2 * H + k] + g.bhn->value[k];
    c.n[k] = std::tanh(gx[2 * H + k] + c.r[k] * c.hn[k]);
    h_out[k] = (T(1) - c.z[k]) * c.n[k] + c.z[k] * h[k];
  }
}

// Accumulates into dx[in] and dh_prev[H].
template <typename T>
void gru_backward(const Gru<T>& g, const GruCache<T>& c, const T* dh_out, std::size_t H, T* dx, T* dh_prev) {
  const std::size_t in = c.x.size();
  std::vector<T> dgx(3 * H), dgh(3 * H);
  for (std::size_t k = 0; k < H; ++k) {
    const T dz = dh_out[k] * (c.h[k] - c.n[k]);
    const T dn = dh_out[k] * (T(1) - c.z[k]);
    dh_prev[k] += dh_out[k] * c.z[k];
    const T dn_pre = dn * (T(1) - c.n[k] * c.n[k]);
    const T dr = dn_pre * c.hn[k];
    const T dhn = dn_pre * c.r[k];
    const T dr_pre = dr * c.r[k] * (T(1) - c.r[k]);
    const T dz_pre = dz * c.z[k] * (T(1) - c.z[k]);
    dgx[k] = dgh[k] = dr_pre;
    dgx[H + k] = dgh[H + k] = dz_pre;
    dgx[2 * H + k] = dn_pre;
    dgh[2 * H + k] = dhn;
    g.bhn->grad[k] += dhn;
  }
  for (std::size_t k = 0; k < 3 * H; ++k) g.b->grad[k] += dgx[k];
  affine_backward(c.x.data(), dgx.data(), g.w->value.data(), g.w->grad.data(), dx, in, 3 * H);
  affine_backward(c.h.data(), dgh.data(), g.u->value.data(), g.u->grad.data(), dh_prev, H, 3 * H);
}

template <typename T>
struct Net {
  Net(nn::ParameterSet<T>& p, const ToyMtConfig& cfg)
      : D(cfg.embedding_dim), H(cfg.hidden_dim) {
    auto get = [&](const char* name) { return &p[p.find(name)]; };
    src_emb = get("src.embedding");
    trg_emb = get("trg.embedding");
    V = src_emb->shape[0];
    enc_fwd = {get("enc.fwd.w"), get("enc.fwd.u"), get("enc.fwd.b"), get("enc.fwd.bhn")};
    enc_bwd = {get("enc.bwd.w"), get("enc.bwd.u"), get("enc.bwd.b"), get("enc.bwd.bhn")};
    dec = {get("dec.gru.w"), get("dec.gru.u"), get("dec.gru.b"), get("dec.gru.bhn")};
    init_w = get("dec.init.w");
    init_b = get("dec.init.b");
    att_w = get("att.w");
    comb_w = get("att.combine.w");
    comb_b = get("att.combine.b");
    out_w = get("out.w");
    out_b = get("out.b");
  }
  std::size_t D, H, V;
  nn::Parameter<T>*src_emb, *trg_emb;
  Gru<T> enc_fwd, enc_bwd, dec;
  nn::Parameter<T>*init_w, *init_b, *att_w, *comb_w, *comb_b, *out_w, *out_b;

  std::size_t clamp_id(std::uint32_t id) const { return id < V ? id : Vocabulary::kUnk; }
};

template <typename T>
struct Encoded {
  std::size_t length = 0;
  std::vector<GruCache<T>> fwd, bwd;
  std::vector<T> states;  // [S][2H] forward half then backward half
  std::vector<T> mean;    // [2H]
  std::vector<T> init;    // [H] initial decoder state
  std::vector<T> keys;    // [S][H] = states . att_w
};

template <typename T>
void encode(const Net<T>& net, const std::vector<std::uint32_t>& ids, Encoded<T>& enc) {
  const std::size_t S = ids.size(), H = net.H, D = net.D, H2 = 2 * H;
  enc.length = S;
  enc.fwd.resize(S);
  enc.bwd.resize(S);
  enc.states.assign(S * H2, T(0));
  std::vector<T> h(H, T(0)), next(H);
  for (std::size_t j = 0; j < S; ++j) {
    const T* x = net.src_emb->value.data() + net.clamp_id(ids[j]) * D;
    gru_forward(net.enc_fwd, x, D, h.data(), H, enc.fwd[j], next.data());
    h = next;
    std::copy(h.begin(), h.end(), enc.states.begin() + static_cast<std::ptrdiff_t>(j * H2));
  }
  std::fill(h.begin(), h.end(), T(0));
  for (std::size_t j = S; j-- > 0;) {
    const T* x = net.src_emb->value.data() + net.clamp_id(ids[j]) * D;
    gru_forward(net.enc_bwd, x, D, h.data(), H, enc.bwd[j], next.data());
    h = next;
    std::copy(h.begin(), h.end(), enc.states.begin() + static_cast<std::ptrdiff_t>(j * H2 + H));
  }
  enc.mean.assign(H2, T(0));
  for (std::size_t j = 0; j < S; ++j) {
    for (std::size_t k = 0; k < H2; ++k) enc.mean[k] += enc.states[j * H2 + k];
  }
  for (auto& m : enc.mean) m /= static_cast<T>(S);
  enc.init = net.init_b->value;
  affine(enc.init.data(), enc.mean.data(), net.init_w->value.data(), H2, H);
  for (auto& v : enc.init) v = std::tanh(v);
  enc.keys.assign(S * H, T(0));
  for (std::size_t j = 0; j < S; ++j) {
    affine(enc.keys.data() + j * H, enc.states.data() + j * H2, net.att_w->value.data(), H2, H);
  }
}

template <typename T>
struct Step {
  std::uint32_t prev = Vocabulary::kBos;
  GruCache<T> gru;
  std::vector<T> state;     // [H] decoder state
  std::vector<T> alpha;     // [S]
  std::vector<T> combined;  // [3H] context then state
  std::vector<T> attn;      // [H] attentional output, fed to the next step
  std::vector<T> probs;     // [V]
};

bool masked(std::size_t id) { return id == Vocabulary::kTag || id == Vocabulary::kBos; }

// One decoder step from (state, attn) of the previous step.
template <typename T>
void decode_step(const Net<T>& net, const Encoded<T>& enc, const T* prev_state, const T* prev_attn,
                 std::uint32_t prev, Step<T>& st) {
  const std::size_t H = net.H, D = net.D, H2 = 2 * H, S = enc.length, V = net.V;
  st.prev = prev;
  std::vector<T> input(D + H);
  std::copy_n(net.trg_emb->value.data() + net.clamp_id(prev) * D, D, input.data());
  std::copy_n(prev_attn, H, input.data() + D);
  st.state.resize(H);
  gru_forward(net.dec, input.data(), D + H, prev_state, H, st.gru, st.state.data());

  st.alpha.resize(S);
  T best = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < S; ++j) {
    st.alpha[j] = dot(st.state.data(), enc.keys.data() + j * H, H);
    best = std::max(best, st.alpha[j]);
  }
  T total = 0;
  for (auto& a : st.alpha) total += (a = std::exp(a - best));
  for (auto& a : st.alpha) a /= total;

  st.combined.assign(3 * H, T(0));
  for (std::size_t j = 0; j < S; ++j) {
    const T a = st.alpha[j];
    const T* h = enc.states.data() + j * H2;
    for (std::size_t k = 0; k < H2; ++k) st.combined[k] += a * h[k];
  }
  std::copy(st.state.begin(), st.state.end(), st.combined.begin() + static_cast<std::ptrdiff_t>(H2));
  st.attn = net.comb_b->value;
  affine(st.attn.data(), st.combined.data(), net.comb_w->value.data(), 3 * H, H);
  for (auto& v : st.attn) v = std::tanh(v);

  st.probs = net.out_b->value;
  affine(st.probs.data(), st.attn.data(), net.out_w->value.data(), H, V);
  best = -std::numeric_limits<T>::infinity();
  for (std::size_t v = 0; v < V; ++v) {
    if (!masked(v)) best = std::max(best, st.probs[v]);
  }
  total = 0;
  for (std::size_t v = 0; v < V; ++v) {
    st.probs[v] = masked(v) ? T(0) : std::exp(st.probs[v] - best);
    total += st.probs[v];
  }
  for (auto& p : st.probs) p /= total;
}

// Loss of one sequence; accumulates gradients scaled by `scale` when asked.
template <typename T>
double sequence_forward_backward(Net<T>& net, const Sequence& seq, bool with_grad, T scale, Encoded<T>& enc,
                                 std::vector<Step<T>>& steps) {
  const std::size_t H = net.H, D = net.D, H2 = 2 * H, V = net.V;
  encode(net, seq.source, enc);
  const std::size_t S = enc.length;
  const std::size_t n = seq.target.size() + 1;
  steps.resize(n);
  const std::vector<T> zero(H, T(0));
  double loss = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const T* prev_state = t == 0 ? enc.init.data() : steps[t - 1].state.data();
    const T* prev_attn = t == 0 ? zero.data() : steps[t - 1].attn.data();
    const std::uint32_t prev = t == 0 ? static_cast<std::uint32_t>(Vocabulary::kBos) : seq.target[t - 1];
    decode_step(net, enc, prev_state, prev_attn, prev, steps[t]);
    const std::size_t gold = t < seq.target.size() ? net.clamp_id(seq.target[t]) : Vocabulary::kEos;
    loss -= std::log(std::max(static_cast<double>(steps[t].probs[gold]), 1e-300));
  }
  if (!with_grad) return loss;

  std::vector<T> ds_next(H, T(0)), da_next(H, T(0));
  std::vector<T> dstates(S * H2, T(0)), dkeys(S * H, T(0));
  std::vector<T> dlogits(V), da(H), dcomb(3 * H), ds(H), du(D + H), ds_prev(H), dalpha(S);
  for (std::size_t t = n; t-- > 0;) {
    auto& st = steps[t];
    const std::size_t gold = t < seq.target.size() ? net.clamp_id(seq.target[t]) : Vocabulary::kEos;
    for (std::size_t v = 0; v < V; ++v) dlogits[v] = st.probs[v] * scale;
    dlogits[gold] -= scale;
    for (std::size_t v = 0; v < V; ++v) net.out_b->grad[v] += dlogits[v];
    da = da_next;
    affine_backward(st.attn.data(), dlogits.data(), net.out_w->value.data(), net.out_w->grad.data(), da.data(), H, V);
    for (std::size_t k = 0; k < H; ++k) {
      da[k] *= T(1) - st.attn[k] * st.attn[k];
      net.comb_b->grad[k] += da[k];
    }
    std::fill(dcomb.begin(), dcomb.end(), T(0));
    affine_backward(st.combined.data(), da.data(), net.comb_w->value.data(), net.comb_w->grad.data(), dcomb.data(),
                    3 * H, H);
    for (std::size_t k = 0; k < H; ++k) ds[k] = dcomb[H2 + k] + ds_next[k];
    // attention: context = sum_j alpha_j states_j, alpha = softmax(state . keys_j)
    T weighted = 0;
    for (std::size_t j = 0; j < S; ++j) {
      const T* h = enc.states.data() + j * H2;
      dalpha[j] = dot(dcomb.data(), h, H2);
      weighted += st.alpha[j] * dalpha[j];
      T* dh = dstates.data() + j * H2;
      for (std::size_t k = 0; k < H2; ++k) dh[k] += st.alpha[j] * dcomb[k];
    }
    for (std::size_t j = 0; j < S; ++j) {
      const T dscore = st.alpha[j] * (dalpha[j] - weighted);
      const T* key = enc.keys.data() + j * H;
      T* dkey = dkeys.data() + j * H;
      for (std::size_t k = 0; k < H; ++k) {
        ds[k] += dscore * key[k];
        dkey[k] += dscore * st.state[k];
      }
    }
    std::fill(du.begin(), du.end(), T(0));
    std::fill(ds_prev.begin(), ds_prev.end(), T(0));
    gru_backward(net.dec, st.gru, ds.data(), H, du.data(), ds_prev.data());
    T* ge = net.trg_emb->grad.data() + net.clamp_id(st.prev) * D;
    for (std::size_t k = 0; k < D; ++k) ge[k] += du[k];
    std::copy(du.begin() + static_cast<std::ptrdiff_t>(D), du.end(), da_next.begin());
    ds_next = ds_prev;
  }
  // initial state = tanh(mean . init_w + init_b)
  std::vector<T> dmean(H2, T(0));
  for (std::size_t k = 0; k < H; ++k) {
    ds_next[k] *= T(1) - enc.init[k] * enc.init[k];
    net.init_b->grad[k] += ds_next[k];
  }
  affine_backward(enc.mean.data(), ds_next.data(), net.init_w->value.data(), net.init_w->grad.data(), dmean.data(),
                  H2, H);
  for (std::size_t j = 0; j < S; ++j) {
    T* dh = dstates.data() + j * H2;
    for (std::size_t k = 0; k < H2; ++k) dh[k] += dmean[k] / static_cast<T>(S);
    affine_backward(enc.states.data() + j * H2, dkeys.data() + j * H, net.att_w->value.data(), net.att_w->grad.data(),
                    dh, H2, H);
  }
  // encoder directions, each in reverse of its processing order
  std::vector<T> carry(H), carry_prev(H), dx(D), dh(H);
  auto embed_grad = [&](std::size_t j) {
    T* g = net.src_emb->grad.data() + net.clamp_id(seq.source[j]) * D;
    for (std::size_t k = 0; k < D; ++k) g[k] += dx[k];
  };
  std::fill(carry.begin(), carry.end(), T(0));
  for (std::size_t j = S; j-- > 0;) {
    for (std::size_t k = 0; k < H; ++k) dh[k] = dstates[j * H2 + k] + carry[k];
    std::fill(dx.begin(), dx.end(), T(0));
    std::fill(carry_prev.begin(), carry_prev.end(), T(0));
    gru_backward(net.enc_fwd, enc.fwd[j], dh.data(), H, dx.data(), carry_prev.data());
    embed_grad(j);
    carry.swap(carry_prev);
  }
  std::fill(carry.begin(), carry.end(), T(0));
  for (std::size_t j = 0; j < S; ++j) {
    for (std::size_t k = 0; k < H; ++k) dh[k] = dstates[j * H2 + H + k] + carry[k];
    std::fill(dx.begin(), dx.end(), T(0));
    std::fill(carry_prev.begin(), carry_prev.end(), T(0));
    gru_backward(net.enc_bwd, enc.bwd[j], dh.data(), H, dx.data(), carry_prev.data());
    embed_grad(j);
    carry.swap(carry_prev);
  }
  return loss;
}

}  // namespace

template <typename T>
void declare_parameters(nn::ParameterSet<T>& p, const ToyMtConfig& cfg, std::size_t V) {
  const std::size_t D = cfg.embedding_dim, H = cfg.hidden_dim;
  p.add("src.embedding", {V, D});
  p.add("trg.embedding", {V, D});
  for (const char* dir : {"enc.fwd", "enc.bwd"}) {
    const std::string d(dir);
    p.add(d + ".w", {D, 3 * H});
    p.add(d + ".u", {H, 3 * H});
    p.add(d + ".b", {3 * H});
    p.add(d + ".bhn", {H});
  }
  p.add("dec.init.w", {2 * H, H});
  p.add("dec.init.b", {H});
  p.add("dec.gru.w", {D + H, 3 * H});
  p.add("dec.gru.u", {H, 3 * H});
  p.add("dec.gru.b", {3 * H});
  p.add("dec.gru.bhn", {H});
  p.add("att.w", {2 * H, H});
  p.add("att.combine.w", {3 * H, H});
  p.add("att.combine.b", {H});
  p.add("out.w", {H, V});
  p.add("out.b", {V});
}

template <typename T>
double sequence_loss(nn::ParameterSet<T>& params, const ToyMtConfig& config, const std::vector<const Sequence*>& batch,
                     bool with_grad) {
  if (batch.empty()) throw Error("toy model: empty batch");
  Net<T> net(params, config);
  std::size_t tokens = 0;
  for (const auto* s : batch) {
    if (s->source.empty()) throw Error("toy model: empty source sequence");
    tokens += s->target.size() + 1;
  }
  const T scale = static_cast<T>(1.0 / static_cast<double>(tokens));
  Encoded<T> enc;
  std::vector<Step<T>> steps;
  double loss = 0;
  for (const auto* s : batch) loss += sequence_forward_backward(net, *s, with_grad, scale, enc, steps);
  return loss / static_cast<double>(tokens);
}

template void declare_parameters<float>(nn::ParameterSet<float>&, const ToyMtConfig&, std::size_t);
template void declare_parameters<double>(nn::ParameterSet<double>&, const ToyMtConfig&, std::size_t);
template double sequence_loss<float>(nn::ParameterSet<float>&, const ToyMtConfig&, const std::vector<const Sequence*>&,
                                     bool);
template double sequence_loss<double>(nn::ParameterSet<double>&, const ToyMtConfig&,
                                      const std::vector<const Sequence*>&, bool);

// --- model -------------------------------------------------------------------

ToyMtModel::ToyMtModel(ToyMtConfig config, Vocabulary vocab) : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  declare_parameters(params_, config_, vocab_.size());
  const auto seed = derive_seed(config_.seed, "toymt.init");
  for (auto& p : params_) {
    if (p.name.ends_with("embedding")) {
      nn::init_uniform(p, seed, 0.1);
    } else if (p.shape.size() == 2) {
      nn::init_fan_scaled(p, seed, p.shape[0], p.shape[1]);
    }
  }
}

Sequence ToyMtModel::sequence(const SentencePair& pair) const {
  return {encode_source(pair.source, pair.tagged), vocab_.encode(pair.target)};
}

std::vector<std::uint32_t> ToyMtModel::encode_source(std::string_view source, bool natural) const {
  if (unicode::trim(source).empty()) throw Error("toy model: empty source sentence");
  std::vector<std::uint32_t> ids;
  if (natural) ids.push_back(Vocabulary::kTag);
  for (auto id : vocab_.encode(source)) ids.push_back(id);
  return ids;
}

std::vector<std::uint32_t> ToyMtModel::decode_ids(const std::vector<std::uint32_t>& source_ids,
                                                  std::size_t beam) const {
  if (source_ids.empty()) throw Error("toy model: empty source sentence");
  if (beam == 0) throw Error("toy model: beam size must be positive");
  auto& params = const_cast<nn::ParameterSet<float>&>(params_);  // decoding only reads values
  Net<float> net(params, config_);
  Encoded<float> enc;
  encode(net, source_ids, enc);
  const std::size_t H = net.H, V = net.V;
  const std::size_t cap = std::min(config_.max_decode_length, 2 * source_ids.size() + 10);

  struct Hyp {
    std::vector<std::uint32_t> tokens;
    double log_prob = 0;
    std::vector<float> state, attn;
  };
  std::vector<Hyp> alive{{{}, 0.0, enc.init, std::vector<float>(H, 0.0f)}};
  std::vector<std::pair<double, std::vector<std::uint32_t>>> finished;  // (normalized score, tokens)
  Step<float> st;
  for (std::size_t len = 0; len < cap && !alive.empty() && finished.size() < beam; ++len) {
    struct Candidate {
      double score;
      std::size_t hyp;
      std::uint32_t token;
    };
    std::vector<Candidate> cands;
    std::vector<Step<float>> expanded(alive.size());
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const auto prev = alive[h].tokens.empty() ? static_cast<std::uint32_t>(Vocabulary::kBos) : alive[h].tokens.back();
      decode_step(net, enc, alive[h].state.data(), alive[h].attn.data(), prev, expanded[h]);
      for (std::uint32_t v = 0; v < V; ++v) {
        if (masked(v)) continue;
        const double lp = std::log(std::max(static_cast<double>(expanded[h].probs[v]), 1e-300));
        cands.push_back({alive[h].log_prob + lp, h, v});
      }
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });
    std::vector<Hyp> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = cands[k];
      if (c.token == Vocabulary::kEos) {
        finished.emplace_back(c.score / static_cast<double>(alive[c.hyp].tokens.size() + 1), alive[c.hyp].tokens);
        continue;
      }
      Hyp h{alive[c.hyp].tokens, c.score, expanded[c.hyp].state, expanded[c.hyp].attn};
      h.tokens.push_back(c.token);
      next.push_back(std::move(h));
    }
    alive = std::move(next);
    if (beam == 1 && !finished.empty()) break;
  }
  for (const auto& h : alive) {  // length cap reached
    finished.emplace_back(h.log_prob / static_cast<double>(std::max<std::size_t>(1, h.tokens.size())), h.tokens);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].first > finished[best].first) best = i;
  }
  return finished[best].second;
}

std::string ToyMtModel::decode(std::string_view source, bool natural, std::size_t beam) const {
  const auto ids = decode_ids(encode_source(source, natural), beam);
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab_.token(ids[i]);
  }
  return out;
}

void ToyMtModel::save_file(const std::string& path) const {
  nn::Checkpoint c;
  c.kind = "toymt";
  ordered_json j;
  j["version"] = 1;
  j["config"] = ordered_json::parse(config_.to_json());
  j["vocab"] = vocab_.tokens();
  c.config_json = j.dump();
  c.params = params_;
  c.save_file(path);
}

ToyMtModel ToyMtModel::load_file(const std::string& path) {
  const auto c = nn::Checkpoint::load_file(path);
  if (c.kind != "toymt") throw Error("'" + path + "' is a " + c.kind + " checkpoint, not a toy translation model");
  ToyMtModel m;
  try {
    const auto j = ordered_json::parse(c.config_json);
    if (j.at("version").get<int>() != 1) throw Error("unsupported toy model checkpoint version");
    m.config_ = ToyMtConfig::from_json(j.at("config").dump());
    m.vocab_ = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("toy model checkpoint '" + path + "': " + e.what());
  }
  declare_parameters(m.params_, m.config_, m.vocab_.size());
  m.params_.assign_values(c.params);
  return m;
}

// --- training ----------------------------------------------------------------

void ToyTrainingLog::write_tsv(std::ostream& out) const {
  char buf[128];
  for (const auto& w : warnings) out << "warning\t" << w << '\n';
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "loss\t%zu\t%.6f\n", s.step, s.loss);
    out << buf;
  }
  for (const auto& e : evaluations) {
    std::snprintf(buf, sizeof buf, "dev\t%zu\t%.6f\t%.4f\n", e.step, e.mean_loss, e.dev_bleu);
    out << buf;
  }
  if (!evaluations.empty()) {
    std::snprintf(buf, sizeof buf, "best\t%zu\t%.4f\n", evaluations[best_evaluation].step,
                  evaluations[best_evaluation].dev_bleu);
    out << buf;
  }
}

double dev_score(const ToyMtModel& model, const ParallelCorpus& dev) {
  if (dev.empty()) throw Error("toy model: empty dev set");
  std::vector<std::string> hyps, refs;
  for (bool natural : {false, true}) {
    for (const auto& p : dev) {
      hyps.push_back(model.decode(p.source, natural));
      refs.push_back(p.target);
    }
  }
  const bool any = std::any_of(hyps.begin(), hyps.end(), [](const std::string& h) { return !h.empty(); });
  return any ? metrics::corpus_bleu(hyps, refs).score : 0.0;
}

ToyTrainingResult train_toymt(const ParallelCorpus& train, const ParallelCorpus& dev, const ToyMtConfig& config) {
  config.validate();
  if (train.empty()) throw Error("toy model: empty training corpus");
  if (dev.empty()) throw Error("toy model: empty dev set");
  ToyTrainingResult result{ToyMtModel(config, Vocabulary(train)), {}};
  auto& model = result.model;
  auto& log = result.log;

  const auto tagged = static_cast<std::size_t>(std::count_if(train.begin(), train.end(), [](const SentencePair& p) {
    return p.tagged;
  }));
  if (tagged == 0 || tagged == train.size()) {
    log.warnings.push_back("training data has a single domain (" + std::to_string(tagged) + " of " +
                           std::to_string(train.size()) + " pairs tagged); the tag is uninformative");
  }

  std::vector<Sequence> seqs;
  seqs.reserve(train.size());
  for (const auto& p : train) seqs.push_back(model.sequence(p));
  std::vector<std::size_t> order(seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng order_rng(derive_seed(config.seed, "toymt.order"));

  auto adagrad = nn::make_adagrad(model.params(), config.learning_rate);
  auto ema = nn::make_ema(model.params(), config.ema_decay);
  const std::size_t steps_per_epoch = (seqs.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * std::max<std::size_t>(1, config.epochs);

  ToyMtModel evaluated = model;
  nn::ParameterSet<float> best;
  double best_score = -1;
  double interval_loss = 0;
  std::size_t interval_steps = 0;
  std::vector<const Sequence*> batch;
  for (std::size_t step = 1; step <= total_steps; ++step) {
    const std::size_t slot = (step - 1) % steps_per_epoch;
    if (slot == 0) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    }
    batch.clear();
    for (std::size_t k = slot * config.batch_size; k < std::min(seqs.size(), (slot + 1) * config.batch_size); ++k) {
      batch.push_back(&seqs[order[k]]);
    }
    model.params().zero_grad();
    const double loss = sequence_loss(model.params(), config, batch, true);
    if (!std::isfinite(loss)) throw Error("toy model training: non-finite loss at step " + std::to_string(step));
    nn::adagrad_update(model.params(), adagrad);
    nn::ema_update(ema, model.params());
    log.steps.push_back({step, loss});
    interval_loss += loss;
    ++interval_steps;

    if (step % config.eval_interval == 0 || step == total_steps) {
      evaluated.params() = nn::with_shadow(model.params(), ema);
      const double score = dev_score(evaluated, dev);
      log.evaluations.push_back({step, interval_loss / static_cast<double>(interval_steps), score});
      interval_loss = 0;
      interval_steps = 0;
      if (score > best_score) {
        best_score = score;
        best = evaluated.params();
        log.best_evaluation = log.evaluations.size() - 1;
      }
    }
  }
  model.params() = std::move(best);
  model.params().zero_grad();
  return result;
}

}  // namespace tagmt::toymt
