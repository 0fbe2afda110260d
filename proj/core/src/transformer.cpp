#include "icl/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace icl {

namespace {

struct SparseRow {
  int row = 0;
  std::vector<std::pair<int, double>> entries;
};
using Sparse = std::vector<SparseRow>;

// Kernels work on a row-major copy so that slab rows are contiguous.
using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Sparse sparsify(const Mat& M) {
  Sparse out;
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    SparseRow sr;
    sr.row = static_cast<int>(r);
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      if (M(r, c) != 0.0) sr.entries.emplace_back(static_cast<int>(c), M(r, c));
    if (!sr.entries.empty()) out.push_back(std::move(sr));
  }
  return out;
}

// Row `sr` of M times H.
void row_times(const SparseRow& sr, const RMat& H, RMat& out, Eigen::Index out_row) {
  auto dst = out.row(out_row);
  dst.setZero();
  for (const auto& [c, v] : sr.entries) dst += v * H.row(c);
}

struct CompiledHead {
  Sparse V;
  // Rows where both Q and K are nonzero; other rows cannot reach the score.
  std::vector<SparseRow> Q, K;
};

CompiledHead compile_head(const AttentionHead& h) {
  CompiledHead c;
  c.V = sparsify(h.V);
  Sparse q = sparsify(h.Q), k = sparsify(h.K);
  std::map<int, const SparseRow*> krows;
  for (const SparseRow& r : k) krows[r.row] = &r;
  for (const SparseRow& r : q) {
    auto it = krows.find(r.row);
    if (it == krows.end()) continue;
    c.Q.push_back(r);
    c.K.push_back(*it->second);
  }
  return c;
}

struct CompiledLayer {
  std::vector<CompiledHead> heads;
  Sparse U, W;
};

CompiledLayer compile_layer(const LayerWeights& lw) {
  CompiledLayer c;
  for (const AttentionHead& h : lw.heads) c.heads.push_back(compile_head(h));
  c.U = sparsify(lw.U);
  c.W = sparsify(lw.W);
  return c;
}

void check_head_shapes(const Mat& H, const AttentionHead& h) {
  const Eigen::Index D = H.rows();
  if (h.Q.rows() != D || h.Q.cols() != D || h.K.rows() != D || h.K.cols() != D || h.V.rows() != D ||
      h.V.cols() != D)
    throw Error(ErrorKind::ShapeMismatch, "attention weights must be D x D");
  if (H.cols() < 2) throw Error(ErrorKind::ShapeMismatch, "hidden state needs N >= 1");
}

// Sum over heads of V H sigma((QH)^T KH), divided by N, for every row any V
// touches. The logistic is split as 1/2 + tanh(s/2)/2. The 1/2 part of each
// head is a compensated row sum of VH, so paired +V/-V heads cancel it
// exactly; the tanh part is a plain product. Per-head pieces are combined
// with one compensated sum per output entry. When every head's KH is
// constant across columns the score does not depend on the output column
// and one column is computed and broadcast.
struct AttentionDelta {
  std::vector<int> rows;
  Mat values;  // rows.size() x cols (cols = 1 when broadcast)
  bool broadcast = false;
};

AttentionDelta attention_delta(const RMat& H, const std::vector<CompiledHead>& heads) {
  const Eigen::Index cols = H.cols();
  const double N = static_cast<double>(cols - 1);

  std::set<int> row_set;
  for (const CompiledHead& h : heads)
    for (const SparseRow& r : h.V) row_set.insert(r.row);
  AttentionDelta out;
  out.rows.assign(row_set.begin(), row_set.end());
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < out.rows.size(); ++i) slot[out.rows[i]] = i;

  struct HeadData {
    RMat QH, KH, VH;
    std::vector<std::size_t> vslot;
  };
  std::vector<HeadData> data(heads.size());
  bool broadcast = true;
  for (std::size_t m = 0; m < heads.size(); ++m) {
    const CompiledHead& h = heads[m];
    HeadData& hd = data[m];
    hd.QH.resize(static_cast<Eigen::Index>(h.Q.size()), cols);
    hd.KH.resize(static_cast<Eigen::Index>(h.K.size()), cols);
    hd.VH.resize(static_cast<Eigen::Index>(h.V.size()), cols);
    for (std::size_t r = 0; r < h.Q.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      row_times(h.Q[r], H, hd.QH, ri);
      row_times(h.K[r], H, hd.KH, ri);
      if ((hd.KH.row(ri).array() != hd.KH(ri, 0)).any()) broadcast = false;
    }
    for (std::size_t r = 0; r < h.V.size(); ++r) {
      row_times(h.V[r], H, hd.VH, static_cast<Eigen::Index>(r));
      hd.vslot.push_back(slot[h.V[r].row]);
    }
  }

  const Eigen::Index out_cols = broadcast ? 1 : cols;
  out.broadcast = broadcast;
  std::vector<NeumaierSum> acc(out.rows.size() * static_cast<std::size_t>(out_cols));
  for (const HeadData& hd : data) {
    if (hd.VH.rows() == 0) continue;
    Mat dev;  // cols x out_cols, tanh(s/2)/2
    if (hd.QH.rows() > 0) {
      dev = (hd.QH.transpose() * hd.KH.leftCols(out_cols)).eval();
      dev = (0.5 * (0.5 * dev.array()).tanh()).matrix();
    }
    const Mat tail = hd.QH.rows() > 0 ? Mat(hd.VH * dev) : Mat::Zero(hd.VH.rows(), out_cols);
    for (Eigen::Index r = 0; r < hd.VH.rows(); ++r) {
      NeumaierSum half;
      for (Eigen::Index j = 0; j < cols; ++j) half.add(hd.VH(r, j));
      const double h = 0.5 * half.value();
      for (Eigen::Index c = 0; c < out_cols; ++c) {
        NeumaierSum& a = acc[hd.vslot[r] * static_cast<std::size_t>(out_cols) + c];
        a.add(h);
        a.add(tail(r, c));
      }
    }
  }
  out.values.resize(static_cast<Eigen::Index>(out.rows.size()), out_cols);
  for (std::size_t i = 0; i < out.rows.size(); ++i)
    for (Eigen::Index c = 0; c < out_cols; ++c)
      out.values(i, c) = acc[i * static_cast<std::size_t>(out_cols) + c].value() / N;
  return out;
}

void apply_attention(RMat& H, const std::vector<CompiledHead>& heads) {
  const AttentionDelta d = attention_delta(H, heads);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    if (d.broadcast)
      H.row(d.rows[i]).array() += d.values(i, 0);
    else
      H.row(d.rows[i]) += d.values.row(i);
  }
}

void apply_ff(RMat& H, const Sparse& U, const Sparse& W) {
  const Eigen::Index cols = H.cols();
  std::map<int, Eigen::Index> zslot;
  RMat Z(static_cast<Eigen::Index>(W.size()), cols);
  for (std::size_t k = 0; k < W.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    row_times(W[k], H, Z, ki);
    Z.row(ki) = Z.row(ki).cwiseMax(0.0);
    zslot[W[k].row] = ki;
  }
  RMat updated(static_cast<Eigen::Index>(U.size()), cols);
  std::vector<NeumaierSum> acc(static_cast<std::size_t>(cols));
  for (std::size_t r = 0; r < U.size(); ++r) {
    for (Eigen::Index j = 0; j < cols; ++j) acc[j] = NeumaierSum{H(U[r].row, j), 0.0};
    for (const auto& [k, v] : U[r].entries) {
      auto it = zslot.find(k);
      if (it == zslot.end()) continue;
      for (Eigen::Index j = 0; j < cols; ++j) acc[j].add(v * Z(it->second, j));
    }
    for (Eigen::Index j = 0; j < cols; ++j) updated(static_cast<Eigen::Index>(r), j) = acc[j].value();
  }
  for (std::size_t r = 0; r < U.size(); ++r) H.row(U[r].row) = updated.row(static_cast<Eigen::Index>(r));
}

}  // namespace

std::string SlabLayout::slab_of(int row) const {
  if (row < 0 || row >= D()) return "out_of_range";
  if (row < d) return "x";
  if (row == ones()) return "ones";
  if (row == y()) return "y";
  if (row == w()) return "w";
  if (row <= phi(n)) return "phi";
  if (row <= rho(n)) return "rho";
  if (row == lambda()) return "lambda";
  return "yhat";
}

const char* to_string(BlockTag tag) {
  switch (tag) {
    case BlockTag::Attn0FF0: return "Attn0FF0";
    case BlockTag::Attn1FF1: return "Attn1FF1";
    case BlockTag::Attn2FF2: return "Attn2FF2";
  }
  return "Unknown";
}

BlockTag block_tag_from_string(const std::string& s) {
  if (s == "Attn0FF0") return BlockTag::Attn0FF0;
  if (s == "Attn1FF1") return BlockTag::Attn1FF1;
  if (s == "Attn2FF2") return BlockTag::Attn2FF2;
  throw Error(ErrorKind::InvalidConfig, "unknown block tag '" + s + "'");
}

Mat attention_op(const Mat& H, const AttentionHead& head) {
  check_head_shapes(H, head);
  const AttentionDelta d = attention_delta(RMat(H), {compile_head(head)});
  Mat out = Mat::Zero(H.rows(), H.cols());
  for (std::size_t i = 0; i < d.rows.size(); ++i)
    for (Eigen::Index c = 0; c < H.cols(); ++c) out(d.rows[i], c) = d.values(i, d.broadcast ? 0 : c);
  return out;
}

Mat attention_layer(const Mat& H, const std::vector<AttentionHead>& heads) {
  std::vector<CompiledHead> compiled;
  for (const AttentionHead& h : heads) {
    check_head_shapes(H, h);
    compiled.push_back(compile_head(h));
  }
  RMat out = H;
  apply_attention(out, compiled);
  return out;
}

Mat ff_layer(const Mat& H, const Mat& U, const Mat& W) {
  const Eigen::Index D = H.rows();
  if (U.rows() != D || W.cols() != D || U.cols() != W.rows())
    throw Error(ErrorKind::ShapeMismatch, "feed-forward weights do not match the hidden state");
  RMat out = H;
  apply_ff(out, sparsify(U), sparsify(W));
  return out;
}

HiddenState init_hidden(const Prompt& prompt, const Vec& x_query, int n) {
  const int d = static_cast<int>(prompt.x.rows());
  const int N = static_cast<int>(prompt.x.cols());
  if (N < 1 || prompt.y.size() != N || x_query.size() != d || n < 1)
    throw Error(ErrorKind::ShapeMismatch, "prompt, labels and query disagree in shape");
  for (int i = 0; i < N; ++i)
    if (prompt.x.col(i).squaredNorm() > 1.0 + 1e-12)
      throw Error(ErrorKind::InputOutsideBall, "prompt input " + std::to_string(i) + " has norm > 1");
  if (x_query.squaredNorm() > 1.0 + 1e-12) throw Error(ErrorKind::InputOutsideBall, "query has norm > 1");

  HiddenState s;
  s.layout = {d, n};
  s.H = Mat::Zero(s.layout.D(), N + 1);
  s.H.topLeftCorner(d, N) = prompt.x;
  s.H.block(0, N, d, 1) = x_query;
  s.H.row(s.layout.ones()).setOnes();
  s.H.row(s.layout.y()).head(N) = prompt.y.transpose();
  s.H.row(s.layout.w()).head(N).setOnes();
  return s;
}

TransformerWeights build_icl_transformer(std::shared_ptr<const FeatureBank> bank, int L,
                                         double lambda_bar, double tau, double eta, int N) {
  if (!bank) throw Error(ErrorKind::InvalidConfig, "feature bank is required");
  bank->validate();
  if (L < 3 || L % 2 == 0) throw Error(ErrorKind::InvalidDepth, "L must be odd and >= 3");
  if (!(tau > 0) || !std::isfinite(tau)) throw Error(ErrorKind::NonPositiveTau, "tau must be > 0");
  if (!(lambda_bar >= 0) || !std::isfinite(lambda_bar))
    throw Error(ErrorKind::InvalidConfig, "lambda_bar must be >= 0");
  if (!(eta > 0) || !std::isfinite(eta)) throw Error(ErrorKind::InvalidConfig, "eta must be > 0");
  if (N < 1) throw Error(ErrorKind::InvalidConfig, "N must be >= 1");

  const int d = bank->dim, n = bank->n;
  const SlabLayout s{d, n};
  const int D = s.D();
  const double tff = bank->tau;
  const Mat zero = Mat::Zero(D, D);

  // Layer 0: zero attention, FF0 writes phi and lambda.
  auto l0 = std::make_shared<LayerWeights>();
  l0->tag = BlockTag::Attn0FF0;
  l0->heads.push_back({zero, zero, zero});
  l0->W = zero;
  l0->U = zero;
  const Mat dirs = bank->unit_directions();
  for (int i = 0; i < n; ++i) {
    const double t = bank->pairs[i].t;
    for (int c = 0; c < d; ++c) {
      l0->W(i, s.x(c)) = tff * dirs(i, c);
      l0->W(n + 1 + i, s.x(c)) = tff * dirs(i, c);
    }
    l0->W(i, s.ones()) = -t * tff + 0.5;
    l0->W(n + 1 + i, s.ones()) = -t * tff - 0.5;
  }
  l0->W(n, s.ones()) = 1.0;
  l0->W(2 * n + 1, s.ones()) = -1.0;
  l0->W(2 * n + 2, s.ones()) = lambda_bar;
  for (int k = 0; k <= n; ++k) {
    l0->U(s.phi(k), k) = 1.0;
    l0->U(s.phi(k), n + 1 + k) = -1.0;
  }
  l0->U(s.lambda(), 2 * n + 2) = 1.0;

  // Attn1: one gradient step on rho. Heads 2 and 4 remove the sigma(0) = 1/2
  // offsets of heads 1 and 3.
  auto l1 = std::make_shared<LayerWeights>();
  l1->tag = BlockTag::Attn1FF1;
  Mat V1 = zero;
  for (int k = 0; k <= n; ++k) V1(s.rho(k), s.phi(k)) = 8.0 * tau;
  {
    AttentionHead h1{zero, zero, V1};
    h1.Q(0, s.y()) = eta / tau;
    h1.K(0, s.ones()) = 1.0;
    AttentionHead h2{zero, zero, -V1};
    for (int k = 0; k <= n; ++k) {
      h2.Q(k, s.phi(k)) = eta / tau;
      h2.K(k, s.rho(k)) = 1.0;
    }
    AttentionHead h3{zero, zero, V1};
    h3.Q(0, s.ones()) = eta / tau;
    h3.Q(0, s.w()) = -eta / tau;
    h3.K(0, s.yhat()) = 1.0;
    AttentionHead h4{zero, zero, -V1};
    l1->heads = {h1, h2, h3, h4};
  }
  // FF1: soft-threshold rho at eta*lambda and clear yhat.
  l1->W = zero;
  l1->U = zero;
  for (int k = 0; k <= n; ++k) {
    l1->W(k, s.rho(k)) = 1.0;
    l1->W(k, s.lambda()) = eta;
    l1->W(n + 1 + k, s.rho(k)) = 1.0;
    l1->W(n + 1 + k, s.lambda()) = -eta;
    l1->U(s.rho(k), k) = -1.0;
    l1->U(s.rho(k), n + 1 + k) = 1.0;
    l1->U(s.rho(k), 2 * n + 2) = 1.0;
  }
  l1->W(2 * n + 2, s.lambda()) = eta;
  l1->W(2 * n + 3, s.yhat()) = 1.0;
  l1->W(2 * n + 4, s.yhat()) = -1.0;
  l1->U(s.yhat(), 2 * n + 3) = -1.0;
  l1->U(s.yhat(), 2 * n + 4) = 1.0;

  // Attn2: yhat <- 4 tau (sigma(phi_{N+1}.rho / tau) - 1/2). The value scale
  // carries a factor N to undo the 1/N attention normalisation.
  auto l2 = std::make_shared<LayerWeights>();
  l2->tag = BlockTag::Attn2FF2;
  {
    Mat V = zero;
    V(s.yhat(), s.ones()) = 4.0 * N * tau;
    V(s.yhat(), s.w()) = -4.0 * N * tau;
    AttentionHead h1{zero, zero, V};
    for (int k = 0; k <= n; ++k) {
      h1.Q(k, s.phi(k)) = 1.0 / tau;
      h1.K(k, s.rho(k)) = 1.0;
    }
    AttentionHead h2{zero, zero, -V};
    l2->heads = {h1, h2};
  }
  l2->W = zero;
  l2->U = zero;

  TransformerWeights tw;
  tw.layers.push_back(l0);
  for (int p = 0; p < (L - 1) / 2; ++p) {
    tw.layers.push_back(l1);
    tw.layers.push_back(l2);
  }
  tw.meta.bank = std::move(bank);
  tw.meta.tau = tau;
  tw.meta.tau_ff = tff;
  tw.meta.eta = eta;
  tw.meta.lambda_bar = lambda_bar;
  tw.meta.d = d;
  tw.meta.n = n;
  tw.meta.N = N;
  validate_layout(tw);
  return tw;
}

void validate_layout(const TransformerWeights& weights) {
  const SlabLayout s = weights.layout();
  const int D = s.D();
  auto fail = [](const std::string& what) { throw Error(ErrorKind::ShapeMismatch, what); };
  auto check = [&](const Mat& M, const std::string& name, auto row_ok, auto col_ok) {
    if (M.rows() != D || M.cols() != D) fail(name + " is not D x D");
    for (int r = 0; r < D; ++r)
      for (int c = 0; c < D; ++c)
        if (M(r, c) != 0.0 && !(row_ok(r) && col_ok(c)))
          fail(name + " has a nonzero at (" + std::to_string(r) + "," + std::to_string(c) + ") in slabs " +
               s.slab_of(r) + "/" + s.slab_of(c));
  };
  auto any = [](int) { return true; };
  auto none = [](int) { return false; };
  auto in = [&](std::initializer_list<const char*> names) {
    std::vector<std::string> v(names.begin(), names.end());
    return [&s, v](int r) { return std::find(v.begin(), v.end(), s.slab_of(r)) != v.end(); };
  };

  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    const LayerWeights& lw = *weights.layers[l];
    const std::string tag = std::string(to_string(lw.tag)) + "@" + std::to_string(l);
    const BlockTag expected =
        l == 0 ? BlockTag::Attn0FF0 : (l % 2 == 1 ? BlockTag::Attn1FF1 : BlockTag::Attn2FF2);
    if (lw.tag != expected) fail(tag + " is out of order");
    if (lw.heads.size() > 4) fail(tag + " has more than 4 heads");
    for (std::size_t m = 0; m < lw.heads.size(); ++m) {
      const AttentionHead& h = lw.heads[m];
      const std::string hn = tag + ".head" + std::to_string(m);
      switch (lw.tag) {
        case BlockTag::Attn0FF0:
        case BlockTag::Attn2FF2:
          if (lw.tag == BlockTag::Attn0FF0) {
            check(h.Q, hn + ".Q", none, none);
            check(h.K, hn + ".K", none, none);
            check(h.V, hn + ".V", none, none);
          } else {
            check(h.Q, hn + ".Q", any, in({"phi"}));
            check(h.K, hn + ".K", any, in({"rho"}));
            check(h.V, hn + ".V", in({"yhat"}), in({"ones", "w"}));
          }
          break;
        case BlockTag::Attn1FF1:
          check(h.Q, hn + ".Q", any, in({"y", "phi", "ones", "w"}));
          check(h.K, hn + ".K", any, in({"ones", "rho", "yhat"}));
          check(h.V, hn + ".V", in({"rho"}), in({"phi"}));
          break;
      }
    }
    switch (lw.tag) {
      case BlockTag::Attn0FF0:
        check(lw.W, tag + ".W", any, in({"x", "ones"}));
        check(lw.U, tag + ".U", in({"phi", "lambda"}), any);
        break;
      case BlockTag::Attn1FF1:
        check(lw.W, tag + ".W", any, in({"rho", "lambda", "yhat"}));
        check(lw.U, tag + ".U", in({"rho", "yhat"}), any);
        break;
      case BlockTag::Attn2FF2:
        check(lw.W, tag + ".W", none, none);
        check(lw.U, tag + ".U", none, none);
        break;
    }
  }
}

ForwardResult forward(const TransformerWeights& weights, const HiddenState& H0, bool trace,
                      const LayerObserver& observer) {
  const SlabLayout s = weights.layout();
  if (H0.H.rows() != s.D() || H0.H.cols() < 2)
    throw Error(ErrorKind::ShapeMismatch, "initial state does not match the weights");

  std::map<const LayerWeights*, CompiledLayer> compiled;
  for (const auto& lw : weights.layers) {
    if (lw->U.rows() != s.D() || lw->W.cols() != s.D())
      throw Error(ErrorKind::ShapeMismatch, "layer weights are not D x D");
    if (!compiled.count(lw.get())) compiled.emplace(lw.get(), compile_layer(*lw));
  }

  ForwardResult res;
  res.final_state = H0;
  res.final_state.layout = s;
  res.trace.layout = s;
  HiddenState& cur = res.final_state;
  RMat work = H0.H;
  auto emit = [&](int index) {
    if (!trace && !observer) return;
    cur.H = work;
    if (trace) res.trace.states.push_back(cur.H);
    if (observer) observer(index, cur);
  };
  emit(0);
  for (int l = 0; l < weights.L(); ++l) {
    const CompiledLayer& c = compiled.at(weights.layers[l].get());
    apply_attention(work, c.heads);
    emit(2 * l + 1);
    apply_ff(work, c.U, c.W);
    emit(2 * l + 2);
  }
  cur.H = work;
  return res;
}

double readout(const HiddenState& state) {
  return state.H(state.layout.yhat(), state.H.cols() - 1);
}

ExtractedState extract_state(const HiddenState& state) {
  const SlabLayout& s = state.layout;
  if (state.H.rows() != s.D()) throw Error(ErrorKind::ShapeMismatch, "state height differs from D");
  const Eigen::Index cols = state.H.cols();
  auto broadcast_value = [&](int row) {
    const double v = state.H(row, 0);
    for (Eigen::Index c = 1; c < cols; ++c)
      if (std::abs(state.H(row, c) - v) > 1e-12)
        throw Error(ErrorKind::ColumnInconsistency,
                    "row " + std::to_string(row) + " (" + s.slab_of(row) + ") differs across columns");
    return state.H(row, cols - 1);
  };
  ExtractedState out;
  out.rho.resize(s.n + 1);
  for (int k = 0; k <= s.n; ++k) out.rho[k] = broadcast_value(s.rho(k));
  out.lambda = broadcast_value(s.lambda());
  out.y_hat = broadcast_value(s.yhat());
  out.phi = state.H.block(s.phi(0), 0, s.n + 1, cols);
  return out;
}

EmulationMonitor::EmulationMonitor(LassoProblem problem, double eta, double lambda_bar, double tau)
    : problem_(std::move(problem)), tau_(tau) {
  problem_.eta = eta;
  problem_.lambda = lambda_bar;
  report_.tau = tau;
}

void EmulationMonitor::observe(int index, const HiddenState& state) {
  // Only H^(l) for odd l: the states between complete blocks.
  if (index < 2 || index % 2 != 0) return;
  const int l = index / 2;
  if (l % 2 == 0) return;
  const ExtractedState cur = extract_state(state);
  if (cur.rho.size() != problem_.p() || state.N() != problem_.N())
    throw Error(ErrorKind::ShapeMismatch, "trace does not match the lasso problem");
  if (!have_prev_) {
    rho_prev_ = cur.rho;
    yhat_prev_ = cur.y_hat;
    have_prev_ = true;
    return;
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const int N = problem_.N();
  const double eta = problem_.eta;
  const Vec phi_q = cur.phi.col(N);

  BlockResidual b;
  b.t = (l - 1) / 2;
  const Vec exact = ista_step(problem_, rho_prev_);
  const Vec e = cur.rho - exact;
  b.e_inf = e.lpNorm<Eigen::Infinity>();
  const double a = 4.0 * eta * eta / (N * tau_);
  const double z_prev = phi_q.dot(rho_prev_);
  const double fit = (problem_.phi * rho_prev_).squaredNorm() + z_prev * z_prev;
  b.e_bound = a * problem_.y.squaredNorm() + a * fit + a * yhat_prev_ * yhat_prev_ +
              (2.0 * eta / N) * std::abs(yhat_prev_ - z_prev);
  b.e_slack = 32.0 * eps * (1.0 + rho_prev_.lpNorm<Eigen::Infinity>() + cur.rho.lpNorm<Eigen::Infinity>());
  b.e_ok = b.e_inf <= b.e_bound + b.e_slack;

  const double z = phi_q.dot(cur.rho);
  b.etilde = std::abs(cur.y_hat - z);
  b.etilde_bound = 2.0 * z * z / tau_;
  b.etilde_slack = 32.0 * eps * (std::abs(z) + cur.rho.lpNorm<1>());
  b.etilde_ok = b.etilde <= b.etilde_bound + b.etilde_slack;

  report_.max_e_inf = std::max(report_.max_e_inf, b.e_inf);
  report_.max_etilde = std::max(report_.max_etilde, b.etilde);
  report_.all_ok = report_.all_ok && b.e_ok && b.etilde_ok;
  report_.blocks.push_back(b);
  report_.residuals.push_back(e);
  rho_prev_ = cur.rho;
  yhat_prev_ = cur.y_hat;
}

EmulationReport emulation_gap(const LayerTrace& trace, const LassoProblem& problem, double eta,
                              double lambda_bar, double tau) {
  const std::size_t m = trace.states.size();
  if (m < 7 || m % 4 != 3)
    throw Error(ErrorKind::TraceMissing, "trace must hold 2L+1 states for odd L >= 3");
  EmulationMonitor mon(problem, eta, lambda_bar, tau);
  for (std::size_t i = 0; i < m; ++i) mon.observe(static_cast<int>(i), HiddenState{trace.layout, trace.states[i]});
  return mon.report();
}

double tau_scaling_ratio(const EmulationReport& low_tau, const EmulationReport& high_tau) {
  return low_tau.max_e_inf / high_tau.max_e_inf;
}

}  // namespace icl
