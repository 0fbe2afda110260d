#include <gtest/gtest.h>

#include <cmath>

#include "icl/transformer.hpp"
#include "support.hpp"

using namespace icl;
using icl::testing::relu;

namespace {

double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// Direct triple loop over (1/N) V H sigma((QH)^T KH).
Mat naive_attention(const Mat& H, const AttentionHead& h) {
  const Eigen::Index D = H.rows(), C = H.cols();
  const double N = static_cast<double>(C - 1);
  Mat QH = Mat::Zero(D, C), KH = Mat::Zero(D, C), VH = Mat::Zero(D, C);
  for (Eigen::Index r = 0; r < D; ++r)
    for (Eigen::Index c = 0; c < C; ++c)
      for (Eigen::Index k = 0; k < D; ++k) {
        QH(r, c) += h.Q(r, k) * H(k, c);
        KH(r, c) += h.K(r, k) * H(k, c);
        VH(r, c) += h.V(r, k) * H(k, c);
      }
  Mat out = Mat::Zero(D, C);
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index j = 0; j < C; ++j) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < D; ++r) s += QH(r, j) * KH(r, c);
      for (Eigen::Index r = 0; r < D; ++r) out(r, c) += VH(r, j) * logistic(s) / N;
    }
  return out;
}

Mat naive_ff(const Mat& H, const Mat& U, const Mat& W) {
  Mat Z = W * H;
  for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = relu(Z.data()[i]);
  return H + U * Z;
}

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

struct Instance {
  std::shared_ptr<const FeatureBank> bank;
  Task task;
  LassoProblem problem;
  TransformerWeights weights;
  HiddenState H0;
};

Instance make_instance(double tau = 1e6, int n = 16, int N = 64, int L = 21, double lambda = 0.01) {
  auto spec = icl::testing::three_atom_class();
  Instance in;
  in.bank = std::make_shared<const FeatureBank>(make_feature_bank(*spec, n, 100.0, 2));
  in.task = generate_task(spec, 1, N, 4, 0.1, 7);
  const double eta = LassoProblem::default_eta(n + 1);
  in.problem = icl::testing::problem_for(*in.bank, in.task.prompt, lambda, eta);
  in.weights = build_icl_transformer(in.bank, L, lambda, tau, eta, N);
  in.H0 = init_hidden(in.task.prompt, in.task.x_query, n);
  return in;
}

}  // namespace

TEST(Attention, ZeroValueGivesZero) {
  std::mt19937_64 rng(1);
  const Mat H = random_mat(5, 4, rng);
  AttentionHead h{random_mat(5, 5, rng), random_mat(5, 5, rng), Mat::Zero(5, 5)};
  EXPECT_EQ(attention_op(H, h), Mat::Zero(5, 4));
}

TEST(Attention, ZeroScoresGiveHalfAverage) {
  std::mt19937_64 rng(2);
  const Mat H = random_mat(4, 6, rng);
  AttentionHead h{Mat::Zero(4, 4), Mat::Zero(4, 4), random_mat(4, 4, rng)};
  const Mat expected = h.V * H * Mat::Ones(6, 6) / (2.0 * 5.0);
  EXPECT_LT((attention_op(H, h) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Attention, MatchesNaiveEvaluation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat H = random_mat(3, 3, rng);
    AttentionHead h{random_mat(3, 3, rng), random_mat(3, 3, rng), random_mat(3, 3, rng)};
    EXPECT_LT((attention_op(H, h) - naive_attention(H, h)).cwiseAbs().maxCoeff(), 1e-13);
  }
  const Mat H = random_mat(7, 9, rng);
  AttentionHead h{random_mat(7, 7, rng), random_mat(7, 7, rng), random_mat(7, 7, rng)};
  EXPECT_LT((attention_op(H, h) - naive_attention(H, h)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Attention, LayerIsResidualSumOverHeads) {
  std::mt19937_64 rng(4);
  const Mat H = random_mat(4, 5, rng);
  EXPECT_EQ(attention_layer(H, {}), H);
  AttentionHead zero_v{random_mat(4, 4, rng), random_mat(4, 4, rng), Mat::Zero(4, 4)};
  EXPECT_EQ(attention_layer(H, {zero_v}), H);
  AttentionHead a{random_mat(4, 4, rng), random_mat(4, 4, rng), random_mat(4, 4, rng)};
  AttentionHead b{random_mat(4, 4, rng), random_mat(4, 4, rng), random_mat(4, 4, rng)};
  const Mat both = attention_layer(H, {a, b});
  EXPECT_LT((both - (H + attention_op(H, a) + attention_op(H, b))).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Attention, RejectsBadShapes) {
  std::mt19937_64 rng(5);
  const Mat H = random_mat(4, 5, rng);
  AttentionHead h{Mat::Zero(3, 3), Mat::Zero(4, 4), Mat::Zero(4, 4)};
  try {
    attention_op(H, h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  AttentionHead ok{Mat::Zero(4, 4), Mat::Zero(4, 4), Mat::Zero(4, 4)};
  EXPECT_THROW(attention_op(Mat::Zero(4, 1), ok), Error);
}

TEST(FeedForward, IdentitiesAndNaiveOracle) {
  std::mt19937_64 rng(6);
  const Mat H = random_mat(6, 5, rng);
  EXPECT_EQ(ff_layer(H, Mat::Zero(6, 6), random_mat(6, 6, rng)), H);
  EXPECT_EQ(ff_layer(H, random_mat(6, 6, rng), Mat::Zero(6, 6)), H);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat U = random_mat(6, 8, rng), W = random_mat(8, 6, rng);
    EXPECT_LT((ff_layer(H, U, W) - naive_ff(H, U, W)).cwiseAbs().maxCoeff(), 1e-13);
  }
  EXPECT_THROW(ff_layer(H, Mat::Zero(5, 6), Mat::Zero(6, 6)), Error);
}

TEST(InitHidden, SmallestLayout) {
  Prompt p;
  p.x = Mat::Constant(1, 1, 0.25);
  p.y = Vec::Constant(1, -1.5);
  const HiddenState s = init_hidden(p, Vec::Constant(1, -0.5), 1);
  ASSERT_EQ(s.H.rows(), 10);
  ASSERT_EQ(s.H.cols(), 2);
  Mat expected = Mat::Zero(10, 2);
  expected(0, 0) = 0.25;
  expected(0, 1) = -0.5;
  expected.row(1).setOnes();
  expected(2, 0) = -1.5;
  expected(3, 0) = 1.0;
  EXPECT_EQ(s.H, expected);
}

TEST(InitHidden, QueryColumnHasNoLabelOrWeight) {
  const Instance in = make_instance();
  const SlabLayout& s = in.H0.layout;
  EXPECT_EQ(in.H0.H(s.w(), 64), 0.0);
  EXPECT_EQ(in.H0.H(s.y(), 64), 0.0);
  EXPECT_EQ(in.H0.H.row(s.w()).head(64), Vec::Ones(64).transpose());
  Prompt bad = in.task.prompt;
  bad.x(0, 3) = 2.0;
  try {
    init_hidden(bad, in.task.x_query, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InputOutsideBall);
  }
}

TEST(Build, RejectsBadDepthAndSharpness) {
  auto bank = std::make_shared<const FeatureBank>(make_feature_bank(*icl::testing::three_atom_class(), 4, 100.0, 1));
  try {
    build_icl_transformer(bank, 4, 0.1, 1e6, 0.1, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidDepth);
  }
  try {
    build_icl_transformer(bank, 5, 0.1, 0.0, 0.1, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveTau);
  }
}

TEST(Build, BlockStructureAndSharing) {
  const Instance in = make_instance();
  const TransformerWeights& w = in.weights;
  ASSERT_EQ(w.L(), 21);
  EXPECT_EQ(w.layers[0]->tag, BlockTag::Attn0FF0);
  for (int l = 1; l < w.L(); ++l) {
    EXPECT_EQ(w.layers[l]->tag, l % 2 ? BlockTag::Attn1FF1 : BlockTag::Attn2FF2);
    EXPECT_EQ(w.layers[l].get(), w.layers[l % 2 ? 1 : 2].get());
    EXPECT_LE(w.layers[l]->heads.size(), 4u);
  }
  for (const AttentionHead& h : w.layers[0]->heads) {
    EXPECT_EQ(h.Q.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(h.V.cwiseAbs().maxCoeff(), 0.0);
  }
  const ForwardResult fr = forward(w, in.H0, true);
  EXPECT_EQ(fr.trace.states[1], in.H0.H);
}

TEST(Build, ValidateLayoutCatchesStrayWeights) {
  Instance in = make_instance();
  EXPECT_NO_THROW(validate_layout(in.weights));
  auto bad = std::make_shared<LayerWeights>(*in.weights.layers[1]);
  bad->U(in.weights.layout().x(0), 0) = 1.0;
  in.weights.layers[1] = bad;
  try {
    validate_layout(in.weights);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Build, FeedForwardOneIsSoftThreshold) {
  const Instance in = make_instance(1e6, 16, 64, 5, 0.3);
  const LayerWeights& l1 = *in.weights.layers[1];
  const SlabLayout s = in.weights.layout();
  const double eta = in.weights.meta.eta;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 0.05);
  Mat H = in.H0.H;
  H.row(s.lambda()).setConstant(0.3);
  for (int k = 0; k <= 16; ++k)
    for (Eigen::Index c = 0; c < H.cols(); ++c) H(s.rho(k), c) = g(rng);
  H.row(s.yhat()) = random_mat(1, H.cols(), rng);
  const Mat out = ff_layer(H, l1.U, l1.W);
  for (int k = 0; k <= 16; ++k)
    for (Eigen::Index c = 0; c < H.cols(); ++c)
      EXPECT_NEAR(out(s.rho(k), c), soft_threshold(H(s.rho(k), c), eta * 0.3), 1e-14);
  EXPECT_EQ(out.row(s.yhat()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, SingleZeroBlockIsIdentity) {
  const Instance in = make_instance();
  TransformerWeights w;
  auto zero = std::make_shared<LayerWeights>();
  const int D = in.H0.layout.D();
  zero->heads.push_back({Mat::Zero(D, D), Mat::Zero(D, D), Mat::Zero(D, D)});
  zero->U = Mat::Zero(D, D);
  zero->W = Mat::Zero(D, D);
  w.layers = {zero};
  w.meta.d = 4;
  w.meta.n = 16;
  EXPECT_EQ(forward(w, in.H0).final_state.H, in.H0.H);
}

TEST(Forward, StaticRowsAndBroadcastSlabs) {
  const Instance in = make_instance();
  const ForwardResult fr = forward(in.weights, in.H0, true);
  const SlabLayout s = in.H0.layout;
  ASSERT_EQ(fr.trace.states.size(), 43u);
  for (const Mat& H : fr.trace.states) {
    ASSERT_EQ(H.rows(), s.D());
    ASSERT_EQ(H.cols(), 65);
    EXPECT_EQ(H.topRows(s.w() + 1), in.H0.H.topRows(s.w() + 1));
    for (int k = 0; k <= 16; ++k)
      EXPECT_LE((H.row(s.rho(k)).array() - H(s.rho(k), 0)).abs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(fr.trace.states.back(), fr.final_state.H);
}

TEST(Readout, LastEntryOfPredictionRow) {
  const Instance in = make_instance();
  EXPECT_EQ(readout(in.H0), 0.0);
  HiddenState h = in.H0;
  h.H(h.layout.yhat(), h.N()) = 3.5;
  EXPECT_EQ(readout(h), 3.5);
  const ForwardResult fr = forward(in.weights, in.H0);
  const double y = readout(fr.final_state);
  EXPECT_NE(y, 0.0);
  EXPECT_LE((fr.final_state.H.row(in.H0.layout.yhat()).array() - y).abs().maxCoeff(), 1e-12);
}

TEST(Extract, InitialAndAfterFeatureLayer) {
  const Instance in = make_instance();
  const ExtractedState e0 = extract_state(in.H0);
  EXPECT_EQ(e0.rho, Vec::Zero(17));
  EXPECT_EQ(e0.y_hat, 0.0);
  EXPECT_EQ(e0.lambda, 0.0);
  EXPECT_EQ(e0.phi, Mat::Zero(17, 65));

  const ForwardResult fr = forward(in.weights, in.H0, true);
  const HiddenState after_ff0{in.H0.layout, fr.trace.states[2]};
  const ExtractedState e1 = extract_state(after_ff0);
  EXPECT_EQ(e1.lambda, 0.01);
  for (int i = 0; i < 64; ++i)
    EXPECT_LT((e1.phi.col(i) - eval_features(*in.bank, in.task.prompt.x.col(i))).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((e1.phi.col(64) - eval_features(*in.bank, in.task.x_query)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Extract, DetectsColumnInconsistency) {
  const Instance in = make_instance();
  HiddenState h = in.H0;
  h.H(h.layout.rho(3), 5) = 1e-6;
  try {
    extract_state(h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ColumnInconsistency);
  }
}

TEST(Emulation, BoundsHoldAndResidualsAreSmall) {
  const Instance in = make_instance(1e6);
  const ForwardResult fr = forward(in.weights, in.H0, true);
  const EmulationReport r = emulation_gap(fr.trace, in.problem, in.weights.meta.eta, 0.01, 1e6);
  ASSERT_EQ(r.blocks.size(), 10u);
  EXPECT_TRUE(r.all_ok);
  EXPECT_LE(r.max_e_inf, 1e-3);
  for (const BlockResidual& b : r.blocks) {
    EXPECT_LE(b.e_inf, b.e_bound + b.e_slack);
    EXPECT_LE(b.etilde, b.etilde_bound + b.etilde_slack);
  }
}

TEST(Emulation, MonitorMatchesTraceReplay) {
  const Instance in = make_instance(1e5);
  EmulationMonitor mon(in.problem, in.weights.meta.eta, 0.01, 1e5);
  const ForwardResult fr =
      forward(in.weights, in.H0, true, [&](int i, const HiddenState& s) { mon.observe(i, s); });
  const EmulationReport r = emulation_gap(fr.trace, in.problem, in.weights.meta.eta, 0.01, 1e5);
  ASSERT_EQ(mon.report().blocks.size(), r.blocks.size());
  for (std::size_t i = 0; i < r.blocks.size(); ++i) EXPECT_EQ(mon.report().blocks[i].e_inf, r.blocks[i].e_inf);
}

TEST(Emulation, TraceIsInexactIstaWithMeasuredResiduals) {
  const Instance in = make_instance(1e4);
  const ForwardResult fr = forward(in.weights, in.H0, true);
  const EmulationReport r = emulation_gap(fr.trace, in.problem, in.weights.meta.eta, 0.01, 1e4);
  auto rho_at = [&](int l) { return extract_state(HiddenState{in.H0.layout, fr.trace.states[2 * l]}).rho; };
  // Start from rho^(1) and replay with e_t; every later odd layer must match.
  const Vec start = rho_at(1);
  Vec rho = start;
  for (std::size_t t = 0; t < r.residuals.size(); ++t) {
    rho = ista_step(in.problem, rho, r.residuals[t]);
    EXPECT_LT((rho - rho_at(2 * static_cast<int>(t) + 3)).lpNorm<Eigen::Infinity>(), 1e-14);
  }
}

TEST(Emulation, MissingTraceIsAnError) {
  const Instance in = make_instance();
  const ForwardResult fr = forward(in.weights, in.H0);
  try {
    emulation_gap(fr.trace, in.problem, in.weights.meta.eta, 0.01, 1e6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TraceMissing);
  }
}

TEST(Emulation, ResidualShrinksWithSharperAttention) {
  const Instance lo = make_instance(1e4), hi = make_instance(1e5);
  const double eta = lo.weights.meta.eta;
  const EmulationReport rl = emulation_gap(forward(lo.weights, lo.H0, true).trace, lo.problem, eta, 0.01, 1e4);
  const EmulationReport rh = emulation_gap(forward(hi.weights, hi.H0, true).trace, hi.problem, eta, 0.01, 1e5);
  EXPECT_GT(tau_scaling_ratio(rl, rh), 5.0);
}

TEST(Identities, SoftThresholdViaRelu) {
  for (double k : {0.0, 0.01, 0.5, 2.0})
    for (int i = -5000; i <= 5000; ++i) {
      const double z = i * 1e-3;
      EXPECT_NEAR(z + relu(k) - relu(z + k) + relu(z - k), soft_threshold(z, k), 1e-14);
    }
}

TEST(Identities, LogisticLinearization) {
  for (double tau : {1e4, 1e5, 1e6})
    for (int i = -1000; i <= 1000; ++i) {
      const double x = i * 1.0;
      const double s = x / tau;
      const double lin = 4.0 * tau * (logistic(s) - 0.5);
      EXPECT_LE(std::abs(x - lin), 2.0 * x * x / tau + 1e-9);
    }
}
