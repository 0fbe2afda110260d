#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "icl/common.hpp"
#include "icl/features.hpp"
#include "icl/lasso.hpp"

namespace icl {

// Row partition of the hidden state, 0-based.
struct SlabLayout {
  int d = 0;
  int n = 0;

  int D() const { return d + 2 * n + 7; }
  int x(int i) const { return i; }
  int ones() const { return d; }
  int y() const { return d + 1; }
  int w() const { return d + 2; }
  int phi(int k) const { return d + 3 + k; }  // k = 0..n
  int rho(int k) const { return d + n + 4 + k; }
  int lambda() const { return d + 2 * n + 5; }
  int yhat() const { return d + 2 * n + 6; }

  // "x", "ones", "y", "w", "phi", "rho", "lambda" or "yhat".
  std::string slab_of(int row) const;
};

struct HiddenState {
  SlabLayout layout;
  Mat H;  // D x (N+1)

  int N() const { return static_cast<int>(H.cols()) - 1; }
};

struct Prompt {
  Mat x;  // d x N
  Vec y;  // N
};

struct AttentionHead {
  Mat Q, K, V;
};

enum class BlockTag { Attn0FF0, Attn1FF1, Attn2FF2 };

const char* to_string(BlockTag tag);
BlockTag block_tag_from_string(const std::string& s);

struct LayerWeights {
  std::vector<AttentionHead> heads;
  Mat U, W;
  BlockTag tag = BlockTag::Attn0FF0;
};

struct TransformerMeta {
  std::shared_ptr<const FeatureBank> bank;
  double tau = 0.0;  // attention sharpness
  double tau_ff = 0.0;
  double eta = 0.0;
  double lambda_bar = 0.0;
  int d = 0;
  int n = 0;
  int N = 0;
};

struct TransformerWeights {
  // Repeated blocks share one LayerWeights instance.
  std::vector<std::shared_ptr<const LayerWeights>> layers;
  TransformerMeta meta;

  int L() const { return static_cast<int>(layers.size()); }
  SlabLayout layout() const { return {meta.d, meta.n}; }
};

// (1/N) V H sigma((QH)^T KH), sigma the logistic function, N = cols - 1.
Mat attention_op(const Mat& H, const AttentionHead& head);
Mat attention_layer(const Mat& H, const std::vector<AttentionHead>& heads);
Mat ff_layer(const Mat& H, const Mat& U, const Mat& W);

HiddenState init_hidden(const Prompt& prompt, const Vec& x_query, int n);

TransformerWeights build_icl_transformer(std::shared_ptr<const FeatureBank> bank, int L,
                                         double lambda_bar, double tau, double eta, int N);

// Throws ShapeMismatch if any nonzero weight lies outside its documented slab.
void validate_layout(const TransformerWeights& weights);

struct LayerTrace {
  SlabLayout layout;
  // states[2l] = H^(l), states[2l-1] = H^(l-1/2).
  std::vector<Mat> states;
};

using LayerObserver = std::function<void(int index, const HiddenState& state)>;

struct ForwardResult {
  HiddenState final_state;
  LayerTrace trace;  // empty unless requested
};

ForwardResult forward(const TransformerWeights& weights, const HiddenState& H0, bool trace = false,
                      const LayerObserver& observer = {});

double readout(const HiddenState& state);

struct ExtractedState {
  Vec rho;
  double y_hat = 0.0;
  double lambda = 0.0;
  Mat phi;  // (n+1) x (N+1)
};

ExtractedState extract_state(const HiddenState& state);

struct BlockResidual {
  int t = 0;
  double e_inf = 0.0;
  double e_bound = 0.0;
  double e_slack = 0.0;  // floating-point resolution floor added to the bound
  bool e_ok = false;
  double etilde = 0.0;
  double etilde_bound = 0.0;
  double etilde_slack = 0.0;
  bool etilde_ok = false;
};

struct EmulationReport {
  double tau = 0.0;
  std::vector<BlockResidual> blocks;
  double max_e_inf = 0.0;
  double max_etilde = 0.0;
  bool all_ok = true;
  std::vector<Vec> residuals;  // e_t for t = 1..T
};

// Incremental form of emulation_gap, fed layer by layer from forward().
class EmulationMonitor {
 public:
  EmulationMonitor(LassoProblem problem, double eta, double lambda_bar, double tau);
  void observe(int index, const HiddenState& state);
  const EmulationReport& report() const { return report_; }

 private:
  LassoProblem problem_;
  double tau_;
  bool have_prev_ = false;
  Vec rho_prev_;
  double yhat_prev_ = 0.0;
  EmulationReport report_;
};

EmulationReport emulation_gap(const LayerTrace& trace, const LassoProblem& problem, double eta,
                              double lambda_bar, double tau);

double tau_scaling_ratio(const EmulationReport& low_tau, const EmulationReport& high_tau);

}  // namespace icl
