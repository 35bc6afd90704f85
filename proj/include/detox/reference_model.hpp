#pragma once

// Small attention encoder-decoder used as the desk-scale reference backend.
//
// Encoder (two layers, residual second layer), per source position i:
//   u_i = tanh(W1 [E x_i ; P_i] + b1)
//   h_i = u_i + tanh(W2 u_i + b2)
// Decoder step t, conditioned on the previous target token y_{t-1}:
//   q_t = tanh(Wq [E y_{t-1} ; P_t] + bq)
//   a_t = softmax(H^T q_t / sqrt(d))        c_t = H a_t
//   o_t = tanh(Wc [q_t ; c_t] + bc)         logits_t = Wo o_t + bo
//
// Gradients are derived by hand; tests compare them with finite differences.

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "detox/tokenizer.hpp"

namespace detox {

class ReferenceModel {
 public:
  struct Params {
    Eigen::MatrixXd embed;      // V x d
    Eigen::MatrixXd positions;  // T x d
    Eigen::MatrixXd w1;         // d x 2d
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;         // d x d
    Eigen::VectorXd b2;
    Eigen::MatrixXd wq;         // d x 2d
    Eigen::VectorXd bq;
    Eigen::MatrixXd wc;         // d x 2d
    Eigen::VectorXd bc;
    Eigen::MatrixXd wo;         // V x d
    Eigen::VectorXd bo;

    // Uniform access for optimizers and serialization.
    std::vector<Eigen::Map<Eigen::VectorXd>> views();
    void set_zero_like(const Params& shape);
  };

  ReferenceModel() = default;
  ReferenceModel(std::size_t vocab, std::size_t hidden, std::size_t max_positions,
                 std::uint64_t seed);

  std::size_t vocab_size() const { return static_cast<std::size_t>(params_.embed.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(params_.embed.cols()); }
  std::size_t max_positions() const { return static_cast<std::size_t>(params_.positions.rows()); }

  // Appends rows for new token ids to the embedding and output layers.
  void resize_vocabulary(std::size_t new_vocab, std::uint64_t seed);

  // Mean token cross-entropy of `target` given `source` under teacher
  // forcing. `target` must already end with the end-of-sequence id.
  // Gradients are accumulated into `grads` (scaled by `weight`) when given.
  double loss(const std::vector<TokenId>& source, const std::vector<TokenId>& target,
              Params* grads = nullptr, double weight = 1.0) const;

  // Incremental decoding over a fixed source.
  class Decoder {
   public:
    Decoder(const ReferenceModel& model, const std::vector<TokenId>& source);
    Eigen::VectorXd logits(TokenId previous, std::size_t step) const;

   private:
    const ReferenceModel& model_;
    Eigen::MatrixXd states_;  // d x L
  };

  Params& params() { return params_; }
  const Params& params() const { return params_; }

  void save(const std::filesystem::path& path) const;
  static ReferenceModel load(const std::filesystem::path& path);

 private:
  Eigen::MatrixXd encode(const std::vector<TokenId>& source, Eigen::MatrixXd* pre_u,
                         Eigen::MatrixXd* pre_v) const;

  Params params_;
};

// Adam with a constant learning rate.
class AdamOptimizer {
 public:
  AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(ReferenceModel::Params& params, ReferenceModel::Params& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  ReferenceModel::Params m_, v_;
  bool initialized_ = false;
};

}  // namespace detox
