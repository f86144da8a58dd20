#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "idiomkit/encoder.hpp"
#include "idiomkit/mlm.hpp"

namespace idiomkit {

struct TinyConfig {
  std::size_t dim = 32;
  std::size_t layers = 1;
  std::size_t ffn_dim = 64;
  std::size_t max_positions = 64;  // later positions share the last embedding
  double init_scale = 0.1;
};

// Small single-head transformer encoder with an untied MLM output layer.
// Sized to train in seconds on one core; initialization is a pure function
// of the seed.
class TinyMlm final : public MlmAdapter, public ContextEncoder {
 public:
  struct Layer {
    Eigen::MatrixXd wq, wk, wv, wo;  // dim x dim
    Eigen::MatrixXd w1;              // dim x ffn
    Eigen::MatrixXd b1;              // 1 x ffn
    Eigen::MatrixXd w2;              // ffn x dim
    Eigen::MatrixXd b2;              // 1 x dim
  };

  struct Params {
    Eigen::MatrixXd embedding;  // vocab x dim (input)
    Eigen::MatrixXd position;   // max_positions x dim
    Eigen::MatrixXd output;     // vocab x dim
    Eigen::MatrixXd output_bias;  // vocab x 1
    std::vector<Layer> layers;

    std::vector<Eigen::MatrixXd*> tensors();
    std::vector<const Eigen::MatrixXd*> tensors() const;
    Params zeros_like() const;
  };

  TinyMlm(Vocabulary vocab, Tokenizer tokenizer, TinyConfig config, std::uint64_t seed);

  BackendKind kind() const override { return BackendKind::kTiny; }
  std::unique_ptr<MlmAdapter> clone() const override { return std::make_unique<TinyMlm>(*this); }
  std::size_t embedding_dim() const override { return config_.dim; }
  bool trainable() const override { return true; }
  const TinyConfig& config() const { return config_; }
  const Params& params() const { return params_; }

  std::vector<double> mask_logits(const EncodedInput& input, const Example& example) const override;
  LabelLogits label_logits(const EncodedInput& input, const LabelTokenIds& ids,
                           const Example& example) const override;
  double train_step(std::span<const TrainItem> batch, const TrainingHyper& hyper) override;
  void reset_optimizer() override;
  std::string fingerprint() const override;

  Eigen::VectorXd input_embedding(TokenId id) const override;
  void set_input_embedding(TokenId id, const Eigen::VectorXd& vector) override;

  std::size_t hidden_dim() const override { return config_.dim; }
  Eigen::VectorXd contextualize(const std::vector<TokenId>& ids, std::size_t slot,
                                const Eigen::VectorXd& slot_input,
                                std::unique_ptr<EncoderTrace>* trace) const override;
  Eigen::VectorXd slot_input_gradient(const EncoderTrace& trace,
                                      const Eigen::VectorXd& d_output) const override;

  // Loss and parameter gradient of one item, exposed for gradient checks.
  double item_gradient(const TrainItem& item, Params& grads) const;

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<TinyMlm> load(const std::filesystem::path& path);

 protected:
  void resize_vocabulary_rows(std::size_t rows) override;

 private:
  struct LayerCache {
    Eigen::MatrixXd x, q, k, v, a, c, u, z, r;
  };
  struct Trace : EncoderTrace {
    std::vector<TokenId> ids;
    std::optional<std::size_t> slot;
    std::vector<LayerCache> layers;
    Eigen::MatrixXd out;
  };

  TinyMlm(Vocabulary vocab, Tokenizer tokenizer, TinyConfig config);

  Trace forward(const std::vector<TokenId>& ids, std::optional<std::size_t> slot,
                const Eigen::VectorXd* slot_input) const;
  Eigen::MatrixXd backward(const Trace& trace, Eigen::MatrixXd d_out, Params* grads) const;
  std::size_t position_row(std::size_t i) const;

  TinyConfig config_;
  Params params_;
  Params adam_m_, adam_v_;
  std::uint64_t adam_step_ = 0;
};

// Vocabulary over the word units of `texts` plus `extra` tokens verbatim.
Vocabulary build_vocabulary(const std::vector<std::string>& texts, const Tokenizer& tokenizer,
                            const std::vector<std::string>& extra = {});

// Checkpoints: `path` holds the binary blob, `path` + ".meta.json" the sidecar.
void save_checkpoint(const MlmAdapter& adapter, const std::filesystem::path& path);
std::unique_ptr<MlmAdapter> load_checkpoint(const std::filesystem::path& path);

}  // namespace idiomkit
