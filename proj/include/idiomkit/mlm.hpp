#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "idiomkit/corpus.hpp"
#include "idiomkit/pvp.hpp"
#include "idiomkit/tokenizer.hpp"

namespace idiomkit {

enum class BackendKind { kExternal, kTiny, kOracle };

const char* backend_kind_name(BackendKind kind);  // "external-pretrained", ...
BackendKind parse_backend_kind(const std::string& name);  // accepts CLI spellings too

struct LabelTokenIds {
  TokenId literal_id = 0;
  TokenId idiom_id = 0;
};

struct LabelLogits {
  double literal = 0.0;
  double idiom = 0.0;
};

struct ClassDistribution {
  double p_idiomatic = 0.5;
  double p_literal = 0.5;

  double prob(Label label) const { return label == Label::kIdiomatic ? p_idiomatic : p_literal; }
  static ClassDistribution one_hot(Label label);
};

struct EncodedInput {
  std::vector<TokenId> ids;
  std::size_t mask_index = 0;
};

struct TrainingHyper {
  std::size_t steps = 150;
  std::size_t batch_size = 16;
  double learning_rate = 5e-3;
  double max_grad_norm = 5.0;
  // Soft targets are sharpened as p^(1/T) and renormalized; 1 leaves them as is.
  double temperature = 1.0;
};

struct TrainItem {
  EncodedInput input;
  LabelTokenIds label_ids;
  ClassDistribution target;
};

struct TrainingLog {
  std::vector<double> batch_loss;  // mean loss of each step's batch, before its update
};

// Contract every masked-language-model backend satisfies. The vocabulary
// and tokenizer live here; parameters are the backend's business.
class MlmAdapter {
 public:
  virtual ~MlmAdapter() = default;

  virtual BackendKind kind() const = 0;
  virtual std::unique_ptr<MlmAdapter> clone() const = 0;
  virtual std::size_t embedding_dim() const = 0;
  virtual bool trainable() const { return false; }

  const Vocabulary& vocabulary() const { return vocab_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const std::string& mask_marker() const { return mask_marker_; }
  std::uint64_t state_version() const { return state_version_; }

  // Tokenizes the rendered text and records where the mask landed.
  EncodedInput encode(MaskedText& masked) const;

  // Logits of the mask position over the whole vocabulary.
  virtual std::vector<double> mask_logits(const EncodedInput& input, const Example& example) const;
  virtual LabelLogits label_logits(const EncodedInput& input, const LabelTokenIds& ids,
                                   const Example& example) const = 0;

  // One optimizer step on `batch`; returns the batch's mean cross-entropy
  // before the update. Non-trainable backends throw a capability error.
  virtual double train_step(std::span<const TrainItem> batch, const TrainingHyper& hyper);
  virtual void reset_optimizer() {}

  // Stable digest of every parameter and the vocabulary.
  virtual std::string fingerprint() const;

  virtual Eigen::VectorXd input_embedding(TokenId id) const = 0;
  virtual void set_input_embedding(TokenId id, const Eigen::VectorXd& vector) = 0;

  // Appends a vocabulary entry with the given input embedding. Multiword
  // forms ("night_owl") are also registered as tokenizer phrases.
  TokenId append_token(const std::string& token, const Eigen::VectorXd& vector);
  // Drops entries with id >= size, undoing append_token.
  void truncate_vocabulary(std::size_t size);

 protected:
  MlmAdapter(Vocabulary vocab, Tokenizer tokenizer)
      : vocab_(std::move(vocab)), tokenizer_(std::move(tokenizer)) {}
  MlmAdapter(const MlmAdapter&) = default;
  MlmAdapter& operator=(const MlmAdapter&) = default;

  // Grow or shrink parameter rows to match the vocabulary size.
  virtual void resize_vocabulary_rows(std::size_t rows) = 0;
  void bump_state_version() { ++state_version_; }
  void set_state_version(std::uint64_t v) { state_version_ = v; }

  Vocabulary vocab_;
  Tokenizer tokenizer_;
  std::string mask_marker_ = Vocabulary::kMask;
  std::uint64_t state_version_ = 0;
};

using AdapterFactory = std::function<std::unique_ptr<MlmAdapter>(std::uint64_t seed)>;

// Each verbalizer word must tokenize to exactly one vocabulary entry that
// is spelled exactly as written.
LabelTokenIds verbalizer_token_ids(const MlmAdapter& adapter, const PatternVerbalizerPair& pvp);

// Numerically stable softmax over the two label logits.
ClassDistribution two_way_softmax(const LabelLogits& logits);

ClassDistribution class_probs(const MlmAdapter& adapter, const PatternVerbalizerPair& pvp,
                              const Example& example);

struct TrainTarget {
  Example example;
  ClassDistribution target;
};

// Cross-entropy fine-tuning on hard labels (from example.label).
TrainingLog fine_tune(MlmAdapter& adapter, const PatternVerbalizerPair& pvp,
                      const std::vector<Example>& trainset, const TrainingHyper& hyper,
                      std::uint64_t seed);

// Same objective against soft targets; `hyper.temperature` applies.
TrainingLog fine_tune_soft(MlmAdapter& adapter, const PatternVerbalizerPair& pvp,
                           const std::vector<TrainTarget>& trainset, const TrainingHyper& hyper,
                           std::uint64_t seed);

}  // namespace idiomkit
