#pragma once

#include <unordered_map>

#include "idiomkit/mlm.hpp"

namespace idiomkit {

// Reads the gold label and scores the matching verbalizer token +10, the
// other -10. Used only to validate pipeline wiring. Unlabeled examples are
// resolved through the hidden-gold table by id.
class OracleMlm final : public MlmAdapter {
 public:
  static constexpr double kLogit = 10.0;

  OracleMlm(Vocabulary vocab, Tokenizer tokenizer, std::size_t embedding_dim,
            std::unordered_map<std::string, Label> hidden_gold = {});

  BackendKind kind() const override { return BackendKind::kOracle; }
  std::unique_ptr<MlmAdapter> clone() const override { return std::make_unique<OracleMlm>(*this); }
  std::size_t embedding_dim() const override { return dim_; }

  LabelLogits label_logits(const EncodedInput& input, const LabelTokenIds& ids,
                           const Example& example) const override;

  Eigen::VectorXd input_embedding(TokenId id) const override;
  void set_input_embedding(TokenId id, const Eigen::VectorXd& vector) override;

 protected:
  void resize_vocabulary_rows(std::size_t rows) override;

 private:
  std::size_t dim_;
  Eigen::MatrixXd embedding_;
  std::unordered_map<std::string, Label> hidden_gold_;
};

}  // namespace idiomkit
