#include "idiomkit/oracle_mlm.hpp"

#include "idiomkit/error.hpp"

namespace idiomkit {

OracleMlm::OracleMlm(Vocabulary vocab, Tokenizer tokenizer, std::size_t embedding_dim,
                     std::unordered_map<std::string, Label> hidden_gold)
    : MlmAdapter(std::move(vocab), std::move(tokenizer)), dim_(embedding_dim),
      hidden_gold_(std::move(hidden_gold)) {
  if (dim_ == 0) throw Error("mlm-adapter", ErrorKind::kArgument, "embedding_dim must be positive");
  embedding_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vocab_.size()),
                                     static_cast<Eigen::Index>(dim_));
}

LabelLogits OracleMlm::label_logits(const EncodedInput&, const LabelTokenIds&,
                                    const Example& example) const {
  std::optional<Label> gold = example.label;
  if (!gold) {
    auto it = hidden_gold_.find(example.id);
    if (it == hidden_gold_.end()) {
      throw Error("mlm-adapter", ErrorKind::kCapability,
                  "oracle backend has no gold label for example '" + example.id + "'");
    }
    gold = it->second;
  }
  return *gold == Label::kIdiomatic ? LabelLogits{-kLogit, kLogit} : LabelLogits{kLogit, -kLogit};
}

Eigen::VectorXd OracleMlm::input_embedding(TokenId id) const {
  return embedding_.row(id).transpose();
}

void OracleMlm::set_input_embedding(TokenId id, const Eigen::VectorXd& vector) {
  embedding_.row(id) = vector.transpose();
}

void OracleMlm::resize_vocabulary_rows(std::size_t rows) {
  const auto old = embedding_.rows();
  embedding_.conservativeResize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim_));
  if (embedding_.rows() > old) embedding_.bottomRows(embedding_.rows() - old).setZero();
}

}  // namespace idiomkit
