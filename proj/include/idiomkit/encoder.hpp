#pragma once

#include <Eigen/Dense>

#include <memory>
#include <vector>

#include "idiomkit/tokenizer.hpp"

namespace idiomkit {

// Intermediate activations kept for a backward pass.
struct EncoderTrace {
  virtual ~EncoderTrace() = default;
};

// An encoder whose input embedding at one position can be replaced by an
// arbitrary vector, with gradients flowing back to that vector. Parameters
// of the encoder itself stay frozen through this interface.
class ContextEncoder {
 public:
  virtual ~ContextEncoder() = default;

  virtual std::size_t hidden_dim() const = 0;

  // Final-layer hidden state at `slot` when the input embedding of
  // ids[slot] is replaced by `slot_input`.
  virtual Eigen::VectorXd contextualize(const std::vector<TokenId>& ids, std::size_t slot,
                                        const Eigen::VectorXd& slot_input,
                                        std::unique_ptr<EncoderTrace>* trace) const = 0;

  // d(loss)/d(slot_input) given d(loss)/d(output at slot).
  virtual Eigen::VectorXd slot_input_gradient(const EncoderTrace& trace,
                                              const Eigen::VectorXd& d_output) const = 0;
};

}  // namespace idiomkit
