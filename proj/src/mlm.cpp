#include "idiomkit/mlm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "idiomkit/error.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "mlm-adapter";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

ClassDistribution sharpen(const ClassDistribution& d, double temperature) {
  if (temperature == 1.0) return d;
  if (temperature <= 0.0) fail(ErrorKind::kArgument, "temperature must be positive");
  const double a = std::pow(d.p_idiomatic, 1.0 / temperature);
  const double b = std::pow(d.p_literal, 1.0 / temperature);
  return {a / (a + b), b / (a + b)};
}

}  // namespace

const char* backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kExternal: return "external-pretrained";
    case BackendKind::kTiny: return "tiny-trainable";
    case BackendKind::kOracle: return "oracle";
  }
  return "unknown";
}

BackendKind parse_backend_kind(const std::string& name) {
  if (name == "external" || name == "external-pretrained") return BackendKind::kExternal;
  if (name == "tiny" || name == "tiny-trainable") return BackendKind::kTiny;
  if (name == "oracle") return BackendKind::kOracle;
  fail(ErrorKind::kArgument, "unknown backend '" + name + "'");
}

ClassDistribution ClassDistribution::one_hot(Label label) {
  return label == Label::kIdiomatic ? ClassDistribution{1.0, 0.0} : ClassDistribution{0.0, 1.0};
}

EncodedInput MlmAdapter::encode(MaskedText& masked) const {
  EncodedInput in;
  in.ids = tokenizer_.encode(masked.text, vocab_);
  const auto mask = vocab_.mask_id();
  const auto count = std::count(in.ids.begin(), in.ids.end(), mask);
  if (count != 1) {
    fail(ErrorKind::kRender, "rendered text has " + std::to_string(count) +
                                 " mask tokens, expected 1: \"" + masked.text + "\"");
  }
  in.mask_index = static_cast<std::size_t>(std::find(in.ids.begin(), in.ids.end(), mask) -
                                           in.ids.begin());
  masked.mask_index = in.mask_index;
  return in;
}

std::vector<double> MlmAdapter::mask_logits(const EncodedInput&, const Example&) const {
  fail(ErrorKind::kCapability,
       std::string(backend_kind_name(kind())) + " backend does not expose full-vocabulary logits");
}

double MlmAdapter::train_step(std::span<const TrainItem>, const TrainingHyper&) {
  fail(ErrorKind::kCapability,
       std::string(backend_kind_name(kind())) + " backend cannot be fine-tuned");
}

std::string MlmAdapter::fingerprint() const {
  std::uint64_t h = vocab_.hash();
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    const Eigen::VectorXd v = input_embedding(static_cast<TokenId>(i));
    h = text::fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()),
                                     sizeof(double) * static_cast<std::size_t>(v.size())),
                    h);
  }
  return text::hex64(h);
}

TokenId MlmAdapter::append_token(const std::string& token, const Eigen::VectorXd& vector) {
  if (static_cast<std::size_t>(vector.size()) != embedding_dim()) {
    fail(ErrorKind::kArgument, "embedding for '" + token + "' has dimension " +
                                   std::to_string(vector.size()) + ", adapter expects " +
                                   std::to_string(embedding_dim()));
  }
  if (vocab_.contains(token)) fail(ErrorKind::kArgument, "token '" + token + "' already exists");
  const TokenId id = vocab_.add(token);
  resize_vocabulary_rows(vocab_.size());
  set_input_embedding(id, vector);
  if (token.find('_') != std::string::npos) tokenizer_.register_phrase(token);
  return id;
}

void MlmAdapter::truncate_vocabulary(std::size_t size) {
  for (std::size_t i = std::max<std::size_t>(size, 2); i < vocab_.size(); ++i) {
    tokenizer_.unregister_phrase(vocab_.token(static_cast<TokenId>(i)));
  }
  vocab_.truncate(size);
  resize_vocabulary_rows(vocab_.size());
}

LabelTokenIds verbalizer_token_ids(const MlmAdapter& adapter, const PatternVerbalizerPair& pvp) {
  auto lookup = [&](const std::string& word) -> TokenId {
    const auto ids = adapter.tokenizer().encode(word, adapter.vocabulary());
    if (ids.size() != 1) {
      fail(ErrorKind::kVerbalizer, "verbalizer word '" + word + "' of " + pvp.id() +
                                       " tokenizes to " + std::to_string(ids.size()) + " tokens");
    }
    if (ids.front() == adapter.vocabulary().unk_id() ||
        adapter.vocabulary().token(ids.front()) != word) {
      fail(ErrorKind::kVerbalizer,
           "verbalizer word '" + word + "' of " + pvp.id() + " is not in the vocabulary");
    }
    return ids.front();
  };
  return {lookup(pvp.verbalizer.literal_token), lookup(pvp.verbalizer.idiom_token)};
}

ClassDistribution two_way_softmax(const LabelLogits& logits) {
  const double m = std::max(logits.literal, logits.idiom);
  const double el = std::exp(logits.literal - m);
  const double ei = std::exp(logits.idiom - m);
  const double z = el + ei;
  return {ei / z, el / z};
}

ClassDistribution class_probs(const MlmAdapter& adapter, const PatternVerbalizerPair& pvp,
                              const Example& example) {
  const auto ids = verbalizer_token_ids(adapter, pvp);
  auto masked = render(pvp, example, adapter.mask_marker());
  const auto input = adapter.encode(masked);
  return two_way_softmax(adapter.label_logits(input, ids, example));
}

TrainingLog fine_tune_soft(MlmAdapter& adapter, const PatternVerbalizerPair& pvp,
                           const std::vector<TrainTarget>& trainset, const TrainingHyper& hyper,
                           std::uint64_t seed) {
  if (trainset.empty()) fail(ErrorKind::kArgument, "fine_tune needs a non-empty training set");
  if (!adapter.trainable()) {
    fail(ErrorKind::kCapability,
         std::string(backend_kind_name(adapter.kind())) + " backend cannot be fine-tuned");
  }
  if (hyper.batch_size == 0) fail(ErrorKind::kArgument, "batch_size must be positive");

  const auto label_ids = verbalizer_token_ids(adapter, pvp);
  std::vector<TrainItem> items;
  items.reserve(trainset.size());
  for (const auto& t : trainset) {
    auto masked = render(pvp, t.example, adapter.mask_marker());
    items.push_back({adapter.encode(masked), label_ids, sharpen(t.target, hyper.temperature)});
  }

  TrainingLog log;
  if (hyper.steps == 0) return log;
  adapter.reset_optimizer();

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<TrainItem> batch;
  for (std::size_t step = 0; step < hyper.steps; ++step) {
    batch.clear();
    const std::size_t want = std::min(hyper.batch_size, items.size());
    while (batch.size() < want) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(items[order[cursor++]]);
    }
    log.batch_loss.push_back(adapter.train_step(batch, hyper));
  }
  return log;
}

TrainingLog fine_tune(MlmAdapter& adapter, const PatternVerbalizerPair& pvp,
                      const std::vector<Example>& trainset, const TrainingHyper& hyper,
                      std::uint64_t seed) {
  std::vector<TrainTarget> targets;
  targets.reserve(trainset.size());
  for (const auto& ex : trainset) {
    if (!ex.label) fail(ErrorKind::kArgument, "training example '" + ex.id + "' has no label");
    targets.push_back({ex, ClassDistribution::one_hot(*ex.label)});
  }
  TrainingHyper hard = hyper;
  hard.temperature = 1.0;
  return fine_tune_soft(adapter, pvp, targets, hard, seed);
}

}  // namespace idiomkit
