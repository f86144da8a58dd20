#include "idiomkit/tiny_mlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "idiomkit/error.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "mlm-adapter";
constexpr char kMagic[8] = {'I', 'D', 'K', 'T', 'I', 'N', 'Y', '1'};
constexpr std::uint32_t kFormatVersion = 1;

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

Eigen::MatrixXd gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  return m;
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd out = s;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    out.row(i) = (s.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// Binary helpers.
template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorKind::kFormat, "truncated checkpoint");
  return v;
}
void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) fail(ErrorKind::kFormat, "truncated checkpoint");
  return s;
}
void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}
void get_matrix(std::istream& in, Eigen::MatrixXd& m) {
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols())) {
    fail(ErrorKind::kFormat, "checkpoint tensor shape mismatch");
  }
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!in) fail(ErrorKind::kFormat, "truncated checkpoint");
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

}  // namespace

std::vector<Eigen::MatrixXd*> TinyMlm::Params::tensors() {
  std::vector<Eigen::MatrixXd*> out{&embedding, &position, &output, &output_bias};
  for (auto& l : layers) {
    for (auto* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.b1, &l.w2, &l.b2}) out.push_back(m);
  }
  return out;
}

std::vector<const Eigen::MatrixXd*> TinyMlm::Params::tensors() const {
  auto mut = const_cast<Params*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

TinyMlm::Params TinyMlm::Params::zeros_like() const {
  Params z = *this;
  for (auto* m : z.tensors()) m->setZero();
  return z;
}

TinyMlm::TinyMlm(Vocabulary vocab, Tokenizer tokenizer, TinyConfig config)
    : MlmAdapter(std::move(vocab), std::move(tokenizer)), config_(config) {
  if (config_.dim == 0 || config_.ffn_dim == 0 || config_.max_positions == 0) {
    fail(ErrorKind::kArgument, "tiny backend dimensions must be positive");
  }
}

TinyMlm::TinyMlm(Vocabulary vocab, Tokenizer tokenizer, TinyConfig config, std::uint64_t seed)
    : TinyMlm(std::move(vocab), std::move(tokenizer), config) {
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.dim, f = config_.ffn_dim, v = vocab_.size();
  params_.embedding = gaussian(v, d, config_.init_scale, rng);
  params_.position = gaussian(config_.max_positions, d, config_.init_scale, rng);
  params_.output = gaussian(v, d, config_.init_scale, rng);
  params_.output_bias = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(v), 1);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sf = 1.0 / std::sqrt(static_cast<double>(f));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    Layer layer;
    layer.wq = gaussian(d, d, sd, rng);
    layer.wk = gaussian(d, d, sd, rng);
    layer.wv = gaussian(d, d, sd, rng);
    layer.wo = gaussian(d, d, sd, rng);
    layer.w1 = gaussian(d, f, sd, rng);
    layer.b1 = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(f));
    layer.w2 = gaussian(f, d, sf, rng);
    layer.b2 = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(d));
    params_.layers.push_back(std::move(layer));
  }
}

std::size_t TinyMlm::position_row(std::size_t i) const {
  return std::min(i, config_.max_positions - 1);
}

TinyMlm::Trace TinyMlm::forward(const std::vector<TokenId>& ids, std::optional<std::size_t> slot,
                                const Eigen::VectorXd* slot_input) const {
  Trace tr;
  tr.ids = ids;
  tr.slot = slot;
  const auto t = static_cast<Eigen::Index>(ids.size());
  const auto d = static_cast<Eigen::Index>(config_.dim);
  Eigen::MatrixXd x(t, d);
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto pos = static_cast<Eigen::Index>(position_row(static_cast<std::size_t>(i)));
    if (slot && static_cast<Eigen::Index>(*slot) == i) {
      x.row(i) = slot_input->transpose() + params_.position.row(pos);
    } else {
      x.row(i) = params_.embedding.row(ids[static_cast<std::size_t>(i)]) + params_.position.row(pos);
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.dim));
  for (const auto& layer : params_.layers) {
    LayerCache c;
    c.x = x;
    c.q = x * layer.wq;
    c.k = x * layer.wk;
    c.v = x * layer.wv;
    c.a = row_softmax(c.q * c.k.transpose() * scale);
    c.c = c.a * c.v;
    c.u = x + c.c * layer.wo;
    c.z = c.u * layer.w1;
    c.z.rowwise() += layer.b1.row(0);
    c.r = c.z.cwiseMax(0.0);
    x = c.u + c.r * layer.w2;
    x.rowwise() += layer.b2.row(0);
    tr.layers.push_back(std::move(c));
  }
  tr.out = std::move(x);
  return tr;
}

Eigen::MatrixXd TinyMlm::backward(const Trace& tr, Eigen::MatrixXd d_out, Params* grads) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.dim));
  for (std::size_t li = params_.layers.size(); li-- > 0;) {
    const auto& layer = params_.layers[li];
    const auto& c = tr.layers[li];
    Layer* g = grads ? &grads->layers[li] : nullptr;

    Eigen::MatrixXd d_u = d_out;
    const Eigen::MatrixXd d_r = d_out * layer.w2.transpose();
    const Eigen::MatrixXd d_z = (d_r.array() * (c.z.array() > 0.0).cast<double>()).matrix();
    if (g) {
      g->w2.noalias() += c.r.transpose() * d_out;
      g->b2 += d_out.colwise().sum();
      g->w1.noalias() += c.u.transpose() * d_z;
      g->b1 += d_z.colwise().sum();
    }
    d_u.noalias() += d_z * layer.w1.transpose();

    Eigen::MatrixXd d_x = d_u;
    const Eigen::MatrixXd d_c = d_u * layer.wo.transpose();
    if (g) g->wo.noalias() += c.c.transpose() * d_u;
    const Eigen::MatrixXd d_a = d_c * c.v.transpose();
    const Eigen::MatrixXd d_v = c.a.transpose() * d_c;
    const Eigen::VectorXd row_dot = (d_a.array() * c.a.array()).rowwise().sum();
    Eigen::MatrixXd d_s = (c.a.array() * (d_a.colwise() - row_dot).array()).matrix() * scale;
    const Eigen::MatrixXd d_q = d_s * c.k;
    const Eigen::MatrixXd d_k = d_s.transpose() * c.q;
    if (g) {
      g->wq.noalias() += c.x.transpose() * d_q;
      g->wk.noalias() += c.x.transpose() * d_k;
      g->wv.noalias() += c.x.transpose() * d_v;
    }
    d_x.noalias() += d_q * layer.wq.transpose();
    d_x.noalias() += d_k * layer.wk.transpose();
    d_x.noalias() += d_v * layer.wv.transpose();
    d_out = std::move(d_x);
  }
  if (grads) {
    for (std::size_t i = 0; i < tr.ids.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      grads->position.row(static_cast<Eigen::Index>(position_row(i))) += d_out.row(row);
      if (tr.slot && *tr.slot == i) continue;
      grads->embedding.row(tr.ids[i]) += d_out.row(row);
    }
  }
  return d_out;
}

std::vector<double> TinyMlm::mask_logits(const EncodedInput& input, const Example&) const {
  const auto tr = forward(input.ids, std::nullopt, nullptr);
  const Eigen::VectorXd h = tr.out.row(static_cast<Eigen::Index>(input.mask_index)).transpose();
  const Eigen::VectorXd logits = params_.output * h + params_.output_bias.col(0);
  return {logits.data(), logits.data() + logits.size()};
}

LabelLogits TinyMlm::label_logits(const EncodedInput& input, const LabelTokenIds& ids,
                                  const Example&) const {
  const auto tr = forward(input.ids, std::nullopt, nullptr);
  const auto h = tr.out.row(static_cast<Eigen::Index>(input.mask_index));
  return {params_.output.row(ids.literal_id).dot(h) + params_.output_bias(ids.literal_id, 0),
          params_.output.row(ids.idiom_id).dot(h) + params_.output_bias(ids.idiom_id, 0)};
}

double TinyMlm::item_gradient(const TrainItem& item, Params& grads) const {
  const auto tr = forward(item.input.ids, std::nullopt, nullptr);
  const auto m = static_cast<Eigen::Index>(item.input.mask_index);
  const Eigen::RowVectorXd h = tr.out.row(m);
  const auto lit = item.label_ids.literal_id, idi = item.label_ids.idiom_id;
  const double z_lit = params_.output.row(lit).dot(h) + params_.output_bias(lit, 0);
  const double z_idi = params_.output.row(idi).dot(h) + params_.output_bias(idi, 0);
  const double mx = std::max(z_lit, z_idi);
  const double lse = mx + std::log(std::exp(z_lit - mx) + std::exp(z_idi - mx));
  const double loss = -(item.target.p_literal * (z_lit - lse) + item.target.p_idiomatic * (z_idi - lse));
  const double p_lit = std::exp(z_lit - lse), p_idi = std::exp(z_idi - lse);
  const double d_lit = p_lit - item.target.p_literal;
  const double d_idi = p_idi - item.target.p_idiomatic;

  grads.output.row(lit) += d_lit * h;
  grads.output.row(idi) += d_idi * h;
  grads.output_bias(lit, 0) += d_lit;
  grads.output_bias(idi, 0) += d_idi;
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(tr.out.rows(), tr.out.cols());
  d_out.row(m) = d_lit * params_.output.row(lit) + d_idi * params_.output.row(idi);
  backward(tr, std::move(d_out), &grads);
  return loss;
}

void TinyMlm::reset_optimizer() {
  adam_m_ = params_.zeros_like();
  adam_v_ = params_.zeros_like();
  adam_step_ = 0;
}

double TinyMlm::train_step(std::span<const TrainItem> batch, const TrainingHyper& hyper) {
  if (batch.empty()) fail(ErrorKind::kArgument, "empty training batch");
  if (adam_m_.layers.size() != params_.layers.size() ||
      adam_m_.embedding.rows() != params_.embedding.rows()) {
    reset_optimizer();
  }
  Params grads = params_.zeros_like();
  double loss = 0.0;
  for (const auto& item : batch) loss += item_gradient(item, grads);
  const double inv = 1.0 / static_cast<double>(batch.size());
  double norm2 = 0.0;
  for (auto* g : grads.tensors()) {
    *g *= inv;
    norm2 += g->squaredNorm();
  }
  const double norm = std::sqrt(norm2);
  const double clip = (hyper.max_grad_norm > 0 && norm > hyper.max_grad_norm)
                          ? hyper.max_grad_norm / norm
                          : 1.0;

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++adam_step_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_step_));
  auto p = params_.tensors();
  auto g = grads.tensors();
  auto m = adam_m_.tensors();
  auto v = adam_v_.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Eigen::ArrayXXd gi = g[i]->array() * clip;
    m[i]->array() = b1 * m[i]->array() + (1.0 - b1) * gi;
    v[i]->array() = b2 * v[i]->array() + (1.0 - b2) * gi.square();
    p[i]->array() -= hyper.learning_rate * (m[i]->array() / c1) /
                     ((v[i]->array() / c2).sqrt() + eps);
  }
  bump_state_version();
  return loss * inv;
}

std::string TinyMlm::fingerprint() const {
  std::uint64_t h = vocab_.hash();
  for (const auto* t : params_.tensors()) {
    h = text::fnv1a(std::string_view(reinterpret_cast<const char*>(t->data()),
                                     sizeof(double) * static_cast<std::size_t>(t->size())),
                    h);
  }
  return text::hex64(h);
}

Eigen::VectorXd TinyMlm::input_embedding(TokenId id) const {
  return params_.embedding.row(id).transpose();
}

void TinyMlm::set_input_embedding(TokenId id, const Eigen::VectorXd& vector) {
  if (static_cast<std::size_t>(vector.size()) != config_.dim) {
    fail(ErrorKind::kArgument, "embedding dimension mismatch");
  }
  params_.embedding.row(id) = vector.transpose();
}

void TinyMlm::resize_vocabulary_rows(std::size_t rows) {
  const auto old = params_.embedding.rows();
  const auto n = static_cast<Eigen::Index>(rows);
  const auto d = static_cast<Eigen::Index>(config_.dim);
  params_.embedding.conservativeResize(n, d);
  params_.output.conservativeResize(n, d);
  params_.output_bias.conservativeResize(n, 1);
  if (n > old) {
    params_.embedding.bottomRows(n - old).setZero();
    params_.output.bottomRows(n - old).setZero();
    params_.output_bias.bottomRows(n - old).setZero();
  }
  adam_m_ = {};
  adam_v_ = {};
  adam_step_ = 0;
}

Eigen::VectorXd TinyMlm::contextualize(const std::vector<TokenId>& ids, std::size_t slot,
                                       const Eigen::VectorXd& slot_input,
                                       std::unique_ptr<EncoderTrace>* trace) const {
  if (slot >= ids.size()) fail(ErrorKind::kArgument, "slot position outside the input");
  auto tr = std::make_unique<Trace>(forward(ids, slot, &slot_input));
  Eigen::VectorXd h = tr->out.row(static_cast<Eigen::Index>(slot)).transpose();
  if (trace) *trace = std::move(tr);
  return h;
}

Eigen::VectorXd TinyMlm::slot_input_gradient(const EncoderTrace& trace,
                                             const Eigen::VectorXd& d_output) const {
  const auto& tr = dynamic_cast<const Trace&>(trace);
  const auto slot = static_cast<Eigen::Index>(*tr.slot);
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(tr.out.rows(), tr.out.cols());
  d_out.row(slot) = d_output.transpose();
  const Eigen::MatrixXd d_in = backward(tr, std::move(d_out), nullptr);
  return d_in.row(slot).transpose();
}

void TinyMlm::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, config_.dim);
  put<std::uint64_t>(out, config_.layers);
  put<std::uint64_t>(out, config_.ffn_dim);
  put<std::uint64_t>(out, config_.max_positions);
  put<double>(out, config_.init_scale);
  put<std::uint8_t>(out, tokenizer_.lowercase() ? 1 : 0);
  put<std::uint64_t>(out, state_version_);
  put<std::uint64_t>(out, vocab_.size());
  for (const auto& t : vocab_.tokens()) put_string(out, t);
  std::vector<std::string> phrases(tokenizer_.phrases().begin(), tokenizer_.phrases().end());
  std::sort(phrases.begin(), phrases.end());
  put<std::uint64_t>(out, phrases.size());
  for (const auto& p : phrases) put_string(out, p);
  for (const auto* t : params_.tensors()) put_matrix(out, *t);
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");

  nlohmann::json meta = {
      {"format_version", kFormatVersion},
      {"backend_kind", backend_kind_name(kind())},
      {"vocabulary_hash", text::hex64(vocab_.hash())},
      {"vocabulary_size", vocab_.size()},
      {"embedding_dim", config_.dim},
      {"state_version", state_version_},
      {"fingerprint", fingerprint()},
  };
  std::ofstream side(sidecar(path));
  side << meta.dump(2) << '\n';
  if (!side) fail(ErrorKind::kIo, "cannot write checkpoint metadata for '" + path.string() + "'");
}

std::unique_ptr<TinyMlm> TinyMlm::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read checkpoint '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    fail(ErrorKind::kFormat, "'" + path.string() + "' is not a tiny-backend checkpoint");
  }
  if (get<std::uint32_t>(in) != kFormatVersion) fail(ErrorKind::kFormat, "unsupported checkpoint version");
  TinyConfig cfg;
  cfg.dim = get<std::uint64_t>(in);
  cfg.layers = get<std::uint64_t>(in);
  cfg.ffn_dim = get<std::uint64_t>(in);
  cfg.max_positions = get<std::uint64_t>(in);
  cfg.init_scale = get<double>(in);
  Tokenizer tok(get<std::uint8_t>(in) != 0);
  const auto version = get<std::uint64_t>(in);
  Vocabulary vocab;
  const auto n = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto s = get_string(in);
    if (vocab.add(s) != static_cast<TokenId>(i)) fail(ErrorKind::kFormat, "corrupt vocabulary in checkpoint");
  }
  const auto phrases = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < phrases; ++i) tok.register_phrase(get_string(in));

  std::unique_ptr<TinyMlm> model(new TinyMlm(std::move(vocab), std::move(tok), cfg));
  auto& p = model->params_;
  const auto v = static_cast<Eigen::Index>(n), d = static_cast<Eigen::Index>(cfg.dim),
             f = static_cast<Eigen::Index>(cfg.ffn_dim);
  p.embedding.resize(v, d);
  p.position.resize(static_cast<Eigen::Index>(cfg.max_positions), d);
  p.output.resize(v, d);
  p.output_bias.resize(v, 1);
  p.layers.resize(cfg.layers);
  for (auto& l : p.layers) {
    l.wq.resize(d, d);
    l.wk.resize(d, d);
    l.wv.resize(d, d);
    l.wo.resize(d, d);
    l.w1.resize(d, f);
    l.b1.resize(1, f);
    l.w2.resize(f, d);
    l.b2.resize(1, d);
  }
  for (auto* t : p.tensors()) get_matrix(in, *t);
  model->set_state_version(version);

  std::ifstream side(sidecar(path));
  if (side) {
    const auto meta = nlohmann::json::parse(side, nullptr, false);
    if (meta.is_discarded()) fail(ErrorKind::kFormat, "unreadable checkpoint metadata");
    if (meta.value("vocabulary_hash", "") != text::hex64(model->vocabulary().hash()) ||
        meta.value("embedding_dim", std::size_t{0}) != cfg.dim) {
      fail(ErrorKind::kFormat, "checkpoint metadata does not match '" + path.string() + "'");
    }
  }
  return model;
}

Vocabulary build_vocabulary(const std::vector<std::string>& texts, const Tokenizer& tokenizer,
                            const std::vector<std::string>& extra) {
  Vocabulary vocab;
  for (const auto& e : extra) vocab.add(e);
  for (const auto& t : texts) {
    for (const auto& u : tokenizer.units(t)) vocab.add(u);
  }
  return vocab;
}

void save_checkpoint(const MlmAdapter& adapter, const std::filesystem::path& path) {
  const auto* tiny = dynamic_cast<const TinyMlm*>(&adapter);
  if (!tiny) {
    fail(ErrorKind::kCapability, std::string("no checkpoint format for ") +
                                     backend_kind_name(adapter.kind()) + " backend");
  }
  tiny->save(path);
}

std::unique_ptr<MlmAdapter> load_checkpoint(const std::filesystem::path& path) {
  return TinyMlm::load(path);
}

}  // namespace idiomkit
