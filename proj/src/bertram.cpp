#include "idiomkit/bertram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "idiomkit/encoder.hpp"
#include "idiomkit/error.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "bertram";
constexpr char kMagic[8] = {'I', 'D', 'K', 'B', 'R', 'T', 'M', '1'};

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

const ContextEncoder& encoder_of(const BertramModel& model) {
  const auto* enc = dynamic_cast<const ContextEncoder*>(model.encoder.get());
  if (!enc) fail(ErrorKind::kCapability, "encoder backend cannot contextualize a substituted input");
  return *enc;
}

struct PreparedContext {
  std::vector<TokenId> ids;
  std::size_t slot = 0;
};

std::optional<PreparedContext> prepare(const MlmAdapter& adapter, const std::string& context,
                                       const std::string& mwe) {
  const auto span = text::find_mwe(context, mwe);
  if (!span) return std::nullopt;
  const auto& tok = adapter.tokenizer();
  const auto& vocab = adapter.vocabulary();
  PreparedContext out;
  out.ids = tok.encode(std::string_view(context).substr(0, span->begin), vocab);
  out.slot = out.ids.size();
  out.ids.push_back(vocab.mask_id());
  const auto tail = tok.encode(std::string_view(context).substr(span->end), vocab);
  out.ids.insert(out.ids.end(), tail.begin(), tail.end());
  return out;
}

struct WordData {
  std::vector<std::string> grams;  // matched n-grams, with repetition
  std::vector<PreparedContext> contexts;
  Eigen::VectorXd gold;
};

// Forward through form, encoder and attention; optionally keep what the
// backward pass needs.
struct Pass {
  Eigen::VectorXd form;
  std::vector<Eigen::VectorXd> hidden;
  std::vector<std::unique_ptr<EncoderTrace>> traces;
  Eigen::VectorXd weights;
  Eigen::VectorXd pooled;
  Eigen::VectorXd output;
};

Eigen::VectorXd mean_of(const std::vector<std::string>& grams, const NGramTable& table) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.dim));
  for (const auto& g : grams) sum += table.vectors.at(g);
  if (!grams.empty()) sum /= static_cast<double>(grams.size());
  return sum;
}

Pass run_forward(const BertramModel& model, const Eigen::VectorXd& form,
                 const std::vector<PreparedContext>& contexts, bool keep_traces) {
  const auto& enc = encoder_of(model);
  Pass pass;
  pass.form = form;
  const auto n = static_cast<Eigen::Index>(contexts.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.dim()));
  Eigen::VectorXd scores(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    std::unique_ptr<EncoderTrace> trace;
    const auto& c = contexts[static_cast<std::size_t>(j)];
    pass.hidden.push_back(enc.contextualize(c.ids, c.slot, form, keep_traces ? &trace : nullptr));
    if (keep_traces) pass.traces.push_back(std::move(trace));
    scores(j) = model.query.dot(pass.hidden.back()) * scale;
  }
  const double mx = scores.maxCoeff();
  pass.weights = (scores.array() - mx).exp();
  pass.weights /= pass.weights.sum();
  pass.pooled = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dim()));
  for (Eigen::Index j = 0; j < n; ++j) pass.pooled += pass.weights(j) * pass.hidden[static_cast<std::size_t>(j)];
  pass.output = model.projection * pass.pooled + model.bias;
  return pass;
}

struct Grad {
  std::unordered_map<std::string, Eigen::VectorXd> grams;
  Eigen::VectorXd query, bias;
  Eigen::MatrixXd projection;
};

double backprop_word(const BertramModel& model, const WordData& word, Grad& grad) {
  const auto form = mean_of(word.grams, model.ngrams);
  Pass pass = run_forward(model, form, word.contexts, true);
  const Eigen::VectorXd diff = pass.output - word.gold;
  const double loss = diff.squaredNorm();

  const Eigen::VectorXd d_out = 2.0 * diff;
  grad.projection.noalias() += d_out * pass.pooled.transpose();
  grad.bias += d_out;
  const Eigen::VectorXd d_pooled = model.projection.transpose() * d_out;

  const auto n = pass.weights.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.dim()));
  Eigen::VectorXd d_w(n);
  for (Eigen::Index j = 0; j < n; ++j) d_w(j) = d_pooled.dot(pass.hidden[static_cast<std::size_t>(j)]);
  const double avg = pass.weights.dot(d_w);
  const auto& enc = encoder_of(model);
  Eigen::VectorXd d_form = Eigen::VectorXd::Zero(form.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& h = pass.hidden[static_cast<std::size_t>(j)];
    const double d_score = pass.weights(j) * (d_w(j) - avg);
    grad.query += d_score * scale * h;
    const Eigen::VectorXd d_h = pass.weights(j) * d_pooled + d_score * scale * model.query;
    d_form += enc.slot_input_gradient(*pass.traces[static_cast<std::size_t>(j)], d_h);
  }
  if (!word.grams.empty()) {
    const Eigen::VectorXd share = d_form / static_cast<double>(word.grams.size());
    for (const auto& g : word.grams) {
      auto [it, inserted] = grad.grams.try_emplace(g, Eigen::VectorXd::Zero(form.size()));
      it->second += share;
    }
  }
  return loss;
}

std::vector<std::string> matched_grams(const std::string& form, const NGramTable& table) {
  std::vector<std::string> out;
  for (auto& g : ngram_set(form, table.n_min, table.n_max)) {
    if (table.vectors.count(g)) out.push_back(std::move(g));
  }
  return out;
}

std::vector<WordData> prepare_words(const std::vector<std::pair<std::string, Eigen::VectorXd>>& words,
                                    const std::vector<ContextSet>& contexts,
                                    const BertramModel& model, std::size_t max_contexts,
                                    std::vector<std::string>* excluded) {
  if (words.size() != contexts.size()) fail(ErrorKind::kArgument, "one context set per word is required");
  std::vector<WordData> out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& [word, gold] = words[i];
    if (static_cast<std::size_t>(gold.size()) != model.dim()) {
      fail(ErrorKind::kArgument, "gold vector of '" + word + "' has the wrong dimension");
    }
    WordData wd;
    wd.gold = gold;
    wd.grams = matched_grams(word, model.ngrams);
    for (const auto& c : contexts[i].contexts) {
      if (wd.contexts.size() >= max_contexts) break;
      if (auto p = prepare(*model.encoder, c, word)) wd.contexts.push_back(std::move(*p));
    }
    if (wd.contexts.empty()) {
      if (excluded) excluded->push_back(word);
      continue;
    }
    out.push_back(std::move(wd));
  }
  return out;
}

double mean_loss(const std::vector<WordData>& data, const BertramModel& model) {
  double total = 0.0;
  for (const auto& w : data) {
    const auto pass = run_forward(model, mean_of(w.grams, model.ngrams), w.contexts, false);
    total += (pass.output - w.gold).squaredNorm();
  }
  return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorKind::kFormat, "truncated BERTRAM checkpoint");
  return v;
}
void put_doubles(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
void get_doubles(std::istream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) fail(ErrorKind::kFormat, "truncated BERTRAM checkpoint");
}

}  // namespace

std::vector<std::string> ngram_set(const std::string& form, std::size_t n_min, std::size_t n_max) {
  const std::string normalized = text::normalize_form(form);
  if (normalized.empty()) fail(ErrorKind::kArgument, "cannot build n-grams of an empty form");
  if (n_min == 0 || n_min > n_max) fail(ErrorKind::kArgument, "invalid n-gram range");
  const std::string padded = "<" + normalized + ">";
  if (n_min > padded.size()) return {padded};
  std::vector<std::string> out;
  for (std::size_t n = n_min; n <= std::min(n_max, padded.size()); ++n) {
    for (std::size_t i = 0; i + n <= padded.size(); ++i) out.push_back(padded.substr(i, n));
  }
  return out;
}

FormEmbedding form_embedding(const std::string& form, const NGramTable& table) {
  if (table.vectors.empty()) fail(ErrorKind::kArgument, "n-gram table is empty");
  for (const auto& [gram, v] : table.vectors) {
    if (static_cast<std::size_t>(v.size()) != table.dim) {
      fail(ErrorKind::kInvariant, "n-gram '" + gram + "' has dimension " + std::to_string(v.size()) +
                                      ", table declares " + std::to_string(table.dim));
    }
  }
  FormEmbedding out;
  out.token_form = text::normalize_form(form);
  const auto grams = matched_grams(form, table);
  out.matched = grams.size();
  out.no_match = grams.empty();
  out.vector = mean_of(grams, table);
  return out;
}

NGramTable build_ngram_table(const std::vector<std::string>& forms, std::size_t n_min,
                             std::size_t n_max, std::size_t dim, double scale, std::uint64_t seed) {
  NGramTable table;
  table.n_min = n_min;
  table.n_max = n_max;
  table.dim = dim;
  std::set<std::string> grams;
  for (const auto& f : forms) {
    for (auto& g : ngram_set(f, n_min, n_max)) grams.insert(std::move(g));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (const auto& g : grams) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = dist(rng);
    table.vectors.emplace(g, std::move(v));
  }
  return table;
}

BertramModel make_bertram_model(std::shared_ptr<const MlmAdapter> encoder, NGramTable ngrams) {
  if (!encoder) fail(ErrorKind::kArgument, "BERTRAM needs an encoder");
  if (!dynamic_cast<const ContextEncoder*>(encoder.get())) {
    fail(ErrorKind::kCapability, std::string(backend_kind_name(encoder->kind())) +
                                     " backend cannot serve as a context encoder");
  }
  if (encoder->embedding_dim() != ngrams.dim) {
    fail(ErrorKind::kInvariant, "encoder dimension " + std::to_string(encoder->embedding_dim()) +
                                    " differs from n-gram dimension " + std::to_string(ngrams.dim));
  }
  const auto d = static_cast<Eigen::Index>(ngrams.dim);
  BertramModel model;
  model.ngrams = std::move(ngrams);
  model.encoder = std::move(encoder);
  model.query = Eigen::VectorXd::Zero(d);
  model.projection = Eigen::MatrixXd::Identity(d, d);
  model.bias = Eigen::VectorXd::Zero(d);
  return model;
}

BertramInference infer_embedding_traced(const std::string& mwe, const ContextSet& contexts,
                                        const BertramModel& model) {
  if (contexts.contexts.empty()) fail(ErrorKind::kArgument, "no contexts given for '" + mwe + "'");
  BertramInference out;
  out.form = form_embedding(mwe, model.ngrams);
  if (out.form.no_match) out.warnings.push_back("no n-gram of '" + mwe + "' is in the table");
  std::vector<PreparedContext> prepared;
  for (std::size_t i = 0; i < contexts.contexts.size(); ++i) {
    if (auto p = prepare(*model.encoder, contexts.contexts[i], mwe)) {
      prepared.push_back(std::move(*p));
      out.used.push_back(i);
    } else {
      out.warnings.push_back("context " + std::to_string(i) + " does not contain '" + mwe + "'");
    }
  }
  if (prepared.empty()) fail(ErrorKind::kArgument, "no context contains '" + mwe + "'");
  const auto pass = run_forward(model, out.form.vector, prepared, false);
  out.attention.assign(pass.weights.data(), pass.weights.data() + pass.weights.size());
  out.embedding = {mwe, pass.output, prepared.size()};
  return out;
}

MWEEmbedding infer_embedding(const std::string& mwe, const ContextSet& contexts,
                             const BertramModel& model) {
  return infer_embedding_traced(mwe, contexts, model).embedding;
}

double mimic_loss(const std::vector<std::pair<std::string, Eigen::VectorXd>>& words,
                  const std::vector<ContextSet>& contexts, const BertramModel& model) {
  return mean_loss(prepare_words(words, contexts, model, std::numeric_limits<std::size_t>::max(), nullptr),
                   model);
}

MimicResult train_mimic(const std::vector<std::pair<std::string, Eigen::VectorXd>>& frequent_words,
                        const std::vector<ContextSet>& contexts, BertramModel model,
                        const MimicHyper& hyper, std::uint64_t seed) {
  MimicResult result;
  const auto data = prepare_words(frequent_words, contexts, model, hyper.contexts_per_word,
                                  &result.excluded);
  if (data.empty()) fail(ErrorKind::kEmptyContext, "no training word has a usable context");
  if (hyper.batch_words == 0) fail(ErrorKind::kArgument, "batch_words must be positive");

  result.initial_loss = mean_loss(data, model);
  if (hyper.steps == 0) {
    result.final_loss = result.initial_loss;
    result.model = std::move(model);
    return result;
  }

  const auto d = static_cast<Eigen::Index>(model.dim());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  struct Moments {
    Eigen::VectorXd m, v;
  };
  std::unordered_map<std::string, Moments> gram_moments;
  Moments q_mom{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  Moments b_mom = q_mom;
  Eigen::MatrixXd p_m = Eigen::MatrixXd::Zero(d, d), p_v = p_m;

  auto adam = [&](auto& param, const auto& g, auto& m, auto& v, double c1, double c2) {
    m = b1 * m + (1.0 - b1) * g;
    v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
    param.array() -= hyper.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  for (std::size_t step = 1; step <= hyper.steps; ++step) {
    Grad grad{{}, Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
    const std::size_t batch = std::min(hyper.batch_words, data.size());
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      loss += backprop_word(model, data[order[cursor++]], grad);
    }
    const double inv = 1.0 / static_cast<double>(batch);
    result.batch_loss.push_back(loss * inv);

    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    // n-gram rows are updated lazily: only rows touched by this batch move.
    for (auto& [gram, g] : grad.grams) {
      g *= inv;
      auto [it, inserted] = gram_moments.try_emplace(gram, Moments{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)});
      adam(model.ngrams.vectors.at(gram), g, it->second.m, it->second.v, c1, c2);
    }
    grad.query *= inv;
    grad.bias *= inv;
    grad.projection *= inv;
    adam(model.query, grad.query, q_mom.m, q_mom.v, c1, c2);
    adam(model.bias, grad.bias, b_mom.m, b_mom.v, c1, c2);
    adam(model.projection, grad.projection, p_m, p_v, c1, c2);
  }
  result.final_loss = mean_loss(data, model);
  result.model = std::move(model);
  return result;
}

MimicResult train_mimic(const std::vector<std::pair<std::string, Eigen::VectorXd>>& frequent_words,
                        const std::filesystem::path& corpus_path, BertramModel model,
                        const MimicHyper& hyper, std::uint64_t seed) {
  std::vector<std::string> words;
  for (const auto& w : frequent_words) words.push_back(w.first);
  const auto contexts = harvest_contexts_many(corpus_path, words, hyper.contexts_per_word);
  return train_mimic(frequent_words, contexts, std::move(model), hyper, seed);
}

void inject_embeddings(MlmAdapter& adapter, const std::vector<MWEEmbedding>& embeddings,
                       bool overwrite) {
  std::set<std::string> forms;
  for (const auto& e : embeddings) {
    const auto form = text::normalize_form(e.mwe);
    if (form.empty()) fail(ErrorKind::kArgument, "empty MWE in injection batch");
    if (!forms.insert(form).second) fail(ErrorKind::kArgument, "MWE '" + e.mwe + "' listed twice");
    if (static_cast<std::size_t>(e.vector.size()) != adapter.embedding_dim()) {
      fail(ErrorKind::kArgument, "embedding of '" + e.mwe + "' has dimension " +
                                     std::to_string(e.vector.size()) + ", adapter expects " +
                                     std::to_string(adapter.embedding_dim()));
    }
    if (!e.vector.allFinite()) fail(ErrorKind::kArgument, "embedding of '" + e.mwe + "' is not finite");
    if (adapter.vocabulary().contains(form) && !overwrite) {
      fail(ErrorKind::kArgument, "'" + form + "' is already a vocabulary token");
    }
  }
  for (const auto& e : embeddings) {
    const auto form = text::normalize_form(e.mwe);
    if (auto id = adapter.vocabulary().find(form)) {
      adapter.set_input_embedding(*id, e.vector);
    } else {
      adapter.append_token(form, e.vector);
    }
  }
}

void write_embeddings(const std::filesystem::path& path, const std::vector<MWEEmbedding>& embeddings) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write embeddings '" + path.string() + "'");
  const std::size_t dim = embeddings.empty() ? 0 : static_cast<std::size_t>(embeddings.front().vector.size());
  out << "mwe\tdim";
  for (std::size_t i = 0; i < dim; ++i) out << "\tv" << i;
  out << '\n';
  char buf[40];
  for (const auto& e : embeddings) {
    if (static_cast<std::size_t>(e.vector.size()) != dim) fail(ErrorKind::kArgument, "mixed embedding dimensions");
    out << e.mwe << '\t' << dim;
    for (Eigen::Index i = 0; i < e.vector.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", e.vector(i));
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

std::vector<MWEEmbedding> read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read embeddings '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, "embedding file is empty");
  const auto header = text::split(line, '\t');
  if (header.size() < 2 || header[0] != "mwe" || header[1] != "dim") {
    fail(ErrorKind::kFormat, "embedding header must start with 'mwe<TAB>dim'");
  }
  std::vector<MWEEmbedding> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = text::split(line, '\t');
    const std::size_t dim = std::stoul(f.at(1));
    if (f.size() != dim + 2 || header.size() != dim + 2) {
      fail(ErrorKind::kFormat, "embedding row " + std::to_string(row) + ": expected " +
                                   std::to_string(dim) + " values");
    }
    MWEEmbedding e;
    e.mwe = f[0];
    e.vector.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) e.vector(static_cast<Eigen::Index>(i)) = std::stod(f[i + 2]);
    e.context_count = 0;
    out.push_back(std::move(e));
  }
  return out;
}

void save_bertram(const BertramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write BERTRAM checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  const auto& t = model.ngrams;
  put<std::uint64_t>(out, t.n_min);
  put<std::uint64_t>(out, t.n_max);
  put<std::uint64_t>(out, t.dim);
  put<std::uint64_t>(out, t.vectors.size());
  for (const auto& [gram, v] : t.vectors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(gram.size()));
    out.write(gram.data(), static_cast<std::streamsize>(gram.size()));
    put_doubles(out, v.data(), t.dim);
  }
  put_doubles(out, model.query.data(), t.dim);
  put_doubles(out, model.projection.data(), t.dim * t.dim);
  put_doubles(out, model.bias.data(), t.dim);
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

BertramModel load_bertram(const std::filesystem::path& path, std::shared_ptr<const MlmAdapter> encoder) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read BERTRAM checkpoint '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    fail(ErrorKind::kFormat, "'" + path.string() + "' is not a BERTRAM checkpoint");
  }
  NGramTable table;
  table.n_min = get<std::uint64_t>(in);
  table.n_max = get<std::uint64_t>(in);
  table.dim = get<std::uint64_t>(in);
  const auto count = get<std::uint64_t>(in);
  const auto d = static_cast<Eigen::Index>(table.dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string gram(get<std::uint32_t>(in), '\0');
    in.read(gram.data(), static_cast<std::streamsize>(gram.size()));
    Eigen::VectorXd v(d);
    get_doubles(in, v.data(), table.dim);
    table.vectors.emplace(std::move(gram), std::move(v));
  }
  auto model = make_bertram_model(std::move(encoder), std::move(table));
  get_doubles(in, model.query.data(), model.dim());
  get_doubles(in, model.projection.data(), model.dim() * model.dim());
  get_doubles(in, model.bias.data(), model.dim());
  return model;
}

}  // namespace idiomkit
