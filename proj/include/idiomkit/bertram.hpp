#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "idiomkit/corpus.hpp"
#include "idiomkit/mlm.hpp"

namespace idiomkit {

struct NGramTable {
  std::size_t n_min = 3;
  std::size_t n_max = 5;
  std::size_t dim = 0;
  std::map<std::string, Eigen::VectorXd> vectors;  // ordered for stable checkpoints
};

// Character n-grams of "<" + normalized form + ">", all n_min-grams left to
// right, then n_min+1, ... up to n_max. Duplicates are kept. When the
// padded form is shorter than n_min the padded form itself is returned.
std::vector<std::string> ngram_set(const std::string& form, std::size_t n_min, std::size_t n_max);

struct FormEmbedding {
  std::string token_form;
  Eigen::VectorXd vector;
  std::size_t matched = 0;
  bool no_match = false;  // zero vector, nothing in the table matched
};

FormEmbedding form_embedding(const std::string& form, const NGramTable& table);

// Table holding every n-gram of `forms`, each vector drawn N(0, scale^2).
NGramTable build_ngram_table(const std::vector<std::string>& forms, std::size_t n_min,
                             std::size_t n_max, std::size_t dim, double scale, std::uint64_t seed);

struct MWEEmbedding {
  std::string mwe;
  Eigen::VectorXd vector;
  std::size_t context_count = 0;
};

// Form n-grams, a frozen context encoder, and the attention layer that
// pools one contextualized vector per context into a single embedding:
//   w = softmax(query . h_j / sqrt(dim)),  e = projection * sum_j w_j h_j + bias
struct BertramModel {
  NGramTable ngrams;
  std::shared_ptr<const MlmAdapter> encoder;
  Eigen::VectorXd query;
  Eigen::MatrixXd projection;
  Eigen::VectorXd bias;

  std::size_t dim() const { return ngrams.dim; }
};

// Zero query, identity projection, zero bias. The encoder must implement
// ContextEncoder and match the table's dimension.
BertramModel make_bertram_model(std::shared_ptr<const MlmAdapter> encoder, NGramTable ngrams);

struct BertramInference {
  MWEEmbedding embedding;
  FormEmbedding form;
  std::vector<double> attention;        // one weight per used context
  std::vector<std::size_t> used;        // indices into the input contexts
  std::vector<std::string> warnings;
};

BertramInference infer_embedding_traced(const std::string& mwe, const ContextSet& contexts,
                                        const BertramModel& model);
MWEEmbedding infer_embedding(const std::string& mwe, const ContextSet& contexts,
                             const BertramModel& model);

struct MimicHyper {
  std::size_t steps = 200;
  std::size_t batch_words = 16;
  std::size_t contexts_per_word = 20;
  double learning_rate = 0.01;
};

struct MimicResult {
  BertramModel model;
  double initial_loss = 0.0;  // mean squared distance over training words
  double final_loss = 0.0;
  std::vector<double> batch_loss;
  std::vector<std::string> excluded;  // words without contexts
};

// Trains n-gram vectors, query, projection and bias so that inferred
// embeddings of frequent words approach their gold vectors under squared
// Euclidean distance. The encoder stays frozen.
MimicResult train_mimic(const std::vector<std::pair<std::string, Eigen::VectorXd>>& frequent_words,
                        const std::filesystem::path& corpus_path, BertramModel model,
                        const MimicHyper& hyper, std::uint64_t seed);

// Same, with contexts already harvested (one ContextSet per word).
MimicResult train_mimic(const std::vector<std::pair<std::string, Eigen::VectorXd>>& frequent_words,
                        const std::vector<ContextSet>& contexts, BertramModel model,
                        const MimicHyper& hyper, std::uint64_t seed);

// Mean squared distance between inferred and gold vectors.
double mimic_loss(const std::vector<std::pair<std::string, Eigen::VectorXd>>& words,
                  const std::vector<ContextSet>& contexts, const BertramModel& model);

// Appends one vocabulary entry per MWE (normalized form) whose input
// embedding is the given vector. Existing rows are untouched. An MWE that
// is already a single token is replaced only when `overwrite` is set.
void inject_embeddings(MlmAdapter& adapter, const std::vector<MWEEmbedding>& embeddings,
                       bool overwrite = false);

// TSV: header "mwe\tdim\tv0..v{dim-1}".
void write_embeddings(const std::filesystem::path& path, const std::vector<MWEEmbedding>& embeddings);
std::vector<MWEEmbedding> read_embeddings(const std::filesystem::path& path);

void save_bertram(const BertramModel& model, const std::filesystem::path& path);
BertramModel load_bertram(const std::filesystem::path& path, std::shared_ptr<const MlmAdapter> encoder);

}  // namespace idiomkit
