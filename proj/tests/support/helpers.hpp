#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "idiomkit/error.hpp"
#include "idiomkit/mlm.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "idiomkit-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Vocabulary holding every built-in verbalizer word plus `extra`.
inline idiomkit::Vocabulary verbalizer_vocabulary(const std::vector<std::string>& extra = {}) {
  idiomkit::Vocabulary v;
  for (const char* w : {"literal", "phrase", "actually", "not", "yes", "no", "sim", "não", "si", "non"}) v.add(w);
  for (const auto& w : extra) v.add(w);
  return v;
}

// Backend that returns fixed label logits per example id, optionally
// failing on chosen ids. Stands in for trained members.
class StubMlm final : public idiomkit::MlmAdapter {
 public:
  explicit StubMlm(std::map<std::string, idiomkit::LabelLogits> logits, std::set<std::string> failing = {},
                   idiomkit::Vocabulary vocab = verbalizer_vocabulary())
      : MlmAdapter(std::move(vocab), idiomkit::Tokenizer()), logits_(std::move(logits)),
        failing_(std::move(failing)) {}

  idiomkit::BackendKind kind() const override { return idiomkit::BackendKind::kExternal; }
  std::unique_ptr<idiomkit::MlmAdapter> clone() const override { return std::make_unique<StubMlm>(*this); }
  std::size_t embedding_dim() const override { return 2; }

  idiomkit::LabelLogits label_logits(const idiomkit::EncodedInput&, const idiomkit::LabelTokenIds&,
                                     const idiomkit::Example& example) const override {
    if (failing_.count(example.id)) {
      throw idiomkit::Error("test", idiomkit::ErrorKind::kRender, "stub failure on " + example.id);
    }
    auto it = logits_.find(example.id);
    return it == logits_.end() ? idiomkit::LabelLogits{} : it->second;
  }
  Eigen::VectorXd input_embedding(idiomkit::TokenId) const override { return Eigen::VectorXd::Zero(2); }
  void set_input_embedding(idiomkit::TokenId, const Eigen::VectorXd&) override {}

 protected:
  void resize_vocabulary_rows(std::size_t) override {}

 private:
  std::map<std::string, idiomkit::LabelLogits> logits_;
  std::set<std::string> failing_;
};

// Logits whose two-way softmax gives p_idiomatic.
inline idiomkit::LabelLogits logits_for(double p_idiomatic) {
  return {0.0, std::log(p_idiomatic / (1.0 - p_idiomatic))};
}

}  // namespace testing
