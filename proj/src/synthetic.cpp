#include "idiomkit/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "idiomkit/error.hpp"

namespace idiomkit::synthetic {

namespace {

constexpr const char* kModule = "corpus";

const std::set<std::string>& reserved() {
  static const std::set<std::string> words{"literal", "phrase", "actually", "not", "yes", "no",
                                           "is", "sim", "si", "non", "mask", "unk"};
  return words;
}

std::string pick(const std::vector<std::string>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
  return pool[d(rng)];
}

std::string make_sentence(const std::string& mwe, Label label, const ToyData& data,
                          const ToyOptions& o, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n_fill(o.min_filler_words, o.max_filler_words);
  std::bernoulli_distribution pure(o.cue_purity);
  std::vector<std::string> words;
  const std::size_t fills = n_fill(rng);
  for (std::size_t i = 0; i < fills; ++i) words.push_back(pick(data.fillers, rng));
  const auto& own = label == Label::kIdiomatic ? data.idiomatic_cues : data.literal_cues;
  const auto& other = label == Label::kIdiomatic ? data.literal_cues : data.idiomatic_cues;
  for (std::size_t i = 0; i < o.cues_per_sentence; ++i) {
    const auto cue = pick(pure(rng) ? own : other, rng);
    std::uniform_int_distribution<std::size_t> at(0, words.size());
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at(rng)), cue);
  }
  std::uniform_int_distribution<std::size_t> at(0, words.size());
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(at(rng)), mwe);
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s + ".";
}

std::vector<Example> make_rows(const std::string& prefix, std::size_t rows,
                               const std::vector<std::string>& mwes, const ToyData& data,
                               const ToyOptions& o, std::mt19937_64& rng) {
  std::vector<Example> out;
  char id[32];
  for (std::size_t i = 0; i < rows; ++i) {
    const Label label = i % 2 == 0 ? Label::kIdiomatic : Label::kLiteral;
    const auto& mwe = mwes[(i / 2) % mwes.size()];
    std::snprintf(id, sizeof id, "%s-%05zu", prefix.c_str(), i + 1);
    out.push_back({id, o.languages[(i / 2) % o.languages.size()], mwe,
                   make_sentence(mwe, label, data, o, rng), label});
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

std::vector<std::string> pseudo_words(std::size_t count, std::uint64_t seed, std::size_t min_syllables,
                                      std::size_t max_syllables) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> syl(min_syllables, max_syllables);
  std::uniform_int_distribution<std::size_t> c(0, consonants.size() - 1);
  std::uniform_int_distribution<std::size_t> v(0, vowels.size() - 1);
  std::set<std::string> seen;
  std::vector<std::string> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > count * 1000 + 1000) {
      throw Error(kModule, ErrorKind::kCapacity, "cannot draw enough distinct pseudo-words");
    }
    std::string w;
    const std::size_t n = syl(rng);
    for (std::size_t i = 0; i < n; ++i) {
      w += consonants[c(rng)];
      w += vowels[v(rng)];
    }
    if (reserved().count(w) || !seen.insert(w).second) continue;
    out.push_back(w);
  }
  return out;
}

ToyData make_toy_data(const ToyOptions& o) {
  if (o.languages.empty() || o.train_mwes == 0 || o.test_mwes == 0 || o.cues_per_class == 0 ||
      o.fillers == 0 || o.min_filler_words > o.max_filler_words) {
    throw Error(kModule, ErrorKind::kArgument, "invalid toy data options");
  }
  const std::size_t n_mwe_words = 2 * (o.train_mwes + o.test_mwes);
  const auto words = pseudo_words(n_mwe_words + 2 * o.cues_per_class + o.fillers, o.seed);
  ToyData data;
  auto it = words.begin();
  for (std::size_t i = 0; i < o.train_mwes + o.test_mwes; ++i, it += 2) {
    const auto mwe = *it + " " + *(it + 1);
    (i < o.train_mwes ? data.train_mwes : data.test_mwes).push_back(mwe);
  }
  data.idiomatic_cues.assign(it, it + static_cast<std::ptrdiff_t>(o.cues_per_class));
  it += static_cast<std::ptrdiff_t>(o.cues_per_class);
  data.literal_cues.assign(it, it + static_cast<std::ptrdiff_t>(o.cues_per_class));
  it += static_cast<std::ptrdiff_t>(o.cues_per_class);
  data.fillers.assign(it, it + static_cast<std::ptrdiff_t>(o.fillers));

  std::mt19937_64 rng(o.seed ^ 0x5eedf00dULL);
  data.train = make_rows("train", o.train_rows, data.train_mwes, data, o, rng);
  data.test = make_rows("test", o.test_rows, data.test_mwes, data, o, rng);
  return data;
}

std::vector<std::string> make_toy_corpus(const ToyData& data, std::size_t lines, std::uint64_t seed) {
  ToyOptions o;
  std::mt19937_64 rng(seed);
  std::vector<std::string> mwes = data.train_mwes;
  mwes.insert(mwes.end(), data.test_mwes.begin(), data.test_mwes.end());
  std::bernoulli_distribution coin(0.5);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < lines; ++i) {
    const Label label = coin(rng) ? Label::kIdiomatic : Label::kLiteral;
    out.push_back(make_sentence(mwes[i % mwes.size()], label, data, o, rng));
  }
  return out;
}

std::vector<std::filesystem::path> write_toy_dataset(const std::filesystem::path& dir,
                                                     const ToyOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(kModule, ErrorKind::kIo, "cannot create '" + dir.string() + "'");
  const auto data = make_toy_data(options);
  write_dataset(dir / "train.tsv", {SplitName::kTrain, data.train});
  write_dataset(dir / "test.tsv", {SplitName::kTest, data.test});
  {
    std::ofstream out(dir / "corpus.txt");
    if (!out) throw Error(kModule, ErrorKind::kIo, "cannot write corpus");
    for (const auto& line : make_toy_corpus(data, options.corpus_lines, options.seed + 1)) out << line << '\n';
  }
  const nlohmann::json config = {
      {"task", "pet"},
      {"name", "toy PET"},
      {"pvps", {"P1", "P2", "P3", "P4", "P5"}},
      {"labeled_size", 100},
      {"unlabeled_size", 1000},
      {"seeds", {1, 2, 3}},
      {"backend", {{"kind", "tiny"}}},
      {"data", {{"train", "train.tsv"}, {"test", "test.tsv"}, {"corpus", "corpus.txt"}}},
      {"output_dir", "run"},
  };
  {
    std::ofstream out(dir / "pet.json");
    out << config.dump(2) << '\n';
  }
  return {dir / "train.tsv", dir / "test.tsv", dir / "corpus.txt", dir / "pet.json"};
}

}  // namespace idiomkit::synthetic
