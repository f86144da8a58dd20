#include "idiomkit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "idiomkit/error.hpp"
#include "idiomkit/text.hpp"

namespace idiomkit {

namespace {

constexpr const char* kModule = "corpus";

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
  throw Error(kModule, kind, message);
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

void check_field(const std::string& value, const char* column) {
  if (value.find_first_of("\t\n\r") != std::string::npos) {
    fail(ErrorKind::kFormat,
         std::string("field in column '") + column + "' contains a tab or newline");
  }
}

}  // namespace

const char* label_name(Label label) {
  return label == Label::kIdiomatic ? "idiomatic" : "literal";
}

std::optional<Label> LabelEncoding::parse(const std::string& value) const {
  if (value == idiomatic) return Label::kIdiomatic;
  if (value == literal) return Label::kLiteral;
  return std::nullopt;
}

const std::string& LabelEncoding::encode(Label label) const {
  return label == Label::kIdiomatic ? idiomatic : literal;
}

SplitName parse_split_name(const std::string& name) {
  if (name == "train") return SplitName::kTrain;
  if (name == "dev") return SplitName::kDev;
  if (name == "eval") return SplitName::kEval;
  if (name == "test") return SplitName::kTest;
  fail(ErrorKind::kArgument, "unknown split name '" + name + "'");
}

const char* split_name(SplitName name) {
  switch (name) {
    case SplitName::kTrain: return "train";
    case SplitName::kDev: return "dev";
    case SplitName::kEval: return "eval";
    case SplitName::kTest: return "test";
  }
  return "train";
}

DatasetSplit load_dataset(const std::filesystem::path& path, SplitName split,
                          const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open dataset '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) {
    fail(ErrorKind::kFormat, "dataset '" + path.string() + "' is empty");
  }
  const auto header = text::split(strip_cr(line), '\t');
  auto column = [&](const char* name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::size_t cols[4];
  const char* required[] = {"id", "language", "mwe", "sentence"};
  for (int c = 0; c < 4; ++c) {
    auto idx = column(required[c]);
    if (!idx) {
      fail(ErrorKind::kFormat, std::string("missing required column '") + required[c] +
                                   "' in '" + path.string() + "'");
    }
    cols[c] = *idx;
  }
  const auto label_col = column("label");

  DatasetSplit out;
  out.name = split;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = text::split(line, '\t');
    if (fields.size() != header.size()) {
      fail(ErrorKind::kFormat, "line " + std::to_string(row) + ": expected " +
                                   std::to_string(header.size()) + " fields, got " +
                                   std::to_string(fields.size()));
    }
    Example ex;
    ex.id = fields[cols[0]];
    ex.language = fields[cols[1]];
    ex.mwe = fields[cols[2]];
    ex.sentence = fields[cols[3]];
    if (label_col && !fields[*label_col].empty()) {
      ex.label = options.encoding.parse(fields[*label_col]);
      if (!ex.label) {
        fail(ErrorKind::kFormat, "line " + std::to_string(row) + ": unparseable label '" +
                                     fields[*label_col] + "'");
      }
    }
    if (!options.languages.empty() &&
        std::find(options.languages.begin(), options.languages.end(), ex.language) ==
            options.languages.end()) {
      fail(ErrorKind::kFormat, "line " + std::to_string(row) + ": language '" +
                                   ex.language + "' is not configured");
    }
    if (options.require_mwe_in_sentence &&
        text::to_lower(ex.sentence).find(text::to_lower(ex.mwe)) == std::string::npos) {
      fail(ErrorKind::kFormat, "line " + std::to_string(row) + ": sentence does not contain '" +
                                   ex.mwe + "'");
    }
    out.examples.push_back(std::move(ex));
  }
  if (out.examples.empty()) {
    fail(ErrorKind::kFormat, "dataset '" + path.string() + "' has no data rows");
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const DatasetSplit& split,
                   const LabelEncoding& encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write dataset '" + path.string() + "'");
  const bool labeled = std::any_of(split.examples.begin(), split.examples.end(),
                                   [](const Example& e) { return e.label.has_value(); });
  out << "id\tlanguage\tmwe\tsentence";
  if (labeled) out << "\tlabel";
  out << '\n';
  for (const auto& ex : split.examples) {
    check_field(ex.id, "id");
    check_field(ex.language, "language");
    check_field(ex.mwe, "mwe");
    check_field(ex.sentence, "sentence");
    out << ex.id << '\t' << ex.language << '\t' << ex.mwe << '\t' << ex.sentence;
    if (labeled) out << '\t' << (ex.label ? encoding.encode(*ex.label) : std::string());
    out << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

LabeledSample sample_labeled(const std::vector<Example>& examples, std::size_t n,
                             std::uint64_t seed) {
  if (n % 2 != 0) fail(ErrorKind::kArgument, "labeled size must be even, got " + std::to_string(n));

  std::vector<std::size_t> idiomatic, literal;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!examples[i].label) {
      fail(ErrorKind::kArgument, "example '" + examples[i].id + "' has no label");
    }
    (*examples[i].label == Label::kIdiomatic ? idiomatic : literal).push_back(i);
  }
  const std::size_t half = n / 2;
  if (idiomatic.size() < half || literal.size() < half) {
    std::string msg = "cannot draw " + std::to_string(half) + " per class:";
    if (idiomatic.size() < half)
      msg += " short " + std::to_string(half - idiomatic.size()) + " idiomatic";
    if (literal.size() < half)
      msg += " short " + std::to_string(half - literal.size()) + " literal";
    fail(ErrorKind::kCapacity, msg);
  }

  std::mt19937_64 rng(seed);
  std::shuffle(idiomatic.begin(), idiomatic.end(), rng);
  std::shuffle(literal.begin(), literal.end(), rng);
  std::vector<bool> chosen(examples.size(), false);
  for (std::size_t i = 0; i < half; ++i) {
    chosen[idiomatic[i]] = true;
    chosen[literal[i]] = true;
  }

  LabeledSample out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (chosen[i] ? out.labeled : out.remainder).push_back(examples[i]);
  }
  return out;
}

UnlabeledPool make_unlabeled_pool(const std::vector<Example>& source, std::size_t size,
                                  std::uint64_t seed) {
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(size, order.size()));
  std::sort(order.begin(), order.end());

  UnlabeledPool pool;
  for (std::size_t i : order) {
    Example ex = source[i];
    if (ex.label) pool.hidden_gold.emplace(ex.id, *ex.label);
    ex.label.reset();
    pool.examples.push_back(std::move(ex));
  }
  return pool;
}

std::vector<ContextSet> harvest_contexts_many(const std::filesystem::path& corpus_path,
                                              const std::vector<std::string>& mwes,
                                              std::size_t k) {
  if (k == 0) fail(ErrorKind::kArgument, "harvest count must be at least 1");
  std::ifstream in(corpus_path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read corpus '" + corpus_path.string() + "'");

  std::vector<ContextSet> sets(mwes.size());
  std::vector<std::unordered_set<std::string>> seen(mwes.size());
  for (std::size_t m = 0; m < mwes.size(); ++m) {
    sets[m].mwe = mwes[m];
    sets[m].source = corpus_path.string();
  }
  std::size_t open = mwes.size();
  std::string line;
  while (open > 0 && std::getline(in, line)) {
    line = strip_cr(line);
    for (std::size_t m = 0; m < mwes.size(); ++m) {
      auto& set = sets[m];
      if (set.contexts.size() >= k) continue;
      if (!text::find_mwe(line, mwes[m])) continue;
      if (!seen[m].insert(line).second) continue;
      set.contexts.push_back(line);
      if (set.contexts.size() == k) --open;
    }
  }
  if (in.bad()) fail(ErrorKind::kIo, "read error on '" + corpus_path.string() + "'");
  return sets;
}

ContextSet harvest_contexts(const std::filesystem::path& corpus_path, const std::string& mwe,
                            std::size_t k) {
  auto sets = harvest_contexts_many(corpus_path, {mwe}, k);
  if (sets.front().contexts.empty()) {
    fail(ErrorKind::kEmptyContext, "no line of '" + corpus_path.string() + "' contains '" +
                                       mwe + "'");
  }
  return std::move(sets.front());
}

}  // namespace idiomkit
