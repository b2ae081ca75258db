#include "narrsum/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace narrsum {
namespace {

namespace fs = std::filesystem;

constexpr std::array<std::string_view, 9> kAbbreviations = {
    "mr.", "mrs.", "dr.", "st.", "no.", "fig.", "e.g.", "i.e.", "etc."};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return is_upper(c) || is_digit(c) || (c >= 'a' && c <= 'z'); }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// The whitespace-delimited word that ends at `period` (inclusive), lowercased
// and stripped of leading quotes and brackets.
std::string word_ending_at(std::string_view text, std::size_t period) {
  std::size_t begin = period;
  while (begin > 0 && !is_space(text[begin - 1])) --begin;
  while (begin < period && (text[begin] == '"' || text[begin] == '\'' ||
                            text[begin] == '(' || text[begin] == '[')) {
    ++begin;
  }
  std::string word(text.substr(begin, period - begin + 1));
  for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return word;
}

bool is_abbreviation(std::string_view text, std::size_t period) {
  const std::string word = word_ending_at(text, period);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) !=
         kAbbreviations.end();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<fs::path> sorted_txt_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

// "<report_id>_<j>" -> (report_id, j); j < 0 when the stem has no numeric suffix.
std::pair<std::string, long> parse_summary_stem(const std::string& stem) {
  const auto underscore = stem.rfind('_');
  if (underscore == std::string::npos || underscore + 1 == stem.size()) {
    return {stem, -1};
  }
  long j = 0;
  const char* first = stem.data() + underscore + 1;
  const char* last = stem.data() + stem.size();
  auto [ptr, ec] = std::from_chars(first, last, j);
  if (ec != std::errc() || ptr != last) return {stem, -1};
  return {stem.substr(0, underscore), j};
}

Split load_split(const fs::path& root, const std::string& name,
                 LoadDiagnostics* diagnostics) {
  const fs::path split_dir = root / name;
  const fs::path reports_dir = split_dir / "annual_reports";
  const fs::path summaries_dir = split_dir / "gold_summaries";
  for (const auto& dir : {split_dir, reports_dir, summaries_dir}) {
    if (!fs::is_directory(dir)) {
      throw DataError("missing dataset directory: " + dir.string());
    }
  }
  auto warn = [&](std::string message) {
    if (diagnostics) diagnostics->warnings.push_back(std::move(message));
  };

  std::map<std::string, std::vector<std::pair<long, fs::path>>> summary_files;
  for (const auto& path : sorted_txt_files(summaries_dir)) {
    auto [report_id, j] = parse_summary_stem(path.stem().string());
    if (j < 0) {
      warn(name + ": ignoring summary with malformed name " + path.filename().string());
      continue;
    }
    summary_files[report_id].emplace_back(j, path);
  }

  Split split;
  split.name = name;
  for (const auto& path : sorted_txt_files(reports_dir)) {
    Example example;
    const std::string id = path.stem().string();
    example.document = read_document(path, id);
    example.summaries.report_id = id;
    if (auto it = summary_files.find(id); it != summary_files.end()) {
      auto files = it->second;
      std::sort(files.begin(), files.end());
      for (const auto& [j, summary_path] : files) {
        Summary summary;
        summary.id = summary_path.stem().string();
        summary.sentences = parse_text(read_file(summary_path));
        example.summaries.summaries.push_back(std::move(summary));
      }
      summary_files.erase(it);
    }
    if (name == "training" && example.summaries.summaries.empty()) {
      warn(name + ": report " + id + " has no gold summary; excluded");
      continue;
    }
    split.examples.push_back(std::move(example));
  }
  for (const auto& [report_id, files] : summary_files) {
    warn(name + ": summaries for unknown report " + report_id + " ignored");
  }
  return split;
}

}  // namespace

std::size_t Document::word_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

std::size_t Split::summary_count() const {
  std::size_t n = 0;
  for (const auto& e : examples) n += e.summaries.summaries.size();
  return n;
}

const Split& Dataset::split(std::string_view name) const {
  if (name == "training") return training;
  if (name == "validation") return validation;
  if (name == "testing") return testing;
  throw std::invalid_argument("unknown split: " + std::string(name));
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> ranked_tokens) {
  id_to_token_ = {"<pad>", "<unk>", "<s>", "</s>"};
  id_to_token_.insert(id_to_token_.end(), std::make_move_iterator(ranked_tokens.begin()),
                      std::make_move_iterator(ranked_tokens.end()));
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], static_cast<int>(i));
    if (!inserted) throw std::invalid_argument("duplicate vocabulary token: " + it->first);
  }
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return kUnk;
  return it->second;
}

const std::string& Vocab::token(int id) const {
  return id_to_token_.at(static_cast<std::size_t>(id));
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

TokenList Vocab::decode(std::span<const int> ids) const {
  TokenList tokens;
  tokens.reserve(ids.size());
  for (int i : ids) tokens.push_back(token(i));
  return tokens;
}

std::vector<std::string> Vocab::ranked_tokens() const {
  return {id_to_token_.begin() + kReserved, id_to_token_.end()};
}

std::vector<CharSpan> sentence_spans(std::string_view text) {
  std::vector<CharSpan> spans;
  auto emit = [&](std::size_t begin, std::size_t end) {
    while (begin < end && is_space(text[begin])) ++begin;
    while (end > begin && is_space(text[end - 1])) --end;
    if (begin < end) spans.push_back({begin, end});
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t after = i + 1;
    while (after < text.size() &&
           (text[after] == '.' || text[after] == '!' || text[after] == '?')) {
      ++after;
    }
    while (after < text.size() && is_closer(text[after])) ++after;
    if (after >= text.size() || !is_space(text[after])) continue;
    std::size_t next = after;
    while (next < text.size() && is_space(text[next])) ++next;
    if (next >= text.size()) continue;
    if (!is_upper(text[next]) && !is_digit(text[next])) continue;
    if (text[after - 1] == '.' && after == i + 1 && is_abbreviation(text, i)) continue;
    emit(start, after);
    start = after;
    i = after - 1;
  }
  emit(start, text.size());
  return spans;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& span : sentence_spans(text)) {
    out.emplace_back(text.substr(span.start, span.end - span.start));
  }
  return out;
}

TokenList tokenize_words(std::string_view sentence_text, std::size_t max_tokens) {
  TokenList tokens;
  std::string current;
  for (char c : sentence_text) {
    if (tokens.size() >= max_tokens) break;
    if (is_alnum(c)) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty() && tokens.size() < max_tokens) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<Sentence> parse_text(std::string_view text) {
  std::vector<Sentence> sentences;
  for (const auto& span : sentence_spans(text)) {
    Sentence s;
    s.tokens = tokenize_words(text.substr(span.start, span.end - span.start));
    s.char_span = span;
    if (!s.tokens.empty()) sentences.push_back(std::move(s));
  }
  return sentences;
}

Vocab build_vocab(std::span<const Document> documents, std::size_t max_size) {
  if (documents.empty()) throw std::invalid_argument("build_vocab: no documents");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : documents) {
    for (const auto& sentence : doc.sentences) {
      for (const auto& token : sentence.tokens) ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [token, count] : ranked) tokens.push_back(std::move(token));
  return Vocab(std::move(tokens));
}

Document read_document(const fs::path& path, std::string id) {
  Document doc;
  doc.id = std::move(id);
  doc.source_path = path.string();
  doc.sentences = parse_text(read_file(path));
  return doc;
}

Dataset load_dataset(const fs::path& root, LoadDiagnostics* diagnostics) {
  if (!fs::is_directory(root)) {
    throw DataError("dataset root is not a directory: " + root.string());
  }
  Dataset dataset;
  dataset.training = load_split(root, "training", diagnostics);
  dataset.validation = load_split(root, "validation", diagnostics);
  dataset.testing = load_split(root, "testing", diagnostics);
  return dataset;
}

std::string manifest_json(const Dataset& dataset) {
  nlohmann::ordered_json manifest;
  for (const Split* split : {&dataset.training, &dataset.validation, &dataset.testing}) {
    manifest[split->name] = {{"reports", split->examples.size()},
                             {"summaries", split->summary_count()}};
  }
  return manifest.dump(2) + "\n";
}

std::vector<std::vector<int>> encode_sentences(const Vocab& vocab,
                                               std::span<const Sentence> sentences) {
  std::vector<std::vector<int>> ids;
  ids.reserve(sentences.size());
  for (const auto& s : sentences) ids.push_back(vocab.encode(s.tokens));
  return ids;
}

std::vector<TokenList> sentence_tokens(std::span<const Sentence> sentences) {
  std::vector<TokenList> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(s.tokens);
  return out;
}

}  // namespace narrsum
