#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace narrsum {

using TokenList = std::vector<std::string>;

/// Raised when the on-disk dataset layout is unusable. The CLI maps this to
/// exit status 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxSentenceTokens = 60;

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
};

struct Sentence {
  TokenList tokens;
  CharSpan char_span;
};

struct Document {
  std::string id;
  std::vector<Sentence> sentences;
  std::string source_path;

  std::size_t word_count() const;
};

struct Summary {
  std::string id;
  std::vector<Sentence> sentences;
};

struct SummarySet {
  std::string report_id;
  std::vector<Summary> summaries;
};

/// A report paired with its gold summaries.
struct Example {
  Document document;
  SummarySet summaries;
};

struct Split {
  std::string name;
  std::vector<Example> examples;
  std::size_t summary_count() const;
};

struct Dataset {
  Split training;
  Split validation;
  Split testing;

  const Split& split(std::string_view name) const;
};

/// Token-to-id table with four reserved ids. Unknown tokens map to kUnk.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kStart = 2;
  static constexpr int kEnd = 3;
  static constexpr int kReserved = 4;

  Vocab();
  explicit Vocab(std::vector<std::string> ranked_tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  TokenList decode(std::span<const int> ids) const;

  /// Non-reserved tokens in id order.
  std::vector<std::string> ranked_tokens() const;

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Character spans of each sentence in `text`, trimmed of surrounding
/// whitespace. A boundary follows '.', '!' or '?' when the next
/// non-whitespace character is an uppercase letter or a digit, unless the
/// word ending at the period is a known abbreviation.
std::vector<CharSpan> sentence_spans(std::string_view text);

std::vector<std::string> split_sentences(std::string_view text);

/// Lowercased alphanumeric runs, truncated to `max_tokens`.
TokenList tokenize_words(std::string_view sentence_text,
                         std::size_t max_tokens = kMaxSentenceTokens);

/// Sentence splitting plus tokenization. Sentences with no tokens are dropped.
std::vector<Sentence> parse_text(std::string_view text);

Vocab build_vocab(std::span<const Document> documents,
                  std::size_t max_size = 20000);

Document read_document(const std::filesystem::path& path, std::string id);

struct LoadDiagnostics {
  std::vector<std::string> warnings;
};

/// Loads <root>/{training,validation,testing}/{annual_reports,gold_summaries}.
/// Training reports without a summary are excluded with a warning.
Dataset load_dataset(const std::filesystem::path& root,
                     LoadDiagnostics* diagnostics = nullptr);

/// {split: {reports: N, summaries: M}} as JSON text.
std::string manifest_json(const Dataset& dataset);

/// Ids of every document sentence, mapped through `vocab`.
std::vector<std::vector<int>> encode_sentences(const Vocab& vocab,
                                               std::span<const Sentence> sentences);

std::vector<TokenList> sentence_tokens(std::span<const Sentence> sentences);

}  // namespace narrsum
