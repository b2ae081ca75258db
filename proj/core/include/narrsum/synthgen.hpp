#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "narrsum/oracle.hpp"

namespace narrsum::synthgen {

/// Synthetic corpus parameters. Salient report sentences draw words from a
/// narrative pool, the rest from a disjoint boilerplate pool; summary 0 copies
/// the salient sentences in document order with per-token noise.
struct SynthSpec {
  std::uint64_t seed = 1;
  std::size_t n_reports = 20;
  std::size_t sentences_per_report = 30;
  std::size_t summary_sentences = 5;
  std::size_t vocabulary_size = 400;
  double noise_rate = 0.0;

  std::size_t validation_reports = 0;
  std::size_t testing_reports = 0;
  std::size_t summaries_per_report = 1;
  std::size_t min_sentence_words = 6;
  std::size_t max_sentence_words = 12;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct GeneratedReport {
  std::string id;
  std::vector<std::vector<std::string>> sentences;  // lowercase words
  /// summaries[j][t]: words of sentence t of summary j.
  std::vector<std::vector<std::vector<std::string>>> summaries;
  oracle::OracleAlignment truth;
};

struct GeneratedCorpus {
  std::vector<GeneratedReport> training;
  std::vector<GeneratedReport> validation;
  std::vector<GeneratedReport> testing;
  std::size_t rerolls = 0;
};

GeneratedCorpus generate(const SynthSpec& spec);

/// Sentence text: capitalized first word, single spaces, final period.
std::string render_sentence(const std::vector<std::string>& words);

/// Writes the corpus layout under `root` plus ground_truth.jsonl (training
/// split) and synth_spec.json.
void write_corpus(const GeneratedCorpus& corpus, const SynthSpec& spec,
                  const std::filesystem::path& root);

}  // namespace narrsum::synthgen
