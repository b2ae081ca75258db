#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "narrsum/corpus.hpp"

namespace narrsum::oracle {

/// One summary sentence t aligned to report sentence `report_index`.
struct AlignmentRow {
  std::size_t summary_index = 0;
  std::size_t report_index = 0;
  double recall = 0.0;

  bool operator==(const AlignmentRow&) const = default;
};

struct OracleAlignment {
  std::string report_id;
  std::size_t chosen_summary = 0;
  std::vector<AlignmentRow> pairs;
  /// Report sentence indices of `pairs`, first occurrences only.
  std::vector<std::size_t> targets;

  bool operator==(const OracleAlignment&) const = default;
};

/// For each summary sentence, the report sentence with the highest ROUGE-L
/// recall against it (lowest index on ties).
std::vector<AlignmentRow> align_summary(const Document& report,
                                        std::span<const Sentence> summary);

std::vector<std::size_t> dedup_targets(std::span<const AlignmentRow> rows);

/// Picks the summary whose aligned extract has the highest summary-level
/// ROUGE-L recall (lowest index on ties). `recall_out` receives that value.
OracleAlignment select_reference(const Document& report, const SummarySet& summaries,
                                 double* recall_out = nullptr);

/// One alignment per report that has at least one summary, in split order.
std::vector<OracleAlignment> build_oracle(const Split& split,
                                          std::vector<std::string>* warnings = nullptr);

std::string to_json_line(const OracleAlignment& alignment);
OracleAlignment from_json_line(const std::string& line);

void write_alignments(const std::filesystem::path& path,
                      std::span<const OracleAlignment> alignments);
std::vector<OracleAlignment> read_alignments(const std::filesystem::path& path);

/// Abstractor training pairs (report sentence -> summary sentence), one per
/// alignment row, duplicates included.
struct SentencePair {
  TokenList source;
  TokenList target;
};

std::vector<SentencePair> abstractor_pairs(const Example& example,
                                           const OracleAlignment& alignment);

}  // namespace narrsum::oracle
