#include "narrsum/oracle.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "narrsum/rouge.hpp"

namespace narrsum::oracle {

std::vector<AlignmentRow> align_summary(const Document& report,
                                        std::span<const Sentence> summary) {
  if (report.sentences.empty()) throw std::invalid_argument("align_summary: empty report");
  std::vector<AlignmentRow> rows;
  rows.reserve(summary.size());
  for (std::size_t t = 0; t < summary.size(); ++t) {
    AlignmentRow row{t, 0, -1.0};
    for (std::size_t i = 0; i < report.sentences.size(); ++i) {
      const double recall =
          rouge::rouge_l_sentence(report.sentences[i].tokens, summary[t].tokens).recall;
      if (recall > row.recall) {
        row.report_index = i;
        row.recall = recall;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::size_t> dedup_targets(std::span<const AlignmentRow> rows) {
  std::vector<std::size_t> targets;
  std::unordered_set<std::size_t> seen;
  for (const auto& row : rows) {
    if (seen.insert(row.report_index).second) targets.push_back(row.report_index);
  }
  return targets;
}

OracleAlignment select_reference(const Document& report, const SummarySet& summaries,
                                 double* recall_out) {
  if (summaries.summaries.empty()) {
    throw std::invalid_argument("select_reference: report has no summaries");
  }
  OracleAlignment best;
  double best_recall = -1.0;
  for (std::size_t j = 0; j < summaries.summaries.size(); ++j) {
    const auto& summary = summaries.summaries[j];
    auto rows = align_summary(report, summary.sentences);
    auto targets = dedup_targets(rows);
    std::vector<TokenList> extracted;
    extracted.reserve(targets.size());
    for (std::size_t i : targets) extracted.push_back(report.sentences[i].tokens);
    const double recall =
        rouge::rouge_l_summary(extracted, sentence_tokens(summary.sentences)).recall;
    if (recall > best_recall) {
      best_recall = recall;
      best.report_id = report.id;
      best.chosen_summary = j;
      best.pairs = std::move(rows);
      best.targets = std::move(targets);
    }
  }
  if (recall_out) *recall_out = best_recall;
  return best;
}

std::vector<OracleAlignment> build_oracle(const Split& split,
                                          std::vector<std::string>* warnings) {
  std::vector<OracleAlignment> out;
  out.reserve(split.examples.size());
  for (const auto& example : split.examples) {
    if (example.summaries.summaries.empty()) {
      if (warnings) warnings->push_back("report " + example.document.id + " has no summaries; skipped");
      continue;
    }
    if (example.document.sentences.empty()) {
      if (warnings) warnings->push_back("report " + example.document.id + " is empty; skipped");
      continue;
    }
    out.push_back(select_reference(example.document, example.summaries));
  }
  return out;
}

std::string to_json_line(const OracleAlignment& alignment) {
  nlohmann::ordered_json j;
  j["report_id"] = alignment.report_id;
  j["chosen_summary"] = alignment.chosen_summary;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& row : alignment.pairs) {
    pairs.push_back({row.summary_index, row.report_index, row.recall});
  }
  j["pairs"] = std::move(pairs);
  j["targets"] = alignment.targets;
  return j.dump();
}

OracleAlignment from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  OracleAlignment a;
  a.report_id = j.at("report_id").get<std::string>();
  a.chosen_summary = j.at("chosen_summary").get<std::size_t>();
  for (const auto& p : j.at("pairs")) {
    a.pairs.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(),
                       p.at(2).get<double>()});
  }
  a.targets = j.at("targets").get<std::vector<std::size_t>>();
  return a;
}

void write_alignments(const std::filesystem::path& path,
                      std::span<const OracleAlignment> alignments) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& a : alignments) out << to_json_line(a) << '\n';
}

std::vector<OracleAlignment> read_alignments(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read alignment file " + path.string());
  std::vector<OracleAlignment> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(from_json_line(line));
  }
  return out;
}

std::vector<SentencePair> abstractor_pairs(const Example& example,
                                           const OracleAlignment& alignment) {
  std::vector<SentencePair> pairs;
  const auto& summary = example.summaries.summaries.at(alignment.chosen_summary);
  for (const auto& row : alignment.pairs) {
    pairs.push_back({example.document.sentences.at(row.report_index).tokens,
                     summary.sentences.at(row.summary_index).tokens});
  }
  return pairs;
}

}  // namespace narrsum::oracle
