#include "narrsum/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace narrsum::pipeline {

TokenList truncate_to_word_limit(std::span<const std::string> tokens, std::size_t limit) {
  if (limit == 0) throw std::invalid_argument("word limit must be >= 1");
  const std::size_t n = std::min(tokens.size(), limit);
  return TokenList(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n));
}

std::vector<TokenList> truncate_sentences(std::span<const TokenList> sentences, std::size_t limit) {
  if (limit == 0) throw std::invalid_argument("word limit must be >= 1");
  std::vector<TokenList> out;
  std::size_t remaining = limit;
  for (const TokenList& s : sentences) {
    if (remaining == 0) break;
    TokenList cut = truncate_to_word_limit(s, remaining);
    remaining -= cut.size();
    if (!cut.empty()) out.push_back(std::move(cut));
  }
  return out;
}

std::string detokenize(std::span<const TokenList> sentences) {
  std::string out;
  for (const TokenList& s : sentences) {
    if (s.empty()) continue;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out.push_back(' ');
      out += s[i];
    }
    if (out.back() != '.') out.push_back('.');
    out.push_back('\n');
  }
  return out;
}

std::vector<TokenList> parse_prediction(std::string_view text) {
  std::vector<TokenList> out;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    for (auto& sentence : parse_text(text.substr(begin, end - begin))) {
      out.push_back(std::move(sentence.tokens));
    }
    begin = end + 1;
  }
  return out;
}

std::vector<TokenList> read_prediction(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read prediction " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_prediction(buffer.str());
}

std::size_t word_count(std::span<const TokenList> sentences) {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

Vocab training_vocab(const Split& training, std::size_t max_size) {
  std::vector<Document> docs;
  for (const Example& ex : training.examples) {
    docs.push_back(ex.document);
    for (const Summary& s : ex.summaries.summaries) {
      Document d;
      d.id = s.id;
      d.sentences = s.sentences;
      docs.push_back(std::move(d));
    }
  }
  if (docs.empty()) throw DataError("training split is empty; cannot build vocabulary");
  return build_vocab(docs, max_size);
}

extractor::IdDocument encode_document(const Vocab& vocab, const Document& doc) {
  return encode_sentences(vocab, doc.sentences);
}

std::vector<TokenList> emit_extraction(const Document& doc, std::span<const std::size_t> indices,
                                       std::size_t word_limit) {
  std::vector<TokenList> sentences;
  for (std::size_t i : indices) sentences.push_back(doc.sentences.at(i).tokens);
  return truncate_sentences(sentences, word_limit);
}

std::vector<TokenList> summarize(const Document& doc, const Vocab& vocab,
                                 const extractor::Extractor& extractor, rl::Rewriter& rewriter,
                                 std::size_t word_limit) {
  if (doc.sentences.empty()) return {};
  const extractor::IdDocument ids = encode_document(vocab, doc);
  const extractor::Extraction extraction = extractor.extract(ids, doc.id);
  std::vector<std::size_t> indices = extraction.indices;
  if (indices.empty()) indices.push_back(extraction.first_step_best);
  std::vector<TokenList> sentences;
  std::size_t words = 0;
  for (std::size_t i : indices) {
    if (words >= word_limit) break;
    TokenList s = rewriter.rewrite(ids[i]);
    words += s.size();
    sentences.push_back(std::move(s));
  }
  return truncate_sentences(sentences, word_limit);
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "max") return Aggregation::kMax;
  if (name == "mean") return Aggregation::kMean;
  throw std::invalid_argument("unknown aggregation '" + std::string(name) + "'");
}

SystemReport evaluate_system(const std::string& system,
                             const std::map<std::string, std::vector<TokenList>>& predictions,
                             const Split& references, Aggregation aggregation) {
  std::map<std::string, const SummarySet*> by_id;
  for (const Example& ex : references.examples) by_id[ex.document.id] = &ex.summaries;

  SystemReport report;
  report.system = system;
  for (const auto& [id, prediction] : predictions) {
    auto it = by_id.find(id);
    if (it == by_id.end() || it->second->summaries.empty()) {
      report.excluded.push_back(id);
      continue;
    }
    std::vector<rouge::SentenceList> refs;
    for (const Summary& s : it->second->summaries) refs.push_back(sentence_tokens(s.sentences));

    DocumentScore doc;
    doc.report_id = id;
    for (std::size_t v = 0; v < kReportVariants.size(); ++v) {
      if (aggregation == Aggregation::kMax) {
        doc.cells[v] = rouge::best_against_references(prediction, refs, kReportVariants[v]);
      } else {
        double p = 0.0, r = 0.0, f = 0.0;
        for (const auto& ref : refs) {
          const auto s = rouge::score(prediction, ref, kReportVariants[v]);
          p += s.precision;
          r += s.recall;
          f += s.f1;
        }
        const double n = static_cast<double>(refs.size());
        doc.cells[v] = {p / n, r / n, f / n};
      }
    }
    report.documents.push_back(std::move(doc));
  }
  if (!report.documents.empty()) {
    const double n = static_cast<double>(report.documents.size());
    for (std::size_t v = 0; v < kReportVariants.size(); ++v) {
      double p = 0.0, r = 0.0, f = 0.0;
      for (const auto& d : report.documents) {
        p += d.cells[v].precision;
        r += d.cells[v].recall;
        f += d.cells[v].f1;
      }
      report.cells[v] = {p / n, r / n, f / n};
    }
  }
  return report;
}

namespace {

constexpr std::array<std::string_view, 3> kComponents = {"Precision", "Recall", "F-1"};

double component(const rouge::RougeScore& s, std::size_t c) {
  return c == 0 ? s.precision : c == 1 ? s.recall : s.f1;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string report_csv(std::span<const SystemReport> reports) {
  std::string out = "metric";
  for (const auto& r : reports) out += "," + r.system;
  out += "\n";
  for (std::size_t v = 0; v < kReportVariants.size(); ++v) {
    for (std::size_t c = 0; c < kComponents.size(); ++c) {
      out += std::string(kComponents[c]) + "(" + std::string(kReportVariantLabels[v]) + ")";
      for (const auto& r : reports) out += "," + fixed(component(r.cells[v], c), 6);
      out += "\n";
    }
  }
  return out;
}

std::string report_text(std::span<const SystemReport> reports) {
  std::size_t label_width = std::string_view("Precision(R-SU4)").size();
  std::vector<std::size_t> widths;
  for (const auto& r : reports) widths.push_back(std::max<std::size_t>(r.system.size(), 5));
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  std::string out = pad("Metric", label_width);
  for (std::size_t i = 0; i < reports.size(); ++i) out += "  " + pad(reports[i].system, widths[i]);
  out += "\n";
  for (std::size_t v = 0; v < kReportVariants.size(); ++v) {
    for (std::size_t c = 0; c < kComponents.size(); ++c) {
      out += pad(std::string(kComponents[c]) + "(" + std::string(kReportVariantLabels[v]) + ")",
                 label_width);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        out += "  " + pad(fixed(component(reports[i].cells[v], c), 3), widths[i]);
      }
      out += "\n";
    }
  }
  for (const auto& r : reports) {
    out += r.system + ": " + std::to_string(r.documents.size()) + " documents scored, " +
           std::to_string(r.excluded.size()) + " predictions without references excluded\n";
  }
  return out;
}

std::string documents_csv(std::span<const SystemReport> reports) {
  std::string out = "system,report_id,variant,precision,recall,f1\n";
  for (const auto& r : reports) {
    for (const auto& d : r.documents) {
      for (std::size_t v = 0; v < kReportVariants.size(); ++v) {
        out += r.system + "," + d.report_id + "," + std::string(kReportVariantLabels[v]) + "," +
               fixed(d.cells[v].precision, 6) + "," + fixed(d.cells[v].recall, 6) + "," +
               fixed(d.cells[v].f1, 6) + "\n";
      }
    }
  }
  return out;
}

}  // namespace narrsum::pipeline
