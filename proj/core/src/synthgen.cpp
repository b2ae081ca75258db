#include "narrsum/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "narrsum/corpus.hpp"

namespace narrsum::synthgen {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (n_reports == 0) throw std::invalid_argument("synthgen: n_reports must be positive");
  if (sentences_per_report == 0) throw std::invalid_argument("synthgen: empty reports");
  if (summary_sentences == 0 || summary_sentences > sentences_per_report) {
    throw std::invalid_argument("synthgen: need 1 <= summary_sentences <= sentences_per_report");
  }
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw std::invalid_argument("synthgen: noise_rate must be in [0, 1)");
  }
  if (vocabulary_size < 8) throw std::invalid_argument("synthgen: vocabulary_size must be >= 8");
  if (summaries_per_report == 0) throw std::invalid_argument("synthgen: summaries_per_report >= 1");
  if (min_sentence_words == 0 || min_sentence_words > max_sentence_words ||
      max_sentence_words > kMaxSentenceTokens) {
    throw std::invalid_argument("synthgen: invalid sentence length range");
  }
}

nlohmann::ordered_json SynthSpec::to_json() const {
  return {{"seed", seed},
          {"n_reports", n_reports},
          {"sentences_per_report", sentences_per_report},
          {"summary_sentences", summary_sentences},
          {"vocabulary_size", vocabulary_size},
          {"noise_rate", noise_rate},
          {"validation_reports", validation_reports},
          {"testing_reports", testing_reports},
          {"summaries_per_report", summaries_per_report},
          {"min_sentence_words", min_sentence_words},
          {"max_sentence_words", max_sentence_words}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  const auto known = s.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw DataError("unknown synthgen key '" + key + "'");
  }
  try {
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("n_reports")) s.n_reports = j["n_reports"].get<std::size_t>();
    if (j.contains("sentences_per_report")) s.sentences_per_report = j["sentences_per_report"];
    if (j.contains("summary_sentences")) s.summary_sentences = j["summary_sentences"];
    if (j.contains("vocabulary_size")) s.vocabulary_size = j["vocabulary_size"];
    if (j.contains("noise_rate")) s.noise_rate = j["noise_rate"];
    if (j.contains("validation_reports")) s.validation_reports = j["validation_reports"];
    if (j.contains("testing_reports")) s.testing_reports = j["testing_reports"];
    if (j.contains("summaries_per_report")) s.summaries_per_report = j["summaries_per_report"];
    if (j.contains("min_sentence_words")) s.min_sentence_words = j["min_sentence_words"];
    if (j.contains("max_sentence_words")) s.max_sentence_words = j["max_sentence_words"];
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synthgen spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string render_sentence(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  out.push_back('.');
  return out;
}

namespace {

using Words = std::vector<std::string>;
constexpr std::size_t kMaxRerolls = 1000;

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Pronounceable lowercase words of 4 to 8 letters; every word is unique.
Words make_lexicon(std::size_t n, std::mt19937_64& rng) {
  static constexpr char kConsonants[] = "bcdfghjklmnprstvz";
  static constexpr char kVowels[] = "aeiou";
  std::set<std::string> seen;
  Words out;
  while (out.size() < n) {
    const std::size_t length = 4 + uniform_index(rng, 5);
    std::string w;
    for (std::size_t i = 0; i < length; ++i) {
      w.push_back(i % 2 == 0 ? kConsonants[uniform_index(rng, sizeof kConsonants - 1)]
                             : kVowels[uniform_index(rng, sizeof kVowels - 1)]);
    }
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

Words random_sentence(const SynthSpec& spec, const Words& pool, std::mt19937_64& rng) {
  const std::size_t length =
      spec.min_sentence_words + uniform_index(rng, spec.max_sentence_words - spec.min_sentence_words + 1);
  Words s;
  for (std::size_t i = 0; i < length; ++i) s.push_back(pool[uniform_index(rng, pool.size())]);
  return s;
}

Words perturb(const Words& source, double rate, const Words& pool, std::mt19937_64& rng) {
  Words out = source;
  std::bernoulli_distribution flip(rate);
  for (auto& w : out) {
    if (rate > 0.0 && flip(rng)) w = pool[uniform_index(rng, pool.size())];
  }
  return out;
}

Document as_document(const std::string& id, const std::vector<Words>& sentences) {
  Document d;
  d.id = id;
  for (const auto& s : sentences) d.sentences.push_back({s, {}});
  return d;
}

std::vector<Sentence> as_sentences(const std::vector<Words>& sentences) {
  std::vector<Sentence> out;
  for (const auto& s : sentences) out.push_back({s, {}});
  return out;
}

struct Pools {
  Words narrative;
  Words boilerplate;
};

GeneratedReport make_report(const SynthSpec& spec, const std::string& id, const Pools& pools,
                            std::mt19937_64& rng, std::size_t& rerolls) {
  GeneratedReport r;
  r.id = id;

  std::vector<std::size_t> positions(spec.sentences_per_report);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  std::shuffle(positions.begin(), positions.end(), rng);
  positions.resize(spec.summary_sentences);
  std::sort(positions.begin(), positions.end());

  std::set<Words> distinct;
  for (std::size_t i = 0; i < spec.sentences_per_report; ++i) {
    const bool salient = std::binary_search(positions.begin(), positions.end(), i);
    Words s;
    do {
      s = random_sentence(spec, salient ? pools.narrative : pools.boilerplate, rng);
    } while (!distinct.insert(s).second);
    r.sentences.push_back(std::move(s));
  }
  const Document doc = as_document(id, r.sentences);

  // Summary 0: each salient sentence, perturbed until its source is still the
  // unique recall argmax.
  std::vector<Words> reference;
  for (std::size_t t = 0; t < positions.size(); ++t) {
    const Words& source = r.sentences[positions[t]];
    Words copy;
    for (std::size_t attempt = 0;; ++attempt) {
      copy = attempt < kMaxRerolls ? perturb(source, spec.noise_rate, pools.narrative, rng) : source;
      const std::vector<Sentence> one = {Sentence{copy, {}}};
      if (oracle::align_summary(doc, one).front().report_index == positions[t]) break;
      ++rerolls;
    }
    reference.push_back(std::move(copy));
  }
  r.summaries.push_back(reference);

  // Further summaries: subsets of the salient sentences with heavier noise.
  for (std::size_t j = 1; j < spec.summaries_per_report; ++j) {
    for (std::size_t attempt = 0;; ++attempt) {
      std::vector<Words> extra;
      if (attempt < kMaxRerolls) {
        const double rate = std::min(0.9, 2.0 * spec.noise_rate + 0.2);
        for (std::size_t t = 0; t < positions.size(); ++t) {
          if (positions.size() > 1 && uniform_index(rng, 3) == 0) continue;
          extra.push_back(perturb(r.sentences[positions[t]], rate, pools.narrative, rng));
        }
      } else {
        extra = reference;  // ties resolve to summary 0
      }
      SummarySet set;
      set.report_id = id;
      for (std::size_t k = 0; k < r.summaries.size(); ++k) {
        set.summaries.push_back({id + "_" + std::to_string(k), as_sentences(r.summaries[k])});
      }
      set.summaries.push_back({id + "_" + std::to_string(j), as_sentences(extra)});
      if (oracle::select_reference(doc, set).chosen_summary == 0) {
        r.summaries.push_back(std::move(extra));
        break;
      }
      ++rerolls;
    }
  }

  r.truth.report_id = id;
  r.truth.chosen_summary = 0;
  r.truth.pairs = oracle::align_summary(doc, as_sentences(reference));
  r.truth.targets = positions;
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string render_text(const std::vector<Words>& sentences) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out.push_back(' ');
    out += render_sentence(sentences[i]);
  }
  out.push_back('\n');
  return out;
}

void write_split(const fs::path& root, const std::string& name,
                 const std::vector<GeneratedReport>& reports) {
  const fs::path reports_dir = root / name / "annual_reports";
  const fs::path summaries_dir = root / name / "gold_summaries";
  fs::create_directories(reports_dir);
  fs::create_directories(summaries_dir);
  for (const auto& r : reports) {
    write_text(reports_dir / (r.id + ".txt"), render_text(r.sentences));
    for (std::size_t j = 0; j < r.summaries.size(); ++j) {
      write_text(summaries_dir / (r.id + "_" + std::to_string(j) + ".txt"),
                 render_text(r.summaries[j]));
    }
  }
}

std::string report_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

}  // namespace

GeneratedCorpus generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Pools pools;
  Words lexicon = make_lexicon(spec.vocabulary_size, rng);
  const std::size_t half = lexicon.size() / 2;
  pools.narrative.assign(lexicon.begin(), lexicon.begin() + static_cast<std::ptrdiff_t>(half));
  pools.boilerplate.assign(lexicon.begin() + static_cast<std::ptrdiff_t>(half), lexicon.end());

  GeneratedCorpus corpus;
  for (std::size_t i = 0; i < spec.n_reports; ++i) {
    corpus.training.push_back(make_report(spec, report_id("tr", i), pools, rng, corpus.rerolls));
  }
  for (std::size_t i = 0; i < spec.validation_reports; ++i) {
    corpus.validation.push_back(make_report(spec, report_id("va", i), pools, rng, corpus.rerolls));
  }
  for (std::size_t i = 0; i < spec.testing_reports; ++i) {
    corpus.testing.push_back(make_report(spec, report_id("te", i), pools, rng, corpus.rerolls));
  }
  return corpus;
}

void write_corpus(const GeneratedCorpus& corpus, const SynthSpec& spec, const fs::path& root) {
  write_split(root, "training", corpus.training);
  write_split(root, "validation", corpus.validation);
  write_split(root, "testing", corpus.testing);
  std::vector<oracle::OracleAlignment> truth;
  for (const auto& r : corpus.training) truth.push_back(r.truth);
  oracle::write_alignments(root / "ground_truth.jsonl", truth);
  write_text(root / "synth_spec.json", spec.to_json().dump(2) + "\n");
}

}  // namespace narrsum::synthgen
