#include "curator/corpus.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "curator/text.hpp"

namespace curator {

IngestResult ingest(const std::string& path,
                    const std::map<std::string, std::string>& schema_overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open input file: " + path);

  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      for (const auto& [from, to] : schema_overrides) {
        if (j.contains(from)) {
          j[to] = j[from];
          j.erase(from);
        }
      }
      result.examples.push_back(example_from_json(j));
    } catch (const std::exception& e) {
      result.rejects.push_back({line_no, e.what(), line});
    }
  }
  return result;
}

void write_reject_log(const std::vector<RejectRecord>& rejects, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open reject log: " + path);
  for (const auto& r : rejects) {
    nlohmann::json j{{"line_no", r.line_no}, {"reason", r.reason}, {"raw", r.raw}};
    out << j.dump() << "\n";
  }
}

void LabelRegistry::register_space(const LabelSpace& space) {
  auto& set = spaces_[space.dataset_id];
  for (const auto& label : space.labels) {
    set.insert(normalize_text(label));
    if (union_seen_.insert(normalize_text(label)).second) {
      union_labels_.push_back(label);
    }
  }
}

void LabelRegistry::add_mapping(const std::string& dataset_id, const std::string& abbreviation,
                                const std::string& phrase) {
  mappings_[dataset_id][abbreviation] = phrase;
}

void LabelRegistry::load_mapping_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label mapping file: " + path);
  nlohmann::json rows = nlohmann::json::parse(in);
  for (const auto& row : rows) {
    add_mapping(row.at("dataset_id").get<std::string>(),
                row.at("abbreviation").get<std::string>(),
                row.at("phrase").get<std::string>());
  }
}

std::optional<std::string> LabelRegistry::resolve(const std::string& dataset_id,
                                                  const std::string& raw_label) const {
  std::string phrase = raw_label;
  if (auto mit = mappings_.find(dataset_id); mit != mappings_.end()) {
    if (auto it = mit->second.find(raw_label); it != mit->second.end()) phrase = it->second;
  }
  auto sit = spaces_.find(dataset_id);
  if (sit == spaces_.end()) return std::nullopt;
  if (!sit->second.count(normalize_text(phrase))) return std::nullopt;
  return phrase;
}

ConversionResult convert_classification(
    const std::vector<std::pair<std::string, std::string>>& sentences,
    const std::string& dataset_id, const LabelRegistry& registry,
    std::size_t num_label_negatives, std::uint64_t seed, TaskType task_type) {
  ConversionResult result;
  const auto& pool = registry.union_labels();

  std::size_t row = 0;
  for (const auto& [sentence, raw_label] : sentences) {
    ++row;
    auto phrase = registry.resolve(dataset_id, raw_label);
    if (!phrase) {
      result.rejects.push_back({row, "label not mappable: " + raw_label, sentence});
      continue;
    }

    TrainingExample ex;
    ex.id = dataset_id + "/" + std::to_string(row);
    ex.dataset_id = dataset_id;
    ex.task_type = task_type;
    ex.category = Category::s2s;
    ex.symmetry = Symmetry::asymmetric;
    ex.query = sentence;
    ex.positives = {*phrase};

    // Candidates: union labels other than the true one.
    const std::string true_key = normalize_text(*phrase);
    std::vector<std::size_t> candidates;
    candidates.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (normalize_text(pool[i]) != true_key) candidates.push_back(i);
    }
    std::size_t want = std::min(num_label_negatives, candidates.size());
    Rng rng = keyed_rng(seed, ex.id);
    for (std::size_t idx : rng.sample_without_replacement(candidates.size(), want)) {
      ex.hard_negatives.push_back(pool[candidates[idx]]);
    }
    result.examples.push_back(std::move(ex));
  }
  return result;
}

void ContaminationSet::add_text(const std::string& text) {
  keys_.insert(text_fingerprint(text));
}

void ContaminationSet::load_texts_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open contamination file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '{') {
      try {
        nlohmann::json j = nlohmann::json::parse(line);
        add_text(j.at("text").get<std::string>());
        continue;
      } catch (const std::exception&) {
        // fall through, treat as raw text
      }
    }
    add_text(line);
  }
}

bool ContaminationSet::contains(const std::string& text) const {
  return keys_.count(text_fingerprint(text)) > 0;
}

FilterResult filter_contamination(const std::vector<TrainingExample>& examples,
                                  const ContaminationSet& contamination) {
  FilterResult result;
  for (const auto& ex : examples) {
    bool hit = contamination.contains(ex.query);
    for (const auto& p : ex.positives) {
      if (hit) break;
      hit = contamination.contains(p);
    }
    if (hit) {
      ++result.removed_per_dataset[ex.dataset_id];
      ++result.removed_total;
    } else {
      result.kept.push_back(ex);
    }
  }
  return result;
}

FilterResult filter_short(const std::vector<TrainingExample>& examples, std::size_t min_chars) {
  FilterResult result;
  for (const auto& ex : examples) {
    bool all_short = true;
    for (const auto& p : ex.positives) {
      if (utf8_length(p) >= min_chars) {
        all_short = false;
        break;
      }
    }
    if (all_short && min_chars > 0) {
      ++result.removed_per_dataset[ex.dataset_id];
      ++result.removed_total;
    } else {
      result.kept.push_back(ex);
    }
  }
  return result;
}

FilterResult filter_predicate(const std::vector<TrainingExample>& examples,
                              const std::function<bool(const TrainingExample&)>& keep) {
  FilterResult result;
  for (const auto& ex : examples) {
    if (keep(ex)) {
      result.kept.push_back(ex);
    } else {
      ++result.removed_per_dataset[ex.dataset_id];
      ++result.removed_total;
    }
  }
  return result;
}

InstructionTable::InstructionTable() {
  table_ = {
      {"imdb",
       "Classifying the sentiment expressed in the given movie review text from the IMDB "
       "dataset"},
      {"banking77", "Given a online banking query, find the corresponding intents"},
      {"emotion",
       "Classifying the emotion expressed in the given Twitter message into one of the six "
       "emotions: anger, fear, joy, love, sadness, and surprise"},
      {"amazon_polarity", "Classifying Amazon reviews into positive or negative sentiment"},
      {"tnews", "Categorizing the given news title"},
      {"massive_intent", "Given a user utterance as query, find the user intents"},
      {"toxic_conversations", "Classifying the given comments as either toxic or not toxic"},
  };
}

void InstructionTable::set(const std::string& dataset_id, const std::string& instruction) {
  table_[dataset_id] = instruction;
}

std::optional<std::string> InstructionTable::get(const std::string& dataset_id) const {
  auto it = table_.find(dataset_id);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

std::string format_instruction(const TrainingExample& ex, const InstructionTable& table) {
  if (ex.symmetry == Symmetry::symmetric) return ex.query;

  std::string instruction;
  if (ex.instruction) {
    instruction = *ex.instruction;
  } else if (ex.task_type == TaskType::retrieval || ex.task_type == TaskType::reranking) {
    instruction = kGeneralRetrievalInstruction;
  } else if (auto task_default = table.get(ex.dataset_id)) {
    instruction = *task_default;
  } else {
    throw std::runtime_error("missing instruction");
  }
  return "Instruct: " + instruction + " \n Query: " + ex.query;
}

}  // namespace curator
