#include "curator/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "curator/batching.hpp"
#include "curator/corpus.hpp"
#include "curator/curation.hpp"
#include "curator/encoder.hpp"
#include "curator/rng.hpp"

namespace curator {

nlohmann::json RunManifest::to_json() const {
  nlohmann::json stage_list = nlohmann::json::array();
  for (const auto& s : stages) {
    stage_list.push_back({{"name", s.name}, {"counts", s.counts}, {"wall_seconds", s.wall_seconds}});
  }
  return {{"version", version}, {"config", config}, {"digests", digests},
          {"seed", seed},       {"stages", stage_list}};
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  Hash128 h = fingerprint128(bytes);
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(h.hi),
                static_cast<unsigned long long>(h.lo));
  return buf;
}

nlohmann::json curation_report_to_json(const CurationReport& report) {
  nlohmann::json per_dataset = nlohmann::json::object();
  for (const auto& [ds, s] : report.per_dataset) {
    per_dataset[ds] = {{"pairs_in", s.pairs_in},
                       {"pairs_kept", s.pairs_kept},
                       {"pairs_filtered", s.pairs_filtered},
                       {"negatives_attached", s.negatives_attached},
                       {"fallback_count", s.fallback_count}};
  }
  return {{"per_dataset", per_dataset}};
}

namespace {

EncoderSpec encoder_from_config(const nlohmann::json& cfg) {
  EncoderSpec spec;
  if (cfg.contains("endpoint")) spec.endpoint = cfg.at("endpoint").get<std::string>();
  if (cfg.contains("dim")) spec.dim = cfg.at("dim").get<std::uint32_t>();
  if (cfg.contains("max_chars")) spec.max_chars = cfg.at("max_chars").get<std::size_t>();
  if (cfg.contains("batch_size")) spec.batch_size = cfg.at("batch_size").get<std::size_t>();
  if (cfg.contains("normalize")) spec.normalize = cfg.at("normalize").get<bool>();
  return spec;
}

std::vector<std::string> load_extra_corpus(const std::string& path) {
  std::vector<std::string> docs;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open extra corpus: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    docs.push_back(j.contains("text") ? j.at("text").get<std::string>()
                                      : j.get<std::string>());
  }
  return docs;
}

}  // namespace

RunManifest run_pipeline(const std::string& config_path) {
  std::ifstream cfg_in(config_path);
  if (!cfg_in) throw ConfigError("cannot open config: " + config_path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(cfg_in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  if (!cfg.contains("seed")) throw ConfigError("config must set an explicit seed");
  if (!cfg.contains("stages") || !cfg.at("stages").is_array()) {
    throw ConfigError("config must declare a stages array");
  }
  const std::string out_dir = cfg.value("out_dir", ".");
  std::filesystem::create_directories(out_dir);

  RunManifest manifest;
  manifest.config = cfg;
  manifest.seed = cfg.at("seed").get<std::uint64_t>();

  // Referenced inputs must exist before any work starts.
  std::vector<std::string> inputs;
  if (cfg.contains("ingest")) inputs.push_back(cfg.at("ingest").at("input").get<std::string>());
  if (cfg.contains("filters") && cfg.at("filters").contains("contamination_file")) {
    inputs.push_back(cfg.at("filters").at("contamination_file").get<std::string>());
  }
  for (const auto& path : inputs) {
    if (!std::filesystem::exists(path)) throw DataError("missing input file: " + path);
    manifest.digests[path] = file_digest(path);
  }

  std::vector<TrainingExample> examples;
  std::vector<TrainingExample> curated;
  bool have_curated = false;

  auto timed = [&](const std::string& name, auto&& body) {
    auto start = std::chrono::steady_clock::now();
    StageRecord record;
    record.name = name;
    body(record);
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.stages.push_back(std::move(record));
  };

  for (const auto& stage_j : cfg.at("stages")) {
    const std::string stage = stage_j.get<std::string>();
    try {
      if (stage == "ingest") {
        timed(stage, [&](StageRecord& rec) {
          const auto& c = cfg.at("ingest");
          IngestResult r = ingest(c.at("input").get<std::string>());
          if (c.contains("reject_log")) {
            write_reject_log(r.rejects, c.at("reject_log").get<std::string>());
          }
          rec.counts["examples"] = r.examples.size();
          rec.counts["rejects"] = r.rejects.size();
          examples = std::move(r.examples);
        });
      } else if (stage == "filters") {
        timed(stage, [&](StageRecord& rec) {
          const nlohmann::json c = cfg.value("filters", nlohmann::json::object());
          std::size_t in_count = examples.size();
          std::size_t contaminated = 0;
          if (c.contains("contamination_file")) {
            ContaminationSet set;
            set.load_texts_file(c.at("contamination_file").get<std::string>());
            FilterResult r = filter_contamination(examples, set);
            contaminated = r.removed_total;
            examples = std::move(r.kept);
          }
          FilterResult r = filter_short(examples, c.value("min_chars", std::size_t{10}));
          rec.counts["in"] = in_count;
          rec.counts["contamination_removed"] = contaminated;
          rec.counts["short_removed"] = r.removed_total;
          rec.counts["kept"] = r.kept.size();
          examples = std::move(r.kept);
        });
      } else if (stage == "format") {
        timed(stage, [&](StageRecord& rec) {
          InstructionTable table;
          std::ofstream out(out_dir + "/formatted.jsonl");
          for (const auto& ex : examples) {
            nlohmann::json j{{"id", ex.id}, {"rendered", format_instruction(ex, table)}};
            out << j.dump() << "\n";
          }
          rec.counts["formatted"] = examples.size();
        });
      } else if (stage == "embed") {
        timed(stage, [&](StageRecord& rec) {
          EncoderSpec spec = encoder_from_config(cfg.value("encoder", nlohmann::json::object()));
          InstructionTable table;
          std::vector<std::string> texts, ids;
          for (const auto& ex : examples) {
            texts.push_back(format_instruction(ex, table));
            ids.push_back(ex.id);
          }
          EmbeddingStore store = embed_texts(texts, ids, spec);
          save_store(store, out_dir + "/queries.embs");
          rec.counts["embedded"] = store.count();
        });
      } else if (stage == "curate") {
        timed(stage, [&](StageRecord& rec) {
          const nlohmann::json c = cfg.value("curate", nlohmann::json::object());
          EncoderSpec spec = encoder_from_config(cfg.value("encoder", nlohmann::json::object()));
          CurationConfig ccfg;
          ccfg.topk_threshold = c.value("k", std::size_t{50});
          ccfg.num_negatives = c.value("m", std::size_t{7});
          ccfg.rank_lo = c.value("lo", std::size_t{50});
          ccfg.rank_hi = c.value("hi", std::size_t{100});
          ccfg.seed = manifest.seed;
          std::vector<std::string> extra;
          if (c.contains("extra_corpus")) {
            extra = load_extra_corpus(c.at("extra_corpus").get<std::string>());
          }
          CurationResult r = curate(examples, extra, spec, ccfg);
          std::ofstream out(out_dir + "/curated.jsonl");
          for (const auto& ex : r.kept) out << to_json(ex).dump() << "\n";
          std::ofstream rep(out_dir + "/report.json");
          rep << curation_report_to_json(r.report).dump(2) << "\n";
          DatasetCurationStats t = r.report.totals();
          rec.counts["pairs_in"] = t.pairs_in;
          rec.counts["pairs_kept"] = t.pairs_kept;
          rec.counts["pairs_filtered"] = t.pairs_filtered;
          rec.counts["negatives_attached"] = t.negatives_attached;
          curated = std::move(r.kept);
          have_curated = true;
        });
      } else if (stage == "batch") {
        timed(stage, [&](StageRecord& rec) {
          const nlohmann::json c = cfg.value("batch", nlohmann::json::object());
          BatchConfig bcfg;
          bcfg.batch_size = c.value("batch_size", std::size_t{48});
          bcfg.mixing_ratio = c.value("ratio", 0.0);
          bcfg.seed = manifest.seed;
          bcfg.group_key =
              c.value("group_key", std::string("dataset_id")) == "task_type"
                  ? GroupKey::task_type
                  : GroupKey::dataset_id;
          const auto& source = have_curated ? curated : examples;
          BatchPlan plan = build_semi_homogeneous(source, bcfg);
          std::ofstream out(out_dir + "/plan.json");
          out << plan_to_json(plan).dump(2) << "\n";
          rec.counts["batches"] = plan.batches.size();
          rec.counts["dropped"] = plan.dropped_ids.size();
        });
      } else {
        throw ConfigError("unknown stage: " + stage);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const ServiceError&) {
      throw;
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      if (msg.find("encoder request") != std::string::npos ||
          msg.find("gateway") != std::string::npos) {
        throw ServiceError("stage " + stage + " failed: " + msg);
      }
      throw DataError("stage " + stage + " failed: " + msg);
    }
  }

  std::ofstream mout(out_dir + "/manifest.json");
  mout << manifest.to_json().dump(2) << "\n";
  return manifest;
}

Summary summarize(const std::vector<nlohmann::json>& curation_reports) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& report : curation_reports) {
    for (const auto& [ds, s] : report.at("per_dataset").items()) {
      rows.push_back({{"dataset_id", ds},
                      {"pairs_in", s.at("pairs_in")},
                      {"pairs_kept", s.at("pairs_kept")},
                      {"pairs_filtered", s.at("pairs_filtered")},
                      {"negatives_attached", s.at("negatives_attached")}});
    }
  }

  std::ostringstream text;
  text << "dataset_id\tpairs_in\tpairs_kept\tpairs_filtered\tnegatives_attached\n";
  for (const auto& row : rows) {
    text << row.at("dataset_id").get<std::string>() << "\t" << row.at("pairs_in") << "\t"
         << row.at("pairs_kept") << "\t" << row.at("pairs_filtered") << "\t"
         << row.at("negatives_attached") << "\n";
  }
  return {text.str(), rows};
}

}  // namespace curator
