#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "curator/batching.hpp"
#include "curator/corpus.hpp"
#include "curator/curation.hpp"
#include "curator/encoder.hpp"
#include "curator/loss_core.hpp"
#include "curator/pipeline.hpp"
#include "curator/sim_engine.hpp"
#include "curator/synth.hpp"

namespace {

using namespace curator;

std::vector<TrainingExample> load_examples(const std::string& path) {
  IngestResult r = ingest(path);
  if (!r.rejects.empty()) {
    std::cerr << r.rejects.size() << " rejected line(s) in " << path << "\n";
  }
  return std::move(r.examples);
}

void write_examples(const std::vector<TrainingExample>& examples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output: " + path);
  for (const auto& ex : examples) out << to_json(ex).dump() << "\n";
}

EncoderSpec encoder_spec_from_flags(const std::string& url, std::uint32_t dim, bool normalize,
                                    std::size_t batch_size) {
  EncoderSpec spec;
  if (!url.empty()) {
    spec.endpoint = url;
  } else if (const char* env = std::getenv("CURATOR_ENCODER_URL")) {
    spec.endpoint = env;
  }
  if (const char* tok = std::getenv("CURATOR_ENCODER_TOKEN")) spec.auth_token = tok;
  spec.dim = dim;
  spec.normalize = normalize;
  spec.batch_size = batch_size;
  return spec;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"training-data curation and contrastive-batching toolkit"};
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "validate a JSONL corpus");
  std::string in_path, out_path, reject_path;
  ingest_cmd->add_option("--in", in_path)->required();
  ingest_cmd->add_option("--out", out_path)->required();
  ingest_cmd->add_option("--reject-log", reject_path);

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "embed rendered queries into a store");
  std::string encoder_url, embed_out;
  std::uint32_t dim = 64;
  bool normalize = true;
  std::size_t enc_batch = 32;
  embed_cmd->add_option("--in", in_path)->required();
  embed_cmd->add_option("--out", embed_out)->required();
  embed_cmd->add_option("--encoder-url", encoder_url);
  embed_cmd->add_option("--dim", dim);
  embed_cmd->add_flag("--normalize,!--no-normalize", normalize);
  embed_cmd->add_option("--batch-size", enc_batch);

  // topk
  auto* topk_cmd = app.add_subcommand("topk", "exact cosine top-k over a store");
  std::string queries_path, corpus_path, topk_out;
  std::size_t k = 100;
  topk_cmd->add_option("--queries", queries_path)->required();
  topk_cmd->add_option("--corpus", corpus_path)->required();
  topk_cmd->add_option("--k", k);
  topk_cmd->add_option("--out", topk_out)->required();

  // curate
  auto* curate_cmd = app.add_subcommand("curate", "ranking-consistency filter + mine negatives");
  std::string extra_corpus, report_path;
  std::size_t ck = 50, cm = 7, clo = 50, chi = 100;
  std::uint64_t seed = 0;
  bool seed_set = false;
  curate_cmd->add_option("--in", in_path)->required();
  curate_cmd->add_option("--extra-corpus", extra_corpus);
  curate_cmd->add_option("--k", ck);
  curate_cmd->add_option("--m", cm);
  curate_cmd->add_option("--lo", clo);
  curate_cmd->add_option("--hi", chi);
  curate_cmd->add_option("--seed", seed)->required()->each([&](const std::string&) { seed_set = true; });
  curate_cmd->add_option("--out", out_path)->required();
  curate_cmd->add_option("--report", report_path);
  curate_cmd->add_option("--encoder-url", encoder_url);
  curate_cmd->add_option("--dim", dim);

  // batch
  auto* batch_cmd = app.add_subcommand("batch", "build (semi-)homogeneous batches");
  std::size_t batch_size = 48;
  double ratio = 0.0;
  std::string group_key = "dataset_id";
  batch_cmd->add_option("--in", in_path)->required();
  batch_cmd->add_option("--batch-size", batch_size);
  batch_cmd->add_option("--ratio", ratio);
  batch_cmd->add_option("--group-key", group_key)->check(CLI::IsMember({"dataset_id", "task_type"}));
  batch_cmd->add_option("--seed", seed)->required();
  batch_cmd->add_option("--out", out_path)->required();

  // format
  auto* format_cmd = app.add_subcommand("format", "render instruction-prefixed queries");
  format_cmd->add_option("--in", in_path)->required();
  format_cmd->add_option("--out", out_path)->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "persona-based synthetic data campaign");
  std::string spec_path, synth_report;
  bool resume = false;
  synth_cmd->add_option("--spec", spec_path)->required();
  synth_cmd->add_option("--out", out_path)->required();
  synth_cmd->add_option("--report", synth_report);
  synth_cmd->add_flag("--resume", resume);

  // train-toy
  auto* train_cmd = app.add_subcommand("train-toy", "toy gradient-descent trainer");
  std::string plan_path, trace_path;
  double lr = 1e-4;
  std::size_t epochs = 1;
  train_cmd->add_option("--plan", plan_path)->required();
  train_cmd->add_option("--corpus", in_path)->required();
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--seed", seed)->required();
  train_cmd->add_option("--trace", trace_path)->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "grid of toy training runs");
  std::string grid_path, sweep_out;
  sweep_cmd->add_option("--grid", grid_path)->required();
  sweep_cmd->add_option("--out", sweep_out)->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "summarize curation reports");
  std::vector<std::string> report_inputs;
  std::string report_json_out;
  report_cmd->add_option("--in", report_inputs)->required();
  report_cmd->add_option("--json-out", report_json_out);

  // pipeline
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run configured stages in order");
  std::string config_path;
  pipeline_cmd->add_option("--config", config_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
  }

  if (*ingest_cmd) {
    IngestResult r = ingest(in_path);
    write_examples(r.examples, out_path);
    if (!reject_path.empty()) write_reject_log(r.rejects, reject_path);
    std::cout << r.examples.size() << " examples, " << r.rejects.size() << " rejects\n";
    return kExitOk;
  }

  if (*embed_cmd) {
    auto examples = load_examples(in_path);
    InstructionTable table;
    std::vector<std::string> texts, ids;
    for (const auto& ex : examples) {
      texts.push_back(format_instruction(ex, table));
      ids.push_back(ex.id);
    }
    EncoderSpec spec = encoder_spec_from_flags(encoder_url, dim, normalize, enc_batch);
    save_store(embed_texts(texts, ids, spec), embed_out);
    return kExitOk;
  }

  if (*topk_cmd) {
    EmbeddingStore queries = load_store(queries_path);
    EmbeddingStore corpus = load_store(corpus_path);
    std::ofstream out(topk_out);
    if (!out) throw DataError("cannot open output: " + topk_out);
    for (const auto& list : topk(queries, corpus, k)) {
      nlohmann::json entries = nlohmann::json::array();
      for (const auto& e : list.entries) entries.push_back({e.doc_id, e.score});
      out << nlohmann::json{{"query_id", list.query_id}, {"k", list.k}, {"entries", entries}}.dump()
          << "\n";
    }
    return kExitOk;
  }

  if (*curate_cmd) {
    (void)seed_set;
    auto examples = load_examples(in_path);
    std::vector<std::string> extra;
    if (!extra_corpus.empty()) {
      std::ifstream ein(extra_corpus);
      if (!ein) throw DataError("cannot open extra corpus: " + extra_corpus);
      std::string line;
      while (std::getline(ein, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        extra.push_back(j.contains("text") ? j.at("text").get<std::string>() : j.get<std::string>());
      }
    }
    CurationConfig cfg;
    cfg.topk_threshold = ck;
    cfg.num_negatives = cm;
    cfg.rank_lo = clo;
    cfg.rank_hi = chi;
    cfg.seed = seed;
    EncoderSpec spec = encoder_spec_from_flags(encoder_url, dim, true, enc_batch);
    CurationResult r = curate(examples, extra, spec, cfg);
    write_examples(r.kept, out_path);
    if (!report_path.empty()) {
      std::ofstream rep(report_path);
      rep << curation_report_to_json(r.report).dump(2) << "\n";
    }
    return kExitOk;
  }

  if (*batch_cmd) {
    auto examples = load_examples(in_path);
    BatchConfig cfg;
    cfg.batch_size = batch_size;
    cfg.mixing_ratio = ratio;
    cfg.seed = seed;
    cfg.group_key = group_key == "task_type" ? GroupKey::task_type : GroupKey::dataset_id;
    BatchPlan plan = build_semi_homogeneous(examples, cfg);
    std::ofstream out(out_path);
    out << plan_to_json(plan).dump(2) << "\n";
    std::cout << plan.batches.size() << " batches, " << plan.dropped_ids.size() << " dropped\n";
    return kExitOk;
  }

  if (*format_cmd) {
    auto examples = load_examples(in_path);
    InstructionTable table;
    std::ofstream out(out_path);
    for (const auto& ex : examples) {
      out << nlohmann::json{{"id", ex.id}, {"rendered", format_instruction(ex, table)}}.dump()
          << "\n";
    }
    return kExitOk;
  }

  if (*synth_cmd) {
    std::ifstream sin(spec_path);
    if (!sin) throw ConfigError("cannot open campaign spec: " + spec_path);
    nlohmann::json sj = nlohmann::json::parse(sin);

    CampaignSpec spec;
    spec.model = sj.value("model", std::string("mock-llm"));
    if (!sj.contains("seed")) throw ConfigError("campaign spec must set a seed");
    spec.seed = sj.at("seed").get<std::uint64_t>();
    if (sj.contains("budget")) spec.budget = sj.at("budget").get<std::size_t>();
    spec.rate_per_sec = sj.value("rate_per_sec", 0.0);
    for (const auto& row : sj.at("kinds")) {
      SynthTaskSpec ts;
      auto kind = parse_task_kind(row.at("task_kind").get<std::string>());
      if (!kind) throw ConfigError("unknown task_kind in campaign spec");
      ts.task_kind = *kind;
      ts.language = row.value("language", std::string("en"));
      spec.counts.emplace_back(ts, row.at("count").get<std::size_t>());
    }

    PersonaStore personas;
    personas.load_file(sj.at("persona_file").get<std::string>());
    PromptLibrary prompts;
    if (sj.contains("prompt_dir")) prompts.load_overrides(sj.at("prompt_dir").get<std::string>());

    std::unique_ptr<LlmGateway> gateway;
    std::string endpoint = sj.value("endpoint", std::string("mock"));
    if (const char* env = std::getenv("CURATOR_LLM_ENDPOINT")) endpoint = env;
    if (endpoint == "mock") {
      gateway = std::make_unique<MockGateway>();
    } else {
      const char* key = std::getenv("CURATOR_LLM_KEY");
      gateway = std::make_unique<HttpGateway>(endpoint, key ? key : "");
    }

    const std::string state_path = out_path + ".state";
    if (!resume) {
      std::remove(state_path.c_str());
      std::remove(out_path.c_str());
    }
    CampaignReport report = run_campaign(spec, personas, *gateway, prompts, out_path,
                                         out_path + ".quarantine.jsonl", state_path);
    nlohmann::json rj{{"records", report.records},
                      {"quarantined", report.quarantined},
                      {"skipped_resume", report.skipped_resume},
                      {"gateway_calls", report.gateway_calls},
                      {"budget_exhausted", report.budget_exhausted},
                      {"per_kind", report.per_kind},
                      {"per_language", report.per_language},
                      {"per_persona", report.per_persona}};
    if (!synth_report.empty()) {
      std::ofstream rep(synth_report);
      rep << rj.dump(2) << "\n";
    }
    std::cout << rj.dump(2) << "\n";
    return kExitOk;
  }

  if (*train_cmd) {
    auto corpus = load_examples(in_path);
    std::ifstream pin(plan_path);
    if (!pin) throw DataError("cannot open plan: " + plan_path);
    BatchPlan plan = plan_from_json(nlohmann::json::parse(pin));
    LossConfig cfg;
    ToyTrainResult r = train_toy(corpus, plan, cfg, lr, epochs, seed);
    std::ofstream trace(trace_path);
    trace << "step,total_loss";
    for (std::size_t d = 0; d < cfg.mrl_dims.size(); ++d) trace << ",loss_dim" << cfg.mrl_dims[d];
    trace << "\n";
    for (const auto& s : r.trace) {
      trace << s.step << "," << s.total_loss;
      for (double v : s.per_dim) trace << "," << v;
      trace << "\n";
    }
    return kExitOk;
  }

  if (*sweep_cmd) {
    std::ifstream gin(grid_path);
    if (!gin) throw ConfigError("cannot open grid: " + grid_path);
    nlohmann::json g = nlohmann::json::parse(gin);
    auto corpus = load_examples(g.at("corpus").get<std::string>());
    auto held_out = load_examples(g.at("held_out").get<std::string>());
    std::vector<std::string> pool;
    for (const auto& ex : corpus) pool.push_back(ex.positives.front());
    for (const auto& ex : held_out) pool.push_back(ex.positives.front());
    LossConfig cfg;
    auto cells = sweep(corpus, held_out, pool, g.at("batch_sizes").get<std::vector<std::size_t>>(),
                       g.at("epochs").get<std::vector<std::size_t>>(),
                       g.value("ratios", std::vector<double>{0.0}), cfg,
                       g.value("lr", 1e-4), g.at("seed").get<std::uint64_t>());
    std::ofstream out(sweep_out);
    out << "batch_size,epochs,ratio,failed,final_loss,recall_full,recall_low\n";
    for (const auto& c : cells) {
      out << c.batch_size << "," << c.epochs << "," << c.mixing_ratio << "," << c.failed << ","
          << c.final_loss << "," << c.recall_full << "," << c.recall_low << "\n";
    }
    return kExitOk;
  }

  if (*report_cmd) {
    std::vector<nlohmann::json> reports;
    for (const auto& path : report_inputs) {
      std::ifstream rin(path);
      if (!rin) throw DataError("cannot open report: " + path);
      reports.push_back(nlohmann::json::parse(rin));
    }
    Summary summary = summarize(reports);
    std::cout << summary.text;
    if (!report_json_out.empty()) {
      std::ofstream jout(report_json_out);
      jout << summary.rows.dump(2) << "\n";
    }
    return kExitOk;
  }

  if (*pipeline_cmd) {
    run_pipeline(config_path);
    return kExitOk;
  }

  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const curator::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return curator::kExitConfig;
  } catch (const curator::ServiceError& e) {
    std::cerr << "service error: " << e.what() << "\n";
    return curator::kExitService;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return curator::kExitData;
  }
}
