#include "curator/synth.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "curator/rng.hpp"
#include "curator/text.hpp"

namespace curator {

namespace {

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string hash_hex(std::string_view bytes) {
  Hash128 h = fingerprint128(bytes);
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(h.hi),
                static_cast<unsigned long long>(h.lo));
  return buf;
}

std::string substitute(std::string tmpl,
                       const std::vector<std::pair<std::string, std::string>>& vars) {
  for (const auto& [key, value] : vars) {
    const std::string needle = "{" + key + "}";
    for (std::size_t pos = tmpl.find(needle); pos != std::string::npos;
         pos = tmpl.find(needle, pos + value.size())) {
      tmpl.replace(pos, needle.size(), value);
    }
  }
  return tmpl;
}

// Completions sometimes wrap the object in prose; take the outermost braces.
std::optional<nlohmann::json> parse_object(const std::string& completion) {
  try {
    nlohmann::json j = nlohmann::json::parse(completion);
    if (j.is_object()) return j;
  } catch (const std::exception&) {
  }
  std::size_t a = completion.find('{');
  std::size_t b = completion.rfind('}');
  if (a == std::string::npos || b == std::string::npos || b <= a) return std::nullopt;
  try {
    nlohmann::json j = nlohmann::json::parse(completion.substr(a, b - a + 1));
    if (j.is_object()) return j;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

}  // namespace

void PersonaStore::add(Persona p) {
  if (p.description.empty()) throw std::runtime_error("persona description empty");
  personas_.push_back(std::move(p));
}

void PersonaStore::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open persona file: " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Persona p;
    p.id = j.contains("id") ? j.at("id").get<std::string>() : "persona/" + std::to_string(n);
    p.description = j.at("description").get<std::string>();
    add(std::move(p));
    ++n;
  }
}

const Persona& PersonaStore::sample(std::uint64_t seed, std::uint64_t draw_index) const {
  if (personas_.empty()) throw std::runtime_error("persona store is empty");
  Rng rng(seed ^ (draw_index * 0x9E3779B97F4A7C15ULL) ^ 0x70657273ULL);
  return personas_[rng.bounded(personas_.size())];
}

const char* to_string(SynthTaskKind k) {
  switch (k) {
    case SynthTaskKind::short_long_retrieval: return "short_long_retrieval";
    case SynthTaskKind::long_short_retrieval: return "long_short_retrieval";
    case SynthTaskKind::short_short_retrieval: return "short_short_retrieval";
    case SynthTaskKind::long_long_retrieval: return "long_long_retrieval";
    case SynthTaskKind::sts: return "sts";
    case SynthTaskKind::classification: return "classification";
  }
  return "?";
}

std::optional<SynthTaskKind> parse_task_kind(const std::string& s) {
  for (SynthTaskKind k :
       {SynthTaskKind::short_long_retrieval, SynthTaskKind::long_short_retrieval,
        SynthTaskKind::short_short_retrieval, SynthTaskKind::long_long_retrieval,
        SynthTaskKind::sts, SynthTaskKind::classification}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

bool is_retrieval_kind(SynthTaskKind k) {
  return k != SynthTaskKind::sts && k != SynthTaskKind::classification;
}

MockGateway::MockGateway() {
  handler_ = [](const GatewayRequest& req) -> std::string {
    const std::uint64_t h = fnv1a64(req.system + "\x1f" + req.user);
    const std::string tag = std::to_string(h % 1000000);
    if (req.user.find("\"user_query\"") != std::string::npos) {
      nlohmann::json j{{"user_query", "mock question about topic " + tag},
                       {"positive_document", "mock document answering topic " + tag},
                       {"hard_negative_document", "mock document about unrelated topic " +
                                                      std::to_string((h >> 20) % 1000000)}};
      return j.dump();
    }
    if (req.user.find("\"sentence1\"") != std::string::npos) {
      nlohmann::json j{{"sentence1", "mock statement " + tag},
                       {"sentence2", "mock paraphrase of statement " + tag}};
      return j.dump();
    }
    if (req.user.find("\"text\"") != std::string::npos) {
      nlohmann::json j{{"text", "mock passage " + tag},
                       {"label", "category " + std::to_string(h % 7)},
                       {"wrong_label", "category " + std::to_string((h + 3) % 7)}};
      return j.dump();
    }
    return "Given a question about topic " + tag + ", retrieve passages that resolve it.";
  };
}

std::string MockGateway::complete(const GatewayRequest& request) {
  captured_.push_back(request);
  return handler_(request);
}

HttpGateway::HttpGateway(std::string endpoint, std::string api_key, int max_retries)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), max_retries_(max_retries) {}

std::string HttpGateway::complete(const GatewayRequest& request) {
  httplib::Client client(endpoint_);
  client.set_read_timeout(120);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  nlohmann::json body{{"model", request.model}, {"system", request.system}, {"user", request.user}};

  for (int attempt = 0;; ++attempt) {
    auto res = client.Post("/complete", headers, body.dump(), "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      return nlohmann::json::parse(res->body).at("text").get<std::string>();
    }
    if (attempt >= max_retries_) {
      throw std::runtime_error("llm gateway failed after " + std::to_string(attempt + 1) +
                               " attempts: " + (res ? std::to_string(res->status) : "transport"));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
  }
}

PromptLibrary::PromptLibrary() {
  templates_["instruction/short_long_retrieval"] =
      "Propose one concrete retrieval task where a short query should find a long document, "
      "in {language}. Answer with a single instruction sentence, plain text only.";
  templates_["instruction/long_short_retrieval"] =
      "Propose one concrete retrieval task where a long query should find a short answer, "
      "in {language}. Answer with a single instruction sentence, plain text only.";
  templates_["instruction/short_short_retrieval"] =
      "Propose one concrete retrieval task matching short queries to short targets, "
      "in {language}. Answer with a single instruction sentence, plain text only.";
  templates_["instruction/long_long_retrieval"] =
      "Propose one concrete retrieval task matching long documents to long documents, "
      "in {language}. Answer with a single instruction sentence, plain text only.";
  templates_["example/retrieval"] =
      "Task instruction: {instruction}\n"
      "Write one training example in {language} for this task. Respond with a JSON object "
      "with keys \"user_query\", \"positive_document\" and optionally "
      "\"hard_negative_document\". No other text.";
  templates_["example/sts"] =
      "Write one pair of semantically equivalent sentences in {language}. Respond with a JSON "
      "object with keys \"sentence1\" and \"sentence2\". No other text.";
  templates_["example/classification"] =
      "Invent a text classification task and one labeled example in {language}. Respond with "
      "a JSON object with keys \"text\", \"label\" and optionally \"wrong_label\". "
      "No other text.";
  templates_["system/data_stage"] =
      "You are a careful data generator. Follow the output format exactly.";
}

void PromptLibrary::load_overrides(const std::string& directory) {
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string key = entry.path().stem().string();
    // File names use double underscore for the key separator.
    for (std::size_t pos = key.find("__"); pos != std::string::npos; pos = key.find("__")) {
      key.replace(pos, 2, "/");
    }
    templates_[key] = strip(content);
  }
}

std::string PromptLibrary::instruction_prompt(const SynthTaskSpec& spec) const {
  auto it = templates_.find(std::string("instruction/") + to_string(spec.task_kind));
  if (it == templates_.end()) throw std::runtime_error("no instruction template for task kind");
  return substitute(it->second, {{"language", spec.language}});
}

std::string PromptLibrary::example_prompt(const SynthTaskSpec& spec,
                                          const std::string& instruction) const {
  std::string key = "example/";
  key += is_retrieval_kind(spec.task_kind) ? "retrieval" : to_string(spec.task_kind);
  auto it = templates_.find(key);
  if (it == templates_.end()) throw std::runtime_error("no example template for task kind");
  return substitute(it->second, {{"language", spec.language}, {"instruction", instruction}});
}

std::string PromptLibrary::get(const std::string& key) const {
  auto it = templates_.find(key);
  if (it == templates_.end()) throw std::runtime_error("no template for key: " + key);
  return it->second;
}

bool InstructionDedup::insert(const std::string& instruction) {
  return hashes_.insert(hash_hex(normalize_text(instruction))).second;
}

std::optional<std::string> generate_instruction(const SynthTaskSpec& spec, const Persona& persona,
                                                LlmGateway& gateway, const GenerationContext& ctx,
                                                InstructionDedup& dedup) {
  if (!spec.two_stage()) throw std::runtime_error("generate_instruction: single-stage task kind");
  const PromptLibrary defaults;
  const PromptLibrary& prompts = ctx.prompts ? *ctx.prompts : defaults;

  GatewayRequest req{ctx.model, persona.description, prompts.instruction_prompt(spec)};
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string completion;
    try {
      completion = strip(gateway.complete(req));
    } catch (const std::exception&) {
      return std::nullopt;
    }
    if (completion.empty()) continue;  // empty completion: retried once
    if (!dedup.insert(completion)) return std::nullopt;
    return completion;
  }
  return std::nullopt;
}

namespace {

std::optional<TrainingExample> example_from_completion(const SynthTaskSpec& spec,
                                                       const nlohmann::json& j,
                                                       const std::optional<std::string>& instruction,
                                                       std::size_t index, std::string& reason) {
  auto field = [&](const char* name) -> std::optional<std::string> {
    if (!j.contains(name) || !j.at(name).is_string()) return std::nullopt;
    std::string v = strip(j.at(name).get<std::string>());
    if (v.empty()) return std::nullopt;
    return v;
  };

  TrainingExample ex;
  ex.dataset_id = std::string("synth_") + to_string(spec.task_kind);
  ex.id = ex.dataset_id + "/" + std::to_string(index);
  ex.language = spec.language;

  if (is_retrieval_kind(spec.task_kind)) {
    auto q = field("user_query");
    auto p = field("positive_document");
    if (!q) { reason = "missing user_query"; return std::nullopt; }
    if (!p) { reason = "missing positive_document"; return std::nullopt; }
    ex.task_type = TaskType::retrieval;
    ex.symmetry = Symmetry::asymmetric;
    ex.category = spec.task_kind == SynthTaskKind::short_short_retrieval ? Category::s2s
                  : spec.task_kind == SynthTaskKind::long_short_retrieval ? Category::p2s
                                                                          : Category::s2p;
    ex.instruction = instruction;
    ex.query = *q;
    ex.positives = {*p};
    if (auto n = field("hard_negative_document");
        n && normalize_text(*n) != normalize_text(*p)) {
      ex.hard_negatives = {*n};
    }
  } else if (spec.task_kind == SynthTaskKind::sts) {
    auto s1 = field("sentence1");
    auto s2 = field("sentence2");
    if (!s1) { reason = "missing sentence1"; return std::nullopt; }
    if (!s2) { reason = "missing sentence2"; return std::nullopt; }
    ex.task_type = TaskType::sts;
    ex.symmetry = Symmetry::symmetric;
    ex.category = Category::s2s;
    ex.query = *s1;
    ex.positives = {*s2};
  } else {
    auto text = field("text");
    auto label = field("label");
    if (!text) { reason = "missing text"; return std::nullopt; }
    if (!label) { reason = "missing label"; return std::nullopt; }
    ex.task_type = TaskType::classification;
    ex.symmetry = Symmetry::asymmetric;
    ex.category = Category::s2s;
    ex.instruction = "Classifying the given text into its generated category";
    ex.query = *text;
    ex.positives = {*label};
    if (auto w = field("wrong_label"); w && normalize_text(*w) != normalize_text(*label)) {
      ex.hard_negatives = {*w};
    }
  }

  if (auto err = ex.validate(); !err.empty()) {
    reason = err;
    return std::nullopt;
  }
  return ex;
}

}  // namespace

std::optional<SynthRecord> generate_example(const SynthTaskSpec& spec,
                                            const std::optional<std::string>& instruction,
                                            const Persona& persona, LlmGateway& gateway,
                                            const GenerationContext& ctx, std::size_t index,
                                            std::vector<QuarantineRecord>& quarantine) {
  if (spec.two_stage() != instruction.has_value()) {
    throw std::runtime_error("generate_example: instruction presence must match task staging");
  }
  const PromptLibrary defaults;
  const PromptLibrary& prompts = ctx.prompts ? *ctx.prompts : defaults;

  // Persona roles only appear in the instruction stage of two-stage tasks.
  GatewayRequest req;
  req.model = ctx.model;
  req.system = spec.two_stage() ? prompts.get("system/data_stage") : persona.description;
  req.user = prompts.example_prompt(spec, instruction.value_or(""));

  std::string completion;
  std::optional<nlohmann::json> parsed;
  std::string last_error = "unparseable completion";
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      completion = strip(gateway.complete(req));
    } catch (const std::exception& e) {
      quarantine.push_back({to_string(spec.task_kind), index, e.what(), ""});
      return std::nullopt;
    }
    parsed = parse_object(completion);
    if (parsed) break;
    req.user += "\nReminder: respond with exactly one JSON object and nothing else.";
  }
  if (!parsed) {
    quarantine.push_back({to_string(spec.task_kind), index, last_error, completion});
    return std::nullopt;
  }

  std::string reason;
  auto ex = example_from_completion(spec, *parsed, instruction, index, reason);
  if (!ex) {
    quarantine.push_back({to_string(spec.task_kind), index, reason, completion});
    return std::nullopt;
  }

  SynthRecord rec;
  rec.example = std::move(*ex);
  rec.persona_id = persona.id;
  rec.task_kind = spec.task_kind;
  rec.instruction_id = instruction ? hash_hex(normalize_text(*instruction)) : "";
  rec.model_name = ctx.model;
  rec.prompt_hash = hash_hex(req.system + "\x1f" + req.user);
  return rec;
}

namespace {

class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_sec) : rate_(rate_per_sec) {}
  void take() {
    if (rate_ <= 0) return;
    using clock = std::chrono::steady_clock;
    auto now = clock::now();
    if (next_ < now) next_ = now;
    std::this_thread::sleep_until(next_);
    next_ += std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / rate_));
  }

 private:
  double rate_;
  std::chrono::steady_clock::time_point next_{};
};

std::unordered_set<std::string> load_state(const std::string& path) {
  std::unordered_set<std::string> done;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) done.insert(line);
  }
  return done;
}

void save_state_atomic(const std::unordered_set<std::string>& done, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& key : done) out << key << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

CampaignReport run_campaign(const CampaignSpec& spec, const PersonaStore& personas,
                            LlmGateway& gateway, const PromptLibrary& prompts,
                            const std::string& out_path, const std::string& quarantine_path,
                            const std::string& state_path) {
  CampaignReport report;
  std::unordered_set<std::string> done = load_state(state_path);
  InstructionDedup dedup;
  TokenBucket bucket(spec.rate_per_sec);

  std::ofstream out(out_path, std::ios::app);
  std::ofstream qlog(quarantine_path, std::ios::app);
  if (!out || !qlog) throw std::runtime_error("cannot open campaign output files");

  // Worst case per task: 2 instruction calls + 2 example calls. Stopping
  // while that many calls still fit keeps interrupted runs resumable with
  // no partially processed task.
  constexpr std::size_t kMaxCallsPerTask = 4;

  GenerationContext ctx;
  ctx.model = spec.model;
  ctx.seed = spec.seed;
  ctx.prompts = &prompts;

  auto counted_gateway = [&](const GatewayRequest& r) {
    bucket.take();
    ++report.gateway_calls;
    return gateway.complete(r);
  };
  struct CountingGateway : LlmGateway {
    std::function<std::string(const GatewayRequest&)> fn;
    std::string complete(const GatewayRequest& r) override { return fn(r); }
  } counting;
  counting.fn = counted_gateway;

  for (const auto& [task_spec, count] : spec.counts) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string key = std::string(to_string(task_spec.task_kind)) + "/" +
                              task_spec.language + "/" + std::to_string(i);
      if (done.count(key)) {
        ++report.skipped_resume;
        continue;
      }
      if (report.gateway_calls + kMaxCallsPerTask > spec.budget) {
        report.budget_exhausted = true;
        save_state_atomic(done, state_path);
        return report;
      }

      const Persona& persona = personas.sample(spec.seed, fnv1a64(key));

      std::optional<std::string> instruction;
      if (task_spec.two_stage()) {
        instruction = generate_instruction(task_spec, persona, counting, ctx, dedup);
        if (!instruction) {
          nlohmann::json qj{{"task", key}, {"reason", "no usable instruction"}, {"raw", ""}};
          qlog << qj.dump() << "\n";
          ++report.quarantined;
          done.insert(key);
          save_state_atomic(done, state_path);
          continue;
        }
      }

      std::vector<QuarantineRecord> quarantine;
      auto rec = generate_example(task_spec, instruction, persona, counting, ctx, i, quarantine);
      for (const auto& q : quarantine) {
        nlohmann::json qj{{"task", key}, {"reason", q.reason}, {"raw", q.raw}};
        qlog << qj.dump() << "\n";
        ++report.quarantined;
      }
      if (rec) {
        nlohmann::json j = to_json(rec->example);
        j["persona_id"] = rec->persona_id;
        j["task_kind"] = to_string(rec->task_kind);
        j["instruction_id"] = rec->instruction_id;
        j["model_name"] = rec->model_name;
        j["prompt_hash"] = rec->prompt_hash;
        out << j.dump() << "\n";
        out.flush();
        ++report.records;
        ++report.per_kind[to_string(rec->task_kind)];
        ++report.per_language[rec->example.language];
        ++report.per_persona[rec->persona_id];
      }
      done.insert(key);
      save_state_atomic(done, state_path);
    }
  }
  return report;
}

}  // namespace curator
