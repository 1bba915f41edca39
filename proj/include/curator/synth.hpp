#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "curator/types.hpp"

namespace curator {

struct Persona {
  std::string id;
  std::string description;
};

class PersonaStore {
 public:
  void add(Persona p);
  void load_file(const std::string& path);  // JSONL {"id":..,"description":..}
  std::size_t size() const { return personas_.size(); }
  const Persona& sample(std::uint64_t seed, std::uint64_t draw_index) const;

 private:
  std::vector<Persona> personas_;
};

enum class SynthTaskKind {
  short_long_retrieval,
  long_short_retrieval,
  short_short_retrieval,
  long_long_retrieval,
  sts,
  classification,
};

const char* to_string(SynthTaskKind k);
std::optional<SynthTaskKind> parse_task_kind(const std::string& s);
bool is_retrieval_kind(SynthTaskKind k);  // retrieval kinds are two-stage

struct SynthTaskSpec {
  SynthTaskKind task_kind = SynthTaskKind::short_long_retrieval;
  std::string language = "en";
  bool two_stage() const { return is_retrieval_kind(task_kind); }
};

struct GatewayRequest {
  std::string model;
  std::string system;
  std::string user;
};

// Chat-completion style gateway: {model, system, user} -> {text}.
class LlmGateway {
 public:
  virtual ~LlmGateway() = default;
  virtual std::string complete(const GatewayRequest& request) = 0;
};

// Scripted gateway for tests and offline runs. The handler defaults to a
// deterministic generator of well-formed completions. Every request is
// captured for assertions.
class MockGateway : public LlmGateway {
 public:
  using Handler = std::function<std::string(const GatewayRequest&)>;

  MockGateway();
  explicit MockGateway(Handler handler) : handler_(std::move(handler)) {}

  std::string complete(const GatewayRequest& request) override;
  const std::vector<GatewayRequest>& captured() const { return captured_; }

 private:
  Handler handler_;
  std::vector<GatewayRequest> captured_;
};

class HttpGateway : public LlmGateway {
 public:
  HttpGateway(std::string endpoint, std::string api_key, int max_retries = 3);
  std::string complete(const GatewayRequest& request) override;

 private:
  std::string endpoint_;
  std::string api_key_;
  int max_retries_;
};

// Editable prompt templates with {placeholder} substitution; ships with
// defaults per task kind, overridable from a directory of .txt assets.
class PromptLibrary {
 public:
  PromptLibrary();
  void load_overrides(const std::string& directory);
  std::string instruction_prompt(const SynthTaskSpec& spec) const;
  std::string example_prompt(const SynthTaskSpec& spec, const std::string& instruction) const;
  std::string get(const std::string& key) const;  // raw template by key

 private:
  std::map<std::string, std::string> templates_;
};

struct SynthRecord {
  TrainingExample example;
  std::string persona_id;
  SynthTaskKind task_kind = SynthTaskKind::sts;
  std::string instruction_id;  // normalized hash of the instruction, empty for single-stage
  std::string model_name;
  std::string prompt_hash;
};

struct QuarantineRecord {
  std::string task;
  std::size_t index = 0;
  std::string reason;
  std::string raw;
};

// Dedup of retained instructions by normalized-text hash.
class InstructionDedup {
 public:
  bool insert(const std::string& instruction);  // false when already seen

 private:
  std::unordered_set<std::string> hashes_;
};

struct GenerationContext {
  std::string model = "mock-llm";
  std::uint64_t seed = 0;
  const PromptLibrary* prompts = nullptr;
};

// Stage one of two-stage kinds: one instruction with the persona as system
// prompt. Empty optional when the gateway output stays unusable after retry
// or the instruction is a duplicate.
std::optional<std::string> generate_instruction(const SynthTaskSpec& spec, const Persona& persona,
                                                LlmGateway& gateway, const GenerationContext& ctx,
                                                InstructionDedup& dedup);

// Data-generation call. For two-stage kinds the system prompt carries no
// persona; for single-stage kinds the persona is the system prompt.
std::optional<SynthRecord> generate_example(const SynthTaskSpec& spec,
                                            const std::optional<std::string>& instruction,
                                            const Persona& persona, LlmGateway& gateway,
                                            const GenerationContext& ctx, std::size_t index,
                                            std::vector<QuarantineRecord>& quarantine);

struct CampaignSpec {
  std::vector<std::pair<SynthTaskSpec, std::size_t>> counts;
  std::string model = "mock-llm";
  std::uint64_t seed = 0;
  std::size_t budget = SIZE_MAX;   // total gateway calls
  double rate_per_sec = 0.0;       // token-bucket rate limit; 0 = unlimited
};

struct CampaignReport {
  std::map<std::string, std::size_t> per_kind;
  std::map<std::string, std::size_t> per_language;
  std::map<std::string, std::size_t> per_persona;
  std::size_t records = 0;
  std::size_t quarantined = 0;
  std::size_t skipped_resume = 0;
  std::size_t gateway_calls = 0;
  bool budget_exhausted = false;
};

// Runs (or resumes) a campaign: records append to out_path, quarantine to
// quarantine_path, completed task keys checkpoint to state_path
// (write-temp-then-rename). A rerun over a finished campaign adds nothing.
CampaignReport run_campaign(const CampaignSpec& spec, const PersonaStore& personas,
                            LlmGateway& gateway, const PromptLibrary& prompts,
                            const std::string& out_path, const std::string& quarantine_path,
                            const std::string& state_path);

}  // namespace curator
