#include <atomic>
#include <fstream>
#include <map>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "agentrag/cli.hpp"
#include "test_support.hpp"

namespace agentrag {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EnvLookup env_from(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
    const auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

struct RecordedRequest {
  std::string path;
  std::string body;
  std::map<std::string, std::string> headers;
};

// Answers every chat request with one fixed completion.
class CannedTransport final : public HttpTransport {
 public:
  explicit CannedTransport(std::shared_ptr<std::vector<RecordedRequest>> log) : log_(std::move(log)) {}
  HttpResponse post_json(const std::string& path, const std::string& body,
                         const std::map<std::string, std::string>& headers) override {
    log_->push_back({path, body, headers});
    return {200, R"({"choices": [{"message": {"role": "assistant", "content": "If live, then fine."}}]})"};
  }

 private:
  std::shared_ptr<std::vector<RecordedRequest>> log_;
};

// Hermetic environment: no process variables, and every transport the CLI
// creates is counted.
struct Harness {
  TempDir dir;
  std::shared_ptr<std::atomic<int>> transports = std::make_shared<std::atomic<int>>(0);
  std::shared_ptr<std::vector<RecordedRequest>> requests = std::make_shared<std::vector<RecordedRequest>>();
  std::map<std::string, std::string> vars;

  CliEnvironment env() const {
    CliEnvironment e;
    e.env = env_from(vars);
    e.make_transport = [counter = transports, log = requests](const std::string&) -> std::unique_ptr<HttpTransport> {
      ++*counter;
      return std::make_unique<CannedTransport>(log);
    };
    return e;
  }

  fs::path index() const { return dir / "index"; }

  testing::CliResult run(std::vector<std::string> args) const {
    std::vector<std::string> full{"--config", (testing::crafted_dir() / "config.toml").string(), "--index-dir",
                                  index().string()};
    full.insert(full.end(), args.begin(), args.end());
    return testing::run(full, env());
  }
};

constexpr char kCamQuestion[] = "--pipeline-text=Camera obstacle detection pipeline";

std::vector<std::string> ask_args(const std::string& pipeline) {
  return {"ask", "--pipeline", pipeline, kCamQuestion, "--insufficiency=degraded detection in rain",
          "--trigger=moderate rain"};
}

TEST(Ingest, WritesEveryArtifactAndIsReproducible) {
  Harness h;
  const auto first = h.run({"ingest"});
  ASSERT_EQ(first.exit_code, 0) << first.err;
  EXPECT_NE(first.out.find("ingested 3 documents"), std::string::npos);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(h.index())) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(names, (std::vector<std::string>{"brakes.tree.json", "brakes.vec.json", "camera.tree.json",
                                             "camera.vec.json", "glossary.tree.json", "glossary.vec.json",
                                             "pooled.vec.json", "tools.vec.json"}));
  std::map<std::string, std::string> before;
  for (const auto& n : names) before[n] = slurp(h.index() / n);

  ASSERT_EQ(h.run({"ingest"}).exit_code, 0);
  for (const auto& n : names) EXPECT_EQ(slurp(h.index() / n), before[n]) << n;
  for (const auto& entry : fs::directory_iterator(h.dir.path())) {
    EXPECT_EQ(entry.path().filename(), "index") << "leftover " << entry.path();
  }
}

TEST(Ingest, FailureLeavesPreviousIndexIntact) {
  Harness h;
  ASSERT_EQ(h.run({"ingest"}).exit_code, 0);
  const auto tools_before = slurp(h.index() / "tools.vec.json");
  testing::write_text(h.dir / "bad.json", R"([{"doc_id": "x", "title": "X", "description": "d", "path": "nope.md"}])");
  const auto r = h.run({"--manifest", (h.dir / "bad.json").string(), "ingest"});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(r.err.rfind("error: load: ", 0), 0u) << r.err;
  EXPECT_EQ(slurp(h.index() / "tools.vec.json"), tools_before);
}

TEST(Ingest, ReservedDocIdIsRejected) {
  Harness h;
  testing::write_text(h.dir / "body.md", "Some text.");
  testing::write_text(h.dir / "m.json",
                      R"([{"doc_id": "pooled", "title": "P", "description": "d", "path": "body.md"}])");
  const auto r = h.run({"--manifest", (h.dir / "m.json").string(), "ingest"});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("pooled"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(h.index()));
}

TEST(Ingest, MissingManifestIsRuntimeError) {
  Harness h;
  const auto r = h.run({"--manifest", (h.dir / "absent.json").string(), "ingest"});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_NE(r.err.find("absent.json"), std::string::npos) << r.err;
}

TEST(Ask, NoRagNeedsNoIndex) {
  Harness h;
  const auto r = h.run(ask_args("no-rag"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, "If camera detection deteriorates in rain, the pipeline shall not provide inaccurate obstacle tracks.\n");
  EXPECT_FALSE(fs::exists(h.index()));
}

TEST(Ask, PromptFileIsSentVerbatim) {
  Harness h;
  testing::write_text(h.dir / "prompt.txt", "Act as a safety engineer and answer.");
  const auto r = h.run({"ask", "--pipeline", "no-rag", "--prompt-file", (h.dir / "prompt.txt").string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto both = h.run({"ask", "--pipeline", "no-rag", "--prompt-file", (h.dir / "prompt.txt").string(),
                           "--insufficiency", "x"});
  EXPECT_EQ(both.exit_code, 1);
}

TEST(Ask, UnknownPipelineIsUsageError) {
  Harness h;
  const auto r = h.run(ask_args("hybrid"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;
  EXPECT_EQ(h.run({"ask", "--pipeline", "no-rag"}).exit_code, 1);
  EXPECT_EQ(h.run({"frobnicate"}).exit_code, 1);
}

TEST(Ask, MissingIndexPointsAtIngest) {
  Harness h;
  for (const auto* pipeline : {"default", "agentic"}) {
    const auto r = h.run(ask_args(pipeline));
    EXPECT_EQ(r.exit_code, 2) << pipeline;
    EXPECT_NE(r.err.find("agentrag ingest"), std::string::npos) << r.err;
  }
}

TEST(Ask, AgenticTraceRecordsSelectionAndContexts) {
  Harness h;
  ASSERT_EQ(h.run({"ingest"}).exit_code, 0);
  auto args = ask_args("agentic");
  args.push_back("--trace=" + (h.dir / "trace.json").string());
  const auto r = h.run(args);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out,
            "If camera confidence drops in rain, the pipeline shall not output obstacle tracks without radar and "
            "lidar confirmation.\n");
  const auto trace = json::parse(slurp(h.dir / "trace.json"));
  EXPECT_EQ(trace["pipeline"], "agentic");
  EXPECT_EQ(trace["context_sources"], json::array({"camera"}));
  const auto selected = trace["trace"]["selected_doc_ids"].get<std::vector<std::string>>();
  EXPECT_EQ(selected.size(), 3u);
  EXPECT_NE(std::find(selected.begin(), selected.end(), "camera"), selected.end());
  EXPECT_EQ(trace["trace"]["documents"].size(), 3u);
  EXPECT_FALSE(trace["trace"]["zero_context"].get<bool>());
}

TEST(Ask, DefaultRagTraceListsChunkIds) {
  Harness h;
  ASSERT_EQ(h.run({"ingest"}).exit_code, 0);
  auto args = ask_args("default");
  args.push_back("--trace=" + (h.dir / "trace.json").string());
  ASSERT_EQ(h.run(args).exit_code, 0);
  const auto trace = json::parse(slurp(h.dir / "trace.json"));
  ASSERT_EQ(trace["context_sources"].size(), 3u);
  for (const auto& id : trace["context_sources"]) EXPECT_NE(id.get<std::string>().find('#'), std::string::npos);
  EXPECT_TRUE(trace["trace"].is_null());
}

TEST(Scripted, NeverOpensATransport) {
  Harness h;
  ASSERT_EQ(h.run({"ingest"}).exit_code, 0);
  for (const auto* p : {"no-rag", "default", "agentic"}) ASSERT_EQ(h.run(ask_args(p)).exit_code, 0) << p;
  ASSERT_EQ(h.run({"eval", "--dataset", (testing::crafted_dir() / "dataset.jsonl").string(), "--runs", "1", "--out",
                   (h.dir / "out").string()})
                .exit_code,
            0);
  EXPECT_EQ(h.transports->load(), 0);
}

TEST(Live, RequiresBaseUrlAndKeyFromEnvironment) {
  Harness h;
  const std::vector<std::string> args{"--backend", "live", "ask", "--pipeline", "no-rag", kCamQuestion,
                                      "--insufficiency=x"};
  auto r = h.run(args);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("error: config: "), std::string::npos) << r.err;

  h.vars["RAG_BASE_URL"] = "http://127.0.0.1:9/api";
  r = h.run(args);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("RAG_API_KEY"), std::string::npos) << r.err;
  EXPECT_EQ(h.transports->load(), 0);

  h.vars["RAG_API_KEY"] = "sk-test";
  r = h.run(args);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, "If live, then fine.\n");
  EXPECT_EQ(h.transports->load(), 1);
  ASSERT_EQ(h.requests->size(), 1u);
  EXPECT_EQ(h.requests->front().headers.at("Authorization"), "Bearer sk-test");
  EXPECT_EQ(json::parse(h.requests->front().body)["model"], "gpt-3.5-turbo");
}

TEST(Eval, MissingDatasetIsUsageError) {
  Harness h;
  const auto r = h.run({"eval", "--dataset", (h.dir / "none.jsonl").string()});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;
  EXPECT_EQ(h.run({"eval", "--dataset", (testing::crafted_dir() / "dataset.jsonl").string(), "--pipelines", "bogus"})
                .exit_code,
            1);
}

TEST(Eval, NoRagOnlyReportsNass) {
  Harness h;
  const auto out = h.dir / "out";
  const auto r = h.run({"eval", "--dataset", (testing::crafted_dir() / "dataset.jsonl").string(), "--pipelines",
                        "no-rag", "--runs", "2", "--out", out.string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "report_no_rag.json"));
  EXPECT_FALSE(fs::exists(out / "report_agentic.json"));
  EXPECT_FALSE(fs::exists(out / "records_no_rag.jsonl"));
  const auto csv = slurp(out / "comparison.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_NE(csv.find("no_rag,NASS,0.8,0,2,0"), std::string::npos) << csv;
  EXPECT_EQ(r.out, slurp(out / "comparison.md"));
  const auto report = json::parse(slurp(out / "comparison.json"));
  EXPECT_EQ(report["n_runs"], 2);
  EXPECT_EQ(report["n_examples"], 4);
}

TEST(Eval, TraceWritesOneRecordPerExampleAndRun) {
  Harness h;
  ASSERT_EQ(h.run({"ingest"}).exit_code, 0);
  const auto out = h.dir / "out";
  const auto r = h.run({"eval", "--dataset", (testing::crafted_dir() / "dataset.jsonl").string(), "--pipelines",
                        "agentic,default", "--runs", "2", "--out", out.string(), "--trace"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::ifstream in(out / "records_agentic.jsonl");
  std::string line;
  std::map<int, int> per_run;
  while (std::getline(in, line)) {
    const auto rec = json::parse(line);
    ++per_run[rec["run"].get<int>()];
    EXPECT_EQ(rec["pipeline"], "agentic");
    EXPECT_EQ(rec["context_sources"], json::array({"camera"}));
    EXPECT_TRUE(rec.contains("trace"));
    EXPECT_TRUE(rec["judge"].contains("relevance"));
  }
  EXPECT_EQ(per_run, (std::map<int, int>{{1, 4}, {2, 4}}));
  EXPECT_TRUE(fs::exists(out / "records_default_rag.jsonl"));
  EXPECT_NE(r.out.find("| Metric | default_rag | agentic |"), std::string::npos) << r.out;
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, ParsesKeysCommentsAndRelativePaths) {
  AppConfig c;
  apply_config_text(c,
                    "# header\n[models]\nmanifest = \"docs/manifest.json\"  # trailing\nk = 5\nchunk_size = 64\n"
                    "chunk_overlap = 8\ntemperature = 0.2\nmax_tokens = 300\ngenerator_model = gpt-4o\n"
                    "base_url = \"https://example.invalid/v1#frag\"\n",
                    "/etc/rag");
  EXPECT_EQ(c.manifest, fs::path("/etc/rag/docs/manifest.json"));
  EXPECT_EQ(c.k, 5u);
  EXPECT_EQ(c.chunking.chunk_size, 64u);
  EXPECT_EQ(c.chunking.overlap, 8u);
  EXPECT_EQ(c.temperature, 0.2);
  EXPECT_EQ(c.max_tokens, 300);
  EXPECT_EQ(c.generator_model, "gpt-4o");
  EXPECT_EQ(c.base_url, "https://example.invalid/v1#frag");
}

TEST(Config, RejectsSecretsAndUnknownKeys) {
  AppConfig c;
  EXPECT_THROW(apply_config_text(c, "api_key = sk-123\n", "."), ConfigError);
  EXPECT_THROW(apply_config_text(c, "colour = blue\n", "."), ConfigError);
  EXPECT_THROW(apply_config_text(c, "k = many\n", "."), ConfigError);
  EXPECT_THROW(apply_config_text(c, "just words\n", "."), ConfigError);
  EXPECT_THROW(apply_config_text(c, "manifest = \"open\n", "."), ConfigError);
  EXPECT_THROW(apply_config_text(c, "manifest = \"a\" b\n", "."), ConfigError);

  Harness h;
  testing::write_text(h.dir / "secret.toml", "api_key = \"sk-123\"\n");
  const auto r = testing::run({"--config", (h.dir / "secret.toml").string(), "ingest"}, h.env());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("error: config: "), std::string::npos) << r.err;
  EXPECT_EQ(r.err.find("sk-123"), std::string::npos) << r.err;
}

TEST(Config, EnvironmentOverridesFile) {
  AppConfig c = load_config(testing::crafted_dir() / "config.toml");
  EXPECT_EQ(c.k, 3u);
  apply_env_overrides(c, env_from({{"RAG_K", "7"}, {"RAG_BASE_URL", "http://h"}, {"RAG_N_RUNS", "2"},
                                   {"RAG_BACKEND", "live"}}));
  EXPECT_EQ(c.k, 7u);
  EXPECT_EQ(c.base_url, "http://h");
  EXPECT_EQ(c.n_runs, 2u);
  EXPECT_EQ(c.backend, BackendKind::kLive);
  EXPECT_THROW(apply_env_overrides(c, env_from({{"RAG_CHUNK_SIZE", "-3"}})), ConfigError);
}

TEST(Config, ValidationCatchesBadCombinations) {
  AppConfig c;
  c.backend = BackendKind::kScripted;
  EXPECT_THROW(c.validate(), ConfigError);
  AppConfig overlap;
  overlap.chunking = {16, 16};
  EXPECT_THROW(overlap.validate(), ValidationError);
}

TEST(Cli, HelpExitsZero) {
  const auto r = testing::run({"--help"}, Harness{}.env());
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("ingest"), std::string::npos);
}

}  // namespace
}  // namespace agentrag
