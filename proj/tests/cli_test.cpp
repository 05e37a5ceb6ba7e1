// End-to-end checks of the rex binary against the toy dataset: artifact
// creation, byte-identical reruns, resume semantics, and exit codes.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "support/test_support.hpp"

#ifndef REX_CLI_PATH
#error "REX_CLI_PATH must point at the rex binary"
#endif
#ifndef REX_SOURCE_DIR
#error "REX_SOURCE_DIR must point at the repository root"
#endif

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(REX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Copy of the toy config with out_dir redirected and a fast RL budget.
fs::path make_config(const rextest::TempDir& dir, const fs::path& out_dir,
                     int epochs, bool resume = false) {
  const fs::path source_dir(REX_SOURCE_DIR);
  std::ifstream in(source_dir / "data/toy/config.json");
  REQUIRE(in);
  nlohmann::json cfg;
  in >> cfg;
  for (const char* key :
       {"triples", "entity_types", "ontology_classes", "ontology_annotations",
        "train_split", "test_split"}) {
    cfg[key] = (source_dir / cfg[key].get<std::string>()).string();
  }
  cfg["out_dir"] = out_dir.string();
  cfg["resume"] = resume;
  cfg["rl"]["epochs"] = epochs;
  cfg["rl"]["rollouts"] = 6;
  cfg["rl"]["batch_size"] = 2;
  const fs::path path = dir.path("config.json");
  std::ofstream out(path);
  out << cfg.dump(2);
  return path;
}

}  // namespace

TEST_CASE("the full pipeline runs and reruns byte-identically") {
  rextest::TempDir dir("cli");
  const fs::path out_dir = dir.path("out");
  const fs::path config = make_config(dir, out_dir, 3);

  REQUIRE(run_cli("preprocess --config " + config.string()) == 0);
  CHECK(fs::exists(out_dir / "graph.tsv"));
  CHECK(fs::exists(out_dir / "ic_table.tsv"));
  CHECK(fs::exists(out_dir / "clusters.tsv"));

  const std::string graph_once = slurp(out_dir / "graph.tsv");
  const std::string table_once = slurp(out_dir / "ic_table.tsv");
  const std::string clusters_once = slurp(out_dir / "clusters.tsv");
  REQUIRE(run_cli("preprocess --config " + config.string()) == 0);
  CHECK(slurp(out_dir / "graph.tsv") == graph_once);
  CHECK(slurp(out_dir / "ic_table.tsv") == table_once);
  CHECK(slurp(out_dir / "clusters.tsv") == clusters_once);

  REQUIRE(run_cli("train --config " + config.string()) == 0);
  CHECK(fs::exists(out_dir / "checkpoint.bin"));
  const std::string log_text = slurp(out_dir / "training_log.csv");
  CHECK(log_text.rfind("epoch,batch,mean_reward,mean_fidelity,mean_relevance,"
                       "loss",
                       0) == 0);

  REQUIRE(run_cli("evaluate --config " + config.string()) == 0);
  const std::string metrics = slurp(out_dir / "metrics.csv");
  CHECK(metrics.rfind("variant,hits1,hits3,hits10,mrr,std_mrr", 0) == 0);
  CHECK(metrics.find("REx") != std::string::npos);

  REQUIRE(run_cli("explain --config " + config.string() +
                  " --subject aspirin --relation treats --object fever") == 0);
  CHECK(fs::exists(out_dir / "explanation.json"));
  CHECK(fs::exists(out_dir / "explanation.dot"));
  nlohmann::json doc;
  std::ifstream exp_in(out_dir / "explanation.json");
  exp_in >> doc;
  CHECK(doc.contains("status"));
  CHECK(doc.contains("paths"));
  const std::string dot = slurp(out_dir / "explanation.dot");
  CHECK(dot.rfind("digraph", 0) == 0);

  REQUIRE(run_cli("ablate --config " + config.string()) == 0);
  const std::string ablation = slurp(out_dir / "ablation.csv");
  CHECK(ablation.find("REx -s") != std::string::npos);
  CHECK(ablation.find("REx -r") != std::string::npos);
  CHECK(ablation.find("REx -rs") != std::string::npos);
  CHECK(std::count(ablation.begin(), ablation.end(), '\n') == 5);  // header + 4
}

TEST_CASE("an unreachable object yields an explicit no-explanation status") {
  rextest::TempDir dir("cli");
  const fs::path out_dir = dir.path("out");
  const fs::path config = make_config(dir, out_dir, 2);
  REQUIRE(run_cli("preprocess --config " + config.string()) == 0);
  REQUIRE(run_cli("train --config " + config.string()) == 0);
  // dermatitis is more than three hops from vemurafenib in the toy graph.
  REQUIRE(run_cli("explain --config " + config.string() +
                  " --subject vemurafenib --relation treats"
                  " --object dermatitis") == 0);
  nlohmann::json doc;
  std::ifstream in(out_dir / "explanation.json");
  in >> doc;
  CHECK(doc.at("status").get<std::string>() == "no explanation found");
  CHECK(doc.at("paths").empty());
}

TEST_CASE("preprocess fails when fallback embeddings are disabled") {
  rextest::TempDir dir("cli");
  const fs::path out_dir = dir.path("out");
  const fs::path config = make_config(dir, out_dir, 1);
  nlohmann::json cfg;
  {
    std::ifstream in(config);
    in >> cfg;
  }
  cfg["allow_fallback_embeddings"] = false;  // and no embedding file given
  {
    std::ofstream out(config);
    out << cfg.dump(2);
  }
  CHECK(run_cli("preprocess --config " + config.string()) == 2);
}

TEST_CASE("training resumes from an existing checkpoint") {
  rextest::TempDir dir("cli");
  const fs::path out_dir = dir.path("out");
  const fs::path config = make_config(dir, out_dir, 2, true);
  REQUIRE(run_cli("preprocess --config " + config.string()) == 0);
  REQUIRE(run_cli("train --config " + config.string()) == 0);
  const std::string first = slurp(out_dir / "training_log.csv");
  REQUIRE(run_cli("train --config " + config.string()) == 0);
  const std::string second = slurp(out_dir / "training_log.csv");
  // Epoch numbering continues where the first run stopped.
  CHECK(first.find("\n0,0,") != std::string::npos);
  CHECK(second.find("\n2,0,") != std::string::npos);
  CHECK(second.find("\n3,0,") != std::string::npos);
}

TEST_CASE("a seed flag changes the preprocess artifacts deterministically") {
  rextest::TempDir dir("cli");
  const fs::path out_a = dir.path("a");
  const fs::path out_b = dir.path("b");
  const fs::path config = make_config(dir, out_a, 1);
  REQUIRE(run_cli("preprocess --config " + config.string()) == 0);
  REQUIRE(run_cli("preprocess --config " + config.string() + " --seed 99 --out " +
                  out_b.string()) == 0);
  // Same graph, different clustering stream.
  CHECK(slurp(out_a / "graph.tsv") == slurp(out_b / "graph.tsv"));
  CHECK(slurp(out_a / "clusters.tsv") != slurp(out_b / "clusters.tsv"));
}

TEST_CASE("exit codes distinguish config and data failures") {
  rextest::TempDir dir("cli");

  // Missing config file.
  CHECK(run_cli("preprocess --config " + dir.path("absent.json").string()) == 2);

  // Config referencing a missing triples file.
  const fs::path bad_ref = dir.path("bad_ref.json");
  {
    std::ofstream out(bad_ref);
    out << R"({"triples": ")" << dir.path("nope.tsv").string() << R"("})";
  }
  CHECK(run_cli("preprocess --config " + bad_ref.string()) == 2);

  // Malformed triple data.
  const fs::path bad_data = dir.path("bad.tsv");
  {
    std::ofstream out(bad_data);
    out << "only_two\tfields\n";
  }
  const fs::path bad_data_cfg = dir.path("bad_data.json");
  {
    std::ofstream out(bad_data_cfg);
    out << R"({"triples": ")" << bad_data.string() << R"(", "out_dir": ")"
        << dir.path("out").string() << R"("})";
  }
  CHECK(run_cli("preprocess --config " + bad_data_cfg.string()) == 3);

  // Evaluate without artifacts is a config error.
  const fs::path source_dir(REX_SOURCE_DIR);
  const fs::path no_artifacts = dir.path("no_artifacts.json");
  {
    std::ofstream out(no_artifacts);
    out << R"({"triples": ")" << (source_dir / "data/toy/triples.tsv").string()
        << R"(", "test_split": ")"
        << (source_dir / "data/toy/test.tsv").string()
        << R"(", "out_dir": ")" << dir.path("fresh").string() << R"("})";
  }
  CHECK(run_cli("evaluate --config " + no_artifacts.string()) == 2);
}
