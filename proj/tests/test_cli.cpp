#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

#include "ckgen/commands.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kWork = "/tmp/ckgen_cli_work";

int run(const std::string& args) {
  const std::string cmd = std::string(CKGEN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("full pipeline runs end to end through the binary") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  const std::string lexicon = std::string(CKGEN_DATA_DIR) + "/pos_lexicon.tsv";

  REQUIRE(run("synth --out " + kWork + "/synth --train-per-scene 2 --dev-per-scene 1") == 0);
  REQUIRE(fs::exists(kWork + "/synth/graph.tsv"));
  REQUIRE(fs::exists(kWork + "/synth/train.jsonl"));

  REQUIRE(run("ingest --dump " + kWork + "/synth/graph.tsv --out " + kWork + "/graph") == 0);
  REQUIRE(fs::exists(kWork + "/graph/graph.tsv"));

  REQUIRE(run("extract --graph " + kWork + "/graph/graph.tsv --dataset " + kWork +
              "/synth/train.jsonl --selection prior --seed 9 --out " + kWork + "/paths") == 0);
  REQUIRE(fs::exists(kWork + "/paths/paths.jsonl"));
  REQUIRE(fs::exists(kWork + "/paths/config.extract.json"));

  REQUIRE(run("expand --graph " + kWork + "/graph/graph.tsv --dataset " + kWork +
              "/synth/train.jsonl --expansion-max 2 --out " + kWork + "/expansions") == 0);
  REQUIRE(fs::exists(kWork + "/expansions/expansions.jsonl"));

  REQUIRE(run("train --dataset " + kWork + "/synth/train.jsonl --paths " + kWork +
              "/paths/paths.jsonl --mode inject --epochs 2 --d-model 16 --n-heads 2 "
              "--cs-hidden 4 --out " +
              kWork + "/model") == 0);
  REQUIRE(fs::exists(kWork + "/model/checkpoint.json"));
  REQUIRE(fs::exists(kWork + "/model/loss.csv"));

  REQUIRE(run("generate --checkpoint " + kWork + "/model/checkpoint.json --dataset " + kWork +
              "/synth/dev.jsonl --paths " + kWork + "/paths/paths.jsonl --mode inject "
              "--beam-width 3 --best-n 3 --max-len 12 --lexicon " +
              lexicon + " --out " + kWork + "/gen") == 0);
  REQUIRE(fs::exists(kWork + "/gen/generations.jsonl"));

  REQUIRE(run("eval --generations " + kWork + "/gen/generations.jsonl --dataset " + kWork +
              "/synth/dev.jsonl --lexicon " + lexicon + " --run-label smoke --out " + kWork +
              "/eval") == 0);
  REQUIRE(fs::exists(kWork + "/eval/report.json"));
  REQUIRE(fs::exists(kWork + "/eval/report.txt"));
  CHECK(slurp(kWork + "/eval/report.txt").find("smoke") != std::string::npos);
}

TEST_CASE("extract reproduces the worked pizza paths through the binary") {
  REQUIRE(fs::exists(kWork + "/graph/graph.tsv"));
  std::ofstream ds(kWork + "/pizza.txt");
  ds << "broccoli_N#cheese_N#chicken_N#pizza_N\tcheese and broccoli pizza\n";
  ds.close();
  REQUIRE(run("extract --graph " + kWork + "/graph/graph.tsv --dataset " + kWork +
              "/pizza.txt --out " + kWork + "/pizza_paths") == 0);
  const std::string rows = slurp(kWork + "/pizza_paths/paths.jsonl");
  CHECK(rows.find("\"plate\"") != std::string::npos);     // the 2-hop bridge
  CHECK(rows.find("AtLocation") != std::string::npos);
}

TEST_CASE("reruns with identical configs are byte-identical") {
  // depends on the pipeline test having populated the work directory
  REQUIRE(fs::exists(kWork + "/expansions/expansions.jsonl"));
  const std::string before = slurp(kWork + "/expansions/expansions.jsonl");
  REQUIRE(run("expand --graph " + kWork + "/graph/graph.tsv --dataset " + kWork +
              "/synth/train.jsonl --expansion-max 2 --out " + kWork + "/expansions") == 0);
  CHECK(slurp(kWork + "/expansions/expansions.jsonl") == before);
}

TEST_CASE("parallel workers preserve input order in outputs") {
  REQUIRE(fs::exists(kWork + "/paths/paths.jsonl"));
  REQUIRE(run("extract --graph " + kWork + "/graph/graph.tsv --dataset " + kWork +
              "/synth/train.jsonl --selection prior --seed 9 --jobs 3 --out " + kWork +
              "/paths_j3") == 0);
  // config hash differs (jobs is part of the config), data rows must not
  auto data_rows = [](const std::string& path) {
    std::ifstream in(path);
    std::string line, rows;
    while (std::getline(in, line))
      if (!line.empty() && line.find("ckgen_header") == std::string::npos) rows += line + "\n";
    return rows;
  };
  CHECK(data_rows(kWork + "/paths/paths.jsonl") == data_rows(kWork + "/paths_j3/paths.jsonl"));
}

TEST_CASE("config mismatch on existing outputs fails unless forced") {
  REQUIRE(fs::exists(kWork + "/expansions/expansions.jsonl"));
  const std::string base = "expand --graph " + kWork + "/graph/graph.tsv --dataset " + kWork +
                           "/synth/train.jsonl --expansion-max 1 --out " + kWork +
                           "/expansions";
  CHECK(run(base) != 0);              // different expansion-max, same out dir
  CHECK(run(base + " --force") == 0);  // forced overwrite succeeds
}

TEST_CASE("missing files produce a nonzero exit and a machine-readable error") {
  const std::string cmd = std::string(CKGEN_CLI_PATH) +
                          " ingest --dump /no/such/dump.tsv --out " + kWork +
                          "/bad 2>" + kWork + "/err.txt >/dev/null";
  CHECK(std::system(cmd.c_str()) != 0);
  const std::string err = slurp(kWork + "/err.txt");
  CHECK(err.find("\"error\"") != std::string::npos);
}

TEST_CASE("config file provides defaults that flags override") {
  std::ofstream cfg(kWork + "/cfg.json");
  cfg << R"({"graph": ")" << kWork << R"(/graph/graph.tsv",)"
      << R"("dataset": ")" << kWork << R"(/synth/train.jsonl",)"
      << R"("expansion-max": 2})";
  cfg.close();
  REQUIRE(run("expand --config " + kWork + "/cfg.json --out " + kWork + "/exp2") == 0);
  REQUIRE(fs::exists(kWork + "/exp2/expansions.jsonl"));
  // flag overrides the config value; new out dir keeps hashes apart
  REQUIRE(run("expand --config " + kWork + "/cfg.json --expansion-max 1 --out " + kWork +
              "/exp3") == 0);
  const std::string resolved = slurp(kWork + "/exp3/config.expand.json");
  CHECK(resolved.find("\"expansion_max\": 1") != std::string::npos);
}
