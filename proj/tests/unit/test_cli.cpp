#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <json.hpp>
#include <regex>
#include <sstream>

#include "lopt/cli.hpp"
#include "lopt/error.hpp"
#include "lopt/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lopt;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lopt_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Small quadratic experiment; every stage finishes in well under a second.
json small_config(const fs::path& outdir) {
  return {{"seed", 3},
          {"outdir", outdir.string()},
          {"task", {{"kind", "quadratic"}, {"dim", 3}}},
          {"tune", {{"kinds", {"gd", "momentum"}}, {"n_samples", 6}, {"n_problems", 2}, {"steps", 20}}},
          {"meta", {{"hidden_size", 4}, {"batch_size", 2}, {"meta_steps", 3}, {"unroll", 8}}},
          {"evaluate", {{"n_eval_seeds", 3}, {"n_meta_eval", 3}, {"steps", 20}}},
          {"analysis", {{"n_problems", 2}, {"steps", 20}, {"fixed_point_seeds", 4},
                        {"n_variance_problems", 4}, {"variance_steps", 20}, {"autonomous_steps", 20},
                        {"s_curve_points", 3}}}};
}

std::string write_config(const fs::path& dir, const json& config) {
  const fs::path p = dir / "config.json";
  write_file_atomic(p, config.dump(2));
  return p.string();
}

std::map<std::string, std::string> digests(const fs::path& dir, const std::string& ext) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) {
      out[fs::relative(e.path(), dir).string()] = sha256_hex(read_file(e.path()));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("config schema rejects unknown keys and wrong types") {
  CHECK_NOTHROW(parse_experiment_config("{}"));
  CHECK_THROWS_AS(parse_experiment_config(R"({"sed": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"task": {"kind": "quadratic", "dims": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"meta": {"learning_rate": "fast"}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"task": {"kind": "sphere"}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"tune": {"kinds": ["lbfgs"]}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("{not json"), ConfigError);
}

TEST_CASE("config defaults and round trip") {
  const ExperimentConfig c = parse_experiment_config("{}");
  CHECK(c.evaluate.n_eval_seeds == 128);
  CHECK(c.evaluate.n_meta_eval == 64);
  CHECK(c.tune.n_samples == 2500);
  const ExperimentConfig moons = parse_experiment_config(R"({"task": {"kind": "two_moons"}})");
  CHECK(moons.task.mlp.widths == std::vector<int>{2, 32, 32, 1});
  CHECK(moons.meta.task.mlp.widths == std::vector<int>{2, 32, 32, 1});
  const ExperimentConfig full =
      parse_experiment_config(R"({"task": {"kind": "two_moons"}, "meta": {"profile": "full"}})");
  CHECK(full.meta.hidden_size == 256);
  CHECK(full.task.mlp.widths == std::vector<int>{2, 64, 64, 64, 1});
  const ExperimentConfig custom =
      parse_experiment_config(R"({"task": {"kind": "two_moons", "mlp_widths": [2, 8, 1]}})");
  CHECK(custom.meta.task.mlp.widths == std::vector<int>{2, 8, 1});
  const std::string text = experiment_config_json(c);
  CHECK(experiment_config_json(parse_experiment_config(text)) == text);
}

TEST_CASE("exit codes") {
  const fs::path dir = fresh_dir("exit");
  SUBCASE("usage errors are config errors") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"--threads", "-1", "tune"}).code == 2);
  }
  SUBCASE("missing or invalid config") {
    CHECK(run({"--config", (dir / "absent.json").string(), "tune"}).code == 2);
    write_file_atomic(dir / "bad.json", R"({"outdir": "x", "unknown": 1})");
    const Result r = run({"--config", (dir / "bad.json").string(), "tune"});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown") != std::string::npos);
  }
  SUBCASE("evaluate before tune names the expected file") {
    const Result r = run({"--config", write_config(dir, small_config(dir / "out")), "evaluate"});
    CHECK(r.code == 4);
    CHECK(r.err.find("best.json") != std::string::npos);
  }
  SUBCASE("analyze without a checkpoint") {
    const Result r = run({"--config", write_config(dir, small_config(dir / "out")), "analyze"});
    CHECK(r.code == 4);
  }
  SUBCASE("unknown analysis mode lists the valid ones") {
    const Result r =
        run({"--config", write_config(dir, small_config(dir / "out")), "analyze", "--mode", "spectra"});
    CHECK(r.code == 2);
    for (const auto& m : analysis_modes()) CHECK(r.err.find(m) != std::string::npos);
  }
  SUBCASE("corrupt checkpoint is a compute error") {
    write_file_atomic(dir / "ck.json", "{\"format_version\": 1}");
    const Result r = run({"--config", write_config(dir, small_config(dir / "out")), "analyze",
                          "--checkpoint", (dir / "ck.json").string(), "--mode", "update-fn"});
    CHECK(r.code == 3);
  }
}

TEST_CASE("tune with one sample writes a single-row CSV per kind") {
  const fs::path dir = fresh_dir("one_sample");
  json config = small_config(dir / "out");
  config["tune"]["n_samples"] = 1;
  REQUIRE(run({"--config", write_config(dir, config), "tune"}).code == 0);
  for (const char* kind : {"gd", "momentum"}) {
    const fs::path samples = dir / "out" / "quadratic" / "tune" / (std::string(kind) + "_samples.csv");
    const ParsedCsv csv = parse_csv(read_file(samples));
    CHECK(csv.rows.size() == 1);
  }
  const json best = json::parse(read_file(dir / "out" / "quadratic" / "tune" / "best.json"));
  CHECK(best.contains("gd"));
  CHECK(best.contains("momentum"));
}

TEST_CASE("reruns skip, --force recomputes, digests are stable") {
  const fs::path dir = fresh_dir("rerun");
  const std::string cfg = write_config(dir, small_config(dir / "out"));
  REQUIRE(run({"--config", cfg, "tune"}).code == 0);
  const auto first = digests(dir / "out", ".csv");
  REQUIRE(!first.empty());

  const Result again = run({"--config", cfg, "tune"});
  CHECK(again.code == 0);
  CHECK(again.out.find("skipping") != std::string::npos);

  const Result forced = run({"--config", cfg, "--force", "tune"});
  CHECK(forced.code == 0);
  CHECK(forced.out.find("skipping") == std::string::npos);
  CHECK(digests(dir / "out", ".csv") == first);

  // A different seed is a different input.
  const Result reseeded = run({"--config", cfg, "--seed", "4", "tune"});
  CHECK(reseeded.out.find("skipping") == std::string::npos);
  CHECK(digests(dir / "out", ".csv") != first);
}

TEST_CASE("manifest lists every output with its digest") {
  const fs::path dir = fresh_dir("manifest");
  const std::string cfg = write_config(dir, small_config(dir / "out"));
  REQUIRE(run({"--config", cfg, "tune"}).code == 0);
  const json m = json::parse(read_file(dir / "out" / "manifest.json"));
  const json& files = m["stages"]["quadratic/tune"]["files"];
  REQUIRE(files.is_object());
  long listed = 0;
  for (const auto& [rel, digest] : files.items()) {
    CHECK(digest.get<std::string>() == sha256_hex(read_file(dir / "out" / "quadratic" / "tune" / rel)));
    ++listed;
  }
  long on_disk = 0;
  for (const auto& e : fs::directory_iterator(dir / "out" / "quadratic" / "tune")) {
    on_disk += e.is_regular_file();
  }
  CHECK(listed == on_disk);
}

TEST_CASE("evaluate with one seed has zero standard error") {
  const fs::path dir = fresh_dir("one_seed");
  json config = small_config(dir / "out");
  config["evaluate"]["n_eval_seeds"] = 1;
  config["evaluate"]["n_meta_eval"] = 1;
  const std::string cfg = write_config(dir, config);
  REQUIRE(run({"--config", cfg, "tune"}).code == 0);
  const Result r = run({"--config", cfg, "evaluate"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("baselines only") != std::string::npos);
  const ParsedCsv csv = parse_csv(read_file(dir / "out" / "quadratic" / "evaluate" / "loss_curves.csv"));
  long stderr_columns = 0;
  for (const auto& name : csv.header) {
    if (name.size() < 7 || name.substr(name.size() - 7) != "_stderr") continue;
    ++stderr_columns;
    for (double v : csv.numbers(name)) CHECK(v == 0.0);
  }
  CHECK(stderr_columns == 2);
}

TEST_CASE("identical optimizers under two names give identical curves") {
  const fs::path dir = fresh_dir("twins");
  const std::string cfg = write_config(dir, small_config(dir / "out"));
  REQUIRE(run({"--config", cfg, "tune"}).code == 0);
  const fs::path best_path = dir / "out" / "quadratic" / "tune" / "best.json";
  json best = json::parse(read_file(best_path));
  best["momentum_twin"] = best["momentum"];
  write_file_atomic(best_path, best.dump(2));
  REQUIRE(run({"--config", cfg, "evaluate"}).code == 0);
  const ParsedCsv csv = parse_csv(read_file(dir / "out" / "quadratic" / "evaluate" / "loss_curves.csv"));
  CHECK(csv.numbers("momentum_mean") == csv.numbers("momentum_twin_mean"));
  CHECK(csv.numbers("momentum_stderr") == csv.numbers("momentum_twin_stderr"));
}

TEST_CASE("update-fn on an untrained checkpoint") {
  const fs::path dir = fresh_dir("inert");
  json config = small_config(dir / "out");
  config["meta"]["meta_steps"] = 0;
  const std::string cfg = write_config(dir, config);
  REQUIRE(run({"--config", cfg, "meta-train"}).code == 0);
  const Result r = run({"--config", cfg, "analyze", "--mode", "update-fn"});
  REQUIRE(r.code == 0);
  const ParsedCsv csv =
      parse_csv(read_file(dir / "out" / "quadratic" / "analyze" / "update-fn" / "update_function.csv"));
  REQUIRE(!csv.rows.empty());
  for (double u : csv.numbers("update_initial")) CHECK(std::abs(u) < 1e-3);
}

TEST_CASE("every SVG has a sibling data file with matching row count") {
  const fs::path dir = fresh_dir("siblings");
  const std::string cfg = write_config(dir, small_config(dir / "out"));
  for (const char* cmd : {"tune", "meta-train", "evaluate", "analyze"}) {
    const Result r = run({"--config", cfg, cmd});
    REQUIRE_MESSAGE(r.code == 0, cmd << ": " << r.err);
  }
  const std::regex desc(R"(<desc>data=([A-Za-z0-9_.]+) rows=(\d+)</desc>)");
  long svgs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out")) {
    if (e.path().extension() != ".svg") continue;
    ++svgs;
    const std::string svg = read_file(e.path());
    std::smatch m;
    REQUIRE_MESSAGE(std::regex_search(svg, m, desc), e.path().string());
    const fs::path data = e.path().parent_path() / m[1].str();
    CHECK(data.stem() == e.path().stem());
    REQUIRE_MESSAGE(fs::exists(data), data.string());
    CHECK(parse_csv(read_file(data)).rows.size() == std::stoul(m[2].str()));
  }
  CHECK(svgs >= 10);

  SUBCASE("plot re-renders identical figures") {
    const auto before = digests(dir / "out", ".svg");
    REQUIRE(run({"--config", cfg, "plot"}).code == 0);
    CHECK(digests(dir / "out", ".svg") == before);
  }
}
