#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "glucorl/cli.hpp"
#include "glucorl/errors.hpp"

using namespace glucorl;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args, std::string* err = nullptr) {
  std::ostringstream o, e;
  const int rc = run_cli(args, o, e);
  if (err) *err = e.str();
  return rc;
}

}  // namespace

TEST_CASE("experiment config keys") {
  ExperimentConfig c;
  c.set("subjects", "0, 2, 5-7");
  CHECK(c.subjects == std::vector<int>{0, 2, 5, 6, 7});
  c.set("mode", "DH");
  CHECK(c.mode == HormoneMode::dual_hormone);
  c.set("learning_rate", "1e-4");
  CHECK(c.train.learning_rate == 1e-4);
  CHECK_THROWS_AS(c.set("colour", "blue"), ConfigError);
  CHECK_THROWS_AS(c.set("mode", "triple"), ConfigError);
  CHECK_THROWS_AS(c.set("batch_size", "x"), ConfigError);
  c.set("subjects", "3,3");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.set("subjects", "12");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config hash ignores the output directory and round-trips") {
  ExperimentConfig a, b;
  b.output_dir = "elsewhere";
  CHECK(a.hash() == b.hash());
  b.set("seed", "2");
  CHECK(a.hash() != b.hash());
  CHECK(ExperimentConfig::from_doc(b.to_doc()).hash() == b.hash());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("exit codes") {
  const auto dir = fs::temp_directory_path() / "glucorl_cli_test";
  fs::remove_all(dir);
  std::string err;
  CHECK(run({"generate", "--set", "nope=1", "-o", dir.string()}, &err) == kExitConfig);
  CHECK(err.find("nope") != std::string::npos);
  CHECK_FALSE(fs::exists(dir));
  CHECK(run({"evaluate", "-o", dir.string()}) == kExitMissingInput);
  CHECK(run({"compare", "-o", dir.string()}) == kExitMissingInput);
  CHECK(run({"generate", "--config", (dir / "absent.cfg").string()}) == kExitMissingInput);
  CHECK(run({"frobnicate"}) == kExitConfig);
  CHECK(run({"generate", "--set", "subjects=0", "-o", dir.string()}) == kExitOk);
  CHECK(fs::exists(dir / "manifests" / "generate.kv"));
  CHECK(fs::exists(dir / "scenarios" / "adult_001_test.scenario"));
  fs::remove_all(dir);
}
