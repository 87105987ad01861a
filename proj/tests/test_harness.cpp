#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exclab/errors.hpp"
#include "exclab/harness.hpp"
#include "exclab/io.hpp"

using namespace exclab;
using nlohmann::json;

namespace {

const std::string kTmp = "/tmp/exclab_harness_test";

json base_model() {
  return {{"family", "bargmann-fock"},
          {"d", 2},
          {"params", {{"length_scale", 1.0}}}};
}

json sample_config(const std::string& out) {
  return {{"suite", "sample"},
          {"model", base_model()},
          {"grid", {{"R", 8.0}, {"h", 0.25}}},
          {"replicates", 40},
          {"seed", 7},
          {"workers", 2},
          {"out", out}};
}

}  // namespace

TEST_CASE("functional spec json round trip") {
  for (const std::string set : {"excursion", "level"})
    for (const std::string phi :
         {"count", "hole-indicator", "zero", "euler"}) {
      const json j{{"set", set}, {"level", 0.75}, {"phi", phi}};
      const FunctionalSpec s = functional_from_json(j);
      const json back = functional_to_json(s);
      CHECK(back.at("set") == set);
      CHECK(back.at("phi") == phi);
      CHECK(back.at("level").get<double>() == 0.75);
    }
  CHECK_THROWS_AS(functional_from_json(json{{"phi", "betti"}}), ConfigInvalid);
  CHECK_THROWS_AS(functional_from_json(json{{"set", "open"}}), ConfigInvalid);
}

TEST_CASE("config validation: suite and model requirements") {
  CHECK_THROWS_AS(validate_config(json{{"model", base_model()}}),
                  ConfigInvalid);
  CHECK_THROWS_AS(
      validate_config(json{{"suite", "percolate"}, {"model", base_model()}}),
      ConfigInvalid);
  CHECK_THROWS_AS(validate_config(json{{"suite", "lln"}}), ConfigInvalid);
  CHECK_NOTHROW(validate_config(json{{"suite", "lln"}, {"model", base_model()}}));
  CHECK_THROWS_AS(validate_config(json{{"suite", "lln"},
                                       {"model", base_model()},
                                       {"replicates", 0}}),
                  ConfigInvalid);
}

TEST_CASE("scale-triple matrix: conforming accepted, violations named") {
  int cases = 0, accepted = 0, rejected = 0;
  for (double a : {0.5, 1.0, 2.0})
    for (int ra : {1, 2, 3, 4, 5, 6, 8})          // r = ra * a
      for (int rs : {1, 2, 3, 4, 6}) {            // R = rs * (r + 4a)
        const double r = ra * a;
        const double R = rs * (r + 4.0 * a);
        ++cases;
        json cfg{{"suite", "clt"},
                 {"model", base_model()},
                 {"scales", {{"R", R}, {"r", r}, {"a", a}}}};
        const bool ra_ok = ra % 2 == 0 && ra >= 2;
        const bool rs_ok = rs % 2 == 0 && rs >= 2;
        if (ra_ok && rs_ok) {
          CHECK_NOTHROW(validate_config(cfg));
          ++accepted;
        } else {
          try {
            validate_config(cfg);
            CHECK(false);
          } catch (const ConfigInvalid& e) {
            const std::string msg = e.what();
            if (!ra_ok)
              CHECK(msg.find("r/a not even") != std::string::npos);
            else
              CHECK(msg.find("R/(r+4a) not even") != std::string::npos);
            ++rejected;
          }
        }
      }
  CHECK(cases >= 100);
  CHECK(accepted > 0);
  CHECK(rejected > 0);
  // non-divisible ratios are named too
  json bad{{"suite", "clt"},
           {"model", base_model()},
           {"scales", {{"R", 24.0}, {"r", 2.5}, {"a", 1.0}}}};
  CHECK_THROWS_WITH_AS(validate_config(bad), "ConfigInvalid: r/a not even",
                       ConfigInvalid);
}

TEST_CASE("sample suite: determinism, checks, tamper detection") {
  std::filesystem::remove_all(kTmp);
  const std::string d1 = kTmp + "/run1", d2 = kTmp + "/run2";
  const json m1 = run_suite(sample_config(d1));
  const json m2 = run_suite(sample_config(d2));
  CHECK(read_text(d1 + "/results.csv") == read_text(d2 + "/results.csv"));
  // hashes differ (the out dir is part of the config), outputs must not
  CHECK(m1.at("config_hash") != m2.at("config_hash"));

  const json verdict = check_manifest(m1);
  CHECK(verdict.at("pass").get<bool>());
  CHECK(verdict.at("checks").size() == 3);  // one per lag
  // verdict survives a serialization round trip
  CHECK(json::parse(verdict.dump()) == verdict);

  // perturb the lag-0 covariance by 10 SE: the named check must fail
  std::string csv = read_text(d1 + "/results.csv");
  const size_t row = csv.find("\r\n") + 2;
  const size_t v0 = csv.find(",cov,", row) + 5;
  const size_t v1 = csv.find(',', v0);
  const double val = std::stod(csv.substr(v0, v1 - v0));
  const size_t l1 = csv.find(',', v1 + 1);
  const double lo = std::stod(csv.substr(v1 + 1, l1 - v1 - 1));
  const double se = (val - lo) / 1.959963984540054;
  csv.replace(v0, v1 - v0, format_num(val + 10.0 * se));
  write_text(d1 + "/results.csv", csv);
  const json bad = check_manifest(m1);
  CHECK(!bad.at("pass").get<bool>());
  bool named = false;
  for (const auto& c : bad.at("checks"))
    if (c.at("name") == "covariance_lag_0" && !c.at("pass").get<bool>())
      named = true;
  CHECK(named);

  // removing a listed output is a hard error
  std::filesystem::remove(d2 + "/field.bin");
  CHECK_THROWS_AS(check_manifest(m2), MissingOutputs);
}

TEST_CASE("functional suite carries the multiscale identity") {
  const std::string dir = kTmp + "/functional";
  json cfg{{"suite", "functional"},
           {"model", base_model()},
           {"functional", {{"set", "excursion"}, {"level", 0.0}, {"phi", "count"}}},
           {"grid", {{"R", 32.0}, {"h", 0.5}, {"b", 2.0}}},
           {"scales", {{"R", 16.0}, {"r", 4.0}, {"a", 1.0}}},
           {"replicates", 20},
           {"seed", 3},
           {"out", dir}};
  const json manifest = run_suite(cfg);
  CHECK(std::filesystem::exists(dir + "/geometry.csv"));
  const json verdict = check_manifest(manifest);
  CHECK(verdict.at("pass").get<bool>());
  bool saw_partition = false;
  for (const auto& c : verdict.at("checks"))
    if (c.at("name") == "multiscale_partition") {
      saw_partition = true;
      CHECK(c.at("pass").get<bool>());
    }
  CHECK(saw_partition);
}

TEST_CASE("volume suite warns outside the supercritical regime") {
  const std::string dir = kTmp + "/volume_warn";
  json cfg{{"suite", "volume"},
           {"model", base_model()},
           {"level", 1.0},
           {"R_list", {8.0}},
           {"n_list", {8.0}},
           {"replicates", 10},
           {"lil_runs", 5},
           {"h", 0.5},
           {"seed", 5},
           {"out", dir}};
  const json manifest = run_suite(cfg);
  bool warned = false;
  for (const auto& w : manifest.at("warnings"))
    if (w.get<std::string>().find("level outside supercritical") !=
        std::string::npos)
      warned = true;
  CHECK(warned);
}

TEST_CASE("manifest records the run inputs") {
  const std::string dir = kTmp + "/manifest";
  const json manifest = run_suite(sample_config(dir));
  CHECK(manifest.at("suite") == "sample");
  CHECK(manifest.at("seed").get<uint64_t>() == 7);
  CHECK(manifest.at("workers").get<int>() == 2);
  CHECK(manifest.at("out_dir") == dir);
  CHECK(manifest.at("versions").contains("excursion-lab"));
  CHECK(manifest.at("config").at("replicates").get<int>() == 40);
  // the manifest on disk matches the returned one
  CHECK(read_json(dir + "/manifest.json") == manifest);
}
