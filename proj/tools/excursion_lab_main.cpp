#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "exclab/errors.hpp"
#include "exclab/harness.hpp"
#include "exclab/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"excursion-lab: excursion-set functional Monte Carlo suites"};
  app.require_subcommand(1);

  const std::vector<std::string> suites{"sample", "functional", "lln",
                                        "var",    "clt",        "asclt",
                                        "qclt-rate", "arm",     "sigma2",
                                        "volume", "quasi"};
  struct Args {
    std::string config;
    std::string out;
    uint64_t seed = 0;
    bool have_seed = false;
    int workers = 0;
    bool check = false;
  } args;

  std::string selected;
  for (const auto& name : suites) {
    auto* sub = app.add_subcommand(name, "run the " + name + " suite");
    sub->add_option("--config", args.config, "JSON config file")->required();
    sub->add_option("--seed", args.seed, "master seed (overrides config)")
        ->each([&](const std::string&) { args.have_seed = true; });
    sub->add_option("--workers", args.workers,
                    "worker threads (overrides config)");
    sub->add_option("--out", args.out, "output directory (overrides config)");
    sub->add_flag("--check", args.check,
                  "evaluate acceptance checks after the run");
    sub->callback([&, name] { selected = name; });
  }

  std::string manifest_path;
  auto* chk = app.add_subcommand("check", "evaluate a finished run");
  chk->add_option("--manifest", manifest_path, "manifest JSON")->required();
  chk->callback([&] { selected = "check"; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (selected == "check") {
      const nlohmann::json manifest = exclab::read_json(manifest_path);
      const nlohmann::json verdict = exclab::check_manifest(manifest);
      const std::string dir =
          manifest.value("out_dir", std::string("."));
      exclab::write_json(dir + "/verdict.json", verdict);
      std::printf("%s\n", verdict.dump(2).c_str());
      return verdict.at("pass").get<bool>() ? 0 : 2;
    }

    nlohmann::json config = exclab::read_json(args.config);
    config["suite"] = selected;
    // flags take precedence over config fields
    if (args.have_seed) config["seed"] = args.seed;
    if (args.workers > 0) config["workers"] = args.workers;
    if (!args.out.empty()) config["out"] = args.out;

    const nlohmann::json manifest = exclab::run_suite(config);
    std::printf("wrote %s\n",
                manifest.at("outputs").at("manifest")
                    .get<std::string>().c_str());
    for (const auto& w : manifest.at("warnings"))
      std::fprintf(stderr, "warning: %s\n",
                   w.get<std::string>().c_str());
    if (args.check) {
      const nlohmann::json verdict = exclab::check_manifest(manifest);
      exclab::write_json(manifest.at("out_dir").get<std::string>() +
                             "/verdict.json",
                         verdict);
      std::printf("%s\n", verdict.dump(2).c_str());
      if (!verdict.at("pass").get<bool>()) return 2;
    }
    return 0;
  } catch (const exclab::ConfigInvalid& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const exclab::MissingOutputs& e) {
    std::fprintf(stderr, "check failure: %s\n", e.what());
    return 2;
  } catch (const exclab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }
}
