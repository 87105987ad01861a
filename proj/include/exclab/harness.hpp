#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "exclab/topology.hpp"

namespace exclab {

// Parse/validate helpers shared by the CLI and tests.
FunctionalSpec functional_from_json(const nlohmann::json& j);
nlohmann::json functional_to_json(const FunctionalSpec& spec);

// Throws ConfigInvalid naming the violated constraint (e.g. "R/(r+4a) not
// even"). Validates the scale triple whenever "scales" is present.
void validate_config(const nlohmann::json& config);

// Dispatches to the named suite, writes CSV/JSON/SVG under the output
// directory, and returns the run manifest (also written as manifest.json).
// Suites: sample, functional, lln, var, clt, asclt, qclt-rate, arm, sigma2,
// volume, quasi.
nlohmann::json run_suite(const nlohmann::json& config);

// Evaluates the per-suite acceptance checks against the manifest's outputs;
// returns the machine-readable verdict. Throws MissingOutputs.
nlohmann::json check_manifest(const nlohmann::json& manifest);

}  // namespace exclab
