#pragma once

// JSON run configuration shared by the C API and the CLI. Keys are flat and
// match the CLI flag names; unknown keys are rejected.

#include <string>

#include "json.hpp"
#include "thinstruct/pipelines.hpp"

namespace thinstruct::config {

using Json = nlohmann::json;

/// Every recognized key with its default value.
Json defaults();

/// Returns defaults() overlaid with `overrides`; throws InputError on an
/// unknown key or a value of the wrong type.
Json merged(const Json& overrides);

void validate_key(const std::string& key, const Json& value);

/// Range checks of a merged configuration for every pipeline; throws InputError.
void check(const Json& cfg);

ProblemSpec problem_spec(const Json& cfg);
InferenceOptions inference_options(const Json& cfg);
TrustRegionConfig solver_config(const Json& cfg);
EdgeParams edge_params(const Json& cfg);
PointCloudParams point_cloud_params(const Json& cfg);
VesselParams vessel_params(const Json& cfg);

}  // namespace thinstruct::config
