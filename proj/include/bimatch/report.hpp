#pragma once

#include <string>

#include <json.hpp>

#include "bimatch/diagnostics.hpp"
#include "bimatch/estimator.hpp"
#include "bimatch/montecarlo.hpp"
#include "bimatch/network.hpp"
#include "bimatch/productivity.hpp"

namespace bimatch {

using json = nlohmann::ordered_json;

json to_json(const DiagnosticsReport& report, const MatchingNetwork& net);
std::string to_text(const DiagnosticsReport& report, const MatchingNetwork& net);

json to_json(const BetaEstimate& est);
json to_json(const NetworkEstimate& est, const MatchingNetwork& net, bool include_cycles = false);
std::string to_text(const NetworkEstimate& est, const MatchingNetwork& net);

json to_json(const SimConfig& cfg);
json to_json(const SimReport& report);
json to_json(const IdentificationSet& set);

/// Text used whenever outcome-based labeling is requested.
extern const char* const kOutcomeLabelingWarning;

}  // namespace bimatch
