#pragma once

#include "ccl/certificate.hpp"
#include "ccl/trainer.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace ccl {

using Json = nlohmann::json;

// Doubles are written in shortest round-trip form, so saving and reloading
// reproduces bounds and parameters bit-exactly.

Json network_to_json(const Network& net);
Network network_from_json(const Json& j);
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

Json property_to_json(const Property& prop);
Property property_from_json(const Json& j);

Json post_to_json(const PostCondition& post);
PostCondition post_from_json(const Json& j);

Json certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const Json& j);
void save_certificates(const std::vector<Certificate>& certs, const std::string& path);
std::vector<Certificate> load_certificates(const std::string& path);

Json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const Json& j);

Json round_record_to_json(const RoundRecord& record);

std::string cert_outcome_name(CertOutcome o);

}  // namespace ccl
