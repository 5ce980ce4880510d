#include "ccl/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace ccl {

namespace {

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw std::runtime_error("expected a numeric array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

Json box_to_json(const LayerBox& box) {
  Json out = Json::array();
  for (Index i = 0; i < box.size(); ++i)
    out.push_back(Json{{"lw", box.lw(i)}, {"up", box.up(i)}});
  return out;
}

LayerBox box_from_json(const Json& j) {
  Vector lw(j.size()), up(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    lw(static_cast<Index>(i)) = j[i].at("lw").get<double>();
    up(static_cast<Index>(i)) = j[i].at("up").get<double>();
  }
  return LayerBox(std::move(lw), std::move(up));
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(1, '\t') << '\n';
}

}  // namespace

Json network_to_json(const Network& net) {
  Json layers = Json::array();
  for (const Layer& layer : net.layers) {
    if (const auto* aff = std::get_if<AffineLayer>(&layer)) {
      Json rows = Json::array();
      for (Index r = 0; r < aff->weights.rows(); ++r) {
        Json row = Json::array();
        for (Index c = 0; c < aff->weights.cols(); ++c) row.push_back(aff->weights(r, c));
        rows.push_back(std::move(row));
      }
      layers.push_back(Json{{"kind", "affine"}, {"weights", std::move(rows)},
                            {"bias", vector_to_json(aff->bias)}});
    } else {
      layers.push_back(Json{{"kind", "relu"}});
    }
  }
  Json j{{"input_dim", net.input_dim}, {"layers", std::move(layers)}};
  if (net.old_param_mask) {
    Json mask = Json::array();
    for (std::uint8_t m : *net.old_param_mask) mask.push_back(static_cast<int>(m));
    j["old_param_mask"] = std::move(mask);
  }
  return j;
}

Network network_from_json(const Json& j) {
  Network net;
  net.input_dim = j.at("input_dim").get<Index>();
  for (const Json& jl : j.at("layers")) {
    const std::string kind = jl.at("kind").get<std::string>();
    if (kind == "affine") {
      const Json& rows = jl.at("weights");
      if (rows.empty()) throw std::runtime_error("network: affine layer without rows");
      AffineLayer aff;
      aff.weights.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
          throw std::runtime_error("network: ragged weight matrix");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
          aff.weights(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].get<double>();
      }
      aff.bias = vector_from_json(jl.at("bias"));
      net.layers.emplace_back(std::move(aff));
    } else if (kind == "relu") {
      net.layers.emplace_back(ReluLayer{});
    } else {
      throw std::runtime_error("network: unknown layer kind '" + kind + "'");
    }
  }
  if (j.contains("old_param_mask")) {
    std::vector<std::uint8_t> mask;
    for (const Json& m : j.at("old_param_mask"))
      mask.push_back(m.get<int>() ? 1 : 0);
    net.old_param_mask = std::move(mask);
  }
  validate_structure(net);
  return net;
}

void save_network(const Network& net, const std::string& path) {
  write_json_file(network_to_json(net), path);
}

Network load_network(const std::string& path) { return network_from_json(read_json_file(path)); }

Json post_to_json(const PostCondition& post) {
  if (const auto* nl = std::get_if<NotLabel>(&post))
    return Json{{"kind", "not_label"}, {"label", nl->label}};
  return Json{{"kind", "is_label"}, {"label", std::get<IsLabel>(post).label}};
}

PostCondition post_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int lab = j.at("label").get<int>();
  if (kind == "not_label") return NotLabel{lab};
  if (kind == "is_label") return IsLabel{lab};
  throw std::runtime_error("post: unknown kind '" + kind + "'");
}

Json property_to_json(const Property& prop) {
  if (const auto* reach = std::get_if<ReachabilityProperty>(&prop)) {
    return Json{{"kind", "reachability"},
                {"pre", box_to_json(reach->pre)},
                {"post", post_to_json(reach->post)}};
  }
  if (const auto* rob = std::get_if<RobustnessProperty>(&prop)) {
    Json j{{"kind", "robustness"},
           {"x0", vector_to_json(rob->x0)},
           {"y0_label", rob->y0_label},
           {"epsilon", rob->epsilon}};
    if (rob->clamp) j["clamp"] = Json{{"lw", rob->clamp->lw}, {"up", rob->clamp->up}};
    return j;
  }
  const auto& fair = std::get<FairnessProperty>(prop);
  return Json{{"kind", "fairness"},
              {"x", vector_to_json(fair.x)},
              {"sensitive_index", fair.sensitive_index},
              {"sensitive_values", fair.sensitive_values},
              {"epsilon_other", fair.epsilon_other}};
}

Property property_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "reachability") {
    return ReachabilityProperty{box_from_json(j.at("pre")), post_from_json(j.at("post"))};
  }
  if (kind == "robustness") {
    RobustnessProperty rob;
    rob.x0 = vector_from_json(j.at("x0"));
    rob.y0_label = j.at("y0_label").get<int>();
    rob.epsilon = j.at("epsilon").get<double>();
    if (j.contains("clamp"))
      rob.clamp = Interval{j["clamp"].at("lw").get<double>(), j["clamp"].at("up").get<double>()};
    return rob;
  }
  if (kind == "fairness") {
    FairnessProperty fair;
    fair.x = vector_from_json(j.at("x"));
    fair.sensitive_index = j.at("sensitive_index").get<int>();
    fair.sensitive_values = j.at("sensitive_values").get<std::vector<double>>();
    fair.epsilon_other = j.value("epsilon_other", 0.0);
    return fair;
  }
  throw std::runtime_error("property: unknown kind '" + kind + "'");
}

Json certificate_to_json(const Certificate& cert) {
  Json boxes = Json::array();
  for (const LayerBox& box : cert.boxes) boxes.push_back(box_to_json(box));
  Json j{{"property_id", cert.property_id},
         {"property", property_to_json(cert.property)},
         {"post", post_to_json(cert.post)},
         {"boxes", std::move(boxes)}};
  j["variant_tag"] = cert.variant_tag ? Json(*cert.variant_tag) : Json(nullptr);
  return j;
}

Certificate certificate_from_json(const Json& j) {
  Certificate cert;
  cert.property_id = j.at("property_id").get<std::string>();
  cert.property = property_from_json(j.at("property"));
  cert.post = post_from_json(j.at("post"));
  if (j.contains("variant_tag") && !j["variant_tag"].is_null())
    cert.variant_tag = j["variant_tag"].get<double>();
  for (const Json& jb : j.at("boxes")) cert.boxes.push_back(box_from_json(jb));
  if (cert.boxes.empty()) throw std::runtime_error("certificate: no boxes");
  return cert;
}

void save_certificates(const std::vector<Certificate>& certs, const std::string& path) {
  Json arr = Json::array();
  for (const Certificate& cert : certs) arr.push_back(certificate_to_json(cert));
  write_json_file(Json{{"certificates", std::move(arr)}}, path);
}

std::vector<Certificate> load_certificates(const std::string& path) {
  const Json j = read_json_file(path);
  std::vector<Certificate> certs;
  for (const Json& jc : j.at("certificates")) certs.push_back(certificate_from_json(jc));
  return certs;
}

Json config_to_json(const TrainConfig& cfg) {
  return Json{{"lr", cfg.lr},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"alpha", cfg.alpha},
              {"beta", cfg.beta},
              {"per_cert_samples", cfg.per_cert_samples},
              {"seed", cfg.seed},
              {"k_schedule", cfg.k_schedule},
              {"old_data_fraction", cfg.old_data_fraction},
              {"strict_alg2", cfg.strict_alg2},
              {"repair_broken", cfg.repair_broken}};
}

TrainConfig config_from_json(const Json& j) {
  TrainConfig cfg;
  cfg.lr = j.value("lr", cfg.lr);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.per_cert_samples = j.value("per_cert_samples", cfg.per_cert_samples);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.k_schedule = j.value("k_schedule", cfg.k_schedule);
  cfg.old_data_fraction = j.value("old_data_fraction", cfg.old_data_fraction);
  cfg.strict_alg2 = j.value("strict_alg2", cfg.strict_alg2);
  cfg.repair_broken = j.value("repair_broken", cfg.repair_broken);
  validate_config(cfg);
  return cfg;
}

std::string cert_outcome_name(CertOutcome o) {
  switch (o) {
    case CertOutcome::Untouched: return "untouched";
    case CertOutcome::Reverified: return "reverified";
    case CertOutcome::Clipped: return "clipped";
    case CertOutcome::RelaxedAndClipped: return "relaxed+clipped";
    case CertOutcome::Dropped: return "dropped";
  }
  return "?";
}

Json round_record_to_json(const RoundRecord& record) {
  Json certs = Json::array();
  for (const CertRecord& c : record.certificates) {
    Json jc{{"key", c.key}, {"outcome", cert_outcome_name(c.outcome)}};
    if (c.outcome == CertOutcome::RelaxedAndClipped) jc["k_used"] = c.k_used;
    if (c.bias_moves > 0) jc["bias_moves"] = c.bias_moves;
    if (!c.note.empty()) jc["note"] = c.note;
    certs.push_back(std::move(jc));
  }
  Json per_label = Json::object();
  Json per_label_counts = Json::object();
  for (std::size_t i = 0; i < record.labels.size(); ++i) {
    per_label[std::to_string(record.labels[i])] = record.per_label_accuracy[i];
    per_label_counts[std::to_string(record.labels[i])] = record.per_label_counts[i];
  }
  return Json{{"round", record.round},
              {"mode", record.mode},
              {"initial_certificates", record.initial_certificates},
              {"surviving", record.surviving()},
              {"surviving_keys", record.surviving_keys()},
              {"dropped_keys", record.dropped_keys()},
              {"certificates", std::move(certs)},
              {"accuracy", record.accuracy},
              {"per_label_accuracy", std::move(per_label)},
              {"per_label_counts", std::move(per_label_counts)},
              {"wall_time_s", record.wall_time_s}};
}

}  // namespace ccl
