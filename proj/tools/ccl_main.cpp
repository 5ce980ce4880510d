// Command-line front end: scenario runs, one-off verification, certificate
// validation, sound bias clipping, augmentation dumps, and feasibility
// inspection, all over the JSON model/certificate formats.
#include <CLI11.hpp>

#include "ccl/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace {

using namespace ccl;

struct NamedProperty {
  std::string id;
  Property property;
};

struct PropertyFile {
  std::vector<NamedProperty> properties;
  std::optional<Interval> clamp;
};

PropertyFile load_properties(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  in >> j;
  PropertyFile out;
  if (j.contains("clamp"))
    out.clamp = Interval{j["clamp"].at("lw").get<double>(), j["clamp"].at("up").get<double>()};
  for (const Json& jp : j.at("properties"))
    out.properties.push_back({jp.at("id").get<std::string>(), property_from_json(jp.at("property"))});
  return out;
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const std::string& mode, std::int64_t seed, bool quiet) {
  Scenario sc = load_scenario(scenario_path);
  if (!mode.empty()) sc.mode = parse_mode(mode);
  if (seed >= 0) sc.seed = static_cast<std::uint64_t>(seed);
  run_scenario(sc, out_dir, quiet);
  return 0;
}

int cmd_verify(const std::string& model_path, const std::string& props_path,
               const std::string& out_path) {
  const Network net = load_network(model_path);
  const PropertyFile pf = load_properties(props_path);
  std::vector<Certificate> certs;
  std::size_t verified = 0;
  for (const NamedProperty& np : pf.properties) {
    VerifyResult res = verify(net, np.property, np.id, pf.clamp);
    std::printf("%-24s %s\n", np.id.c_str(), res.verified ? "verified" : "not verified");
    if (res.verified) {
      ++verified;
      for (Certificate& c : res.certificates) certs.push_back(std::move(c));
    }
  }
  save_certificates(certs, out_path);
  std::printf("%zu/%zu properties verified; %zu certificates -> %s\n", verified,
              pf.properties.size(), certs.size(), out_path.c_str());
  return 0;
}

int cmd_validate(const std::string& model_path, const std::string& certs_path) {
  const Network net = load_network(model_path);
  const std::vector<Certificate> certs = load_certificates(certs_path);
  std::size_t ok = 0;
  for (const Certificate& cert : certs) {
    const bool valid = validate_certificate(net, cert);
    std::printf("%-24s %s\n", certificate_key(cert).c_str(), valid ? "valid" : "INVALID");
    if (valid) ++ok;
  }
  std::printf("%zu/%zu certificates valid\n", ok, certs.size());
  return ok == certs.size() ? 0 : 1;
}

int cmd_clip(const std::string& model_path, const std::string& certs_path,
             const std::string& out_path, bool strict) {
  const Network net = load_network(model_path);
  const std::vector<Certificate> certs = load_certificates(certs_path);
  const auto [clipped, outcome] = clip(net, certs, strict);
  for (const CertClipRecord& rec : outcome.per_certificate) {
    const char* status = rec.status == ClipStatus::Untouched ? "untouched"
                         : rec.status == ClipStatus::Clipped ? "clipped"
                                                             : "dropped";
    std::printf("%-24s %-9s", rec.key.c_str(), status);
    if (rec.status == ClipStatus::Clipped)
      std::printf(" (%zu bias moves)", rec.deltas.size());
    if (rec.status == ClipStatus::Dropped) std::printf(" %s", rec.drop_reason.c_str());
    std::printf("\n");
  }
  save_network(clipped, out_path);
  std::printf("%zu/%zu certificates kept; clipped model -> %s\n",
              outcome.surviving_keys().size(), certs.size(), out_path.c_str());
  return 0;
}

int cmd_augment(const std::string& model_path, const std::string& certs_path, int per_cert,
                const std::string& out_path, std::uint64_t seed) {
  const Network net = load_network(model_path);
  const std::vector<Certificate> certs = load_certificates(certs_path);
  const std::vector<LabeledSample> samples = augment(net, certs, per_cert, seed);
  Json rows = Json::array();
  for (const LabeledSample& s : samples) {
    Json row;
    row["input"] = std::vector<double>(s.input.data(), s.input.data() + s.input.size());
    row["label"] = s.label;
    row["property"] = s.origin_property;
    rows.push_back(std::move(row));
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << Json{{"samples", std::move(rows)}}.dump(1, '\t') << '\n';
  std::printf("%zu synthesized samples -> %s\n", samples.size(), out_path.c_str());
  return 0;
}

int cmd_feasibility(const std::string& model_path, const std::string& certs_path, int layer) {
  const Network net = load_network(model_path);
  const std::vector<Certificate> certs = load_certificates(certs_path);
  const std::vector<NeuronFeasibility> rows = feasibility_intervals(net, certs, layer);
  std::printf("layer neuron constrained window\n");
  for (const NeuronFeasibility& nf : rows) {
    if (!nf.constrained) {
      std::printf("%5zu %6td        no (-inf, +inf)\n", nf.layer, nf.neuron);
    } else {
      std::printf("%5zu %6td       yes [%.17g, %.17g] %s\n", nf.layer, nf.neuron, nf.max_lw,
                  nf.min_up, nf.feasible() ? "feasible" : "INFEASIBLE");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified continual learning toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, model_path, certs_path, props_path, mode;
  std::int64_t seed = -1;
  std::uint64_t useed = 0;
  int per_cert = 10;
  int layer = -1;
  bool quiet = false;
  bool strict = false;

  CLI::App* run = app.add_subcommand("run", "run a continual-learning scenario");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_path, "output directory")->required();
  run->add_option("--mode", mode, "override mode (baseline, baseline+ds, baseline+od, ccl, ccl+od)");
  run->add_option("--seed", seed, "override scenario seed");
  run->add_flag("--quiet", quiet, "suppress the stdout table");

  CLI::App* ver = app.add_subcommand("verify", "verify properties and emit certificates");
  ver->add_option("--model", model_path, "model JSON file")->required();
  ver->add_option("--props", props_path, "properties JSON file")->required();
  ver->add_option("--out", out_path, "certificates output file")->required();

  CLI::App* val = app.add_subcommand("validate-certs",
                                     "validate certificates against a model (exit 1 on failure)");
  val->add_option("--model", model_path, "model JSON file")->required();
  val->add_option("--certs", certs_path, "certificates JSON file")->required();

  CLI::App* clip_cmd = app.add_subcommand("clip", "clip model biases to restore certificates");
  clip_cmd->add_option("--model", model_path, "model JSON file")->required();
  clip_cmd->add_option("--certs", certs_path, "certificates JSON file")->required();
  clip_cmd->add_option("--out", out_path, "clipped model output file")->required();
  clip_cmd->add_flag("--strict", strict, "always centre biases in their feasible window");

  CLI::App* aug = app.add_subcommand("augment-dump", "sample labelled points from certificates");
  aug->add_option("--model", model_path, "model JSON file")->required();
  aug->add_option("--certs", certs_path, "certificates JSON file")->required();
  aug->add_option("--n", per_cert, "samples per certificate")->required();
  aug->add_option("--out", out_path, "samples output file")->required();
  aug->add_option("--seed", useed, "sampling seed");

  CLI::App* feas = app.add_subcommand("feasibility", "print per-neuron bias windows");
  feas->add_option("--model", model_path, "model JSON file")->required();
  feas->add_option("--certs", certs_path, "certificates JSON file")->required();
  feas->add_option("--layer", layer, "affine layer index")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(scenario_path, out_path, mode, seed, quiet);
    if (ver->parsed()) return cmd_verify(model_path, props_path, out_path);
    if (val->parsed()) return cmd_validate(model_path, certs_path);
    if (clip_cmd->parsed()) return cmd_clip(model_path, certs_path, out_path, strict);
    if (aug->parsed()) return cmd_augment(model_path, certs_path, per_cert, out_path, useed);
    if (feas->parsed()) return cmd_feasibility(model_path, certs_path, layer);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
