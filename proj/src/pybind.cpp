// Python bindings for the core operations: model I/O, interval verification,
// certificate validation, augmentation, bias clipping/relaxation and the
// certified retraining loop.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ccl/scenario.hpp"

namespace py = pybind11;
using namespace ccl;

PYBIND11_MODULE(ccl_core, m) {
  m.doc() = "certified continual learning core";

  py::class_<Interval>(m, "Interval")
      .def(py::init<double, double>())
      .def_readwrite("lw", &Interval::lw)
      .def_readwrite("up", &Interval::up)
      .def("contains", &Interval::contains)
      .def("mid", &Interval::mid)
      .def("width", &Interval::width);

  py::class_<LayerBox>(m, "LayerBox")
      .def(py::init<Vector, Vector>())
      .def_readonly("lw", &LayerBox::lw)
      .def_readonly("up", &LayerBox::up)
      .def("size", &LayerBox::size)
      .def("contains", &LayerBox::contains);

  py::class_<Network>(m, "Network")
      .def_readonly("input_dim", &Network::input_dim)
      .def_property_readonly("output_dim", &Network::output_dim)
      .def("__repr__", [](const Network& n) {
        return "<Network " + std::to_string(n.input_dim) + "->" +
               std::to_string(n.output_dim()) + ", " + std::to_string(n.layers.size()) +
               " layers>";
      });

  py::class_<NotLabel>(m, "NotLabel").def(py::init<int>()).def_readwrite("label", &NotLabel::label);
  py::class_<IsLabel>(m, "IsLabel").def(py::init<int>()).def_readwrite("label", &IsLabel::label);

  py::class_<ReachabilityProperty>(m, "ReachabilityProperty")
      .def(py::init([](const LayerBox& pre, const PostCondition& post) {
        return ReachabilityProperty{pre, post};
      }))
      .def_readonly("pre", &ReachabilityProperty::pre);

  py::class_<RobustnessProperty>(m, "RobustnessProperty")
      .def(py::init([](const Vector& x0, int y0, double eps, std::optional<Interval> clamp) {
             RobustnessProperty p;
             p.x0 = x0;
             p.y0_label = y0;
             p.epsilon = eps;
             p.clamp = clamp;
             return p;
           }),
           py::arg("x0"), py::arg("y0_label"), py::arg("epsilon"),
           py::arg("clamp") = std::nullopt)
      .def_readonly("x0", &RobustnessProperty::x0)
      .def_readonly("y0_label", &RobustnessProperty::y0_label)
      .def_readonly("epsilon", &RobustnessProperty::epsilon);

  py::class_<FairnessProperty>(m, "FairnessProperty")
      .def(py::init([](const Vector& x, Index sensitive_index, std::vector<double> values,
                       double eps_other) {
             FairnessProperty p;
             p.x = x;
             p.sensitive_index = sensitive_index;
             p.sensitive_values = std::move(values);
             p.epsilon_other = eps_other;
             return p;
           }),
           py::arg("x"), py::arg("sensitive_index"), py::arg("sensitive_values"),
           py::arg("epsilon_other"));

  py::class_<Certificate>(m, "Certificate")
      .def_readonly("property_id", &Certificate::property_id)
      .def_readonly("variant_tag", &Certificate::variant_tag)
      .def_readonly("boxes", &Certificate::boxes)
      .def_property_readonly("key", &certificate_key);

  py::class_<VerifyResult>(m, "VerifyResult")
      .def_readonly("verified", &VerifyResult::verified)
      .def_readonly("certificates", &VerifyResult::certificates);

  py::enum_<SampleOrigin>(m, "SampleOrigin")
      .value("NewTask", SampleOrigin::NewTask)
      .value("OldTask", SampleOrigin::OldTask)
      .value("Synthesized", SampleOrigin::Synthesized);

  py::class_<LabeledSample>(m, "LabeledSample")
      .def(py::init([](const Vector& x, int label) {
             return LabeledSample{x, label, SampleOrigin::NewTask, {}};
           }),
           py::arg("input"), py::arg("label"))
      .def_readonly("input", &LabeledSample::input)
      .def_readonly("label", &LabeledSample::label)
      .def_readonly("origin", &LabeledSample::origin)
      .def_readonly("origin_property", &LabeledSample::origin_property);

  py::enum_<ClipStatus>(m, "ClipStatus")
      .value("Untouched", ClipStatus::Untouched)
      .value("Clipped", ClipStatus::Clipped)
      .value("Dropped", ClipStatus::Dropped);

  py::class_<CertClipRecord>(m, "CertClipRecord")
      .def_readonly("key", &CertClipRecord::key)
      .def_readonly("status", &CertClipRecord::status)
      .def_readonly("drop_reason", &CertClipRecord::drop_reason);

  py::class_<ClipOutcome>(m, "ClipOutcome")
      .def_readonly("per_certificate", &ClipOutcome::per_certificate)
      .def("surviving_keys", &ClipOutcome::surviving_keys);

  py::class_<InterpolantConstraint>(m, "InterpolantConstraint")
      .def_readonly("winner", &InterpolantConstraint::winner)
      .def_readonly("loser", &InterpolantConstraint::loser)
      .def_readonly("delta", &InterpolantConstraint::delta);

  py::class_<Interpolant>(m, "Interpolant")
      .def_readonly("constraints", &Interpolant::constraints);

  py::enum_<RepairStatus>(m, "RepairStatus")
      .value("Untouched", RepairStatus::Untouched)
      .value("Clipped", RepairStatus::Clipped)
      .value("RelaxedAndClipped", RepairStatus::RelaxedAndClipped)
      .value("Dropped", RepairStatus::Dropped);

  py::class_<RepairResult>(m, "RepairResult")
      .def_readonly("net", &RepairResult::net)
      .def_readonly("status", &RepairResult::status)
      .def_readonly("k_used", &RepairResult::k_used)
      .def_readonly("certificate", &RepairResult::certificate);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("per_cert_samples", &TrainConfig::per_cert_samples)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("k_schedule", &TrainConfig::k_schedule)
      .def_readwrite("old_data_fraction", &TrainConfig::old_data_fraction)
      .def_readwrite("strict_alg2", &TrainConfig::strict_alg2)
      .def_readwrite("repair_broken", &TrainConfig::repair_broken);

  py::class_<GrowSpec>(m, "GrowSpec")
      .def(py::init([](std::vector<int> hidden_add, int output_add, double init_scale) {
             GrowSpec g;
             g.hidden_add = std::move(hidden_add);
             g.output_add = output_add;
             g.init_scale = init_scale;
             return g;
           }),
           py::arg("hidden_add"), py::arg("output_add"), py::arg("init_scale") = 0.1);

  py::enum_<CertOutcome>(m, "CertOutcome")
      .value("Untouched", CertOutcome::Untouched)
      .value("Reverified", CertOutcome::Reverified)
      .value("Clipped", CertOutcome::Clipped)
      .value("RelaxedAndClipped", CertOutcome::RelaxedAndClipped)
      .value("Dropped", CertOutcome::Dropped);

  py::class_<CertRecord>(m, "CertRecord")
      .def_readonly("key", &CertRecord::key)
      .def_readonly("outcome", &CertRecord::outcome)
      .def_readonly("k_used", &CertRecord::k_used);

  py::class_<RoundRecord>(m, "RoundRecord")
      .def_readonly("initial_certificates", &RoundRecord::initial_certificates)
      .def_readonly("certificates", &RoundRecord::certificates)
      .def_readonly("accuracy", &RoundRecord::accuracy)
      .def("surviving", &RoundRecord::surviving)
      .def("surviving_keys", &RoundRecord::surviving_keys);

  py::class_<CclResult>(m, "CclResult")
      .def_readonly("net", &CclResult::net)
      .def_readonly("certificates", &CclResult::certificates)
      .def_readonly("record", &CclResult::record);

  m.def("random_network",
        [](Index input_dim, std::vector<Index> hidden, Index output_dim, std::uint64_t seed) {
          return random_network(input_dim, hidden, output_dim, seed);
        },
        py::arg("input_dim"), py::arg("hidden"), py::arg("output_dim"), py::arg("seed") = 0);
  m.def("load_network", &load_network);
  m.def("save_network", &save_network);
  m.def("forward", [](const Network& net, const Vector& x) { return forward(net, x).output(); });
  m.def("label", [](const Network& net, const Vector& x) {
    return label(forward(net, x).output());
  });
  m.def("grow", &grow, py::arg("net"), py::arg("hidden_add"), py::arg("output_add"),
        py::arg("init_scale"), py::arg("seed"));
  m.def("analyze", &analyze);
  m.def("verify", &verify, py::arg("net"), py::arg("property"), py::arg("property_id"),
        py::arg("default_clamp") = std::nullopt);
  m.def("validate_certificate", &validate_certificate);
  m.def("load_certificates", &load_certificates);
  m.def("save_certificates", &save_certificates);
  m.def("sample_box", &sample_box);
  m.def("augment", &augment, py::arg("net"), py::arg("certificates"), py::arg("per_cert"),
        py::arg("seed"));
  m.def("dist", &dist);
  m.def("clip", &clip, py::arg("net"), py::arg("certificates"), py::arg("strict_alg2") = false);
  m.def("interpolate", &interpolate);
  m.def("relax", &relax);
  m.def("repair", &repair, py::arg("net"), py::arg("broken"), py::arg("accepted"),
        py::arg("k_schedule"), py::arg("strict_alg2") = false);
  m.def("accuracy", [](const Network& net, const std::vector<LabeledSample>& data) {
    return accuracy(net, data);
  });
  m.def("sgd_train",
        [](const Network& net, const std::vector<LabeledSample>& data, const TrainConfig& cfg) {
          return sgd_train(net, data, cfg, {});
        });
  m.def("ccl_retrain",
        [](const Network& net, const std::vector<Certificate>& certs,
           const std::vector<LabeledSample>& new_data, const std::vector<LabeledSample>& old_data,
           std::optional<GrowSpec> grow_spec, const TrainConfig& cfg) {
          return ccl_retrain(net, certs, new_data, old_data, grow_spec, cfg, {});
        },
        py::arg("net"), py::arg("certificates"), py::arg("new_data"),
        py::arg("old_data") = std::vector<LabeledSample>{},
        py::arg("grow") = std::nullopt, py::arg("config") = TrainConfig{});
}
