#include "ccl/scenario.hpp"

#include "ccl/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ccl {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kTrainStreamBase = 2000;
constexpr std::uint64_t kReplayStreamBase = 5000;
constexpr std::uint64_t kSplitStream = 6000;

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Deterministic parallel map: results land by index, work is chunked over at
// most `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  const int workers = std::min<int>(threads, static_cast<int>(n));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

DatasetBundle load_dataset(const DatasetSpec& spec, std::uint64_t scenario_seed) {
  if (spec.format == "synthetic") return make_synthetic(spec.synthetic);
  if (spec.format == "idx") {
    DatasetBundle train = load_idx(spec.train_images, spec.train_labels_path);
    DatasetBundle test = load_idx(spec.test_images, spec.test_labels_path);
    train.test_inputs = std::move(test.train_inputs);
    train.test_labels = std::move(test.train_labels);
    return train;
  }
  if (spec.format == "csv") {
    DatasetBundle ds = load_csv(spec.train_csv, spec.label_column);
    if (!spec.test_csv.empty()) {
      DatasetBundle test = load_csv(spec.test_csv, spec.label_column);
      ds.test_inputs = std::move(test.train_inputs);
      ds.test_labels = std::move(test.train_labels);
    } else if (spec.test_fraction > 0) {
      Rng rng(derive_seed(scenario_seed, kSplitStream));
      std::vector<std::size_t> idx(ds.train_inputs.size());
      std::iota(idx.begin(), idx.end(), 0);
      rng.shuffle(idx);
      const std::size_t n_test =
          static_cast<std::size_t>(spec.test_fraction * static_cast<double>(idx.size()));
      std::vector<Vector> tr_x, te_x;
      std::vector<int> tr_y, te_y;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k < n_test) {
          te_x.push_back(std::move(ds.train_inputs[idx[k]]));
          te_y.push_back(ds.train_labels[idx[k]]);
        } else {
          tr_x.push_back(std::move(ds.train_inputs[idx[k]]));
          tr_y.push_back(ds.train_labels[idx[k]]);
        }
      }
      ds.train_inputs = std::move(tr_x);
      ds.train_labels = std::move(tr_y);
      ds.test_inputs = std::move(te_x);
      ds.test_labels = std::move(te_y);
    }
    return ds;
  }
  throw std::invalid_argument("dataset: unknown format '" + spec.format + "'");
}

// Mode switches layered over the scenario's TrainConfig.
TrainConfig mode_config(const TrainConfig& base, RunMode mode) {
  TrainConfig cfg = base;
  switch (mode) {
    case RunMode::Baseline:
    case RunMode::BaselineOD:
      cfg.alpha = 0;
      cfg.beta = 0;
      cfg.per_cert_samples = 0;
      cfg.repair_broken = false;
      break;
    case RunMode::BaselineDS:
      cfg.alpha = 0;
      cfg.beta = 0;
      cfg.repair_broken = false;
      break;
    case RunMode::Ccl:
    case RunMode::CclOD:
      break;
  }
  return cfg;
}

bool uses_old_data(RunMode mode) {
  return mode == RunMode::BaselineOD || mode == RunMode::CclOD;
}

struct Certification {
  std::vector<Certificate> certificates;
  std::size_t attempted = 0;
};

Certification certify(const Network& net, const DatasetBundle& ds, const PropertiesSpec& spec,
                      const std::vector<int>& group, const std::optional<Interval>& clamp) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < ds.test_inputs.size(); ++i)
    if (std::find(group.begin(), group.end(), ds.test_labels[i]) != group.end()) pool.push_back(i);
  Rng rng(spec.seed);
  rng.shuffle(pool);
  const std::size_t cap = std::min<std::size_t>(pool.size(), 10u * spec.count);

  std::vector<Property> props(cap);
  std::vector<std::string> ids(cap);
  for (std::size_t k = 0; k < cap; ++k) {
    const std::size_t i = pool[k];
    if (spec.kind == "robustness") {
      RobustnessProperty rob;
      rob.x0 = ds.test_inputs[i];
      rob.y0_label = label(forward(net, rob.x0).output());
      rob.epsilon = spec.epsilon;
      props[k] = rob;
    } else if (spec.kind == "fairness") {
      FairnessProperty fair;
      fair.x = ds.test_inputs[i];
      fair.sensitive_index = spec.sensitive_index;
      fair.sensitive_values = spec.sensitive_values;
      fair.epsilon_other = spec.epsilon_other;
      props[k] = fair;
    } else {
      throw std::invalid_argument("properties: unknown kind '" + spec.kind + "'");
    }
    ids[k] = "p" + std::to_string(i);
  }

  std::vector<VerifyResult> results(cap);
  parallel_for(cap, thread_budget(),
               [&](std::size_t k) { results[k] = verify(net, props[k], ids[k], clamp); });

  Certification out;
  for (std::size_t k = 0; k < cap; ++k) {
    out.attempted = k + 1;
    if (!results[k].verified) continue;
    for (Certificate& cert : results[k].certificates) out.certificates.push_back(std::move(cert));
    if (out.certificates.size() >= static_cast<std::size_t>(spec.count)) break;
  }
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

RunMode parse_mode(const std::string& name) {
  if (name == "baseline") return RunMode::Baseline;
  if (name == "baseline+ds") return RunMode::BaselineDS;
  if (name == "baseline+od") return RunMode::BaselineOD;
  if (name == "ccl") return RunMode::Ccl;
  if (name == "ccl+od") return RunMode::CclOD;
  throw std::invalid_argument("unknown mode '" + name +
                              "' (baseline, baseline+ds, baseline+od, ccl, ccl+od)");
}

std::string mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::Baseline: return "baseline";
    case RunMode::BaselineDS: return "baseline+ds";
    case RunMode::BaselineOD: return "baseline+od";
    case RunMode::Ccl: return "ccl";
    case RunMode::CclOD: return "ccl+od";
  }
  return "?";
}

int thread_budget() {
  const char* env = std::getenv("CCL_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 1 ? n : 1;
}

Scenario scenario_from_json(const Json& j) {
  Scenario sc;
  const Json& jd = j.at("dataset");
  sc.dataset.format = jd.at("format").get<std::string>();
  if (sc.dataset.format == "synthetic") {
    sc.dataset.synthetic.dim = jd.value("dim", sc.dataset.synthetic.dim);
    sc.dataset.synthetic.classes = jd.value("classes", sc.dataset.synthetic.classes);
    sc.dataset.synthetic.train_per_class =
        jd.value("train_per_class", sc.dataset.synthetic.train_per_class);
    sc.dataset.synthetic.test_per_class =
        jd.value("test_per_class", sc.dataset.synthetic.test_per_class);
    sc.dataset.synthetic.noise = jd.value("noise", sc.dataset.synthetic.noise);
    sc.dataset.synthetic.seed = jd.value("seed", sc.dataset.synthetic.seed);
  } else if (sc.dataset.format == "idx") {
    sc.dataset.train_images = jd.at("train_images").get<std::string>();
    sc.dataset.train_labels_path = jd.at("train_labels").get<std::string>();
    sc.dataset.test_images = jd.at("test_images").get<std::string>();
    sc.dataset.test_labels_path = jd.at("test_labels").get<std::string>();
  } else if (sc.dataset.format == "csv") {
    sc.dataset.train_csv = jd.at("train").get<std::string>();
    sc.dataset.test_csv = jd.value("test", std::string{});
    sc.dataset.label_column = jd.at("label_column").get<std::string>();
    sc.dataset.test_fraction = jd.value("test_fraction", sc.dataset.test_fraction);
  } else {
    throw std::invalid_argument("dataset: unknown format '" + sc.dataset.format + "'");
  }

  sc.task_stream = j.at("task_stream").get<std::vector<std::vector<int>>>();
  const Json& jp = j.at("properties");
  sc.properties.kind = jp.value("kind", sc.properties.kind);
  sc.properties.count = jp.value("count", sc.properties.count);
  sc.properties.epsilon = jp.value("epsilon", sc.properties.epsilon);
  sc.properties.seed = jp.value("seed", sc.properties.seed);
  sc.properties.sensitive_index = jp.value("sensitive_index", 0);
  if (jp.contains("sensitive_values"))
    sc.properties.sensitive_values = jp["sensitive_values"].get<std::vector<double>>();
  sc.properties.epsilon_other = jp.value("epsilon_other", 0.0);

  if (j.contains("init_hidden")) sc.init_hidden = j["init_hidden"].get<std::vector<Index>>();
  if (j.contains("grow")) {
    GrowSpec gs;
    gs.hidden_add = j["grow"].at("hidden_add").get<std::vector<int>>();
    gs.output_add = j["grow"].at("output_add").get<int>();
    gs.init_scale = j["grow"].value("init_scale", gs.init_scale);
    sc.grow = gs;
  }
  if (j.contains("train")) sc.train = config_from_json(j["train"]);
  if (j.contains("mode")) sc.mode = parse_mode(j["mode"].get<std::string>());
  sc.seed = j.value("seed", sc.seed);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  in >> j;
  return scenario_from_json(j);
}

double ScenarioReport::accuracy_over(std::size_t round, const std::vector<int>& labels) const {
  const RoundRecord& r = rounds.at(round);
  double hits = 0;
  double total = 0;
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    if (std::find(labels.begin(), labels.end(), r.labels[i]) == labels.end()) continue;
    hits += r.per_label_accuracy[i] * static_cast<double>(r.per_label_counts[i]);
    total += static_cast<double>(r.per_label_counts[i]);
  }
  return total > 0 ? hits / total : 0.0;
}

ScenarioReport run_scenario(const Scenario& scenario, const std::string& out_dir, bool quiet) {
  if (scenario.task_stream.empty()) throw std::invalid_argument("scenario: empty task stream");
  std::set<int> seen_labels;
  Index width = 0;
  for (const auto& group : scenario.task_stream) {
    if (group.empty()) throw std::invalid_argument("scenario: empty label group");
    for (int lab : group) {
      if (!seen_labels.insert(lab).second)
        throw std::invalid_argument("scenario: label " + std::to_string(lab) +
                                    " appears in two groups");
      if (lab < 0) throw std::invalid_argument("scenario: negative label");
    }
    width += static_cast<Index>(group.size());
  }
  if (static_cast<Index>(*seen_labels.rbegin()) + 1 != width)
    throw std::invalid_argument("scenario: label groups must cover 0..N-1 without gaps");

  const DatasetBundle ds = load_dataset(scenario.dataset, scenario.seed);
  if (ds.train_inputs.empty() || ds.test_inputs.empty())
    throw std::invalid_argument("scenario: dataset needs train and test samples");
  const int needed = *seen_labels.rbegin() + 1;
  if (ds.num_labels() < needed)
    throw std::invalid_argument("scenario: dataset has " + std::to_string(ds.num_labels()) +
                                " labels, task stream needs " + std::to_string(needed));
  const bool image_like = scenario.dataset.format != "csv";
  const std::optional<Interval> clamp =
      image_like ? std::optional<Interval>(Interval{0.0, 1.0}) : std::nullopt;

  std::filesystem::create_directories(out_dir);
  std::ofstream report_file(out_dir + "/report.jsonl");
  if (!report_file) throw std::runtime_error("cannot write " + out_dir + "/report.jsonl");

  ScenarioReport report;
  Network net;
  std::vector<Certificate> certs;
  std::vector<int> cumulative;

  for (std::size_t round = 0; round < scenario.task_stream.size(); ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<int>& group = scenario.task_stream[round];
    TrainConfig cfg = mode_config(scenario.train, scenario.mode);
    cfg.seed = derive_seed(scenario.seed, kTrainStreamBase + round);

    RoundRecord record;
    if (round == 0) {
      const Index out_width = static_cast<Index>(group.size());
      net = random_network(ds.input_dim(), scenario.init_hidden, out_width,
                           derive_seed(scenario.seed, kInitStream));
      const auto train_samples =
          collect_samples(ds.train_inputs, ds.train_labels, group, SampleOrigin::NewTask);
      const auto eval_samples =
          collect_samples(ds.test_inputs, ds.test_labels, group, SampleOrigin::NewTask);
      net = sgd_train(net, train_samples, cfg, eval_samples);

      const Certification certification =
          certify(net, ds, scenario.properties, group, clamp);
      certs = certification.certificates;
      record.initial_certificates = certs.size();
      for (const Certificate& cert : certs) {
        CertRecord cr;
        cr.key = certificate_key(cert);
        cr.outcome = CertOutcome::Untouched;
        cr.note = "initial";
        record.certificates.push_back(std::move(cr));
      }
      record.accuracy = accuracy(net, eval_samples);
      std::map<int, std::pair<std::size_t, std::size_t>> per_label;
      for (const LabeledSample& s : eval_samples) {
        auto& [hits, count] = per_label[s.label];
        ++count;
        if (label(forward(net, s.input).output()) == s.label) ++hits;
      }
      for (const auto& [lab, hc] : per_label) {
        record.labels.push_back(lab);
        record.per_label_accuracy.push_back(static_cast<double>(hc.first) /
                                            static_cast<double>(hc.second));
        record.per_label_counts.push_back(hc.second);
      }
    } else {
      const auto new_samples =
          collect_samples(ds.train_inputs, ds.train_labels, group, SampleOrigin::NewTask);
      std::vector<LabeledSample> old_samples;
      if (uses_old_data(scenario.mode) && cfg.old_data_fraction > 0) {
        // stratified seeded replay subset of every earlier round's train data
        Rng replay_rng(derive_seed(scenario.seed, kReplayStreamBase + round));
        for (int lab : cumulative) {
          std::vector<std::size_t> idx;
          for (std::size_t i = 0; i < ds.train_inputs.size(); ++i)
            if (ds.train_labels[i] == lab) idx.push_back(i);
          replay_rng.shuffle(idx);
          const std::size_t take = static_cast<std::size_t>(
              cfg.old_data_fraction * static_cast<double>(idx.size()) + 0.5);
          for (std::size_t k = 0; k < take && k < idx.size(); ++k)
            old_samples.push_back(
                {ds.train_inputs[idx[k]], lab, SampleOrigin::OldTask, {}});
        }
      }
      std::vector<int> eval_labels = cumulative;
      eval_labels.insert(eval_labels.end(), group.begin(), group.end());
      const auto eval_samples = collect_samples(ds.test_inputs, ds.test_labels,
                                                sorted(eval_labels), SampleOrigin::NewTask);
      CclResult result = ccl_retrain(net, certs, new_samples, old_samples, scenario.grow, cfg,
                                     eval_samples);
      net = std::move(result.net);
      certs = std::move(result.certificates);
      record = std::move(result.record);
    }

    record.round = static_cast<int>(round);
    record.mode = mode_name(scenario.mode);
    record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cumulative.insert(cumulative.end(), group.begin(), group.end());

    save_network(net, out_dir + "/round_" + std::to_string(round) + "_model.json");
    save_certificates(certs, out_dir + "/round_" + std::to_string(round) + "_certs.json");
    report_file << round_record_to_json(record).dump() << '\n';
    report.rounds.push_back(std::move(record));
  }
  report_file.close();

  if (!quiet) std::fputs(render_report_table(report).c_str(), stdout);
  return report;
}

std::string render_report_table(const ScenarioReport& report) {
  std::ostringstream out;
  out << "Round  Mode         Cert.    Acc.     Wall(s)  Per-label accuracy\n";
  for (const RoundRecord& r : report.rounds) {
    char head[128];
    std::snprintf(head, sizeof(head), "%-6d %-12s %zu/%-6zu %-8s %-8s", r.round, r.mode.c_str(),
                  r.surviving(), r.initial_certificates,
                  fmt("%.2f%%", 100.0 * r.accuracy).c_str(), fmt("%.1f", r.wall_time_s).c_str());
    out << head;
    for (std::size_t i = 0; i < r.labels.size(); ++i)
      out << ' ' << r.labels[i] << ':' << fmt("%.1f%%", 100.0 * r.per_label_accuracy[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace ccl
