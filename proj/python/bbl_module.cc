// Copyright 2026 The bbl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bbl/cli_config.h"
#include "bbl/datagen.h"
#include "bbl/debias.h"
#include "bbl/exact_info.h"
#include "bbl/harness.h"
#include "bbl/mi_estim.h"
#include "bbl/stats.h"

namespace py = pybind11;

namespace {

using namespace bbl;

info::Axis AxisFromName(const std::string& name) {
  if (name == "z") return info::Axis::kZ;
  if (name == "y") return info::Axis::kY;
  if (name == "a") return info::Axis::kA;
  throw InvalidArgument("axis must be \"z\", \"y\" or \"a\", got \"" + name + "\"");
}

py::dict EstimateDict(const mi::MIEstimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["estimator"] = mi::ToString(e.estimator);
  d["n"] = e.n_samples;
  d["diagnostics"] = e.diagnostics;
  return d;
}

py::dict DatasetDict(const data::LabeledDataset& ds) {
  py::dict d;
  d["features"] = ds.features;
  d["targets"] = ds.targets;
  d["attributes"] = ds.attributes;
  d["target_card"] = ds.target_card;
  d["attribute_card"] = ds.attribute_card;
  d["provenance"] = ds.provenance;
  return d;
}

data::LabeledDataset MakeDataset(const Eigen::MatrixXd& x, std::vector<int> y,
                                 std::vector<int> a) {
  data::LabeledDataset ds;
  ds.features = x;
  ds.targets = std::move(y);
  ds.attributes = std::move(a);
  ds.target_card = 1 + *std::max_element(ds.targets.begin(), ds.targets.end());
  ds.attribute_card = 1 + *std::max_element(ds.attributes.begin(), ds.attributes.end());
  ds.target_card = std::max(ds.target_card, 2);
  ds.attribute_card = std::max(ds.attribute_card, 2);
  ds.Validate();
  return ds;
}

}  // namespace

PYBIND11_MODULE(bbl, m) {
  m.doc() = "Exact and estimated information quantities, debiasing baselines and "
            "breaking-point statistics";

  py::class_<info::JointPMF>(m, "JointPMF")
      .def(py::init([](std::array<int, 3> sizes, std::vector<double> probs) {
             return info::JointPMF(sizes, std::move(probs));
           }),
           py::arg("sizes"), py::arg("probs"))
      .def_static("from_counts",
                  [](std::array<int, 3> sizes, std::vector<double> counts) {
                    return info::JointPMF::FromCounts(sizes, counts);
                  })
      .def_property_readonly("sizes", &info::JointPMF::sizes)
      .def_property_readonly("probs", [](const info::JointPMF& j) {
        return std::vector<double>(j.probs().begin(), j.probs().end());
      })
      .def("at", &info::JointPMF::at);

  m.def("mutual_information", [](const info::JointPMF& j, const std::string& a,
                                 const std::string& b) {
    return info::mutual_information(j, AxisFromName(a), AxisFromName(b));
  });
  m.def("conditional_entropy", [](const info::JointPMF& j, const std::string& t,
                                  const std::string& g) {
    return info::conditional_entropy(j, AxisFromName(t), AxisFromName(g));
  });
  m.def("conditional_mi", [](const info::JointPMF& j, const std::string& a,
                             const std::string& b, const std::string& g) {
    return info::conditional_mi(j, AxisFromName(a), AxisFromName(b), AxisFromName(g));
  });
  m.def("interaction_information", &info::interaction_information);
  m.def("bound_margin", [](const info::JointPMF& j) {
    const auto t = info::bound_margin(j);
    py::dict d;
    d["izy"] = t.izy;
    d["iza"] = t.iza;
    d["hya"] = t.hya;
    d["margin"] = t.margin;
    return d;
  });
  m.def("strong_bound_margin", &info::strong_bound_margin);
  m.def("random_joint", [](std::array<int, 3> sizes, double concentration, std::uint64_t seed) {
    return info::random_joint(sizes, concentration, seed);
  }, py::arg("sizes"), py::arg("concentration") = 1.0, py::arg("seed") = 0);
  m.def("extreme_bias_joint", [](std::vector<double> pz, std::vector<double> pa,
                                 std::vector<int> g, int y_size) {
    return info::extreme_bias_joint(pz, pa, g, y_size);
  });
  m.def("binary_entropy", &info::binary_entropy);

  m.def("plugin_mi", [](std::vector<int> x, std::vector<int> y) {
    return EstimateDict(mi::plugin_mi(x, y));
  });
  m.def("binned_mi", [](const Eigen::MatrixXd& z, std::vector<int> labels, int bins) {
    return EstimateDict(mi::binned_mi({z, std::move(labels)}, bins));
  }, py::arg("z"), py::arg("labels"), py::arg("bins") = 8);
  m.def("knn_mi", [](const Eigen::MatrixXd& z, std::vector<int> labels, int k) {
    return EstimateDict(mi::knn_mi({z, std::move(labels)}, k));
  }, py::arg("z"), py::arg("labels"), py::arg("k") = 5);
  m.def("neural_dv_mi", [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int iterations,
                           std::uint64_t seed) {
    mi::DVConfig cfg;
    cfg.iterations = iterations;
    cfg.seed = seed;
    mi::MIEstimate est;
    {
      py::gil_scoped_release release;
      est = mi::neural_dv_mi(x, y, cfg);
    }
    return EstimateDict(est);
  }, py::arg("x"), py::arg("y"), py::arg("iterations") = 2000, py::arg("seed") = 0);

  m.def("gen_gaussian_biased", [](long n, double q, std::uint64_t seed) {
    return DatasetDict(data::gen_gaussian_biased(n, q, {}, seed));
  }, py::arg("n"), py::arg("agreement_prob"), py::arg("seed") = 0);
  m.def("empirical_hya", [](std::vector<int> y, std::vector<int> a) {
    return data::empirical_hya(y, a);
  });

  py::class_<debias::TrainedModel>(m, "TrainedModel")
      .def_property_readonly("method",
                             [](const debias::TrainedModel& t) { return debias::ToString(t.method); })
      .def_readonly("feature_dim", &debias::TrainedModel::feature_dim)
      .def_property_readonly("epochs", [](const debias::TrainedModel& t) { return t.log.size(); })
      .def("extract_features", [](const debias::TrainedModel& t, const Eigen::MatrixXd& x) {
        return debias::extract_features(t, x);
      })
      .def("predict", [](const debias::TrainedModel& t, const Eigen::MatrixXd& x) {
        return debias::predict(t, x);
      })
      .def("to_json", [](const debias::TrainedModel& t) { return t.ToJson().dump(); });

  m.def("train", [](const std::string& method, const Eigen::MatrixXd& x, std::vector<int> y,
                    std::vector<int> a, int epochs, double lambda, std::uint64_t seed) {
    const auto meth = debias::MethodFromString(method);
    auto cfg = debias::DefaultConfig(meth);
    cfg.base.epochs = epochs;
    if (lambda >= 0.0) cfg.lambda = lambda;
    cfg.base.seed = seed;
    const auto ds = MakeDataset(x, std::move(y), std::move(a));
    py::gil_scoped_release release;
    return debias::train(meth, ds, cfg);
  }, py::arg("method"), py::arg("features"), py::arg("targets"), py::arg("attributes"),
        py::arg("epochs") = 20, py::arg("lam") = -1.0, py::arg("seed") = 0);

  m.def("ks_one_sided", [](std::vector<double> method, std::vector<double> baseline) {
    const auto r = stats::ks_one_sided(method, baseline);
    return py::make_tuple(r.d, r.p);
  });
  m.def("ks_permutation_p", [](std::vector<double> method, std::vector<double> baseline,
                               long resamples, std::uint64_t seed) {
    return stats::ks_permutation_p(method, baseline, resamples, seed);
  }, py::arg("method"), py::arg("baseline"), py::arg("resamples") = stats::kDefaultResamples,
        py::arg("seed") = 0);
  m.def("detect_breaking_point", [](std::vector<double> grid, std::vector<double> p,
                                    double alpha) {
    return stats::detect_breaking_point(grid, p, alpha);
  }, py::arg("grid"), py::arg("p_values"), py::arg("alpha") = stats::kDefaultAlpha);

  m.def("run_sweep", [](const std::string& ini_text) {
    const auto cfg = cli::ParseConfig(ini_text);
    harness::SweepResult r;
    {
      py::gil_scoped_release release;
      r = harness::run_sweep(cfg.sweep);
    }
    return r.ToJson().dump();
  }, py::arg("config_text"), "Runs a sweep from INI text and returns the result as JSON text.");
  m.def("oracle_corpus", [](long size, std::uint64_t seed, bool proposition1) {
    return harness::run_oracle_corpus(size, seed, proposition1).ToJson().dump();
  }, py::arg("size"), py::arg("seed") = 0, py::arg("proposition1") = false);
}
