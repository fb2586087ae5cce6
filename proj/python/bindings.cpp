#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dynembed/config.hpp"
#include "dynembed/errors.hpp"
#include "dynembed/graph.hpp"
#include "dynembed/harness.hpp"
#include "dynembed/metrics.hpp"
#include "dynembed/models.hpp"
#include "dynembed/sbm.hpp"
#include "dynembed/svd.hpp"

namespace py = pybind11;
using namespace dynembed;

namespace {

graph::Snapshot snapshot_from_edges(int n, const std::vector<std::tuple<int, int, double>>& edges, bool directed) {
  std::vector<graph::Edge> out;
  out.reserve(edges.size());
  for (const auto& [u, v, w] : edges) out.push_back({u, v, w});
  return graph::Snapshot(n, std::move(out), directed);
}

std::vector<std::tuple<int, int, double>> edges_of(const graph::Snapshot& s) {
  std::vector<std::tuple<int, int, double>> out;
  for (const auto& e : s.edges()) out.emplace_back(e.u, e.v, e.w);
  return out;
}

harness::ExperimentConfig config_from_string(const std::string& text) {
  return harness::config_from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_dynembed, m) {
  m.doc() = "Dynamic graph embedding: models, SVD baselines, metrics and experiment harness";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<graph::Snapshot>(m, "Snapshot")
      .def(py::init(&snapshot_from_edges), py::arg("num_nodes"), py::arg("edges"), py::arg("directed") = false)
      .def_property_readonly("num_nodes", &graph::Snapshot::num_nodes)
      .def_property_readonly("directed", &graph::Snapshot::directed)
      .def_property_readonly("num_entries", &graph::Snapshot::num_entries)
      .def("edges", &edges_of)
      .def("adjacency", [](const graph::Snapshot& s) { return graph::materialize_adjacency(s); })
      .def("__len__", &graph::Snapshot::num_edges)
      .def("__eq__", [](const graph::Snapshot& a, const graph::Snapshot& b) { return a == b; });

  py::class_<graph::DynamicGraph>(m, "DynamicGraph")
      .def(py::init<std::vector<graph::Snapshot>>(), py::arg("snapshots"))
      .def_property_readonly("num_nodes", &graph::DynamicGraph::num_nodes)
      .def_property_readonly("num_steps", &graph::DynamicGraph::num_steps)
      .def_property_readonly("directed", &graph::DynamicGraph::directed)
      .def("snapshot", &graph::DynamicGraph::snapshot, py::arg("t"))
      .def("adjacency", [](const graph::DynamicGraph& g, int t) { return Matrix(g.adjacency(t).toDense()); },
           py::arg("t"), "Dense normalized adjacency of step t")
      .def("__len__", &graph::DynamicGraph::num_steps);

  m.def("load_snapshots", &graph::load_snapshots, py::arg("path"));
  m.def("save_snapshots", &graph::save_snapshots, py::arg("graph"), py::arg("path"));

  m.def(
      "generate_sbm",
      [](const std::string& scenario, std::uint64_t seed, int steps, std::vector<int> block_sizes) {
        sbm::SbmConfig cfg;
        if (scenario == "shift") {
          cfg = sbm::shift_config(seed);
        } else if (scenario == "diminish") {
          cfg = sbm::diminish_config(seed);
        } else {
          throw ArgumentError("scenario: expected 'shift' or 'diminish'");
        }
        cfg.steps = steps;
        if (!block_sizes.empty()) cfg.block_sizes = std::move(block_sizes);
        cfg.validate();
        auto g = sbm::generate_dynamic(cfg);
        return py::make_tuple(g.graph, g.labels, g.migrants);
      },
      py::arg("scenario") = "diminish", py::arg("seed") = 0, py::arg("steps") = 10,
      py::arg("block_sizes") = std::vector<int>{},
      "Returns (graph, labels per step, migrants per step).");

  m.def(
      "generate_static_sbm",
      [](std::vector<int> block_sizes, double p_in, double p_cross, std::uint64_t seed) {
        auto s = sbm::generate_static(block_sizes, p_in, p_cross, seed);
        return py::make_tuple(s.snapshot, s.labels);
      },
      py::arg("block_sizes"), py::arg("p_in"), py::arg("p_cross"), py::arg("seed") = 0);

  m.def(
      "map_score",
      [](const Matrix& scores, const graph::Snapshot& gt, std::optional<std::vector<int>> nodes) {
        std::vector<int> ids = nodes.value_or(std::vector<int>{});
        if (!nodes) {
          for (int i = 0; i < scores.rows(); ++i) ids.push_back(i);
        }
        auto r = metrics::map_score(scores, gt, ids);
        py::dict precision;
        for (std::size_t i = 0; i < metrics::kPrecisionKs.size(); ++i) precision[py::int_(metrics::kPrecisionKs[i])] = r.precision[i];
        return py::dict(py::arg("map") = r.map, py::arg("node_ap") = r.node_ap, py::arg("excluded") = r.excluded,
                        py::arg("precision_at_k") = precision);
      },
      py::arg("scores"), py::arg("ground_truth"), py::arg("nodes") = py::none());

  m.def(
      "precision_at_k",
      [](const Matrix& scores, const graph::Snapshot& gt, int node, int k) {
        const auto masks = metrics::ground_truth(gt);
        return metrics::precision_at_k(metrics::rank_candidates(scores, node), masks.at(node), k);
      },
      py::arg("scores"), py::arg("ground_truth"), py::arg("node"), py::arg("k"));

  py::class_<svd::SvdState>(m, "SvdState")
      .def_readonly("u", &svd::SvdState::u)
      .def_readonly("s", &svd::SvdState::s)
      .def_readonly("v", &svd::SvdState::v)
      .def_readonly("error_at_last_rerun", &svd::SvdState::error_at_last_rerun)
      .def_readonly("steps_since_rerun", &svd::SvdState::steps_since_rerun)
      .def_readonly("rerun_count", &svd::SvdState::rerun_count)
      .def("reconstruction", &svd::SvdState::reconstruction);

  m.def("optimal_svd", &svd::optimal_svd, py::arg("a"), py::arg("d"));
  m.def("inc_svd_update", py::overload_cast<const svd::SvdState&, const Matrix&>(&svd::inc_svd_update),
        py::arg("state"), py::arg("new_target"));
  m.def("rerun_svd_step", &svd::rerun_svd_step, py::arg("state"), py::arg("a"), py::arg("theta"));
  m.def("reconstruction_error", &svd::reconstruction_error, py::arg("state"), py::arg("a"));
  m.def("svd_scores", &svd::svd_scores, py::arg("state"));

  py::class_<models::Model>(m, "Model")
      .def_property_readonly("kind", [](const models::Model& model) { return models::to_string(model.spec().kind); })
      .def_property_readonly("num_nodes", [](const models::Model& model) { return model.spec().n; })
      .def_property_readonly("lookback", [](const models::Model& model) { return model.spec().lookback; })
      .def_property_readonly("embed_dim", [](const models::Model& model) { return model.spec().embed_dim; })
      .def("embed", py::overload_cast<const models::Model&, const graph::DynamicGraph&, int>(&models::embed),
           py::arg("graph"), py::arg("t"))
      .def("predict_next",
           py::overload_cast<const models::Model&, const graph::DynamicGraph&, int>(&models::predict_next),
           py::arg("graph"), py::arg("t"))
      .def("save", [](const models::Model& model, const std::filesystem::path& p) { models::save_checkpoint(model, p); });
  m.def("load_model", &models::load_checkpoint, py::arg("path"));

  m.def(
      "_run_experiment",
      [](const std::string& config_json, std::optional<std::filesystem::path> out_dir) {
        const auto cfg = config_from_string(config_json);
        harness::RunResult r;
        harness::Dataset data;
        {
          py::gil_scoped_release release;
          data = harness::load_dataset(cfg);
          r = harness::run_experiment(cfg, data.graph);
          if (out_dir) harness::write_run_outputs(cfg, data, r, *out_dir);
        }
        std::optional<models::Model> model = std::move(r.model);
        return py::make_tuple(harness::report_json(r).dump(), model);
      },
      py::arg("config_json"), py::arg("out_dir") = py::none());

  m.def(
      "_sweep",
      [](const std::string& config_json, const std::string& axis, std::vector<int> lookbacks,
         std::optional<std::filesystem::path> out_dir) {
        const auto cfg = config_from_string(config_json);
        py::gil_scoped_release release;
        const auto data = harness::load_dataset(cfg);
        harness::SweepResult s;
        if (axis == "lookback") {
          s = harness::sweep_lookback(cfg, data.graph, lookbacks.empty() ? cfg.lookbacks : lookbacks);
        } else if (axis == "history") {
          s = harness::sweep_history(cfg, data.graph);
        } else {
          throw ArgumentError("axis: expected 'lookback' or 'history'");
        }
        if (out_dir) harness::write_sweep_outputs(cfg, data, s, *out_dir);
        std::ostringstream csv;
        harness::write_sweep_csv(s, csv);
        return csv.str();
      },
      py::arg("config_json"), py::arg("axis"), py::arg("lookbacks") = std::vector<int>{},
      py::arg("out_dir") = py::none());

  m.def(
      "_normalize_config",
      [](const std::string& config_json) { return harness::config_to_json(config_from_string(config_json)).dump(); },
      py::arg("config_json"));

  m.def(
      "_export_embeddings",
      [](const std::filesystem::path& checkpoint, const std::string& config_json, int t,
         const std::filesystem::path& path) {
        harness::export_embeddings(checkpoint, config_from_string(config_json), t, path);
      },
      py::arg("checkpoint"), py::arg("config_json"), py::arg("t"), py::arg("path"));
}
