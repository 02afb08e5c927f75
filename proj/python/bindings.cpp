#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ettckge/checkpoint.hpp"
#include "ettckge/config.hpp"
#include "ettckge/dataset.hpp"
#include "ettckge/distill.hpp"
#include "ettckge/eval.hpp"
#include "ettckge/gradcheck.hpp"
#include "ettckge/report.hpp"
#include "ettckge/scoring.hpp"
#include "ettckge/tokens.hpp"
#include "ettckge/trainer.hpp"

namespace py = pybind11;
using namespace ettckge;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix<double> to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  Matrix<double> m(std::size_t(a.shape(0)), std::size_t(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

Array from_matrix(const Matrix<double>& m) {
  Array a({py::ssize_t(m.rows()), py::ssize_t(m.cols())});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

std::vector<Triple> to_triples(const std::vector<std::tuple<Id, Id, Id>>& raw) {
  std::vector<Triple> out;
  out.reserve(raw.size());
  for (const auto& [h, r, t] : raw) out.push_back({h, r, t});
  return out;
}

TrainConfig config_from_dict(const py::dict& d) {
  TrainConfig cfg;
  nlohmann::json j;
  for (auto item : d) {
    const std::string key = py::cast<std::string>(item.first);
    if (py::isinstance<py::bool_>(item.second)) j[key] = py::cast<bool>(item.second);
    else if (py::isinstance<py::int_>(item.second)) j[key] = py::cast<std::int64_t>(item.second);
    else if (py::isinstance<py::float_>(item.second)) j[key] = py::cast<double>(item.second);
    else j[key] = py::cast<std::string>(item.second);
  }
  cfg.merge_json(j);
  cfg.validate();
  return cfg;
}

py::dict eval_to_dict(const EvalResult& e) {
  py::dict d;
  d["mrr"] = e.mrr;
  d["hits1"] = e.hits1;
  d["hits10"] = e.hits10;
  d["query_count"] = e.query_count;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "continual knowledge-graph embedding with task-driven tokens";
  m.attr("__version__") = kVersion;

  // translators run newest-first, so the base class goes in before the
  // subclass or it would shadow it
  py::register_exception<Error>(m, "EttckgeError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def(
      "transe_score",
      [](const std::vector<double>& h, const std::vector<double>& r,
         const std::vector<double>& t) {
        return transe_score<double>(h, r, t);
      },
      py::arg("h"), py::arg("r"), py::arg("t"),
      "Squared L2 norm of h + r - t; lower is better.");

  m.def(
      "margin_loss",
      [](const std::vector<double>& pos, const std::vector<double>& neg, double gamma) {
        return margin_loss<double>(pos, neg, gamma);
      },
      py::arg("pos_scores"), py::arg("neg_scores"), py::arg("gamma"));

  m.def(
      "compute_mask",
      [](const Array& tokens, const Array& table) {
        return from_matrix(compute_mask(to_matrix(tokens), to_matrix(table)));
      },
      py::arg("tokens"), py::arg("table"),
      "Soft importance mask sigmoid(Z @ E.T), shape (T, N).");

  m.def(
      "masked_embeddings",
      [](const Array& mask, const Array& table) {
        return from_matrix(masked_embeddings(to_matrix(mask), to_matrix(table)));
      },
      py::arg("mask"), py::arg("table"));

  m.def(
      "diversity_loss",
      [](const Array& mask) { return diversity_loss(to_matrix(mask)); },
      py::arg("mask"));

  m.def(
      "aligned_mask",
      [](const Array& prev, const Array& cur) {
        return from_matrix(aligned_mask(to_matrix(prev), to_matrix(cur)));
      },
      py::arg("mask_prev"), py::arg("mask_cur"));

  m.def(
      "distill_loss",
      [](const Array& prev, const Array& cur, const Array& tokens, std::size_t overlap) {
        return distill_loss(to_matrix(prev), to_matrix(cur), to_matrix(tokens), overlap);
      },
      py::arg("prev"), py::arg("cur"), py::arg("tokens"), py::arg("overlap"));

  m.def(
      "sample_negatives",
      [](std::tuple<Id, Id, Id> triple, std::size_t num_entities, std::size_t k,
         std::uint64_t seed) {
        auto rng = make_engine(seed, 0);
        auto [h, r, t] = triple;
        std::vector<std::tuple<Id, Id, Id>> out;
        for (const Triple& neg : sample_negatives({h, r, t}, num_entities, k, rng)) {
          out.emplace_back(neg.head, neg.relation, neg.tail);
        }
        return out;
      },
      py::arg("triple"), py::arg("num_entities"), py::arg("k"), py::arg("seed") = 0);

  m.def(
      "rank_query",
      [](const std::string& direction, std::tuple<Id, Id, Id> triple, const Array& ent,
         const Array& rel, std::size_t num_candidates) {
        auto [h, r, t] = triple;
        Matrix<double> em = to_matrix(ent), rm = to_matrix(rel);
        QueryDirection dir = direction == "tail" ? QueryDirection::Tail : QueryDirection::Head;
        return rank_query(dir, Triple{h, r, t}, em, rm, num_candidates, nullptr);
      },
      py::arg("direction"), py::arg("triple"), py::arg("entities"), py::arg("relations"),
      py::arg("num_candidates"), "Raw fractional rank of the truth entity.");

  m.def(
      "grad_check",
      [](const std::string& component, std::size_t trials, std::uint64_t seed) {
        GradCheckResult res = grad_check(parse_grad_component(component), trials, seed);
        py::dict d;
        d["max_rel_error"] = res.max_rel_error;
        d["worst_coordinate"] = res.worst_coordinate;
        return d;
      },
      py::arg("component"), py::arg("trials") = 20, py::arg("seed") = 0);

  m.def(
      "generate_synthetic",
      [](const std::filesystem::path& root, const std::string& mode, std::size_t base_entities,
         std::size_t base_relations, std::size_t base_facts, double growth,
         std::size_t snapshots, std::uint64_t seed) {
        GrowthSpec spec{base_entities, base_relations, base_facts, growth, snapshots,
                        parse_growth_mode(mode), seed};
        generate_synthetic(spec, root);
      },
      py::arg("root"), py::arg("mode") = "entity", py::arg("base_entities") = 500,
      py::arg("base_relations") = 20, py::arg("base_facts") = 5000, py::arg("growth") = 0.2,
      py::arg("snapshots") = 5, py::arg("seed") = 0);

  m.def(
      "load_sequence_stats",
      [](const std::filesystem::path& root) {
        SnapshotSequence seq = load_sequence({root});
        py::list out;
        for (const SnapshotGraph& s : seq.snapshots) {
          py::dict d;
          d["index"] = s.index;
          d["train"] = s.train.size();
          d["valid"] = s.valid.size();
          d["test"] = s.test.size();
          d["num_entities"] = s.num_entities;
          d["num_relations"] = s.num_relations;
          out.append(d);
        }
        return out;
      },
      py::arg("root"));

  m.def(
      "run_continual",
      [](const std::filesystem::path& data, const py::dict& config) {
        TrainConfig cfg = config_from_dict(config);
        SnapshotSequence seq = load_sequence({data});
        Trainer<double> trainer(seq, cfg);
        RunResult<double> result = trainer.run_continual();
        py::dict out;
        py::list evals;
        for (const EvalResult& e : result.evals) evals.append(eval_to_dict(e));
        out["evals"] = evals;
        out["forgetting"] = result.forgetting;
        py::list entities;
        for (const ModelState<double>& s : result.states) {
          entities.append(from_matrix(s.entities));
        }
        out["entities"] = entities;
        return out;
      },
      py::arg("data"), py::arg("config") = py::dict(),
      "Full continual training loop; returns per-snapshot metrics and tables.");
}
