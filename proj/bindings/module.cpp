#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "moodminer/ablation.hpp"
#include "moodminer/errors.hpp"
#include "moodminer/eval.hpp"
#include "moodminer/hmm.hpp"
#include "moodminer/ingest.hpp"
#include "moodminer/pipeline.hpp"
#include "moodminer/question.hpp"
#include "moodminer/synthgen.hpp"
#include "moodminer/util.hpp"

namespace py = pybind11;
using namespace moodminer;

namespace {

pipeline::RunContext context_from_kwargs(const std::string& name,
                                         const std::string& out_dir,
                                         std::uint64_t seed,
                                         const py::dict& config,
                                         std::vector<std::string> inputs) {
  pipeline::RunContext ctx;
  ctx.subcommand = name;
  ctx.out_dir = out_dir;
  ctx.seed = seed;
  for (const auto& item : config)
    ctx.config.kv[py::str(item.first).cast<std::string>()] =
        py::str(item.second).cast<std::string>();
  ctx.inputs = std::move(inputs);
  return ctx;
}

py::dict summary_to_dict(const pipeline::Summary& s) {
  py::dict out;
  for (const auto& [key, value] : s.items()) {
    if (value.is_number_integer())
      out[py::str(key)] = value.get<long long>();
    else if (value.is_number_float())
      out[py::str(key)] = value.get<double>();
    else if (value.is_boolean())
      out[py::str(key)] = value.get<bool>();
    else
      out[py::str(key)] = value.dump();
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_moodminer, m) {
  m.doc() = "engagement-mood decoding and dropout prediction for question "
            "pool submission logs";
  m.attr("__version__") = pipeline::tool_version();

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  m.def(
      "simulate",
      [](const std::string& out_dir, std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_simulate(
            context_from_kwargs("simulate", out_dir, seed, config, {})));
      },
      py::arg("out_dir"), py::arg("seed") = 0, py::arg("config") = py::dict());

  m.def(
      "ingest",
      [](const std::string& events_csv, const std::string& out_dir,
         const std::string& split, std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_ingest(
            context_from_kwargs("ingest", out_dir, seed, config, {events_csv}),
            events_csv, split));
      },
      py::arg("events_csv"), py::arg("out_dir"),
      py::arg("split") = "equal_halves", py::arg("seed") = 0,
      py::arg("config") = py::dict());

  m.def(
      "fit_hmm",
      [](const std::string& students_json, const std::string& out_dir,
         std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_fit_hmm(
            context_from_kwargs("fit-hmm", out_dir, seed, config, {students_json}),
            students_json));
      },
      py::arg("students_json"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config") = py::dict());

  m.def(
      "select_k",
      [](const std::string& students_json, const std::string& out_dir,
         std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_select_k(
            context_from_kwargs("select-k", out_dir, seed, config,
                                {students_json}),
            students_json));
      },
      py::arg("students_json"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config") = py::dict());

  m.def(
      "decode",
      [](const std::string& students_json, const std::string& model_json,
         const std::string& out_dir, std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_decode(
            context_from_kwargs("decode", out_dir, seed, config,
                                {students_json, model_json}),
            students_json, model_json));
      },
      py::arg("students_json"), py::arg("model_json"), py::arg("out_dir"),
      py::arg("seed") = 0, py::arg("config") = py::dict());

  m.def(
      "characterize",
      [](const std::string& decoded_json, const std::string& out_dir,
         std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_characterize(
            context_from_kwargs("characterize", out_dir, seed, config,
                                {decoded_json}),
            decoded_json));
      },
      py::arg("decoded_json"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config") = py::dict());

  m.def(
      "mismatch",
      [](const std::string& decoded_json, const std::string& out_dir,
         std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_mismatch(
            context_from_kwargs("mismatch", out_dir, seed, config, {decoded_json}),
            decoded_json));
      },
      py::arg("decoded_json"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config") = py::dict());

  m.def(
      "train_dp",
      [](const std::string& decoded_json, const std::string& out_dir,
         std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_train_dp(
            context_from_kwargs("train-dp", out_dir, seed, config, {decoded_json}),
            decoded_json));
      },
      py::arg("decoded_json"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config") = py::dict());

  m.def(
      "ablate",
      [](const std::string& students_json, const std::string& out_dir,
         std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_ablate(
            context_from_kwargs("ablate", out_dir, seed, config, {students_json}),
            students_json));
      },
      py::arg("students_json"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config") = py::dict());

  m.def(
      "report",
      [](const std::string& run_dir, const std::string& out_dir,
         std::uint64_t seed, const py::dict& config) {
        return summary_to_dict(pipeline::run_report(
            context_from_kwargs("report", out_dir, seed, config, {}), run_dir));
      },
      py::arg("run_dir"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config") = py::dict());

  // A few in-memory numerics, handy for quick checks from python.
  m.def(
      "viterbi_path",
      [](const std::string& model_json, const std::vector<py::dict>& obs) {
        auto model = hmm::model_from_json(model_json);
        std::vector<ObservationVector> seq;
        for (const auto& o : obs) {
          ObservationVector v;
          v.performance = o["performance"].cast<double>();
          v.challenge = o["challenge"].cast<double>();
          v.endurance_min = o["endurance_min"].cast<double>();
          if (o.contains("gap_hours") && !o["gap_hours"].is_none())
            v.gap_hours = o["gap_hours"].cast<double>();
          seq.push_back(v);
        }
        auto res = hmm::viterbi(model, hmm::transform(seq));
        return py::make_tuple(res.path, res.log_prob);
      },
      py::arg("model_json"), py::arg("observations"));

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        auto r = eval::compute_metrics(scores, labels);
        return r.auc ? *r.auc : 0.5;
      },
      py::arg("scores"), py::arg("labels"));
}
