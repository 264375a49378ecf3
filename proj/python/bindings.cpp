#include "sgldc/constants.hpp"
#include "sgldc/diagnostics.hpp"
#include "sgldc/experiments.hpp"
#include "sgldc/random.hpp"
#include "sgldc/targets.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace sgldc;

namespace {

std::vector<Vector> rows_of(const Eigen::MatrixXd& m) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
  return out;
}

py::dict report_dict(const RateReport& r) {
  py::dict d;
  d["variant"] = std::string(to_string(r.variant));
  d["beta"] = r.beta;
  d["R"] = r.geometry.R;
  d["kappa"] = r.geometry.kappa;
  d["c_f"] = r.distance.c_f();
  d["R1"] = r.distance.R1();
  d["c"] = r.rate.c;
  d["log_c"] = r.rate.log_c;
  d["c0"] = r.rate.c0;
  d["log_c0"] = r.rate.log_c0;
  d["cbar"] = r.cbar;
  d["cprime"] = r.cprime;
  d["feasible"] = r.step.feasible;
  d["delta0_max"] = r.step.delta0_max;
  d["log_delta0_max"] = r.step.log_delta0_max;
  d["binding_restriction"] = std::string(to_string(r.step.binding));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reflection-coupling diagnostics for stochastic gradient Langevin dynamics";

  py::class_<AssumptionParams>(m, "AssumptionParams")
      .def(py::init([](double R0, double kappa0, double K, double b0) {
             AssumptionParams p{R0, kappa0, K, b0};
             validate(p);
             return p;
           }),
           py::arg("R0"), py::arg("kappa0"), py::arg("K"), py::arg("b0") = 0.0)
      .def_readonly("R0", &AssumptionParams::R0)
      .def_readonly("kappa0", &AssumptionParams::kappa0)
      .def_readonly("K", &AssumptionParams::K)
      .def_readonly("b0", &AssumptionParams::b0)
      .def("__repr__", [](const AssumptionParams& p) {
        return "AssumptionParams(R0=" + std::to_string(p.R0) + ", kappa0=" + std::to_string(p.kappa0) +
               ", K=" + std::to_string(p.K) + ", b0=" + std::to_string(p.b0) + ")";
      });

  m.def(
      "rate_report",
      [](const AssumptionParams& p, double beta, const std::string& variant, double r1_factor) {
        ConstantsOptions o;
        if (variant == "gradient") o.variant = Variant::gradient;
        else if (variant == "general_drift") o.variant = Variant::general_drift;
        else throw py::value_error("variant must be 'gradient' or 'general_drift'");
        o.r1_factor = r1_factor;
        return report_dict(build_rate_report(p, beta, o));
      },
      py::arg("params"), py::arg("beta"), py::arg("variant") = "gradient", py::arg("r1_factor") = 1.51,
      "Contraction constants and the largest certified step size.");
  m.def("moment_step_bound", &moment_step_bound, py::arg("kappa"), py::arg("K"), py::arg("p"));

  py::class_<DistanceFunction>(m, "DistanceFunction")
      .def(py::init<double, double>(), py::arg("c_f"), py::arg("R1"))
      .def_property_readonly("c_f", &DistanceFunction::c_f)
      .def_property_readonly("R1", &DistanceFunction::R1)
      .def("__call__", &DistanceFunction::operator(), py::arg("r"))
      .def("derivative", &DistanceFunction::derivative, py::arg("r"))
      .def("floor_slope", &DistanceFunction::floor_slope);

  py::class_<FieldModel, std::shared_ptr<FieldModel>>(m, "Model")
      .def_property_readonly("name", &FieldModel::name)
      .def_property_readonly("dimension", &FieldModel::dimension)
      .def_property_readonly("beta", &FieldModel::beta)
      .def_property_readonly("size", &FieldModel::size)
      .def_property_readonly("params", &FieldModel::params)
      .def_property_readonly("is_gradient", [](const FieldModel& f) { return f.kind() == FieldKind::gradient; })
      .def(
          "field",
          [](const FieldModel& f, const Vector& x) {
            if (x.size() != f.dimension()) throw py::value_error("x has the wrong dimension");
            Vector out(f.dimension());
            f.full_field_into(x, out);
            return out;
          },
          py::arg("x"), "Full gradient (gradient targets) or drift (drift models).")
      .def(
          "batch_field",
          [](const FieldModel& f, const Vector& x, const std::vector<std::size_t>& batch) {
            if (x.size() != f.dimension()) throw py::value_error("x has the wrong dimension");
            Vector out(f.dimension());
            f.batch_field_into(x, batch, out);
            return out;
          },
          py::arg("x"), py::arg("batch"))
      .def("__repr__", [](const FieldModel& f) {
        return "<sgldc.Model " + f.name() + " d=" + std::to_string(f.dimension()) + ">";
      });

  m.def(
      "make_model",
      [](const std::string& name, int dimension, double beta, double a, double gamma, double stiffness,
         const std::vector<std::vector<double>>& offsets) {
        TargetSpec t;
        t.name = name;
        t.dimension = dimension;
        t.beta = beta;
        t.a = a;
        t.gamma = gamma;
        t.stiffness = stiffness;
        t.offsets = offsets;
        return std::const_pointer_cast<FieldModel>(build_model(t));
      },
      py::arg("name"), py::arg("dimension"), py::arg("beta"), py::arg("a") = 2.0, py::arg("gamma") = 1.0,
      py::arg("stiffness") = 1.0, py::arg("offsets") = std::vector<std::vector<double>>{},
      "Builds one of: gaussian, quadratic, bump, shifted_gaussian, rotational, free.");

  m.def(
      "far_field_witness",
      [](const FieldModel& model, double radius, std::size_t pairs, std::uint64_t seed) {
        const auto g = model.kind() == FieldKind::gradient ? derive_geometry(model.params())
                                                           : drift_geometry(model.params());
        const auto w = far_field_witness(model, g, radius, pairs, seed);
        py::dict d;
        d["pairs"] = w.pairs;
        d["satisfied"] = w.satisfied;
        d["min_ratio"] = w.min_ratio;
        d["kappa"] = g.kappa;
        d["R"] = g.R;
        return d;
      },
      py::arg("model"), py::arg("radius"), py::arg("pairs") = 1000, py::arg("seed") = 0);

  m.def("w1_1d", [](const std::vector<double>& a, const std::vector<double>& b) { return w1_empirical_1d(a, b); },
        py::arg("a"), py::arg("b"), "Exact W1 between equal-size samples on the line.");
  m.def(
      "w1_exact",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return w1_empirical_assignment(rows_of(a), rows_of(b)); },
      py::arg("a"), py::arg("b"), "Exact W1 between equal-size point clouds (rows) by optimal assignment.");
  m.def(
      "solve_assignment",
      [](const Eigen::MatrixXd& cost) {
        const auto s = solve_assignment(cost);
        return py::make_tuple(s.cost, s.match);
      },
      py::arg("cost"));

  m.def(
      "fit_rate",
      [](const std::vector<double>& times, const std::vector<double>& values) {
        if (times.size() != values.size()) throw py::value_error("times and values differ in length");
        ExperimentSeries s;
        for (std::size_t i = 0; i < times.size(); ++i) s.push(i, times[i], values[i], 0.0);
        const auto f = fit_rate(s);
        py::dict d;
        d["rate"] = f.rate;
        d["intercept"] = f.intercept;
        d["r_squared"] = f.r_squared;
        d["rate_ci_half_width"] = f.rate_ci_half_width;
        d["points"] = f.points;
        return d;
      },
      py::arg("times"), py::arg("values"), "Exponential decay rate by least squares on log values.");

  m.def("gaussian_w1_oracle", &gaussian_w1_oracle, py::arg("eta"), py::arg("beta"), py::arg("stiffness") = 1.0,
        py::arg("batch_variance") = 0.0);
  m.def("philox4x32", &Philox4x32::generate, py::arg("counter"), py::arg("key"));

  m.def(
      "run",
      [](const std::string& command, const std::string& config_json, const std::string& output_dir) {
        ExperimentConfig cfg = parse_config(config_json);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        CommandResult res;
        {
          py::gil_scoped_release release;
          res = run_command(parse_command(command), cfg);
        }
        py::list verdicts;
        for (const auto& v : res.verdicts) {
          py::dict d;
          d["statistic"] = v.statistic;
          d["estimate"] = v.estimate;
          d["ci_half_width"] = v.ci_half_width;
          d["reference"] = v.reference ? py::cast(*v.reference) : py::none();
          d["pass"] = v.pass;
          d["tolerance"] = v.tolerance;
          verdicts.append(d);
        }
        py::dict out;
        out["command"] = command;
        out["passed"] = res.passed();
        out["verdicts"] = verdicts;
        out["files"] = res.files;
        out["summary"] = res.summary;
        return out;
      },
      py::arg("command"), py::arg("config_json"), py::arg("output_dir") = "",
      "Runs one experiment command from a JSON config and returns its verdicts.");

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
}
