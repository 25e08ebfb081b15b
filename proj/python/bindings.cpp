#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hypstab/acceptance.hpp"
#include "hypstab/scenario.hpp"

namespace py = pybind11;
using namespace hypstab;

namespace {

py::dict trace_to_dict(const SimulationTrace& trace) {
    py::list t, l1, l2, lq, linf, lyap, vn;
    for (const auto& r : trace.rows) {
        t.append(r.t);
        l1.append(r.l1);
        l2.append(r.l2);
        lq.append(r.lq);
        linf.append(r.linf);
        lyap.append(r.lyapunov);
        vn.append(r.vnorm);
    }
    py::dict d;
    d["t"] = t;
    d["l1"] = l1;
    d["l2"] = l2;
    d["lq"] = lq;
    d["linf"] = linf;
    d["lyapunov"] = lyap;
    d["vnorm"] = vn;
    py::list snaps;
    for (const auto& [ts, grid] : trace.snapshots) {
        py::dict s;
        s["t"] = ts;
        s["values"] = grid.values;
        snaps.append(s);
    }
    d["snapshots"] = snaps;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "finite-time boundary stabilization of 1-D hyperbolic systems";

    py::register_exception<ValidationError>(m, "ValidationError");
    py::register_exception<SchemaError>(m, "SchemaError");
    py::register_exception<SingularSubmatrix>(m, "SingularSubmatrixError");
    py::register_exception<NoConvergence>(m, "NoConvergenceError");
    py::register_exception<CalibrationFailed>(m, "CalibrationFailedError");

    py::class_<Scenario>(m, "Scenario")
        .def_readwrite("k", &Scenario::k)
        .def_readwrite("m", &Scenario::m)
        .def_readwrite("nx", &Scenario::nx)
        .def_readwrite("cfl", &Scenario::cfl)
        .def_readwrite("horizon", &Scenario::horizon)
        .def_readwrite("delta", &Scenario::delta)
        .def_readwrite("y_max", &Scenario::y_max)
        .def_readwrite("output_dir", &Scenario::output_dir)
        .def_readwrite("seed", &Scenario::seed)
        .def("__eq__", [](const Scenario& a, const Scenario& b) { return a == b; });

    m.def("parse_scenario", &parse_scenario, py::arg("path"));
    m.def("parse_scenario_text", &parse_scenario_text, py::arg("text"),
          py::arg("origin") = "<text>");
    m.def("serialize_scenario", &serialize_scenario, py::arg("scenario"));

    m.def(
        "check_class_b",
        [](const Eigen::MatrixXd& B) {
            ClassBReport r = check_class_B(B, static_cast<int>(B.rows()),
                                           static_cast<int>(B.cols()));
            return py::make_tuple(r.member, r.per_index);
        },
        py::arg("B"), "class membership and the per-index invertibility report");

    m.def(
        "synthesize",
        [](const Eigen::MatrixXd& B) {
            int k = static_cast<int>(B.rows()), mm = static_cast<int>(B.cols());
            FeedbackLaw law = synthesize_linear(B, k, mm);
            py::list rows;
            for (int c = law.ell(); c < law.n(); ++c) {
                Eigen::RowVectorXd r = law.linear_row(c);
                rows.append(r);
            }
            return rows;
        },
        py::arg("B"), "per-slot feedback rows from the trailing-block elimination");

    m.def(
        "timing",
        [](const std::string& path) {
            Scenario s = parse_scenario(path);
            HyperbolicSystem sys = s.make_system();
            TimingData td = compute_timing(sys);
            return py::make_tuple(td.tau, td.t_opt);
        },
        py::arg("scenario_path"), "transit times and the optimal stabilization time");

    m.def(
        "validate",
        [](const std::string& path) {
            Scenario s = parse_scenario(path);
            HyperbolicSystem sys = s.make_system();
            return validate_system(sys, s.y_max).violations;
        },
        py::arg("scenario_path"));

    m.def(
        "simulate_scenario",
        [](const std::string& path, std::vector<double> snapshot_times) {
            Scenario s = parse_scenario(path);
            HyperbolicSystem sys = s.make_system();
            FeedbackLaw law = s.make_law(sys);
            double q = s.lyapunov.q.front();
            double rate = s.lyapunov.rate.front();
            double gamma =
                s.lyapunov.gamma_auto ? calibrate_gamma(sys, law, s.seed) : s.lyapunov.gamma;
            SimulationTrace trace = run_with_lyapunov(sys, law, s, q, rate, gamma, s.nx,
                                                      s.solver, std::move(snapshot_times));
            return trace_to_dict(trace);
        },
        py::arg("scenario_path"), py::arg("snapshot_times") = std::vector<double>{},
        "run the closed loop and return the trace columns");

    m.def(
        "calibrate_gamma_for",
        [](const std::string& path) {
            Scenario s = parse_scenario(path);
            HyperbolicSystem sys = s.make_system();
            FeedbackLaw law = s.make_law(sys);
            return calibrate_gamma(sys, law, s.seed);
        },
        py::arg("scenario_path"));

    m.def(
        "run_acceptance",
        [](const std::string& suite) {
            Suite s = Suite::All;
            if (suite == "linear") s = Suite::Linear;
            if (suite == "nonlinear") s = Suite::Nonlinear;
            py::list out;
            for (const auto& r : run_acceptance(s)) {
                py::dict d;
                d["id"] = r.id;
                d["name"] = r.name;
                d["pass"] = r.pass;
                d["detail"] = r.detail;
                out.append(d);
            }
            return out;
        },
        py::arg("suite") = "all");
}
