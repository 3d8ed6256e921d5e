#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "perciso/cheeger.hpp"
#include "perciso/cli_harness.hpp"
#include "perciso/coarse_grain.hpp"
#include "perciso/cylinder_cuts.hpp"
#include "perciso/errors.hpp"
#include "perciso/lattice.hpp"
#include "perciso/parallel.hpp"
#include "perciso/surface_tension.hpp"
#include "perciso/wulff_geometry.hpp"

namespace py = pybind11;
using namespace perciso;

namespace {

std::vector<std::vector<int>> coords(const Subgraph& H) {
    std::vector<std::vector<int>> out;
    for (auto v : H.vertices) {
        Coord x = H.box.coord(v);
        out.emplace_back(x.begin(), x.begin() + H.box.d());
    }
    return out;
}

py::dict cut_dict(const CutResult& r) {
    py::dict d;
    d["value"] = r.value;
    d["suitable"] = r.suitable;
    d["reason"] = r.reason;
    d["witness_size"] = r.witness.size();
    return d;
}

py::dict solution_dict(const CheegerSolution& s) {
    py::dict d;
    d["phi_num"] = s.num;
    d["phi_den"] = s.den;
    d["phi"] = s.value();
    d["method"] = method_name(s.method);
    d["certified"] = s.certified;
    d["witness"] = coords(s.witness);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Percolation isoperimetry laboratory: cuts, surface tension, Wulff crystals, Cheeger optimizers.";

    static py::exception<Error> error(m, "PercisoError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    m.attr("__version__") = kArtifactVersion;
    m.def("set_threads", &set_thread_count, py::arg("threads"));

    py::class_<BoxSpec>(m, "BoxSpec")
        .def(py::init<int, int, int>(), py::arg("d"), py::arg("n"), py::arg("pad") = 0)
        .def_property_readonly("d", &BoxSpec::d)
        .def_property_readonly("n", &BoxSpec::n)
        .def_property_readonly("pad", &BoxSpec::pad)
        .def_property_readonly("vertex_count", &BoxSpec::vertex_count)
        .def_property_readonly("edge_count", &BoxSpec::edge_count);

    py::class_<Configuration>(m, "Configuration")
        .def_property_readonly("p", &Configuration::p)
        .def_property_readonly("seed", &Configuration::seed)
        .def_property_readonly("open_count", &Configuration::open_count)
        .def_property_readonly("box", &Configuration::box)
        .def("giant_size", [](const Configuration& c) { return giant_cluster_in_box(c).size(); })
        .def("to_json", &configuration_json);

    m.def("sample", &sample_configuration, py::arg("p"), py::arg("box"), py::arg("seed"));

    m.def(
        "xi",
        [](const Configuration& cfg, const std::vector<double>& v, double r, bool face) {
            auto spec = CylinderSpec::anchored(v, r);
            return cut_dict(face ? xi_face(cfg, spec) : xi_hemi(cfg, spec));
        },
        py::arg("cfg"), py::arg("v"), py::arg("r"), py::arg("face") = false,
        "Minimal open cut of the anchored cylinder of radius r about direction v.");
    m.def("cylinder_box", [](const std::vector<double>& v, double r) { return cylinder_box(CylinderSpec::anchored(v, r)); },
          py::arg("v"), py::arg("r"));

    m.def(
        "estimate_beta",
        [](const std::vector<double>& v, double p, int d, const std::vector<double>& scales, int samples,
           std::uint64_t seed) {
            auto e = estimate_beta(v, p, d, scales, samples, seed);
            py::dict out;
            out["beta"] = e.beta;
            out["ci"] = e.ci;
            out["r_max"] = e.r_max;
            out["suitable"] = e.suitable;
            py::list per;
            for (const auto& s : e.scales) per.append(py::make_tuple(s.r, s.mean, s.stderr_));
            out["scales"] = per;
            return out;
        },
        py::arg("v"), py::arg("p"), py::arg("d"), py::arg("scales"), py::arg("samples"), py::arg("seed"));

    py::class_<NormTable>(m, "NormTable")
        .def_readonly("d", &NormTable::d)
        .def_readonly("provenance", &NormTable::provenance)
        .def_property_readonly("directions",
                               [](const NormTable& t) {
                                   std::vector<Vec> out;
                                   for (const auto& e : t.entries) out.push_back(e.v);
                                   return out;
                               })
        .def_property_readonly("betas",
                               [](const NormTable& t) {
                                   std::vector<double> out;
                                   for (const auto& e : t.entries) out.push_back(e.beta);
                                   return out;
                               })
        .def("__call__", [](const NormTable& t, const Vec& x) { return norm_value(t, x); })
        .def("to_csv", [](const NormTable& t) { return norm_table_csv(t); });

    m.def("l1_table", [](int d) { return exact_norm_table(d, axis_diagonal_directions(d), l1_norm, "l1"); },
          py::arg("d"));
    m.def("euclidean_table", [](int d) { return exact_norm_table(d, default_directions(d), euclidean_norm, "euclidean"); },
          py::arg("d"));
    m.def("build_norm_table",
          [](double p, int d, const std::vector<double>& scales, int samples, std::uint64_t seed) {
              return build_norm_table(p, d, default_directions(d), scales, samples, seed);
          },
          py::arg("p"), py::arg("d"), py::arg("scales"), py::arg("samples"), py::arg("seed"));
    m.def("parse_norm_table", &parse_norm_table_csv, py::arg("csv"));

    py::class_<Polytope>(m, "Polytope")
        .def_readonly("d", &Polytope::d)
        .def_readonly("vertices", &Polytope::vertices)
        .def_property_readonly("volume", [](const Polytope& P) { return volume(P); })
        .def("contains", &Polytope::contains, py::arg("x"), py::arg("tol") = 1e-9)
        .def("to_off", &polytope_off)
        .def("to_json", &polytope_json);

    m.def("wulff_crystal", py::overload_cast<const NormTable&>(&wulff_crystal), py::arg("table"));
    m.def("dilate_to_volume", &dilate_to_volume, py::arg("P"), py::arg("volume"));
    m.def("wulff_volume_target", &wulff_volume_target, py::arg("d"));
    m.def("surface_energy", py::overload_cast<const Polytope&, const NormTable&>(&surface_energy), py::arg("P"),
          py::arg("table"));
    m.def("continuum_conductance", &continuum_conductance, py::arg("P"), py::arg("table"), py::arg("theta"));
    m.def(
        "deficit_test",
        [](const NormTable& t, int trials, std::uint64_t seed) {
            auto r = isoperimetric_deficit_test(t, trials, seed);
            py::dict out;
            out["trials"] = r.trials;
            out["violations"] = r.violations;
            out["min_deficit"] = r.min_deficit;
            return out;
        },
        py::arg("table"), py::arg("trials"), py::arg("seed"));

    m.def(
        "cheeger",
        [](const Configuration& cfg, const std::string& method, std::uint64_t seed, std::int64_t proposals,
           std::int64_t cap) {
            auto prob = CheegerProblem::from_configuration(cfg, cap);
            if (method == "exact") return solution_dict(cheeger_exact(prob));
            if (method != "anneal") throw Error(ErrorCode::InvalidArgument, "method must be exact or anneal");
            AnnealParams ap;
            ap.proposals = proposals;
            return solution_dict(cheeger_anneal(prob, ap, seed));
        },
        py::arg("cfg"), py::arg("method") = "anneal", py::arg("seed") = 1, py::arg("proposals") = 200000,
        py::arg("cap") = -1);

    m.def(
        "d_metric_points",
        [](int d, int K, const std::vector<Vec>& a, const std::vector<double>& wa, const std::vector<Vec>& b,
           const std::vector<double>& wb) { return d_metric(point_measure(d, K, a, wa), point_measure(d, K, b, wb)).value; },
        py::arg("d"), py::arg("K"), py::arg("points_a"), py::arg("weights_a"), py::arg("points_b"),
        py::arg("weights_b"));

    m.def(
        "type_rate",
        [](double p, int d, const std::vector<int>& ks, int samples, std::uint64_t seed) {
            py::list out;
            for (const auto& r : type_rate(p, d, ks, samples, seed)) out.append(py::make_tuple(r.k, r.rate, r.stderr_));
            return out;
        },
        py::arg("p"), py::arg("d"), py::arg("ks"), py::arg("samples"), py::arg("seed"));

    m.def(
        "run",
        [](const std::string& kind, const std::string& config_text, const std::string& table_root) {
            auto cfg = ExperimentConfig::parse(config_text, kind);
            RunResult r;
            if (kind == "sample") r = run_sample(cfg);
            else if (kind == "beta") r = run_beta(cfg);
            else if (kind == "wulff") r = run_wulff(cfg);
            else if (kind == "cheeger") r = run_cheeger(cfg);
            else if (kind == "coarse") r = run_coarse(cfg);
            else r = run_converge(cfg, table_root);
            py::dict files;
            for (const auto& f : r.files) files[py::str(f.name)] = py::bytes(f.content);
            return py::make_tuple(r.exit_code, r.message, files);
        },
        py::arg("kind"), py::arg("config_text"), py::arg("table_root") = "",
        "Run a subcommand in memory; returns (exit_code, message, {name: bytes}).");
}
