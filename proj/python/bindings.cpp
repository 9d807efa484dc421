#include "radialflow/analysis.hpp"
#include "radialflow/common.hpp"
#include "radialflow/energy.hpp"
#include "radialflow/fixed_point.hpp"
#include "radialflow/homogeneous.hpp"
#include "radialflow/network.hpp"
#include "radialflow/oracle.hpp"
#include "radialflow/relaxation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace radialflow;

PYBIND11_MODULE(_radialflow, m) {
    m.doc() = "AC power flow on radial networks with homogeneous lines: monotone fixed point, "
              "convex relaxation, and energy minimization";

    // ---- exceptions -------------------------------------------------------
    static py::exception<Error> base_error(m, "RadialflowError");
    py::register_exception<ParseError>(m, "ParseError", base_error);
    py::register_exception<ValidationError>(m, "ValidationError", base_error);
    py::register_exception<DomainViolationError>(m, "DomainViolationError", base_error);
    py::register_exception<DimensionTooLargeError>(m, "DimensionTooLargeError", base_error);
    py::register_exception<InstanceMismatchError>(m, "InstanceMismatchError", base_error);
    py::register_exception<NotPDError>(m, "NotPDError", base_error);

    // ---- enums ------------------------------------------------------------
    py::enum_<SolveStatus>(m, "SolveStatus")
        .value("Solved", SolveStatus::Solved)
        .value("Infeasible", SolveStatus::Infeasible)
        .value("Inconclusive", SolveStatus::Inconclusive);
    py::enum_<SolveMethod>(m, "SolveMethod")
        .value("FixedPoint", SolveMethod::FixedPoint)
        .value("Relaxation", SolveMethod::Relaxation)
        .value("Energy", SolveMethod::Energy);
    py::enum_<FixedPointStatus>(m, "FixedPointStatus")
        .value("Converged", FixedPointStatus::Converged)
        .value("DomainViolation", FixedPointStatus::DomainViolation)
        .value("VmaxNonpositive", FixedPointStatus::VmaxNonpositive)
        .value("MaxIterExceeded", FixedPointStatus::MaxIterExceeded)
        .value("NotAFixedPoint", FixedPointStatus::NotAFixedPoint);
    py::enum_<RelaxationStatus>(m, "RelaxationStatus")
        .value("TightOptimum", RelaxationStatus::TightOptimum)
        .value("SlackOptimum", RelaxationStatus::SlackOptimum)
        .value("PhaseOneInfeasible", RelaxationStatus::PhaseOneInfeasible);

    // ---- network ----------------------------------------------------------
    py::class_<RadialNetwork>(m, "RadialNetwork")
        .def_property_readonly("bus_count", &RadialNetwork::bus_count)
        .def_property_readonly("line_count", &RadialNetwork::line_count)
        .def_property_readonly("non_slack_count", &RadialNetwork::non_slack_count)
        .def_property_readonly("kappa", &RadialNetwork::kappa)
        .def("parent", &RadialNetwork::parent, py::arg("bus"))
        .def("label", &RadialNetwork::label, py::arg("bus"));

    py::class_<Injections>(m, "Injections")
        .def(py::init<>())
        .def_readwrite("p", &Injections::p)
        .def_readwrite("q", &Injections::q);

    py::class_<ParsedCase>(m, "ParsedCase")
        .def_readonly("network", &ParsedCase::network)
        .def_readonly("injections", &ParsedCase::injections);

    m.def("load_case", [](const std::string& path) { return load_case(path); }, py::arg("path"),
          "Load a network case from a JSON file or a CSV directory");
    m.def(
        "parse_case_json",
        [](const std::string& text) {
            std::istringstream in(text);
            return parse_network_json(in);
        },
        py::arg("text"), "Parse a network case from a JSON string");

    // ---- transformed system -----------------------------------------------
    py::class_<TransformedSystem>(m, "TransformedSystem")
        .def_readonly("kappa", &TransformedSystem::kappa)
        .def_readonly("p_tilde", &TransformedSystem::p_tilde)
        .def_readonly("q_tilde", &TransformedSystem::q_tilde)
        .def_readonly("b_line", &TransformedSystem::b_line)
        .def_readonly("b_total", &TransformedSystem::b_total);

    py::class_<LineFlows>(m, "LineFlows").def_readonly("s", &LineFlows::s);

    m.def("transform", &transform, py::arg("network"), py::arg("injections"));
    m.def("solve_line_flows", &solve_line_flows, py::arg("network"), py::arg("ts"));
    m.def("compute_vmax", &compute_vmax, py::arg("network"), py::arg("ts"));
    m.def("instance_digest", &instance_digest, py::arg("network"), py::arg("ts"));

    py::class_<PFSolution>(m, "PFSolution")
        .def_readonly("v", &PFSolution::v)
        .def_readonly("theta", &PFSolution::theta)
        .def_readonly("s", &PFSolution::s)
        .def_readonly("c", &PFSolution::c)
        .def_readonly("residual_inf", &PFSolution::residual_inf)
        .def_readonly("method", &PFSolution::method)
        .def_readonly("digest", &PFSolution::digest);

    // ---- fixed point ------------------------------------------------------
    py::class_<FixedPointConfig>(m, "FixedPointConfig")
        .def(py::init<>())
        .def_readwrite("tol", &FixedPointConfig::tol)
        .def_readwrite("residual_tol", &FixedPointConfig::residual_tol)
        .def_readwrite("max_iter", &FixedPointConfig::max_iter)
        .def_readwrite("record_iterates", &FixedPointConfig::record_iterates);
    py::class_<FixedPointTrace>(m, "FixedPointTrace")
        .def_readonly("status", &FixedPointTrace::status)
        .def_readonly("iterations", &FixedPointTrace::iterations)
        .def_readonly("final_step", &FixedPointTrace::final_step)
        .def_readonly("final_residual", &FixedPointTrace::final_residual)
        .def_readonly("iterates", &FixedPointTrace::iterates);
    py::class_<FixedPointResult>(m, "FixedPointResult")
        .def_readonly("status", &FixedPointResult::status)
        .def_readonly("trace", &FixedPointResult::trace)
        .def_readonly("solution", &FixedPointResult::solution);
    m.def("solve_fixed_point", &solve_fixed_point, py::arg("network"), py::arg("ts"),
          py::arg("flows"), py::arg("config") = FixedPointConfig{});

    // ---- relaxation ---------------------------------------------------------
    py::class_<RelaxationConfig>(m, "RelaxationConfig")
        .def(py::init<>())
        .def_readwrite("weights", &RelaxationConfig::weights)
        .def_readwrite("barrier_mu", &RelaxationConfig::barrier_mu)
        .def_readwrite("t0", &RelaxationConfig::t0)
        .def_readwrite("newton_tol", &RelaxationConfig::newton_tol)
        .def_readwrite("duality_gap_tol", &RelaxationConfig::duality_gap_tol)
        .def_readwrite("tightness_tol", &RelaxationConfig::tightness_tol)
        .def_readwrite("max_newton", &RelaxationConfig::max_newton);
    py::class_<RelaxationOutcome>(m, "RelaxationOutcome")
        .def_readonly("status", &RelaxationOutcome::status)
        .def_readonly("v_opt", &RelaxationOutcome::v_opt)
        .def_readonly("slacks", &RelaxationOutcome::slacks)
        .def_readonly("kkt_multipliers", &RelaxationOutcome::kkt_multipliers)
        .def_readonly("weights", &RelaxationOutcome::weights)
        .def_readonly("phase1_tau", &RelaxationOutcome::phase1_tau)
        .def_readonly("gap", &RelaxationOutcome::gap)
        .def_readonly("newton_iters", &RelaxationOutcome::newton_iters);
    py::class_<RelaxationResult>(m, "RelaxationResult")
        .def_readonly("status", &RelaxationResult::status)
        .def_readonly("outcome", &RelaxationResult::outcome)
        .def_readonly("numerical_breakdown", &RelaxationResult::numerical_breakdown)
        .def_readonly("solution", &RelaxationResult::solution);
    m.def("solve_relaxation", &solve_relaxation, py::arg("network"), py::arg("ts"),
          py::arg("flows"), py::arg("config") = RelaxationConfig{});

    // ---- energy -------------------------------------------------------------
    py::class_<EnergyConfig>(m, "EnergyConfig")
        .def(py::init<>())
        .def_readwrite("grad_tol", &EnergyConfig::grad_tol)
        .def_readwrite("max_newton", &EnergyConfig::max_newton)
        .def_readwrite("record_trace", &EnergyConfig::record_trace);
    py::class_<EnergyState>(m, "EnergyState")
        .def_readonly("gamma", &EnergyState::gamma)
        .def_readonly("theta", &EnergyState::theta)
        .def_readonly("value", &EnergyState::value)
        .def_readonly("grad", &EnergyState::grad)
        .def_readonly("hess", &EnergyState::hess)
        .def_readonly("in_domain", &EnergyState::in_domain);
    py::class_<DomainCheck>(m, "DomainCheck")
        .def_readonly("in_domain", &DomainCheck::in_domain)
        .def_readonly("min_eigenvalue", &DomainCheck::min_eigenvalue)
        .def_readonly("min_c", &DomainCheck::min_c);
    py::class_<EnergyResult>(m, "EnergyResult")
        .def_readonly("status", &EnergyResult::status)
        .def_readonly("solution", &EnergyResult::solution)
        .def_readonly("state", &EnergyResult::state)
        .def_readonly("trace", &EnergyResult::trace)
        .def_readonly("newton_iters", &EnergyResult::newton_iters);
    m.def("solve_energy", &solve_energy, py::arg("network"), py::arg("ts"), py::arg("flows"),
          py::arg("config") = EnergyConfig{});
    m.def("energy_value", &energy_value, py::arg("network"), py::arg("ts"), py::arg("v"),
          py::arg("theta"));
    m.def("energy_gradient", &energy_gradient, py::arg("network"), py::arg("ts"), py::arg("v"),
          py::arg("theta"));
    m.def("energy_hessian", &energy_hessian, py::arg("network"), py::arg("ts"), py::arg("v"),
          py::arg("theta"));
    m.def("check_convexity_domain", &check_convexity_domain, py::arg("network"), py::arg("ts"),
          py::arg("v"), py::arg("theta"));

    // ---- analysis -----------------------------------------------------------
    py::class_<ReducedJacobian>(m, "ReducedJacobian")
        .def_readonly("J", &ReducedJacobian::J)
        .def_readonly("is_Z", &ReducedJacobian::is_Z)
        .def_readonly("is_PD", &ReducedJacobian::is_PD)
        .def_readonly("min_eig", &ReducedJacobian::min_eig);
    py::class_<SensitivityMatrix>(m, "SensitivityMatrix")
        .def_readonly("dv_dq", &SensitivityMatrix::dv_dq);
    py::class_<ComparisonResult>(m, "ComparisonResult")
        .def_readonly("equal", &ComparisonResult::equal)
        .def_readonly("max_deviation", &ComparisonResult::max_deviation);
    py::class_<ContinuationSample>(m, "ContinuationSample")
        .def_readonly("lambda_", &ContinuationSample::lambda)
        .def_readonly("status", &ContinuationSample::status)
        .def_readonly("min_v", &ContinuationSample::min_v)
        .def_readonly("residual", &ContinuationSample::residual)
        .def_readonly("iterations", &ContinuationSample::iterations);
    py::class_<ContinuationResult>(m, "ContinuationResult")
        .def_readonly("lambdas", &ContinuationResult::lambdas)
        .def_readonly("solutions", &ContinuationResult::solutions)
        .def_readonly("lambda_lo", &ContinuationResult::lambda_lo)
        .def_readonly("lambda_hi", &ContinuationResult::lambda_hi)
        .def_readonly("bracket_width", &ContinuationResult::bracket_width)
        .def_readonly("samples", &ContinuationResult::samples)
        .def_readonly("inconclusive_count", &ContinuationResult::inconclusive_count);

    m.def("reduced_jacobian", &reduced_jacobian, py::arg("network"), py::arg("ts"),
          py::arg("flows"), py::arg("v"));
    m.def("verify_jacobian_identity", &verify_jacobian_identity, py::arg("network"),
          py::arg("ts"), py::arg("flows"), py::arg("v"));
    m.def("voltage_sensitivity", &voltage_sensitivity, py::arg("jac"), py::arg("v"));
    m.def("certify_stability", &certify_stability, py::arg("network"), py::arg("ts"),
          py::arg("solution"));
    m.def("compare_solutions", &compare_solutions, py::arg("a"), py::arg("b"),
          py::arg("rel_tol"));
    m.def(
        "continuation_scan",
        [](const RadialNetwork& network, const Injections& base, double lambda_max,
           double bisection_tol, int coarse_samples, bool cross_check) {
            ContinuationConfig config;
            config.coarse_samples = coarse_samples;
            config.cross_check = cross_check;
            return continuation_scan(network, base, lambda_max, bisection_tol, config);
        },
        py::arg("network"), py::arg("base"), py::arg("lambda_max"), py::arg("bisection_tol"),
        py::arg("coarse_samples") = 13, py::arg("cross_check") = true);

    // ---- oracle ---------------------------------------------------------------
    py::class_<SolutionSet>(m, "SolutionSet")
        .def_readonly("solutions", &SolutionSet::solutions)
        .def_readonly("complete_claim", &SolutionSet::complete_claim);
    m.def("two_bus_closed_form", &two_bus_closed_form, py::arg("b_tilde"), py::arg("s"),
          py::arg("q_tilde"));
    m.def("enumerate_solutions", &enumerate_solutions, py::arg("network"), py::arg("ts"),
          py::arg("flows"), py::arg("grid_density") = 64);
    m.def("dense_solve", &dense_solve, py::arg("matrix"), py::arg("rhs"));
}
