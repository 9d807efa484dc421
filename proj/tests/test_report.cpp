#include "support.hpp"

#include "radialflow/report.hpp"

#include <doctest.h>

#include <sstream>

using namespace radialflow;
using rftest::two_bus_case;

TEST_CASE("digest hex is 16 lowercase hex digits") {
    CHECK(digest_hex(0) == "0000000000000000");
    CHECK(digest_hex(0xdeadbeefULL) == "00000000deadbeef");
    CHECK(digest_hex(0xFFFFFFFFFFFFFFFFULL) == "ffffffffffffffff");
}

TEST_CASE("solve report carries schema, methods and agreement") {
    const auto inst = two_bus_case(0.2, -0.05);
    const auto fp = solve_fixed_point(inst.network, inst.ts, inst.flows);
    REQUIRE(fp.status == SolveStatus::Solved);

    MethodReport mr;
    mr.status = fp.status;
    mr.solution = fp.solution;
    mr.stable = true;
    mr.iterations = fp.trace.iterations;
    mr.wall_time_ms = 1.25;

    const auto doc = solve_report(fp.solution->digest, 2, {{"fixed_point", mr}}, 3.5e-9);
    CHECK(doc.at("schema") == "radialflow/1");
    CHECK(doc.at("command") == "solve");
    CHECK(doc.at("instance_digest") == digest_hex(fp.solution->digest));
    CHECK(doc.at("buses") == 2);
    REQUIRE(doc.at("methods").contains("fixed_point"));
    const auto& block = doc.at("methods").at("fixed_point");
    CHECK(block.at("status") == "solved");
    CHECK(block.at("stable") == true);
    CHECK(block.at("v").size() == 1);
    CHECK(block.at("theta").size() == 2);
    CHECK(block.at("v")[0].get<double>() == doctest::Approx(0.85).epsilon(1e-9));
    CHECK(doc.at("agreement").at("max_deviation").get<double>() == doctest::Approx(3.5e-9));
}

TEST_CASE("solve report omits agreement when only one method ran") {
    const auto doc = solve_report(7, 2, {}, std::nullopt);
    CHECK_FALSE(doc.contains("agreement"));
}

TEST_CASE("reports are deterministic apart from wall time") {
    const auto inst = two_bus_case(0.2, -0.05);
    const auto fp = solve_fixed_point(inst.network, inst.ts, inst.flows);
    REQUIRE(fp.status == SolveStatus::Solved);
    MethodReport mr;
    mr.status = fp.status;
    mr.solution = fp.solution;
    mr.wall_time_ms = 0.0;
    const auto a = solve_report(fp.solution->digest, 2, {{"fixed_point", mr}}, std::nullopt);
    const auto b = solve_report(fp.solution->digest, 2, {{"fixed_point", mr}}, std::nullopt);
    CHECK(a.dump() == b.dump());
}

TEST_CASE("certificate report for both verdict kinds") {
    const auto inst = two_bus_case(0.2, -0.05);
    const auto fp = solve_fixed_point(inst.network, inst.ts, inst.flows);
    REQUIRE(fp.status == SolveStatus::Solved);
    const auto jac = reduced_jacobian(inst.network, inst.ts, inst.flows, fp.solution->v);
    const auto solved =
        certify_report(fp.solution->digest, SolveStatus::Solved, fp.solution, &jac, true, true,
                       true, -0.05, "converged", fp.trace.iterations);
    CHECK(solved.at("schema") == "radialflow/1");
    CHECK(solved.at("command") == "certify");
    CHECK(solved.at("status") == "solved");
    CHECK(solved.at("positive_definite") == true);
    CHECK(solved.at("z_matrix") == true);
    CHECK(solved.at("min_eig").get<double>() == doctest::Approx(0.3777777778).epsilon(1e-6));
    CHECK(solved.at("sensitivity_positive") == true);
    CHECK(solved.at("convexity_domain") == true);
    CHECK(solved.at("stable") == true);

    const auto infeasible = certify_report(123, SolveStatus::Infeasible, std::nullopt, nullptr,
                                           false, false, false, 0.05, "domain_violation", 17);
    CHECK(infeasible.at("status") == "infeasible");
    CHECK(infeasible.at("certificate").at("phase1_tau").get<double>() == doctest::Approx(0.05));
    CHECK(infeasible.at("certificate").at("fixed_point_status") == "domain_violation");
    CHECK(infeasible.at("certificate").at("fixed_point_iterations") == 17);
    CHECK_FALSE(infeasible.contains("stable"));
}

TEST_CASE("scan report and csv share the sample data") {
    const auto net = rftest::two_bus_network();
    Injections base{Vector::Zero(1), Vector::Constant(1, -0.1)};
    const auto scan = continuation_scan(net, base, 3.0, 1e-4);

    const auto doc = scan_report(42, scan);
    CHECK(doc.at("schema") == "radialflow/1");
    CHECK(doc.at("command") == "scan");
    CHECK(doc.at("lambda_lo").get<double>() == doctest::Approx(scan.lambda_lo));
    CHECK(doc.at("lambda_hi").get<double>() == doctest::Approx(scan.lambda_hi));
    CHECK(doc.at("bracket_width").get<double>() <= 1e-4);
    CHECK(doc.at("samples").get<size_t>() == scan.samples.size());
    CHECK(doc.at("feasible_samples").get<size_t>() == scan.solutions.size());
    CHECK(doc.at("inconclusive_samples") == scan.inconclusive_count);
    CHECK(doc.at("min_v_last_feasible").get<double>() == doctest::Approx(0.25).epsilon(0.02));

    std::ostringstream csv;
    write_scan_csv(csv, scan);
    std::istringstream lines(csv.str());
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "lambda,feasible,min_v,residual,iterations");
    size_t rows = 0;
    double prev_lambda = -1.0;
    while (std::getline(lines, line)) {
        ++rows;
        const auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        const double lambda = std::stod(line.substr(0, comma));
        CHECK(lambda >= prev_lambda);
        prev_lambda = lambda;
        const char feasible = line[comma + 1];
        CHECK((feasible == '0' || feasible == '1'));
        if (feasible == '0') {
            CHECK(line.find("nan") != std::string::npos);
        }
    }
    CHECK(rows == scan.samples.size());
}

TEST_CASE("open bracket serializes as null") {
    const auto net = rftest::two_bus_network();
    Injections base{Vector::Zero(1), Vector::Constant(1, -0.1)};
    const auto scan = continuation_scan(net, base, 2.0, 1e-4);
    REQUIRE(std::isinf(scan.lambda_hi));
    const auto doc = scan_report(42, scan);
    CHECK(doc.at("lambda_hi").is_null());
    CHECK(doc.at("bracket_width").is_null());
}

TEST_CASE("enumerate report lists solutions with stability and dominance") {
    const auto inst = two_bus_case(0.0, -0.1);
    const auto set = enumerate_solutions(inst.network, inst.ts, inst.flows, 64);
    REQUIRE(set.solutions.size() == 2);
    const auto doc = enumerate_report(9, set, {true, false}, {{true, true}, {false, true}});
    CHECK(doc.at("schema") == "radialflow/1");
    CHECK(doc.at("count") == 2);
    CHECK(doc.at("complete_claim") == false);
    REQUIRE(doc.at("solutions").size() == 2);
    CHECK(doc.at("solutions")[0].at("stable") == true);
    CHECK(doc.at("solutions")[1].at("stable") == false);
    CHECK(doc.at("dominance")[0][1] == true);
    CHECK(doc.at("dominance")[1][0] == false);
}

TEST_CASE("sensitivity report embeds the matrix") {
    const auto inst = two_bus_case(0.2, -0.05);
    const auto fp = solve_fixed_point(inst.network, inst.ts, inst.flows);
    REQUIRE(fp.status == SolveStatus::Solved);
    const auto jac = reduced_jacobian(inst.network, inst.ts, inst.flows, fp.solution->v);
    const auto sens = voltage_sensitivity(jac, fp.solution->v);
    const auto doc = sensitivity_report(fp.solution->digest, *fp.solution, sens, true);
    CHECK(doc.at("schema") == "radialflow/1");
    CHECK(doc.at("entrywise_positive") == true);
    CHECK(doc.at("dv_dq")[0][0].get<double>() == doctest::Approx(2.25).epsilon(1e-9));
}
