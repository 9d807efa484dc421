#include "radialflow/network.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <utility>

namespace radialflow {

namespace {

[[noreturn]] void fail_validation(ValidationError::Cause cause, const std::string& msg) {
    throw ValidationError(cause, msg);
}

double checked_ratio(const Line& line, int index) {
    if (!(line.susceptance > 0.0)) {
        fail_validation(ValidationError::Cause::NonpositiveSusceptance,
                        "line " + std::to_string(index) + ": susceptance must be > 0, got " +
                            std::to_string(line.susceptance));
    }
    if (line.conductance < 0.0) {
        fail_validation(ValidationError::Cause::BadInput,
                        "line " + std::to_string(index) + ": conductance must be >= 0");
    }
    return line.conductance / line.susceptance;
}

/// Median per the lower-order-statistic convention: element (m-1)/2 of the
/// sorted ratios. For even counts this pins deviations against the lower
/// middle value rather than an interpolated one.
double lower_median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

std::string trim(const std::string& s) {
    size_t a = 0;
    size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])) != 0) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])) != 0) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_csv_row(const std::string& row) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(row);
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!row.empty() && row.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& text, const std::string& context) {
    try {
        size_t pos = 0;
        double value = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing");
        return value;
    } catch (const std::exception&) {
        throw ParseError(context + ": not a number: '" + text + "'");
    }
}

bool parse_bool(const std::string& text, const std::string& context) {
    if (text == "1" || text == "true") return true;
    if (text == "0" || text == "false" || text.empty()) return false;
    throw ParseError(context + ": not a boolean: '" + text + "'");
}

struct RawCase {
    std::vector<std::string> labels;
    std::vector<bool> slack;
    std::vector<double> p;
    std::vector<double> q;
    // lines by label
    std::vector<std::string> from;
    std::vector<std::string> to;
    std::vector<double> conductance;
    std::vector<double> susceptance;
};

/// Converts a series impedance (r, x) to the stored admittance parts of
/// Y = 1/(r + jx) = G - jB, i.e. G = r/(r²+x²), B = x/(r²+x²).
std::pair<double, double> admittance_from_impedance(double r, double x, int index) {
    if (!(x > 0.0)) {
        fail_validation(ValidationError::Cause::NonpositiveSusceptance,
                        "line " + std::to_string(index) + ": reactance must be > 0");
    }
    if (r < 0.0) {
        fail_validation(ValidationError::Cause::BadInput,
                        "line " + std::to_string(index) + ": resistance must be >= 0");
    }
    const double denom = r * r + x * x;
    return {r / denom, x / denom};
}

ParsedCase assemble_case(const RawCase& raw, const NetworkOptions& options) {
    const size_t bus_count = raw.labels.size();
    if (bus_count < 2) throw ParseError("a case needs at least two buses");

    std::map<std::string, int> index_of;
    int slack_index = -1;
    int slack_seen = 0;
    for (size_t i = 0; i < bus_count; ++i) {
        if (!index_of.emplace(raw.labels[i], static_cast<int>(i)).second) {
            throw ParseError("duplicate bus id '" + raw.labels[i] + "'");
        }
        if (raw.slack[i]) {
            ++slack_seen;
            slack_index = static_cast<int>(i);
        }
    }
    if (slack_seen != 1) {
        fail_validation(ValidationError::Cause::BadSlack,
                        "expected exactly one slack bus, found " + std::to_string(slack_seen));
    }

    // Relabel: slack -> 0, remaining buses keep input order as 1..n.
    std::vector<int> new_id(bus_count);
    std::vector<Bus> buses;
    buses.reserve(bus_count);
    {
        int next = 1;
        for (size_t i = 0; i < bus_count; ++i) {
            const bool is_slack = static_cast<int>(i) == slack_index;
            new_id[i] = is_slack ? 0 : next++;
            buses.push_back(Bus{new_id[i], is_slack, raw.labels[i]});
        }
    }
    std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });

    std::vector<Line> lines;
    lines.reserve(raw.from.size());
    for (size_t l = 0; l < raw.from.size(); ++l) {
        auto from_it = index_of.find(raw.from[l]);
        auto to_it = index_of.find(raw.to[l]);
        if (from_it == index_of.end() || to_it == index_of.end()) {
            throw ParseError("line " + std::to_string(l) + ": unknown bus id '" +
                             (from_it == index_of.end() ? raw.from[l] : raw.to[l]) + "'");
        }
        lines.push_back(Line{new_id[static_cast<size_t>(from_it->second)],
                             new_id[static_cast<size_t>(to_it->second)], raw.conductance[l],
                             raw.susceptance[l]});
    }

    RadialNetwork network = RadialNetwork::build(std::move(buses), std::move(lines), options);

    const int n = network.non_slack_count();
    Injections injections{Vector::Zero(n), Vector::Zero(n)};
    for (size_t i = 0; i < bus_count; ++i) {
        const int id = new_id[i];
        if (id == 0) {
            if (raw.p[i] != 0.0 || raw.q[i] != 0.0) {
                log_debug("ignoring p/q given at the slack bus");
            }
            continue;
        }
        injections.p[id - 1] = raw.p[i];
        injections.q[id - 1] = raw.q[i];
    }
    return ParsedCase{std::move(network), std::move(injections)};
}

}  // namespace

TreeStructure validate_tree(int bus_count, const std::vector<Line>& lines, int root) {
    const size_t n_buses = static_cast<size_t>(bus_count);
    for (size_t l = 0; l < lines.size(); ++l) {
        const Line& line = lines[l];
        if (line.from < 0 || line.from >= bus_count || line.to < 0 || line.to >= bus_count) {
            fail_validation(ValidationError::Cause::BadInput,
                            "line " + std::to_string(l) + ": bus index out of range");
        }
        if (line.from == line.to) {
            fail_validation(ValidationError::Cause::SelfLoop,
                            "line " + std::to_string(l) + ": self loop at bus " +
                                std::to_string(line.from));
        }
    }

    std::map<std::pair<int, int>, int> seen;
    for (size_t l = 0; l < lines.size(); ++l) {
        auto key = std::minmax(lines[l].from, lines[l].to);
        if (!seen.emplace(std::make_pair(key.first, key.second), static_cast<int>(l)).second) {
            fail_validation(ValidationError::Cause::DuplicateLine,
                            "line " + std::to_string(l) + ": duplicate of an earlier line");
        }
    }

    if (static_cast<int>(lines.size()) > bus_count - 1) {
        fail_validation(ValidationError::Cause::Cycle,
                        "too many lines for a tree (" + std::to_string(lines.size()) + " lines, " +
                            std::to_string(bus_count) + " buses): the network contains a cycle");
    }

    TreeStructure tree;
    tree.parent.assign(n_buses, -1);
    tree.parent_line.assign(n_buses, -1);
    tree.children.assign(n_buses, {});

    for (size_t l = 0; l < lines.size(); ++l) {
        const Line& line = lines[l];
        if (line.to == root) {
            fail_validation(ValidationError::Cause::WrongOrientation,
                            "line " + std::to_string(l) +
                                ": oriented into the slack bus; lines must point away from it");
        }
        if (tree.parent[static_cast<size_t>(line.to)] != -1) {
            fail_validation(ValidationError::Cause::MultipleParents,
                            "bus " + std::to_string(line.to) + " has more than one parent line");
        }
        tree.parent[static_cast<size_t>(line.to)] = line.from;
        tree.parent_line[static_cast<size_t>(line.to)] = static_cast<int>(l);
        tree.children[static_cast<size_t>(line.from)].push_back(line.to);
    }

    if (static_cast<int>(lines.size()) < bus_count - 1) {
        fail_validation(ValidationError::Cause::Disconnected,
                        "too few lines for a spanning tree (" + std::to_string(lines.size()) +
                            " lines, " + std::to_string(bus_count) + " buses)");
    }

    for (auto& kids : tree.children) std::sort(kids.begin(), kids.end());

    // Iterative DFS from the root; children pushed in reverse so they pop in
    // ascending order. Records a bus after all of its subtree (postorder).
    std::vector<int> stack{root};
    std::vector<bool> expanded(n_buses, false);
    std::vector<bool> reached(n_buses, false);
    tree.postorder.reserve(n_buses);
    while (!stack.empty()) {
        const int bus = stack.back();
        if (expanded[static_cast<size_t>(bus)]) {
            stack.pop_back();
            tree.postorder.push_back(bus);
            continue;
        }
        expanded[static_cast<size_t>(bus)] = true;
        reached[static_cast<size_t>(bus)] = true;
        const auto& kids = tree.children[static_cast<size_t>(bus)];
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }

    for (size_t b = 0; b < n_buses; ++b) {
        if (!reached[b]) {
            // Every non-root bus has exactly one parent and the edge count is
            // n-1, so an unreached bus sits on a directed cycle.
            fail_validation(ValidationError::Cause::Cycle,
                            "bus " + std::to_string(b) +
                                " is not reachable from the slack bus: the lines form a cycle");
        }
    }
    return tree;
}

RadialNetwork RadialNetwork::build(std::vector<Bus> buses, std::vector<Line> lines,
                                   const NetworkOptions& options) {
    const int bus_count = static_cast<int>(buses.size());
    if (bus_count < 2) {
        fail_validation(ValidationError::Cause::BadInput, "a network needs at least two buses");
    }
    for (int i = 0; i < bus_count; ++i) {
        const Bus& bus = buses[static_cast<size_t>(i)];
        if (bus.id != i) {
            fail_validation(ValidationError::Cause::BadInput,
                            "bus ids must be 0..n-1 in order (slack first)");
        }
        if (bus.is_slack != (i == 0)) {
            fail_validation(ValidationError::Cause::BadSlack,
                            "exactly bus 0 must be the slack bus");
        }
    }

    std::vector<double> ratios;
    ratios.reserve(lines.size());
    for (size_t l = 0; l < lines.size(); ++l) {
        ratios.push_back(checked_ratio(lines[l], static_cast<int>(l)));
    }

    TreeStructure tree = validate_tree(bus_count, lines, 0);

    RadialNetwork network;
    network.kappa_ = lower_median(ratios);
    for (size_t l = 0; l < ratios.size(); ++l) {
        const double denom = std::max(std::abs(network.kappa_), 1e-300);
        const double deviation = std::abs(ratios[l] - network.kappa_) / denom;
        if (deviation > options.kappa_rel_tol) {
            fail_validation(ValidationError::Cause::NonuniformKappa,
                            "line " + std::to_string(l) + ": G/B ratio " +
                                std::to_string(ratios[l]) + " deviates from the median " +
                                std::to_string(network.kappa_) + " by " +
                                std::to_string(deviation) + " relative (tolerance " +
                                std::to_string(options.kappa_rel_tol) + ")");
        }
    }

    // Canonical line order: line i joins bus i+1 to its parent.
    network.lines_.reserve(lines.size());
    for (int bus = 1; bus < bus_count; ++bus) {
        Line line = lines[static_cast<size_t>(tree.parent_line[static_cast<size_t>(bus)])];
        network.lines_.push_back(line);
    }
    for (int bus = 1; bus < bus_count; ++bus) {
        tree.parent_line[static_cast<size_t>(bus)] = bus - 1;
    }
    network.tree_ = std::move(tree);
    network.labels_.reserve(buses.size());
    for (const Bus& bus : buses) network.labels_.push_back(bus.label);
    return network;
}

ParsedCase parse_network_json(std::istream& in, const NetworkOptions& options) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("top level must be a JSON object");
    if (!doc.contains("buses") || !doc["buses"].is_array()) {
        throw ParseError("missing 'buses' array");
    }
    if (!doc.contains("lines") || !doc["lines"].is_array()) {
        throw ParseError("missing 'lines' array");
    }
    if (doc.contains("v0")) {
        const auto& v0 = doc["v0"];
        if (!v0.is_number() || v0.get<double>() != 1.0) {
            fail_validation(ValidationError::Cause::UnsupportedField,
                            "'v0' is reserved and must equal 1 in this version");
        }
    }

    auto label_of = [](const nlohmann::json& id) -> std::string {
        if (id.is_string()) return id.get<std::string>();
        if (id.is_number_integer()) return std::to_string(id.get<long long>());
        throw ParseError("bus ids must be strings or integers");
    };

    RawCase raw;
    for (const auto& bus : doc["buses"]) {
        if (!bus.is_object() || !bus.contains("id")) {
            throw ParseError("each bus needs an 'id'");
        }
        raw.labels.push_back(label_of(bus["id"]));
        raw.slack.push_back(bus.value("slack", false));
        raw.p.push_back(bus.value("p", 0.0));
        raw.q.push_back(bus.value("q", 0.0));
    }
    size_t index = 0;
    for (const auto& line : doc["lines"]) {
        if (!line.is_object() || !line.contains("from") || !line.contains("to")) {
            throw ParseError("each line needs 'from' and 'to'");
        }
        raw.from.push_back(label_of(line["from"]));
        raw.to.push_back(label_of(line["to"]));
        const bool has_rx = line.contains("r") || line.contains("x");
        const bool has_gb = line.contains("g") || line.contains("b");
        if (has_rx == has_gb) {
            throw ParseError("line " + std::to_string(index) +
                             ": give exactly one of (r, x) or (g, b)");
        }
        if (has_rx) {
            if (!line.contains("r") || !line.contains("x")) {
                throw ParseError("line " + std::to_string(index) + ": both r and x are required");
            }
            auto [g, b] = admittance_from_impedance(line["r"].get<double>(),
                                                    line["x"].get<double>(),
                                                    static_cast<int>(index));
            raw.conductance.push_back(g);
            raw.susceptance.push_back(b);
        } else {
            if (!line.contains("g") || !line.contains("b")) {
                throw ParseError("line " + std::to_string(index) + ": both g and b are required");
            }
            raw.conductance.push_back(line["g"].get<double>());
            raw.susceptance.push_back(line["b"].get<double>());
        }
        ++index;
    }
    return assemble_case(raw, options);
}

ParsedCase parse_network_csv(std::istream& buses, std::istream& lines,
                             const NetworkOptions& options) {
    auto read_table = [](std::istream& in, const std::string& what) {
        std::vector<std::vector<std::string>> rows;
        std::string row;
        while (std::getline(in, row)) {
            if (!row.empty() && row.back() == '\r') row.pop_back();
            if (trim(row).empty()) continue;
            rows.push_back(split_csv_row(row));
        }
        if (rows.empty()) throw ParseError(what + ": empty file");
        return rows;
    };
    auto column = [](const std::vector<std::string>& header, const std::string& name) -> int {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    };
    auto field = [](const std::vector<std::string>& row, int col) -> std::string {
        if (col < 0 || col >= static_cast<int>(row.size())) return "";
        return row[static_cast<size_t>(col)];
    };

    RawCase raw;
    {
        auto rows = read_table(buses, "buses.csv");
        const auto& header = rows[0];
        const int c_id = column(header, "id");
        if (c_id < 0) throw ParseError("buses.csv: missing 'id' column");
        const int c_slack = column(header, "slack");
        const int c_p = column(header, "p");
        const int c_q = column(header, "q");
        for (size_t r = 1; r < rows.size(); ++r) {
            const std::string where = "buses.csv row " + std::to_string(r);
            raw.labels.push_back(field(rows[r], c_id));
            raw.slack.push_back(parse_bool(field(rows[r], c_slack), where));
            const std::string p = field(rows[r], c_p);
            const std::string q = field(rows[r], c_q);
            raw.p.push_back(p.empty() ? 0.0 : parse_double(p, where));
            raw.q.push_back(q.empty() ? 0.0 : parse_double(q, where));
        }
    }
    {
        auto rows = read_table(lines, "lines.csv");
        const auto& header = rows[0];
        const int c_from = column(header, "from");
        const int c_to = column(header, "to");
        if (c_from < 0 || c_to < 0) throw ParseError("lines.csv: missing 'from'/'to' columns");
        const int c_r = column(header, "r");
        const int c_x = column(header, "x");
        const int c_g = column(header, "g");
        const int c_b = column(header, "b");
        const bool has_rx = c_r >= 0 && c_x >= 0;
        const bool has_gb = c_g >= 0 && c_b >= 0;
        if (has_rx == has_gb) {
            throw ParseError("lines.csv: give exactly one of the column pairs (r, x) or (g, b)");
        }
        for (size_t r = 1; r < rows.size(); ++r) {
            const std::string where = "lines.csv row " + std::to_string(r);
            raw.from.push_back(field(rows[r], c_from));
            raw.to.push_back(field(rows[r], c_to));
            if (has_rx) {
                auto [g, b] = admittance_from_impedance(parse_double(field(rows[r], c_r), where),
                                                        parse_double(field(rows[r], c_x), where),
                                                        static_cast<int>(r) - 1);
                raw.conductance.push_back(g);
                raw.susceptance.push_back(b);
            } else {
                raw.conductance.push_back(parse_double(field(rows[r], c_g), where));
                raw.susceptance.push_back(parse_double(field(rows[r], c_b), where));
            }
        }
    }
    return assemble_case(raw, options);
}

ParsedCase load_case(const std::string& path, const NetworkOptions& options) {
    namespace fs = std::filesystem;
    if (fs::is_directory(path)) {
        std::ifstream buses(fs::path(path) / "buses.csv");
        std::ifstream lines(fs::path(path) / "lines.csv");
        if (!buses || !lines) {
            throw ParseError(path + ": expected buses.csv and lines.csv in the directory");
        }
        return parse_network_csv(buses, lines, options);
    }
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        return parse_network_json(in, options);
    }
    throw ParseError(path + ": unsupported case path (use a .json file or a CSV directory)");
}

ReducedLaplacian::ReducedLaplacian(const RadialNetwork& network, const Vector& line_weights)
    : network_(&network), weight_(line_weights) {
    const int n = network.non_slack_count();
    if (weight_.size() != n) throw Error("reduced Laplacian: weight count mismatch");
    if ((weight_.array() <= 0.0).any()) throw Error("reduced Laplacian: weights must be > 0");

    diag_ = Vector::Zero(n);
    for (int bus = 1; bus <= n; ++bus) {
        diag_[bus - 1] += weight_[bus - 1];  // edge to parent
        for (int child : network.children(bus)) diag_[bus - 1] += weight_[child - 1];
    }
    // Leaf elimination in postorder: children are folded into their parent's
    // diagonal before the parent itself is visited.
    for (int bus : network.postorder()) {
        if (bus == 0) continue;
        const int parent = network.parent(bus);
        if (parent != 0) {
            diag_[parent - 1] -= weight_[bus - 1] * weight_[bus - 1] / diag_[bus - 1];
        }
    }
}

Vector ReducedLaplacian::solve(const Vector& rhs) const {
    const int n = size();
    if (rhs.size() != n) throw Error("reduced Laplacian: rhs size mismatch");
    Vector y = rhs;
    const auto& order = network_->postorder();
    for (int bus : order) {
        if (bus == 0) continue;
        const int parent = network_->parent(bus);
        if (parent != 0) y[parent - 1] += weight_[bus - 1] / diag_[bus - 1] * y[bus - 1];
    }
    Vector x(n);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int bus = *it;
        if (bus == 0) continue;
        const int parent = network_->parent(bus);
        const double up = parent == 0 ? 0.0 : x[parent - 1];
        x[bus - 1] = (y[bus - 1] + weight_[bus - 1] * up) / diag_[bus - 1];
    }
    return x;
}

Matrix ReducedLaplacian::dense() const {
    const int n = size();
    Matrix full = Matrix::Zero(n, n);
    for (int bus = 1; bus <= n; ++bus) {
        const int parent = network_->parent(bus);
        full(bus - 1, bus - 1) += weight_[bus - 1];
        if (parent != 0) {
            full(bus - 1, parent - 1) -= weight_[bus - 1];
            full(parent - 1, bus - 1) -= weight_[bus - 1];
            full(parent - 1, parent - 1) += weight_[bus - 1];
        }
    }
    return full;
}

ReducedLaplacian build_reduced_laplacian(const RadialNetwork& network, bool scaled) {
    const int n = network.non_slack_count();
    Vector weights(n);
    const double factor = scaled ? 1.0 + network.kappa() * network.kappa() : 1.0;
    for (int i = 0; i < n; ++i) weights[i] = factor * network.line(i).susceptance;
    return ReducedLaplacian(network, weights);
}

}  // namespace radialflow
