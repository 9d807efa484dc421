#pragma once

#include "radialflow/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace radialflow {

/// One bus of the input case. `id` is the internal index after relabeling
/// (slack = 0, the rest 1..n); `label` preserves the input identifier.
struct Bus {
    int id = 0;
    bool is_slack = false;
    std::string label;
};

/// One directed line. `from` must be the bus closer to the root ("parent
/// side"); orientation is validated, not repaired. Admittance is stored as
/// conductance G and susceptance B of the series element, with B > 0.
struct Line {
    int from = 0;
    int to = 0;
    double conductance = 0.0;
    double susceptance = 0.0;
};

/// Parent/child bookkeeping of a validated rooted tree. `postorder` lists
/// every bus with children before parents (root last); `parent[0] == -1`.
struct TreeStructure {
    std::vector<int> parent;
    std::vector<int> parent_line;  // index of the line joining bus to parent
    std::vector<std::vector<int>> children;
    std::vector<int> postorder;
};

/// Checks that the directed lines form a tree rooted at `root` with every
/// line oriented away from the root. Throws ValidationError naming the first
/// offense (cycle, disconnected, multiple parents, wrong orientation, ...).
TreeStructure validate_tree(int bus_count, const std::vector<Line>& lines, int root = 0);

struct NetworkOptions {
    /// Maximum relative deviation of per-line G/B ratios from their median.
    double kappa_rel_tol = 1e-9;
};

/// A balanced radial distribution network with homogeneous R/X ratio.
///
/// Internal convention: buses are 0..n with the slack at 0; lines are stored
/// canonically so that `line(i)` is the edge joining bus i+1 to its parent.
/// All per-line vectors elsewhere in the library use this canonical index.
class RadialNetwork {
  public:
    /// Validates structure and the uniform-ratio requirement, relabels buses
    /// and lines into canonical order. Throws ValidationError on any defect.
    static RadialNetwork build(std::vector<Bus> buses, std::vector<Line> lines,
                               const NetworkOptions& options = {});

    int bus_count() const { return static_cast<int>(labels_.size()); }
    int line_count() const { return static_cast<int>(lines_.size()); }
    /// Number of non-slack buses n (equals line_count for a tree).
    int non_slack_count() const { return line_count(); }

    /// Common R/X ratio of all lines (median of per-line G/B ratios).
    double kappa() const { return kappa_; }

    /// Canonical lines: lines()[i] joins bus i+1 (child, `to`) to its parent
    /// (`from`).
    const std::vector<Line>& lines() const { return lines_; }
    const Line& line(int i) const { return lines_[static_cast<size_t>(i)]; }

    int parent(int bus) const { return tree_.parent[static_cast<size_t>(bus)]; }
    const std::vector<int>& children(int bus) const {
        return tree_.children[static_cast<size_t>(bus)];
    }
    /// Children-before-parents bus order, root last.
    const std::vector<int>& postorder() const { return tree_.postorder; }

    const std::string& label(int bus) const { return labels_[static_cast<size_t>(bus)]; }
    const std::vector<std::string>& labels() const { return labels_; }

  private:
    RadialNetwork() = default;

    std::vector<Line> lines_;
    std::vector<std::string> labels_;
    TreeStructure tree_;
    double kappa_ = 0.0;
};

/// Active/reactive injections at the non-slack buses, in per unit on the
/// network base. Index i holds bus i+1 (canonical order). Loads are negative.
struct Injections {
    Vector p;
    Vector q;
};

struct ParsedCase {
    RadialNetwork network;
    Injections injections;
};

/// Parses the JSON case format: {"buses": [{"id", "slack"?, "p"?, "q"?}],
/// "lines": [{"from","to", "r","x" | "g","b"}], "base"?, "v0"?}. A present
/// "v0" must equal 1 (the field is reserved). (r, x) pairs are converted via
/// G = r/(r²+x²), B = x/(r²+x²).
ParsedCase parse_network_json(std::istream& in, const NetworkOptions& options = {});

/// Parses the two-file CSV case format: buses.csv with header id,slack,p,q
/// and lines.csv with header from,to and either r,x or g,b.
ParsedCase parse_network_csv(std::istream& buses, std::istream& lines,
                             const NetworkOptions& options = {});

/// Loads a case from disk: a `.json` file, or a directory containing
/// buses.csv and lines.csv.
ParsedCase load_case(const std::string& path, const NetworkOptions& options = {});

/// Reduced (slack-grounded) weighted Laplacian of the tree, pre-factored by
/// leaf elimination for O(n) solves. Rows/columns follow canonical bus order
/// 1..n. The matrix is a nonsingular symmetric M-matrix; its inverse is
/// entrywise positive within each slack branch (and on the whole matrix
/// when the slack feeds a single line, which keeps the grounded system
/// irreducible). Branches hanging off the slack separately are decoupled:
/// their cross entries are exactly zero.
class ReducedLaplacian {
  public:
    /// `line_weights[i]` is the weight of canonical line i (must be > 0).
    ReducedLaplacian(const RadialNetwork& network, const Vector& line_weights);

    int size() const { return static_cast<int>(weight_.size()); }

    /// Solves L x = rhs in O(n). Residual is at machine precision
    /// (elimination on a tree is exact Gaussian elimination).
    Vector solve(const Vector& rhs) const;

    /// Dense assembly, for cross-checks against a dense LU oracle.
    Matrix dense() const;

  private:
    const RadialNetwork* network_;
    Vector weight_;  // per canonical line
    Vector diag_;    // eliminated diagonal per non-slack bus
};

/// Builds the reduced Laplacian with weights B (scaled = false) or
/// B̃ = (1+κ²)B (scaled = true).
ReducedLaplacian build_reduced_laplacian(const RadialNetwork& network, bool scaled);

}  // namespace radialflow
