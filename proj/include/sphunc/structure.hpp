#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sphunc/sphere.hpp"

// Sparse directed structure discovery on latent trajectories: VAR(2)
// initialization with group significance tests, Lasso refinement, gate
// scores and ranking metrics.
namespace sphunc {

// Per-node latent trajectory, rows = time, cols = sphere coordinates.
using LatentSeries = std::vector<Eigen::MatrixXd>;

struct EdgeScore {
  int src = 0;
  int dst = 0;
  double score = 0.0;
  bool significant = false;
};

struct CandidateStructure {
  std::vector<std::vector<int>> parents;  // indexed by destination node
  int sparsity_s = 0;
};

struct VarInitResult {
  std::vector<EdgeScore> edges;
  bool rank_deficient = false;  // ridge stabilization was applied
};

// Group VAR(lag) regression of every node's coordinates on all lagged
// coordinates; score = Frobenius norm of the source's coefficient block,
// significance by group F-test with Benjamini-Hochberg correction at alpha.
VarInitResult var_init(const LatentSeries& series, int lag = 2,
                       double alpha = 0.01);

// L1-regularized refinement over the significant candidate edges; keeps at
// most s parents per node (nonzero coefficient groups ranked by norm).
CandidateStructure lasso_refine(const LatentSeries& series,
                                const std::vector<EdgeScore>& candidates,
                                double lambda, int s, int lag = 2);

// Forward-chaining (time-respecting) cross-validation for the Lasso penalty.
double select_lambda(const LatentSeries& series,
                     const std::vector<EdgeScore>& candidates,
                     const std::vector<double>& grid, int s, int lag = 2,
                     int folds = 5);

// gamma_ij = score_ij / max_{j' in Pa(i)} score_ij'.
GateTable gate_scores(const CandidateStructure& structure,
                      const std::vector<EdgeScore>& edge_scores);

// Fraction of the top-k predicted edges present in the truth set.
double precision_at_k(const std::vector<EdgeScore>& predicted,
                      const std::vector<std::pair<int, int>>& truth, int k = 10);

// Delimited-text edge lists: "src,dst,score,significant", one edge per line.
void write_edges(const std::string& path, const std::vector<EdgeScore>& edges);
std::vector<EdgeScore> read_edges(const std::string& path);

}  // namespace sphunc
