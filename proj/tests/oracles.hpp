#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. Deliberately naive: no shared code with the library
// beyond the graph container.

#include <cstdint>
#include <vector>

#include "hierprompt/encoder.hpp"
#include "hierprompt/graph.hpp"
#include "hierprompt/metapath.hpp"

namespace oracle {

using hierprompt::HtrnGraph;
using hierprompt::MetaPath;
using hierprompt::NodeId;

struct RandomHtrn {
  HtrnGraph graph;
  std::vector<MetaPath> metapaths;
};

// 2..max_types node types, random relations between type pairs (self pairs
// allowed), up to max_nodes nodes and 1..max_metapaths meta-paths of 1..3 hops
// with explicit relation names.
RandomHtrn random_htrn(std::uint64_t seed, std::size_t max_nodes = 50, std::size_t max_types = 4,
                       std::size_t max_metapaths = 3);

// Enumerates every typed node sequence of the meta-path's length and keeps the
// simple ones whose consecutive pairs are joined by the hop relation, checked
// against the raw edge list.
hierprompt::MetaPathSubgraph brute_force_subgraph(const HtrnGraph& graph, NodeId node, const MetaPath& metapath);

// Fraction of (pos, neg) pairs ordered correctly, ties count one half.
double pairwise_roc(const std::vector<double>& pos, const std::vector<double>& neg);
// Recomputes precision and recall from scratch at every distinct score.
double sweep_average_precision(const std::vector<double>& pos, const std::vector<double>& neg);
double confusion_f1(const std::vector<int>& pred, const std::vector<int>& truth, int positive = 1);

double scalar_bce(const std::vector<double>& p, const std::vector<int>& y);
double scalar_nll(const hierprompt::Matrix& dist, const std::vector<int>& targets);

}  // namespace oracle

namespace oracle {

struct GradcheckRow {
  std::string tensor;
  double rel_error = 0;
};

// Central differences of L = w_nsp * nsp_logit + <W_h, hidden> + <W_m, mlm
// logits> + <W_g, graph predictions> against backward(). Relative error is
// |num - ana| / max(|num| + |ana|, floor) per tensor (Frobenius norms); the
// floor keeps tensors whose true gradient is zero (key biases) from dividing
// round-off by round-off. The soft-vector gradient is reported as "soft".
std::vector<GradcheckRow> gradcheck(hierprompt::EncoderParams params, const hierprompt::MixedSequence& sequence,
                                    hierprompt::Matrix soft, const hierprompt::OutputGrads& weights, double eps,
                                    double floor);

}  // namespace oracle
