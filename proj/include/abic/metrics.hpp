#pragma once

// Precision / recall / F1 at three levels: skeleton adjacencies, arrowhead
// endpoint marks, and tail endpoint marks.
//
// Conventions: precision with nothing predicted is 0, recall with nothing to
// find is 1, F1 with p + r = 0 is 0. A bidirected edge contributes two arrow
// marks.

#include <algorithm>
#include <set>
#include <tuple>

#include "abic/errors.hpp"
#include "abic/graph.hpp"

namespace abic::metrics {

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class Mark { tail, arrow };

/// Mark at `vertex` on the edge between pair (lo, hi), lo < hi.
struct EndpointMark {
  int lo = 0;
  int hi = 0;
  int vertex = 0;
  Mark mark = Mark::tail;

  auto operator<=>(const EndpointMark&) const = default;
};

inline PrfScores make_scores(std::size_t true_positive, std::size_t predicted,
                             std::size_t actual) {
  PrfScores s;
  s.precision = predicted == 0 ? 0.0 : static_cast<double>(true_positive) / predicted;
  s.recall = actual == 0 ? 1.0 : static_cast<double>(true_positive) / actual;
  s.f1 = (s.precision + s.recall) == 0.0 ? 0.0
                                         : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

template <class T>
PrfScores compare_sets(const std::set<T>& est, const std::set<T>& truth) {
  std::size_t hits = 0;
  for (const auto& item : est) hits += truth.count(item);
  return make_scores(hits, est.size(), truth.size());
}

inline void check_same_dim(const AdmgStructure& est, const AdmgStructure& truth) {
  if (est.dim() != truth.dim()) throw ParameterError("structures have different dimensions");
}

inline std::set<std::pair<int, int>> adjacencies(const AdmgStructure& s) {
  std::set<std::pair<int, int>> out;
  const int d = static_cast<int>(s.dim());
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (s.directed(i, j) != 0 || s.directed(j, i) != 0 || s.bidirected(i, j) != 0)
        out.emplace(i, j);
  return out;
}

inline std::set<EndpointMark> endpoint_marks(const AdmgStructure& s) {
  std::set<EndpointMark> out;
  const int d = static_cast<int>(s.dim());
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      if (i == j) continue;
      const int lo = std::min(i, j);
      const int hi = std::max(i, j);
      if (s.directed(j, i) != 0) {
        out.insert({lo, hi, j, Mark::tail});
        out.insert({lo, hi, i, Mark::arrow});
      }
      if (s.bidirected(j, i) != 0) {
        out.insert({lo, hi, i, Mark::arrow});
        out.insert({lo, hi, j, Mark::arrow});
      }
    }
  return out;
}

inline std::set<EndpointMark> marks_of_kind(const AdmgStructure& s, Mark kind) {
  std::set<EndpointMark> out;
  for (const auto& m : endpoint_marks(s))
    if (m.mark == kind) out.insert(m);
  return out;
}

inline PrfScores skeleton_prf(const AdmgStructure& est, const AdmgStructure& truth) {
  check_same_dim(est, truth);
  return compare_sets(adjacencies(est), adjacencies(truth));
}

inline PrfScores arrowhead_prf(const AdmgStructure& est, const AdmgStructure& truth) {
  check_same_dim(est, truth);
  return compare_sets(marks_of_kind(est, Mark::arrow), marks_of_kind(truth, Mark::arrow));
}

inline PrfScores tail_prf(const AdmgStructure& est, const AdmgStructure& truth) {
  check_same_dim(est, truth);
  return compare_sets(marks_of_kind(est, Mark::tail), marks_of_kind(truth, Mark::tail));
}

struct StructureScores {
  PrfScores skeleton;
  PrfScores arrowhead;
  PrfScores tail;
};

inline StructureScores score_all(const AdmgStructure& est, const AdmgStructure& truth) {
  return {skeleton_prf(est, truth), arrowhead_prf(est, truth), tail_prf(est, truth)};
}

}  // namespace abic::metrics
