#pragma once

#include <vector>

namespace efvms {

/// Symmetric triangle rule on the reference triangle (0,0),(1,0),(0,1).
/// Weights sum to one, so ∫_K f ≈ |K| Σ w_q f(x_q).
struct TriangleRule {
  struct Node {
    double xi;
    double eta;
    double weight;
  };
  int degree = 0;
  std::vector<Node> nodes;
};

/// Smallest built-in rule that is exact for polynomials of `degree`
/// (available up to 6).
const TriangleRule& triangle_rule(int degree);

/// Gauss-Legendre rule on [0, 1] with `n` points (weights sum to one).
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};
const LineRule& gauss_line_rule(int n);

}  // namespace efvms
