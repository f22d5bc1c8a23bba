#include "efvms/quadrature.hpp"

#include <cmath>

#include "efvms/errors.hpp"

namespace efvms {

namespace {

void add_orbit3(TriangleRule& r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  r.nodes.push_back({a, a, w});
  r.nodes.push_back({b, a, w});
  r.nodes.push_back({a, b, w});
}

void add_orbit6(TriangleRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  r.nodes.push_back({a, b, w});
  r.nodes.push_back({b, a, w});
  r.nodes.push_back({b, c, w});
  r.nodes.push_back({c, b, w});
  r.nodes.push_back({a, c, w});
  r.nodes.push_back({c, a, w});
}

TriangleRule make_degree1() {
  TriangleRule r;
  r.degree = 1;
  r.nodes.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0});
  return r;
}

TriangleRule make_degree2() {
  TriangleRule r;
  r.degree = 2;
  add_orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
  return r;
}

// Radon's 7-point rule, closed form.
TriangleRule make_degree5() {
  TriangleRule r;
  r.degree = 5;
  const double s15 = std::sqrt(15.0);
  r.nodes.push_back({1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0});
  add_orbit3(r, (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
  add_orbit3(r, (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
  return r;
}

// Dunavant's 12-point rule.
TriangleRule make_degree6() {
  TriangleRule r;
  r.degree = 6;
  add_orbit3(r, 0.24928674517091042129163855310702, 0.11678627572637936602528961138558);
  add_orbit3(r, 0.063089014491502228340331602870819, 0.050844906370206816920936809106869);
  add_orbit6(r, 0.053145049844816947353249671631398, 0.31035245103378440541660773395655,
             0.082851075618373575193553456420442);
  return r;
}

LineRule make_gauss(int n) {
  LineRule r;
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 0 ? 1.0 : (n == 1 ? x : p1);
      const double pn1 = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pn1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.points.push_back(0.5 * (1.0 - x));
    r.weights.push_back(1.0 / ((1.0 - x * x) * dp * dp));
  }
  return r;
}

}  // namespace

const TriangleRule& triangle_rule(int degree) {
  static const TriangleRule d1 = make_degree1();
  static const TriangleRule d2 = make_degree2();
  static const TriangleRule d5 = make_degree5();
  static const TriangleRule d6 = make_degree6();
  if (degree <= 1) return d1;
  if (degree == 2) return d2;
  if (degree <= 5) return d5;
  if (degree == 6) return d6;
  throw Error("no triangle rule of degree " + std::to_string(degree));
}

const LineRule& gauss_line_rule(int n) {
  static const LineRule rules[] = {make_gauss(1), make_gauss(2), make_gauss(3), make_gauss(4), make_gauss(5)};
  if (n < 1 || n > 5) throw Error("no Gauss line rule with " + std::to_string(n) + " points");
  return rules[n - 1];
}

}  // namespace efvms
