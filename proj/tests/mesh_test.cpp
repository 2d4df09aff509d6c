#include "ifrac/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

double f(double s) { return std::sin(3.0 * s) * std::exp(s); }
double df(double s) { return (3.0 * std::cos(3.0 * s) + std::sin(3.0 * s)) * std::exp(s); }

// L2 error of the Hermite interpolant by composite Simpson sampling, finer
// than the mesh by a factor 64.
double interpolation_error(int n) {
  const auto mesh = ifrac::make_mesh(n, 0.0, 1.0);
  const auto field = ifrac::interpolate(mesh, f, df);
  const int m = 64 * n;
  const double dx = 1.0 / m;
  double sum = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double s = i * dx;
    const double e = ifrac::eval_field(field, s).u - f(s);
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * e * e;
  }
  return std::sqrt(sum * dx / 3.0);
}

TEST(Mesh, Geometry) {
  const auto m = ifrac::make_mesh(10, 0.0, 0.5);
  EXPECT_EQ(m.n_nodes(), 11);
  EXPECT_EQ(m.n_dofs(), 22);
  EXPECT_DOUBLE_EQ(m.h(), 0.05);
  EXPECT_DOUBLE_EQ(m.node(10), 0.5);
  EXPECT_THROW(ifrac::make_mesh(1, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ifrac::make_mesh(4, 1.0, 1.0), std::invalid_argument);
}

TEST(Mesh, LocateAssignsEndpointToLastElement) {
  const auto m = ifrac::make_mesh(4, 0.0, 1.0);
  EXPECT_EQ(ifrac::locate(m, 1.0).first, 3);
  EXPECT_DOUBLE_EQ(ifrac::locate(m, 1.0).second, 1.0);
  EXPECT_EQ(ifrac::locate(m, 0.0).first, 0);
  EXPECT_EQ(ifrac::locate(m, 0.3).first, 1);
  EXPECT_THROW(ifrac::locate(m, 1.1), std::out_of_range);
}

TEST(Quadrature, FourPointRuleIsExactForDegreeSeven) {
  const auto q = ifrac::gauss4<long double>();
  for (int p = 0; p <= 7; ++p) {
    long double sum = 0;
    for (int i = 0; i < 4; ++i) sum += q.weights[i] * std::pow(q.points[i], p);
    EXPECT_NEAR(double(sum), 1.0 / (p + 1), 1e-17) << "degree " << p;
  }
}

TEST(Hermite, ShapeFunctionsReproduceCubics) {
  // u = 2 - s + 3 s^2 - s^3 on [0.4, 0.9].
  const double a = 0.4, h = 0.5;
  auto u = [](double s) { return 2 - s + 3 * s * s - s * s * s; };
  auto du = [](double s) { return -1 + 6 * s - 3 * s * s; };
  const double dofs[4] = {u(a), du(a), u(a + h), du(a + h)};
  for (double xi : {0.0, 0.2, 0.5, 0.77, 1.0}) {
    const auto sh = ifrac::shape_eval(xi, h);
    double v = 0, d = 0, d2 = 0, d3 = 0;
    for (int i = 0; i < 4; ++i) {
      v += sh.N[i] * dofs[i];
      d += sh.dN[i] * dofs[i];
      d2 += sh.d2N[i] * dofs[i];
      d3 += sh.d3N[i] * dofs[i];
    }
    const double s = a + xi * h;
    EXPECT_NEAR(v, u(s), 1e-13);
    EXPECT_NEAR(d, du(s), 1e-12);
    EXPECT_NEAR(d2, 6 - 6 * s, 1e-11);
    EXPECT_NEAR(d3, -6.0, 1e-10);
  }
}

TEST(Hermite, InterpolationConvergesAtFourthOrder) {
  double prev = interpolation_error(8);
  for (int n : {16, 32, 64}) {
    const double err = interpolation_error(n);
    const double ratio = prev / err;
    EXPECT_GE(ratio, 14.0) << "n = " << n;
    EXPECT_LE(ratio, 18.0) << "n = " << n;
    prev = err;
  }
}

TEST(Hermite, FieldRejectsWrongDofCount) {
  const auto m = ifrac::make_mesh(4, 0.0, 1.0);
  EXPECT_THROW(ifrac::HermiteField(m, Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

}  // namespace
