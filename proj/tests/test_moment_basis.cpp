#include <catch2/catch_amalgamated.hpp>

#include "parmor/moment_basis.hpp"
#include "test_support.hpp"

using namespace parmor;
using test_support::Rng;

namespace {

Matrix exact_pi(const ParametricLTI& sys, const SignalGenerator& gen, double p) {
  Realization r = eval(sys, p);
  return solve_sylvester(r.A, gen.S, r.B * gen.L);
}

RowVector exact_moment(const ParametricLTI& sys, const SignalGenerator& gen, double p) {
  return eval(sys, p).C * exact_pi(sys, gen, p);
}

// Scalar plant whose moment is exactly affine in p: A=-1, B=b, C(p)=c0+c1*p.
ParametricLTI affine_moment_plant(double b, double c0, double c1) {
  ParametricLTI sys;
  sys.n = 1;
  sys.A_terms.push_back({CoefficientFunction::constant(1.0), -Matrix::Ones(1, 1)});
  sys.B_terms.push_back({CoefficientFunction::constant(1.0), b * Matrix::Ones(1, 1)});
  sys.C_terms.push_back({CoefficientFunction::constant(1.0), c0 * Matrix::Ones(1, 1)});
  sys.C_terms.push_back(
      {CoefficientFunction::polynomial((Vector(2) << 0.0, 1.0).finished()),
       c1 * Matrix::Ones(1, 1)});
  sys.param_interval = {0.0, 1.0};
  sys.validate();
  return sys;
}

// Steady-state snapshot windows fabricated directly from the moment map, so
// the data carry no transient at all.
SnapshotDataset synthetic_dataset(const ParametricLTI& sys, const SignalGenerator& gen,
                                  const std::vector<double>& params, Index h, double t0,
                                  double t1) {
  SnapshotDataset ds;
  for (double p : params) {
    SnapshotWindow win;
    win.param = p;
    win.times = Vector::LinSpaced(h, t0, t1);
    win.omega.resize(h, gen.nu);
    win.outputs.resize(h);
    const RowVector cpi = exact_moment(sys, gen, p);
    for (Index j = 0; j < h; ++j) {
      const Vector w = omega_at(gen, win.times[j]);
      win.omega.row(j) = w.transpose();
      win.outputs[j] = (cpi * w)(0, 0);
    }
    ds.windows.push_back(std::move(win));
  }
  return ds;
}

std::vector<double> linspace_vec(double lo, double hi, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    v[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return v;
}

}  // namespace

TEST_CASE("interpolation matrices for the stock bases") {
  Matrix v2 = interp_matrix(BasisSet::polynomial(2), {0.0, 1.0});
  Matrix v2_ref(2, 2);
  v2_ref << 1.0, 0.0, 1.0, 1.0;
  REQUIRE((v2 - v2_ref).norm() == 0.0);

  Matrix v3 = interp_matrix(BasisSet::polynomial(3), {0.0, 1.0, 2.0});
  Matrix v3_ref(3, 3);
  v3_ref << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 4.0;
  REQUIRE((v3 - v3_ref).norm() == 0.0);

  Vector centers = (Vector(3) << 0.2, 0.5, 0.8).finished();
  auto rbf = BasisSet::gaussian_rbf(centers, 0.3 * Vector::Ones(3));
  Matrix g = interp_matrix(rbf, {0.2, 0.5, 0.8});
  for (Index j = 0; j < 3; ++j) REQUIRE(g(j, j) == 1.0);

  auto four = BasisSet::fourier(2.0, 3);
  RowVector f = four.eval(0.5);
  REQUIRE(f[0] == 1.0);
  REQUIRE(f[1] == Catch::Approx(std::sin(M_PI * 0.5)));
  REQUIRE(f[2] == Catch::Approx(std::cos(M_PI * 0.5)).margin(1e-15));
}

TEST_CASE("fit reproduces an affine moment exactly") {
  auto sys = affine_moment_plant(1.0, 2.0, -0.7);
  auto gen = from_frequencies(Vector(), true);
  WeightMatrix w = fit_model_based(sys, gen, BasisSet::polynomial(2), {0.25, 0.75});
  REQUIRE(w.gamma(0, 0) == Catch::Approx(2.0).margin(1e-10));
  REQUIRE(w.gamma(1, 0) == Catch::Approx(-0.7).margin(1e-10));
  for (double p : {0.25, 0.75, 0.5}) {
    REQUIRE((eval_basis_moment(w, p) - exact_moment(sys, gen, p)).norm() < 1e-10);
  }
}

TEST_CASE("held-out fit error stays below the training truncation level") {
  auto sys = make_benchmark(2);
  auto gen = from_frequencies(Vector::Ones(1), false);
  auto params = linspace_vec(0.1, 1.0, 10);
  WeightMatrix w = fit_model_based(sys, gen, BasisSet::polynomial(3), params);
  double train = 0.0;
  for (double p : params) {
    RowVector exact = exact_moment(sys, gen, p);
    train = std::max(train, (eval_basis_moment(w, p) - exact).norm() / exact.norm());
  }
  RowVector exact_h = exact_moment(sys, gen, 0.37);
  const double held = (eval_basis_moment(w, 0.37) - exact_h).norm() / exact_h.norm();
  REQUIRE(held <= train);
}

TEST_CASE("square fit interpolates the sampled rows") {
  auto sys = make_benchmark(2);
  auto gen = from_frequencies(Vector::Ones(1), false);
  std::vector<double> params{0.2, 0.5, 0.8};
  WeightMatrix w = fit_model_based(sys, gen, BasisSet::polynomial(3), params);
  for (double p : params) {
    RowVector row = exact_moment(sys, gen, p);
    REQUIRE((eval_basis_moment(w, p) - row).norm() <= 1e-9 * row.norm());
  }
}

TEST_CASE("vanishing ridge agrees with the plain fit") {
  auto sys = make_benchmark(2);
  auto gen = from_frequencies(Vector::Ones(1), false);
  auto params = linspace_vec(0.1, 1.0, 10);
  auto basis = BasisSet::polynomial(3);
  WeightMatrix plain = fit_model_based(sys, gen, basis, params);
  WeightMatrix ridge = fit_ridge(sys, gen, basis, params, 1e-12 * Vector::Ones(3));
  REQUIRE((plain.gamma - ridge.gamma).norm() <= 1e-8 * plain.gamma.norm());
  REQUIRE(ridge.ridge.has_value());
}

TEST_CASE("ridge survives a duplicated basis column") {
  auto sys = make_benchmark(2);
  auto gen = from_frequencies(Vector::Ones(1), false);
  auto params = linspace_vec(0.1, 1.0, 6);
  Vector centers = (Vector(3) << 0.5, 0.5, 0.9).finished();
  Vector widths = (Vector(3) << 0.2, 0.2, 0.2).finished();
  auto dup = BasisSet::gaussian_rbf(centers, widths);
  REQUIRE_THROWS_AS(fit_model_based(sys, gen, dup, params), RankDeficient);
  WeightMatrix w = fit_ridge(sys, gen, dup, params, Vector::Ones(3));
  REQUIRE(w.gamma.allFinite());
}

TEST_CASE("scalar ridge normal equation") {
  auto sys = affine_moment_plant(2.0, 1.0, 0.0);  // moment is constant 2
  auto gen = from_frequencies(Vector(), true);
  WeightMatrix w =
      fit_ridge(sys, gen, BasisSet::polynomial(1), {0.5}, Vector::Ones(1));
  REQUIRE(w.gamma(0, 0) == Catch::Approx(1.0));  // 2 / (1 + 1)
}

TEST_CASE("snapshot estimator recovers the model-based fit from clean data") {
  auto sys = affine_moment_plant(1.0, 1.0, 0.5);
  auto gen = from_frequencies(Vector::Ones(1), false);
  std::vector<double> params{0.2, 0.4, 0.6, 0.8};
  auto basis = BasisSet::polynomial(2);
  WeightMatrix mb = fit_model_based(sys, gen, basis, params);
  SnapshotDataset ds = synthetic_dataset(sys, gen, params, 8, 3.0, 5.0);
  WeightMatrix dd = fit_data_driven(ds, basis);
  REQUIRE((dd.gamma - mb.gamma).norm() <= 1e-8 * mb.gamma.norm());
  REQUIRE(dd.data_driven);
  REQUIRE(dd.data->h == 8);
  REQUIRE(dd.data->K == 4);
}

TEST_CASE("estimator error decays as the window moves past the transient") {
  auto sys = make_benchmark(2, {-2.0, -1.0}, {2.0, 5.0}, {0.1, 1.0});
  auto gen = from_frequencies((Vector(2) << 1.0, 3.0).finished(), false);
  std::vector<double> params{0.3, 0.5, 0.7, 0.9};
  auto basis = BasisSet::polynomial(2);
  WeightMatrix mb = fit_model_based(sys, gen, basis, params);
  // Slowest decay among the sampled parameters: Re = 0.3 * (-1).
  const double tau = 1.0 / 0.3;
  SimConfig cfg;
  cfg.dt = 1e-3;
  double prev = 1e300;
  for (double mult : {5.0, 10.0, 20.0}) {
    const double start = mult * tau;
    SnapshotDataset ds = collect_snapshots(sys, gen, params, start, start + 2.0, 16, cfg);
    WeightMatrix dd = fit_data_driven(ds, basis);
    const double err = (dd.gamma - mb.gamma).norm();
    REQUIRE(err < prev);
    prev = err;
  }
}

TEST_CASE("window length boundary") {
  auto sys = affine_moment_plant(1.0, 1.0, 0.5);
  auto gen = from_frequencies(Vector::Ones(1), false);  // nu = 2
  std::vector<double> params{0.2, 0.5, 0.8};
  auto basis = BasisSet::polynomial(2);
  SnapshotDataset ok = synthetic_dataset(sys, gen, params, 2, 3.0, 5.0);
  REQUIRE_NOTHROW(fit_data_driven(ok, basis));
  SnapshotDataset bad = synthetic_dataset(sys, gen, params, 1, 3.0, 3.0);
  REQUIRE_THROWS_AS(fit_data_driven(bad, basis), WindowTooShort);
}

TEST_CASE("weight evaluation conventions") {
  WeightMatrix w;
  w.basis = BasisSet::polynomial(3);
  w.param_interval = {0.0, 1.0};
  w.gamma = Matrix::Zero(3, 2);
  w.gamma.row(0) << 1.5, -2.0;
  RowVector a = eval_basis_moment(w, 0.2);
  RowVector b = eval_basis_moment(w, 0.9);
  REQUIRE((a - b).norm() == 0.0);
  REQUIRE(a[0] == 1.5);
  REQUIRE_THROWS_AS(eval_basis_moment(w, 1.5), ParameterOutOfRange);
}

TEST_CASE("fitted weights are least-squares optimal") {
  auto sys = make_benchmark(2);
  auto gen = from_frequencies(Vector::Ones(1), false);
  auto params = linspace_vec(0.1, 1.0, 8);
  auto basis = BasisSet::polynomial(3);
  WeightMatrix w = fit_model_based(sys, gen, basis, params);
  Matrix rows(8, gen.nu);
  for (int k = 0; k < 8; ++k)
    rows.row(k) = exact_moment(sys, gen, params[static_cast<std::size_t>(k)]);
  Matrix phi = interp_matrix(basis, params);
  auto cost = [&](const Matrix& g) { return (phi * g - rows).squaredNorm(); };
  const double best = cost(w.gamma);
  Rng rng(17);
  for (int t = 0; t < 20; ++t) {
    Matrix pert = w.gamma + std::pow(10.0, rng.uniform(-6.0, 0.0)) *
                                rng.matrix(w.gamma.rows(), w.gamma.cols());
    REQUIRE(cost(pert) >= best);
  }
}

TEST_CASE("factored estimator matches the explicit Kronecker solve") {
  auto gen = from_frequencies(Vector::Ones(1), false);  // nu = 2
  const Index h = 6, big_k = 4, n_basis = 3;
  Rng rng(29);
  SnapshotDataset ds;
  std::vector<double> params{0.1, 0.4, 0.7, 1.0};
  Vector times = Vector::LinSpaced(h, 0.3, 2.1);
  for (Index k = 0; k < big_k; ++k) {
    SnapshotWindow win;
    win.param = params[static_cast<std::size_t>(k)];
    win.times = times;
    win.omega.resize(h, gen.nu);
    for (Index j = 0; j < h; ++j) win.omega.row(j) = omega_at(gen, times[j]).transpose();
    win.outputs = rng.matrix(h, 1);
    ds.windows.push_back(std::move(win));
  }
  auto basis = BasisSet::polynomial(n_basis);
  WeightMatrix w = fit_data_driven(ds, basis);

  // Explicit route: stack kron(Upsilon, U) and solve for vec(Gamma^T).
  Matrix upsilon = interp_matrix(basis, params);
  const Matrix& u = ds.windows[0].omega;
  Matrix big = Matrix::Zero(h * big_k, gen.nu * n_basis);
  Vector rhs(h * big_k);
  for (Index k = 0; k < big_k; ++k) {
    for (Index j = 0; j < n_basis; ++j)
      big.block(k * h, j * gen.nu, h, gen.nu) = upsilon(k, j) * u;
    rhs.segment(k * h, h) = ds.windows[static_cast<std::size_t>(k)].outputs;
  }
  Vector x = least_squares(big, rhs);
  Matrix gamma_t = Eigen::Map<Matrix>(x.data(), gen.nu, n_basis);
  REQUIRE((w.gamma - gamma_t.transpose()).norm() <= 1e-10 * std::max(1.0, x.norm()));
}

TEST_CASE("noise averages out as the window grows") {
  auto sys = affine_moment_plant(1.0, 1.0, 0.5);
  auto gen = from_frequencies(Vector::Ones(1), false);
  std::vector<double> params{0.2, 0.4, 0.6, 0.8};
  auto basis = BasisSet::polynomial(2);
  WeightMatrix mb = fit_model_based(sys, gen, basis, params);
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto run = [&](Index h) {
      SnapshotDataset ds = synthetic_dataset(sys, gen, params, h, 3.0, 9.0);
      ds = add_output_noise(ds, 1e-3, seed);
      return (fit_data_driven(ds, basis).gamma - mb.gamma).norm();
    };
    ratios.push_back(run(128) / run(32));
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = 0.5 * (ratios[9] + ratios[10]);
  REQUIRE(median <= 0.7);
}

TEST_CASE("training residual never grows with more basis functions") {
  auto sys = make_benchmark(2);
  auto gen = from_frequencies(Vector::Ones(1), false);
  auto params = linspace_vec(0.1, 1.0, 10);
  Matrix rows(10, gen.nu);
  for (int k = 0; k < 10; ++k)
    rows.row(k) = exact_moment(sys, gen, params[static_cast<std::size_t>(k)]);
  double prev = 1e300;
  for (Index n = 1; n <= 6; ++n) {
    WeightMatrix w = fit_model_based(sys, gen, BasisSet::polynomial(n), params);
    double res = 0.0;
    for (int k = 0; k < 10; ++k)
      res += (eval_basis_moment(w, params[static_cast<std::size_t>(k)]) - rows.row(k))
                 .squaredNorm();
    REQUIRE(res <= prev * (1.0 + 1e-10) + 1e-14);
    prev = res;
  }
}

TEST_CASE("fit guards") {
  auto sys = make_benchmark(2);
  auto gen = from_frequencies(Vector::Ones(1), false);
  REQUIRE_THROWS_AS(
      fit_model_based(sys, gen, BasisSet::polynomial(4), {0.2, 0.5, 0.8}),
      RankDeficient);
  REQUIRE_THROWS_AS(
      fit_model_based(sys, gen, BasisSet::polynomial(2), {0.5, 0.5}),
      InvalidArgument);
  // Insufficient data volume for the basis: h*K < nu*N.
  auto plant = affine_moment_plant(1.0, 1.0, 0.5);
  SnapshotDataset tiny = synthetic_dataset(plant, gen, {0.2, 0.6}, 2, 3.0, 5.0);
  REQUIRE_THROWS_AS(fit_data_driven(tiny, BasisSet::polynomial(3)), RankDeficient);
}
