#include "deh/verify.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>

#include "deh/network.hpp"
#include "deh/rng.hpp"
#include "deh/training.hpp"

namespace deh {
namespace {

enum Tag : std::uint64_t {
  kTagSphere = 1,
  kTagTransform,
  kTagPoint,
  kTagGeodesic,
  kTagCascade,
  kTagModel,
};

CounterRng stream_rng(std::uint64_t seed, std::size_t n, Tag tag, std::size_t index) {
  return CounterRng(seed, (static_cast<std::uint64_t>(n) << 48) ^
                              (static_cast<std::uint64_t>(tag) << 40) ^ index);
}

Vec<double> gaussian_vec(CounterRng& rng, std::size_t size) {
  Vec<double> v(size);
  for (double& x : v) x = rng.gaussian();
  return v;
}

// Largest value of fn(i) over i < count; the maximum does not depend on the
// schedule, so any thread count gives the same result.
template <class F>
double parallel_max(std::size_t count, F&& fn) {
  double worst = 0.0;
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(static) reduction(max : worst)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    try {
      const double r = fn(static_cast<std::size_t>(i));
      worst = std::isnan(r) ? INFINITY : std::max(worst, r);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return worst;
}

double max_abs(const Vec<double>& a, const Vec<double>& b) {
  return max_abs_diff(std::span<const double>(a), std::span<const double>(b));
}

Matrix<double> stacked_identity(std::size_t n, double p) {
  Matrix<double> out(n + 1, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = p;
  return out;
}

// Normalized sphere with a Gaussian center and radius in [0.5, 2], scaled by
// a factor in [0.5, 2] to exercise the non-normalized parameterization.
Vec<double> random_sphere(CounterRng& rng, std::size_t n) {
  const Vec<double> center = gaussian_vec(rng, n);
  const double radius = 0.5 + 1.5 * rng.uniform();
  const double scale = 0.5 + 1.5 * rng.uniform();
  return scaled(make_sphere(center, radius), scale);
}

struct Suite {
  const VerifyOptions& options;
  std::vector<CheckResult> checks;

  void record(const std::string& name, const std::string& property, std::size_t cases,
              double residual, double threshold) {
    for (CheckResult& c : checks) {
      if (c.name != name) continue;
      c.cases += cases;
      c.max_residual = std::max(c.max_residual, residual);
      c.passed = c.max_residual <= threshold;
      return;
    }
    std::ostringstream dims;
    dims << options.n_min << ".." << options.n_max;
    checks.push_back({name, property, dims.str(), cases, residual, threshold, residual <= threshold});
  }
};

void check_simplex(Suite& suite, std::size_t n, const SimplexBasis& basis) {
  double vertex = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const Vec<double> pi = basis.vertex(i);
    vertex = std::max(vertex, std::abs(squared_norm(pi) - 1.0));
    for (std::size_t j = i + 1; j <= n; ++j)
      vertex = std::max(vertex, std::abs(dot(pi, basis.vertex(j)) + 1.0 / static_cast<double>(n)));
  }
  for (std::size_t r = 0; r < n; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i <= n; ++i) sum += basis.vertices(r, i);
    vertex = std::max(vertex, std::abs(sum));
  }
  suite.record("simplex_vertices", "unit vertices, pairwise dot -1/n, zero centroid", 1, vertex,
               kAlgebraicTolerance);

  suite.record("change_of_basis_orthogonal", "M^T M = I", 1,
               orthogonality_residual(basis.change), kAlgebraicTolerance);

  const double expected = n % 2 == 1 ? 1.0 : -1.0;
  suite.record("change_of_basis_determinant", "det M = +1 for odd n, -1 for even n", 1,
               std::abs(determinant(basis.change) - expected), kAlgebraicTolerance);

  suite.record("basis_projection", "M P^T = p [I; 0^T]", 1,
               max_abs_diff(vertex_projection(basis), stacked_identity(n, basis.p)),
               kAlgebraicTolerance);

  double rotations = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const Matrix<double> r = simplex_rotation(basis, i);
    rotations = std::max(rotations, orthogonality_residual(r));
    rotations = std::max(rotations, std::abs(determinant(r) - 1.0));
    rotations = std::max(rotations, max_abs(matvec(r, basis.vertex(0)), basis.vertex(i)));
  }
  suite.record("vertex_rotations", "R_Ti special orthogonal, R_Ti p_1 = p_i", n + 1, rotations,
               kAlgebraicTolerance);
}

void check_numeric_instances(Suite& suite, std::size_t n, const SimplexBasis& basis) {
  for (const NumericInstance& inst : numeric_instances()) {
    if (inst.n != n) continue;
    double worst = std::abs(basis.p - inst.p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= n; ++j)
        worst = std::max(worst, std::abs(basis.vertices(i, j) - inst.vertices[i][j]));
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j <= n; ++j)
        worst = std::max(worst, std::abs(basis.change(i, j) - inst.change[i][j]));
    suite.record("numeric_instances", "P, M and p equal closed forms for n = 2, 3, 4", 1, worst,
                 kAlgebraicTolerance);
  }
}

void check_geodesic(Suite& suite, std::size_t n, std::uint64_t seed, std::size_t trials) {
  const double worst = parallel_max(trials, [&](std::size_t t) {
    CounterRng rng = stream_rng(seed, n, kTagGeodesic, t);
    const Vec<double> u = gaussian_vec(rng, n);
    // Every tenth case is antipodal.
    const Vec<double> v = t % 10 == 9 ? scaled(u, -(0.5 + rng.uniform())) : gaussian_vec(rng, n);
    const Matrix<double> q = geodesic_rotation(u, v);
    double r = orthogonality_residual(q);
    r = std::max(r, std::abs(determinant(q) - 1.0));
    r = std::max(r, max_abs(matvec(q, scaled(u, 1.0 / norm(u))), scaled(v, 1.0 / norm(v))));
    const Matrix<double> e = embed_transform(q, 2);
    r = std::max(r, orthogonality_residual(e));
    return r;
  });
  suite.record("geodesic_rotation", "R_O orthogonal, det +1, maps u/|u| to v/|v|", trials, worst,
               kAlgebraicTolerance);
}

// Per (sphere, transform, point) case: the neuron bank property and the
// commutation of bias and both normalizations with V.
void check_neuron(Suite& suite, std::size_t n, const SimplexBasis& basis, std::uint64_t seed,
                  std::size_t trials) {
  std::vector<Matrix<double>> transforms(trials);
  for (std::size_t t = 0; t < trials; ++t)
    transforms[t] = random_orthogonal(n, seed ^ (static_cast<std::uint64_t>(n) << 32) ^ t,
                                      t % 2 == 0 ? 1 : -1);

  struct Worst {
    double bank = 0, fixed = 0, dc = 0, round = 0, bias = 0, unit = 0, nonlinear = 0, scale = 0;
  };
  std::vector<Worst> per_sphere(trials);
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(trials); ++si) {
    const auto s = static_cast<std::size_t>(si);
    try {
      Worst& w = per_sphere[s];
      CounterRng rng = stream_rng(seed, n, kTagSphere, s);
      const Vec<double> sphere = random_sphere(rng, n);
      const double b = rng.gaussian();
      const double a = rng.gaussian();
      const double lambda = 0.25 + 4.0 * rng.uniform();
      HypersphereNeuron<double> neuron = build_neuron(sphere, basis);
      const HypersphereNeuron<double> stretched = build_neuron(scaled(sphere, lambda), basis);
      const Vec<double> ones(n + 1, 1.0);

      for (std::size_t t = 0; t < trials; ++t) {
        const Matrix<double>& r = transforms[t];
        CounterRng prng = stream_rng(seed, n, kTagPoint, s * trials + t);
        const Vec<double> x = gaussian_vec(prng, n);
        const Matrix<double> v = output_representation(r, neuron, basis);
        const Vec<double> y = forward(neuron, embed(x));
        const Vec<double> yr = forward(neuron, embed(matvec(r, x)));
        const Vec<double> vy = matvec(v, y);

        w.bank = std::max(w.bank, max_abs(vy, yr));
        w.fixed = std::max(w.fixed, max_abs(matvec(v, ones), ones));
        double sum = 0.0, sum_r = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
          sum += y[i];
          sum_r += yr[i];
        }
        w.dc = std::max(w.dc, std::abs(sum - sum_r));
        w.round = std::max(w.round, max_abs_diff(recover_transform(v, neuron, basis), r));
        w.bias = std::max(w.bias, max_abs(matvec(v, add_bias(y, b)), add_bias(yr, b)));
        w.unit = std::max(w.unit, max_abs(matvec(v, normalize(y).values), normalize(yr).values));
        w.nonlinear = std::max(w.nonlinear, max_abs(matvec(v, nonlinear_normalize(add_bias(y, b), a)),
                                                    nonlinear_normalize(add_bias(yr, b), a)));
        if (t == 0) {
          const Vec<double> ys = forward(stretched, embed(x));
          w.scale = std::max(w.scale, max_abs(ys, scaled(y, lambda)));
          for (std::size_t i = 0; i <= n; ++i)
            if (std::abs(y[i]) > 1e-9 && (ys[i] > 0) != (y[i] > 0)) w.scale = INFINITY;
        }
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  Worst all;
  for (const Worst& w : per_sphere) {
    all.bank = std::max(all.bank, w.bank);
    all.fixed = std::max(all.fixed, w.fixed);
    all.dc = std::max(all.dc, w.dc);
    all.round = std::max(all.round, w.round);
    all.bias = std::max(all.bias, w.bias);
    all.unit = std::max(all.unit, w.unit);
    all.nonlinear = std::max(all.nonlinear, w.nonlinear);
    all.scale = std::max(all.scale, w.scale);
  }
  const std::size_t cases = trials * trials;
  suite.record("hypersphere_equivariance", "V B(S) X = B(S) R X", cases, all.bank,
               kEquivarianceTolerance);
  suite.record("representation_fixes_ones", "V 1 = 1", cases, all.fixed, kAlgebraicTolerance);
  suite.record("dc_invariance", "sum of B(S) X invariant under O(n)", cases, all.dc,
               kCommutationTolerance);
  suite.record("representation_round_trip", "R recovered from V", cases, all.round,
               kCommutationTolerance);
  suite.record("bias_commutes", "V (Y + b 1) = V Y + b 1", cases, all.bias, kCommutationTolerance);
  suite.record("unit_norm_commutes", "V Y/|Y| = (V Y)/|V Y|", cases, all.unit,
               kCommutationTolerance);
  suite.record("nonlinear_norm_commutes", "V Y/(s(a)(|Y|-1)+1) commutes with V", cases,
               all.nonlinear, kCommutationTolerance);
  suite.record("sphere_homogeneity", "B(lambda S) X = lambda B(S) X, signs kept", trials, all.scale,
               kCommutationTolerance);
}

// Two stacked neurons (n then n+1) with bias and nonlinear normalization:
// the second layer sees the first layer's representation V_1 and responds
// with its own representation of V_1.
void check_cascade(Suite& suite, std::size_t n, const SimplexBasis& basis, std::uint64_t seed,
                   std::size_t trials) {
  const auto next_basis = simplex_basis(n + 1);
  const double worst = parallel_max(trials, [&](std::size_t t) {
    CounterRng rng = stream_rng(seed, n, kTagCascade, t);
    HypersphereNeuron<double> first = build_neuron(random_sphere(rng, n), basis);
    HypersphereNeuron<double> second = build_neuron(random_sphere(rng, n + 1), *next_basis);
    const double b1 = rng.gaussian(), a1 = rng.gaussian();
    const double b2 = rng.gaussian(), a2 = rng.gaussian();
    const Matrix<double> r =
        random_orthogonal(n, seed ^ 0x636173ULL ^ (static_cast<std::uint64_t>(n) << 32) ^ t,
                          t % 2 == 0 ? 1 : -1);
    const Vec<double> x = gaussian_vec(rng, n);
    auto layer = [](const HypersphereNeuron<double>& neuron, const Vec<double>& in, double b,
                    double a) {
      return nonlinear_normalize(add_bias(forward(neuron, embed(in)), b), a);
    };
    const Vec<double> y1 = layer(first, x, b1, a1);
    const Vec<double> y2 = layer(second, y1, b2, a2);
    const Vec<double> y2r = layer(second, layer(first, matvec(r, x), b1, a1), b2, a2);
    const Matrix<double> v1 = output_representation(r, first, basis);
    if (orthogonality_residual(v1) > 1e-8) return std::numeric_limits<double>::infinity();
    const Matrix<double> v2 = output_representation(v1, second, *next_basis);
    return max_abs(matvec(v2, y2), y2r);
  });
  suite.record("cascade_equivariance", "layer 2 output moves by V_2(V_1(R))", trials, worst,
               kEquivarianceTolerance);
}

// Random parameters everywhere, including biases and norm scalars.
std::vector<double> random_params(const ModelLayout& layout, CounterRng& rng) {
  std::vector<double> params = init_params(layout, rng.next_u64());
  for (const NeuronSlot& slot : layout.neurons()) {
    if (slot.bias) params[*slot.bias] = 0.5 * rng.gaussian();
    if (slot.scale) params[*slot.scale] = rng.gaussian();
  }
  for (std::size_t i = 0; i < layout.fc_size(); ++i)
    params[layout.fc_params() + i] += 0.1 * rng.gaussian();
  return params;
}

ModelSpec model_for(std::size_t n, InvariantOp op, bool permutation) {
  ModelSpec spec;
  spec.input_dim = n;
  spec.points = 3;
  spec.layers = {LayerSpec{2}, LayerSpec{2}};
  spec.invariant = op;
  spec.fc_hidden = 8;
  spec.permutation_invariant = permutation;
  spec.pooling = Pooling::max_and_mean;
  spec.center_input = permutation;
  return spec;
}

void check_model(Suite& suite, std::size_t n, std::uint64_t seed, std::size_t trials) {
  const InvariantOp ops[] = {InvariantOp::delta, InvariantOp::delta_edge, InvariantOp::sum,
                             InvariantOp::l2norm};
  double worst64 = 0.0, perm = 0.0;
  std::size_t op_index = 0;
  for (const InvariantOp op : ops) {
    const ModelLayout layout(model_for(n, op, false));
    const ModelLayout perm_layout(model_for(n, op, true));
    CounterRng prng = stream_rng(seed, n, kTagModel, op_index++);
    const std::vector<double> params = random_params(layout, prng);
    const std::vector<double> perm_params = random_params(perm_layout, prng);
    const Vec<double> prepared = prepare(layout, std::span<const double>(params));
    const Vec<double> perm_prepared = prepare(perm_layout, std::span<const double>(perm_params));

    struct Pair {
      double r64, perm;
    };
    std::vector<Pair> results(trials);
    parallel_max(trials, [&](std::size_t t) {
      CounterRng rng = stream_rng(seed, n, kTagModel, 1000 + op_index * trials + t);
      Matrix<double> pts(3, n);
      for (double& v : pts.data()) v = rng.gaussian();
      const Matrix<double> r = random_orthogonal(n, rng.next_u64(), t % 2 == 0 ? 1 : -1);
      const Matrix<double> moved = pts * r.transpose();
      const Vec<double> out = forward_prepared(layout, std::span<const double>(prepared), pts);
      const Vec<double> out_r = forward_prepared(layout, std::span<const double>(prepared), moved);

      Matrix<double> swapped(3, n);
      const std::size_t order[3][3] = {{1, 2, 0}, {2, 0, 1}, {1, 0, 2}};
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < n; ++j) swapped(i, j) = pts(order[t % 3][i], j);
      const Vec<double> po = forward_prepared(perm_layout, std::span<const double>(perm_prepared), pts);
      const Vec<double> ps =
          forward_prepared(perm_layout, std::span<const double>(perm_prepared), swapped);

      Pair& p = results[t];
      p.r64 = max_abs(out, out_r);

      p.perm = max_abs(po, ps);
      return 0.0;
    });
    for (const Pair& p : results) {
      worst64 = std::max(worst64, p.r64);
      perm = std::max(perm, p.perm);
    }
  }
  const std::size_t cases = 4 * trials;
  suite.record("model_invariance_f64", "|model(RX) - model(X)|, every invariant op", cases,
               worst64, kCommutationTolerance);
  suite.record("permutation_invariance", "bit-identical output under point permutations", cases,
               perm, 0.0);
}

// The regression architecture (any invariant op) at initialization scale,
// evaluated in single precision.
void check_regression_f32(Suite& suite, std::size_t n, std::uint64_t seed, std::size_t trials) {
  const InvariantOp ops[] = {InvariantOp::delta, InvariantOp::delta_edge, InvariantOp::sum,
                             InvariantOp::l2norm};
  double worst = 0.0;
  std::size_t op_index = 0;
  for (const InvariantOp op : ops) {
    ModelSpec spec = regression_model_spec();
    spec.input_dim = n;
    spec.invariant = op;
    const ModelLayout layout(spec);
    CounterRng prng = stream_rng(seed, n, kTagModel, 900 + op_index++);
    const std::vector<double> params = init_params(layout, prng.next_u64());
    const Vec<float> prepared = prepare(layout, std::span<const float>(cast_vec<float>(params)));
    worst = std::max(worst, parallel_max(trials, [&](std::size_t t) {
      CounterRng rng = stream_rng(seed, n, kTagModel, 5000 + op_index * trials + t);
      Matrix<double> pts(spec.points, n);
      for (double& v : pts.data()) v = rng.gaussian();
      const Matrix<double> r = random_orthogonal(n, rng.next_u64(), t % 2 == 0 ? 1 : -1);
      const Vec<float> a =
          forward_prepared(layout, std::span<const float>(prepared), pts.cast<float>());
      const Vec<float> b = forward_prepared(layout, std::span<const float>(prepared),
                                            (pts * r.transpose()).cast<float>());
      return max_abs(cast_vec<double>(a), cast_vec<double>(b));
    }));
  }
  suite.record("model_invariance_f32", "|model(RX) - model(X)|, regression model in f32",
               4 * trials, worst, kSinglePrecisionTolerance);
}

std::string format_residual(double value) {
  std::ostringstream out;
  out << std::scientific << std::setprecision(3) << value;
  return out.str();
}

}  // namespace

bool VerificationReport::passed() const {
  for (const CheckResult& c : checks)
    if (!c.passed) return false;
  return true;
}

std::vector<std::string> VerificationReport::failures() const {
  std::vector<std::string> out;
  for (const CheckResult& c : checks)
    if (!c.passed) out.push_back(c.name);
  return out;
}

std::vector<NumericInstance> numeric_instances() {
  const double s3 = std::sqrt(3.0), s5 = std::sqrt(5.0);
  std::vector<NumericInstance> out;

  NumericInstance two{2, {}, {}, std::sqrt(1.5)};
  {
    const double a = (s3 - 1) / 2, b = -(s3 + 1) / 2, k = 1 / std::sqrt(2.0), m = 1 / s3;
    two.vertices = {{k, k * a, k * b}, {k, k * b, k * a}};
    two.change = {{m, m * a, m * b}, {m, m * b, m * a}, {m, m, m}};
  }
  out.push_back(two);

  NumericInstance three{3, {}, {}, 2 / s3};
  {
    const double k = 1 / s3;
    three.vertices = {{k, k, -k, -k}, {k, -k, k, -k}, {k, -k, -k, k}};
    three.change = {{.5, .5, -.5, -.5}, {.5, -.5, .5, -.5}, {.5, -.5, -.5, .5}, {.5, .5, .5, .5}};
  }
  out.push_back(three);

  NumericInstance four{4, {}, {}, s5 / 2};
  {
    const double d = (3 * s5 - 1) / 4, o = -(s5 + 1) / 4;
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<double> prow{0.5}, mrow{1 / s5};
      for (std::size_t j = 0; j < 4; ++j) {
        prow.push_back(0.5 * (i == j ? d : o));
        mrow.push_back((i == j ? d : o) / s5);
      }
      four.vertices.push_back(prow);
      four.change.push_back(mrow);
    }
    four.change.push_back(std::vector<double>(5, 1 / s5));
  }
  out.push_back(four);
  return out;
}

std::vector<std::string> check_names() {
  return {"simplex_vertices",        "change_of_basis_orthogonal", "change_of_basis_determinant",
          "basis_projection",        "vertex_rotations",           "numeric_instances",
          "geodesic_rotation",       "hypersphere_equivariance",   "representation_fixes_ones",
          "dc_invariance",           "representation_round_trip",  "bias_commutes",
          "unit_norm_commutes",      "nonlinear_norm_commutes",    "sphere_homogeneity",
          "cascade_equivariance",    "model_invariance_f64",       "permutation_invariance",
          "model_invariance_f32"};
}

VerificationReport run_verification(const VerifyOptions& options) {
  require(options.trials > 0, ErrorKind::config, "empty suite: trials must be positive");
  require(options.n_min >= 2 && options.n_max <= 12 && options.n_min <= options.n_max,
          ErrorKind::config, "n range must lie within 2..12");
  const auto start = std::chrono::steady_clock::now();
  Suite suite{options, {}};
  for (std::size_t n = options.n_min; n <= options.n_max; ++n) {
    SimplexBasis basis = make_simplex_basis(n);
    basis.change(0, 0) += options.perturb_change_of_basis;
    check_simplex(suite, n, basis);
    check_numeric_instances(suite, n, basis);
    check_geodesic(suite, n, options.seed, options.trials);
    check_neuron(suite, n, basis, options.seed, options.trials);
    check_cascade(suite, n, basis, options.seed, options.trials);
    check_model(suite, n, options.seed, options.trials);
    check_regression_f32(suite, n, options.seed, options.trials);
  }
  VerificationReport report;
  report.checks = std::move(suite.checks);
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_report_csv(const VerificationReport& report, std::ostream& out, bool header) {
  if (header) out << "check,property,dims,cases,max_residual,threshold,passed\n";
  for (const CheckResult& c : report.checks)
    out << c.name << ",\"" << c.property << "\"," << c.dims << "," << c.cases << ","
        << format_double(c.max_residual) << "," << format_double(c.threshold) << ","
        << (c.passed ? "pass" : "FAIL") << "\n";
}

std::string format_report_table(const VerificationReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(29) << "check" << std::setw(8) << "dims" << std::right
      << std::setw(9) << "cases" << std::setw(13) << "residual" << std::setw(13) << "threshold"
      << "  result\n";
  for (const CheckResult& c : report.checks)
    out << std::left << std::setw(29) << c.name << std::setw(8) << c.dims << std::right
        << std::setw(9) << c.cases << std::setw(13) << format_residual(c.max_residual)
        << std::setw(13) << format_residual(c.threshold) << "  " << (c.passed ? "pass" : "FAIL")
        << "\n";
  return out.str();
}

}  // namespace deh
