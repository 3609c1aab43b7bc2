#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcflab/curvature.hpp"
#include "mcflab/mesh.hpp"
#include "mcflab/numerics.hpp"
#include "mcflab/remesh.hpp"
#include "mcflab/space_form.hpp"

namespace mcflab {

enum class Scheme { Explicit, SemiImplicit };

struct MeshDegenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Enclosed volume of the region bounded by the mesh. Flat chart: divergence
// theorem. Curved charts: flux of the unit-divergence radial field about the
// chart pole, integrated with vertex quadrature.
inline double enclosed_volume(const SurfaceMesh& mesh, const SpaceForm& space,
                              const CurvatureField* field = nullptr) {
  if (!space.curved()) return enclosed_volume_flat(mesh);
  if (!field) throw std::invalid_argument("enclosed_volume: field required on curved ambients");
  const double R = space.radius();
  Vec4 pole(0, 0, 0, R);
  // g(rho) = int_0^rho sn(s)^2 ds / sn(rho)^2 with sn the model area profile;
  // closed forms: sphere int R^2 sin^2(s/R) = R^2 (rho - R sin cos)/2, and the
  // sinh analogue (R sinh cosh - rho) R^2 / 2.
  auto g = [&](double rho) {
    if (rho <= 0) return 0.0;
    const double u = rho / R;
    if (space.kind() == AmbientKind::Sphere) {
      const double sn = R * std::sin(u);
      return 0.5 * R * R * (rho - R * std::sin(u) * std::cos(u)) / (sn * sn);
    }
    const double sn = R * std::sinh(u);
    return 0.5 * R * R * (R * std::sinh(u) * std::cosh(u) - rho) / (sn * sn);
  };
  KahanSum vol;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const Vec4 x = mesh.vertex(v);
    const double rho = space.distance(pole, x);
    Vec4 away = space.tangent_project(x, -pole);
    const double len = space.norm(away);
    if (len == 0.0 || rho == 0.0) continue;
    away /= len;
    const Vec4 nu = field->normal.row(v).transpose();
    vol.add(g(rho) * space.dot(away, nu) * field->dmu[v]);
  }
  return vol.value();
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

struct FlowState {
  SurfaceMesh mesh;
  CurvatureField field;
  TimeAccumulator t_acc;
  double t = 0.0;
  long step_index = 0;
  double last_dt = 0.0;
  std::shared_ptr<GeometryCache> cache;

  static FlowState initial(SurfaceMesh mesh_in, const SpaceForm& space) {
    FlowState s;
    s.mesh = std::move(mesh_in);
    s.cache = std::make_shared<GeometryCache>(build_geometry_cache(s.mesh));
    s.field = compute_curvature(s.mesh, space, s.cache.get());
    return s;
  }
};

// Reusable solver workspace for the semi-implicit step. The system
// M + dt W is a small perturbation of the mass matrix, so conjugate
// gradients with the current positions as warm start converge in a few
// iterations; the LDLT factorization is kept as fallback.
struct StepWorkspace {
  Eigen::SparseMatrix<double> sys;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

inline double adaptive_dt(const CurvatureField& field, double cfl) {
  if (!(cfl > 0.0) || !(cfl <= 1.0)) {
    throw std::invalid_argument("adaptive_dt: cfl must lie in (0, 1]");
  }
  const double max_a2 = field.max_A2();
  if (!std::isfinite(max_a2) || !std::isfinite(field.min_edge)) {
    throw std::invalid_argument("adaptive_dt: non-finite curvature data");
  }
  const double curb = max_a2 > 0.0 ? 1.0 / max_a2
                                   : std::numeric_limits<double>::infinity();
  const double edge = 0.25 * field.min_edge * field.min_edge;
  const double dt = cfl * std::min(curb, edge);
  if (!(dt > 0.0)) throw std::invalid_argument("adaptive_dt: vanishing step");
  return dt;
}

inline FlowState step(const FlowState& state, const SpaceForm& space, double dt,
                      Scheme scheme, StepWorkspace* ws = nullptr) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const int nv = state.mesh.num_vertices();
  FlowState next;
  next.mesh.F = state.mesh.F;
  next.cache = state.cache;

  if (scheme == Scheme::Explicit) {
    next.mesh.V.resize(nv, 4);
    for (int v = 0; v < nv; ++v) {
      const Vec4 pos = state.mesh.vertex(v) -
                       dt * state.field.H[v] * state.field.normal.row(v).transpose();
      next.mesh.V.row(v) =
          (space.curved() ? space.project(pos) : pos).transpose();
    }
  } else {
    // (M + dt W) X = M V with M = diag(dmu), then chart projection. The
    // solution moves by the full Laplacian velocity; the constraint component
    // introduced on curved ambients is removed by the projection.
    StepWorkspace local;
    StepWorkspace* w = ws ? ws : &local;
    w->sys = state.field.cot_matrix;
    double* vals = w->sys.valuePtr();
    for (int i = 0; i < w->sys.nonZeros(); ++i) vals[i] *= dt;
    for (int v = 0; v < nv; ++v) {
      w->sys.coeffRef(v, v) += state.field.dmu[v];
    }
    const Eigen::Matrix<double, Eigen::Dynamic, 4> rhs =
        state.field.dmu.asDiagonal() * state.mesh.V;
    const Eigen::Matrix<double, Eigen::Dynamic, 4> guess = state.mesh.V;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                             Eigen::Lower | Eigen::Upper>
        cg;
    cg.setTolerance(1e-13);
    cg.setMaxIterations(400);
    cg.compute(w->sys);
    Eigen::Matrix<double, Eigen::Dynamic, 4> csol = cg.solveWithGuess(rhs, guess);
    if (cg.info() != Eigen::Success) {
      w->ldlt.compute(w->sys);
      if (w->ldlt.info() != Eigen::Success) {
        throw std::runtime_error("step: semi-implicit solve failed");
      }
      csol = w->ldlt.solve(rhs);
    }
    VertexMatrix sol = csol;
    if (space.curved()) {
      for (int v = 0; v < nv; ++v) {
        sol.row(v) = space.project(sol.row(v).transpose()).transpose();
      }
    } else {
      sol.col(3).setZero();
    }
    next.mesh.V = sol;
  }

  try {
    next.field = compute_curvature(next.mesh, space, next.cache.get());
  } catch (const std::invalid_argument& e) {
    throw MeshDegenerationError(e.what());
  }
  next.t_acc = state.t_acc;
  next.t_acc.add(dt);
  next.t = next.t_acc.to_double();
  next.step_index = state.step_index + 1;
  next.last_dt = dt;
  return next;
}

// ---------------------------------------------------------------------------
// Runs: snapshot series plus stepwise-accumulated space-time integrals
// ---------------------------------------------------------------------------

struct LedgerConfig {
  std::vector<double> alpha_list;                      // for int |A|^alpha dmu
  std::vector<double> h_alpha_list;                    // for int |H|^alpha dmu
  std::vector<std::pair<double, double>> subcritical;  // (a, b) pairs
  std::vector<std::pair<double, double>> pq_list;      // L^{p,q} pairs

  static LedgerConfig defaults(int n) {
    LedgerConfig c;
    c.alpha_list = {double(n + 2), double(n + 3)};
    c.h_alpha_list = {double(n + 2), double(n + 3)};
    c.subcritical = {{1.0, 1.0}};
    c.pq_list = {{double(n + 2), double(n + 2)}};
    const std::pair<double, double> second{2.0 * n, 4.0};
    if (second != c.pq_list[0]) c.pq_list.push_back(second);
    return c;
  }

  void validate(int n) const {
    for (auto [a, b] : subcritical) {
      if (a < 1.0 || b < 1.0) {
        throw std::invalid_argument("ledger: subcritical requires a >= 1, b >= 1");
      }
    }
    for (auto [p, q] : pq_list) {
      if (!(p > 0.0) || !(q > 0.0)) {
        throw std::invalid_argument("ledger: p, q must be positive");
      }
    }
    (void)n;
  }
};

struct FieldFrame {
  int epoch = 0;  // connectivity epoch (faces table index)
  VertexMatrix V;
  VertexMatrix normal;
  Eigen::Matrix<double, Eigen::Dynamic, 8, Eigen::RowMajor> frame;
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> h;
  Eigen::VectorXd A;  // |A| = sqrt(|A|^2)
  Eigen::VectorXd H;
  Eigen::VectorXd dmu;
  Eigen::VectorXd h_min_eig;
};

struct SnapshotSummary {
  long step = 0;
  double t = 0.0;
  double dt = 0.0;
  std::array<std::uint64_t, 4> t_limbs{};
  int epoch = 0;
  double area = 0.0;
  double volume = 0.0;
  double max_A2 = 0.0;
  double sup_A = 0.0;
  double sup_Abar = 0.0;
  double min_h_eig = 0.0;
  double min_edge = 0.0;
  double H_cov = 0.0;
  // instantaneous mesh integrals
  std::vector<double> int_A_alpha;
  std::vector<double> int_H_alpha;
  std::vector<double> G_ab;
  // running space-time accumulations from t = 0
  std::vector<double> acc_A_alpha;
  std::vector<double> acc_H_alpha;
  std::vector<double> acc_sub_ab;
  std::vector<double> acc_lpq;
  int field_frame = -1;  // index into FlowRun::fields or -1
};

struct FlowRun {
  int n = 2;
  AmbientKind ambient = AmbientKind::Euclidean;
  double curvature = 0.0;
  LedgerConfig ledger;
  std::vector<SnapshotSummary> snaps;
  std::vector<FieldFrame> fields;
  std::vector<FaceMatrix> epoch_faces;
  std::string halt_reason;
  bool blew_up = false;
  double T_est = std::numeric_limits<double>::infinity();
  double runtime_seconds = 0.0;

  const SnapshotSummary& back() const { return snaps.back(); }
  double t_end() const { return snaps.empty() ? 0.0 : snaps.back().t; }

  int alpha_index(double alpha) const {
    for (size_t i = 0; i < ledger.alpha_list.size(); ++i) {
      if (ledger.alpha_list[i] == alpha) return static_cast<int>(i);
    }
    return -1;
  }
  int sub_index(double a, double b) const {
    for (size_t i = 0; i < ledger.subcritical.size(); ++i) {
      if (ledger.subcritical[i] == std::make_pair(a, b)) return static_cast<int>(i);
    }
    return -1;
  }
};

namespace detail {

struct LedgerIntegrands {
  std::vector<double> A_alpha;
  std::vector<double> H_alpha;
  std::vector<double> G_ab;
  std::vector<double> lpq;  // (int |A|^p dmu)^{q/p}
};

inline LedgerIntegrands ledger_integrands(const CurvatureField& field,
                                          const LedgerConfig& cfg, int n) {
  LedgerIntegrands out;
  const int nv = field.num_vertices();
  Eigen::VectorXd absA = field.A2.array().sqrt();
  Eigen::VectorXd absH = field.H.array().abs();
  for (double alpha : cfg.alpha_list) {
    KahanSum s;
    for (int v = 0; v < nv; ++v) s.add(pow_fast(absA[v], alpha) * field.dmu[v]);
    out.A_alpha.push_back(s.value());
  }
  for (double alpha : cfg.h_alpha_list) {
    KahanSum s;
    for (int v = 0; v < nv; ++v) s.add(pow_fast(absH[v], alpha) * field.dmu[v]);
    out.H_alpha.push_back(s.value());
  }
  for (auto [a, b] : cfg.subcritical) {
    KahanSum s;
    for (int v = 0; v < nv; ++v) {
      const double denom = std::log(a + pow_fast(absA[v], b));
      if (denom > 0.0) {
        s.add(pow_fast(absA[v], double(n + 2)) / denom * field.dmu[v]);
      } else if (absA[v] > 0.0) {
        // a = 1 and tiny |A|: integrand |A|^{n+2}/log(1+|A|^b) stays finite
        s.add(pow_fast(absA[v], double(n + 2)) / std::max(denom, 1e-300) *
              field.dmu[v]);
      }
    }
    out.G_ab.push_back(s.value());
  }
  for (auto [p, q] : cfg.pq_list) {
    KahanSum s;
    for (int v = 0; v < nv; ++v) s.add(pow_fast(absA[v], p) * field.dmu[v]);
    out.lpq.push_back(std::pow(s.value(), q / p));
  }
  return out;
}

}  // namespace detail

struct RunOptions {
  Scheme scheme = Scheme::SemiImplicit;
  double cfl = 0.5;
  double max_A2_ceiling = 1e6;
  double dt_floor = 1e-12;
  double t_max = std::numeric_limits<double>::infinity();
  long max_steps = 5000000;
  int snapshot_every = 1;
  int fields_every = 0;  // 0 = retain no field frames
  // Remesh-or-halt policy: when the minimum triangle angle drops below the
  // trigger, remesh; halt only if remeshing is disabled or cannot restore it.
  bool remesh_enabled = true;
  double remesh_trigger_angle_deg = 25.0;
  int remesh_cooldown_steps = 20;
  RemeshOptions remesh_opts = {};
};

struct SingularityPolicy {
  int min_snapshots = 10;
  double growth_threshold = 2.0;  // sup|A|^2 growth over the trailing decade
  double tail_fraction = 0.4;
};

// Least-squares Type-I fit of c/(T - t) to the tail of max |A|^2(t).
inline std::pair<double, bool> detect_singularity(const FlowRun& run,
                                                  const SingularityPolicy& policy = {}) {
  const auto& snaps = run.snaps;
  if (static_cast<int>(snaps.size()) < policy.min_snapshots) {
    throw std::invalid_argument("detect_singularity: need >= 10 snapshots");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double t_end = snaps.back().t;
  const double t_lo = snaps.front().t;
  const double t90 = t_lo + 0.9 * (t_end - t_lo);
  double y90 = snaps.front().max_A2;
  for (const auto& s : snaps) {
    if (s.t <= t90) y90 = s.max_A2;
  }
  const double growth = snaps.back().max_A2 / std::max(y90, 1e-300);
  if (!(growth >= policy.growth_threshold)) return {inf, false};

  const size_t lo =
      static_cast<size_t>(std::floor((1.0 - policy.tail_fraction) *
                                     static_cast<double>(snaps.size())));
  // Regress 1/y = T/c - t/c over the tail window.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long m = 0;
  for (size_t k = lo; k < snaps.size(); ++k) {
    const double x = snaps[k].t;
    const double y = 1.0 / snaps[k].max_A2;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  const double det = m * sxx - sx * sx;
  const double conservative = snaps.back().t + snaps.back().dt;
  if (det <= 0.0) return {conservative, true};
  const double slope = (m * sxy - sx * sy) / det;   // -1/c
  const double inter = (sxx * sy - sx * sxy) / det; // T/c
  if (!(slope < 0.0)) return {conservative, true};
  const double T = inter / (-slope);
  if (!std::isfinite(T) || T < snaps.back().t) return {conservative, true};
  return {T, true};
}

// Runs the flow to termination, accumulating the configured ledger stepwise
// (trapezoidal in t between consecutive steps).
inline FlowRun run_flow(SurfaceMesh initial_mesh, const SpaceForm& space,
                        const RunOptions& opts = {},
                        LedgerConfig ledger = LedgerConfig{},
                        const SingularityPolicy& policy = {}) {
  const auto wall0 = std::chrono::steady_clock::now();
  const int n = space.hypersurface_dim();
  if (ledger.alpha_list.empty() && ledger.h_alpha_list.empty() &&
      ledger.subcritical.empty() && ledger.pq_list.empty()) {
    ledger = LedgerConfig::defaults(n);
  }
  ledger.validate(n);
  validate_mesh(initial_mesh, space);

  FlowRun run;
  run.n = n;
  run.ambient = space.kind();
  run.curvature = space.curvature();
  run.ledger = ledger;
  run.epoch_faces.push_back(initial_mesh.F);

  FlowState state = FlowState::initial(std::move(initial_mesh), space);
  StepWorkspace ws;

  const size_t n_alpha = ledger.alpha_list.size();
  const size_t n_halpha = ledger.h_alpha_list.size();
  const size_t n_sub = ledger.subcritical.size();
  const size_t n_pq = ledger.pq_list.size();
  std::vector<KahanSum> acc_A(n_alpha), acc_H(n_halpha), acc_sub(n_sub),
      acc_lpq(n_pq);

  auto integrands = detail::ledger_integrands(state.field, ledger, n);
  long recorded_count = 0;

  auto record = [&](const FlowState& s, const detail::LedgerIntegrands& ints) {
    SnapshotSummary snap;
    snap.step = s.step_index;
    snap.t = s.t;
    snap.dt = s.last_dt;
    snap.t_limbs = s.t_acc.limbs();
    snap.epoch = static_cast<int>(run.epoch_faces.size()) - 1;
    snap.area = s.field.area;
    snap.volume = enclosed_volume(s.mesh, space, &s.field);
    snap.max_A2 = s.field.max_A2();
    snap.sup_A = std::sqrt(snap.max_A2);
    snap.sup_Abar = s.field.max_Abar();
    snap.min_h_eig = s.field.min_h_eigenvalue();
    snap.min_edge = s.field.min_edge;
    snap.H_cov = s.field.H_variation();
    snap.int_A_alpha = ints.A_alpha;
    snap.int_H_alpha = ints.H_alpha;
    snap.G_ab = ints.G_ab;
    for (auto& a : acc_A) snap.acc_A_alpha.push_back(a.value());
    for (auto& a : acc_H) snap.acc_H_alpha.push_back(a.value());
    for (auto& a : acc_sub) snap.acc_sub_ab.push_back(a.value());
    for (auto& a : acc_lpq) snap.acc_lpq.push_back(a.value());
    if (opts.fields_every > 0 &&
        (recorded_count % static_cast<long>(opts.fields_every) == 0)) {
      FieldFrame frame;
      frame.epoch = snap.epoch;
      frame.V = s.mesh.V;
      frame.normal = s.field.normal;
      frame.frame = s.field.frame;
      frame.h = s.field.h;
      frame.A = s.field.A2.array().sqrt();
      frame.H = s.field.H;
      frame.dmu = s.field.dmu;
      frame.h_min_eig = s.field.h_min_eig;
      snap.field_frame = static_cast<int>(run.fields.size());
      run.fields.push_back(std::move(frame));
    }
    run.snaps.push_back(std::move(snap));
    ++recorded_count;
  };

  record(state, integrands);

  const double trigger_angle = opts.remesh_trigger_angle_deg * M_PI / 180.0;
  long last_remesh = -opts.remesh_cooldown_steps;

  while (true) {
    if (state.field.max_A2() >= opts.max_A2_ceiling) {
      run.halt_reason = "curvature_ceiling";
      break;
    }
    if (state.t >= opts.t_max) {
      run.halt_reason = "t_max";
      break;
    }
    if (state.step_index >= opts.max_steps) {
      run.halt_reason = "max_steps";
      break;
    }
    if (state.field.min_angle < trigger_angle) {
      if (!opts.remesh_enabled) {
        run.halt_reason = "mesh_quality";
        break;
      }
      if (state.step_index - last_remesh >= opts.remesh_cooldown_steps) {
        last_remesh = state.step_index;
        RemeshOptions ropts = opts.remesh_opts;
        ropts.min_angle_deg = opts.remesh_trigger_angle_deg;
        auto rr = remesh(state.mesh, space, ropts);
        if (rr.changed) {
          run.epoch_faces.push_back(rr.mesh.F);
          state.mesh = std::move(rr.mesh);
          state.cache =
              std::make_shared<GeometryCache>(build_geometry_cache(state.mesh));
          state.field = compute_curvature(state.mesh, space, state.cache.get());
          integrands = detail::ledger_integrands(state.field, ledger, n);
        }
        if (state.field.min_angle < trigger_angle * 0.2) {
          run.halt_reason = "mesh_quality";
          break;
        }
      }
    }
    double dt = adaptive_dt(state.field, opts.cfl);
    if (std::isfinite(opts.t_max)) {
      dt = std::min(dt, opts.t_max - state.t);
      dt = std::max(dt, opts.dt_floor);
    }
    if (dt < opts.dt_floor) {
      run.halt_reason = "dt_floor";
      break;
    }

    FlowState next;
    try {
      next = step(state, space, dt, opts.scheme, &ws);
    } catch (const MeshDegenerationError&) {
      run.halt_reason = "mesh_degenerate";
      break;
    }

    auto next_ints = detail::ledger_integrands(next.field, ledger, n);
    for (size_t i = 0; i < n_alpha; ++i) {
      acc_A[i].add(0.5 * dt * (integrands.A_alpha[i] + next_ints.A_alpha[i]));
    }
    for (size_t i = 0; i < n_halpha; ++i) {
      acc_H[i].add(0.5 * dt * (integrands.H_alpha[i] + next_ints.H_alpha[i]));
    }
    for (size_t i = 0; i < n_sub; ++i) {
      acc_sub[i].add(0.5 * dt * (integrands.G_ab[i] + next_ints.G_ab[i]));
    }
    for (size_t i = 0; i < n_pq; ++i) {
      acc_lpq[i].add(0.5 * dt * (integrands.lpq[i] + next_ints.lpq[i]));
    }
    state = std::move(next);
    integrands = std::move(next_ints);

    if (state.step_index % std::max(1, opts.snapshot_every) == 0) {
      record(state, integrands);
    }
  }
  if (run.snaps.back().step != state.step_index) {
    record(state, integrands);
  }

  if (static_cast<int>(run.snaps.size()) >= policy.min_snapshots) {
    auto [T, flag] = detect_singularity(run, policy);
    run.T_est = T;
    run.blew_up = flag;
  }
  run.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0)
          .count();
  return run;
}

// ---------------------------------------------------------------------------
// Evolution-identity residuals between consecutive retained frames
// ---------------------------------------------------------------------------

struct EvolutionResiduals {
  double metric_res = 0.0;
  double volume_res = 0.0;
  double dt = 0.0;
  bool skipped = false;  // connectivity changed between the snapshots
};

inline EvolutionResiduals evolution_residuals(const FlowRun& run, int k,
                                              const SpaceForm& space) {
  if (k < 0 || k + 1 >= static_cast<int>(run.snaps.size())) {
    throw std::invalid_argument("evolution_residuals: snapshot out of range");
  }
  const auto& s0 = run.snaps[k];
  const auto& s1 = run.snaps[k + 1];
  EvolutionResiduals out;
  out.dt = s1.t - s0.t;
  if (s0.epoch != s1.epoch) {
    out.skipped = true;
    return out;
  }
  if (s0.field_frame < 0 || s1.field_frame < 0) {
    throw std::invalid_argument("evolution_residuals: snapshots lack retained fields");
  }
  const FieldFrame& f0 = run.fields[s0.field_frame];
  const FieldFrame& f1 = run.fields[s1.field_frame];
  const auto& faces = run.epoch_faces[s0.epoch];

  SurfaceMesh m0;
  m0.V = f0.V;
  m0.F = faces;
  const auto topo = build_topology(m0);

  // d/dt of squared edge lengths against the -2 H h(e, e) contraction.
  KahanSum metric_sq;
  for (const auto& e : topo.edges) {
    const Vec4 d0 = (f0.V.row(e.v1) - f0.V.row(e.v0)).transpose();
    const Vec4 d1 = (f1.V.row(e.v1) - f1.V.row(e.v0)).transpose();
    const double l0 = space.dot(d0, d0);
    const double l1 = space.dot(d1, d1);
    const double fd = (l1 - l0) / out.dt;
    double model = 0.0;
    for (int vid : {e.v0, e.v1}) {
      const Vec4 e1 = f0.frame.row(vid).head<4>().transpose();
      const Vec4 e2 = f0.frame.row(vid).tail<4>().transpose();
      const double a = space.dot(d0, e1);
      const double b = space.dot(d0, e2);
      const double hdd = f0.h(vid, 0) * a * a + 2.0 * f0.h(vid, 1) * a * b +
                         f0.h(vid, 2) * b * b;
      model += -f0.H[vid] * hdd;  // half of -2 H h(d, d), averaged below
    }
    const double r = fd - model;
    const double w = (f0.dmu[e.v0] + f0.dmu[e.v1]) / 6.0;
    metric_sq.add(r * r * w);
  }
  out.metric_res = std::sqrt(std::max(0.0, metric_sq.value()));

  // d/dt of the area weights against -H^2 dmu.
  KahanSum vol_l1;
  for (int v = 0; v < f0.dmu.size(); ++v) {
    const double fd = (f1.dmu[v] - f0.dmu[v]) / out.dt;
    const double model = -f0.H[v] * f0.H[v] * f0.dmu[v];
    vol_l1.add(std::abs(fd - model));
  }
  out.volume_res = vol_l1.value();
  return out;
}

// Parabolic rescaling F -> lambda F, t -> lambda^2 t of a flat-ambient run.
// Ledger entries transform by their exact scaling weights; the subcritical
// accumulations are not scale covariant and are recomputed from retained
// fields when present, dropped otherwise.
inline FlowRun parabolic_rescale(const FlowRun& run, double lambda) {
  if (run.ambient != AmbientKind::Euclidean) {
    throw std::invalid_argument("parabolic_rescale: flat ambient only");
  }
  if (!(lambda > 0.0)) throw std::invalid_argument("parabolic_rescale: lambda > 0");
  FlowRun out = run;
  const double l2 = lambda * lambda;
  const int n = run.n;
  for (auto& s : out.snaps) {
    s.t *= l2;
    s.dt *= l2;
    s.area *= l2;
    s.volume *= lambda * lambda * lambda;
    s.max_A2 /= l2;
    s.sup_A /= lambda;
    s.sup_Abar /= l2;
    s.min_h_eig /= lambda;
    s.min_edge *= lambda;
    for (size_t i = 0; i < run.ledger.alpha_list.size(); ++i) {
      const double a = run.ledger.alpha_list[i];
      s.int_A_alpha[i] *= std::pow(lambda, n - a);
      s.acc_A_alpha[i] *= std::pow(lambda, n + 2 - a);
    }
    for (size_t i = 0; i < run.ledger.h_alpha_list.size(); ++i) {
      const double a = run.ledger.h_alpha_list[i];
      s.int_H_alpha[i] *= std::pow(lambda, n - a);
      s.acc_H_alpha[i] *= std::pow(lambda, n + 2 - a);
    }
    for (size_t i = 0; i < run.ledger.pq_list.size(); ++i) {
      const auto [p, q] = run.ledger.pq_list[i];
      s.acc_lpq[i] *= std::pow(lambda, (n - p) * q / p + 2.0);
    }
  }
  for (auto& f : out.fields) {
    f.V *= lambda;
    f.A /= lambda;
    f.H /= lambda;
    f.dmu *= l2;
    f.h /= lambda;
    f.h_min_eig /= lambda;
  }
  // Recompute subcritical entries from fields where available.
  std::vector<KahanSum> acc(out.ledger.subcritical.size());
  int prev_frame = -1;
  std::vector<double> prevG(out.ledger.subcritical.size(), 0.0);
  double prev_t = out.snaps.empty() ? 0.0 : out.snaps.front().t;
  bool have_fields = true;
  for (auto& s : out.snaps) {
    if (s.field_frame < 0) {
      have_fields = false;
      break;
    }
    const FieldFrame& f = out.fields[s.field_frame];
    for (size_t i = 0; i < out.ledger.subcritical.size(); ++i) {
      const auto [a, b] = out.ledger.subcritical[i];
      KahanSum g;
      for (int v = 0; v < f.A.size(); ++v) {
        const double denom = std::log(a + std::pow(f.A[v], b));
        if (denom > 0.0) g.add(std::pow(f.A[v], n + 2) / denom * f.dmu[v]);
      }
      s.G_ab[i] = g.value();
      if (prev_frame >= 0) acc[i].add(0.5 * (s.t - prev_t) * (prevG[i] + s.G_ab[i]));
      prevG[i] = s.G_ab[i];
      s.acc_sub_ab[i] = acc[i].value();
    }
    prev_frame = s.field_frame;
    prev_t = s.t;
  }
  if (!have_fields) {
    for (auto& s : out.snaps) {
      std::fill(s.G_ab.begin(), s.G_ab.end(),
                std::numeric_limits<double>::quiet_NaN());
      std::fill(s.acc_sub_ab.begin(), s.acc_sub_ab.end(),
                std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (std::isfinite(out.T_est)) out.T_est *= l2;
  return out;
}

}  // namespace mcflab
