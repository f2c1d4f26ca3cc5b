#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/exec.hpp"
#include "rwre/lattice.hpp"
#include "rwre/stats.hpp"

namespace rwre {

/// An environment materialised on a finite box. Walks leaving the box are
/// absorbed, which is how every exact solve restricts the lattice.
class OmegaWindow {
 public:
  OmegaWindow(Box box, std::vector<double> rows);  // rows: box.size() * 2d entries
  static OmegaWindow from_field(const EnvironmentField& field, const Box& box);
  static OmegaWindow homogeneous(const TransitionKernel& p, const Box& box);

  const Box& box() const { return box_; }
  int dim() const { return box_.dim(); }
  int num_dirs() const { return 2 * box_.dim(); }
  double omega(const Site& x, int dir) const { return rows_[box_.index(x) * num_dirs() + dir]; }
  double omega_at(std::size_t idx, int dir) const { return rows_[idx * num_dirs() + dir]; }
  void set_row(const Site& x, const DirVector& row);
  /// Smallest transition probability in the window.
  double min_entry() const;

 private:
  Box box_;
  std::vector<double> rows_;
};

/// Delta_x omega(e) for x in B. Rows must sum to zero so perturbed rows stay stochastic.
struct FinitePerturbation {
  std::vector<Site> sites;
  std::vector<DirVector> deltas;

  std::size_t size() const { return sites.size(); }
  double sup_norm(int dim) const;
  /// Largest l1 distance between two sites of B (0 for a singleton).
  int diameter() const;
  FinitePerturbation scaled(double factor) const;
};

/// omega^B: rows at x in B become omega(x,.) + Delta_x omega(.). Throws when a
/// perturbed row leaves [0,1] or does not sum to one.
OmegaWindow perturb_environment(const OmegaWindow& w, const FinitePerturbation& pert);

/// c3 = (2dn s / kappa^2) [2d s / kappa^2 + 1]^{n-1}, s = sup |Delta|.
double green_constant_c3(int dim, double kappa, const FinitePerturbation& pert);

struct GreenSolveOptions {
  double tol = 1e-9;  ///< required bound on every entry's absolute error
  Exec exec = Exec::parallel;
};

/// L = ceil(log(tol (1 - delta)) / log delta), so that delta^{L+1} / (1 - delta) <= tol.
int neumann_length(double delta, double tol);

/// Window around the anchors whose faces are far enough that E[delta^T] for
/// reaching a face stays below the share of tol that the solvers allot to
/// exits, computed for the homogeneous walk with kernel p (or the averaged
/// kernel of the field). A starting guess: solves still verify their own bounds.
Box killing_window(const EnvironmentField& field, const Box& anchors, double delta, double tol);
Box killing_window(const TransitionKernel& p, const Box& anchors, double delta, double tol);

/// A row g(x, .) or a column g(., y) of the killed Green function over a window.
struct GreenVector {
  bool is_row = true;
  Site anchor;
  Box box;
  std::vector<double> values;
  int steps = 0;               ///< Neumann terms k = 0..steps
  double tail_bound = 0.0;     ///< delta^{L+1} / (1 - delta)
  double exit_weight = 0.0;    ///< rows: E[delta^T; T <= L], T the exit time of the window
  double error_bound = 0.0;    ///< bound on |g - g_window| for every entry (rows); at the anchor's diagonal (columns)
  double at(const Site& s) const { return box.contains(s) ? values[box.index(s)] : 0.0; }
};

/// Row-sum check for a row solve: sum_y g(x,y) against 1/(1-delta).
struct NormalizationCheck {
  double row_sum = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;  ///< truncation tail plus window exit allowance
  bool ok = false;
};
NormalizationCheck check_normalization(const GreenVector& row, double delta);

/// Exact killed Green function g(x,y) = sum_{k>=0} delta^k P^k(x,y) on a window,
/// by a truncated Neumann series with a posteriori window-exit bounds.
class KilledGreenSolver {
 public:
  KilledGreenSolver(OmegaWindow window, double delta, GreenSolveOptions opts = {});

  const OmegaWindow& window() const { return window_; }
  double delta() const { return delta_; }
  int steps() const { return steps_; }

  /// g(x, .) by forward propagation. Throws std::runtime_error ("window too
  /// small") when the exit allowance exceeds the tolerance.
  GreenVector row(const Site& x) const;
  /// g(., y) by backward propagation; cached.
  const GreenVector& column(const Site& y) const;
  double g(const Site& x, const Site& y) const { return column(y).at(x); }
  /// Bound on |g(x,y) - g_window(x,y)| from the exit functional.
  double entry_error(const Site& x, const Site& y) const;
  /// h(x) = E_x[delta^T], T the exit time of the window (truncated at L steps).
  const std::vector<double>& exit_functional() const;

  /// Every row solved through this object, with its normalisation verdict.
  const std::vector<NormalizationCheck>& normalization_log() const { return norm_log_; }

 private:
  OmegaWindow window_;
  double delta_;
  GreenSolveOptions opts_;
  int steps_;
  std::vector<int> nbr_;       // neighbour index per (site, dir), -1 outside
  std::vector<double> leak_;   // probability of leaving the window in one step
  mutable std::map<Site, GreenVector> columns_;
  mutable std::vector<double> exit_fn_;
  mutable std::vector<NormalizationCheck> norm_log_;
};

/// Dense table of g(x,y) for x, y in a source box inside the window.
struct KilledGreenTable {
  enum class Mode { exact, monte_carlo };
  Mode mode = Mode::exact;
  double delta = 0.0;
  Box sources;
  std::vector<Site> targets;        ///< column order
  std::vector<double> values;       ///< row-major: source index * targets + target index
  std::vector<double> stderrs;      ///< monte-carlo only
  int steps = 0;                    ///< exact mode
  double error_bound = 0.0;         ///< exact mode: max entry error bound

  double at(std::size_t source_idx, std::size_t target_idx) const { return values[source_idx * targets.size() + target_idx]; }
  void write_csv(std::ostream& out) const;
};

KilledGreenTable killed_green_exact(const OmegaWindow& window, double delta, const Box& sources,
                                    const GreenSolveOptions& opts = {});

/// Visit counts before an independent geometric time tau with
/// P(tau = n) = (1 - delta) delta^{n-1}, n >= 1, from one source.
KilledGreenTable killed_green_mc(const EnvironmentField& field, double delta, const Site& source,
                                 const std::vector<Site>& targets, std::int64_t n_traj, std::uint64_t seed);

/// First-order predictions of g^{omega^B}(y, y'): the literal form with the
/// -g(x,x) term and the raw resolvent form. They coincide when every Delta_x
/// row sums to zero.
struct GreenPrediction {
  double literal = 0.0;
  double resolvent = 0.0;
};
GreenPrediction first_order_green_prediction(const KilledGreenSolver& g, const FinitePerturbation& pert,
                                             const Site& y, const Site& y2);

struct LemmaSuiteSpec {
  TransitionKernel p0 = TransitionKernel::symmetric(2);
  double epsilon = 0.1;
  PerturbationLaw law = two_atom_law();
  double delta = 0.9;
  int max_sites = 3;          ///< |B| drawn uniformly in 1..max_sites
  int site_radius = 2;        ///< B inside [-r, r]^d
  double max_delta = 0.02;    ///< sup |Delta|
  int region_radius = 5;      ///< y ranges over [-r, r]^d
  int extra_targets = 3;      ///< random y' besides B and the origin
  int window_radius = 56;
  double tol = 1e-8;
};

struct LemmaInstanceReport {
  std::uint64_t seed = 0;
  int n_sites = 0;
  int diameter = 0;
  double kappa = 0.0;
  double c3 = 0.0;
  bool unif_ok = true, green1_ok = true, green2_ok = true, expansion1_ok = true, expansion2_ok = true;
  bool balance_ok = true, entries_ok = true, normalization_ok = true;
  double unif_worst = 0.0;        ///< max over tests of delta kappa g(y,z+e) - g(y,z) (<= 0 passes)
  double green1_worst = 0.0;      ///< max |delta g(z+e,z) - g(z,z)| kappa
  double green2_worst = 0.0;      ///< max LHS / RHS
  double expansion1_worst = 0.0;  ///< max |g^B - g| / (c3 g^B)
  double expansion2_worst = 0.0;  ///< max |remainder| / bound
  double predictor_gap = 0.0;     ///< max |literal - resolvent| predictor
  double remainder = 0.0;         ///< sup |g^B - prediction| at Delta
  double remainder_half = 0.0;    ///< same at Delta / 2
  double halving_ratio = 0.0;
  double green3_literal_residual = 0.0;   ///< sup |LHS - literal right-hand side|
  double green3_exact_residual = 0.0;     ///< sup |LHS - G dDelta G dDelta G^B|
  double green3_scale = 0.0;              ///< sup |LHS|
  double balance_literal_residual = 0.0;  ///< sup |g(y,z) - 1 - delta sum_e g(y,z+e) omega(z+e,e)|
  double balance_residual = 0.0;          ///< same for the incoming-mass form with z - e
  int normalization_checks = 0;
  std::string failure;
};

struct LemmaSuiteReport {
  std::vector<LemmaInstanceReport> instances;
  bool all_inequalities_hold() const;
  bool halving_in_range(double lo = 3.0, double hi = 5.0) const;
  int normalization_checks() const;
  bool normalization_ok() const;
};

LemmaInstanceReport verify_lemma_instance(const LemmaSuiteSpec& spec, std::uint64_t instance_seed);
LemmaSuiteReport verify_lemma_bounds(const LemmaSuiteSpec& spec, int n_instances, std::uint64_t seed,
                                     Exec exec = Exec::parallel);

}  // namespace rwre
