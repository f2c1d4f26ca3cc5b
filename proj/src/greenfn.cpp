#include "rwre/greenfn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rwre/io.hpp"
#include "rwre/rng.hpp"

namespace rwre {

OmegaWindow::OmegaWindow(Box box, std::vector<double> rows) : box_(box), rows_(std::move(rows)) {
  if (rows_.size() != box_.size() * static_cast<std::size_t>(num_dirs())) {
    throw std::invalid_argument("OmegaWindow: row data does not match the box");
  }
}

OmegaWindow OmegaWindow::from_field(const EnvironmentField& field, const Box& box) {
  if (field.dim() != box.dim()) throw std::invalid_argument("OmegaWindow: dimension mismatch");
  const int nd = 2 * field.dim();
  std::vector<double> rows(box.size() * nd);
  for (std::size_t i = 0; i < box.size(); ++i) {
    const auto& r = field.atom_omega(field.atom_at(box.site(i)));
    std::copy(r.begin(), r.begin() + nd, rows.begin() + static_cast<std::ptrdiff_t>(i * nd));
  }
  return OmegaWindow(box, std::move(rows));
}

OmegaWindow OmegaWindow::homogeneous(const TransitionKernel& p, const Box& box) {
  if (p.dim() != box.dim()) throw std::invalid_argument("OmegaWindow: dimension mismatch");
  const int nd = p.num_dirs();
  std::vector<double> rows(box.size() * nd);
  for (std::size_t i = 0; i < box.size(); ++i) {
    for (int e = 0; e < nd; ++e) rows[i * nd + e] = p(e);
  }
  return OmegaWindow(box, std::move(rows));
}

void OmegaWindow::set_row(const Site& x, const DirVector& row) {
  if (!box_.contains(x)) throw std::out_of_range("OmegaWindow::set_row: site outside window");
  const std::size_t i = box_.index(x);
  for (int e = 0; e < num_dirs(); ++e) rows_[i * num_dirs() + e] = row[e];
}

double OmegaWindow::min_entry() const { return *std::min_element(rows_.begin(), rows_.end()); }

double FinitePerturbation::sup_norm(int dim) const {
  double s = 0.0;
  for (const auto& d : deltas) {
    for (int e = 0; e < 2 * dim; ++e) s = std::max(s, std::abs(d[e]));
  }
  return s;
}

int FinitePerturbation::diameter() const {
  int r = 0;
  for (const auto& a : sites) {
    for (const auto& b : sites) r = std::max(r, (a - b).norm1());
  }
  return r;
}

FinitePerturbation FinitePerturbation::scaled(double factor) const {
  FinitePerturbation out = *this;
  for (auto& d : out.deltas) {
    for (auto& v : d) v *= factor;
  }
  return out;
}

OmegaWindow perturb_environment(const OmegaWindow& w, const FinitePerturbation& pert) {
  if (pert.sites.size() != pert.deltas.size()) throw std::invalid_argument("perturbation: sites/deltas mismatch");
  OmegaWindow out = w;
  const int nd = w.num_dirs();
  for (std::size_t i = 0; i < pert.sites.size(); ++i) {
    const Site& x = pert.sites[i];
    if (!w.box().contains(x)) throw std::invalid_argument("perturbation: site " + x.str(w.dim()) + " outside window");
    for (std::size_t j = 0; j < i; ++j) {
      if (pert.sites[j] == x) throw std::invalid_argument("perturbation: repeated site " + x.str(w.dim()));
    }
    DirVector row{};
    double sum = 0.0, dsum = 0.0;
    for (int e = 0; e < nd; ++e) {
      const double d = pert.deltas[i][e];
      if (!(d > -1.0 && d < 1.0)) throw std::invalid_argument("perturbation: Delta entry outside (-1,1)");
      row[e] = w.omega(x, e) + d;
      if (row[e] < 0.0 || row[e] > 1.0) {
        throw std::invalid_argument("perturbation: row at " + x.str(w.dim()) + " leaves [0,1]");
      }
      sum += row[e];
      dsum += d;
    }
    if (std::abs(dsum) > 1e-12 || std::abs(sum - 1.0) > 1e-12) {
      throw std::invalid_argument("perturbation: row at " + x.str(w.dim()) + " no longer sums to one");
    }
    out.set_row(x, row);
  }
  return out;
}

double green_constant_c3(int dim, double kappa, const FinitePerturbation& pert) {
  const double s = pert.sup_norm(dim);
  const double n = static_cast<double>(pert.size());
  const double a = 2.0 * dim * s / (kappa * kappa);
  return n * a * std::pow(a + 1.0, n - 1.0);
}

int neumann_length(double delta, double tol) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("killing parameter delta must lie in (0,1)");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  return std::max(0, static_cast<int>(std::ceil(std::log(tol * (1.0 - delta)) / std::log(delta))));
}

namespace {

// E_0[delta^{T_1}] for a walk on Z stepping +1, -1 with probabilities up, down
// and standing still otherwise.
double first_passage_transform(double up, double down, double delta) {
  const double stay = 1.0 - up - down;
  const double b = 1.0 - stay * delta;
  if (down <= 0.0) return up * delta / b;
  return (b - std::sqrt(std::max(0.0, b * b - 4.0 * up * down * delta * delta))) / (2.0 * down * delta);
}

Box window_from_rows(int dim, const std::vector<DirVector>& rows, const Box& anchors, double delta, double tol) {
  neumann_length(delta, tol);
  const double target = 0.5 * tol * (1.0 - delta) / (2.0 * dim);
  Site lo = anchors.lo(), hi = anchors.hi();
  for (int a = 0; a < dim; ++a) {
    double fwd = 0.0, bwd = 0.0;
    for (const auto& r : rows) {
      fwd = std::max(fwd, first_passage_transform(r[2 * a], r[2 * a + 1], delta));
      bwd = std::max(bwd, first_passage_transform(r[2 * a + 1], r[2 * a], delta));
    }
    auto reach = [&](double phi) {
      if (phi <= 0.0) return 1;
      return 1 + static_cast<int>(std::ceil(std::log(target) / std::log(phi)));
    };
    hi[a] += reach(fwd);
    lo[a] -= reach(bwd);
  }
  return Box(dim, lo, hi);
}

}  // namespace

Box killing_window(const EnvironmentField& field, const Box& anchors, double delta, double tol) {
  // The averaged kernel sets the large-scale drift; the extra factor covers
  // local fluctuations of the rows.
  const auto pe = p_epsilon(field);
  DirVector r{};
  for (int e = 0; e < pe.num_dirs(); ++e) r[e] = pe(e);
  return window_from_rows(field.dim(), {r}, anchors, delta, 0.1 * tol);
}

Box killing_window(const TransitionKernel& p, const Box& anchors, double delta, double tol) {
  DirVector r{};
  for (int e = 0; e < p.num_dirs(); ++e) r[e] = p(e);
  return window_from_rows(p.dim(), {r}, anchors, delta, tol);
}

NormalizationCheck check_normalization(const GreenVector& row, double delta) {
  NormalizationCheck c;
  c.row_sum = pairwise_sum(row.values);
  c.expected = 1.0 / (1.0 - delta);
  // sum over the window + exit allowance + truncated tail = 1/(1-delta) exactly
  c.tolerance = (row.exit_weight + std::pow(delta, row.steps + 1)) / (1.0 - delta) + 1e-13 * c.expected;
  const double deficit = c.expected - c.row_sum;
  c.ok = deficit >= -1e-13 * c.expected && deficit <= c.tolerance;
  return c;
}

KilledGreenSolver::KilledGreenSolver(OmegaWindow window, double delta, GreenSolveOptions opts)
    : window_(std::move(window)), delta_(delta), opts_(opts), steps_(neumann_length(delta, 0.1 * opts.tol)) {
  // A tenth of the tolerance goes to the truncated tail, the rest to window exits.
  const Box& box = window_.box();
  const int nd = window_.num_dirs();
  nbr_.assign(box.size() * nd, -1);
  leak_.assign(box.size(), 0.0);
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Site x = box.site(i);
    for (int e = 0; e < nd; ++e) {
      const Site y = step(x, e);
      if (box.contains(y)) {
        nbr_[i * nd + e] = static_cast<int>(box.index(y));
      } else {
        leak_[i] += window_.omega_at(i, e);
      }
    }
  }
}

GreenVector KilledGreenSolver::row(const Site& x) const {
  const Box& box = window_.box();
  if (!box.contains(x)) throw std::invalid_argument("killed Green row: source outside window");
  const int nd = window_.num_dirs();
  const auto size = static_cast<std::ptrdiff_t>(box.size());
  std::vector<double> u(box.size(), 0.0), next(box.size(), 0.0), g(box.size(), 0.0);
  u[box.index(x)] = 1.0;
  double exit_weight = 0.0;
  const int workers = worker_count();
  const bool par = opts_.exec == Exec::parallel;
  for (int k = 0; k <= steps_; ++k) {
    double leaving = 0.0;
    for (std::ptrdiff_t i = 0; i < size; ++i) {
      g[i] += u[i];
      if (leak_[i] != 0.0) leaving += u[i] * leak_[i];
    }
    exit_weight += delta_ * leaving;
    if (k == steps_) break;
#pragma omp parallel for schedule(static) num_threads(workers) if (par)
    for (std::ptrdiff_t i = 0; i < size; ++i) {
      double acc = 0.0;
      for (int e = 0; e < nd; ++e) {
        const int from = nbr_[static_cast<std::size_t>(i) * nd + opposite(e)];
        if (from >= 0) acc += u[from] * window_.omega_at(static_cast<std::size_t>(from), e);
      }
      next[i] = delta_ * acc;
    }
    std::swap(u, next);
  }
  GreenVector out;
  out.is_row = true;
  out.anchor = x;
  out.box = box;
  out.values = std::move(g);
  out.steps = steps_;
  out.tail_bound = std::pow(delta_, steps_ + 1) / (1.0 - delta_);
  out.exit_weight = exit_weight;
  out.error_bound = (exit_weight + std::pow(delta_, steps_ + 1)) / (1.0 - delta_);
  if (out.error_bound > opts_.tol) {
    throw std::runtime_error("killed Green row: window too small (entry error bound " + fmt17(out.error_bound) +
                             " > tol " + fmt17(opts_.tol) + ")");
  }
  norm_log_.push_back(check_normalization(out, delta_));
  return out;
}

const std::vector<double>& KilledGreenSolver::exit_functional() const {
  if (!exit_fn_.empty()) return exit_fn_;
  const Box& box = window_.box();
  const int nd = window_.num_dirs();
  const auto size = static_cast<std::ptrdiff_t>(box.size());
  std::vector<double> h(box.size(), 0.0), next(box.size(), 0.0);
  const int workers = worker_count();
  const bool par = opts_.exec == Exec::parallel;
  for (int k = 0; k <= steps_; ++k) {
#pragma omp parallel for schedule(static) num_threads(workers) if (par)
    for (std::ptrdiff_t i = 0; i < size; ++i) {
      double acc = leak_[i];
      for (int e = 0; e < nd; ++e) {
        const int to = nbr_[static_cast<std::size_t>(i) * nd + e];
        if (to >= 0) acc += window_.omega_at(static_cast<std::size_t>(i), e) * h[to];
      }
      next[i] = delta_ * acc;
    }
    std::swap(h, next);
  }
  // h_L underestimates h by at most delta^{L+1}.
  const double slack = std::pow(delta_, steps_ + 1);
  for (auto& v : h) v = std::min(1.0, v + slack);
  exit_fn_ = std::move(h);
  return exit_fn_;
}

const GreenVector& KilledGreenSolver::column(const Site& y) const {
  if (auto it = columns_.find(y); it != columns_.end()) return it->second;
  const Box& box = window_.box();
  if (!box.contains(y)) throw std::invalid_argument("killed Green column: target outside window");
  const int nd = window_.num_dirs();
  const auto size = static_cast<std::ptrdiff_t>(box.size());
  std::vector<double> v(box.size(), 0.0), next(box.size(), 0.0), g(box.size(), 0.0);
  v[box.index(y)] = 1.0;
  const int workers = worker_count();
  const bool par = opts_.exec == Exec::parallel;
  for (int k = 0; k <= steps_; ++k) {
    for (std::ptrdiff_t i = 0; i < size; ++i) g[i] += v[i];
    if (k == steps_) break;
#pragma omp parallel for schedule(static) num_threads(workers) if (par)
    for (std::ptrdiff_t i = 0; i < size; ++i) {
      double acc = 0.0;
      for (int e = 0; e < nd; ++e) {
        const int to = nbr_[static_cast<std::size_t>(i) * nd + e];
        if (to >= 0) acc += window_.omega_at(static_cast<std::size_t>(i), e) * v[to];
      }
      next[i] = delta_ * acc;
    }
    std::swap(v, next);
  }
  GreenVector out;
  out.is_row = false;
  out.anchor = y;
  out.box = box;
  out.values = std::move(g);
  out.steps = steps_;
  out.tail_bound = std::pow(delta_, steps_ + 1) / (1.0 - delta_);
  const auto& h = exit_functional();
  const std::size_t iy = box.index(y);
  const double gyy = out.values[iy];
  out.error_bound = h[iy] * gyy / (1.0 - h[iy]) + out.tail_bound;
  if (!(h[iy] < 1.0) || out.error_bound > opts_.tol) {
    throw std::runtime_error("killed Green column: window too small (error bound " + fmt17(out.error_bound) +
                             " > tol " + fmt17(opts_.tol) + ")");
  }
  return columns_.emplace(y, std::move(out)).first->second;
}

double KilledGreenSolver::entry_error(const Site& x, const Site& y) const {
  const auto& col = column(y);
  const auto& h = exit_functional();
  const Box& box = window_.box();
  if (!box.contains(x)) return INFINITY;
  const std::size_t iy = box.index(y);
  return h[box.index(x)] * col.values[iy] / (1.0 - h[iy]) + col.tail_bound;
}

void KilledGreenTable::write_csv(std::ostream& out) const {
  const int d = sources.dim();
  for (int a = 0; a < d; ++a) out << "x" << a + 1 << ",";
  for (int a = 0; a < d; ++a) out << "y" << a + 1 << ",";
  out << "value,stderr\n";
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Site x = sources.site(i);
    for (std::size_t j = 0; j < targets.size(); ++j) {
      for (int a = 0; a < d; ++a) out << x[a] << ",";
      for (int a = 0; a < d; ++a) out << targets[j][a] << ",";
      const std::size_t k = i * targets.size() + j;
      out << fmt17(values[k]) << "," << fmt17(stderrs.empty() ? 0.0 : stderrs[k]) << "\n";
    }
  }
}

KilledGreenTable killed_green_exact(const OmegaWindow& window, double delta, const Box& sources,
                                    const GreenSolveOptions& opts) {
  const KilledGreenSolver solver(window, delta, opts);
  KilledGreenTable t;
  t.mode = KilledGreenTable::Mode::exact;
  t.delta = delta;
  t.sources = sources;
  t.steps = solver.steps();
  for (std::size_t j = 0; j < sources.size(); ++j) t.targets.push_back(sources.site(j));
  t.values.assign(sources.size() * t.targets.size(), 0.0);
  for (std::size_t j = 0; j < t.targets.size(); ++j) {
    const auto& col = solver.column(t.targets[j]);
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const Site x = sources.site(i);
      t.values[i * t.targets.size() + j] = col.at(x);
      t.error_bound = std::max(t.error_bound, solver.entry_error(x, t.targets[j]));
    }
  }
  if (t.error_bound > opts.tol) {
    throw std::runtime_error("killed Green table: window too small for the source box (bound " +
                             fmt17(t.error_bound) + ")");
  }
  return t;
}

KilledGreenTable killed_green_mc(const EnvironmentField& field, double delta, const Site& source,
                                 const std::vector<Site>& targets, std::int64_t n_traj, std::uint64_t seed) {
  if (n_traj < 1) throw std::invalid_argument("killed_green_mc: n_traj must be >= 1");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("killed_green_mc: delta must lie in [0,1)");
  const std::size_t nt = targets.size();
  // Fixed blocks keep the reduction order independent of the worker count.
  const std::int64_t n_blocks = std::min<std::int64_t>(n_traj, 256);
  std::vector<double> block_sum(n_blocks * nt, 0.0), block_sq(n_blocks * nt, 0.0);
  const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    const std::int64_t lo = n_traj * b / n_blocks, hi = n_traj * (b + 1) / n_blocks;
    std::vector<double> counts(nt);
    for (std::int64_t t = lo; t < hi; ++t) {
      Engine eng = make_engine(seed, stream::walk, static_cast<std::uint64_t>(t));
      const std::int64_t tau = draw_geometric_tau(eng, delta);
      std::fill(counts.begin(), counts.end(), 0.0);
      Site x = source;
      for (std::int64_t k = 0; k < tau; ++k) {
        for (std::size_t j = 0; j < nt; ++j) {
          if (targets[j] == x) counts[j] += 1.0;
        }
        if (k + 1 < tau) x = walk_step(field, x, eng);
      }
      for (std::size_t j = 0; j < nt; ++j) {
        block_sum[b * nt + j] += counts[j];
        block_sq[b * nt + j] += counts[j] * counts[j];
      }
    }
  }
  KilledGreenTable t;
  t.mode = KilledGreenTable::Mode::monte_carlo;
  t.delta = delta;
  t.sources = Box(field.dim(), source, source);
  t.targets = targets;
  t.values.assign(nt, 0.0);
  t.stderrs.assign(nt, 0.0);
  const double n = static_cast<double>(n_traj);
  for (std::size_t j = 0; j < nt; ++j) {
    std::vector<double> s(n_blocks), q(n_blocks);
    for (std::int64_t b = 0; b < n_blocks; ++b) {
      s[b] = block_sum[b * nt + j];
      q[b] = block_sq[b * nt + j];
    }
    const double mean = pairwise_sum(s) / n;
    const double var = n > 1 ? std::max(0.0, (pairwise_sum(q) - n * mean * mean) / (n - 1.0)) : 0.0;
    t.values[j] = mean;
    t.stderrs[j] = std::sqrt(var / n);
  }
  return t;
}

GreenPrediction first_order_green_prediction(const KilledGreenSolver& g, const FinitePerturbation& pert,
                                             const Site& y, const Site& y2) {
  const double delta = g.delta();
  const int nd = g.window().num_dirs();
  GreenPrediction p;
  const double base = g.g(y, y2);
  double literal = 0.0, resolvent = 0.0;
  for (std::size_t i = 0; i < pert.size(); ++i) {
    const Site& x = pert.sites[i];
    const double gyx = g.g(y, x);
    const double gxx = g.g(x, x);
    double inner_literal = 0.0, inner_resolvent = 0.0;
    for (int e = 0; e < nd; ++e) {
      const double d = pert.deltas[i][e];
      const double gxe = g.g(step(x, e), y2);
      inner_literal += d * (delta * gxe - gxx);
      inner_resolvent += d * delta * gxe;
    }
    literal += gyx * inner_literal;
    resolvent += gyx * inner_resolvent;
  }
  p.literal = base + literal;
  p.resolvent = base + resolvent;
  return p;
}

namespace {

FinitePerturbation draw_perturbation(const LemmaSuiteSpec& spec, const OmegaWindow& w, Engine& eng) {
  const int d = spec.p0.dim();
  const int nd = 2 * d;
  std::uniform_int_distribution<int> count(1, spec.max_sites);
  std::uniform_int_distribution<int> coord(-spec.site_radius, spec.site_radius);
  const int n = count(eng);
  FinitePerturbation pert;
  while (static_cast<int>(pert.sites.size()) < n) {
    Site x;
    for (int a = 0; a < d; ++a) x[a] = coord(eng);
    if (std::find(pert.sites.begin(), pert.sites.end(), x) != pert.sites.end()) continue;
    DirVector v{};
    double mean = 0.0;
    for (int e = 0; e < nd; ++e) mean += (v[e] = 2.0 * uniform01(eng) - 1.0);
    mean /= nd;
    double sup = 0.0;
    for (int e = 0; e < nd; ++e) sup = std::max(sup, std::abs(v[e] -= mean));
    const double target = spec.max_delta * (0.5 + 0.5 * uniform01(eng));
    for (int e = 0; e < nd; ++e) v[e] *= target / sup;
    // Zero row sum to rounding: put the residual on the largest entry's partner.
    double s = 0.0;
    for (int e = 0; e + 1 < nd; ++e) s += v[e];
    v[nd - 1] = -s;
    bool ok = true;
    for (int e = 0; e < nd; ++e) ok = ok && w.omega(x, e) + v[e] >= 0.0 && w.omega(x, e) + v[e] <= 1.0;
    if (!ok) continue;
    pert.sites.push_back(x);
    pert.deltas.push_back(v);
  }
  return pert;
}

}  // namespace

LemmaInstanceReport verify_lemma_instance(const LemmaSuiteSpec& spec, std::uint64_t instance_seed) {
  LemmaInstanceReport r;
  r.seed = instance_seed;
  try {
    const int d = spec.p0.dim();
    const int nd = 2 * d;
    const double delta = spec.delta;
    Engine eng = make_engine(instance_seed, stream::instance, 0);
    const EnvironmentField field(spec.p0, spec.epsilon, spec.law, eng());
    const Box window = Box::centered(d, Site{}, spec.window_radius);
    const OmegaWindow w = OmegaWindow::from_field(field, window);
    const FinitePerturbation pert = draw_perturbation(spec, w, eng);
    const FinitePerturbation half = pert.scaled(0.5);
    const OmegaWindow wb = perturb_environment(w, pert);
    const OmegaWindow wh = perturb_environment(w, half);
    r.n_sites = static_cast<int>(pert.size());
    r.diameter = pert.diameter();
    r.kappa = std::min(w.min_entry(), wb.min_entry());
    r.c3 = green_constant_c3(d, r.kappa, pert);
    const double kappa = r.kappa;

    std::vector<Site> targets = pert.sites;
    auto add_target = [&](const Site& s) {
      if (std::find(targets.begin(), targets.end(), s) == targets.end()) targets.push_back(s);
    };
    add_target(Site{});
    std::uniform_int_distribution<int> coord(-spec.region_radius + 1, spec.region_radius - 1);
    for (int i = 0; i < spec.extra_targets; ++i) {
      Site s;
      for (int a = 0; a < d; ++a) s[a] = coord(eng);
      add_target(s);
    }
    const Box region = Box::centered(d, Site{}, spec.region_radius);

    GreenSolveOptions opts;
    opts.tol = spec.tol;
    opts.exec = Exec::serial;
    const KilledGreenSolver g(w, delta, opts);
    const KilledGreenSolver gb(wb, delta, opts);
    const KilledGreenSolver gh(wh, delta, opts);
    const double slack = 4.0 * spec.tol;

    // Rows: entries, ellipticity lemma, balance identities, normalisation.
    for (const Site& t : targets) {
      const GreenVector row = g.row(t);
      gb.row(t);
      for (std::size_t i = 0; i < region.size(); ++i) {
        const Site z = region.site(i);
        const double gz = row.at(z);
        if (gz < 0.0 || (z == t && gz < 1.0)) r.entries_ok = false;
        if (z == t) continue;
        for (int e = 0; e < nd; ++e) {
          const double gap = delta * kappa * row.at(step(z, e)) - gz;
          r.unif_worst = std::max(r.unif_worst, gap);
          if (gap > slack) r.unif_ok = false;
        }
      }
      for (std::size_t i = 0; i < region.size(); ++i) {
        const Site z = region.site(i);
        const double ind = z == t ? 1.0 : 0.0;
        double incoming = 0.0, literal = 0.0;
        for (int e = 0; e < nd; ++e) {
          const Site from = step(z, opposite(e));
          incoming += row.at(from) * w.omega(from, e);
          const Site ahead = step(z, e);
          literal += row.at(ahead) * w.omega(ahead, e);
        }
        r.balance_residual = std::max(r.balance_residual, std::abs(row.at(z) - ind - delta * incoming));
        r.balance_literal_residual = std::max(r.balance_literal_residual, std::abs(row.at(z) - ind - delta * literal));
      }
    }
    if (r.balance_residual > slack) r.balance_ok = false;

    // Inequalities on differences of Green values.
    for (const Site& z : targets) {
      const double gzz = g.g(z, z);
      for (int e = 0; e < nd; ++e) {
        const double lhs1 = std::abs(delta * g.g(step(z, e), z) - gzz);
        r.green1_worst = std::max(r.green1_worst, lhs1 * kappa);
        if (lhs1 > 1.0 / kappa + slack) r.green1_ok = false;
        for (const Site& y2 : targets) {
          const double lhs2 = std::abs(delta * g.g(step(z, e), y2) - g.g(z, y2));
          const double rhs2 = g.g(z, y2) / (kappa * kappa * gzz);
          r.green2_worst = std::max(r.green2_worst, lhs2 / rhs2);
          if (lhs2 > rhs2 + slack) r.green2_ok = false;
        }
      }
    }

    // Perturbation expansions over y in the region, y' in the targets.
    const double s = pert.sup_norm(d);
    const double n = static_cast<double>(pert.size());
    const double bound2_factor = std::pow(2.0 * d * s, 2) / std::pow(kappa, 3) *
                                 (1.0 + (n - 1.0) / std::pow(delta * kappa, r.diameter)) * (1.0 + r.c3) * n;
    for (const Site& y2 : targets) {
      for (std::size_t i = 0; i < region.size(); ++i) {
        const Site y = region.site(i);
        const double g0 = g.g(y, y2);
        const double g1 = gb.g(y, y2);
        const double diff = std::abs(g1 - g0);
        if (r.c3 > 0.0) r.expansion1_worst = std::max(r.expansion1_worst, diff / (r.c3 * g1));
        if (diff > r.c3 * g1 + slack) r.expansion1_ok = false;

        const auto pred = first_order_green_prediction(g, pert, y, y2);
        r.predictor_gap = std::max(r.predictor_gap, std::abs(pred.literal - pred.resolvent));
        const double rem = g1 - pred.literal;
        r.remainder = std::max(r.remainder, std::abs(rem));
        const double bound2 = bound2_factor * g1;
        r.expansion2_worst = std::max(r.expansion2_worst, std::abs(rem) / bound2);
        if (std::abs(rem) > bound2 + slack) r.expansion2_ok = false;

        const auto pred_h = first_order_green_prediction(g, half, y, y2);
        r.remainder_half = std::max(r.remainder_half, std::abs(gh.g(y, y2) - pred_h.literal));

        // Second-order identity: literal right-hand side and the exact G dD G dD G^B form.
        double left = 0.0, right = 0.0, exact = 0.0;
        for (std::size_t a = 0; a < pert.size(); ++a) {
          const Site& x = pert.sites[a];
          const double gxx = g.g(x, x);
          for (int e = 0; e < nd; ++e) left += g.g(y, x) * pert.deltas[a][e] * (delta * g.g(step(x, e), x) - gxx);
        }
        for (std::size_t b = 0; b < pert.size(); ++b) {
          const Site& z = pert.sites[b];
          for (int e = 0; e < nd; ++e) right += pert.deltas[b][e] * (delta * gb.g(step(z, e), y2) - gb.g(z, y2));
        }
        for (std::size_t a = 0; a < pert.size(); ++a) {
          const Site& x = pert.sites[a];
          double over_e = 0.0;
          for (int e = 0; e < nd; ++e) {
            double over_z = 0.0;
            for (std::size_t b = 0; b < pert.size(); ++b) {
              const Site& z = pert.sites[b];
              double over_e2 = 0.0;
              for (int e2 = 0; e2 < nd; ++e2) over_e2 += pert.deltas[b][e2] * gb.g(step(z, e2), y2);
              over_z += g.g(step(x, e), z) * delta * over_e2;
            }
            over_e += pert.deltas[a][e] * over_z;
          }
          exact += g.g(y, x) * delta * over_e;
        }
        r.green3_scale = std::max(r.green3_scale, std::abs(rem));
        r.green3_literal_residual = std::max(r.green3_literal_residual, std::abs(rem - left * right));
        r.green3_exact_residual = std::max(r.green3_exact_residual, std::abs(rem - exact));
      }
    }
    r.halving_ratio = r.remainder_half > 0.0 ? r.remainder / r.remainder_half : 0.0;

    for (const auto* solver : {&g, &gb}) {
      for (const auto& c : solver->normalization_log()) {
        ++r.normalization_checks;
        if (!c.ok) r.normalization_ok = false;
      }
    }
  } catch (const std::exception& ex) {
    r.failure = ex.what();
    r.unif_ok = r.green1_ok = r.green2_ok = r.expansion1_ok = r.expansion2_ok = false;
  }
  return r;
}

bool LemmaSuiteReport::all_inequalities_hold() const {
  for (const auto& r : instances) {
    if (!r.failure.empty() || !r.unif_ok || !r.green1_ok || !r.green2_ok || !r.expansion1_ok || !r.entries_ok) {
      return false;
    }
  }
  return !instances.empty();
}

bool LemmaSuiteReport::halving_in_range(double lo, double hi) const {
  for (const auto& r : instances) {
    if (!(r.halving_ratio >= lo && r.halving_ratio <= hi)) return false;
  }
  return !instances.empty();
}

int LemmaSuiteReport::normalization_checks() const {
  int n = 0;
  for (const auto& r : instances) n += r.normalization_checks;
  return n;
}

bool LemmaSuiteReport::normalization_ok() const {
  for (const auto& r : instances) {
    if (!r.normalization_ok) return false;
  }
  return !instances.empty();
}

LemmaSuiteReport verify_lemma_bounds(const LemmaSuiteSpec& spec, int n_instances, std::uint64_t seed, Exec exec) {
  ellipticity_kappa(spec.p0, spec.epsilon);
  neumann_length(spec.delta, spec.tol);
  LemmaSuiteReport rep;
  rep.instances.resize(n_instances);
  const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (exec == Exec::parallel)
  for (int i = 0; i < n_instances; ++i) {
    rep.instances[i] = verify_lemma_instance(spec, derive_seed(seed, stream::instance, static_cast<std::uint64_t>(i)));
  }
  return rep;
}

}  // namespace rwre
