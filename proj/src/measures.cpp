#include "rwre/measures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rwre/io.hpp"
#include "rwre/kernels.hpp"
#include "rwre/rng.hpp"

namespace rwre {

ConfigurationSpace::ConfigurationSpace(std::vector<Site> sites, const PerturbationLaw& law)
    : sites_(std::move(sites)), n_atoms_(law.num_atoms()) {
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (sites_[i] == sites_[j]) throw std::invalid_argument("configuration space: repeated site in B");
    }
  }
  double sz = 1.0;
  for (std::size_t i = 0; i < sites_.size(); ++i) sz *= n_atoms_;
  if (sz > (1 << 20)) throw std::invalid_argument("configuration space: more than 2^20 configurations");
  size_ = static_cast<int>(sz);
  prob_.assign(size_, 1.0);
  for (int id = 0; id < size_; ++id) {
    const auto c = config(id);
    for (int a : c.atoms) prob_[id] *= law.weight(a);
  }
}

int ConfigurationSpace::id(const BoxConfiguration& c) const {
  if (c.atoms.size() != sites_.size()) throw std::invalid_argument("configuration: wrong number of sites");
  int id = 0, mult = 1;
  for (int a : c.atoms) {
    if (a < 0 || a >= n_atoms_) throw std::out_of_range("configuration: atom index out of range");
    id += a * mult;
    mult *= n_atoms_;
  }
  return id;
}

BoxConfiguration ConfigurationSpace::config(int id) const {
  if (id < 0 || id >= size_) throw std::out_of_range("configuration id out of range");
  BoxConfiguration c;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    c.atoms.push_back(id % n_atoms_);
    id /= n_atoms_;
  }
  return c;
}

double DensityEstimate::mass() const { return pairwise_sum(q_hat); }

void DensityEstimate::write_csv(std::ostream& out) const {
  out << "config_id";
  for (std::size_t i = 0; i < sites.size(); ++i) out << ",a" << i + 1;
  out << ",count,q_hat,p,ratio,stderr\n";
  for (int c = 0; c < size(); ++c) {
    out << c;
    int id = c;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      out << "," << id % num_atoms;
      id /= num_atoms;
    }
    out << "," << fmt17(counts[c]) << "," << fmt17(q_hat[c]) << "," << fmt17(p[c]) << "," << fmt17(ratio[c]) << ","
        << fmt17(ratio_se[c]) << "\n";
  }
}

WalkTrace simulate_walk(const EnvironmentField& field, const Site& start, std::int64_t n_steps, std::uint64_t walk_seed) {
  WalkTrace t;
  t.environment_seed = field.seed();
  t.steps = n_steps;
  t.positions.reserve(static_cast<std::size_t>(n_steps) + 1);
  Engine eng(walk_seed);
  Site x = start;
  t.positions.push_back(x);
  for (std::int64_t k = 0; k < n_steps; ++k) {
    x = walk_step(field, x, eng);
    t.positions.push_back(x);
  }
  return t;
}

std::int64_t default_burn_in(double epsilon) {
  constexpr std::int64_t cap = 100000;
  if (epsilon <= 0.0) return cap;
  return std::min<std::int64_t>(cap, static_cast<std::int64_t>(std::ceil(10.0 / (epsilon * epsilon))));
}

namespace {

// Pools per-replica (or per-block) count vectors into an estimate.
DensityEstimate finish_density(std::string name, int dim, const ConfigurationSpace& space,
                               const std::vector<std::vector<double>>& counts) {
  DensityEstimate d;
  d.estimator = std::move(name);
  d.dim = dim;
  d.sites = space.sites();
  d.num_atoms = space.num_atoms();
  d.replicas = static_cast<int>(counts.size());
  d.replica_counts = counts;
  const int nc = space.size();
  const std::size_t nr = counts.size();
  std::vector<double> totals(nr);
  for (std::size_t r = 0; r < nr; ++r) totals[r] = pairwise_sum(counts[r]);
  d.total = pairwise_sum(totals);
  d.counts.assign(nc, 0.0);
  d.p.assign(nc, 0.0);
  d.q_hat.assign(nc, 0.0);
  d.ratio.assign(nc, 0.0);
  d.ratio_se.assign(nc, 0.0);
  std::vector<double> num(nr), den(nr);
  for (int c = 0; c < nc; ++c) {
    d.p[c] = space.probability(c);
    for (std::size_t r = 0; r < nr; ++r) num[r] = counts[r][c];
    d.counts[c] = pairwise_sum(num);
    if (d.total <= 0.0) continue;
    d.q_hat[c] = d.counts[c] / d.total;
    for (std::size_t r = 0; r < nr; ++r) den[r] = totals[r] * d.p[c];
    // Replicas with no records carry no information; drop them from the jackknife.
    std::vector<double> n2, d2;
    for (std::size_t r = 0; r < nr; ++r) {
      if (totals[r] > 0.0) {
        n2.push_back(num[r]);
        d2.push_back(den[r]);
      }
    }
    const auto est = jackknife_ratio(n2, d2);
    d.ratio[c] = est.value;
    d.ratio_se[c] = est.se;
  }
  return d;
}

double dot(const Site& x, const std::array<double, kMaxDim>& l, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) s += x[a] * l[a];
  return s;
}

}  // namespace

DensityEstimate marginal_density(const DensityEstimate& joint, const PerturbationLaw& law, std::size_t site) {
  if (site >= joint.sites.size()) throw std::out_of_range("marginal_density: no such site");
  const ConfigurationSpace joint_space(joint.sites, law);
  const ConfigurationSpace space({joint.sites[site]}, law);
  std::vector<std::vector<double>> counts(joint.replica_counts.size(), std::vector<double>(space.size(), 0.0));
  for (std::size_t r = 0; r < counts.size(); ++r) {
    for (int c = 0; c < joint_space.size(); ++c) counts[r][joint_space.config(c).atoms[site]] += joint.replica_counts[r][c];
  }
  auto d = finish_density(joint.estimator, joint.dim, space, counts);
  d.burn_in = joint.burn_in;
  d.ld_holds = joint.ld_holds;
  d.warnings = joint.warnings;
  return d;
}

DensityEstimate cesaro_invariant_estimate(const EnvironmentField& field, const std::vector<Site>& sites,
                                          std::int64_t n_steps, std::int64_t burn_in, int n_replicas,
                                          std::uint64_t seed, Exec exec) {
  if (burn_in < 0) burn_in = default_burn_in(field.epsilon());
  if (n_steps <= burn_in) throw std::invalid_argument("cesaro estimate: n_steps must exceed burn_in");
  if (n_replicas < 1) throw std::invalid_argument("cesaro estimate: need at least one replica");
  const ConfigurationSpace space(sites, field.law());
  std::vector<std::vector<double>> counts(n_replicas, std::vector<double>(space.size(), 0.0));
  const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (exec == Exec::parallel)
  for (int r = 0; r < n_replicas; ++r) {
    EnvironmentField f = field;
    f.reseed(derive_seed(seed, stream::environment, static_cast<std::uint64_t>(r)));
    Engine eng = make_engine(seed, stream::walk, static_cast<std::uint64_t>(r));
    std::vector<std::int64_t> c(space.size(), 0);
    Site x{};
    for (std::int64_t k = 0; k < n_steps; ++k) {
      if (k >= burn_in) ++c[space.id_at(f, x)];
      x = walk_step(f, x, eng);
    }
    for (int i = 0; i < space.size(); ++i) counts[r][i] = static_cast<double>(c[i]);
  }
  auto d = finish_density("cesaro", field.dim(), space, counts);
  d.burn_in = burn_in;
  d.ld_holds = check_ld(field).holds;
  if (!d.ld_holds) d.warnings.push_back("local drift condition fails: outside the regime of the expansion");
  return d;
}

MuDeltaEstimate mu_delta_estimate(const EnvironmentField& field, const std::vector<Site>& sites, double delta,
                                  std::int64_t n_traj, std::uint64_t seed, Exec exec) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("mu_delta: delta must lie in (0,1)");
  if (n_traj < 1) throw std::invalid_argument("mu_delta: n_traj must be >= 1");
  const ConfigurationSpace space(sites, field.law());
  const int nc = space.size();
  const std::int64_t n_blocks = std::min<std::int64_t>(n_traj, 64);
  std::vector<std::vector<double>> k1(n_blocks, std::vector<double>(nc, 0.0)), k0 = k1;
  std::vector<std::int64_t> empty(n_blocks, 0);
  const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (exec == Exec::parallel)
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    EnvironmentField f = field;
    std::vector<std::int64_t> c0(nc, 0), c1(nc, 0);
    const std::int64_t lo = n_traj * b / n_blocks, hi = n_traj * (b + 1) / n_blocks;
    for (std::int64_t t = lo; t < hi; ++t) {
      const auto ut = static_cast<std::uint64_t>(t);
      f.reseed(derive_seed(seed, stream::environment, ut));
      Engine walk = make_engine(seed, stream::walk, ut);
      Engine kill = make_engine(seed, stream::killing, ut);
      const std::int64_t tau = draw_geometric_tau(kill, delta);
      if (tau == 1) ++empty[b];
      Site x{};
      for (std::int64_t k = 0; k < tau; ++k) {
        const int id = space.id_at(f, x);
        ++c0[id];
        if (k >= 1) ++c1[id];
        if (k + 1 < tau) x = walk_step(f, x, walk);
      }
    }
    for (int i = 0; i < nc; ++i) {
      k0[b][i] = static_cast<double>(c0[i]);
      k1[b][i] = static_cast<double>(c1[i]);
    }
  }
  MuDeltaEstimate m;
  m.delta = delta;
  m.n_traj = n_traj;
  m.from_k1 = finish_density("mu_delta_k1", field.dim(), space, k1);
  m.from_k0 = finish_density("mu_delta_k0", field.dim(), space, k0);
  m.from_k1.ld_holds = m.from_k0.ld_holds = check_ld(field).holds;
  std::int64_t n_empty = 0;
  for (auto e : empty) n_empty += e;
  m.empty_fraction = static_cast<double>(n_empty) / static_cast<double>(n_traj);
  const double e_tau = 1.0 / (1.0 - delta);
  const double n = static_cast<double>(n_traj);
  for (int c = 0; c < nc; ++c) {
    m.fixed_k1.push_back(m.from_k1.counts[c] / (n * (e_tau - 1.0)));
    m.fixed_k0.push_back(m.from_k0.counts[c] / (n * e_tau));
  }
  return m;
}

namespace {

// Row g(0, .) on a window sized for the averaged walk, grown until the
// solver certifies the requested tolerance.
GreenVector certified_row(const EnvironmentField& f, const Site& source, double delta, double tol) {
  Box window = killing_window(f, Box(f.dim(), source, source), delta, tol);
  for (int attempt = 0;; ++attempt) {
    try {
      const KilledGreenSolver s(OmegaWindow::from_field(f, window), delta, {tol, Exec::serial});
      return s.row(source);
    } catch (const std::runtime_error&) {
      if (attempt == 4) throw;
      int grow = 0;
      for (int a = 0; a < f.dim(); ++a) grow = std::max(grow, window.extent(a) / 4);
      window = window.grown(grow);
    }
  }
}

}  // namespace

bool IdentityCheck::k0_agrees(double n_se) const {
  return std::abs(traj_k0.value - green_side.value) <= n_se * std::hypot(traj_k0.se, green_side.se);
}

bool IdentityCheck::k1_agrees(double n_se) const {
  return std::abs(traj_k1.value - green_side.value) <= n_se * std::hypot(traj_k1.se, green_side.se);
}

bool IdentityCheck::k1_offset_matches(double n_se) const {
  return std::abs(k0_minus_k1.value - k1_offset_predicted) <= n_se * k0_minus_k1.se;
}

IdentityCheck identity_check(const EnvironmentField& field, const std::vector<Site>& sites, int config_id,
                             double delta, int n_env, std::int64_t n_traj, std::uint64_t seed, double tol, Exec exec) {
  const ConfigurationSpace space(sites, field.law());
  if (config_id < 0 || config_id >= space.size()) throw std::out_of_range("identity check: configuration id");
  if (n_env < 2 || n_traj < 2) throw std::invalid_argument("identity check: need >= 2 environments and trajectories");
  IdentityCheck out;
  out.delta = delta;
  out.config_id = config_id;
  out.p_config = space.probability(config_id);
  out.n_env = n_env;
  out.n_traj = n_traj;
  out.k1_offset_predicted = (1.0 - delta) * out.p_config;

  std::vector<double> num(n_env), den(n_env), bound(n_env);
  std::vector<int> norm_bad(n_env, 0);
  const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (exec == Exec::parallel)
  for (int i = 0; i < n_env; ++i) {
    EnvironmentField f = field;
    f.reseed(derive_seed(seed, stream::instance, static_cast<std::uint64_t>(i)));
    const auto row = certified_row(f, Site{}, delta, tol);
    std::vector<double> hit(row.values.size(), 0.0);
    for (std::size_t j = 0; j < row.values.size(); ++j) {
      if (row.values[j] != 0.0 && space.id_at(f, row.box.site(j)) == config_id) hit[j] = row.values[j];
    }
    num[i] = pairwise_sum(hit);
    den[i] = pairwise_sum(row.values);
    bound[i] = row.error_bound;
    norm_bad[i] = check_normalization(row, delta).ok ? 0 : 1;
  }
  for (int b : norm_bad) out.normalization_failures += b;
  out.green_side = jackknife_ratio(num, den);
  out.max_error_bound = *std::max_element(bound.begin(), bound.end());

  const double e_tau = 1.0 / (1.0 - delta);
  std::vector<double> s0(n_traj), s1(n_traj), diff(n_traj);
#pragma omp parallel for schedule(static) num_threads(workers) if (exec == Exec::parallel)
  for (std::int64_t t = 0; t < n_traj; ++t) {
    const auto ut = static_cast<std::uint64_t>(t);
    EnvironmentField f = field;
    f.reseed(derive_seed(seed, stream::environment, ut));
    Engine walk = make_engine(seed, stream::walk, ut);
    Engine kill = make_engine(seed, stream::killing, ut);
    const std::int64_t tau = draw_geometric_tau(kill, delta);
    double a0 = 0.0, a1 = 0.0;
    Site x{};
    for (std::int64_t k = 0; k < tau; ++k) {
      if (space.id_at(f, x) == config_id) {
        a0 += 1.0;
        if (k >= 1) a1 += 1.0;
      }
      if (k + 1 < tau) x = walk_step(f, x, walk);
    }
    s0[t] = a0 / e_tau;
    s1[t] = a1 / e_tau;
    diff[t] = (a0 - a1) / e_tau;
  }
  out.traj_k0 = mean_and_se(s0);
  out.traj_k1 = mean_and_se(s1);
  out.k0_minus_k1 = mean_and_se(diff);
  return out;
}

OmegaWindow averaged_on(const EnvironmentField& field, const Box& window, const std::vector<Site>& a_plus_y) {
  OmegaWindow w = OmegaWindow::from_field(field, window);
  const auto pe = p_epsilon(field);
  DirVector mean{};
  for (int e = 0; e < pe.num_dirs(); ++e) mean[e] = pe(e);
  for (const auto& x : a_plus_y) w.set_row(x, mean);
  return w;
}

std::vector<KalikowEstimate> kalikow_j_delta(const EnvironmentField& field, const KalikowSpec& spec,
                                             std::uint64_t seed, Exec exec) {
  const int d = field.dim();
  const int nd = 2 * d;
  if (spec.n_env < 2) throw std::invalid_argument("kalikow: need >= 2 environments");
  if (spec.A.empty()) throw std::invalid_argument("kalikow: A must be non-empty");
  for (const auto& z : spec.zs) {
    if (std::find(spec.A.begin(), spec.A.end(), z) == spec.A.end()) {
      throw std::invalid_argument("kalikow: z = " + z.str(d) + " is not in A");
    }
  }
  std::vector<Site> a_plus_y;
  for (const auto& a : spec.A) a_plus_y.push_back(a + spec.y);
  // Anchors: the origin, y, and every z + y + e.
  Site lo{}, hi{};
  auto include = [&](const Site& s) {
    for (int a = 0; a < d; ++a) {
      lo.c[a] = std::min(lo[a], s[a]);
      hi.c[a] = std::max(hi[a], s[a]);
    }
  };
  include(spec.y);
  for (const auto& z : spec.zs) {
    for (int e = 0; e < nd; ++e) include(step(z + spec.y, e));
  }
  const Box anchors(d, lo, hi);
  const auto pe = p_epsilon(field);

  std::vector<KalikowEstimate> out;
  for (double delta : spec.deltas) {
    const std::size_t nz = spec.zs.size();
    // Per environment: numerator and denominator per (z, e), plus bounds.
    std::vector<double> num(spec.n_env * nz * nd), den(spec.n_env * nz * nd), bnd(spec.n_env * nz * nd);
    const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (exec == Exec::parallel)
    for (int i = 0; i < spec.n_env; ++i) {
      EnvironmentField f = field;
      f.reseed(derive_seed(seed, stream::instance, static_cast<std::uint64_t>(i)));
      Box window = killing_window(f, anchors, delta, spec.tol);
      for (int attempt = 0;; ++attempt) {
        try {
          const KilledGreenSolver s(averaged_on(f, window, a_plus_y), delta, {spec.tol, Exec::serial});
          const auto& col_y = s.column(spec.y);
          for (std::size_t iz = 0; iz < nz; ++iz) {
            const Site zy = spec.zs[iz] + spec.y;
            const auto& col_z = s.column(zy);
            const double g0 = col_z.at(Site{});
            const double gzz = col_z.at(zy);
            for (int e = 0; e < nd; ++e) {
              const std::size_t k = (static_cast<std::size_t>(i) * nz + iz) * nd + e;
              num[k] = g0 * (delta * col_y.at(step(zy, e)) - gzz);
              den[k] = g0;
              bnd[k] = std::max(s.entry_error(Site{}, zy), s.entry_error(step(zy, e), spec.y));
            }
          }
          break;
        } catch (const std::runtime_error&) {
          if (attempt == 4) throw;
          int grow = 0;
          for (int a = 0; a < d; ++a) grow = std::max(grow, window.extent(a) / 4);
          window = window.grown(grow);
        }
      }
    }
    for (std::size_t iz = 0; iz < nz; ++iz) {
      for (int e = 0; e < nd; ++e) {
        KalikowEstimate k;
        k.delta = delta;
        k.z = spec.zs[iz];
        k.dir = e;
        std::vector<double> n2, d2;
        for (int i = 0; i < spec.n_env; ++i) {
          const std::size_t idx = (static_cast<std::size_t>(i) * nz + iz) * nd + e;
          k.max_error_bound = std::max(k.max_error_bound, bnd[idx]);
          if (den[idx] < spec.denominator_floor) {
            ++k.below_floor;
            continue;
          }
          n2.push_back(num[idx]);
          d2.push_back(den[idx]);
        }
        if (n2.size() >= 2) k.j = jackknife_ratio(n2, d2);
        k.limit = potential_kernel_fourier(pe, step(k.z, e)).value;
        out.push_back(k);
      }
    }
  }
  return out;
}

Estimate kalikow_j_delta(const EnvironmentField& field, double delta, const Site& y, const Site& z, int dir,
                         const std::vector<Site>& A, int n_env, double tol, std::uint64_t seed) {
  KalikowSpec spec;
  spec.A = A;
  spec.y = y;
  spec.zs = {z};
  spec.deltas = {delta};
  spec.n_env = n_env;
  spec.tol = tol;
  for (const auto& k : kalikow_j_delta(field, spec, seed)) {
    if (k.dir == dir) return k.j;
  }
  throw std::invalid_argument("kalikow: direction out of range");
}

double BallisticityConstant::as_min() const { return std::min(power_term, exp_term); }
double BallisticityConstant::as_max() const { return std::max(power_term, exp_term); }

BallisticityConstant ballisticity_constant(int dim) {
  check_dimension(dim);
  double s = 0.0;
  for (int j = 2; j < 200; ++j) s += std::log(static_cast<double>(j)) / std::ldexp(1.0, j);
  BallisticityConstant c;
  c.power_term = std::ldexp(1.0, 3 * (dim - 1));
  c.exp_term = std::exp(2.0 * (std::log(90.0) + s));
  return c;
}

PolynomialCheck polynomial_condition_check(const EnvironmentField& field, const std::array<double, kMaxDim>& l,
                                           int L, double M, std::int64_t n_traj, std::uint64_t seed,
                                           std::int64_t step_cap, Exec exec) {
  const int d = field.dim();
  if (L < 1) throw std::invalid_argument("polynomial check: L must be >= 1");
  if (n_traj < 1) throw std::invalid_argument("polynomial check: n_traj must be >= 1");
  double norm = 0.0;
  for (int a = 0; a < d; ++a) norm += l[a] * l[a];
  if (!(norm > 0.0)) throw std::invalid_argument("polynomial check: direction must be non-zero");
  std::array<double, kMaxDim> u{};
  for (int a = 0; a < d; ++a) u[a] = l[a] / std::sqrt(norm);
  const double Ld = L;
  const double side = 25.0 * Ld * Ld * Ld;
  auto inside = [&](const Site& x) {
    const double p = dot(x, u, d);
    if (p < -Ld / 2.0 || p > Ld) return false;
    for (int a = 0; a < d; ++a) {
      if (std::abs(x[a] - p * u[a]) > side) return false;
    }
    return true;
  };

  // 0 forward exit, 1 back exit, 2 capped, 3 membership violation
  std::vector<unsigned char> outcome(n_traj);
  const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 256) num_threads(workers) if (exec == Exec::parallel)
  for (std::int64_t t = 0; t < n_traj; ++t) {
    const auto ut = static_cast<std::uint64_t>(t);
    EnvironmentField f = field;
    f.reseed(derive_seed(seed, stream::environment, ut));
    Engine eng = make_engine(seed, stream::walk, ut);
    Site x{}, prev{};
    std::int64_t k = 0;
    while (inside(x) && k < step_cap) {
      prev = x;
      x = walk_step(f, x, eng);
      ++k;
    }
    if (inside(x)) {
      outcome[t] = 2;
    } else if (!inside(prev) || (x - prev).norm1() != 1) {
      outcome[t] = 3;
    } else {
      outcome[t] = dot(x, u, d) < Ld ? 1 : 0;
    }
  }

  PolynomialCheck r;
  r.L = L;
  r.M = M;
  r.direction = u;
  r.n_traj = n_traj;
  for (auto o : outcome) {
    if (o == 1) ++r.back_exits;
    if (o == 2) ++r.capped;
    if (o == 3) ++r.membership_violations;
  }
  const double done = static_cast<double>(n_traj - r.capped);
  if (done > 0) {
    const double p = static_cast<double>(r.back_exits) / done;
    r.back_exit = {p, std::sqrt(p * (1.0 - p) / done)};
  }
  r.threshold = std::pow(Ld, -M);
  r.below_threshold = done > 0 && r.back_exit.value < r.threshold;
  r.c0 = ballisticity_constant(d);
  r.L_reaches_c0_min = Ld >= r.c0.as_min();
  r.L_reaches_c0_max = Ld >= r.c0.as_max();
  r.M_large_enough = M >= 15.0 * d + 5.0;
  return r;
}

VelocityEstimate velocity_mc(const EnvironmentField& field, std::int64_t n_steps, int n_replicas, std::uint64_t seed,
                             Exec exec) {
  if (n_steps < 1 || n_replicas < 1) throw std::invalid_argument("velocity_mc: need n_steps, n_replicas >= 1");
  const int d = field.dim();
  std::vector<std::array<double, kMaxDim>> vel(n_replicas), drift(n_replicas);
  std::vector<double> z(n_replicas);
  const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (exec == Exec::parallel)
  for (int r = 0; r < n_replicas; ++r) {
    EnvironmentField f = field;
    f.reseed(derive_seed(seed, stream::environment, static_cast<std::uint64_t>(r)));
    Engine eng = make_engine(seed, stream::walk, static_cast<std::uint64_t>(r));
    std::array<double, kMaxDim> dsum{};
    Site x{};
    for (std::int64_t k = 0; k < n_steps; ++k) {
      const int atom = f.atom_at(x);
      const auto& row = f.atom_omega(atom);
      for (int a = 0; a < d; ++a) dsum[a] += row[2 * a] - row[2 * a + 1];
      x = step(x, sample_direction(f.atom_cdf(atom), 2 * d, uniform01(eng)));
    }
    const double n = static_cast<double>(n_steps);
    double zmax = 0.0;
    for (int a = 0; a < d; ++a) {
      vel[r][a] = x[a] / n;
      drift[r][a] = dsum[a] / n;
      zmax = std::max(zmax, std::abs(x[a] - dsum[a]) / std::sqrt(n));
    }
    z[r] = zmax;
  }
  VelocityEstimate v;
  v.n_steps = n_steps;
  v.replicas = n_replicas;
  std::vector<double> col(n_replicas);
  for (int a = 0; a < d; ++a) {
    for (int r = 0; r < n_replicas; ++r) col[r] = vel[r][a];
    v.velocity[a] = mean_and_se(col);
    for (int r = 0; r < n_replicas; ++r) col[r] = drift[r][a];
    v.drift_mean[a] = mean_and_se(col);
  }
  v.max_martingale_z = *std::max_element(z.begin(), z.end());
  return v;
}

}  // namespace rwre
