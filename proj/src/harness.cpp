#include "rwre/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "rwre/expansion.hpp"
#include "rwre/greenfn.hpp"
#include "rwre/io.hpp"
#include "rwre/measures.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

enum class Kind { string, integer, number, numbers, strings, seeds, sites };

using Setter = std::function<void(ExperimentManifest&, const nlohmann::json&)>;

struct KeySpec {
  Kind kind;
  Setter set;
};

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::string: return "a string";
    case Kind::integer: return "an integer";
    case Kind::number: return "a number";
    case Kind::numbers: return "an array of numbers";
    case Kind::strings: return "an array of strings";
    case Kind::seeds: return "an array of non-negative integers";
    case Kind::sites: return "an array of integer coordinate arrays";
  }
  return "?";
}

bool has_kind(const nlohmann::json& v, Kind k) {
  auto all = [&](auto pred) { return v.is_array() && std::all_of(v.begin(), v.end(), pred); };
  switch (k) {
    case Kind::string: return v.is_string();
    case Kind::integer: return v.is_number_integer();
    case Kind::number: return v.is_number();
    case Kind::numbers: return all([](const nlohmann::json& x) { return x.is_number(); });
    case Kind::strings: return all([](const nlohmann::json& x) { return x.is_string(); });
    case Kind::seeds: return all([](const nlohmann::json& x) { return x.is_number_unsigned(); });
    case Kind::sites:
      return all([](const nlohmann::json& s) {
        return s.is_array() && s.size() <= static_cast<std::size_t>(kMaxDim) &&
               std::all_of(s.begin(), s.end(), [](const nlohmann::json& x) { return x.is_number_integer(); });
      });
  }
  return false;
}

std::vector<Site> sites_from(const nlohmann::json& v) {
  std::vector<Site> out;
  for (const auto& s : v) {
    Site x;
    for (std::size_t a = 0; a < s.size(); ++a) x[static_cast<int>(a)] = s[a].get<int>();
    out.push_back(x);
  }
  return out;
}

#define RWRE_KEY(name, kind, type) \
  { #name, KeySpec{kind, [](ExperimentManifest& m, const nlohmann::json& v) { m.name = v.get<type>(); }} }
#define RWRE_SITES(name) \
  { #name, KeySpec{Kind::sites, [](ExperimentManifest& m, const nlohmann::json& v) { m.name = sites_from(v); }} }

const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> s = {
      RWRE_KEY(recipe, Kind::string, std::string),
      RWRE_KEY(artifact_version, Kind::string, std::string),
      RWRE_KEY(dimension, Kind::integer, int),
      RWRE_KEY(p0, Kind::numbers, std::vector<double>),
      RWRE_KEY(epsilon_list, Kind::numbers, std::vector<double>),
      RWRE_KEY(target_epsilon, Kind::number, double),
      RWRE_KEY(law_file, Kind::string, std::string),
      RWRE_KEY(delta_list, Kind::numbers, std::vector<double>),
      RWRE_SITES(box_sites),
      RWRE_KEY(n_steps, Kind::integer, std::int64_t),
      RWRE_KEY(burn_in, Kind::integer, std::int64_t),
      RWRE_KEY(replicas, Kind::integer, int),
      RWRE_KEY(n_traj, Kind::integer, std::int64_t),
      RWRE_KEY(n_env, Kind::integer, int),
      RWRE_KEY(n_instances, Kind::integer, int),
      RWRE_KEY(radius, Kind::integer, int),
      RWRE_KEY(methods, Kind::strings, std::vector<std::string>),
      RWRE_KEY(truncated_steps, Kind::integer, int),
      RWRE_KEY(quad_coarse, Kind::integer, int),
      RWRE_KEY(quad_fine, Kind::integer, int),
      RWRE_KEY(tol, Kind::number, double),
      RWRE_KEY(identity_delta, Kind::number, double),
      RWRE_KEY(identity_n_env, Kind::integer, int),
      RWRE_KEY(identity_n_traj, Kind::integer, std::int64_t),
      RWRE_KEY(identity_config, Kind::integer, int),
      RWRE_SITES(kalikow_A),
      RWRE_SITES(kalikow_y),
      RWRE_SITES(kalikow_z),
      RWRE_KEY(direction, Kind::numbers, std::vector<double>),
      RWRE_KEY(L, Kind::integer, int),
      RWRE_KEY(M, Kind::number, double),
      RWRE_KEY(step_cap, Kind::integer, std::int64_t),
      RWRE_KEY(max_sites, Kind::integer, int),
      RWRE_KEY(site_radius, Kind::integer, int),
      RWRE_KEY(max_perturbation, Kind::number, double),
      RWRE_KEY(window_radius, Kind::integer, int),
      RWRE_KEY(max_walk_steps, Kind::number, double),
      RWRE_KEY(seeds, Kind::seeds, std::vector<std::uint64_t>),
      RWRE_KEY(out_dir, Kind::string, std::string),
  };
  return s;
}

#undef RWRE_KEY
#undef RWRE_SITES

void set_key(ExperimentManifest& m, const std::string& key, const nlohmann::json& v) {
  const auto& s = schema();
  const auto it = s.find(key);
  if (it == s.end()) throw ManifestError("manifest: unknown key '" + key + "'");
  if (!has_kind(v, it->second.kind)) {
    throw ManifestError("manifest: '" + key + "' must be " + kind_name(it->second.kind));
  }
  it->second.set(m, v);
}

ojson sites_json(const std::vector<Site>& sites, int dim) {
  ojson a = ojson::array();
  for (const auto& s : sites) {
    ojson c = ojson::array();
    for (int i = 0; i < dim; ++i) c.push_back(s[i]);
    a.push_back(c);
  }
  return a;
}

std::string eps_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

bool contains_value(const std::vector<double>& xs, double v) {
  return std::any_of(xs.begin(), xs.end(), [&](double x) { return std::abs(x - v) <= 1e-12 * std::max(1.0, v); });
}

// Per-epsilon (or per-run) seeds derived from the manifest master seed.
inline constexpr std::uint64_t kRecipeStream = 0x5005;
std::uint64_t run_seed(const ExperimentManifest& m, std::uint64_t index) {
  return derive_seed(m.master_seed(), kRecipeStream, index);
}

void check_budget(const ExperimentManifest& m, double steps, const std::string& what) {
  if (steps > m.max_walk_steps) {
    throw ResourceCapError(m.recipe + ": " + what + " needs " + fmt17(steps) + " walk steps, over max_walk_steps = " +
                           fmt17(m.max_walk_steps));
  }
}

class Outputs {
 public:
  Outputs(const ExperimentManifest& m, RecipeResult& r) : dir_(m.out_dir), r_(r) { fs::create_directories(dir_); }
  std::ofstream open(const std::string& name) {
    r_.files.push_back(name);
    std::ofstream out(fs::path(dir_) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir_) / name).string());
    return out;
  }
  void text(const std::string& name, const std::string& s) { open(name) << s << "\n"; }
  template <class T>
  void csv(const std::string& name, const T& table) {
    auto f = open(name);
    table.write_csv(f);
  }

 private:
  std::string dir_;
  RecipeResult& r_;
};

CriterionResult criterion(int id) {
  CriterionResult c;
  c.id = id;
  c.pass = true;
  return c;
}

void metric(CriterionResult& c, std::string name, double v) { c.metrics.emplace_back(std::move(name), v); }

void fail(CriterionResult& c, const std::string& why) {
  c.pass = false;
  if (!c.note.empty()) c.note += "; ";
  c.note += why;
}

// ---------------------------------------------------------------- kernel-table

void kernel_table_recipe(const ExperimentManifest& m, RecipeResult& res) {
  Outputs out(m, res);
  const auto p0 = m.kernel();
  const auto law = m.law();
  const int d = m.dimension;
  KernelTableOptions opts;
  opts.truncated_steps = m.truncated_steps;
  opts.quadrature = QuadratureSpec{m.quad_coarse, m.quad_fine};
  const bool ssrw = d == 2 && p0 == TransitionKernel::symmetric(2);

  auto c1 = criterion(1);
  auto c2 = criterion(2);
  bool c1_evaluated = false;
  auto cross = out.open("kernel_cross_method.csv");
  cross << "epsilon";
  for (int a = 0; a < d; ++a) cross << ",x" << a + 1;
  cross << ",method_a,method_b,J_a,J_b,diff,combined_tol,agree\n";
  int pairs = 0, disagreements = 0;
  double worst_ratio = 0.0;

  for (double eps : m.epsilon_list) {
    const auto p = eps == 0.0 ? p0 : p_epsilon(p0, eps, law);
    const bool exact_ok = d == 2 && p == TransitionKernel::symmetric(2);
    std::vector<PotentialKernelTable> tables;
    for (const auto& name : m.methods) {
      const auto method = kernel_method_from_string(name);
      if (method == KernelMethod::recursion_2d && !exact_ok) continue;
      tables.push_back(make_kernel_table(p, m.radius, method, opts));
      const std::string stem = "kernel_table_eps" + eps_tag(eps) + "_" + to_string(method);
      out.csv(stem + ".csv", tables.back());
      out.text(stem + ".json", tables.back().to_json());
    }
    for (std::size_t a = 0; a < tables.size(); ++a) {
      for (std::size_t b = a + 1; b < tables.size(); ++b) {
        const Box& box = tables[a].box();
        for (std::size_t i = 0; i < box.size(); ++i) {
          const Site x = box.site(i);
          const double ja = tables[a].at(x), jb = tables[b].at(x);
          const double diff = std::abs(ja - jb);
          const double tol = tables[a].tolerance(x) + tables[b].tolerance(x);
          const bool ok = diff <= tol;
          ++pairs;
          if (!ok) ++disagreements;
          if (tol > 0.0) worst_ratio = std::max(worst_ratio, diff / tol);
          cross << fmt17(eps);
          for (int k = 0; k < d; ++k) cross << "," << x[k];
          cross << "," << to_string(tables[a].method()) << "," << to_string(tables[b].method()) << "," << fmt17(ja)
                << "," << fmt17(jb) << "," << fmt17(diff) << "," << fmt17(tol) << "," << (ok ? 1 : 0) << "\n";
        }
      }
    }
    if (eps == 0.0 && ssrw && m.radius >= 2) {
      const double pi = std::numbers::pi;
      const std::vector<std::pair<Site, double>> exact = {
          {Site{0, 0}, 0.0},          {Site{1, 0}, -1.0},           {Site{-1, 0}, -1.0},
          {Site{0, 1}, -1.0},         {Site{0, -1}, -1.0},          {Site{1, 1}, -4.0 / pi},
          {Site{1, -1}, -4.0 / pi},   {Site{-1, 1}, -4.0 / pi},     {Site{-1, -1}, -4.0 / pi},
          {Site{2, 0}, 8.0 / pi - 4}, {Site{-2, 0}, 8.0 / pi - 4},  {Site{0, 2}, 8.0 / pi - 4},
          {Site{0, -2}, 8.0 / pi - 4}};
      for (const auto& t : tables) {
        double limit = 0.0;
        if (t.method() == KernelMethod::recursion_2d) limit = 1e-9;
        if (t.method() == KernelMethod::fourier) limit = 1e-4;
        if (limit == 0.0) continue;
        c1_evaluated = true;
        double worst = 0.0;
        for (const auto& [x, v] : exact) worst = std::max(worst, std::abs(t.at(x) - v));
        metric(c1, to_string(t.method()) + "_max_error", worst);
        if (worst > limit) fail(c1, to_string(t.method()) + " misses the exact values by " + fmt17(worst));
      }
    }
  }
  metric(c2, "pairs", pairs);
  metric(c2, "disagreements", disagreements);
  metric(c2, "max_diff_over_tol", worst_ratio);
  if (pairs == 0) fail(c2, "fewer than two methods");
  if (disagreements > 0) fail(c2, std::to_string(disagreements) + " pairs outside combined tolerance");
  if (c1_evaluated) res.criteria.push_back(c1);
  res.criteria.push_back(c2);
}

// ----------------------------------------------------------- corollary2-verify

void corollary2_recipe(const ExperimentManifest& m, RecipeResult& res) {
  Outputs out(m, res);
  const auto p0 = m.kernel();
  const auto law = m.law();
  const int d = m.dimension;
  const ConfigurationSpace space(m.box_sites, law);
  int reach = 0;
  for (const auto& z : m.box_sites) reach = std::max(reach, z.norm_inf());
  const bool ssrw = d == 2 && p0 == TransitionKernel::symmetric(2);
  const auto J = make_kernel_table(p0, reach + 1, ssrw ? KernelMethod::recursion_2d : KernelMethod::fourier);
  double budget = 0.0;
  for (std::size_t i = 0; i < m.epsilon_list.size(); ++i) budget += double(m.n_steps) * m.replicas;
  check_budget(m, budget, "Cesaro runs");

  // Index of z1 = e2 and of the origin in B.
  auto find_site = [&](const Site& s) -> int {
    for (std::size_t i = 0; i < m.box_sites.size(); ++i) {
      if (m.box_sites[i] == s) return static_cast<int>(i);
    }
    return -1;
  };
  const int i_z1 = find_site(d >= 2 ? Site{0, 1} : Site{1});
  const int i_0 = find_site(Site{});

  auto c3 = criterion(3);
  auto c4 = criterion(4);
  if (!ssrw) fail(c3, "needs the symmetric walk in d = 2");
  if (i_z1 < 0) fail(c3, "z1 = (0,1) is not in box_sites");
  if (i_0 < 0) fail(c4, "the origin is not in box_sites");
  if (!contains_value(m.epsilon_list, m.target_epsilon)) fail(c3, "target_epsilon is not in epsilon_list");

  // The closed two-site form against the general first-order density.
  if (ssrw && i_z1 >= 0 && i_0 >= 0 && m.box_sites.size() == 2) {
    double worst = 0.0;
    for (int c = 0; c < space.size(); ++c) {
      const auto conf = space.config(c);
      DirVector xb{};
      for (int e = 0; e < 4; ++e) xb[e] = law.xi_bar(conf.atoms[i_z1], e);
      const double a = density_first_order(conf, m.box_sites, law, m.target_epsilon, J);
      worst = std::max(worst, std::abs(a - corollary2_density(xb, m.target_epsilon)));
    }
    metric(c3, "closed_form_max_diff", worst);
    if (worst > 1e-12) fail(c3, "closed two-site form disagrees with the first-order density");
  }

  std::vector<double> eps_used, measured, predicted, ses;
  for (std::size_t k = 0; k < m.epsilon_list.size(); ++k) {
    const double eps = m.epsilon_list[k];
    const EnvironmentField field(p0, eps, law, 0);
    const auto joint = cesaro_invariant_estimate(field, m.box_sites, m.n_steps, m.burn_in, m.replicas, run_seed(m, k));
    const std::string tag = "eps" + eps_tag(eps);
    out.csv("cesaro_" + tag + ".csv", joint);
    out.csv("prediction_" + tag + ".csv", predict_densities(space, law, eps, J, ssrw ? "p0-recursion" : "p0-fourier"));
    const bool at_target = std::abs(eps - m.target_epsilon) <= 1e-12;
    const double post = double(m.n_steps - joint.burn_in) * m.replicas;

    if (i_z1 >= 0) {
      const auto mz = marginal_density(joint, law, static_cast<std::size_t>(i_z1));
      out.csv("cesaro_" + tag + "_z1.csv", mz);
      const ConfigurationSpace one({m.box_sites[i_z1]}, law);
      double worst = -1.0, worst_se = 0.0, worst_meas = 0.0, worst_pred = 0.0;
      for (int c = 0; c < one.size(); ++c) {
        const double pred = density_first_order(one.config(c), one.sites(), law, eps, J);
        const double r = std::abs(mz.ratio[c] - pred);
        if (r > worst) {
          worst = r;
          worst_se = mz.ratio_se[c];
          worst_meas = mz.ratio[c];
          worst_pred = pred;
        }
        if (at_target) {
          const double allow = std::max(4 * mz.ratio_se[c], 0.3 * eps * eps * std::abs(std::log(eps)));
          metric(c3, "ratio_c" + std::to_string(c), mz.ratio[c]);
          metric(c3, "stderr_c" + std::to_string(c), mz.ratio_se[c]);
          metric(c3, "prediction_c" + std::to_string(c), pred);
          metric(c3, "allowance_c" + std::to_string(c), allow);
          if (r > allow) fail(c3, "configuration " + std::to_string(c) + " residual " + fmt17(r) + " over " + fmt17(allow));
        }
      }
      eps_used.push_back(eps);
      measured.push_back(worst_meas);
      predicted.push_back(worst_pred);
      ses.push_back(worst_se);
      if (at_target) {
        metric(c3, "post_burn_in_steps", post);
        metric(c3, "replicas", m.replicas);
        if (post < 1e7) fail(c3, "fewer than 1e7 post-burn-in steps");
        if (m.replicas < 20) fail(c3, "fewer than 20 replicas");
        if (!joint.ld_holds) fail(c3, "local drift condition fails");
      }
    }
    if (i_0 >= 0 && at_target) {
      const auto m0 = marginal_density(joint, law, static_cast<std::size_t>(i_0));
      out.csv("cesaro_" + tag + "_origin.csv", m0);
      for (int c = 0; c < m0.size(); ++c) {
        const double dev = std::abs(m0.ratio[c] - 1.0);
        const double allow = std::max(4 * m0.ratio_se[c], std::pow(eps, 1.5));
        metric(c4, "deviation_c" + std::to_string(c), dev);
        metric(c4, "allowance_c" + std::to_string(c), allow);
        if (dev > allow) fail(c4, "configuration " + std::to_string(c) + " deviates by " + fmt17(dev));
      }
    }
  }
  if (i_0 >= 0 && !contains_value(m.epsilon_list, m.target_epsilon)) fail(c4, "target_epsilon is not in epsilon_list");

  if (eps_used.size() >= 3) {
    try {
      const auto rep = residual_scaling_report(eps_used, measured, predicted, ses);
      out.csv("residual_scaling.csv", rep);
      metric(c3, "scaling_noise_limited", rep.noise_limited ? 1 : 0);
      if (!rep.noise_limited) {
        metric(c3, "scaling_slope", rep.slope);
        metric(c3, "scaling_slope_se", rep.slope_se);
        if (rep.slope < 1.5) fail(c3, "residual slope " + fmt17(rep.slope) + " below 1.5");
      }
      c3.note += std::string(c3.note.empty() ? "" : "; ") + "scaling " + rep.status();
    } catch (const std::invalid_argument& e) {
      fail(c3, e.what());
    }
  } else {
    fail(c3, "scaling needs at least three epsilons");
  }
  res.criteria.push_back(c3);
  res.criteria.push_back(c4);
}

// ------------------------------------------------------------- velocity-verify

void velocity_recipe(const ExperimentManifest& m, RecipeResult& res) {
  Outputs out(m, res);
  const auto p0 = m.kernel();
  const auto law = m.law();
  const int d = m.dimension;
  check_budget(m, double(m.n_steps) * m.replicas * double(m.epsilon_list.size()), "velocity runs");
  auto c5 = criterion(5);
  auto csv = out.open("velocity.csv");
  csv << "epsilon,axis,v_hat,stderr,drift_mean,d0,d1,d2,prediction,oracle_d2,oracle_v,tolerance,agree\n";
  for (std::size_t k = 0; k < m.epsilon_list.size(); ++k) {
    const double eps = m.epsilon_list[k];
    const EnvironmentField field(p0, eps, law, 0);
    KernelTableOptions opts;
    opts.quadrature = QuadratureSpec{m.quad_coarse, m.quad_fine};
    const auto J = make_kernel_table(p_epsilon(p0, eps, law), 1, KernelMethod::fourier, opts);
    const auto pred = velocity_expansion(p0, law, eps, J);
    VelocityPrediction oracle = pred;
    if (eps > 0.0) oracle = velocity_q_average(p0, law, eps, J);
    const auto v = velocity_mc(field, m.n_steps, m.replicas, run_seed(m, k));
    const std::string tag = "eps" + eps_tag(eps);
    for (int a = 0; a < d; ++a) {
      const double tol = std::max(4 * v.velocity[a].se, 5 * std::pow(eps, 2.5));
      const bool ok = std::abs(v.velocity[a].value - pred.v[a]) <= tol;
      csv << fmt17(eps) << "," << a + 1 << "," << fmt17(v.velocity[a].value) << "," << fmt17(v.velocity[a].se) << ","
          << fmt17(v.drift_mean[a].value) << "," << fmt17(pred.d0[a]) << "," << fmt17(pred.d1[a]) << ","
          << fmt17(pred.d2[a]) << "," << fmt17(pred.v[a]) << "," << fmt17(oracle.d2[a]) << "," << fmt17(oracle.v[a])
          << "," << fmt17(tol) << "," << (ok ? 1 : 0) << "\n";
      const double d2_gap = std::abs(pred.d2[a] - oracle.d2[a]);
      if (d2_gap > 1e-10) fail(c5, tag + ": d2 differs from the one-site oracle by " + fmt17(d2_gap));
      if (a == 0) {
        metric(c5, tag + "_v1", v.velocity[0].value);
        metric(c5, tag + "_v1_stderr", v.velocity[0].se);
        metric(c5, tag + "_prediction", pred.v[0]);
        metric(c5, tag + "_tolerance", tol);
        metric(c5, tag + "_d2_oracle_gap", d2_gap);
        if (!ok) fail(c5, tag + ": velocity misses the expansion by " + fmt17(std::abs(v.velocity[0].value - pred.v[0])));
      }
    }
    metric(c5, tag + "_max_martingale_z", v.max_martingale_z);
  }
  res.criteria.push_back(c5);
}

// --------------------------------------------------------- green-lemma-verify

void lemma_recipe(const ExperimentManifest& m, RecipeResult& res) {
  Outputs out(m, res);
  LemmaSuiteSpec spec;
  spec.p0 = m.kernel();
  spec.law = m.law();
  spec.epsilon = m.epsilon_list.front();
  spec.delta = m.delta_list.front();
  spec.max_sites = m.max_sites;
  spec.site_radius = m.site_radius;
  spec.max_delta = m.max_perturbation;
  spec.window_radius = m.window_radius;
  spec.tol = m.tol;
  const auto rep = verify_lemma_bounds(spec, m.n_instances, m.master_seed());

  auto csv = out.open("lemma_instances.csv");
  csv << "seed,n_sites,diameter,kappa,c3,unif_worst,green1_worst,green2_worst,expansion1_worst,expansion2_worst,"
         "predictor_gap,remainder,remainder_half,halving_ratio,green3_literal_residual,green3_exact_residual,"
         "green3_scale,balance_literal_residual,balance_residual,normalization_checks,inequalities_ok,failure\n";
  double hmin = 1e300, hmax = -1e300, g3p = 0.0, g3e = 0.0, bal = 0.0;
  for (const auto& r : rep.instances) {
    const bool ok = r.failure.empty() && r.unif_ok && r.green1_ok && r.green2_ok && r.expansion1_ok && r.entries_ok;
    csv << r.seed << "," << r.n_sites << "," << r.diameter << "," << fmt17(r.kappa) << "," << fmt17(r.c3) << ","
        << fmt17(r.unif_worst) << "," << fmt17(r.green1_worst) << "," << fmt17(r.green2_worst) << ","
        << fmt17(r.expansion1_worst) << "," << fmt17(r.expansion2_worst) << "," << fmt17(r.predictor_gap) << ","
        << fmt17(r.remainder) << "," << fmt17(r.remainder_half) << "," << fmt17(r.halving_ratio) << ","
        << fmt17(r.green3_literal_residual) << "," << fmt17(r.green3_exact_residual) << "," << fmt17(r.green3_scale)
        << "," << fmt17(r.balance_literal_residual) << "," << fmt17(r.balance_residual) << ","
        << r.normalization_checks << "," << (ok ? 1 : 0) << "," << r.failure << "\n";
    hmin = std::min(hmin, r.halving_ratio);
    hmax = std::max(hmax, r.halving_ratio);
    g3p = std::max(g3p, r.green3_literal_residual);
    g3e = std::max(g3e, r.green3_exact_residual);
    bal = std::max(bal, r.balance_residual);
  }
  auto c6 = criterion(6);
  metric(c6, "instances", static_cast<double>(rep.instances.size()));
  metric(c6, "halving_min", hmin);
  metric(c6, "halving_max", hmax);
  metric(c6, "green3_literal_residual_max", g3p);
  metric(c6, "green3_exact_residual_max", g3e);
  metric(c6, "balance_residual_max", bal);
  if (!rep.all_inequalities_hold()) fail(c6, "an inequality failed on some instance");
  if (!rep.halving_in_range(3.0, 5.0)) fail(c6, "halving ratio outside [3, 5]");
  auto c7 = criterion(7);
  metric(c7, "row_sum_checks", rep.normalization_checks());
  if (!rep.normalization_ok()) fail(c7, "a row sum missed 1/(1-delta)");
  res.criteria.push_back(c6);
  res.criteria.push_back(c7);
}

// --------------------------------------------------------- mu-delta-vs-cesaro

void mu_delta_recipe(const ExperimentManifest& m, RecipeResult& res) {
  Outputs out(m, res);
  const auto p0 = m.kernel();
  const auto law = m.law();
  const double eps = m.epsilon_list.front();
  const EnvironmentField field(p0, eps, law, 0);
  double budget = double(m.n_steps) * m.replicas + double(m.identity_n_traj) / (1.0 - m.identity_delta);
  for (double dl : m.delta_list) budget += double(m.n_traj) / (1.0 - dl);
  check_budget(m, budget, "trajectories");

  // Identity: exact Green side against the trajectory side.
  const auto ic = identity_check(field, m.box_sites, m.identity_config, m.identity_delta, m.identity_n_env,
                                 m.identity_n_traj, run_seed(m, 0), m.tol);
  {
    auto csv = out.open("identity.csv");
    csv << "delta,config_id,p_config,green,green_se,traj_k0,traj_k0_se,traj_k1,traj_k1_se,k0_minus_k1,"
           "k0_minus_k1_se,k1_offset_predicted,max_error_bound,normalization_failures,n_env,n_traj\n";
    csv << fmt17(ic.delta) << "," << ic.config_id << "," << fmt17(ic.p_config) << "," << fmt17(ic.green_side.value)
        << "," << fmt17(ic.green_side.se) << "," << fmt17(ic.traj_k0.value) << "," << fmt17(ic.traj_k0.se) << ","
        << fmt17(ic.traj_k1.value) << "," << fmt17(ic.traj_k1.se) << "," << fmt17(ic.k0_minus_k1.value) << ","
        << fmt17(ic.k0_minus_k1.se) << "," << fmt17(ic.k1_offset_predicted) << "," << fmt17(ic.max_error_bound)
        << "," << ic.normalization_failures << "," << ic.n_env << "," << ic.n_traj << "\n";
  }
  auto c7 = criterion(7);
  metric(c7, "row_sum_checks", ic.n_env);
  if (ic.normalization_failures > 0) fail(c7, "a row sum missed 1/(1-delta)");
  auto c8 = criterion(8);
  metric(c8, "green", ic.green_side.value);
  metric(c8, "green_se", ic.green_side.se);
  metric(c8, "traj_k0", ic.traj_k0.value);
  metric(c8, "traj_k0_se", ic.traj_k0.se);
  metric(c8, "traj_k1", ic.traj_k1.value);
  metric(c8, "traj_k1_se", ic.traj_k1.se);
  metric(c8, "k1_offset_measured", ic.k0_minus_k1.value);
  metric(c8, "k1_offset_predicted", ic.k1_offset_predicted);
  metric(c8, "k1_agrees", ic.k1_agrees() ? 1 : 0);
  if (!ic.k0_agrees()) fail(c8, "k = 0 trajectory side disagrees with the Green side");
  if (!ic.k1_offset_matches()) fail(c8, "k = 1 offset differs from (1 - delta) P_B(c)");
  if (ic.n_env < 200) fail(c8, "fewer than 200 environments");
  if (c8.pass) c8.note = "k = 0 form agrees; k = 1 form offset by (1 - delta) P_B(c) as predicted";

  // mu_delta against the Cesaro estimate.
  const auto ces = cesaro_invariant_estimate(field, m.box_sites, m.n_steps, m.burn_in, m.replicas, run_seed(m, 1));
  out.csv("cesaro_eps" + eps_tag(eps) + ".csv", ces);
  auto c9 = criterion(9);
  auto cmp = out.open("mu_delta_comparison.csv");
  cmp << "delta,config_id,mu_ratio,mu_stderr,cesaro_ratio,cesaro_stderr,diff,combined_stderr,agree,k0_ratio,"
         "fixed_k1_ratio,fixed_k0_ratio\n";
  for (std::size_t k = 0; k < m.delta_list.size(); ++k) {
    const double dl = m.delta_list[k];
    const auto mu = mu_delta_estimate(field, m.box_sites, dl, m.n_traj, run_seed(m, 2 + k));
    const std::string tag = "d" + eps_tag(dl);
    out.csv("mu_delta_" + tag + "_k1.csv", mu.from_k1);
    out.csv("mu_delta_" + tag + "_k0.csv", mu.from_k0);
    for (int c = 0; c < ces.size(); ++c) {
      const double diff = std::abs(mu.from_k1.ratio[c] - ces.ratio[c]);
      const double se = std::hypot(mu.from_k1.ratio_se[c], ces.ratio_se[c]);
      const bool ok = diff <= 4 * se;
      cmp << fmt17(dl) << "," << c << "," << fmt17(mu.from_k1.ratio[c]) << "," << fmt17(mu.from_k1.ratio_se[c]) << ","
          << fmt17(ces.ratio[c]) << "," << fmt17(ces.ratio_se[c]) << "," << fmt17(diff) << "," << fmt17(se) << ","
          << (ok ? 1 : 0) << "," << fmt17(mu.from_k0.ratio[c]) << "," << fmt17(mu.fixed_k1[c] / ces.p[c]) << ","
          << fmt17(mu.fixed_k0[c] / ces.p[c]) << "\n";
      metric(c9, tag + "_c" + std::to_string(c) + "_z", se > 0.0 ? diff / se : 0.0);
      if (!ok) fail(c9, tag + " configuration " + std::to_string(c) + " differs by " + fmt17(diff / se) + " SE");
    }
  }
  res.criteria.push_back(c7);
  res.criteria.push_back(c8);
  res.criteria.push_back(c9);
}

// -------------------------------------------------------------- kalikow-jdelta

void kalikow_recipe(const ExperimentManifest& m, RecipeResult& res) {
  Outputs out(m, res);
  const double eps = m.epsilon_list.front();
  const EnvironmentField field(m.kernel(), eps, m.law(), 0);
  KalikowSpec spec;
  spec.A = m.kalikow_A;
  spec.y = m.kalikow_y.front();
  spec.zs = m.kalikow_z;
  spec.deltas = m.delta_list;
  std::sort(spec.deltas.begin(), spec.deltas.end());
  spec.n_env = m.n_env;
  spec.tol = m.tol;
  const auto est = kalikow_j_delta(field, spec, m.master_seed());

  auto csv = out.open("kalikow.csv");
  csv << "delta";
  for (int a = 0; a < m.dimension; ++a) csv << ",z" << a + 1;
  csv << ",dir,J,stderr,limit,gap,below_floor,max_error_bound\n";
  for (const auto& k : est) {
    csv << fmt17(k.delta);
    for (int a = 0; a < m.dimension; ++a) csv << "," << k.z[a];
    csv << "," << k.dir << "," << fmt17(k.j.value) << "," << fmt17(k.j.se) << "," << fmt17(k.limit) << ","
        << fmt17(k.j.value - k.limit) << "," << k.below_floor << "," << fmt17(k.max_error_bound) << "\n";
  }
  auto c10 = criterion(10);
  // Group by (z, dir), ordered by delta.
  std::map<std::pair<std::string, int>, std::vector<const KalikowEstimate*>> groups;
  for (const auto& k : est) groups[{k.z.str(m.dimension), k.dir}].push_back(&k);
  int floors = 0;
  for (auto& [key, g] : groups) {
    std::sort(g.begin(), g.end(), [](auto a, auto b) { return a->delta < b->delta; });
    const std::string tag = "z" + key.first + "_dir" + std::to_string(key.second);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      const double a = std::abs(g[i]->j.value - g[i]->limit), b = std::abs(g[i + 1]->j.value - g[i + 1]->limit);
      const double slack = 4 * std::hypot(g[i]->j.se, g[i + 1]->j.se);
      if (b > a + slack) fail(c10, tag + ": gap grows from delta " + fmt17(g[i]->delta) + " to " + fmt17(g[i + 1]->delta));
    }
    const auto* last = g.back();
    const double gap = std::abs(last->j.value - last->limit);
    const double allow = std::max(4 * last->j.se, 10 * eps);
    metric(c10, tag + "_final_gap", gap);
    metric(c10, tag + "_first_gap", std::abs(g.front()->j.value - g.front()->limit));
    if (gap > allow) fail(c10, tag + ": final gap " + fmt17(gap) + " over " + fmt17(allow));
    for (const auto* k : g) floors += k->below_floor;
  }
  metric(c10, "below_floor", floors);
  res.criteria.push_back(c10);
}

// ----------------------------------------------------------- ballisticity-check

void ballisticity_recipe(const ExperimentManifest& m, RecipeResult& res) {
  Outputs out(m, res);
  std::array<double, kMaxDim> l{};
  for (std::size_t a = 0; a < m.direction.size(); ++a) l[a] = m.direction[a];
  const double eps = m.epsilon_list.front();
  const auto strong = polynomial_condition_check(EnvironmentField(m.kernel(), eps, m.law(), 0), l, m.L, m.M, m.n_traj,
                                                 run_seed(m, 0), m.step_cap);
  const auto flat = polynomial_condition_check(EnvironmentField(m.kernel(), 0.0, m.law(), 0), l, m.L, m.M, m.n_traj,
                                               run_seed(m, 1), m.step_cap);
  auto csv = out.open("ballisticity.csv");
  csv << "field,epsilon,L,M,n_traj,back_exits,capped,membership_violations,back_exit,stderr,threshold,c0_min,c0_max,"
         "L_reaches_c0_min,L_reaches_c0_max,M_large_enough\n";
  auto row = [&](const char* name, double e, const PolynomialCheck& p) {
    csv << name << "," << fmt17(e) << "," << p.L << "," << fmt17(p.M) << "," << p.n_traj << "," << p.back_exits << ","
        << p.capped << "," << p.membership_violations << "," << fmt17(p.back_exit.value) << ","
        << fmt17(p.back_exit.se) << "," << fmt17(p.threshold) << "," << fmt17(p.c0.as_min()) << ","
        << fmt17(p.c0.as_max()) << "," << p.L_reaches_c0_min << "," << p.L_reaches_c0_max << "," << p.M_large_enough
        << "\n";
  };
  row("drift", eps, strong);
  row("no-disorder", 0.0, flat);
  auto c11 = criterion(11);
  const double bound = 1.0 / (double(m.L) * m.L);
  metric(c11, "drift_back_exit", strong.back_exit.value);
  metric(c11, "drift_stderr", strong.back_exit.se);
  metric(c11, "bound", bound);
  metric(c11, "no_disorder_back_exit", flat.back_exit.value);
  metric(c11, "capped", double(strong.capped + flat.capped));
  if (!(strong.back_exit.value < bound)) fail(c11, "drift field back-exit " + fmt17(strong.back_exit.value) + " not below 1/L^2");
  if (!(flat.back_exit.value > 0.1)) fail(c11, "no-disorder back-exit " + fmt17(flat.back_exit.value) + " not above 0.1");
  if (strong.membership_violations + flat.membership_violations > 0) fail(c11, "exit site outside the box boundary");
  if (m.n_traj < 100000) fail(c11, "fewer than 1e5 trajectories");
  res.criteria.push_back(c11);
}

const std::map<std::string, std::function<void(const ExperimentManifest&, RecipeResult&)>>& recipes() {
  static const std::map<std::string, std::function<void(const ExperimentManifest&, RecipeResult&)>> r = {
      {"kernel-table", kernel_table_recipe},     {"corollary2-verify", corollary2_recipe},
      {"velocity-verify", velocity_recipe},      {"green-lemma-verify", lemma_recipe},
      {"mu-delta-vs-cesaro", mu_delta_recipe},   {"kalikow-jdelta", kalikow_recipe},
      {"ballisticity-check", ballisticity_recipe}};
  return r;
}

}  // namespace

const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names = {"kernel-table",       "corollary2-verify", "velocity-verify",
                                                 "green-lemma-verify", "mu-delta-vs-cesaro", "kalikow-jdelta",
                                                 "ballisticity-check"};
  return names;
}

TransitionKernel ExperimentManifest::kernel() const {
  if (p0.empty()) return TransitionKernel::symmetric(dimension);
  return TransitionKernel(dimension, std::span<const double>(p0));
}

PerturbationLaw ExperimentManifest::law() const {
  if (law_file.empty()) {
    if (dimension != 2) throw ManifestError("manifest: law_file is required when dimension != 2");
    return two_atom_law();
  }
  fs::path p(law_file);
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  const auto law = load_perturbation_law(p.string());
  if (law.dim() != dimension) throw ManifestError("manifest: law_file dimension differs from 'dimension'");
  return law;
}

std::string ExperimentManifest::to_json(bool with_out_dir) const {
  ojson j;
  j["recipe"] = recipe;
  j["artifact_version"] = artifact_version;
  j["dimension"] = dimension;
  const auto k = kernel();
  j["p0"] = std::vector<double>(k.probs().begin(), k.probs().end());
  j["epsilon_list"] = epsilon_list;
  j["target_epsilon"] = target_epsilon;
  j["law_file"] = law_file;
  j["delta_list"] = delta_list;
  j["box_sites"] = sites_json(box_sites, dimension);
  j["n_steps"] = n_steps;
  j["burn_in"] = burn_in;
  j["replicas"] = replicas;
  j["n_traj"] = n_traj;
  j["n_env"] = n_env;
  j["n_instances"] = n_instances;
  j["radius"] = radius;
  j["methods"] = methods;
  j["truncated_steps"] = truncated_steps;
  j["quad_coarse"] = quad_coarse;
  j["quad_fine"] = quad_fine;
  j["tol"] = tol;
  j["identity_delta"] = identity_delta;
  j["identity_n_env"] = identity_n_env;
  j["identity_n_traj"] = identity_n_traj;
  j["identity_config"] = identity_config;
  j["kalikow_A"] = sites_json(kalikow_A, dimension);
  j["kalikow_y"] = sites_json(kalikow_y, dimension);
  j["kalikow_z"] = sites_json(kalikow_z, dimension);
  j["direction"] = direction;
  j["L"] = L;
  j["M"] = M;
  j["step_cap"] = step_cap;
  j["max_sites"] = max_sites;
  j["site_radius"] = site_radius;
  j["max_perturbation"] = max_perturbation;
  j["window_radius"] = window_radius;
  j["max_walk_steps"] = max_walk_steps;
  j["seeds"] = seeds;
  if (with_out_dir) j["out_dir"] = out_dir;
  return j.dump(2);
}

ExperimentManifest default_manifest(const std::string& recipe) {
  ExperimentManifest m;
  m.recipe = recipe;
  m.out_dir = "out/" + recipe;
  m.box_sites = {Site{0, 1}};
  m.direction = {1.0, 0.0};
  m.kalikow_A = {Site{0, 0}, Site{1, 0}};
  m.kalikow_y = {Site{0, 0}};
  m.kalikow_z = {Site{0, 0}, Site{1, 0}};
  m.methods = {"recursion-2d", "fourier", "truncated-sum"};
  m.epsilon_list = {0.1};
  m.delta_list = {0.9};
  if (recipe == "kernel-table") {
    m.epsilon_list = {0.0};
  } else if (recipe == "corollary2-verify") {
    m.epsilon_list = {0.04, 0.08, 0.16};
    m.target_epsilon = 0.08;
    m.box_sites = {Site{0, 0}, Site{0, 1}};
    m.n_steps = 25'000'000;
    m.replicas = 20;
  } else if (recipe == "velocity-verify") {
    m.epsilon_list = {0.05, 0.1};
    m.n_steps = 1'000'000;
    m.replicas = 40;
  } else if (recipe == "green-lemma-verify") {
    m.n_instances = 100;
  } else if (recipe == "mu-delta-vs-cesaro") {
    m.delta_list = {0.99};
    m.n_traj = 200'000;
    m.n_steps = 1'000'000;
    m.replicas = 20;
    m.identity_delta = 0.9;
    m.identity_n_env = 200;
    m.identity_n_traj = 1'000'000;
  } else if (recipe == "kalikow-jdelta") {
    m.delta_list = {0.9, 0.95, 0.99};
    m.n_env = 100;
    m.tol = 1e-4;
  } else if (recipe == "ballisticity-check") {
    m.n_traj = 100'000;
  }
  return m;
}

ExperimentManifest parse_manifest(const std::string& text, const std::string& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError(std::string("manifest: ") + e.what());
  }
  if (!j.is_object()) throw ManifestError("manifest: expected a JSON object");
  if (!j.contains("recipe") || !j["recipe"].is_string()) throw ManifestError("manifest: 'recipe' (string) is required");
  const std::string recipe = j["recipe"].get<std::string>();
  const auto& names = recipe_names();
  if (std::find(names.begin(), names.end(), recipe) == names.end()) {
    throw ManifestError("manifest: unknown recipe '" + recipe + "'");
  }
  auto m = default_manifest(recipe);
  for (const auto& [key, value] : j.items()) {
    if (key.empty() || key.front() == '_') continue;  // comment keys
    set_key(m, key, value);
  }
  m.base_dir = base_dir;
  validate(m);
  return m;
}

ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), fs::path(path).parent_path().string());
}

void apply_override(ExperimentManifest& m, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ManifestError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  if (key == "recipe") throw ManifestError("the recipe cannot be overridden");
  nlohmann::json v;
  try {
    v = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    v = raw;
  }
  set_key(m, key, v);
  validate(m);
}

void validate(const ExperimentManifest& m) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ManifestError("manifest: " + msg);
  };
  const int d = m.dimension;
  need(d >= 1 && d <= kMaxDim, "'dimension' must lie in 1.." + std::to_string(kMaxDim));
  need(m.p0.empty() || m.p0.size() == static_cast<std::size_t>(2 * d), "'p0' needs 2 * dimension entries");
  if (!m.p0.empty()) {
    double s = 0.0;
    for (double x : m.p0) {
      need(x > 0.0, "'p0' entries must be positive");
      s += x;
    }
    need(std::abs(s - 1.0) <= 1e-12, "'p0' must sum to 1");
  }
  need(!m.epsilon_list.empty(), "'epsilon_list' must not be empty");
  const double pmin = m.kernel().min_prob();
  for (double e : m.epsilon_list) need(e >= 0.0 && e < pmin, "epsilon values must lie in [0, min p0)");
  need(!m.delta_list.empty(), "'delta_list' must not be empty");
  for (double x : m.delta_list) need(x > 0.0 && x < 1.0, "delta values must lie in (0, 1)");
  need(m.identity_delta > 0.0 && m.identity_delta < 1.0, "'identity_delta' must lie in (0, 1)");
  need(!m.seeds.empty(), "'seeds' must not be empty");
  need(!m.box_sites.empty(), "'box_sites' must not be empty");
  need(m.kalikow_y.size() == 1, "'kalikow_y' must hold exactly one site");
  need(!m.kalikow_A.empty() && !m.kalikow_z.empty(), "'kalikow_A' and 'kalikow_z' must not be empty");
  need(m.direction.size() == static_cast<std::size_t>(d), "'direction' needs dimension entries");
  for (const auto* sites : {&m.box_sites, &m.kalikow_A, &m.kalikow_y, &m.kalikow_z}) {
    for (const auto& s : *sites) {
      for (int a = d; a < kMaxDim; ++a) need(s[a] == 0, "site coordinates beyond 'dimension'");
    }
  }
  need(m.radius >= 1, "'radius' must be >= 1");
  need(!m.methods.empty(), "'methods' must not be empty");
  for (const auto& name : m.methods) {
    try {
      kernel_method_from_string(name);
    } catch (const std::invalid_argument& e) {
      throw ManifestError(std::string("manifest: ") + e.what());
    }
  }
  need(m.truncated_steps >= 10, "'truncated_steps' must be >= 10");
  need(m.quad_coarse >= 0 && m.quad_fine >= 0, "quadrature grids must be >= 0");
  need(m.tol > 0.0, "'tol' must be positive");
  need(m.L >= 1 && m.M > 0.0 && m.step_cap >= 1, "'L', 'M', 'step_cap' must be positive");
  need(m.max_walk_steps > 0.0, "'max_walk_steps' must be positive");
  need(!m.out_dir.empty(), "'out_dir' must not be empty");
  const std::string& r = m.recipe;
  if (r == "corollary2-verify" || r == "velocity-verify" || r == "mu-delta-vs-cesaro") {
    need(m.replicas >= 2, "'replicas' must be >= 2");
    need(m.n_steps > std::max<std::int64_t>(m.burn_in, 0), "'n_steps' must exceed 'burn_in'");
  }
  if (r == "mu-delta-vs-cesaro") {
    need(m.n_traj >= 2 && m.identity_n_env >= 2 && m.identity_n_traj >= 2, "trajectory and environment counts must be >= 2");
  }
  if (r == "green-lemma-verify") need(m.n_instances >= 1, "'n_instances' must be >= 1");
  if (r == "kalikow-jdelta") need(m.n_env >= 2, "'n_env' must be >= 2");
  if (r == "ballisticity-check") need(m.n_traj >= 1, "'n_traj' must be >= 1");
}

bool RecipeResult::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.pass; });
}

std::string RecipeResult::summary_json() const {
  ojson j;
  j["recipe"] = recipe;
  j["pass"] = passed();
  ojson cs = ojson::object();
  for (const auto& c : criteria) {
    ojson e;
    e["pass"] = c.pass;
    e["note"] = c.note;
    ojson mt = ojson::object();
    for (const auto& [k, v] : c.metrics) mt[k] = std::isfinite(v) ? ojson(v) : ojson(fmt17(v));
    e["metrics"] = mt;
    cs[std::to_string(c.id)] = e;
  }
  j["criteria"] = cs;
  j["files"] = files;
  return j.dump(2);
}

RecipeResult run_recipe(const ExperimentManifest& m) {
  validate(m);
  RecipeResult r;
  r.recipe = m.recipe;
  recipes().at(m.recipe)(m, r);
  Outputs out(m, r);
  out.text("manifest.json", m.to_json(false));
  out.text("law.json", m.law().to_json());
  r.files.push_back("summary.json");
  std::ofstream(fs::path(m.out_dir) / "summary.json", std::ios::binary) << r.summary_json() << "\n";
  return r;
}

ScalingReport residual_scaling_report(const std::vector<double>& epsilon, const std::vector<double>& measured,
                                      const std::vector<double>& predicted, const std::vector<double>& se,
                                      double noise_sigmas) {
  const std::size_t n = epsilon.size();
  if (measured.size() != n || predicted.size() != n || se.size() != n) {
    throw std::invalid_argument("residual scaling: input lengths differ");
  }
  if (n < 3) throw std::invalid_argument("residual scaling: needs at least three epsilon values");
  const auto [lo, hi] = std::minmax_element(epsilon.begin(), epsilon.end());
  if (!(*lo > 0.0) || *hi < 4.0 * *lo) throw std::invalid_argument("residual scaling: epsilons must span at least 4x");
  ScalingReport rep;
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < n; ++i) {
    ScalingPoint p;
    p.epsilon = epsilon[i];
    p.residual = std::abs(measured[i] - predicted[i]);
    p.se = se[i];
    p.resolved = p.residual > noise_sigmas * p.se && p.residual > 0.0;
    rep.points.push_back(p);
    if (p.resolved) {
      x.push_back(std::log(p.epsilon));
      y.push_back(std::log(p.residual));
      // Var(log r) ~ (se / r)^2.
      w.push_back(p.se > 0.0 ? (p.residual / p.se) * (p.residual / p.se) : 0.0);
    }
  }
  const bool weighted = !w.empty() && std::all_of(w.begin(), w.end(), [](double v) { return v > 0.0; });
  if (x.size() >= 2) {
    const auto [a, b] = std::minmax_element(x.begin(), x.end());
    if (*b - *a >= std::log(2.0) - 1e-12) {
      const auto fit = weighted ? least_squares(x, y, w) : least_squares(x, y);
      rep.noise_limited = false;
      rep.slope = fit.slope;
      rep.slope_se = fit.slope_se;
      rep.intercept = fit.intercept;
    }
  }
  return rep;
}

void ScalingReport::write_csv(std::ostream& out) const {
  out << "epsilon,residual,stderr,lower,upper,resolved,fit\n";
  for (const auto& p : points) {
    out << fmt17(p.epsilon) << "," << fmt17(p.residual) << "," << fmt17(p.se) << ","
        << fmt17(std::max(0.0, p.residual - 2 * p.se)) << "," << fmt17(p.residual + 2 * p.se) << ","
        << (p.resolved ? 1 : 0) << ",";
    if (!noise_limited) out << fmt17(std::exp(intercept + slope * std::log(p.epsilon)));
    out << "\n";
  }
}

}  // namespace rwre
