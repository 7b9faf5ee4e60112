#include "molbat/scenarios.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "molbat/battery.hpp"
#include "molbat/davies.hpp"
#include "molbat/exciton.hpp"
#include "molbat/parallel.hpp"
#include "molbat/rwc.hpp"
#include "molbat/thermo.hpp"

namespace molbat {

namespace {

// Collects named pass/fail checks for --verify.
struct Checks {
  bool enabled = false;
  std::vector<std::string> failed;
  std::vector<Field>* diag = nullptr;

  void check(const std::string& name, double measured, bool pass) {
    if (!enabled) return;
    diag->push_back({"check." + name, measured});
    if (!pass) failed.push_back(name);
  }
};

double electronic_excited_population(const ComplexMatrix& rho, Index levels) {
  return rho.diagonal().tail(levels).real().sum();
}

double energy(const ComplexMatrix& rho, const HermitianOperator& h) { return (rho * h.matrix()).trace().real(); }

double min_eigenvalue(const ComplexMatrix& m) {
  const Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Worst relative deviation of G(-w)/G(w) from the declared law over the given
// frequencies; points where either side underflows are skipped. Returns the
// number of frequencies actually compared through `used`.
double kms_deviation(const CouplingSpectrum& g, const std::vector<double>& omegas, int& used) {
  used = 0;
  double worst = 0.0;
  for (double w : omegas) {
    const double up = g(w), down = g(-w);
    const double expect = g.balance_ratio(w);
    if (!(up > 1e-280) || !(down > 1e-280) || !std::isfinite(expect) || !(expect > 0.0)) continue;
    worst = std::max(worst, std::abs(down / up - expect) / expect);
    ++used;
  }
  return worst;
}

void battery_inputs(const BatteryParams& p, std::vector<Field>& in) {
  in.push_back({"omega0", p.omega0});
  in.push_back({"xi0", p.xi0});
  in.push_back({"E_el", p.E_el});
  in.push_back({"T", p.T});
  in.push_back({"delta_mu", p.delta_mu});
  in.push_back({"N", static_cast<double>(p.N)});
  in.push_back({"gamma", p.gamma});
  in.push_back({"G1_at_0", p.G1_at_0});
  in.push_back({"G2_at_0", p.G2_at_0});
  in.push_back({"gamma_ex", p.gamma_ex});
}

void truncation_diagnostics(const BatteryParams& p, std::vector<Field>& diag) {
  const TruncationReport t = truncation_tail(p);
  diag.push_back({"tail_ground", t.tail_ground});
  diag.push_back({"tail_excited", t.tail_excited});
}

// Charging-side checks shared by battery-steady and battery-evolve.
void charging_checks(const ScenarioConfig& cfg, const BatteryParams& p, const BatteryGenerator& bg,
                     const ExcitonicSpectrum& ex, std::mt19937_64& rng, Checks& checks) {
  if (!checks.enabled) return;
  double gibbs_res = 0.0;
  for (int branch : {0, 1})
    gibbs_res = std::max(gibbs_res, trace_norm(bg.thermal_rc.apply(conditioned_gibbs(p, branch).matrix())));
  checks.check("thermal_rc_gibbs_residual", gibbs_res, gibbs_res <= 1e-10);
  std::normal_distribution<double> jitter(0.0, ex.eta);
  std::uniform_int_distribution<int> side(0, static_cast<int>(ex.E_a.size()) - 1);
  std::vector<double> omegas;
  for (int i = 0; i < 5; ++i) omegas.push_back(ex.E_a[static_cast<std::size_t>(side(rng))] - ex.E_b[0] + jitter(rng));
  int used = 0;
  const double dev = kms_deviation(CouplingSpectrum(ex), omegas, used);
  checks.check("exciton_kms_ratio", dev, used > 0 && dev <= cfg.tolerances.kms_ratio);
}

void battery_steady(const ScenarioConfig& cfg, const PointConfig& pc, ResultRecord& rec, Checks& checks,
                    std::mt19937_64& rng) {
  const BatteryParams& p = pc.battery;
  battery_inputs(p, rec.inputs);
  const ExcitonicSpectrum ex = resonant_exciton_spectrum(p, pc.charging.sidebands, pc.charging.eta);
  const BatteryGenerator bg = charging_model(p, CouplingSpectrum(ex));
  const StationaryReport st = solve_stationary(bg.total());
  const DensityMatrix rho = DensityMatrix::from_numerical(st.rho);
  const DensityMatrix closed = stationary_closed_form(p);
  const HermitianOperator h = battery_hamiltonian(p);
  const ErgotropyReport er = bound_ergotropy(rho, h);
  const BatteryBoundWork bw = battery_bound_work_closed_form(p);
  const double td = trace_distance(rho.matrix(), closed.matrix());

  auto& out = rec.outputs;
  out.push_back({"trace_distance_closed_form", td});
  out.push_back({"charged_fraction", electronic_excited_population(rho.matrix(), p.N)});
  out.push_back({"charged_fraction_closed_form", charged_fraction(p)});
  out.push_back({"energy", energy(rho.matrix(), h)});
  out.push_back({"entropy", von_neumann_entropy(rho)});
  out.push_back({"entropy_closed_form", battery_entropy_closed_form(p, BatteryEntropy::Stationary)});
  out.push_back({"ergotropy", er.W_max});
  out.push_back({"bound_ergotropy", er.W_bar_max});
  out.push_back({"beta_bar", er.beta_bar});
  out.push_back({"bound_ergotropy_closed_form", bw.W_bar_max});
  auto& diag = rec.diagnostics;
  truncation_diagnostics(p, diag);
  diag.push_back({"stationary_residual", st.residual});
  diag.push_back({"kernel_dim", static_cast<double>(st.kernel_dim)});
  diag.push_back({"solved_dim", static_cast<double>(st.solved_dim)});
  diag.push_back({"decoherence_rate", bg.decoherence_rate});

  checks.check("stationary_trace_distance", td, td <= cfg.tolerances.stationary_trace_distance);
  checks.check("stationary_min_eigenvalue", min_eigenvalue(st.rho), min_eigenvalue(st.rho) >= -1e-10);
  checks.check("bound_dominates", er.W_bar_max - er.W_max, er.W_bar_max >= er.W_max - cfg.tolerances.bound_slack);
  charging_checks(cfg, p, bg, ex, rng, checks);
}

void battery_evolve(const ScenarioConfig& cfg, const PointConfig& pc, ResultRecord& rec, Checks& checks,
                    std::mt19937_64& rng) {
  const BatteryParams& p = pc.battery;
  battery_inputs(p, rec.inputs);
  rec.inputs.push_back({"initial", pc.evolve.initial == BatteryInitial::Empty ? "empty" : "charged"});
  const ExcitonicSpectrum ex = resonant_exciton_spectrum(p, pc.charging.sidebands, pc.charging.eta);
  const BatteryGenerator bg = charging_model(p, CouplingSpectrum(ex));
  const DensityMatrix rho0 = conditioned_gibbs(p, pc.evolve.initial == BatteryInitial::Empty ? 0 : 1);
  const std::vector<DensityMatrix> states = propagate_sector(bg.total(), rho0, pc.evolve.times);
  const DensityMatrix closed = stationary_closed_form(p);
  const HermitianOperator h = battery_hamiltonian(p);

  std::vector<double> charged, en, erg, dist;
  double worst_eig = 0.0;
  for (const auto& s : states) {
    charged.push_back(electronic_excited_population(s.matrix(), p.N));
    en.push_back(energy(s.matrix(), h));
    erg.push_back(ergotropy(s, h));
    dist.push_back(trace_distance(s.matrix(), closed.matrix()));
    worst_eig = std::min(worst_eig, min_eigenvalue(s.matrix()));
  }
  auto& out = rec.outputs;
  out.push_back({"time", pc.evolve.times});
  out.push_back({"charged_fraction", charged});
  out.push_back({"energy", en});
  out.push_back({"ergotropy", erg});
  out.push_back({"distance_to_stationary", dist});
  truncation_diagnostics(p, rec.diagnostics);
  rec.diagnostics.push_back({"min_state_eigenvalue", worst_eig});

  checks.check("state_positivity", worst_eig, worst_eig >= -1e-10);
  charging_checks(cfg, p, bg, ex, rng, checks);
}

void discharge_rate_scenario(const ScenarioConfig& cfg, const PointConfig& pc, ResultRecord& rec, Checks& checks,
                             std::mt19937_64& rng) {
  const BatteryParams& p = pc.battery;
  battery_inputs(p, rec.inputs);
  rec.inputs.push_back({"spectrum", pc.discharge_spectrum->describe()});
  const CouplingSpectrum& g = *pc.discharge_spectrum;
  const DischargeRates r = discharge_rate(p, g);
  const double completeness = sideband_completeness(p);
  auto& out = rec.outputs;
  out.push_back({"huang_rhys", p.huang_rhys()});
  out.push_back({"rate_direct", r.direct});
  out.push_back({"rate_closed_form", r.closed_form});
  out.push_back({"rate_poisson", r.poisson});
  out.push_back({"rate_asymptotic", r.asymptotic});
  truncation_diagnostics(p, rec.diagnostics);
  rec.diagnostics.push_back({"sideband_completeness", completeness});
  rec.diagnostics.push_back({"decoherence_rate", p.decoherence_rate()});

  const double diff = std::abs(r.direct - r.closed_form);
  checks.check("direct_vs_closed_form", diff, diff <= cfg.tolerances.rate_agreement);
  checks.check("sideband_completeness", std::abs(1.0 - completeness), std::abs(1.0 - completeness) <= 1e-8);
  if (checks.enabled && g.law() != BalanceLaw::None) {
    std::uniform_real_distribution<double> w(0.05 * p.E_el, 2.0 * p.E_el);
    std::vector<double> omegas;
    for (int i = 0; i < 5; ++i) omegas.push_back(w(rng));
    int used = 0;
    const double dev = kms_deviation(g, omegas, used);
    checks.check("spectrum_kms_ratio", dev, used > 0 && dev <= cfg.tolerances.kms_ratio);
  }
}

void ergotropy_scenario(const ScenarioConfig& cfg, const PointConfig& pc, ResultRecord& rec, Checks& checks) {
  const BatteryParams& p = pc.battery;
  battery_inputs(p, rec.inputs);
  const DensityMatrix rho = stationary_closed_form(p);
  const HermitianOperator h = battery_hamiltonian(p);
  const ErgotropyReport er = bound_ergotropy(rho, h);
  const BatteryBoundWork bw = battery_bound_work_closed_form(p);
  const double s_closed = battery_entropy_closed_form(p, BatteryEntropy::Stationary);
  const double step = p.delta_mu > p.E_el ? p.E_el : 0.0;
  auto& out = rec.outputs;
  out.push_back({"ergotropy", er.W_max});
  out.push_back({"bound_ergotropy", er.W_bar_max});
  out.push_back({"beta_bar", er.beta_bar});
  out.push_back({"entropy", er.S_state});
  out.push_back({"entropy_closed_form", s_closed});
  out.push_back({"bound_ergotropy_closed_form", bw.W_bar_max});
  out.push_back({"beta_bar_closed_form", bw.beta_bar});
  out.push_back({"zero_T_step", step});
  truncation_diagnostics(p, rec.diagnostics);
  rec.diagnostics.push_back({"entropy_match", std::abs(er.S_state - er.S_gibbs)});

  checks.check("bound_dominates", er.W_bar_max - er.W_max, er.W_bar_max >= er.W_max - cfg.tolerances.bound_slack);
  checks.check("entropy_closed_form", std::abs(er.S_state - s_closed), std::abs(er.S_state - s_closed) <= 1e-8);
  checks.check("bound_closed_form", std::abs(er.W_bar_max - bw.W_bar_max), std::abs(er.W_bar_max - bw.W_bar_max) <= 1e-6);
}

void exciton_scenario(const ScenarioConfig& cfg, const PointConfig& pc, ResultRecord& rec, Checks& checks,
                      std::mt19937_64& rng, int threads) {
  const ExcitonSettings& s = *pc.exciton;
  const ExcitonFactoryParams& p = s.params;
  rec.inputs.push_back({"n_a", static_cast<double>(p.n_a())});
  rec.inputs.push_back({"n_b", static_cast<double>(p.n_b())});
  rec.inputs.push_back({"electrons", static_cast<double>(p.electron_count())});
  rec.inputs.push_back({"T", p.T});
  rec.inputs.push_back({"hot_T_at_gap", p.hot_T(p.gap())});
  rec.inputs.push_back({"delta_g", p.delta_g});
  rec.inputs.push_back({"gap", p.gap()});

  const DeltaMuOptimum opt = optimal_delta_mu(p, s.delta_mu_grid, threads);
  const GrandCanonicalAnsatz ans{opt.mu_b + opt.delta_mu, opt.mu_b, p.T};
  const InterbandResidual res = interband_residual(ans, p);
  auto& out = rec.outputs;
  out.push_back({"delta_mu", opt.delta_mu});
  out.push_back({"mu_b", opt.mu_b});
  out.push_back({"residual", opt.residual});
  out.push_back({"residual_bound", res.bound});
  out.push_back({"effective_gap", opt.effective_gap});
  out.push_back({"delta_mu_predicted", opt.predicted});
  out.push_back({"prediction_error", std::abs(opt.delta_mu - opt.predicted)});
  if (s.fit_exact_state) {
    const DensityMatrix rho = factory_stationary_state(p);
    const FermiDiracFit fit = fit_fermi_dirac(p, mode_filling(rho, p.n_modes()));
    out.push_back({"exact_fit_mu_a", fit.mu_a});
    out.push_back({"exact_fit_mu_b", fit.mu_b});
    out.push_back({"exact_fit_T", fit.T});
    out.push_back({"exact_fit_delta_mu", fit.mu_a - fit.mu_b});
    rec.diagnostics.push_back({"exact_fit_residual", fit.residual});
    checks.check("exact_state_min_eigenvalue", min_eigenvalue(rho.matrix()), min_eigenvalue(rho.matrix()) >= -1e-10);
  }
  if (checks.enabled) {
    double worst = std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> dmu(s.delta_mu_grid.front(), s.delta_mu_grid.back());
    std::vector<double> probes{opt.delta_mu};
    for (int i = 0; i < 5; ++i) probes.push_back(dmu(rng));
    for (double d : probes) {
      const double mu_b = fix_mu_b(p, d);
      const InterbandResidual r = interband_residual({mu_b + d, mu_b, p.T}, p);
      worst = std::min(worst, r.bound - r.exact);
    }
    checks.check("residual_bound_slack", worst, worst >= -cfg.tolerances.bound_slack);
  }
}

DensityMatrix rwc_initial(const RwcSettings& s) {
  const Index d = s.hamiltonian.rows();
  const EigenSystem es = herm_eig(s.hamiltonian);
  switch (s.initial) {
    case RwcInitial::Ground: return DensityMatrix(es.vectors.col(0) * es.vectors.col(0).adjoint());
    case RwcInitial::Excited: return DensityMatrix(es.vectors.col(d - 1) * es.vectors.col(d - 1).adjoint());
    case RwcInitial::Mixed: return DensityMatrix(ComplexMatrix::Identity(d, d) / static_cast<double>(d));
    case RwcInitial::Superposition: {
      const ComplexVector v = es.vectors.rowwise().sum() / std::sqrt(static_cast<double>(d));
      return DensityMatrix::from_numerical(v * v.adjoint());
    }
  }
  throw ContractViolation("rwc: unknown initial state");
}

void rwc_scenario(const ScenarioConfig& cfg, const PointConfig& pc, ResultRecord& rec, Checks& checks,
                  std::mt19937_64& rng, int threads) {
  const RwcSettings& s = *pc.rwc;
  const HermitianOperator h(s.hamiltonian);
  const BathCorrelation& f = *s.correlation;
  const Index d = h.dim();
  rec.inputs.push_back({"dim", static_cast<double>(d)});
  rec.inputs.push_back({"lambda", s.lambda});
  rec.inputs.push_back({"with_lamb", s.with_lamb ? 1.0 : 0.0});
  const DensityMatrix rho0 = rwc_initial(s);
  const SuperOperatorMatrix L = rwc_davies_limit(h, s.coupling, f);
  const double l2 = s.lambda * s.lambda;
  const std::size_t n = s.times.size();
  std::vector<double> dist(n), gen_dist(n), choi(n), tp(n), herm(n), koss(n);
  std::vector<ComplexMatrix> probes;
  for (std::size_t i = 0; i < n; ++i) {
    ComplexMatrix x = ComplexMatrix::Zero(d, d);
    std::normal_distribution<double> nd;
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) x(a, b) = cplx(nd(rng), nd(rng));
    probes.push_back(x + x.adjoint());
  }
  parallel_for(n, threads, [&](std::size_t i) {
    const double t = s.times[i];
    const CumulantK2 k2 = cumulant_k2(h, s.coupling, f, t);
    const SuperOperatorMatrix k = k2.superop(s.with_lamb);
    const RwcMap m = rwc_map(s.lambda, k, cfg.tolerances.cptp);
    const ComplexMatrix a = m.map.apply(rho0.matrix());
    const ComplexMatrix b = expm(L, l2 * t).apply(rho0.matrix());
    dist[i] = trace_distance(a, b);
    if (t > 0.0) {
      const ComplexMatrix diff = l2 * k2.dissipative.matrix / t - l2 * L.matrix;
      gen_dist[i] = diff.jacobiSvd().singularValues()(0);
    } else {
      gen_dist[i] = std::numeric_limits<double>::quiet_NaN();
    }
    choi[i] = m.cptp.min_choi_eigenvalue;
    tp[i] = m.cptp.trace_preservation_error;
    const ComplexMatrix out = k.apply(probes[i]);
    herm[i] = (out - out.adjoint()).cwiseAbs().maxCoeff();
    const ComplexMatrix kh = 0.5 * (k2.kossakowski + k2.kossakowski.adjoint());
    const double scale = std::max(kh.cwiseAbs().maxCoeff(), 1e-300);
    koss[i] = min_eigenvalue(kh) / scale;
  });
  auto& out = rec.outputs;
  out.push_back({"time", s.times});
  out.push_back({"trace_distance_to_davies", dist});
  out.push_back({"generator_distance", gen_dist});
  auto& diag = rec.diagnostics;
  diag.push_back({"min_choi_eigenvalue", choi});
  diag.push_back({"trace_preservation_error", tp});

  if (checks.enabled) {
    double c = 0.0, t = 0.0, hm = 0.0, kp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      c = std::min(c, choi[i]);
      t = std::max(t, tp[i]);
      hm = std::max(hm, herm[i]);
      kp = std::min(kp, koss[i]);
    }
    checks.check("cptp_min_choi_eigenvalue", c, c >= -cfg.tolerances.cptp);
    checks.check("trace_preservation", t, t <= 1e-10);
    checks.check("hermiticity_preservation", hm, hm <= 1e-10);
    checks.check("kossakowski_psd", kp, kp >= -1e-10);
  }
}

std::string failure(const char* kind, const std::string& msg) { return std::string(kind) + ": " + msg; }

}  // namespace

ResultRecord run_point(const ScenarioConfig& cfg, std::size_t index, const RunOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const PointConfig& pc = cfg.points.at(index);
  ResultRecord rec;
  rec.scenario = scenario_name(cfg.kind);
  rec.id = cfg.name + "/" + std::to_string(index);
  rec.sweep_index = index;
  rec.config_hash = cfg.hash;
  for (const auto& [k, v] : pc.swept) rec.inputs.push_back({"sweep." + k, v});

  Checks checks;
  checks.enabled = opt.verify;
  checks.diag = &rec.diagnostics;
  // Per-point stream so results do not depend on scheduling.
  std::mt19937_64 rng(cfg.seed * 1000003ULL + index);
  const int inner = cfg.points.size() == 1 ? opt.threads : 1;
  try {
    switch (cfg.kind) {
      case ScenarioKind::BatterySteady: battery_steady(cfg, pc, rec, checks, rng); break;
      case ScenarioKind::BatteryEvolve: battery_evolve(cfg, pc, rec, checks, rng); break;
      case ScenarioKind::DischargeRate: discharge_rate_scenario(cfg, pc, rec, checks, rng); break;
      case ScenarioKind::Ergotropy: ergotropy_scenario(cfg, pc, rec, checks); break;
      case ScenarioKind::ExcitonFactory: exciton_scenario(cfg, pc, rec, checks, rng, inner); break;
      case ScenarioKind::RwcCompare: rwc_scenario(cfg, pc, rec, checks, rng, inner); break;
    }
    if (!checks.failed.empty()) {
      std::string names;
      for (const auto& n : checks.failed) names += (names.empty() ? "" : "; ") + n;
      rec.status = failure(kStatusVerify, names);
    }
  } catch (const InvariantViolation& e) {
    rec.status = failure(kStatusInvariant, e.what());
  } catch (const NumericalFailure& e) {
    rec.status = failure(kStatusNumerical, e.what());
  } catch (const Error& e) {
    rec.status = failure(kStatusError, e.what());
  }
  if (!rec.ok()) rec.outputs.clear();
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<ResultRecord> run_scenario(const ScenarioConfig& cfg, const RunOptions& opt) {
  std::vector<ResultRecord> out(cfg.points.size());
  parallel_for(cfg.points.size(), cfg.points.size() > 1 ? opt.threads : 1,
               [&](std::size_t i) { out[i] = run_point(cfg, i, opt); });
  return out;
}

}  // namespace molbat
