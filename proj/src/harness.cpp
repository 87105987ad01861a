#include "exclab/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "exclab/conditioning.hpp"
#include "exclab/errors.hpp"
#include "exclab/io.hpp"
#include "exclab/parallel.hpp"
#include "exclab/pivotal.hpp"
#include "exclab/sampler.hpp"
#include "exclab/stats.hpp"

namespace exclab {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kZ95 = 1.959963984540054;

const std::set<std::string>& known_suites() {
  static const std::set<std::string> s{"sample", "functional", "lln",
                                       "var",    "clt",        "asclt",
                                       "qclt-rate", "arm",     "sigma2",
                                       "volume", "quasi"};
  return s;
}

void add_row(CsvTable& t, double scale, const std::string& stat, double v,
             double lo, double hi) {
  t.rows.push_back({format_num(scale), stat, format_num(v), format_num(lo),
                    format_num(hi)});
}
void add_row(CsvTable& t, double scale, const std::string& stat, double v) {
  add_row(t, scale, stat, v, v, v);
}

struct SuiteOut {
  CsvTable csv;
  nlohmann::json results = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::string svg;  // empty if no plot
};

template <class T>
T field_or(const nlohmann::json& j, const std::string& key, const T& dflt) {
  if (!j.contains(key)) return dflt;
  return j.at(key).get<T>();
}

CovarianceModel model_from(const nlohmann::json& cfg) {
  if (!cfg.contains("model")) throw ConfigInvalid("config needs a model");
  return CovarianceModel::from_json(cfg.at("model"));
}

FunctionalSpec spec_from(const nlohmann::json& cfg) {
  if (!cfg.contains("functional")) return FunctionalSpec{};
  return functional_from_json(cfg.at("functional"));
}

// ---- suites ---------------------------------------------------------------

SuiteOut suite_sample(const nlohmann::json& cfg, uint64_t seed, int workers,
                      const std::string& out_dir) {
  const CovarianceModel model = model_from(cfg);
  const nlohmann::json g = field_or(cfg, "grid", nlohmann::json::object());
  GridSpec grid{model.d, field_or(g, "R", 16.0), field_or(g, "h", 0.25),
                field_or(g, "b", 0.0)};
  grid.validate();
  const int N = field_or(cfg, "replicates", 200);
  const CirculantSampler sampler(model, grid);

  SuiteOut out;
  if (sampler.clipped_mass() > 0)
    out.warnings.push_back("embedding eigenvalues clipped, relative mass " +
                           format_num(sampler.clipped_mass()));

  dump_field(sampler.sample(seed, 0), out_dir + "/field.bin");

  // empirical covariance at unit lags along axis 0
  const int per_unit = int(std::llround(1.0 / grid.h));
  if (std::abs(per_unit * grid.h - 1.0) > 1e-9)
    throw ConfigInvalid("sample suite needs 1/h integer for unit lags");
  const std::vector<int> lags{0, 1, 2};
  std::vector<std::vector<double>> khat(lags.size(),
                                        std::vector<double>(size_t(N), 0.0));
  const int n = grid.n();
  parallel_for(N, workers, [&](int64_t rep) {
    const FieldSample fs = sampler.sample(seed, uint64_t(rep));
    for (size_t li = 0; li < lags.size(); ++li) {
      const int off = lags[li] * per_unit;
      double acc = 0;
      int64_t cnt = 0;
      Box all;
      for (int a = 0; a < grid.d; ++a) {
        all.lo[a] = 0;
        all.hi[a] = n - 1;
      }
      all.hi[0] = n - 1 - off;
      for_each_node(grid, all, [&](const std::array<int, 3>& idx) {
        auto jdx = idx;
        jdx[0] += off;
        acc += fs.at(idx) * fs.at(jdx);
        ++cnt;
      });
      khat[li][size_t(rep)] = acc / double(cnt);
    }
  });

  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  for (size_t li = 0; li < lags.size(); ++li) {
    const Ci ci = mean_ci(khat[li]);
    add_row(out.csv, double(lags[li]), "cov", sample_mean(khat[li]), ci.lo,
            ci.hi);
  }
  out.results["lags"] = lags;
  return out;
}

SuiteOut suite_functional(const nlohmann::json& cfg, uint64_t seed,
                          int workers, const std::string& out_dir) {
  const CovarianceModel model = model_from(cfg);
  const FunctionalSpec spec = spec_from(cfg);
  const nlohmann::json g = field_or(cfg, "grid", nlohmann::json::object());
  GridSpec grid{model.d, field_or(g, "R", 32.0), field_or(g, "h", 0.5),
                field_or(g, "b", 2.0)};
  grid.validate();
  const int N = field_or(cfg, "replicates", 100);
  const CirculantSampler sampler(model, grid);

  std::vector<double> vals(size_t(N), 0.0);
  const Box D = Box::centered(grid, grid.R);
  parallel_for(N, workers, [&](int64_t rep) {
    const FieldSample fs = sampler.sample(seed, uint64_t(rep));
    vals[size_t(rep)] = evaluate_functional(fs, spec, D);
  });

  SuiteOut out;
  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  for (int i = 0; i < N; ++i)
    add_row(out.csv, double(i), "phi", vals[size_t(i)]);

  const FieldSample f0 = sampler.sample(seed, 0);
  write_text(out_dir + "/geometry.csv",
             geometry_csv(label_components(extract_excursion(f0, spec))));

  if (cfg.contains("scales")) {
    const auto& sc = cfg.at("scales");
    const DecompositionResult dr = multiscale_decompose(
        f0, spec, sc.at("R").get<double>(), sc.at("r").get<double>(),
        sc.at("a").get<double>());
    double msum = 0;
    for (double v : dr.mesobox_values) msum += v;
    add_row(out.csv, -1, "ms_total", dr.total);
    add_row(out.csv, -1, "ms_mesobox_sum", msum);
    add_row(out.csv, -1, "ms_A", dr.A);
    add_row(out.csv, -1, "ms_B", dr.B);
    add_row(out.csv, -1, "ms_C", dr.C);
  }
  return out;
}

SuiteOut suite_lln(const nlohmann::json& cfg, uint64_t seed, int workers) {
  const CovarianceModel model = model_from(cfg);
  const FunctionalSpec spec = spec_from(cfg);
  const std::vector<double> Rs =
      field_or(cfg, "R_list", std::vector<double>{32, 64, 128});
  const int N = field_or(cfg, "replicates", 500);
  const double h = field_or(cfg, "h", 0.5);
  const auto rows = lln_curve(model, spec, Rs, N, seed, h, workers);

  SuiteOut out;
  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  for (const auto& r : rows)
    add_row(out.csv, r.R, "mean_density", r.value, r.ci.lo, r.ci.hi);
  for (size_t i = 1; i < rows.size(); ++i)
    add_row(out.csv, rows[i].R, "diff",
            std::abs(rows[i].value - rows[i - 1].value));
  return out;
}

SuiteOut suite_var(const nlohmann::json& cfg, uint64_t seed, int workers) {
  const CovarianceModel model = model_from(cfg);
  const FunctionalSpec spec = spec_from(cfg);
  const std::vector<double> Rs =
      field_or(cfg, "R_list", std::vector<double>{32, 64, 128});
  const int N = field_or(cfg, "replicates", 200);
  const double h = field_or(cfg, "h", 0.5);
  const auto rows = variance_curve(model, spec, Rs, N, seed, h, workers);

  SuiteOut out;
  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  for (const auto& r : rows)
    add_row(out.csv, r.R, "var_density", r.value, r.ci.lo, r.ci.hi);
  for (size_t i = 1; i < rows.size(); ++i)
    add_row(out.csv, rows[i].R, "diff",
            std::abs(rows[i].value - rows[i - 1].value));
  return out;
}

SuiteOut suite_clt(const nlohmann::json& cfg, uint64_t seed, int workers) {
  const CovarianceModel model = model_from(cfg);
  const FunctionalSpec spec = spec_from(cfg);
  const std::vector<double> Rs =
      field_or(cfg, "R_list", std::vector<double>{24, 48, 96});
  const int N = field_or(cfg, "replicates", 2000);
  const double h = field_or(cfg, "h", 0.5);
  const CltReport rep = clt_suite(model, spec, Rs, N, seed, h, workers);

  SuiteOut out;
  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  SvgSeries dk{"d_kol", {}, {}};
  for (const auto& r : rep.rows) {
    add_row(out.csv, r.R, "mean_density", r.mean_density);
    add_row(out.csv, r.R, "var_density", r.var_density, r.var_ci.lo,
            r.var_ci.hi);
    add_row(out.csv, r.R, "d_kol", r.d_kol, r.d_kol_ci.lo, r.d_kol_ci.hi);
    dk.x.push_back(r.R);
    dk.y.push_back(r.d_kol);
  }
  add_row(out.csv, 0, "sigma_hat", rep.sigma_hat);
  add_row(out.csv, 0, "eta_hat", rep.eta_hat, rep.eta_ci.lo, rep.eta_ci.hi);
  out.svg = svg_line_plot({dk}, "Kolmogorov distance vs box size", "R",
                          "d_kol", true);
  out.results["eta_hat"] = rep.eta_hat;
  return out;
}

SuiteOut suite_asclt(const nlohmann::json& cfg, uint64_t seed, int workers) {
  const CovarianceModel model = model_from(cfg);
  const FunctionalSpec spec = spec_from(cfg);
  const double R_max = field_or(cfg, "R_max", 256.0);
  const int M = field_or(cfg, "master_seeds", 10);
  const double h = field_or(cfg, "h", 0.5);
  const AscltContext ctx =
      AscltContext::build(model, spec, R_max, seed, h,
                          field_or(cfg, "mean_replicates", 64), workers);

  const std::vector<std::string> names{"abs", "id", "cos"};
  const std::vector<std::function<double(double)>> Fs{
      [](double x) { return std::abs(x); }, [](double x) { return x; },
      [](double x) { return std::cos(x); }};

  SuiteOut out;
  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  int abs_within = 0;
  for (int i = 0; i < M; ++i) {
    const auto res = asclt_statistic(ctx, Fs, seed + uint64_t(i), workers);
    for (size_t fi = 0; fi < Fs.size(); ++fi) {
      add_row(out.csv, double(i), names[fi] + "_value", res[fi].value);
      add_row(out.csv, double(i), names[fi] + "_target", res[fi].target);
    }
    if (std::abs(res[0].value - res[0].target) <= 0.15) ++abs_within;
  }
  add_row(out.csv, -1, "sigma_hat", ctx.sigma_hat);
  add_row(out.csv, -1, "abs_within_0.15", double(abs_within) / double(M));
  return out;
}

SuiteOut suite_arm(const nlohmann::json& cfg, uint64_t seed, int workers) {
  const CovarianceModel model = model_from(cfg);
  const double level = field_or(cfg, "level", spec_from(cfg).level);
  const std::vector<double> Rs =
      field_or(cfg, "R_list", std::vector<double>{8, 16, 32});
  const int N = field_or(cfg, "replicates", 4000);
  const double h = field_or(cfg, "h", 0.5);
  const auto rows = arm_decay_curve(model, level, Rs, N, seed, h, workers);

  SuiteOut out;
  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  for (const auto& r : rows) {
    add_row(out.csv, r.R, "p_one", r.p_one, r.one_ci.lo, r.one_ci.hi);
    add_row(out.csv, r.R, "p_trunc", r.p_trunc, r.trunc_ci.lo,
            r.trunc_ci.hi);
  }
  return out;
}

SuiteOut suite_sigma2(const nlohmann::json& cfg, uint64_t seed, int workers,
                      const std::string& out_dir) {
  const CovarianceModel model = model_from(cfg);
  PivotalConfig pc;
  pc.spec = spec_from(cfg);
  const nlohmann::json p = field_or(cfg, "pivotal", nlohmann::json::object());
  pc.rho_max = field_or(p, "rho_max", 6.0);
  pc.x_step = field_or(p, "x_step", 0.5);
  pc.t_nodes = field_or(p, "t_nodes", 8);
  pc.t_cap = field_or(p, "t_cap", 0.02);
  pc.replicates = field_or(p, "replicates", 48);
  pc.R_stab = field_or(p, "R_stab", 16.0);
  pc.grid_h = field_or(p, "grid_h", 0.0625);
  pc.swap_roles = field_or(p, "swap_roles", false);
  const Sigma2Result res = estimate_sigma2(model, pc, seed, workers);

  SuiteOut out;
  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  add_row(out.csv, 0, "sigma2", res.sigma2, res.sigma2 - kZ95 * res.se,
          res.sigma2 + kZ95 * res.se);
  add_row(out.csv, 0, "se", res.se);
  add_row(out.csv, 0, "nodes", double(res.nodes));
  add_row(out.csv, 0, "dropped_nodes", double(res.dropped_nodes));
  add_row(out.csv, 0, "dropped_draws", double(res.dropped_draws));
  add_row(out.csv, 0, "not_stabilized", double(res.not_stabilized));
  add_row(out.csv, 0, "omitted_ball", res.omitted_ball);
  add_row(out.csv, 0, "partial_rho_half", res.partial_rho_half);
  add_row(out.csv, 0, "partial_t_inner", res.partial_t_inner);
  out.results = res.to_json();
  write_json(out_dir + "/sigma2.json", res.to_json());
  if (res.dropped_nodes > 0)
    out.warnings.push_back("pivotal nodes dropped: " +
                           std::to_string(res.dropped_nodes));
  if (res.not_stabilized > 0)
    out.warnings.push_back("draws excluded as not stabilized: " +
                           std::to_string(res.not_stabilized));
  return out;
}

SuiteOut suite_volume(const nlohmann::json& cfg, uint64_t seed, int workers) {
  const CovarianceModel model = model_from(cfg);
  const double level = field_or(cfg, "level", -1.0);
  const std::vector<double> Rs =
      field_or(cfg, "R_list", std::vector<double>{32, 64, 128});
  const std::vector<double> ns =
      field_or(cfg, "n_list", std::vector<double>{8, 16, 32, 64});
  const int N = field_or(cfg, "replicates", 500);
  const double h = field_or(cfg, "h", 0.5);
  const double buffer = field_or(cfg, "buffer", 6.0);
  const int lil_runs = field_or(cfg, "lil_runs", 100);

  SuiteOut out;
  if (level >= 0)
    out.warnings.push_back(
        "level outside supercritical volume regime (expected level < 0)");
  const VolumeReport rep = volume_suite(model, level, Rs, ns, N, seed, h,
                                        buffer, workers, lil_runs);

  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  add_row(out.csv, 0, "theta", rep.theta, rep.theta_ci.lo, rep.theta_ci.hi);
  for (const auto& r : rep.var_curve)
    add_row(out.csv, r.R, "var_density", r.value, r.ci.lo, r.ci.hi);
  for (const auto& r : rep.dkol_curve)
    add_row(out.csv, r.R, "d_kol", r.value);
  for (const auto& lc : rep.lag_covs)
    add_row(out.csv, lc.lag[0], "lag_cov", lc.cov, lc.cov - kZ95 * lc.se,
            lc.cov + kZ95 * lc.se);
  add_row(out.csv, 0, "cov_e00", rep.cov_e00);
  add_row(out.csv, 0, "bernoulli", rep.theta * (1.0 - rep.theta));
  for (const auto& r : rep.cox_grimmett)
    add_row(out.csv, r.R, "cox_u", r.value, r.ci.lo, r.ci.hi);
  for (size_t i = 0; i < rep.lil_n.size(); ++i)
    add_row(out.csv, rep.lil_n[i], "lil_L", rep.lil_L[i]);
  add_row(out.csv, 0, "lil_band", rep.lil_band);
  add_row(out.csv, 0, "lil_exceed_fraction", rep.lil_exceed_fraction);
  add_row(out.csv, 0, "sigma_vol", rep.sigma_vol);
  add_row(out.csv, 0, "sigma2_indicator", rep.sigma2_indicator);
  add_row(out.csv, 0, "crossing_rate", rep.crossing_rate);
  add_row(out.csv, 0, "min_pair_z", rep.min_pair_z);
  add_row(out.csv, 0, "association_ok", rep.association_ok ? 1.0 : 0.0);
  add_row(out.csv, 0, "continuity_ok", rep.continuity_ok ? 1.0 : 0.0);
  if (!rep.association_ok)
    out.warnings.push_back("NonPositiveCovariance: pairwise indicator "
                           "covariance below -3 SE");
  return out;
}

SuiteOut suite_quasi(const nlohmann::json& cfg, uint64_t seed, int workers) {
  const CovarianceModel model = model_from(cfg);
  const FunctionalSpec spec = spec_from(cfg);
  const double box_side = field_or(cfg, "box_side", 8.0);
  const std::vector<double> seps =
      field_or(cfg, "separations", std::vector<double>{0, 4, 8, 16});
  const int N = field_or(cfg, "replicates", 400);
  const double h = field_or(cfg, "h", 0.5);
  const auto rows = quasi_association_check(
      model, spec, box_side, seps, field_or(cfg, "lip_f", 1.0),
      field_or(cfg, "lip_g", 1.0), N, seed, workers, h);

  SuiteOut out;
  out.csv.header = {"scale", "statistic", "value", "ci_lo", "ci_hi"};
  for (const auto& r : rows) {
    add_row(out.csv, r.separation, "cov", r.cov, r.cov - kZ95 * r.se,
            r.cov + kZ95 * r.se);
    add_row(out.csv, r.separation, "bound", r.bound);
    add_row(out.csv, r.separation, "ratio", r.ratio);
  }
  return out;
}

// ---- csv reading for checks ----------------------------------------------

struct CsvRow {
  double scale = 0, value = 0, lo = 0, hi = 0;
};

std::map<std::string, std::vector<CsvRow>> parse_rows(
    const std::string& text) {
  std::map<std::string, std::vector<CsvRow>> out;
  size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    size_t eol = text.find("\r\n", pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 2;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> f;
    size_t p = 0;
    while (true) {
      const size_t c = line.find(',', p);
      f.push_back(line.substr(p, c - p));
      if (c == std::string::npos) break;
      p = c + 1;
    }
    if (f.size() != 5) throw IoError("malformed results row: " + line);
    out[f[1]].push_back(
        {std::stod(f[0]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
  }
  return out;
}

double se_of(const CsvRow& r) { return (r.hi - r.lo) / (2.0 * kZ95); }

}  // namespace

// ---- public api -----------------------------------------------------------

FunctionalSpec functional_from_json(const nlohmann::json& j) {
  FunctionalSpec s;
  const std::string set = field_or<std::string>(j, "set", "excursion");
  if (set == "excursion")
    s.set_type = SetType::Excursion;
  else if (set == "level")
    s.set_type = SetType::Level;
  else
    throw ConfigInvalid("unknown set type: " + set);
  s.level = field_or(j, "level", 0.0);
  const std::string phi = field_or<std::string>(j, "phi", "count");
  if (phi == "count")
    s.phi = PhiKind::Count;
  else if (phi == "hole-indicator")
    s.phi = PhiKind::HoleIndicator;
  else if (phi == "zero")
    s.phi = PhiKind::Zero;
  else if (phi == "euler")
    s.phi = PhiKind::Euler;
  else
    throw ConfigInvalid("unknown phi kind: " + phi);
  return s;
}

nlohmann::json functional_to_json(const FunctionalSpec& spec) {
  const char* set = spec.set_type == SetType::Excursion ? "excursion" : "level";
  const char* phi = "count";
  switch (spec.phi) {
    case PhiKind::Count: phi = "count"; break;
    case PhiKind::HoleIndicator: phi = "hole-indicator"; break;
    case PhiKind::Zero: phi = "zero"; break;
    case PhiKind::Euler: phi = "euler"; break;
  }
  return {{"set", set}, {"level", spec.level}, {"phi", phi}};
}

void validate_config(const nlohmann::json& config) {
  if (!config.contains("suite"))
    throw ConfigInvalid("config needs a suite name");
  const std::string suite = config.at("suite").get<std::string>();
  if (known_suites().count(suite) == 0)
    throw ConfigInvalid("unknown suite: " + suite);
  if (config.contains("model"))
    CovarianceModel::from_json(config.at("model")).validate();
  else if (suite != "functional")
    throw ConfigInvalid("config needs a model");
  if (config.contains("functional"))
    functional_from_json(config.at("functional"));
  if (config.contains("replicates") &&
      config.at("replicates").get<int>() < 1)
    throw ConfigInvalid("replicates must be >= 1");

  if (config.contains("scales")) {
    const auto& sc = config.at("scales");
    const double R = sc.at("R").get<double>();
    const double r = sc.at("r").get<double>();
    const double a = sc.at("a").get<double>();
    if (!(a > 0 && r > 0 && R > 0))
      throw ConfigInvalid("scales must be positive");
    const double ra = r / a;
    if (std::abs(ra - std::round(ra)) > 1e-9 ||
        llround(ra) % 2 != 0 || ra < 2)
      throw ConfigInvalid("r/a not even");
    const double Rs = R / (r + 4.0 * a);
    if (std::abs(Rs - std::round(Rs)) > 1e-9 ||
        llround(Rs) % 2 != 0 || Rs < 2)
      throw ConfigInvalid("R/(r+4a) not even");
  }
}

nlohmann::json run_suite(const nlohmann::json& config) {
  validate_config(config);
  const std::string suite = config.at("suite").get<std::string>();
  const uint64_t seed = field_or<uint64_t>(config, "seed", 1);
  const int workers = resolve_workers(field_or(config, "workers", 0));
  const std::string out_dir = field_or<std::string>(config, "out", "out");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  SuiteOut so;
  if (suite == "sample")
    so = suite_sample(config, seed, workers, out_dir);
  else if (suite == "functional")
    so = suite_functional(config, seed, workers, out_dir);
  else if (suite == "lln")
    so = suite_lln(config, seed, workers);
  else if (suite == "var")
    so = suite_var(config, seed, workers);
  else if (suite == "clt" || suite == "qclt-rate")
    so = suite_clt(config, seed, workers);
  else if (suite == "asclt")
    so = suite_asclt(config, seed, workers);
  else if (suite == "arm")
    so = suite_arm(config, seed, workers);
  else if (suite == "sigma2")
    so = suite_sigma2(config, seed, workers, out_dir);
  else if (suite == "volume")
    so = suite_volume(config, seed, workers);
  else if (suite == "quasi")
    so = suite_quasi(config, seed, workers);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const std::string csv_path = out_dir + "/results.csv";
  write_text(csv_path, csv_format(so.csv));

  nlohmann::json outputs{{"csv", csv_path},
                         {"manifest", out_dir + "/manifest.json"}};
  if (!so.svg.empty()) {
    write_text(out_dir + "/plot.svg", so.svg);
    outputs["svg"] = out_dir + "/plot.svg";
  }
  if (suite == "sample") outputs["field"] = out_dir + "/field.bin";
  if (suite == "functional") outputs["geometry"] = out_dir + "/geometry.csv";
  if (suite == "sigma2") outputs["results_json"] = out_dir + "/sigma2.json";

  char hash_hex[20];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                (unsigned long long)fnv1a64(config.dump()));
  nlohmann::json manifest{{"suite", suite},
                          {"config", config},
                          {"config_hash", hash_hex},
                          {"seed", seed},
                          {"workers", workers},
                          {"out_dir", out_dir},
                          {"outputs", outputs},
                          {"warnings", so.warnings},
                          {"results", so.results},
                          {"wall_time_s", wall},
                          {"versions", {{"excursion-lab", kVersion}}}};
  write_json(out_dir + "/manifest.json", manifest);
  return manifest;
}

nlohmann::json check_manifest(const nlohmann::json& manifest) {
  const std::string suite = manifest.at("suite").get<std::string>();
  const auto& outputs = manifest.at("outputs");
  for (const auto& [key, path] : outputs.items()) {
    (void)key;
    if (!std::filesystem::exists(path.get<std::string>()))
      throw MissingOutputs("missing output file: " + path.get<std::string>());
  }
  const auto rows = parse_rows(read_text(outputs.at("csv").get<std::string>()));

  nlohmann::json checks = nlohmann::json::array();
  auto add_check = [&](const std::string& name, bool pass,
                       const std::string& detail) {
    checks.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
  };

  if (suite == "sample") {
    const CovarianceModel model =
        CovarianceModel::from_json(manifest.at("config").at("model"));
    for (const auto& r : rows.at("cov")) {
      const double truth = model.eval({r.scale, 0, 0});
      const bool ok = std::abs(r.value - truth) <= 4.0 * se_of(r);
      add_check("covariance_lag_" + format_num(r.scale), ok,
                "got " + format_num(r.value) + " expected " +
                    format_num(truth) + " within 4 SE " +
                    format_num(4.0 * se_of(r)));
    }
  } else if (suite == "functional") {
    bool ok = true;
    for (const auto& r : rows.at("phi"))
      if (!std::isfinite(r.value)) ok = false;
    add_check("finite_values", ok, "all functional values finite");
    if (rows.count("ms_total")) {
      const double tot = rows.at("ms_total")[0].value;
      const double sum = rows.at("ms_mesobox_sum")[0].value +
                         rows.at("ms_A")[0].value + rows.at("ms_B")[0].value +
                         rows.at("ms_C")[0].value;
      add_check("multiscale_partition", tot == sum,
                format_num(tot) + " vs " + format_num(sum));
    }
  } else if (suite == "lln") {
    const auto& diffs = rows.at("diff");
    bool dec = true;
    for (size_t i = 1; i < diffs.size(); ++i)
      if (!(diffs[i].value < diffs[i - 1].value)) dec = false;
    add_check("diffs_decreasing", dec, "successive mean differences shrink");
    const auto& means = rows.at("mean_density");
    const auto& a = means[means.size() - 2];
    const auto& b = means.back();
    add_check("top_cis_overlap", a.lo <= b.hi && b.lo <= a.hi,
              "largest two scales agree");
  } else if (suite == "var") {
    bool ok = true;
    for (const auto& r : rows.at("var_density"))
      if (!(r.lo <= r.value && r.value <= r.hi && std::isfinite(r.lo) &&
            std::isfinite(r.hi)))
        ok = false;
    add_check("cis_ordered", ok, "chi-square intervals bracket estimates");
  } else if (suite == "clt" || suite == "qclt-rate") {
    const auto& dk = rows.at("d_kol");
    add_check("d_kol_decreasing",
              dk.back().value < dk.front().value &&
                  dk.back().hi < dk.front().lo,
              "distance shrinks beyond bootstrap CI");
    const auto& eta = rows.at("eta_hat")[0];
    add_check("eta_positive", eta.value > 0 && eta.lo > 0,
              "rate fit " + format_num(eta.value) + " CI lo " +
                  format_num(eta.lo));
  } else if (suite == "asclt") {
    const double frac = rows.at("abs_within_0.15")[0].value;
    add_check("abs_within", frac >= 0.8,
              "fraction of seeds within 0.15: " + format_num(frac));
  } else if (suite == "arm") {
    const auto& p = rows.at("p_one");
    add_check("decay", p.back().value < 0.5 * p.front().value,
              format_num(p.back().value) + " vs half of " +
                  format_num(p.front().value));
    add_check("cis_disjoint", p.back().hi < p.front().lo,
              "Wilson intervals separate");
  } else if (suite == "sigma2") {
    const auto& s = rows.at("sigma2")[0];
    add_check("finite_positive",
              std::isfinite(s.value) && s.value > 0 && se_of(s) > 0,
              "sigma2 " + format_num(s.value));
  } else if (suite == "volume") {
    add_check("association", rows.at("min_pair_z")[0].value >= -3.0,
              "min covariance z " +
                  format_num(rows.at("min_pair_z")[0].value));
    add_check("bernoulli_identity",
              rows.at("cov_e00")[0].value == rows.at("bernoulli")[0].value,
              "lag-0 covariance equals theta(1-theta)");
    const auto& dk = rows.at("d_kol");
    add_check("d_kol_decreasing", dk.back().value < dk.front().value,
              format_num(dk.back().value) + " < " +
                  format_num(dk.front().value));
    add_check("lil_band",
              rows.at("lil_exceed_fraction")[0].value <= 0.05,
              "exceed fraction " +
                  format_num(rows.at("lil_exceed_fraction")[0].value));
    const auto& u = rows.at("cox_u");
    bool mono = true;
    for (size_t i = 1; i < u.size(); ++i)
      if (u[i].lo > u[i - 1].hi) mono = false;
    add_check("cox_grimmett_monotone", mono, "u(k) nonincreasing in k");
  } else if (suite == "quasi") {
    const auto& ratio = rows.at("ratio");
    const double cap = 10.0 * std::max(ratio.front().value, 1e-300);
    bool ok = true;
    for (const auto& r : ratio)
      if (r.value > cap) ok = false;
    add_check("ratio_bounded", ok,
              "all ratios within 10x separation-0 value");
    const auto& bound = rows.at("bound");
    bool dec = true;
    for (size_t i = 1; i < bound.size(); ++i)
      if (!(bound[i].value < bound[i - 1].value)) dec = false;
    const auto& cov = rows.at("cov");
    add_check("decay", dec && std::abs(cov.back().value) <
                                  std::abs(cov.front().value),
              "envelope integral and covariance both decay");
  }

  bool pass = true;
  for (const auto& c : checks)
    if (!c.at("pass").get<bool>()) pass = false;
  return nlohmann::json{{"suite", suite}, {"pass", pass}, {"checks", checks}};
}

}  // namespace exclab
