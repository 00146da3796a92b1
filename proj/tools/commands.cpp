#include "commands.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include "sievelab/sievelab.hpp"

namespace sievelab::cli {
namespace {

using nlohmann::json;

/// Reads fields from one config object and records the resolved value
/// (explicit or default) into the resolved tree.
class Reader {
 public:
  Reader(const json* in, json* out, std::string path) : in_(in), out_(out), path_(std::move(path)) {
    if (in_ != nullptr && !in_->is_object()) throw ConfigError("field '" + display() + "': expected an object");
    *out_ = json::object();
  }

  template <class T>
  T need(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required field '" + name(key) + "'");
    return convert<T>(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) {
      (*out_)[key] = fallback;
      return fallback;
    }
    return convert<T>(key);
  }

  [[nodiscard]] bool has(const std::string& key) const {
    return in_ != nullptr && in_->contains(key) && !(*in_)[key].is_null();
  }

  Reader child(const std::string& key) {
    const json* sub = has(key) ? &(*in_)[key] : nullptr;
    return Reader(sub, &(*out_)[key], name(key));
  }

  void set(const std::string& key, const json& value) { (*out_)[key] = value; }

  [[nodiscard]] std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  [[nodiscard]] std::string display() const { return path_.empty() ? "<root>" : path_; }

  template <class T>
  T convert(const std::string& key) {
    try {
      T value = (*in_)[key].template get<T>();
      (*out_)[key] = value;
      return value;
    } catch (const json::exception&) {
      throw ConfigError("field '" + name(key) + "': wrong type");
    }
  }

  const json* in_;
  json* out_;
  std::string path_;
};

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string csv_header(const std::string& command, std::uint64_t seed, const json& resolved) {
  std::ostringstream os;
  os << "# sievelab " << command << '\n';
  os << "# seed: " << seed << '\n';
  os << "# config_hash: " << config_hash(resolved) << '\n';
  os << "# config: " << resolved.dump() << '\n';
  return os.str();
}

std::uint64_t resolve_seed(Reader& r, const GlobalOptions& opts) {
  std::uint64_t seed = r.get<std::uint64_t>("seed", 1);
  if (opts.seed) {
    seed = *opts.seed;
    r.set("seed", seed);
  }
  return seed;
}

template <class Fn>
auto guarded(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError("field '" + field + "': " + e.what());
  }
}

SievePriorConfig read_prior(Reader r) {
  SievePriorConfig p;
  p.lambda = r.get<double>("lambda", p.lambda);
  p.tau0 = r.get<double>("tau0", p.tau0);
  p.q = r.get<double>("q", p.q);
  p.k_max = r.get<std::size_t>("k_max", p.k_max);
  if (r.has("truncation_radius")) p.truncation_radius = r.need<double>("truncation_radius");
  const auto check = [&](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError("field '" + r.name(key) + "': " + what);
  };
  check(p.lambda > 0.0, "lambda", "must be positive");
  check(p.tau0 > 0.0, "tau0", "must be positive");
  check(p.q > 0.5 && p.q <= 1.0, "q", "must lie in (1/2, 1]");
  check(p.k_max >= 1, "k_max", "must be positive");
  check(!p.truncation_radius || *p.truncation_radius > 0.0, "truncation_radius", "must be positive");
  p.validate();
  return p;
}

AuditConfig read_audit(Reader r) {
  AuditConfig a;
  a.j0 = r.get<double>("j0", a.j0);
  a.M0 = r.get<double>("M0", a.M0);
  a.m = r.get<int>("m", a.m);
  a.theta_tau_ceiling = r.get<double>("theta_tau_ceiling", a.theta_tau_ceiling);
  const auto L = r.get<std::string>("L", "log");
  if (L == "log") {
    a.L_kind = SlowVarying::Log;
  } else if (L == "constant") {
    a.L_kind = SlowVarying::Constant;
  } else {
    throw ConfigError("field '" + r.name("L") + "': expected 'log' or 'constant'");
  }
  guarded("audit", [&] {
    a.validate();
    return 0;
  });
  return a;
}

TruthVector read_truth(Reader r) {
  const auto kind = r.get<std::string>("kind", "polylog");
  const auto beta = r.get<double>("beta", 1.0);
  const auto J_store = r.get<std::size_t>("J_store", 1000);
  if (kind == "polylog") return guarded(r.name("beta"), [&] { return make_polylog_truth(beta, J_store); });
  if (kind == "random") {
    const auto L0 = r.get<double>("L0", 1.0);
    const auto fill = r.get<double>("fill", 1.0);
    const auto seed = r.get<std::uint64_t>("seed", 7);
    return guarded(r.name("kind"), [&] { return make_random_sobolev_truth({beta, L0}, fill, J_store, seed); });
  }
  throw ConfigError("field '" + r.name("kind") + "': expected 'polylog' or 'random'");
}

BasisWeights read_weights(Reader r, std::size_t J) {
  const auto kind = r.get<std::string>("kind", "all-ones");
  const auto t = r.get<double>("t", 0.0);
  if (kind != "all-ones" && kind != "fourier")
    throw ConfigError("field '" + r.name("kind") + "': expected 'all-ones' or 'fourier'");
  return guarded(r.name("t"), [&] {
    return basis_weights(kind == "all-ones" ? BasisKind::AllOnes : BasisKind::Fourier, t, J);
  });
}

std::vector<double> read_number_list(Reader& r, const std::string& key, std::vector<double> fallback) {
  auto v = r.get<std::vector<double>>(key, std::move(fallback));
  if (v.empty()) throw ConfigError("field '" + r.name(key) + "': must not be empty");
  return v;
}

}  // namespace

json parse_config_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                      ": " + e.what());
  }
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_hash(const json& resolved) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : resolved.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

CommandResult cmd_posterior(const json& config, const GlobalOptions& opts) {
  json resolved;
  Reader r(&config, &resolved, "");
  const std::uint64_t seed = resolve_seed(r, opts);
  const SievePriorConfig prior = read_prior(r.child("prior"));
  Reader o = r.child("observation");
  const auto source = o.get<std::string>("source", "simulate");

  SequenceObservation obs;
  if (source == "values") {
    obs.n = r.need<double>("n");
    obs.x = o.need<std::vector<double>>("x");
    obs.seed = seed;
  } else if (source == "simulate") {
    const TruthVector truth = read_truth(o.child("truth"));
    const double n = r.need<double>("n");
    const auto J_obs = o.get<std::size_t>("J_obs", guarded("n", [&] { return default_J_obs(truth, n); }));
    obs = guarded(o.name("J_obs"), [&] { return simulate_sequence(truth, n, J_obs, seed); });
  } else if (source == "regression_csv") {
    const auto path = o.need<std::string>("path");
    const auto sigma = o.need<double>("sigma");
    const auto J = o.need<std::size_t>("J");
    std::ifstream in(path);
    if (!in) throw ConfigError("field '" + o.name("path") + "': cannot open '" + path + "'");
    const RegressionData data = guarded(o.name("path"), [&] { return read_regression_csv(in, sigma); });
    obs = guarded(o.name("J"), [&] { return regression_to_sequence(data, J); });
    obs.seed = seed;
    r.set("n", obs.n);
  } else {
    throw ConfigError("field '" + o.name("source") + "': expected 'values', 'simulate' or 'regression_csv'");
  }

  PosteriorSummary post;
  try {
    post = compute_posterior(obs, prior);
  } catch (const SizingError& e) {
    throw ConfigError(std::string("field 'observation': ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("field 'observation': ") + e.what());
  }
  const auto mean = posterior_mean(post, obs);

  const std::string head = csv_header("posterior", seed, resolved);
  std::ostringstream w;
  w << head << "k,log_weight,weight\n";
  for (std::size_t k = 0; k < post.K_eff; ++k)
    w << (k + 1) << ',' << num(post.log_w[k]) << ',' << num(std::exp(post.log_w[k])) << '\n';
  std::ostringstream c;
  c << head << "j,u_j,s_j,v_j,x_j,theta_hat_j\n";
  for (std::size_t j = 0; j < post.K_eff; ++j) {
    c << (j + 1) << ',' << num(post.u[j]) << ',' << num(post.s[j]) << ',' << num(post.v[j]) << ','
      << num(obs.x[j]) << ',' << num(mean[j]) << '\n';
  }
  CommandResult out;
  out.files["posterior_weights.csv"] = w.str();
  out.files["posterior_coords.csv"] = c.str();
  return out;
}

CommandResult cmd_risk_sweep(const json& config, const GlobalOptions& opts) {
  json resolved;
  Reader r(&config, &resolved, "");
  ExperimentGrid grid;
  grid.seed = resolve_seed(r, opts);
  grid.threads = opts.threads;
  grid.betas = read_number_list(r, "betas", {1.0, 2.0});
  grid.ns = r.need<std::vector<double>>("ns");
  if (grid.ns.empty()) throw ConfigError("field 'ns': the n grid must not be empty");
  grid.replicates = r.get<std::size_t>("replicates", 200);
  grid.prior = read_prior(r.child("prior"));
  const auto truth_kind = r.get<std::string>("truth_kind", "polylog");
  if (truth_kind == "polylog") {
    grid.truth_kind = TruthKind::Polylog;
  } else if (truth_kind == "random") {
    grid.truth_kind = TruthKind::Random;
  } else {
    throw ConfigError("field 'truth_kind': expected 'polylog' or 'random'");
  }
  grid.L0 = r.get<double>("L0", 1.0);
  grid.fill = r.get<double>("fill", 1.0);
  grid.Ms = read_number_list(r, "Ms", {10.0});
  grid.eps0 = r.get<double>("eps0", 1.0);
  grid.posterior_draws = r.get<std::size_t>("posterior_draws", 200);
  grid.J_store = r.get<std::size_t>("J_store", 0);
  const bool contraction = r.get<bool>("contraction", true);
  guarded("grid", [&] {
    grid.validate();
    return 0;
  });
  grid.J_store = grid.resolved_J_store();
  r.set("J_store", grid.J_store);
  const AuditConfig audit = read_audit(r.child("audit"));
  Reader wr = r.child("weights");

  std::ostringstream table;
  table << "beta,n,replicates,freq_risk,freq_se,post_risk,post_se,pointwise_risk,pointwise_se,mean_u_Keff\n";
  std::vector<std::pair<double, TruthVector>> truths;
  for (double beta : grid.betas) truths.emplace_back(beta, grid.make_truth(beta));
  const BasisWeights weights = read_weights(std::move(wr), grid.J_store);

  for (const auto& [beta, truth] : truths) {
    for (double n : grid.ns) {
      ReplicateSettings settings;
      settings.threads = grid.threads;
      const double eps = guarded("ns", [&] { return epsilon_n(beta, n, grid.eps0); });
      settings.u_probe_index = std::max<std::size_t>(1, jn_kn(std::max(n, 3.0), eps, audit).k_n);
      const auto outcomes = run_replicates(truth, grid.prior, n, grid.replicates, grid.seed, &weights, settings);
      const std::span<const ReplicateOutcome> view(outcomes);
      const auto freq = summarize(view, &ReplicateOutcome::freq_loss);
      const auto post = summarize(view, &ReplicateOutcome::posterior_loss);
      const auto point = summarize(view, &ReplicateOutcome::pointwise_sq);
      const auto u = summarize(view, &ReplicateOutcome::u_probe);
      table << num(beta) << ',' << num(n) << ',' << grid.replicates << ',' << num(freq.mean) << ','
            << num(freq.se) << ',' << num(post.mean) << ',' << num(post.se) << ',' << num(point.mean) << ','
            << num(point.se) << ',' << num(u.mean) << '\n';
    }
  }

  const std::string head = csv_header("risk-sweep", grid.seed, resolved);
  CommandResult out;
  out.files["risk_sweep.csv"] = head + table.str();
  if (contraction) {
    std::ostringstream ct;
    ct << head << "beta,n,M,radius_sq,mean_tail_mass,tail_mass_se\n";
    for (const auto& row : contraction_experiment(grid)) {
      ct << num(row.beta) << ',' << num(row.n) << ',' << num(row.M) << ',' << num(row.radius_sq) << ','
         << num(row.tail_mass.mean) << ',' << num(row.tail_mass.se) << '\n';
    }
    out.files["contraction.csv"] = ct.str();
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CommandResult cmd_rate_fit(const std::string& csv_text, const std::string& column, const std::string& abscissa,
                           bool check) {
  Abscissa ab;
  if (abscissa == "log-n") {
    ab = Abscissa::LogN;
  } else if (abscissa == "log-n-over-log-n") {
    ab = Abscissa::LogNOverLogN;
  } else {
    throw ConfigError("field 'abscissa': expected 'log-n' or 'log-n-over-log-n'");
  }
  std::istringstream in(csv_text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = split_csv_line(line);
    } else {
      rows.push_back(split_csv_line(line));
    }
  }
  const auto index_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("field 'column': input has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ib = index_of("beta");
  const std::size_t in_ = index_of("n");
  const std::size_t iv = index_of(column);

  std::vector<double> betas;
  std::map<double, std::vector<RatePoint>> groups;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) throw ConfigError("input row " + std::to_string(r + 1) + ": wrong cell count");
    try {
      const double beta = std::stod(row[ib]);
      if (!groups.contains(beta)) betas.push_back(beta);
      groups[beta].push_back({std::stod(row[in_]), std::stod(row[iv])});
    } catch (const std::logic_error&) {
      throw ConfigError("input row " + std::to_string(r + 1) + ": non-numeric cell");
    }
  }
  if (betas.empty()) throw ConfigError("input has no data rows");

  const bool pointwise = column.starts_with("pointwise");
  if (check && !pointwise && column != "freq_risk" && column != "post_risk")
    throw ConfigError("field 'column': --check supports freq_risk, post_risk and pointwise_risk");

  json resolved = {{"column", column}, {"abscissa", abscissa}, {"check", check},
                   {"input_hash", config_hash(json(csv_text))}};
  std::ostringstream os;
  os << csv_header("rate-fit", 0, resolved);
  os << "beta,slope,slope_se,target_global,target_pointwise_lower,target_pointwise_minimax\n";
  bool all_ok = true;
  for (double beta : betas) {
    const auto& pts = groups[beta];
    if (pts.size() < 4) throw ConfigError("beta " + short_num(beta) + ": at least 4 rows are required");
    RateFit fit;
    try {
      fit = fit_rate(pts, ab);
    } catch (const InvalidArgument& e) {
      throw ConfigError("column '" + column + "': " + e.what());
    }
    const double g = -2.0 * beta / (2.0 * beta + 1.0);
    const double lower = -(2.0 * beta - 1.0) / (2.0 * beta + 1.0);
    const double minimax = -(2.0 * beta - 1.0) / (2.0 * beta);
    os << num(beta) << ',' << num(fit.slope) << ',' << num(fit.slope_se) << ',' << num(g) << ',' << num(lower)
       << ',' << num(minimax) << '\n';
    if (check) {
      const bool ok = pointwise ? (std::abs(fit.slope - lower) <= 0.15 && fit.slope > minimax + 0.05)
                                : std::abs(fit.slope - g) <= 0.08;
      all_ok = all_ok && ok;
    }
  }
  CommandResult out;
  out.files["rate_fit.csv"] = os.str();
  out.exit_code = all_ok ? kOk : kToleranceFailure;
  return out;
}

CommandResult cmd_penalty_curve(const json& config, const GlobalOptions& opts) {
  json resolved;
  Reader r(&config, &resolved, "");
  const std::uint64_t seed = resolve_seed(r, opts);
  const auto lo = r.get<double>("beta_lo", 0.5 + 1e-6);
  const auto hi = r.get<double>("beta_hi", 100.0);
  const auto points = r.get<std::size_t>("points", 200);
  auto extra = r.get<std::vector<double>>("extra_betas", {1.0, (1.0 + std::numbers::sqrt2) / 2.0});
  const auto arg_lo = r.get<double>("argmax_lo", 0.6);
  const auto arg_hi = r.get<double>("argmax_hi", 100.0);
  const auto step = r.get<double>("argmax_step", 0.01);
  if (!(lo > 0.5 && hi > lo)) throw ConfigError("field 'beta_lo': need 1/2 < beta_lo < beta_hi");
  if (points < 2) throw ConfigError("field 'points': need at least 2 points");

  std::vector<double> betas;
  const double llo = std::log(lo), lhi = std::log(hi);
  for (std::size_t i = 0; i < points; ++i)
    betas.push_back(i + 1 == points ? hi : std::exp(llo + (lhi - llo) * static_cast<double>(i) / (points - 1.0)));
  betas.front() = lo;
  for (double b : extra) {
    if (!(b > 0.5)) throw ConfigError("field 'extra_betas': every beta must exceed 1/2");
    betas.push_back(b);
  }
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());
  const double arg = guarded("argmax_lo", [&] { return penalty_argmax(arg_lo, arg_hi, step); });

  std::ostringstream os;
  os << csv_header("penalty-curve", seed, resolved);
  os << "beta,penalty\n";
  for (double b : betas) os << num(b) << ',' << num(penalty_exponent(b)) << '\n';
  os << "# summary: argmax_beta=" << num(arg) << " max_penalty=" << num(penalty_exponent(arg)) << '\n';
  CommandResult out;
  out.files["penalty_curve.csv"] = os.str();
  return out;
}

CommandResult cmd_audit(const json& config, const GlobalOptions& opts) {
  json resolved;
  Reader r(&config, &resolved, "");
  const std::uint64_t seed = resolve_seed(r, opts);
  const auto betas = read_number_list(r, "betas", {1.0, 2.0});
  const auto n = r.get<double>("n", 4096.0);
  const auto eps0 = r.get<double>("eps0", 1.0);
  const auto J_store = r.get<std::size_t>("J_store", 10000);
  std::optional<double> eps_override;
  if (r.has("eps_override")) eps_override = r.need<double>("eps_override");
  const SievePriorConfig prior = read_prior(r.child("prior"));
  const AuditConfig audit = read_audit(r.child("audit"));
  Reader pt = r.child("prior_tail");
  const auto lambdas = read_number_list(pt, "lambdas", {0.5, 1.0, 5.0, 20.0});
  const auto k_check = pt.get<std::size_t>("k_check", 5000);
  Reader l2 = r.child("lemma2");
  const auto Q = l2.get<double>("Q", 0.5);
  const auto draws = l2.get<std::size_t>("draws", 100000);
  if (n < 3.0) throw ConfigError("field 'n': must be at least 3");

  std::ostringstream os;
  os << csv_header("audit", seed, resolved);
  os << "check,inputs,values,ok\n";
  bool all_ok = true;
  const auto emit = [&](const std::string& check, const std::string& inputs, const std::string& values, bool ok) {
    os << check << ',' << inputs << ',' << values << ',' << (ok ? "true" : "false") << '\n';
    all_ok = all_ok && ok;
  };

  for (double beta : betas) {
    const TruthVector truth = guarded("betas", [&] { return make_polylog_truth(beta, J_store); });
    const double eps = eps_override ? *eps_override : epsilon_n(beta, n, eps0);
    const std::string in = "beta=" + short_num(beta) + ";n=" + short_num(n) + ";eps_n=" + short_num(eps);
    const SieveIndices idx = jn_kn(n, eps, audit);
    emit("jn_kn", in, "j_n=" + std::to_string(idx.j_n) + ";k_n=" + std::to_string(idx.k_n), idx.j_n <= idx.k_n);

    if (idx.j_n > truth.size()) throw ConfigError("field 'J_store': j_n exceeds the stored truth");
    const A1Audit a1 = audit_A1(truth, n, eps, audit);
    emit("A1", in,
         "K=" + short_num(a1.K_val) + ";K_bound=" + short_num(a1.K_bound) + ";V=" + short_num(a1.V_val) +
             ";V_bound=" + short_num(a1.V_bound),
         a1.ok);

    if (idx.j_n >= 1) {
      const ThetaTauAudit tt = audit_theta_tau(truth, prior, idx.j_n, n, audit);
      emit("theta_tau", in, "C_min=" + short_num(tt.C_min) + ";ceiling=" + short_num(tt.ceiling), tt.ok);
    } else {
      emit("theta_tau", in, "j_n=0", false);
    }

    if (idx.k_n >= 1) {
      const NormTailAudit nt = audit_lemma2_norm_tail(prior, idx.k_n, Q, n, draws, seed);
      emit("lemma2_norm_tail", in + ";k_n=" + std::to_string(idx.k_n) + ";Q=" + short_num(Q),
           "estimate=" + short_num(nt.estimate) + ";se=" + short_num(nt.se) + ";chernoff=" + short_num(nt.chernoff),
           nt.estimate <= nt.chernoff + 4.0 * nt.se);
    } else {
      emit("lemma2_norm_tail", in, "k_n=0", false);
    }
  }

  for (double lambda : lambdas) {
    SievePriorConfig p = prior;
    p.lambda = lambda;
    const PriorTailAudit pa = guarded("prior_tail.lambdas", [&] {
      p.validate();
      return audit_prior_tail(p, k_check);
    });
    emit("prior_tail", "lambda=" + short_num(lambda) + ";k_check=" + std::to_string(k_check),
         "a_fit=" + short_num(pa.a_fit) + ";b_fit=" + short_num(pa.b_fit), pa.ok);
  }

  CommandResult out;
  out.files["audit.csv"] = os.str();
  out.exit_code = all_ok ? kOk : kAuditFailure;
  return out;
}

}  // namespace sievelab::cli
