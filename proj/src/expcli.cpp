#include "dhpd/expcli.hpp"

#include "dhpd/rng.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace dhpd::exp {

namespace fs = std::filesystem;

ConfigError::ConfigError(std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

namespace {

template <class Int>
Int parse_integer(const std::string& text) {
  Int value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw std::invalid_argument("expected an integer, got '" + text + "'");
  return value;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class T>
Field size_field(const char* key, T ExperimentConfig::*section, std::size_t T::*member) {
  return {key, [=](const ExperimentConfig& c) { return std::to_string(c.*section.*member); },
          [=](ExperimentConfig& c, const std::string& v) {
            c.*section.*member = parse_integer<std::size_t>(v);
          }};
}

template <class T>
Field seed_field(const char* key, T ExperimentConfig::*section, std::uint64_t T::*member) {
  return {key, [=](const ExperimentConfig& c) { return std::to_string(c.*section.*member); },
          [=](ExperimentConfig& c, const std::string& v) {
            c.*section.*member = parse_integer<std::uint64_t>(v);
          }};
}

template <class T>
Field real_field(const char* key, T ExperimentConfig::*section, double T::*member) {
  return {key, [=](const ExperimentConfig& c) { return io::format_real(c.*section.*member); },
          [=](ExperimentConfig& c, const std::string& v) { c.*section.*member = io::parse_real(v); }};
}

template <class T>
Field text_field(const char* key, T ExperimentConfig::*section, std::string T::*member) {
  return {key, [=](const ExperimentConfig& c) { return c.*section.*member; },
          [=](ExperimentConfig& c, const std::string& v) { c.*section.*member = v; }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      size_field("problem.n_states", &C::problem, &ProblemConfig::n_states),
      size_field("problem.n_agents", &C::problem, &ProblemConfig::n_agents),
      size_field("problem.d", &C::problem, &ProblemConfig::d),
      real_field("problem.gamma", &C::problem, &ProblemConfig::gamma),
      size_field("problem.branching", &C::problem, &ProblemConfig::branching),
      text_field("problem.features", &C::problem, &ProblemConfig::features),
      seed_field("problem.seed", &C::problem, &ProblemConfig::seed),
      real_field("problem.reward_noise", &C::problem, &ProblemConfig::reward_noise),
      text_field("topology.kind", &C::topology, &TopologyConfig::kind),
      real_field("topology.p", &C::topology, &TopologyConfig::p),
      text_field("solver.algorithm", &C::solver, &SolverConfig::algorithm),
      real_field("solver.eta1", &C::solver, &SolverConfig::eta1),
      real_field("solver.eta", &C::solver, &SolverConfig::eta),
      size_field("solver.T1", &C::solver, &SolverConfig::T1),
      size_field("solver.K", &C::solver, &SolverConfig::K),
      size_field("solver.T", &C::solver, &SolverConfig::T),
      seed_field("solver.seed", &C::solver, &SolverConfig::seed),
      {"solver.threads", [](const C& c) { return std::to_string(c.solver.threads); },
       [](C& c, const std::string& v) { c.solver.threads = parse_integer<int>(v); }},
      text_field("solver.label", &C::solver, &SolverConfig::label),
      text_field("output.directory", &C::output, &OutputConfig::directory),
      real_field("output.checkpoint_growth", &C::output, &OutputConfig::checkpoint_growth),
  };
  return table;
}

std::string fingerprint(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string join_reals(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? " " : "") + io::format_real(v(i));
  return out;
}

const std::string& require(const io::KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("manifest is missing '" + key + "'");
  return it->second;
}

Graph make_graph(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::string& kind = cfg.topology.kind;
  if (kind == "ring") return ring(cfg.problem.n_agents);
  if (kind == "complete") return complete(cfg.problem.n_agents);
  return erdos_renyi(cfg.problem.n_agents, cfg.topology.p, seed);
}

DhpdConfig dhpd_config(const ExperimentConfig& cfg, const Bundle& bundle) {
  DhpdConfig d;
  d.eta1 = cfg.solver.eta1;
  d.K = cfg.solver.K;
  d.seed = cfg.solver.seed;
  d.T1 = cfg.solver.T1
             ? cfg.solver.T1
             : reference_t1(io::parse_real(require(bundle.manifest, "Gamma")),
                            io::parse_real(require(bundle.manifest, "rho")), cfg.solver.K);
  return d;
}

Vector random_in_ball(Rng& rng, Eigen::Index d, double radius) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  return v.normalized() * r;
}

void check_fenchel(const Bundle& b, CheckReport& report) {
  Rng rng(101);
  const SaddleModel& m = b.model;
  for (std::size_t i = 0; i < 200; ++i) {
    const Vector x = random_in_ball(rng, static_cast<Eigen::Index>(m.dim()), m.radius_x());
    for (std::size_t j = 0; j < m.n_agents(); ++j) {
      const double f = local_mspbe(m, j, x);
      const double dual = psi(m, j, x, dual_maximizer(m, j, x));
      const double err = std::abs(f - dual);
      const double tol = 1e-8 * std::max(1.0, std::abs(f));
      report.add({"fenchel_equality", 0, j + 1, err, tol, err <= tol});
    }
  }
}

void check_finite_differences(const Bundle& b, CheckReport& report) {
  Rng rng(202);
  const SaddleModel& m = b.model;
  const auto d = static_cast<Eigen::Index>(m.dim());
  const double h = 1e-5;
  for (std::size_t i = 0; i < 100; ++i) {
    const std::size_t j = i % m.n_agents();
    const Vector x = random_in_ball(rng, d, m.radius_x());
    const Vector y = random_in_ball(rng, d, m.radius_y());
    const GradientPair g = population_gradient(m, j, x, y);
    Vector fx(d), fy(d);
    for (Eigen::Index c = 0; c < d; ++c) {
      Vector e = Vector::Zero(d);
      e(c) = h;
      fx(c) = (psi(m, j, x + e, y) - psi(m, j, x - e, y)) / (2.0 * h);
      fy(c) = (psi(m, j, x, y + e) - psi(m, j, x, y - e)) / (2.0 * h);
    }
    const double scale = std::max(1.0, std::sqrt(g.gx.squaredNorm() + g.gy.squaredNorm()));
    const double err = std::sqrt((fx - g.gx).squaredNorm() + (fy - g.gy).squaredNorm()) / scale;
    report.add({"finite_difference_gradient", 0, j + 1, err, 1e-5, err <= 1e-5});
  }
}

void check_mixing_time(const Bundle& b, CheckReport& report) {
  const double Gamma = io::parse_real(require(b.manifest, "Gamma"));
  const double rho = io::parse_real(require(b.manifest, "rho"));
  const Vector pi = stationary_distribution(b.chain);
  for (double T : {1e3, 1e4}) {
    const std::size_t t = mixing_time_bound(Gamma, rho, 1.0 / T);
    double worst = 0.0;
    for (std::size_t s = 0; s < b.chain.n_states(); ++s)
      worst = std::max(worst, tv_decay(b.chain, pi, s, t).back());
    report.add({"mixing_time_bound", 0, 0, worst, 1.0 / T, worst <= 1.0 / T});
  }
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

fs::path ExperimentConfig::bundle_dir() const { return fs::path(output.directory) / "bundle"; }

fs::path ExperimentConfig::run_dir() const {
  return fs::path(output.directory) / "runs" / run_label();
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(0, what); };
  const ProblemConfig& p = problem;
  if (p.n_states < 1) fail("problem.n_states must be >= 1");
  if (p.n_agents < 1) fail("problem.n_agents must be >= 1");
  if (p.d < 1 || p.d > p.n_states) fail("problem.d must lie in [1, n_states]");
  if (!(p.gamma > 0.0 && p.gamma < 1.0)) fail("problem.gamma must lie in (0, 1)");
  if (p.branching < 1 || p.branching > p.n_states) fail("problem.branching must lie in [1, n_states]");
  if (p.features != "random" && p.features != "tabular") fail("problem.features must be random or tabular");
  if (p.features == "tabular" && p.d != p.n_states) fail("tabular features need d = n_states");
  if (!(p.reward_noise >= 0.0)) fail("problem.reward_noise must be >= 0");
  if (topology.kind != "ring" && topology.kind != "complete" && topology.kind != "erdos_renyi")
    fail("topology.kind must be ring, complete or erdos_renyi");
  if (!(topology.p > 0.0 && topology.p <= 1.0)) fail("topology.p must lie in (0, 1]");
  const SolverConfig& s = solver;
  if (s.algorithm != "dhpd" && s.algorithm != "spd_central" && s.algorithm != "spd_dist")
    fail("solver.algorithm must be dhpd, spd_central or spd_dist");
  if (!(s.eta1 > 0.0)) fail("solver.eta1 must be positive");
  if (!(s.eta > 0.0)) fail("solver.eta must be positive");
  if (s.K < 1 || s.K > 30) fail("solver.K must lie in [1, 30]");
  if (s.threads < 1) fail("solver.threads must be >= 1");
  for (char c : s.label)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      fail("solver.label may only contain letters, digits, '_' and '-'");
  if (output.directory.empty()) fail("output.directory must not be empty");
  if (!(output.checkpoint_growth > 1.0)) fail("output.checkpoint_growth must exceed 1");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = io::trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'section.key = value'");
    const std::string key = io::trim(t.substr(0, eq));
    const std::string value = io::trim(t.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError(line_no, "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(line_no, "duplicate key '" + key + "'");
    try {
      it->set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(line_no, key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(io::read_file(path)); }

std::string to_string(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    const std::string key = f.key;
    const std::string sec = key.substr(0, key.find('.'));
    if (sec != section) {
      if (!section.empty()) out += '\n';
      section = sec;
    }
    out += key + " = " + f.get(cfg) + '\n';
  }
  return out;
}

ExperimentConfig reference_config() { return ExperimentConfig{}; }

std::size_t reference_t1(double Gamma, double rho, std::size_t K) {
  std::size_t t1 = 512;
  for (int iter = 0; iter < 64; ++iter) {
    const DhpdConfig cfg{0.1, t1, K, 0};
    const std::size_t tau =
        mixing_time_bound(Gamma, rho, 1.0 / static_cast<double>(cfg.total_iterations()));
    const std::size_t next = std::max<std::size_t>(tau, 512);
    if (next == t1) return t1;
    t1 = next;
  }
  throw ConvergenceError("reference_t1: no fixed point for T1");
}

std::size_t schedule_samples(const DhpdConfig& cfg) { return cfg.total_iterations() - cfg.K; }

Bundle load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.txt";
  if (!fs::exists(manifest_path))
    throw std::runtime_error("no problem bundle at " + dir.string() + "; run generate first");
  io::KeyValues manifest = io::read_key_values(manifest_path);
  const double gamma = io::parse_real(require(manifest, "gamma"));
  PolicyChain chain(io::read_matrix_csv(dir / "P.csv"), io::read_matrix_csv(dir / "rewards.csv"),
                    gamma);
  FeatureMap features = read_features_csv(dir / "features.csv");
  SaddleModel model = load_model(dir / "model");
  Matrix w = io::read_matrix_csv(dir / "W.csv");
  const double sigma2 = second_largest_modulus(w);
  return Bundle{std::move(chain), std::move(features), std::move(model),
                MixingMatrix{std::move(w), sigma2}, std::move(manifest),
                fingerprint(io::read_file(manifest_path))};
}

std::string render_svg(const std::vector<CompareCurve>& curves, const std::string& title) {
  const double width = 720, height = 480, left = 80, right = 180, top = 40, bottom = 60;
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      if (c.samples[i] == 0 || !(c.mean_gap[i] > 0.0)) continue;
      x_lo = std::min(x_lo, std::log10(static_cast<double>(c.samples[i])));
      x_hi = std::max(x_hi, std::log10(static_cast<double>(c.samples[i])));
      y_lo = std::min(y_lo, std::log10(c.mean_gap[i]));
      y_hi = std::max(y_hi, std::log10(c.mean_gap[i]));
    }
  if (!(x_lo <= x_hi)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  x_lo = std::floor(x_lo), x_hi = std::max(std::ceil(x_hi), x_lo + 1);
  y_lo = std::floor(y_lo), y_hi = std::max(std::ceil(y_hi), y_lo + 1);
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double lx) { return left + (lx - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double ly) { return top + (y_hi - ly) / (y_hi - y_lo) * ph; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt2(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << title << "</text>\n";
  for (double e = x_lo; e <= x_hi; e += 1.0) {
    os << "<line x1=\"" << fmt2(px(e)) << "\" y1=\"" << fmt2(top) << "\" x2=\"" << fmt2(px(e))
       << "\" y2=\"" << fmt2(top + ph) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << fmt2(px(e)) << "\" y=\"" << fmt2(top + ph + 18)
       << "\" text-anchor=\"middle\" font-size=\"12\">1e" << static_cast<int>(e) << "</text>\n";
  }
  for (double e = y_lo; e <= y_hi; e += 1.0) {
    os << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(py(e)) << "\" x2=\"" << fmt2(left + pw)
       << "\" y2=\"" << fmt2(py(e)) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << fmt2(left - 8) << "\" y=\"" << fmt2(py(e) + 4)
       << "\" text-anchor=\"end\" font-size=\"12\">1e" << static_cast<int>(e) << "</text>\n";
  }
  os << "<rect x=\"" << fmt2(left) << "\" y=\"" << fmt2(top) << "\" width=\"" << fmt2(pw)
     << "\" height=\"" << fmt2(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << fmt2(left + pw / 2) << "\" y=\"" << fmt2(height - 16)
     << "\" text-anchor=\"middle\" font-size=\"13\">samples</text>\n";
  os << "<text x=\"18\" y=\"" << fmt2(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"13\""
     << " transform=\"rotate(-90 18 " << fmt2(top + ph / 2) << ")\">mean optimality gap</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = palette[c % (sizeof palette / sizeof *palette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < curves[c].samples.size(); ++i) {
      if (curves[c].samples[i] == 0 || !(curves[c].mean_gap[i] > 0.0)) continue;
      os << (first ? "" : " ") << fmt2(px(std::log10(static_cast<double>(curves[c].samples[i]))))
         << ',' << fmt2(py(std::log10(curves[c].mean_gap[i])));
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 16 + 20 * static_cast<double>(c);
    os << "<line x1=\"" << fmt2(left + pw + 12) << "\" y1=\"" << fmt2(ly) << "\" x2=\""
       << fmt2(left + pw + 36) << "\" y2=\"" << fmt2(ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fmt2(left + pw + 42) << "\" y=\"" << fmt2(ly + 4) << "\" font-size=\"12\">"
       << curves[c].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

int cmd_generate(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const ProblemConfig& p = cfg.problem;
  Rng master(p.seed);
  const std::uint64_t chain_seed = master.split();
  const std::uint64_t feature_seed = master.split();
  const std::uint64_t graph_seed = master.split();

  const PolicyChain chain = random_ergodic_chain(p.n_states, p.n_agents, p.branching, chain_seed, p.gamma);
  const FeatureMap features =
      p.features == "tabular" ? tabular_features(p.n_states) : random_features(p.n_states, p.d, feature_seed);
  const RewardNoise noise{p.reward_noise};
  const SaddleModel model = population_model(chain, features);
  const Graph graph = make_graph(cfg, graph_seed);
  const MixingMatrix mixing = laplacian_mixing(graph);
  const Vector pi = stationary_distribution(chain);
  const ProblemConstants k = constants(model, compute_bounds(features, chain, noise));
  const MixingEstimate mix = estimate_mixing(chain);

  DhpdConfig schedule;
  schedule.K = cfg.solver.K;
  schedule.T1 = cfg.solver.T1 ? cfg.solver.T1 : reference_t1(mix.Gamma, mix.rho, cfg.solver.K);
  const std::size_t T = schedule.total_iterations();
  const std::size_t tau = mixing_time_bound(mix.Gamma, mix.rho, 1.0 / static_cast<double>(T));

  const fs::path dir = cfg.bundle_dir();
  io::write_matrix_csv(dir / "P.csv", chain.transition());
  io::write_matrix_csv(dir / "rewards.csv", chain.rewards());
  write_features_csv(dir / "features.csv", features);
  save_model(dir / "model", model);
  write_edge_list(dir / "graph.txt", graph);
  io::write_matrix_csv(dir / "W.csv", mixing.W);

  io::KeyValues m;
  m["n_states"] = std::to_string(p.n_states);
  m["n_agents"] = std::to_string(p.n_agents);
  m["dim"] = std::to_string(features.dim());
  m["gamma"] = io::format_real(p.gamma);
  m["features"] = p.features;
  m["seed"] = std::to_string(p.seed);
  m["reward_noise"] = io::format_real(p.reward_noise);
  m["topology"] = cfg.topology.kind;
  m["edges"] = std::to_string(graph.edges().size());
  m["stationary"] = join_reals(pi);
  m["sigma2"] = io::format_real(mixing.sigma2);
  m["rho_cert"] = io::format_real(k.rho_cert);
  m["rho_x_formula"] = io::format_real(k.rho_x_formula);
  m["rho_y"] = io::format_real(k.rho_y);
  m["G"] = io::format_real(k.G);
  m["G_formula"] = io::format_real(k.G_formula);
  m["L"] = io::format_real(k.L);
  m["R"] = io::format_real(k.R);
  m["radius_x"] = io::format_real(model.radius_x());
  m["radius_y"] = io::format_real(model.radius_y());
  m["Gamma"] = io::format_real(mix.Gamma);
  m["rho"] = io::format_real(mix.rho);
  m["K"] = std::to_string(schedule.K);
  m["T1"] = std::to_string(schedule.T1);
  m["T"] = std::to_string(T);
  m["tau"] = std::to_string(tau);
  io::write_key_values(dir / "manifest.txt", m);

  log << "wrote bundle to " << dir.string() << " (|S|=" << p.n_states << ", N=" << p.n_agents
      << ", d=" << features.dim() << ", sigma2=" << io::format_real(mixing.sigma2)
      << ", tau=" << tau << ", T1=" << schedule.T1 << ")\n";
  return 0;
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Bundle bundle = load_bundle(cfg.bundle_dir());
  const GapEvaluator evaluator(bundle.model);
  const GapOracle gap = [&evaluator](const Vector& x) { return evaluator(x); };
  const double Gamma = io::parse_real(require(bundle.manifest, "Gamma"));
  const double rho = io::parse_real(require(bundle.manifest, "rho"));

  const DhpdConfig schedule = dhpd_config(cfg, bundle);
  RunOptions options;
  options.execution = Execution::parallel;
  options.threads = cfg.solver.threads;
  options.checkpoint_growth = cfg.output.checkpoint_growth;
  options.noise = RewardNoise{io::parse_real(require(bundle.manifest, "reward_noise"))};
  options.rho_x = evaluator.rho_cert();
  options.rho_y = bundle.model.lambda_min_c();
  options.tau =
      mixing_time_bound(Gamma, rho, 1.0 / static_cast<double>(schedule.total_iterations()));

  const std::string& algorithm = cfg.solver.algorithm;
  const std::size_t T = cfg.solver.T ? cfg.solver.T : schedule_samples(schedule) + 1;
  io::KeyValues meta;
  meta["algorithm"] = algorithm;
  meta["label"] = cfg.run_label();
  meta["seed"] = std::to_string(cfg.solver.seed);
  meta["topology"] = require(bundle.manifest, "topology");
  meta["sigma2"] = io::format_real(bundle.mixing.sigma2);
  meta["manifest"] = bundle.fingerprint;

  RunTrace trace;
  try {
    if (algorithm == "dhpd") {
      trace = dhpd_run(bundle.model, bundle.chain, bundle.features, bundle.mixing, schedule, gap, options);
      meta["eta1"] = io::format_real(schedule.eta1);
      meta["T1"] = std::to_string(schedule.T1);
      meta["K"] = std::to_string(schedule.K);
    } else if (algorithm == "spd_dist") {
      trace = spd_run_distributed(bundle.model, bundle.chain, bundle.features, bundle.mixing,
                                  cfg.solver.eta, T, cfg.solver.seed, gap, options);
      meta["eta"] = io::format_real(cfg.solver.eta);
      meta["T"] = std::to_string(T);
    } else {
      trace = spd_run_centralized(bundle.model, bundle.chain, bundle.features, cfg.solver.eta, T,
                                  cfg.solver.seed, gap, options);
      meta["eta"] = io::format_real(cfg.solver.eta);
      meta["T"] = std::to_string(T);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(algorithm + " run failed: " + e.what());
  }

  meta["total_samples"] = std::to_string(trace.total_samples);
  meta["checkpoints"] = std::to_string(trace.checkpoints.size());
  meta["final_mean_gap"] = io::format_real(trace.checkpoints.back().mean_gap());
  for (std::size_t i = 0; i < trace.warnings.size(); ++i)
    meta["warning_" + std::to_string(i + 1)] = trace.warnings[i];

  const fs::path dir = cfg.run_dir();
  write_trace_csv(dir / "trace.csv", trace);
  io::write_key_values(dir / "meta.txt", meta);
  for (const auto& w : trace.warnings) log << "warning: " << w << '\n';
  log << cfg.run_label() << ": " << trace.total_samples << " samples, final mean gap "
      << meta["final_mean_gap"] << " -> " << dir.string() << '\n';
  return 0;
}

int cmd_compare(const std::vector<ExperimentConfig>& cfgs, const fs::path& out_dir,
                std::ostream& log) {
  if (cfgs.size() < 2) throw ConfigError(0, "compare needs at least two run configs");
  std::vector<CompareCurve> curves;
  std::string reference_manifest;
  for (const ExperimentConfig& cfg : cfgs) {
    const fs::path dir = cfg.run_dir();
    if (!fs::exists(dir / "trace.csv"))
      throw std::runtime_error("no run output at " + dir.string() + "; run it first");
    const io::KeyValues meta = io::read_key_values(dir / "meta.txt");
    const std::string& manifest = require(meta, "manifest");
    if (reference_manifest.empty()) reference_manifest = manifest;
    if (manifest != reference_manifest)
      throw std::runtime_error("refusing to compare runs generated from different problems (" +
                               dir.string() + ")");

    std::map<std::size_t, std::pair<double, std::size_t>> sums;
    std::istringstream in(io::read_file(dir / "trace.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = io::split(line, ',');
      if (cells.size() != 3) throw std::runtime_error("malformed trace row: " + line);
      auto& [sum, count] = sums[parse_integer<std::size_t>(cells[0])];
      sum += io::parse_real(cells[2]);
      ++count;
    }
    CompareCurve curve;
    curve.label = cfg.run_label();
    for (const auto& [samples, acc] : sums) {
      curve.samples.push_back(samples);
      curve.mean_gap.push_back(acc.first / static_cast<double>(acc.second));
    }
    curves.push_back(std::move(curve));
  }

  std::vector<std::size_t> grid = curves.front().samples;
  for (const auto& c : curves) {
    std::vector<std::size_t> both;
    std::set_intersection(grid.begin(), grid.end(), c.samples.begin(), c.samples.end(),
                          std::back_inserter(both));
    grid = std::move(both);
  }
  if (grid.empty()) throw std::runtime_error("the runs share no checkpoint sample counts");
  for (auto& c : curves) {
    CompareCurve aligned{c.label, {}, {}};
    for (std::size_t i = 0; i < c.samples.size(); ++i)
      if (std::binary_search(grid.begin(), grid.end(), c.samples[i])) {
        aligned.samples.push_back(c.samples[i]);
        aligned.mean_gap.push_back(c.mean_gap[i]);
      }
    c = std::move(aligned);
  }

  std::string csv = "samples,run,mean_gap\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (const auto& c : curves)
      csv += std::to_string(grid[i]) + ',' + c.label + ',' + io::format_real(c.mean_gap[i]) + '\n';
  const fs::path dir = out_dir / "compare";
  io::write_file(dir / "compare.csv", csv);
  io::write_file(dir / "compare.svg", render_svg(curves, "mean optimality gap vs samples"));
  for (const auto& c : curves)
    log << c.label << ": final mean gap " << io::format_real(c.mean_gap.back()) << " at "
        << grid.back() << " samples\n";
  log << "wrote " << (dir / "compare.csv").string() << " and " << (dir / "compare.svg").string()
      << '\n';
  return 0;
}

CheckReport verify_bundle(const ExperimentConfig& cfg, const Bundle& bundle) {
  CheckReport report;
  check_fenchel(bundle, report);
  check_finite_differences(bundle, report);
  check_mixing_time(bundle, report);
  report.append(verify_lemma2(100, 303));
  for (std::size_t T : {10, 100, 1000}) report.append(verify_lemma3(1.0, T, 1000, 404 + T));

  const GapEvaluator evaluator(bundle.model);
  const GapOracle gap = [&evaluator](const Vector& x) { return evaluator(x); };
  const double G = io::parse_real(require(bundle.manifest, "G"));
  RunOptions options;
  options.checkpoint_growth = cfg.output.checkpoint_growth;
  options.noise = RewardNoise{io::parse_real(require(bundle.manifest, "reward_noise"))};

  const DhpdConfig schedule = dhpd_config(cfg, bundle);
  const RunTrace reference =
      dhpd_run(bundle.model, bundle.chain, bundle.features, bundle.mixing, schedule, gap, options);
  report.append(verify_gap_ordering(bundle.model, reference));
  report.append(verify_schedule(schedule, reference));

  DhpdConfig small{cfg.solver.eta1, 64, 4, cfg.solver.seed};
  RunOptions logged = options;
  logged.log_iterates = true;
  const RunTrace trace =
      dhpd_run(bundle.model, bundle.chain, bundle.features, bundle.mixing, small, gap, logged);
  report.append(verify_lemma1(trace, bundle.mixing, bundle.model.radius_x(), G));
  report.append(verify_gap_decomposition(bundle.model, trace, G));
  report.append(verify_schedule(small, trace));
  return report;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Bundle bundle = load_bundle(cfg.bundle_dir());
  const CheckReport report = verify_bundle(cfg, bundle);
  const fs::path dir = fs::path(cfg.output.directory) / "verify";
  io::write_file(dir / "report.csv", report.to_csv());
  io::write_file(dir / "report.txt", report.to_text());
  log << report.to_text();
  log << (report.passed() ? "all checks passed" : std::to_string(report.failures()) + " checks failed")
      << " (" << report.rows().size() << " rows) -> " << (dir / "report.csv").string() << '\n';
  return report.passed() ? 0 : 1;
}

}  // namespace dhpd::exp
