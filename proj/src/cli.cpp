#include "mkvlevy/cli.hpp"

#include "mkvlevy/drifts.hpp"
#include "mkvlevy/ergodicity.hpp"
#include "mkvlevy/fpke.hpp"
#include "mkvlevy/harnack.hpp"
#include "mkvlevy/levy_noise.hpp"
#include "mkvlevy/mkv.hpp"
#include "mkvlevy/parallel.hpp"
#include "mkvlevy/sde_core.hpp"
#include "mkvlevy/subordinator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

namespace mkvlevy::cli {

using nlohmann::json;

// ---------------------------------------------------------------------------------------------
// source map

namespace {

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

struct Frame {
  bool object = false;
  std::string prefix;
  std::string key;
  std::size_t index = 0;
  bool want_key = false;
};

}  // namespace

SourceMap SourceMap::scan(const std::string& text) {
  SourceMap map;
  std::vector<Frame> stack;
  int line = 1;
  std::size_t i = 0;
  const auto here = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.prefix + "/" + (f.object ? escape_token(f.key) : std::to_string(f.index));
  };
  const auto read_string = [&]() {
    std::string s;
    ++i;
    while (i < text.size() && text[i] != '"') {
      if (text[i] == '\\' && i + 1 < text.size()) {
        s += text[i + 1];
        i += 2;
        continue;
      }
      if (text[i] == '\n') ++line;
      s += text[i++];
    }
    ++i;
    return s;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == ':') {
      ++i;
    } else if (c == ',') {
      if (!stack.empty()) {
        if (stack.back().object) stack.back().want_key = true;
        else ++stack.back().index;
      }
      ++i;
    } else if (c == '{' || c == '[') {
      const std::string p = here();
      map.lines_.emplace(p, line);
      Frame f;
      f.object = c == '{';
      f.prefix = p;
      f.want_key = f.object;
      stack.push_back(f);
      ++i;
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
      ++i;
    } else if (c == '"') {
      if (!stack.empty() && stack.back().object && stack.back().want_key) {
        const int at = line;
        stack.back().key = read_string();
        stack.back().want_key = false;
        map.lines_.emplace(here(), at);
      } else {
        map.lines_.emplace(here(), line);
        read_string();
      }
    } else {
      map.lines_.emplace(here(), line);
      while (i < text.size() && text[i] != ',' && text[i] != '}' && text[i] != ']' && text[i] != '\n') ++i;
    }
  }
  return map;
}

int SourceMap::line_of(const std::string& pointer) const {
  std::string p = pointer;
  while (true) {
    auto it = lines_.find(p);
    if (it != lines_.end()) return it->second;
    if (p.empty()) return 0;
    p = p.substr(0, p.rfind('/'));
  }
}

ConfigError::ConfigError(const std::string& origin, int line, const std::string& pointer, const std::string& message)
    : std::runtime_error(origin + ":" + std::to_string(line) + ": " + (pointer.empty() ? "/" : pointer) + ": " +
                         message),
      line_(line),
      pointer_(pointer) {}

// ---------------------------------------------------------------------------------------------
// envelope

std::vector<std::string> experiment_kinds() {
  return {"subcheck",    "moments",      "picard",  "contraction",     "invariant",
          "harnack_log", "harnack_power", "entropy", "fpke_correspond", "fpke_stability"};
}

namespace {

struct Ctx {
  const ExperimentConfig& cfg;

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    throw ConfigError(cfg.origin, cfg.source.line_of(pointer), pointer, message);
  }
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  cfg.origin = origin;
  try {
    cfg.document = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < upto; ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError(origin, line, "", std::string("malformed JSON: ") + e.what());
  }
  cfg.source = SourceMap::scan(text);
  const Ctx ctx{cfg};
  const json& d = cfg.document;
  if (!d.is_object()) ctx.fail("", "config must be a JSON object");
  for (const auto& [k, v] : d.items()) {
    if (k != "kind" && k != "seed" && k != "parameters") ctx.fail("/" + escape_token(k), "unknown top-level key");
  }
  if (!d.contains("kind") || !d["kind"].is_string()) ctx.fail("/kind", "\"kind\" must be a string");
  cfg.kind = d["kind"].get<std::string>();
  const auto kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
    ctx.fail("/kind", "unknown experiment kind \"" + cfg.kind + "\"");
  if (d.contains("seed")) {
    if (!d["seed"].is_number_unsigned()) ctx.fail("/seed", "\"seed\" must be a nonnegative integer");
    cfg.seed = d["seed"].get<std::uint64_t>();
  }
  if (!d.contains("parameters") || !d["parameters"].is_object()) ctx.fail("/parameters", "\"parameters\" must be an object");
  if (d["parameters"].empty()) ctx.fail("/parameters", "parameters are empty");
  cfg.parameters = d["parameters"];
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "", "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.document["seed"] = seed;
}

std::string config_digest(const json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------------------------
// parameter readers

namespace {

class Params {
 public:
  Params(const Ctx& ctx, const json& obj, std::string pointer, std::set<std::string> allowed)
      : ctx_(ctx), obj_(obj), ptr_(std::move(pointer)) {
    for (const auto& [k, v] : obj_.items()) {
      if (!allowed.count(k)) ctx_.fail(at(k), "unknown parameter \"" + k + "\"");
    }
  }

  std::string at(const std::string& key) const { return ptr_ + "/" + escape_token(key); }
  bool has(const std::string& key) const { return obj_.contains(key); }
  const json& raw(const std::string& key) const {
    if (!obj_.contains(key)) ctx_.fail(at(key), "missing required parameter \"" + key + "\"");
    return obj_.at(key);
  }
  [[noreturn]] void fail(const std::string& key, const std::string& message) const { ctx_.fail(at(key), message); }

  double number(const std::string& key, std::optional<double> def, const std::function<bool(double)>& ok,
                const char* what) const {
    if (!obj_.contains(key)) {
      if (!def) fail(key, std::string("missing required parameter (") + what + ")");
      return *def;
    }
    const json& v = obj_.at(key);
    if (!v.is_number()) fail(key, std::string("expected a number (") + what + ")");
    const double x = v.get<double>();
    if (!std::isfinite(x) || !ok(x)) fail(key, std::string("out of range: expected ") + what);
    return x;
  }

  std::size_t count(const std::string& key, std::optional<std::size_t> def, std::size_t min = 1) const {
    if (!obj_.contains(key)) {
      if (!def) fail(key, "missing required parameter (integer)");
      return *def;
    }
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned() || v.get<std::size_t>() < min)
      fail(key, "expected an integer >= " + std::to_string(min));
    return v.get<std::size_t>();
  }

  std::string text(const std::string& key, std::optional<std::string> def, const std::vector<std::string>& choices) const {
    if (!obj_.contains(key)) {
      if (!def) fail(key, "missing required parameter (string)");
      return *def;
    }
    const json& v = obj_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    const std::string s = v.get<std::string>();
    if (!choices.empty() && std::find(choices.begin(), choices.end(), s) == choices.end()) {
      std::string all;
      for (const auto& c : choices) all += (all.empty() ? "" : ", ") + c;
      fail(key, "expected one of {" + all + "}, got \"" + s + "\"");
    }
    return s;
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def,
                              const std::function<bool(double)>& ok, const char* what) const {
    if (!obj_.contains(key)) {
      if (!def) fail(key, "missing required parameter (array of numbers)");
      return *def;
    }
    const json& v = obj_.at(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a nonempty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>()) || !ok(v[i].get<double>()))
        ctx_.fail(at(key) + "/" + std::to_string(i), std::string("expected ") + what);
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  const json& object(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_object()) fail(key, "expected an object");
    return v;
  }

 private:
  const Ctx& ctx_;
  const json& obj_;
  std::string ptr_;
};

const auto positive = [](double x) { return x > 0.0; };
const auto nonnegative = [](double x) { return x >= 0.0; };

template <class F>
auto build(const Params& p, const std::string& key, F&& make) -> decltype(make(p.raw(key))) {
  try {
    return make(p.raw(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    p.fail(key, e.what());
  }
}

int read_dim(const Params& p) {
  const std::size_t d = p.count("dim", 1);
  if (d > static_cast<std::size_t>(kMaxDim)) p.fail("dim", "dimension above " + std::to_string(kMaxDim));
  return static_cast<int>(d);
}

MkvDrift read_drift(const Params& p, int dim) {
  return build(p, "drift", [&](const json& j) {
    if (!j.is_object()) throw PreconditionError("drift must be an object with a \"name\"");
    return drift_from_json(j, dim);
  });
}

InitialLaw read_law(const Params& p, const std::string& key, int dim) {
  return build(p, key, [&](const json& j) { return initial_law_from_json(j, dim); });
}

BernsteinSpec read_bernstein(const Params& p, const std::string& key) {
  return build(p, key, [](const json& j) { return bernstein_from_json(j); });
}

Mat read_sigma(const Params& p, int dim) {
  if (!p.has("sigma")) return Mat::Identity(dim, dim);
  return build(p, "sigma", [&](const json& j) {
    if (j.is_number()) return Mat(Mat::Identity(dim, dim) * j.get<double>());
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != dim) throw PreconditionError("sigma must be dim x dim");
    Mat m(dim, dim);
    for (int r = 0; r < dim; ++r) {
      if (static_cast<int>(rows[r].size()) != dim) throw PreconditionError("sigma must be dim x dim");
      for (int c = 0; c < dim; ++c) m(r, c) = rows[r][c];
    }
    return m;
  });
}

struct NoiseSpec {
  LevyTriplet triplet;
  std::optional<BernsteinSpec> subordinator;
};

/// {"kind": "brownian"} | {"kind": "subordinate", "subordinator": {...}} | {"kind": "triplet", "triplet": {...}}
NoiseSpec read_noise(const Params& p, int dim) {
  return build(p, "noise", [&](const json& j) {
    if (!j.is_object() || !j.contains("kind")) throw PreconditionError("noise must be an object with a \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "brownian") return NoiseSpec{LevyTriplet::brownian(dim), std::nullopt};
    if (kind == "subordinate") {
      BernsteinSpec s = bernstein_from_json(j.at("subordinator"));
      return NoiseSpec{LevyTriplet::subordinate(dim, s), s};
    }
    if (kind == "triplet") {
      LevyTriplet t = triplet_from_json(j.at("triplet"));
      if (t.dim() != dim) throw PreconditionError("triplet dimension does not match \"dim\"");
      std::optional<BernsteinSpec> s;
      if (auto* sg = std::get_if<jumps::SubordinateGaussian>(&t.jumps)) s = sg->subordinator;
      return NoiseSpec{t, s};
    }
    throw PreconditionError("unknown noise kind \"" + kind + "\" (brownian, subordinate, triplet)");
  });
}

// Metadata gates that run before any simulation.
void require_h1prime(const Params& p, const std::string& key, const BernsteinSpec& spec, double theta) {
  const H1PrimeCheck h = check_h1prime(spec, theta);
  if (!h.holds) {
    std::ostringstream os;
    os << "(H1') fails for theta = " << theta << ": " << h.detail;
    p.fail(key, os.str());
  }
}

void require_h3_h4(const Params& p, const MkvDrift& drift, int dim, double T, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, {0x4d455441ULL});
  const AssumptionCheck h3 = check_h3(drift, dim, T, rng);
  if (!h3.holds) p.fail("drift", "(H3) monotonicity metadata violated: " + h3.detail);
  const AssumptionCheck h4 = check_h4(drift, dim, T, rng);
  if (!h4.holds) p.fail("drift", "(H4) growth metadata violated: " + h4.detail);
}

double read_theta(const Params& p, MkvDrift& drift) {
  if (p.has("theta")) drift.theta = p.number("theta", std::nullopt, [](double x) { return x >= 1.0; }, "theta >= 1");
  return drift.theta;
}

json verdict_json(Verdict v) { return to_string(v); }

int exit_for(Verdict v) {
  switch (v) {
    case Verdict::Pass: return kPass;
    case Verdict::Inconclusive: return kInconclusive;
    default: return kFail;
  }
}

std::string csv_number(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

template <class T>
std::string to_csv_text(const T& thing) {
  std::ostringstream os;
  write_csv(os, thing);
  return os.str();
}

struct Outcome {
  json summary;
  Verdict verdict = Verdict::Fail;
  std::vector<Artifact> artifacts;
};

using Runner = std::function<Outcome()>;

// ---------------------------------------------------------------------------------------------
// kinds. Each parse_* validates everything and returns the deferred computation.

Runner parse_subcheck(const Ctx& ctx) {
  const Params p(ctx, ctx.cfg.parameters, "/parameters", {"subordinator", "times", "r", "paths", "theta"});
  const BernsteinSpec spec = read_bernstein(p, "subordinator");
  const auto times = p.numbers("times", std::vector<double>{0.5, 1.0}, positive, "positive times");
  const auto rs = p.numbers("r", std::vector<double>{0.5, 1.0, 2.0}, positive, "positive r");
  const std::size_t n = p.count("paths", 100000, 2);
  std::optional<double> theta;
  if (p.has("theta")) {
    theta = p.number("theta", std::nullopt, [](double x) { return x >= 1.0; }, "theta >= 1");
    require_h1prime(p, "theta", spec, *theta);
  }
  const std::uint64_t seed = ctx.cfg.seed;
  return [=]() {
    Outcome out;
    const SubordinatorIncrementSampler sampler(spec);
    json rows = json::array();
    std::ostringstream csv;
    csv << "t,r,mc_mean,se,exact,abs_diff,pass\n";
    bool all = true;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      std::vector<double> S(n);
      parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
          Rng rng = Rng::stream(seed, {tags::kPath, ti, k});
          S[k] = sampler.next(times[ti], rng);
        }
      });
      for (double r : rs) {
        double s1 = 0.0, s2 = 0.0;
        for (double x : S) {
          const double v = std::exp(-r * x);
          s1 += v;
          s2 += v * v;
        }
        const double mean = s1 / n;
        const double se = std::sqrt(std::max(0.0, s2 / n - mean * mean) / (n - 1));
        const double exact = std::exp(-times[ti] * laplace_exponent(spec, r));
        const double diff = std::abs(mean - exact);
        // 4 standard errors, plus rounding room for the deterministic pure-drift case
        const bool ok = diff <= 4.0 * se + 1e-12;
        all = all && ok;
        rows.push_back({{"t", times[ti]}, {"r", r}, {"mc_mean", mean}, {"se", se}, {"exact", exact}, {"pass", ok}});
        csv << csv_number(times[ti]) << ',' << csv_number(r) << ',' << csv_number(mean) << ',' << csv_number(se) << ','
            << csv_number(exact) << ',' << csv_number(diff) << ',' << (ok ? 1 : 0) << '\n';
      }
    }
    out.summary = {{"subordinator", to_json(spec)}, {"paths", n}, {"laplace_checks", rows}, {"sigma_multiplier", 4.0}};
    if (theta) {
      const H1PrimeCheck h = check_h1prime(spec, *theta);
      out.summary["h1prime"] = {{"theta", *theta}, {"holds", h.holds}, {"diagnostic", h.diagnostic}, {"detail", h.detail}};
    }
    out.verdict = all ? Verdict::Pass : Verdict::Fail;
    out.artifacts.push_back({"subcheck.csv", csv.str()});
    return out;
  };
}

Runner parse_moments(const Ctx& ctx) {
  const Params p(ctx, ctx.cfg.parameters, "/parameters",
                 {"dim", "drift", "noise", "sigma", "x0", "T", "dt", "paths", "theta", "tolerance"});
  const int dim = read_dim(p);
  MkvDrift drift = read_drift(p, dim);
  if (drift.law_dependent && drift.name != "zero" && drift.name != "constant" && drift.name != "ou")
    p.fail("drift", "moments runs a single SDE; the drift must not depend on the law");
  const NoiseSpec noise = read_noise(p, dim);
  const Mat sigma = read_sigma(p, dim);
  const double T = p.number("T", 1.0, positive, "T > 0");
  const double dt = p.number("dt", 0.01, [T](double x) { return x > 0.0 && x <= T; }, "0 < dt <= T");
  const std::size_t n = p.count("paths", 100000, 2);
  const double theta = p.number("theta", 1.0, [](double x) { return x >= 1.0; }, "theta >= 1");
  const double tol = p.number("tolerance", 0.05, positive, "positive relative tolerance");
  if (noise.subordinator) require_h1prime(p, "noise", *noise.subordinator, theta);
  Vec x0 = Vec::Zero(dim);
  if (p.has("x0")) {
    x0 = build(p, "x0", [&](const json& j) {
      Vec v(dim);
      if (j.is_number()) return Vec(Vec::Constant(dim, j.get<double>()));
      const auto xs = j.get<std::vector<double>>();
      if (static_cast<int>(xs.size()) != dim) throw PreconditionError("x0 has the wrong length");
      for (int k = 0; k < dim; ++k) v[k] = xs[k];
      return v;
    });
  }
  require_h3_h4(p, drift, dim, T, ctx.cfg.seed);
  const std::uint64_t seed = ctx.cfg.seed;
  return [=]() {
    Outcome out;
    ParticleEnsemble at;
    at.dim = dim;
    at.points = {x0};
    const DriftField field = freeze(drift, moments_of(at, drift.theta));
    const NoiseModel model(noise.triplet);
    const TimeGrid grid = uniform_grid(T, static_cast<std::size_t>(std::llround(T / dt)));
    BundleOptions opts;
    opts.record_stride = grid.size() - 1;
    const PathBundle first = simulate_bundle(field, constant_sigma(sigma), model, x0, grid, n, seed, opts);
    opts.first_path = n;
    const PathBundle second = simulate_bundle(field, constant_sigma(sigma), model, x0, grid, n, seed, opts);
    const double m1 = sup_moment(first, theta);
    const double m2 = 0.5 * (m1 + sup_moment(second, theta));
    const double drift_rel = std::abs(m2 - m1) / std::max(m1, 1e-300);
    const bool finite = std::isfinite(m1) && std::isfinite(m2);
    out.verdict = finite && drift_rel < tol ? Verdict::Pass : Verdict::Fail;
    out.summary = {{"theta", theta},          {"paths", n},
                   {"sup_moment_n", m1},      {"sup_moment_2n", m2},
                   {"relative_drift", drift_rel}, {"tolerance", tol},
                   {"finite", finite}};
    std::ostringstream csv;
    csv << "paths,sup_moment\n" << n << ',' << csv_number(m1) << '\n' << 2 * n << ',' << csv_number(m2) << '\n';
    out.artifacts.push_back({"moments.csv", csv.str()});
    return out;
  };
}

Runner parse_picard(const Ctx& ctx) {
  const Params p(ctx, ctx.cfg.parameters, "/parameters",
                 {"dim", "drift", "noise", "sigma", "mu0", "T", "dt", "N", "tol", "max_iter", "checkpoints", "theta",
                  "min_decreasing", "min_r2"});
  const int dim = read_dim(p);
  MkvDrift drift = read_drift(p, dim);
  const double theta = read_theta(p, drift);
  const NoiseSpec noise = read_noise(p, dim);
  const Mat sigma = read_sigma(p, dim);
  const InitialLaw mu0 = read_law(p, "mu0", dim);
  const double T = p.number("T", 1.0, positive, "T > 0");
  const double dt = p.number("dt", 0.01, [T](double x) { return x > 0.0 && x <= T; }, "0 < dt <= T");
  const std::size_t N = p.count("N", 2000, 2);
  const double tol = p.number("tol", 1e-8, positive, "tol > 0");
  const std::size_t max_iter = p.count("max_iter", 10);
  const std::size_t checkpoints = p.count("checkpoints", 20);
  const std::size_t min_dec = p.count("min_decreasing", 4);
  const double min_r2 = p.number("min_r2", 0.8, [](double x) { return x >= 0.0 && x <= 1.0; }, "r2 in [0,1]");
  if (noise.subordinator) require_h1prime(p, "noise", *noise.subordinator, theta);
  require_h3_h4(p, drift, dim, T, ctx.cfg.seed);
  const std::uint64_t seed = ctx.cfg.seed;
  return [=]() {
    Outcome out;
    Rng init = Rng::stream(seed, {tags::kInitial, 0});
    const ParticleEnsemble e0 = mu0.sample(N, init);
    const TimeGrid grid = uniform_grid(T, static_cast<std::size_t>(std::llround(T / dt)));
    const PicardResult res = picard_solve(drift, constant_sigma(sigma), e0, NoiseModel(noise.triplet), grid, seed, tol,
                                          static_cast<int>(max_iter), checkpoints);
    const PicardDecay decay = picard_decay(res.log);
    const bool ok = decay.decreasing_prefix >= min_dec && decay.slope < 0.0 && decay.r2 >= min_r2;
    out.verdict = ok ? Verdict::Pass : Verdict::Fail;
    out.summary = {{"sup_distances", res.log.sup_distances},
                   {"converged", res.converged},
                   {"decreasing_prefix", decay.decreasing_prefix},
                   {"log_slope", decay.slope},
                   {"r2", decay.r2},
                   {"fit_points", decay.fit_points},
                   {"min_decreasing", min_dec},
                   {"min_r2", min_r2},
                   {"flow", summary_json(res.flow)}};
    std::ostringstream csv;
    csv << "iteration,sup_distance\n";
    for (std::size_t k = 0; k < res.log.sup_distances.size(); ++k)
      csv << k + 1 << ',' << csv_number(res.log.sup_distances[k]) << '\n';
    out.artifacts.push_back({"picard_log.csv", csv.str()});
    out.artifacts.push_back({"picard_terminal.csv", to_csv_text(res.flow.terminal())});
    return out;
  };
}

Runner parse_contraction(const Ctx& ctx) {
  const Params p(ctx, ctx.cfg.parameters, "/parameters",
                 {"dim", "drift", "noise", "sigma", "mu0", "nu0", "T", "dt", "N", "checkpoints", "bootstrap", "theta",
                  "rate_tolerance"});
  const int dim = read_dim(p);
  MkvDrift drift = read_drift(p, dim);
  const double theta = read_theta(p, drift);
  const NoiseSpec noise = read_noise(p, dim);
  const Mat sigma = read_sigma(p, dim);
  const InitialLaw mu0 = read_law(p, "mu0", dim);
  const InitialLaw nu0 = read_law(p, "nu0", dim);
  const double T = p.number("T", 4.0, positive, "T > 0");
  const double dt = p.number("dt", 0.01, [T](double x) { return x > 0.0 && x <= T; }, "0 < dt <= T");
  const std::size_t N = p.count("N", 5000, 2);
  ContractionOptions opts;
  opts.checkpoints = p.count("checkpoints", 20);
  opts.bootstrap = static_cast<int>(p.count("bootstrap", 200, 100));
  const double rate_tol = p.number("rate_tolerance", 0.15, positive, "positive relative tolerance");
  if (noise.subordinator) require_h1prime(p, "noise", *noise.subordinator, theta);
  require_h3_h4(p, drift, dim, T, ctx.cfg.seed);
  const std::uint64_t seed = ctx.cfg.seed;
  return [=]() {
    Outcome out;
    const TimeGrid grid = uniform_grid(T, static_cast<std::size_t>(std::llround(T / dt)));
    const ContractionReport rep =
        contraction_experiment(drift, constant_sigma(sigma), NoiseModel(noise.triplet), mu0, nu0, grid, N, seed, opts);
    bool rate_ok = true;
    double rel = 0.0;
    if (rep.theory_rate > 0.0) {
      rel = std::abs(rep.fitted_rate - rep.theory_rate) / rep.theory_rate;
      rate_ok = std::isfinite(rep.fitted_rate) && rel <= rate_tol;
    }
    out.verdict = rep.bound_violations == 0 && rate_ok ? Verdict::Pass : Verdict::Fail;
    out.summary = to_json(rep);
    out.summary["rate_relative_error"] = rel;
    out.summary["rate_tolerance"] = rate_tol;
    out.artifacts.push_back({"contraction.csv", to_csv_text(rep)});
    return out;
  };
}

Runner parse_invariant(const Ctx& ctx) {
  const Params p(ctx, ctx.cfg.parameters, "/parameters",
                 {"dim", "drift", "noise", "sigma", "start", "burn_in", "dt", "N", "bootstrap", "recheck", "theta"});
  const int dim = read_dim(p);
  MkvDrift drift = read_drift(p, dim);
  const double theta = read_theta(p, drift);
  const NoiseSpec noise = read_noise(p, dim);
  const Mat sigma = read_sigma(p, dim);
  const InitialLaw start = read_law(p, "start", dim);
  const double burn = p.number("burn_in", 10.0, positive, "burn_in > 0");
  const double dt = p.number("dt", 0.01, [burn](double x) { return x > 0.0 && x <= burn; }, "0 < dt <= burn_in");
  const std::size_t N = p.count("N", 10000, 2);
  const int B = static_cast<int>(p.count("bootstrap", 200, 100));
  const double recheck = p.number("recheck", 1.0, positive, "recheck > 0");
  if (noise.subordinator) require_h1prime(p, "noise", *noise.subordinator, theta);
  if (!drift.time_homogeneous) p.fail("drift", "invariant measures need a time-homogeneous drift");
  if (!(drift.kappa1(0.0) + drift.kappa2(0.0) < 0.0)) p.fail("drift", "needs kappa = -(kappa1 + kappa2)/2 > 0");
  require_h3_h4(p, drift, dim, burn, ctx.cfg.seed);
  const std::uint64_t seed = ctx.cfg.seed;
  return [=]() {
    Outcome out;
    const NoiseModel model(noise.triplet);
    const InvariantResult inv = invariant_measure(drift, sigma, model, start, burn, dt, N, seed, B);
    const FixedPointCheck fp = fixed_point_check(drift, sigma, model, inv.ensemble, recheck, dt, mix64(seed + 1), B);
    const auto xs = inv.ensemble.coordinate(0);
    double m = 0.0, v = 0.0;
    for (double x : xs) m += x / xs.size();
    for (double x : xs) v += (x - m) * (x - m) / (xs.size() - 1);
    json log = json::array();
    std::ostringstream csv;
    csv << "t,distance,se\n";
    for (const auto& e : inv.log) {
      log.push_back({{"t", e.t}, {"distance", e.distance}, {"se", e.se}});
      csv << csv_number(e.t) << ',' << csv_number(e.distance) << ',' << csv_number(e.se) << '\n';
    }
    out.verdict = fp.pass ? Verdict::Pass : Verdict::Fail;
    out.summary = {{"mean", m},
                   {"variance", v},
                   {"converged", inv.converged},
                   {"log", log},
                   {"fixed_point", {{"distance", fp.distance}, {"se", fp.se}, {"pass", fp.pass}}}};
    out.artifacts.push_back({"invariant_log.csv", csv.str()});
    out.artifacts.push_back({"invariant_ensemble.csv", to_csv_text(inv.ensemble)});
    return out;
  };
}

Runner parse_harnack(const Ctx& ctx, const std::string& kind) {
  const Params p(ctx, ctx.cfg.parameters, "/parameters",
                 {"dim", "drift", "mu0", "nu0", "subordinator", "T", "dt", "eps", "p", "sigma", "contact_threshold",
                  "variant", "xi_kernel", "f", "runs", "cost_paths", "theta", "coupling_runs"});
  const int dim = read_dim(p);
  MkvDrift drift = read_drift(p, dim);
  const double theta = read_theta(p, drift);
  const InitialLaw mu0 = read_law(p, "mu0", dim);
  const InitialLaw nu0 = read_law(p, "nu0", dim);
  HarnackConfig hc;
  hc.subordinator = read_bernstein(p, "subordinator");
  hc.T = p.number("T", 1.0, positive, "T > 0");
  hc.dt = p.number("dt", 0.01, [&](double x) { return x > 0.0 && x <= hc.T; }, "0 < dt <= T");
  hc.eps = p.number("eps", 0.1, [](double x) { return x > 0.0 && x < 1.0; }, "eps in (0,1)");
  hc.p = p.number("p", 2.0, [](double x) { return x > 1.0; }, "p > 1");
  hc.sigma = read_sigma(p, dim);
  hc.contact_threshold = p.number("contact_threshold", 1e-4, positive, "positive threshold");
  hc.variant = k_variant_from_string(p.text("variant", "printed", {"printed", "derived"}));
  hc.xi_kernel = p.text("xi_kernel", "at_horizon", {"at_t", "at_horizon"}) == "at_t" ? XiKernel::AtT : XiKernel::AtHorizon;
  hc.f = test_function(p.text("f", "one_plus_gaussian", test_function_names()));
  hc.cost_paths = p.count("cost_paths", 10000, 100);
  const std::size_t runs = p.count("runs", 20000, 1000);
  const std::size_t coupling_n = kind == "harnack_log" ? p.count("coupling_runs", 0, 0) : 0;
  if (coupling_n > 0 && coupling_n < 1000) p.fail("coupling_runs", "expected 0 or at least 1000 runs");
  if (kind != "harnack_log" && p.has("coupling_runs")) p.fail("coupling_runs", "only harnack_log reports coupling runs");
  require_h1prime(p, "subordinator", hc.subordinator, theta);
  if (hc.f.lower_bound < 1.0 && kind != "harnack_power") p.fail("f", "log-Harnack needs f >= 1");
  require_h3_h4(p, drift, dim, hc.T, ctx.cfg.seed);
  try {
    check_h5(hc);
  } catch (const std::exception& e) {
    p.fail("sigma", std::string("(H5) ") + e.what());
  }
  const std::uint64_t seed = ctx.cfg.seed;
  return [=]() {
    Outcome out;
    const HarnackSetup setup = prepare_harnack(hc, drift, mu0, nu0, runs, seed);
    InequalityReport rep;
    if (kind == "harnack_log") rep = log_harnack_check(setup);
    else if (kind == "harnack_power") rep = power_harnack_check(setup, mix64(seed + 5));
    else rep = entropy_cost_check(setup, runs, mix64(seed + 6));
    out.verdict = rep.verdict;
    out.summary = to_json(rep);
    out.summary["K_variant"] = to_string(hc.variant);
    out.summary["xi_kernel"] = hc.xi_kernel == XiKernel::AtT ? "at_t" : "at_horizon";
    if (coupling_n > 0) {
      const auto cr = coupling_runs(setup, coupling_n, mix64(seed + 7));
      const GirsanovCheck g = girsanov_mean_check(cr);
      std::size_t closed = 0, bracket_violations = 0;
      double max_gap = 0.0;
      for (const auto& r : cr) {
        if (r.tau && *r.tau <= hc.T) ++closed;
        if (r.M_bracket > r.bracket_bound) ++bracket_violations;
        max_gap = std::max(max_gap, r.final_gap);
      }
      out.summary["coupling"] = {{"runs", coupling_n},
                                 {"closed_fraction", static_cast<double>(closed) / coupling_n},
                                 {"max_final_gap", max_gap},
                                 {"bracket_violations", bracket_violations},
                                 {"mean_R", g.mean},
                                 {"mean_R_se", g.se},
                                 {"girsanov_pass", g.pass}};
      CouplingOptions rec;
      rec.record_paths = true;
      rec.kernels = &setup.kernels;
      const auto example = coupling_runs(setup, 1, mix64(seed + 7), rec);
      out.artifacts.push_back({"coupling_example.csv", to_csv_text(example.front())});
    }
    std::ostringstream csv;
    csv << "sample,inverse_cost\n";
    for (std::size_t k = 0; k < setup.cost.samples.size(); ++k)
      csv << k << ',' << csv_number(setup.cost.samples[k]) << '\n';
    out.artifacts.push_back({"inverse_cost.csv", csv.str()});
    return out;
  };
}

void fpke_common(const Params& p, MkvDrift& drift, double alpha, double theta) {
  if (!(alpha > 0.5 && alpha < 1.0)) p.fail("alpha", "alpha must lie in (1/2, 1)");
  require_h1prime(p, "alpha", BernsteinSpec::stable(alpha), theta);
  (void)drift;
}

Runner parse_fpke_correspond(const Ctx& ctx) {
  const Params p(ctx, ctx.cfg.parameters, "/parameters",
                 {"drift", "mu0", "T", "L", "alpha", "dx", "particles", "particle_dt", "replicates", "tolerance", "theta"});
  MkvDrift drift = read_drift(p, 1);
  const double theta = read_theta(p, drift);
  const InitialLaw mu0 = read_law(p, "mu0", 1);
  const double T = p.number("T", 1.0, nonnegative, "T >= 0");
  CorrespondenceConfig cc;
  cc.L = p.number("L", 20.0, positive, "L > 0");
  cc.alpha = p.number("alpha", 0.9, positive, "alpha in (1/2,1)");
  cc.dx = p.numbers("dx", cc.dx, positive, "positive spacing");
  std::vector<double> parts;
  for (std::size_t n : cc.particles) parts.push_back(static_cast<double>(n));
  parts = p.numbers("particles", parts, [](double x) { return x >= 2.0 && x == std::floor(x); }, "integer >= 2");
  cc.particles.clear();
  for (double x : parts) cc.particles.push_back(static_cast<std::size_t>(x));
  if (cc.particles.size() != cc.dx.size()) p.fail("particles", "need one particle count per grid spacing in \"dx\"");
  for (double dx : cc.dx)
    if (dx > cc.L) p.fail("dx", "grid spacing larger than L");
  cc.particle_dt = p.number("particle_dt", 0.01, positive, "positive step");
  cc.replicates = p.count("replicates", cc.replicates);
  cc.tolerance = p.number("tolerance", 5e-2, positive, "positive tolerance");
  fpke_common(p, drift, cc.alpha, theta);
  require_h3_h4(p, drift, 1, std::max(T, 1e-9), ctx.cfg.seed);
  const std::uint64_t seed = ctx.cfg.seed;
  return [=]() {
    Outcome out;
    const CorrespondenceReport rep = correspondence_check(cc, drift, mu0, T, seed);
    out.verdict = rep.pass ? Verdict::Pass : Verdict::Fail;
    out.summary = to_json(rep);
    std::ostringstream csv;
    csv << "particles,cells,dx,w1_median,w1_mean,w1_mean_se,leaked\n";
    for (const auto& r : rep.rows)
      csv << r.particles << ',' << r.cells << ',' << csv_number(r.dx) << ',' << csv_number(r.distance) << ','
          << csv_number(r.mean) << ',' << csv_number(r.se) << ',' << csv_number(r.leaked) << '\n';
    out.artifacts.push_back({"correspondence.csv", csv.str()});
    const Grid1D grid = make_grid(cc.L, cc.dx.back(), cc.alpha);
    const FpkeSolver solver(grid);
    const FpkeTrajectory tr = fpke_solve(solver, drift, density_from_law(grid, mu0), T);
    std::ostringstream dens;
    write_csv(dens, grid, tr.snapshots.back());
    out.artifacts.push_back({"density_T.csv", dens.str()});
    return out;
  };
}

Runner parse_fpke_stability(const Ctx& ctx) {
  const Params p(ctx, ctx.cfg.parameters, "/parameters",
                 {"drift", "mu0", "nu0", "T", "L", "alpha", "dx", "checkpoints", "slack", "theta"});
  MkvDrift drift = read_drift(p, 1);
  const double theta = read_theta(p, drift);
  const InitialLaw mu0 = read_law(p, "mu0", 1);
  const InitialLaw nu0 = read_law(p, "nu0", 1);
  const double T = p.number("T", 1.0, positive, "T > 0");
  const double L = p.number("L", 20.0, positive, "L > 0");
  const double alpha = p.number("alpha", 0.9, positive, "alpha in (1/2,1)");
  const double dx = p.number("dx", 0.05, [L](double x) { return x > 0.0 && x <= L; }, "0 < dx <= L");
  const std::size_t checkpoints = p.count("checkpoints", 10);
  const double slack = p.number("slack", 0.1, nonnegative, "slack >= 0");
  fpke_common(p, drift, alpha, theta);
  require_h3_h4(p, drift, 1, T, ctx.cfg.seed);
  return [=]() {
    Outcome out;
    const Grid1D grid = make_grid(L, dx, alpha);
    const FpkeSolver solver(grid);
    const StabilityReport rep = fpke_stability_check(solver, drift, mu0, nu0, T, checkpoints, slack);
    out.verdict = rep.pass ? Verdict::Pass : Verdict::Fail;
    out.summary = to_json(rep);
    out.summary["grid"] = to_json(grid);
    std::ostringstream csv;
    csv << "t,w1,bound\n";
    for (std::size_t k = 0; k < rep.times.size(); ++k)
      csv << csv_number(rep.times[k]) << ',' << csv_number(rep.distances[k]) << ',' << csv_number(rep.bounds[k]) << '\n';
    out.artifacts.push_back({"stability.csv", csv.str()});
    return out;
  };
}

Runner parse_kind(const ExperimentConfig& config) {
  const Ctx ctx{config};
  const std::string& k = config.kind;
  if (k == "subcheck") return parse_subcheck(ctx);
  if (k == "moments") return parse_moments(ctx);
  if (k == "picard") return parse_picard(ctx);
  if (k == "contraction") return parse_contraction(ctx);
  if (k == "invariant") return parse_invariant(ctx);
  if (k == "harnack_log" || k == "harnack_power" || k == "entropy") return parse_harnack(ctx, k);
  if (k == "fpke_correspond") return parse_fpke_correspond(ctx);
  if (k == "fpke_stability") return parse_fpke_stability(ctx);
  ctx.fail("/kind", "unknown experiment kind \"" + k + "\"");
}

}  // namespace

void validate(const ExperimentConfig& config) { (void)parse_kind(config); }

RunResult run_experiment(const ExperimentConfig& config) {
  const Runner runner = parse_kind(config);
  RunResult res;
  json results;
  results["kind"] = config.kind;
  results["seed"] = config.seed;
  results["version"] = MKVLEVY_VERSION;
  results["config_digest"] = config_digest(config.document);
  try {
    Outcome out = runner();
    results["verdict"] = verdict_json(out.verdict);
    results["pass"] = out.verdict == Verdict::Pass;
    results["summary"] = std::move(out.summary);
    res.exit_code = exit_for(out.verdict);
    res.artifacts = std::move(out.artifacts);
  } catch (const std::exception& e) {
    results["verdict"] = "fail";
    results["pass"] = false;
    results["error"] = e.what();
    res.exit_code = kFail;
  }
  res.results = std::move(results);
  return res;
}

// ---------------------------------------------------------------------------------------------

std::string list_builtins() {
  std::ostringstream os;
  os << "drifts:\n"
        "  zero                       b = 0\n"
        "  constant(v)                b = v\n"
        "  ou(beta)                   b = -beta x\n"
        "  meanfield_ou(beta,gamma)   b = -beta x + gamma mean(mu)\n"
        "  double_well_mean(a)        b = x - |x|^2 x + a (mean(mu) - x)\n"
        "subordinators (Bernstein kinds):\n"
        "  stable(alpha)                     phi(r) = r^alpha\n"
        "  relativistic_stable(alpha,m)      phi(r) = (r + m^{1/alpha})^alpha - m\n"
        "  gamma(a)                          phi(r) = log(1 + r/a)\n"
        "  log_type(a)                       phi(r) = r log(1 + a/r)\n"
        "  pure_drift(drift)                 phi(r) = drift r\n"
        "  custom(density=shifted_pareto,n)  nu(dx) = n (1+x)^{-n-1} dx\n"
        "noise kinds:\n"
        "  brownian | subordinate(subordinator) | triplet(dim, drift, Q, jumps)\n"
        "initial laws:\n"
        "  point_mass(at) | gaussian(mean, stddev) | uniform_box(lo, hi) | csv(path)\n"
        "test functions f:\n";
  for (const auto& f : test_function_names()) os << "  " << f << '\n';
  os << "experiment kinds:\n";
  for (const auto& k : experiment_kinds()) os << "  " << k << '\n';
  return os.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

int run_command(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                unsigned threads, std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (seed) override_seed(cfg, *seed);
    validate(cfg);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  set_max_threads(threads);
  const RunResult res = run_experiment(cfg);
  try {
    std::filesystem::create_directories(out_dir);
    write_file(std::filesystem::path(out_dir) / "results.json", res.results.dump(2) + "\n");
    for (const auto& a : res.artifacts) write_file(std::filesystem::path(out_dir) / a.name, a.content);
  } catch (const std::exception& e) {
    log << "output error: " << e.what() << '\n';
    return kFail;
  }
  log << cfg.kind << ": " << res.results.value("verdict", std::string("fail"));
  if (res.results.contains("error")) log << " (" << res.results["error"].get<std::string>() << ")";
  log << '\n';
  return res.exit_code;
}

int validate_command(const std::string& config_path, std::ostream& log) {
  try {
    const ExperimentConfig cfg = load_config(config_path);
    validate(cfg);
    log << config_path << ": ok (" << cfg.kind << ", digest " << config_digest(cfg.document) << ")\n";
    return kPass;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace mkvlevy::cli
