#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <optional>
#include <regex>
#include <sstream>

#include "ul/annihilation.hpp"
#include "ul/errors.hpp"
#include "ul/io.hpp"
#include "ul/parallel.hpp"

namespace ul::cli {

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::optional<std::size_t> trials;
  int threads = 0;
  std::string format;
  std::string output;
  bool dry_run = false;
  bool serial = false;
};

void add_common(CLI::App* app, Common& c, const std::string& default_format) {
  c.format = default_format;
  app->add_option("--seed", c.seed, "Master seed (default 0)");
  app->add_option("--trials", c.trials, "Monte Carlo trials or repetitions")->check(CLI::PositiveNumber);
  app->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")->check(CLI::NonNegativeNumber);
  app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app->add_option("--output", c.output, "Write the artifact to this file instead of stdout");
  app->add_flag("--dry-run", c.dry_run, "Validate inputs and print the resolved plan");
  app->add_flag("--serial", c.serial, "Use the serial reference loops");
}

Json header(const std::string& command, const Common& c, std::size_t trials) {
  return {{"schema", 1}, {"command", command}, {"seed", c.seed}, {"trials", trials}};
}

Json plan_header(const std::string& command, const Common& c, std::size_t trials) {
  Json j = header(command, c, trials);
  j["dry_run"] = true;
  j["format"] = c.format;
  j["output"] = c.output.empty() ? Json(nullptr) : Json(c.output);
  j["execution"] = c.serial ? "serial" : "parallel";
  j["threads"] = c.threads;
  return j;
}

Json rotation_json(const Rotation& rho) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < rho.matrix().rows(); ++i) rows.push_back(vec_to_json(rho.matrix().row(i).transpose()));
  return rows;
}

Json lattice_json(const RandomLattice& l) { return {{"v", l.v()}, {"rho", rotation_json(l.rho())}}; }

EuclideanSet load_set(const std::string& path) { return set_from_json(read_json_file(path)); }
TestFunction load_function(const std::string& path) { return function_from_json(read_json_file(path)); }

void require_file(const std::string& path, const std::string& flag) {
  require(!path.empty(), flag + " is required");
}

class Command {
 public:
  virtual ~Command() = default;
  Common common;
  CLI::App* app = nullptr;
  // Validates inputs; returns the plan.
  virtual Json prepare() = 0;
  // Returns the artifact text; may set status to a nonzero exit code.
  virtual std::string run(int& status) = 0;
  std::size_t trials(std::size_t fallback) const { return common.trials.value_or(fallback); }
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// lal ------------------------------------------------------------------------

struct LalCommand : Command {
  std::string function_path, set_path;
  int dim = 2;
  double inner = 1.0, outer = 3.0;
  std::optional<LalIntegrand> phi;

  void setup(CLI::App* sub) {
    sub->add_option("--function", function_path, "Function document; phi = |f|");
    sub->add_option("--set", set_path, "Set document; phi = its indicator");
    sub->add_option("--dim", dim, "Dimension of the default annulus")->check(CLI::PositiveNumber);
    sub->add_option("--inner", inner, "Inner radius of the default annulus");
    sub->add_option("--outer", outer, "Outer radius of the default annulus");
  }
  Json prepare() override {
    require(function_path.empty() || set_path.empty(), "lal: give at most one of --function and --set");
    Json inputs;
    if (!function_path.empty()) {
      phi = lal_integrand(load_function(function_path));
      inputs = {{"function", function_path}};
    } else if (!set_path.empty()) {
      phi = set_indicator(load_set(set_path), 400000, substream_seed(common.seed, 0x5e7));
      inputs = {{"set", set_path}};
    } else {
      phi = annulus_indicator(dim, inner, outer);
      inputs = {{"annulus", {{"dimension", dim}, {"inner", inner}, {"outer", outer}}}};
    }
    Json plan = plan_header("lal", common, trials(10000));
    plan["inputs"] = inputs;
    plan["integrand"] = phi->name();
    return plan;
  }
  std::string run(int&) override {
    const std::size_t n = trials(10000);
    const LalReports r = verify_lal(*phi, n, common.seed);
    if (common.format == "csv") {
      CsvWriter csv({"average", "estimate", "stderr", "reference", "ratio"});
      csv.cell(std::string("dilated")).cell(r.dilated.estimate).cell(r.dilated.std_error).cell(r.dilated.reference).cell(r.dilated.ratio());
      csv.end_row();
      csv.cell(std::string("contracted")).cell(r.contracted.estimate).cell(r.contracted.std_error).cell(r.contracted.reference).cell(r.contracted.ratio());
      csv.end_row();
      return csv.str();
    }
    Json j = header("lal", common, n);
    j["integrand"] = phi->name();
    j["dimension"] = phi->dimension();
    j["dilated"] = to_json(r.dilated);
    j["contracted"] = to_json(r.contracted);
    return dump(j);
  }
};

// turan ----------------------------------------------------------------------

struct TuranCommand : Command {
  int dim = 1;
  std::optional<std::size_t> random;
  std::string poly_path, region_path;
  std::optional<TrigPolynomial> poly;
  std::optional<TorusSet> region;

  void setup(CLI::App* sub) {
    sub->add_option("--dim", dim, "Dimension of the random campaign (1 or 2)");
    sub->add_option("--random", random, "Number of random instances")->check(CLI::PositiveNumber);
    sub->add_option("--poly", poly_path, "Polynomial document for a single check");
    sub->add_option("--region", region_path, "Set document of boxes inside [0,1]^d for a single check");
  }
  Json prepare() override {
    Json plan = plan_header("turan", common, 0);
    if (!poly_path.empty() || !region_path.empty()) {
      require(!poly_path.empty() && !region_path.empty(), "turan: --poly and --region go together");
      require(!random, "turan: --random cannot be combined with --poly");
      poly = polynomial_from_json(read_json_file(poly_path));
      const EuclideanSet set = load_set(region_path);
      require(set.dimension() == poly->dimension(), "turan: region and polynomial dimensions differ");
      std::vector<AxisBox> boxes;
      for (const Piece& p : set.pieces()) {
        const auto* box = std::get_if<AxisBox>(&p);
        require(box != nullptr, "turan: region pieces must be boxes");
        boxes.push_back(*box);
      }
      region = TorusSet(set.dimension(), std::move(boxes));
      require(region->measure() > 0.0, "turan: region must have positive measure");
      plan["inputs"] = {{"poly", poly_path}, {"region", region_path}};
      plan["region_measure"] = region->measure();
    } else {
      require(dim == 1 || dim == 2, "turan: --dim must be 1 or 2 for random campaigns");
      plan["inputs"] = {{"dimension", dim}, {"random", count()}};
    }
    return plan;
  }
  std::size_t count() const { return random.value_or(trials(1000)); }

  std::string run(int& status) override {
    if (poly) return run_single(status);
    const auto rows = turan_campaign(dim, count(), common.seed);
    std::size_t violations = 0;
    for (const auto& r : rows) violations += r.holds ? 0 : 1;
    if (violations) status = kAssertion;
    if (common.format == "csv") {
      CsvWriter csv({"seed", "lhs", "rhs", "factor", "holds"});
      for (const auto& r : rows) {
        csv.cell(r.seed).cell(r.lhs).cell(r.rhs).cell(r.factor).cell(std::string(r.holds ? "true" : "false"));
        csv.end_row();
      }
      return csv.str();
    }
    Json j = header("turan", common, rows.size());
    j["dimension"] = dim;
    j["violations"] = violations;
    Json list = Json::array();
    for (const auto& r : rows)
      list.push_back({{"seed", r.seed}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"factor", number(r.factor)}, {"holds", r.holds}});
    j["rows"] = list;
    return dump(j);
  }
  std::string run_single(int& status) {
    const int d = poly->dimension();
    std::vector<std::pair<std::string, TuranCheck>> checks;
    if (d == 1) checks.emplace_back("one_dim", turan_check_1d(*poly, *region));
    checks.emplace_back("product", turan_check_multidim(*poly, *region));
    for (const auto& [name, c] : checks)
      if (!c.holds) status = kAssertion;
    if (common.format == "csv") {
      CsvWriter csv({"check", "lhs", "rhs", "factor", "measure", "holds"});
      for (const auto& [name, c] : checks) {
        csv.cell(name).cell(c.lhs).cell(c.rhs).cell(c.factor).cell(c.measure).cell(std::string(c.holds ? "true" : "false"));
        csv.end_row();
      }
      return csv.str();
    }
    const PolyOrder order = poly_order(*poly);
    Json j = header("turan", common, 1);
    j["polynomial"] = to_json(*poly);
    j["order"] = {{"per_axis", order.per_axis}, {"term_count", order.term_count},
                  {"fm_exponent", order.fm_exponent}, {"set_order", order.set_order}};
    for (const auto& [name, c] : checks)
      j[name] = {{"lhs", c.lhs},       {"lhs_upper", c.lhs_upper}, {"sup_e", c.sup_e},
                 {"sup_e_upper", c.sup_e_upper}, {"factor", number(c.factor)}, {"measure", c.measure},
                 {"rhs", number(c.rhs)}, {"holds", c.holds}};
    return dump(j);
  }
};

// periodize ------------------------------------------------------------------

struct PeriodizeCommand : Command {
  std::string function_path, sigma_path, op = "summary";
  int grid = 0;
  int m_range = 2;
  double lal_constant = kLatticeAveragingConstant;
  std::optional<TestFunction> f;
  std::optional<EuclideanSet> sigma;

  void setup(CLI::App* sub) {
    sub->add_option("--function", function_path, "Function document")->required();
    sub->add_option("--op", op, "What to compute")
        ->check(CLI::IsMember({"summary", "values", "coefficients", "energy-expectation", "tail-expectation"}));
    sub->add_option("--grid", grid, "Torus grid per axis (0: 256 for d <= 2, 64 for d = 3)")->check(CLI::NonNegativeNumber);
    sub->add_option("--m-range", m_range, "Coefficients for |m_i| <= this")->check(CLI::NonNegativeNumber);
    sub->add_option("--sigma", sigma_path, "Frequency set document (tail-expectation)");
    sub->add_option("--lal-constant", lal_constant, "Constant used in the expectation bounds")->check(CLI::PositiveNumber);
  }
  int grid_n() const { return grid > 0 ? grid : (f->dimension() <= 2 ? 256 : 64); }
  RandomLattice lattice() const {
    Rng rng = make_stream(common.seed, 0);
    return RandomLattice::draw(f->dimension(), rng);
  }
  Json prepare() override {
    f = load_function(function_path);
    Json plan = plan_header("periodize", common, op.ends_with("expectation") ? trials(1000) : 1);
    plan["inputs"] = {{"function", function_path}};
    plan["op"] = op;
    if (op == "tail-expectation") {
      require_file(sigma_path, "periodize: --sigma");
      sigma = load_set(sigma_path);
      require(sigma->dimension() == f->dimension(), "periodize: sigma dimension differs from the function's");
      plan["inputs"]["sigma"] = sigma_path;
    }
    if (op == "values" || op == "summary") {
      require(f->dimension() <= 3, "periodize: grid output needs d <= 3");
      plan["grid"] = grid_n();
    }
    if (op == "coefficients") plan["m_range"] = m_range;
    return plan;
  }
  std::string run(int&) override {
    const int d = f->dimension();
    if (op == "energy-expectation" || op == "tail-expectation") {
      const std::size_t n = trials(1000);
      const ExpectationReport r = op == "energy-expectation"
                                      ? check_energy_expectation(*f, n, common.seed, {lal_constant})
                                      : check_tail_coeff_expectation(*f, *sigma, n, common.seed, {lal_constant});
      if (common.format == "csv") {
        CsvWriter csv({"estimate", "stderr", "trials", "reference", "bound", "ratio"});
        csv.cell(r.estimate).cell(r.std_error).cell(static_cast<std::uint64_t>(r.trials)).cell(r.reference).cell(r.bound).cell(r.ratio());
        csv.end_row();
        return csv.str();
      }
      Json j = header("periodize", common, n);
      j["op"] = op;
      j["report"] = to_json(r);
      return dump(j);
    }
    const Periodization gamma(*f, lattice());
    if (op == "values") {
      const int n = grid_n();
      std::vector<std::string> cols;
      for (int i = 1; i <= d; ++i) cols.push_back("t" + std::to_string(i));
      cols.insert(cols.end(), {"re", "im"});
      CsvWriter csv(cols);
      Json values = Json::array();
      std::vector<int> idx(static_cast<std::size_t>(d), 0);
      Vec t(d);
      while (true) {
        for (int i = 0; i < d; ++i) t[i] = (idx[static_cast<std::size_t>(i)] + 0.5) / n;
        const Complex v = gamma.value(t);
        if (common.format == "csv") {
          for (int i = 0; i < d; ++i) csv.cell(t[i]);
          csv.cell(v.real()).cell(v.imag());
          csv.end_row();
        } else {
          values.push_back({{"t", vec_to_json(t)}, {"re", v.real()}, {"im", v.imag()}});
        }
        int axis = 0;
        while (axis < d && ++idx[static_cast<std::size_t>(axis)] >= n) idx[static_cast<std::size_t>(axis++)] = 0;
        if (axis == d) break;
      }
      if (common.format == "csv") return csv.str();
      Json j = header("periodize", common, 1);
      j["op"] = op;
      j["lattice"] = lattice_json(gamma.lattice());
      j["grid"] = n;
      j["values"] = values;
      return dump(j);
    }
    if (op == "coefficients") {
      std::vector<std::string> cols;
      for (int i = 1; i <= d; ++i) cols.push_back("m" + std::to_string(i));
      cols.insert(cols.end(), {"re", "im"});
      CsvWriter csv(cols);
      Json list = Json::array();
      std::vector<int> m(static_cast<std::size_t>(d), -m_range);
      while (true) {
        const Complex c = gamma.coefficient(m);
        if (common.format == "csv") {
          for (int mi : m) csv.cell(static_cast<long long>(mi));
          csv.cell(c.real()).cell(c.imag());
          csv.end_row();
        } else {
          list.push_back({{"m", m}, {"re", c.real()}, {"im", c.imag()}});
        }
        int axis = 0;
        while (axis < d && ++m[static_cast<std::size_t>(axis)] > m_range) m[static_cast<std::size_t>(axis++)] = -m_range;
        if (axis == d) break;
      }
      if (common.format == "csv") return csv.str();
      Json j = header("periodize", common, 1);
      j["op"] = op;
      j["lattice"] = lattice_json(gamma.lattice());
      j["coefficients"] = list;
      return dump(j);
    }
    const double coefficient_energy = gamma.coefficient_energy();
    const double energy = gamma.energy();
    const Complex c0 = gamma.coefficient(std::vector<int>(static_cast<std::size_t>(d), 0));
    const bool compact = f->support().has_value();
    const double fraction = compact ? gamma.support_fraction(grid_n()) : 1.0;
    if (common.format == "csv") {
      CsvWriter csv({"v", "coefficient_energy", "energy", "parseval_gap", "support_fraction"});
      csv.cell(gamma.lattice().v()).cell(coefficient_energy).cell(energy)
          .cell(std::abs(coefficient_energy - energy) / energy).cell(fraction);
      csv.end_row();
      return csv.str();
    }
    Json j = header("periodize", common, 1);
    j["op"] = op;
    j["lattice"] = lattice_json(gamma.lattice());
    j["coefficient_energy"] = coefficient_energy;
    j["energy"] = energy;
    j["parseval_gap"] = std::abs(coefficient_energy - energy) / energy;
    j["coefficient_zero"] = {{"re", c0.real()}, {"im", c0.imag()}};
    j["support_fraction"] = compact ? Json(fraction) : Json(nullptr);
    j["grid"] = grid_n();
    return dump(j);
  }
};

// geometry -------------------------------------------------------------------

struct GeometryCommand : Command {
  std::string set_path, op = "measure";
  std::optional<EuclideanSet> set;

  void setup(CLI::App* sub) {
    sub->add_option("--set", set_path, "Set document")->required();
    sub->add_option("--op", op, "Functional to compute")
        ->check(CLI::IsMember({"measure", "mean-width", "projection", "mu-upper", "card", "order", "m"}));
  }
  std::size_t default_trials() const {
    if (op == "measure" || op == "mean-width") return 100000;
    return 1000;
  }
  Json prepare() override {
    set = load_set(set_path);
    require(!set->empty(), "geometry: the set has no pieces");
    Json plan = plan_header("geometry", common, trials(default_trials()));
    plan["inputs"] = {{"set", set_path}};
    plan["op"] = op;
    return plan;
  }
  std::string run(int&) override {
    const std::size_t n = trials(default_trials());
    Json result;
    std::vector<std::pair<std::string, double>> flat;
    if (op == "measure" || op == "mean-width") {
      const Estimate e = op == "measure" ? lebesgue_measure(*set, n, common.seed) : mean_width(*set, n, common.seed);
      result = to_json(e);
      flat = {{"value", e.value}, {"stderr", e.std_error}};
    } else if (op == "projection") {
      Rng rng = make_stream(common.seed, 0);
      const Rotation rho = sample_rotation(set->dimension(), rng);
      const double w = projection_width(*set, rho);
      result = {{"value", w}, {"rho", rotation_json(rho)}};
      flat = {{"value", w}};
    } else if (op == "mu-upper") {
      const CoverCandidate c = mu_upper(*set);
      result = {{"value", c.value}, {"origin", c.origin}, {"balls", c.balls.size()}};
      flat = {{"value", c.value}};
    } else {
      const ExpectationReport r = op == "card"    ? estimate_card(*set, n, common.seed)
                                  : op == "order" ? estimate_order(*set, n, common.seed)
                                                  : estimate_m(*set, n, common.seed);
      result = to_json(r);
      flat = {{"estimate", r.estimate}, {"stderr", r.std_error}, {"reference", r.reference}};
    }
    if (common.format == "csv") {
      std::vector<std::string> cols;
      for (const auto& [k, v] : flat) cols.push_back(k);
      CsvWriter csv(cols);
      for (const auto& [k, v] : flat) csv.cell(v);
      csv.end_row();
      return csv.str();
    }
    Json j = header("geometry", common, n);
    j["op"] = op;
    j["result"] = result;
    return dump(j);
  }
};

// ratio ----------------------------------------------------------------------

struct RatioCommand : Command {
  std::string function_path, s_path, sigma_path, method = "automatic";
  std::optional<double> gaussian_radius;
  int dim = 1;
  double constant = 1.0;
  std::optional<AnnihilationInstance> inst;

  void setup(CLI::App* sub) {
    sub->add_option("--function", function_path, "Function document");
    sub->add_option("--s", s_path, "Space set document");
    sub->add_option("--sigma", sigma_path, "Frequency set document");
    sub->add_option("--gaussian", gaussian_radius, "Use f = Gaussian(1) with S = Sigma = Ball(0, R)")->check(CLI::PositiveNumber);
    sub->add_option("--dim", dim, "Dimension for --gaussian")->check(CLI::PositiveNumber);
    sub->add_option("--constant", constant, "Constant C in the theorem bound")->check(CLI::PositiveNumber);
    sub->add_option("--method", method, "Tail method")
        ->check(CLI::IsMember({"automatic", "closed-form", "grid", "monte-carlo"}));
  }
  Json prepare() override {
    Json plan = plan_header("ratio", common, 0);
    if (gaussian_radius) {
      require(function_path.empty() && s_path.empty() && sigma_path.empty(),
              "ratio: --gaussian cannot be combined with documents");
      const EuclideanSet ball = make_ball_set(Vec::Zero(dim), *gaussian_radius);
      inst = AnnihilationInstance{TestFunction::gaussian(dim, 1.0), ball, ball};
      plan["inputs"] = {{"gaussian_radius", *gaussian_radius}, {"dimension", dim}};
    } else {
      require_file(function_path, "ratio: --function");
      require_file(s_path, "ratio: --s");
      require_file(sigma_path, "ratio: --sigma");
      inst = AnnihilationInstance{load_function(function_path), load_set(s_path), load_set(sigma_path)};
      plan["inputs"] = {{"function", function_path}, {"s", s_path}, {"sigma", sigma_path}};
    }
    require(inst->f.dimension() == inst->s.dimension() && inst->s.dimension() == inst->sigma.dimension(),
            "ratio: dimension mismatch between function and sets");
    plan["method"] = method;
    plan["constant"] = constant;
    return plan;
  }
  std::string run(int&) override {
    TailOptions options;
    options.seed = common.seed;
    if (common.trials) options.samples = *common.trials;
    options.method = method == "closed-form" ? TailMethod::closed_form
                     : method == "grid"      ? TailMethod::grid
                     : method == "monte-carlo" ? TailMethod::monte_carlo
                                               : TailMethod::automatic;
    const ObservedRatio r = observed_ratio(*inst, options);
    GeometryOptions geo;
    geo.seed = common.seed;
    const TheoremBound b = theorem_bound(inst->s, inst->sigma, constant, geo);
    if (common.format == "csv") {
      CsvWriter csv({"numerator", "space_tail", "frequency_tail", "ratio", "bound", "argmin"});
      csv.cell(r.numerator).cell(r.space_tail).cell(r.frequency_tail).cell(r.ratio).cell(b.value).cell(b.argmin_name);
      csv.end_row();
      return csv.str();
    }
    Json j = header("ratio", common, options.samples);
    j["observed"] = {{"numerator", r.numerator},      {"space_tail", r.space_tail},
                     {"frequency_tail", r.frequency_tail}, {"denominator", r.denominator},
                     {"ratio", number(r.ratio)},      {"annihilated", r.annihilated}};
    j["theorem_bound"] = {{"constant", constant},
                          {"value", number(b.value)},
                          {"exponent", b.exponent},
                          {"terms", {b.terms[0], b.terms[1], b.terms[2]}},
                          {"argmin", b.argmin_name}};
    return dump(j);
  }
};

// pipeline and sweep ---------------------------------------------------------

struct InstanceInputs {
  std::string function_path, s_path, sigma_path;
  double lal_constant = kLatticeAveragingConstant;
  int grid = 0;

  void setup(CLI::App* sub) {
    sub->add_option("--function", function_path, "Compactly supported function document")->required();
    sub->add_option("--s", s_path, "Space set document containing the support")->required();
    sub->add_option("--sigma", sigma_path, "Frequency set document containing 0")->required();
    sub->add_option("--lal-constant", lal_constant, "Calibrated lattice averaging constant")->check(CLI::PositiveNumber);
    sub->add_option("--torus-grid", grid, "Torus grid per axis for E (0: 512, or 64 for d = 3)")->check(CLI::NonNegativeNumber);
  }
  AnnihilationInstance load() const {
    return {load_function(function_path), load_set(s_path), load_set(sigma_path)};
  }
  void validate(const AnnihilationInstance& inst) const {
    const int d = inst.f.dimension();
    require(inst.s.dimension() == d && inst.sigma.dimension() == d, "pipeline: dimension mismatch");
    require(inst.sigma.contains(Vec::Zero(d)), "pipeline: 0 must lie in sigma");
    require(inst.f.support().has_value(), "pipeline: f must have compact support");
  }
  Json json() const { return {{"function", function_path}, {"s", s_path}, {"sigma", sigma_path}}; }
  PipelineOptions options(std::uint64_t seed) const {
    PipelineOptions o;
    o.lal_constant = lal_constant;
    o.grid_n = grid;
    o.geometry.seed = seed;
    return o;
  }
};

Json context_json(const PipelineContext& ctx) {
  return {{"scale", ctx.instance.scale}, {"s_measure", ctx.s_measure}, {"tail", ctx.tail},
          {"energy", ctx.energy},        {"hat0_sq", ctx.hat0_sq},     {"mu_upper", ctx.mu_upper},
          {"mean_width", ctx.mean_width}, {"nu", ctx.nu},              {"grid_n", ctx.grid_n},
          {"lal_constant", ctx.options.lal_constant}};
}

struct PipelineCommand : Command {
  InstanceInputs in;
  std::optional<PipelineContext> ctx;

  void setup(CLI::App* sub) { in.setup(sub); }
  std::optional<AnnihilationInstance> inst;

  Json prepare() override {
    inst = in.load();
    in.validate(*inst);
    Json plan = plan_header("pipeline", common, trials(1));
    plan["inputs"] = in.json();
    plan["seeds"] = {common.seed, common.seed + trials(1) - 1};
    return plan;
  }
  std::string run(int&) override {
    const std::size_t n = trials(1);
    ctx = prepare_pipeline(*inst, in.options(common.seed));
    const auto traces = map_items<PipelineTrace>(n, [&](std::size_t i) { return trace_pipeline(*ctx, common.seed + i); });
    if (common.format == "csv") {
      CsvWriter csv({"seed", "v", "card", "order", "fm_exponent", "r_energy", "e_measure", "e_tilde_measure",
                     "e1", "e2", "e3", "e4", "chain_value", "chain_holds"});
      for (const auto& t : traces) {
        auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
        csv.cell(t.seed).cell(t.lattice.v()).cell(static_cast<std::uint64_t>(t.m.size()))
            .cell(static_cast<long long>(t.order)).cell(static_cast<long long>(t.fm_exponent)).cell(t.r_energy)
            .cell(t.e_measure).cell(t.e_tilde_measure).cell(flag(t.e1)).cell(flag(t.e2)).cell(flag(t.e3))
            .cell(flag(t.e4)).cell(t.chain_value).cell(flag(t.chain_holds));
        csv.end_row();
      }
      return csv.str();
    }
    std::size_t counts[4] = {0, 0, 0, 0}, all = 0, chain = 0;
    double max_gap = 0.0;
    Json list = Json::array();
    for (const auto& t : traces) {
      counts[0] += t.e1;
      counts[1] += t.e2;
      counts[2] += t.e3;
      counts[3] += t.e4;
      all += t.all_events();
      chain += t.all_events() && t.chain_holds;
      max_gap = std::max(max_gap, t.partition_gap);
      Json p = Json::array();
      for (std::size_t j = 0; j < t.m.size(); ++j)
        p.push_back({{"m", t.m.indices[j]}, {"re", t.p_coefficients[j].real()}, {"im", t.p_coefficients[j].imag()}});
      list.push_back({{"seed", t.seed},
                      {"lattice", lattice_json(t.lattice)},
                      {"p", p},
                      {"order", t.order},
                      {"fm_exponent", t.fm_exponent},
                      {"total_energy", t.total_energy},
                      {"spatial_energy", t.spatial_energy},
                      {"p_energy", t.p_energy},
                      {"r_energy", t.r_energy},
                      {"partition_gap", t.partition_gap},
                      {"e_measure", t.e_measure},
                      {"e_tilde_measure", t.e_tilde_measure},
                      {"threshold", t.threshold},
                      {"sup_p", t.sup_p},
                      {"sup_p_e_tilde", t.sup_p_e_tilde},
                      {"p_hat0_sq", t.p_hat0_sq},
                      {"events", {t.e1, t.e2, t.e3, t.e4}},
                      {"chain_value", number(t.chain_value)},
                      {"chain_holds", t.chain_holds},
                      {"measured_chain_value", number(t.measured_chain_value)},
                      {"measured_chain_holds", t.measured_chain_holds}});
    }
    Json j = header("pipeline", common, n);
    j["context"] = context_json(*ctx);
    j["summary"] = {{"traces", n},
                    {"event_counts", {counts[0], counts[1], counts[2], counts[3]}},
                    {"all_events", all},
                    {"chain_holds_on_all_events", chain},
                    {"max_partition_gap", max_gap}};
    j["traces"] = list;
    return dump(j);
  }
};

struct SweepCommand : Command {
  InstanceInputs in;
  int grid_per_axis = 5;
  int attempts = 64;
  std::optional<AnnihilationInstance> inst;

  void setup(CLI::App* sub) {
    in.setup(sub);
    sub->add_option("--grid", grid_per_axis, "Sweep points per axis over Sigma's bounding box")->check(CLI::PositiveNumber);
    sub->add_option("--attempts", attempts, "Seeds tried per point")->check(CLI::PositiveNumber);
  }
  Json prepare() override {
    inst = in.load();
    in.validate(*inst);
    Json plan = plan_header("sweep", common, 0);
    plan["inputs"] = in.json();
    plan["grid"] = grid_per_axis;
    plan["attempts"] = attempts;
    return plan;
  }
  std::string run(int&) override {
    SweepOptions o;
    o.grid_per_axis = grid_per_axis;
    o.max_attempts = attempts;
    o.pipeline = in.options(common.seed);
    const SweepResult r = translated_sweep(*inst, common.seed, o);
    const int d = inst->f.dimension();
    if (common.format == "csv") {
      std::vector<std::string> cols;
      for (int i = 1; i <= d; ++i) cols.push_back("y" + std::to_string(i));
      cols.insert(cols.end(), {"bound", "direct", "seed", "attempts"});
      CsvWriter csv(cols);
      for (const auto& p : r.points) {
        for (int i = 0; i < d; ++i) csv.cell(p.y[i]);
        csv.cell(p.bound).cell(p.direct).cell(p.seed).cell(static_cast<long long>(p.attempts));
        csv.end_row();
      }
      return csv.str();
    }
    Json j = header("sweep", common, r.points.size());
    j["scale"] = r.scale;
    j["sigma_measure"] = r.sigma_measure;
    j["max_bound"] = r.max_bound;
    j["aggregate"] = number(r.aggregate);
    j["direct_integral"] = r.direct_integral;
    Json list = Json::array();
    for (const auto& p : r.points)
      list.push_back({{"y", vec_to_json(p.y)}, {"bound", number(p.bound)}, {"direct", p.direct},
                      {"seed", p.seed}, {"attempts", p.attempts}});
    j["points"] = list;
    return dump(j);
  }
};

// sharpness ------------------------------------------------------------------

struct SharpnessCommand : Command {
  int n = 16;
  std::optional<double> radius;

  void setup(CLI::App* sub) {
    sub->add_option("--n", n, "Number of discs")->check(CLI::PositiveNumber);
    sub->add_option("--radius", radius, "Circle radius (default 10 N)")->check(CLI::PositiveNumber);
  }
  double r() const { return radius.value_or(10.0 * n); }
  Json prepare() override {
    require(trials(2000) >= 2, "sharpness: --trials must be >= 2");
    require(r() > 2.0 * n, "sharpness: R must exceed 2N so the discs stay well separated");
    Json plan = plan_header("sharpness", common, trials(2000));
    plan["inputs"] = {{"n", n}, {"radius", r()}};
    return plan;
  }
  std::string run(int&) override {
    const SharpnessReport rep = sigma_n_experiment(n, r(), trials(2000), common.seed);
    if (common.format == "csv") {
      CsvWriter csv({"n", "radius", "m", "m_stderr", "card", "card_stderr", "sigma_measure", "mean_width", "mu_upper"});
      csv.cell(static_cast<long long>(rep.n)).cell(rep.radius).cell(rep.m.estimate).cell(rep.m.std_error)
          .cell(rep.card.estimate).cell(rep.card.std_error).cell(rep.sigma_measure).cell(rep.mean_width.value)
          .cell(rep.mu_upper);
      csv.end_row();
      return csv.str();
    }
    Json j = header("sharpness", common, rep.m.trials);
    j["n"] = rep.n;
    j["radius"] = rep.radius;
    j["m"] = to_json(rep.m);
    j["card"] = to_json(rep.card);
    j["sigma_measure"] = rep.sigma_measure;
    j["mean_width"] = to_json(rep.mean_width);
    j["mu_upper"] = rep.mu_upper;
    return dump(j);
  }
};

spdlog::level::level_enum log_level() {
  const char* env = std::getenv("UL_LOG");
  if (env == nullptr || *env == '\0') return spdlog::level::warn;
  const auto level = spdlog::level::from_str(env);
  // from_str maps unknown names to off.
  if (level == spdlog::level::off && std::string(env) != "off") return spdlog::level::warn;
  return level;
}

// Routes library logging to err for the duration of one run.
class LogScope {
 public:
  explicit LogScope(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("ul", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(log_level());
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

class ExecScope {
 public:
  ExecScope(bool serial, int threads) : previous_(execution()) {
    set_execution(serial ? Exec::serial : Exec::parallel);
    if (threads > 0) set_threads(threads);
  }
  ~ExecScope() { set_execution(previous_); }

 private:
  Exec previous_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  LogScope log_scope(err);
  CLI::App app{"Uncertainty-principle numerics toolkit", "ul"};
  app.require_subcommand(1);

  LalCommand lal;
  TuranCommand turan;
  PeriodizeCommand periodize;
  GeometryCommand geometry;
  RatioCommand ratio;
  PipelineCommand pipeline;
  SweepCommand sweep;
  SharpnessCommand sharpness;

  std::vector<Command*> commands;
  auto add = [&](auto& cmd, const char* name, const char* help, const char* format) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.app = sub;
    cmd.setup(sub);
    add_common(sub, cmd.common, format);
    commands.push_back(&cmd);
  };
  add(lal, "lal", "Lattice averaging estimates for an integrand", "json");
  add(turan, "turan", "Turan-type inequalities on random or given polynomials", "csv");
  add(periodize, "periodize", "Random periodization of a test function", "json");
  add(geometry, "geometry", "Geometric functionals and lattice expectations of a set", "json");
  add(ratio, "ratio", "Observed annihilation ratio and the theorem's bound", "json");
  add(pipeline, "pipeline", "Trace the periodization argument on an instance", "json");
  add(sweep, "sweep", "Pipeline bounds over a grid of translated frequencies", "csv");
  add(sharpness, "sharpness", "Sigma_N sharpness experiment", "json");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    return kPrecondition;
  }

  Command* cmd = nullptr;
  for (Command* c : commands)
    if (c->app->parsed()) cmd = c;

  try {
    ExecScope exec_scope(cmd->common.serial, cmd->common.threads);
    const Json plan = cmd->prepare();
    int status = kOk;
    const std::string text = cmd->common.dry_run ? dump(plan) : cmd->run(status);
    if (cmd->common.output.empty())
      out << text;
    else
      write_text_file(cmd->common.output, text);
    if (status == kAssertion) err << "error: " << cmd->app->get_name() << ": inequality violated\n";
    return status;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kPrecondition;
  } catch (const AssertionFailure& e) {
    err << "error: " << e.what() << "\n";
    return kAssertion;
  } catch (const Json::exception& e) {
    err << "error: malformed document: " << e.what() << "\n";
    return kPrecondition;
  }
}

std::string strip_timing(const std::string& payload) {
  static const std::regex field(R"(,?\s*"wall_time_ms":\s*(?:[-+0-9.eE]+|null))");
  return std::regex_replace(payload, field, "");
}

}  // namespace ul::cli
