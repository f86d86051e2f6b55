#include "ul/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ul/errors.hpp"

namespace ul {

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const Json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), what + " must be a nonempty array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), what + " must be a nonempty array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

namespace {

const Json& field(const Json& j, const char* key, const std::string& what) {
  require(j.is_object() && j.contains(key), what + ": missing field '" + key + "'");
  return j.at(key);
}

double number_field(const Json& j, const char* key, const std::string& what) {
  const Json& v = field(j, key, what);
  require(v.is_number(), what + ": field '" + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

Json to_json(const EuclideanSet& set) {
  Json pieces = Json::array();
  for (const Piece& p : set.pieces()) {
    if (const auto* b = std::get_if<Ball>(&p))
      pieces.push_back({{"kind", "ball"}, {"center", vec_to_json(b->center)}, {"radius", b->radius}});
    else {
      const auto& box = std::get<AxisBox>(p);
      pieces.push_back({{"kind", "box"}, {"lower", vec_to_json(box.lower)}, {"upper", vec_to_json(box.upper)}});
    }
  }
  return {{"dimension", set.dimension()}, {"pieces", pieces}};
}

EuclideanSet set_from_json(const Json& j) {
  const std::string what = "set document";
  const Json& dim = field(j, "dimension", what);
  require(dim.is_number_integer() && dim.get<int>() >= 1, what + ": dimension must be a positive integer");
  const int d = dim.get<int>();
  std::vector<Piece> pieces;
  const Json& list = field(j, "pieces", what);
  require(list.is_array(), what + ": pieces must be an array");
  for (const Json& p : list) {
    const Json& kind = field(p, "kind", what);
    require(kind.is_string(), what + ": piece kind must be \"ball\" or \"box\"");
    if (kind == "ball") {
      Vec c = vec_from_json(field(p, "center", what), what + ": ball center");
      require(c.size() == d, what + ": ball center dimension mismatch");
      pieces.push_back(Ball{std::move(c), number_field(p, "radius", what)});
    } else if (kind == "box") {
      Vec lo = vec_from_json(field(p, "lower", what), what + ": box lower");
      Vec hi = vec_from_json(field(p, "upper", what), what + ": box upper");
      require(lo.size() == d && hi.size() == d, what + ": box corner dimension mismatch");
      pieces.push_back(AxisBox{std::move(lo), std::move(hi)});
    } else {
      throw PreconditionError(what + ": piece kind must be \"ball\" or \"box\"");
    }
  }
  return EuclideanSet(d, std::move(pieces));
}

Json to_json(const TestFunction& f) {
  using Kind = TestFunction::Kind;
  Json children = Json::array();
  Json params = Json::object();
  std::string kind;
  switch (f.kind()) {
    case Kind::gaussian:
      kind = "gaussian";
      params = {{"dimension", f.dimension()}, {"scale", f.scale()}};
      break;
    case Kind::box:
      kind = "box";
      params = {{"lower", vec_to_json(f.box_shape().lower)}, {"upper", vec_to_json(f.box_shape().upper)}};
      break;
    case Kind::combination: {
      kind = "combination";
      Json coefs = Json::array();
      for (const auto& [c, g] : f.terms()) {
        coefs.push_back(Json::array({c.real(), c.imag()}));
        children.push_back(to_json(g));
      }
      params = {{"coefficients", coefs}};
      break;
    }
    case Kind::modulated:
      kind = "modulated";
      params = {{"frequency", vec_to_json(f.shift())}};
      children.push_back(to_json(f.base()));
      break;
    case Kind::translated:
      kind = "translated";
      params = {{"offset", vec_to_json(f.shift())}};
      children.push_back(to_json(f.base()));
      break;
  }
  return {{"kind", kind}, {"parameters", params}, {"children", children}};
}

TestFunction function_from_json(const Json& j) {
  const std::string what = "function document";
  const Json& kind_field = field(j, "kind", what);
  require(kind_field.is_string(), what + ": kind must be a string");
  const std::string kind = kind_field.get<std::string>();
  const Json empty_object = Json::object();
  const Json empty_array = Json::array();
  const Json& params = j.contains("parameters") ? j.at("parameters") : empty_object;
  const Json& children = j.contains("children") ? j.at("children") : empty_array;
  require(children.is_array(), what + ": children must be an array");
  auto single_child = [&]() {
    require(children.size() == 1, what + ": " + kind + " needs exactly one child");
    return function_from_json(children.front());
  };
  if (kind == "gaussian") {
    const Json& dim = field(params, "dimension", what);
    require(dim.is_number_integer(), what + ": gaussian dimension must be an integer");
    return TestFunction::gaussian(dim.get<int>(), number_field(params, "scale", what));
  }
  if (kind == "box")
    return TestFunction::box({vec_from_json(field(params, "lower", what), what + ": box lower"),
                              vec_from_json(field(params, "upper", what), what + ": box upper")});
  if (kind == "combination") {
    const Json& coefs = field(params, "coefficients", what);
    require(coefs.is_array() && coefs.size() == children.size(),
            what + ": combination needs one coefficient per child");
    std::vector<std::pair<Complex, TestFunction>> terms;
    for (std::size_t i = 0; i < coefs.size(); ++i) {
      const Json& c = coefs[i];
      Complex value;
      if (c.is_number()) {
        value = c.get<double>();
      } else {
        require(c.is_array() && c.size() == 2 && c[0].is_number() && c[1].is_number(),
                what + ": coefficients are numbers or [re, im] pairs");
        value = {c[0].get<double>(), c[1].get<double>()};
      }
      terms.emplace_back(value, function_from_json(children[i]));
    }
    return TestFunction::combination(std::move(terms));
  }
  if (kind == "modulated")
    return TestFunction::modulated(single_child(), vec_from_json(field(params, "frequency", what), what + ": frequency"));
  if (kind == "translated")
    return TestFunction::translated(single_child(), vec_from_json(field(params, "offset", what), what + ": offset"));
  throw PreconditionError(what + ": unknown kind '" + kind + "'");
}

Json to_json(const TrigPolynomial& p) {
  Json terms = Json::array();
  for (const auto& [k, c] : p.terms()) terms.push_back({{"frequency", k}, {"re", c.real()}, {"im", c.imag()}});
  return terms;
}

TrigPolynomial polynomial_from_json(const Json& j) {
  const std::string what = "polynomial document";
  require(j.is_array() && !j.empty(), what + ": expected a nonempty array of terms");
  TrigPolynomial::Terms terms;
  int d = -1;
  for (const Json& t : j) {
    const Json& freq = field(t, "frequency", what);
    require(freq.is_array() && !freq.empty(), what + ": frequency must be an integer array");
    IntVec k;
    for (const Json& x : freq) {
      require(x.is_number_integer(), what + ": frequency must be an integer array");
      k.push_back(x.get<int>());
    }
    if (d < 0) d = static_cast<int>(k.size());
    require(static_cast<int>(k.size()) == d, what + ": frequency dimension mismatch");
    terms[k] += Complex(number_field(t, "re", what), t.contains("im") ? number_field(t, "im", what) : 0.0);
  }
  return TrigPolynomial(d, std::move(terms));
}

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json to_json(const Estimate& e) {
  return {{"value", number(e.value)}, {"stderr", number(e.std_error)}, {"trials", e.trials}, {"exact", e.exact}};
}

Json to_json(const ExpectationReport& r) {
  Json extras = Json::object();
  for (const auto& [k, v] : r.extras) extras[k] = number(v);
  return {{"estimate", number(r.estimate)}, {"stderr", number(r.std_error)}, {"trials", r.trials},
          {"reference", number(r.reference)}, {"bound", number(r.bound)},    {"ratio", number(r.ratio())},
          {"seed", r.seed},                   {"extras", extras},            {"wall_time_ms", r.wall_time_ms}};
}

CsvWriter::CsvWriter(std::vector<std::string> header) {
  for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
  text_ += "\n";
}

CsvWriter& CsvWriter::cell(double x) {
  char buf[64];
  if (std::isfinite(x))
    std::snprintf(buf, sizeof buf, "%.17g", x);
  else
    std::snprintf(buf, sizeof buf, "%s", std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf"));
  return cell(std::string(buf));
}

CsvWriter& CsvWriter::cell(long long x) { return cell(std::to_string(x)); }
CsvWriter& CsvWriter::cell(std::uint64_t x) { return cell(std::to_string(x)); }

CsvWriter& CsvWriter::cell(const std::string& s) {
  if (row_open_) text_ += ",";
  text_ += s;
  row_open_ = true;
  return *this;
}

void CsvWriter::end_row() {
  text_ += "\n";
  row_open_ = false;
  ++rows_;
}

}  // namespace ul
