#include "fairflda/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fairflda/errors.hpp"

namespace fairflda {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "inf" || lower == "+inf" || lower == "infinity") return std::numeric_limits<double>::infinity();
  if (lower == "-inf" || lower == "-infinity") return -std::numeric_limits<double>::infinity();
  if (lower == "nan") return std::numeric_limits<double>::quiet_NaN();
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  double v = 0.0;
  const auto res = std::from_chars(first, text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
    throw ArgumentError("not a number: '" + std::string(text) + "'");
  return v;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_label(std::string_view text, const char* name, std::size_t line) {
  text = trim(text);
  if (text == "0") return 0;
  if (text == "1") return 1;
  throw ParseError(std::string("column ") + name + " must be 0 or 1, got '" + std::string(text) + "'", line);
}

}  // namespace

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  const std::size_t m = data.grid()->size();
  if (!data.grid()->same_as(*uniform_grid(m)))
    throw StructuralError("dataset CSV stores curves on the uniform grid only");
  os << "a,y";
  for (std::size_t j = 0; j < m; ++j) os << ",x_" << j;
  os << '\n';
  const auto& X = data.curves();
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data.a()[i] << ',' << data.y()[i];
    for (Eigen::Index j = 0; j < X.cols(); ++j) os << ',' << format_double(X(static_cast<Eigen::Index>(i), j));
    os << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  write_dataset_csv(os, data);
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw ParseError("empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 5 || trim(header[0]) != "a" || trim(header[1]) != "y")
    throw ParseError("header must be a,y,x_0,...,x_{m-1} with at least 3 curve columns", line_no);
  const std::size_t m = header.size() - 2;
  for (std::size_t j = 0; j < m; ++j)
    if (trim(header[j + 2]) != "x_" + std::to_string(j))
      throw ParseError("header column " + std::to_string(j + 3) + " must be x_" + std::to_string(j), line_no);

  std::vector<int> a, y;
  std::vector<double> values;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != m + 2)
      throw ParseError("expected " + std::to_string(m + 2) + " columns, found " + std::to_string(cells.size()),
                       line_no);
    a.push_back(parse_label(cells[0], "a", line_no));
    y.push_back(parse_label(cells[1], "y", line_no));
    for (std::size_t j = 0; j < m; ++j) {
      double v = 0.0;
      try {
        v = parse_double(cells[j + 2]);
      } catch (const ArgumentError&) {
        throw ParseError("column x_" + std::to_string(j) + ": not a number '" + std::string(trim(cells[j + 2])) + "'",
                         line_no);
      }
      if (!std::isfinite(v)) throw ParseError("column x_" + std::to_string(j) + " is not finite", line_no);
      values.push_back(v);
    }
  }
  if (a.empty()) throw ParseError("dataset file has a header but no rows");
  CurveMatrix curves = Eigen::Map<const CurveMatrix>(values.data(), static_cast<Eigen::Index>(a.size()),
                                                     static_cast<Eigen::Index>(m));
  return Dataset(uniform_grid(m), std::move(curves), std::move(a), std::move(y));
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  return read_dataset_csv(is);
}

namespace {

constexpr const char* kModelFormat = "fairflda-model";
constexpr int kModelVersion = 1;

json number(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

double number_of(const json& j) { return j.is_string() ? parse_double(j.get<std::string>()) : j.get<double>(); }

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Vector vector_of(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_of(j[i]);
  return v;
}

// column-major: one inner array per column
json columns_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(vector_json(m.col(c)));
  return out;
}

Matrix columns_of(const json& j, Eigen::Index rows) {
  Matrix m(rows, static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Vector col = vector_of(j[c]);
    if (col.size() != rows) throw ParseError("model: column length mismatch");
    m.col(static_cast<Eigen::Index>(c)) = col;
  }
  return m;
}

json pair_json(const std::array<double, 2>& p) { return json::array({number(p[0]), number(p[1])}); }

std::array<double, 2> pair_of(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("model: expected a pair");
  return {number_of(j[0]), number_of(j[1])};
}

GroupScore group_of(const json& jg, const GridPtr& grid) {
  const Vector lambda = vector_of(jg.at("eigenvalues"));
  Matrix theta(2, lambda.size());
  theta.row(0) = vector_of(jg.at("theta").at(0)).transpose();
  theta.row(1) = vector_of(jg.at("theta").at(1)).transpose();
  return GroupScore(grid, lambda, columns_of(jg.at("eigenfunctions"), static_cast<Eigen::Index>(grid->size())), theta);
}

}  // namespace

std::string model_to_json(const FittedFairClassifier& clf) {
  const Grid& grid = *clf.grid();
  json root;
  root["format"] = kModelFormat;
  root["version"] = kModelVersion;
  root["grid"] = {{"points", vector_json(grid.points())}, {"weights", vector_json(grid.weights())}};
  root["cross_fit"] = clf.cross_fit();
  root["J"] = clf.J();
  json halves = json::array();
  for (const auto& h : clf.halves()) {
    json jh;
    jh["priors"] = json::array({pair_json(h.model->priors.pi[0]), pair_json(h.model->priors.pi[1])});
    jh["disparity"] = std::string(to_string(h.spec.kind));
    jh["s"] = pair_json(h.spec.s);
    jh["b"] = pair_json(h.spec.b);
    jh["tau"] = number(h.solution.tau);
    jh["feasible"] = h.solution.feasible;
    jh["achieved"] = number(h.solution.achieved);
    jh["candidates_scanned"] = h.solution.candidates_scanned;
    jh["kappa"] = number(h.kappa);
    jh["delta_eff"] = number(h.delta_eff);
    jh["n_calibration"] = h.model->n_calibration;
    json groups = json::array();
    for (const auto& g : h.model->score.groups) {
      json jg;
      jg["eigenvalues"] = vector_json(g.eigenvalues());
      jg["eigenfunctions"] = columns_json(g.eigenfunctions());
      jg["theta"] = json::array({vector_json(g.theta().row(0).transpose()), vector_json(g.theta().row(1).transpose())});
      groups.push_back(std::move(jg));
    }
    jh["groups"] = std::move(groups);
    halves.push_back(std::move(jh));
  }
  root["halves"] = std::move(halves);
  json manifest = json::array();
  for (const auto& [k, v] : clf.manifest().entries()) manifest.push_back(json::array({k, v}));
  root["manifest"] = std::move(manifest);
  return root.dump(1) + "\n";
}

FittedFairClassifier model_from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (root.value("format", std::string()) != kModelFormat) throw ParseError("not a fairflda model file");
    if (root.value("version", 0) != kModelVersion) throw ParseError("unsupported model version");
    auto grid = std::make_shared<const Grid>(vector_of(root.at("grid").at("points")),
                                             vector_of(root.at("grid").at("weights")));
    std::vector<HalfFit> halves;
    for (const auto& jh : root.at("halves")) {
      ClassPriors priors;
      priors.pi[0] = pair_of(jh.at("priors").at(0));
      priors.pi[1] = pair_of(jh.at("priors").at(1));
      const auto& jg = jh.at("groups");
      std::array<GroupScore, 2> groups{group_of(jg.at(0), grid), group_of(jg.at(1), grid)};
      auto model = std::make_shared<HalfModel>(
          HalfModel{priors, ScoreFunctional{std::move(groups)}, {}, jh.at("n_calibration").get<std::size_t>()});
      HalfFit h;
      h.model = std::move(model);
      h.spec.kind = parse_disparity(jh.at("disparity").get<std::string>());
      h.spec.s = pair_of(jh.at("s"));
      h.spec.b = pair_of(jh.at("b"));
      h.solution.tau = number_of(jh.at("tau"));
      h.solution.feasible = jh.at("feasible").get<bool>();
      h.solution.achieved = number_of(jh.at("achieved"));
      h.solution.candidates_scanned = jh.at("candidates_scanned").get<std::size_t>();
      h.kappa = number_of(jh.at("kappa"));
      h.delta_eff = number_of(jh.at("delta_eff"));
      halves.push_back(std::move(h));
    }
    Manifest manifest;
    for (const auto& e : root.at("manifest")) manifest.set(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    return FittedFairClassifier(std::move(halves), root.at("cross_fit").get<bool>(), root.at("J").get<std::size_t>(),
                                std::move(manifest));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const FittedFairClassifier& clf) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << model_to_json(clf);
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

FittedFairClassifier load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return model_from_json(buf.str());
}

std::map<std::string, std::string> read_config(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const auto key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    out[std::string(key)] = std::string(trim(t.substr(eq + 1)));
  }
  return out;
}

std::map<std::string, std::string> read_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path.string() + "'");
  return read_config(is);
}

}  // namespace fairflda
