#include "rdbounds/scenario_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rdb {

namespace {

const std::map<std::string, std::set<std::string>> kSections = {
    {"domain", {"n", "mesh"}},
    {"coefficients", {"a0", "rho0", "alpha0"}},
    {"loads", {"f", "F", "G"}},
    {"uncertainty", {"delta1", "delta2", "delta3"}},
    {"bounds",
     {"beta_lower1", "beta_lower2", "beta_lower3", "beta_upper1", "beta_upper2", "beta_upper3"}},
    {"embedding", {"c1", "c2", "c3", "sigma_convention"}},
};

std::string trim(const std::string& s)
{
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::set<std::string> all_keys()
{
  std::set<std::string> keys;
  for (const auto& [section, section_keys] : kSections) keys.insert(section_keys.begin(), section_keys.end());
  keys.insert("delta");
  return keys;
}

std::vector<double> parse_numbers(const std::string& value, const std::string& key)
{
  std::istringstream in(value);
  std::vector<double> numbers;
  double x;
  while (in >> x) numbers.push_back(x);
  std::string rest;
  if (in.clear(), in >> rest)
    throw ScenarioError(key + ": cannot parse '" + value + "'");
  if (numbers.empty()) throw ScenarioError(key + ": expected numeric value, got '" + value + "'");
  return numbers;
}

double parse_scalar(const std::string& value, const std::string& key)
{
  const auto numbers = parse_numbers(value, key);
  if (numbers.size() != 1) throw ScenarioError(key + ": expected one number");
  return numbers[0];
}

int parse_int(const std::string& value, const std::string& key)
{
  const double x = parse_scalar(value, key);
  const int i = static_cast<int>(x);
  if (static_cast<double>(i) != x) throw ScenarioError(key + ": expected an integer");
  return i;
}

// per-entity data file: header "values N" then N lines of 1 (scalar) or
// 3 (symmetric matrix: axx axy ayy) numbers
std::vector<std::vector<double>> load_values_file(const std::string& path, int per_line)
{
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open data file: " + path);
  std::string word;
  int n = -1;
  if (!(in >> word >> n) || word != "values" || n < 0)
    throw ScenarioError(path + ": expected 'values <count>' header");
  std::vector<std::vector<double>> rows(n, std::vector<double>(per_line));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < per_line; ++k)
      if (!(in >> rows[i][k])) throw ScenarioError(path + ": truncated at entry " + std::to_string(i));
  return rows;
}

bool is_file_ref(const std::string& value) { return value.rfind("file:", 0) == 0; }

std::string resolve(const std::string& base_dir, const std::string& path)
{
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

VecX scalar_field_values(const std::string& value, const std::string& key, int count,
                         const std::string& base_dir)
{
  if (is_file_ref(value)) {
    const auto rows = load_values_file(resolve(base_dir, value.substr(5)), 1);
    if (static_cast<int>(rows.size()) != count)
      throw ScenarioError(key + ": file has " + std::to_string(rows.size()) + " values, expected " +
                          std::to_string(count));
    VecX out(count);
    for (int i = 0; i < count; ++i) out[i] = rows[i][0];
    return out;
  }
  return VecX::Constant(count, parse_scalar(value, key));
}

Mat2 matrix_from_numbers(const std::vector<double>& numbers, const std::string& key)
{
  Mat2 m;
  if (numbers.size() == 1) {
    m = numbers[0] * Mat2::Identity();
  } else if (numbers.size() == 3) {
    m << numbers[0], numbers[1], numbers[1], numbers[2];
  } else if (numbers.size() == 4) {
    m << numbers[0], numbers[1], numbers[2], numbers[3];
    if (std::abs(m(0, 1) - m(1, 0)) > 1e-14 * (1.0 + spectral_norm_sym(m)))
      throw ScenarioError(key + ": matrix is not symmetric");
  } else {
    throw ScenarioError(key + ": expected 1, 3 or 4 numbers");
  }
  return m;
}

} // namespace

RawScenario parse_scenario_text(const std::string& text)
{
  RawScenario raw;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fail = [&](const std::string& what) -> void {
      throw ScenarioError("line " + std::to_string(line_no) + ": " + what);
    };
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    if (section.empty()) fail("content before the first section header");

    // "unit_square n=<n>" shorthand in [domain]
    if (section == "domain" && line.rfind("unit_square", 0) == 0) {
      const std::string rest = trim(line.substr(11));
      std::string value;
      if (rest.rfind("n=", 0) == 0)
        value = trim(rest.substr(2));
      else if (rest.rfind("n =", 0) == 0)
        value = trim(rest.substr(3));
      else
        fail("expected 'unit_square n=<count>'");
      raw["n"] = value;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kSections.at(section).count(key)) fail("unknown key '" + key + "' in [" + section + "]");
    if (value.empty()) fail("empty value for '" + key + "'");
    raw[key] = value;
  }
  if (raw.count("n") && raw.count("mesh"))
    throw ScenarioError("[domain] specifies both unit_square and a mesh path");
  return raw;
}

void apply_override(RawScenario& raw, const std::string& key, const std::string& value)
{
  static const std::set<std::string> known = all_keys();
  if (!known.count(key)) throw ScenarioError("unknown override key '" + key + "'");
  if (key == "delta") {
    raw["delta1"] = raw["delta2"] = raw["delta3"] = value;
    return;
  }
  if (key == "n") raw.erase("mesh");
  if (key == "mesh") raw.erase("n");
  raw[key] = value;
}

Scenario build_scenario(const RawScenario& raw, const std::string& base_dir)
{
  const auto get = [&](const std::string& key) -> const std::string* {
    const auto it = raw.find(key);
    return it == raw.end() ? nullptr : &it->second;
  };
  const auto get_or = [&](const std::string& key, const std::string& fallback) {
    const auto* v = get(key);
    return v ? *v : fallback;
  };

  Scenario s;
  std::string domain_echo;
  if (const auto* n = get("n")) {
    s.mesh = std::make_shared<Mesh>(unit_square_mesh(parse_int(*n, "n")));
    domain_echo = "unit_square n=" + *n;
  } else if (const auto* path = get("mesh")) {
    s.mesh = std::make_shared<Mesh>(load_mesh_file(resolve(base_dir, *path)));
    domain_echo = "mesh " + *path;
  } else {
    throw ScenarioError("[domain] must specify 'unit_square n=<n>' or 'mesh = <path>'");
  }

  const int cells = s.mesh->triangle_count();
  const int n2 = static_cast<int>(s.mesh->edges_with_tag(2).size());
  const int n3 = static_cast<int>(s.mesh->edges_with_tag(3).size());

  const std::string a0_value = get_or("a0", "1.0");
  if (is_file_ref(a0_value)) {
    const auto rows = load_values_file(resolve(base_dir, a0_value.substr(5)), 3);
    if (static_cast<int>(rows.size()) != cells)
      throw ScenarioError("a0: file has " + std::to_string(rows.size()) + " rows, expected " +
                          std::to_string(cells));
    s.mean.a.resize(cells);
    for (int c = 0; c < cells; ++c) s.mean.a[c] = matrix_from_numbers(rows[c], "a0");
  } else {
    s.mean.a.assign(cells, matrix_from_numbers(parse_numbers(a0_value, "a0"), "a0"));
  }
  s.mean.rho = scalar_field_values(get_or("rho0", "1.0"), "rho0", cells, base_dir);
  s.mean.alpha = scalar_field_values(get_or("alpha0", "1.0"), "alpha0", n3, base_dir);
  s.f = scalar_field_values(get_or("f", "1.0"), "f", cells, base_dir);
  s.neumann = scalar_field_values(get_or("F", "0.0"), "F", n2, base_dir);
  s.robin = scalar_field_values(get_or("G", "0.0"), "G", n3, base_dir);

  for (int i = 0; i < 3; ++i)
    s.budget.delta[i] = parse_scalar(get_or("delta" + std::to_string(i + 1), "0.0"),
                                     "delta" + std::to_string(i + 1));

  // bounds default to the exact coefficient ranges
  double a_lo = std::numeric_limits<double>::infinity(), a_hi = 0.0;
  for (const Mat2& m : s.mean.a) {
    const auto [lo, hi] = eig_range_sym(m);
    a_lo = std::min(a_lo, lo);
    a_hi = std::max(a_hi, hi);
  }
  const std::array<double, 2> rho_range = {s.mean.rho.minCoeff(), s.mean.rho.maxCoeff()};
  const std::array<double, 2> alpha_range =
      n3 > 0 ? std::array<double, 2>{s.mean.alpha.minCoeff(), s.mean.alpha.maxCoeff()}
             : std::array<double, 2>{1.0, 1.0};
  const std::array<double, 3> default_lower = {a_lo, rho_range[0], alpha_range[0]};
  const std::array<double, 3> default_upper = {a_hi, rho_range[1], alpha_range[1]};
  for (int i = 0; i < 3; ++i) {
    const std::string suffix = std::to_string(i + 1);
    const auto* lo = get("beta_lower" + suffix);
    const auto* hi = get("beta_upper" + suffix);
    s.beta_lower[i] = lo ? parse_scalar(*lo, "beta_lower" + suffix) : default_lower[i];
    s.beta_upper[i] = hi ? parse_scalar(*hi, "beta_upper" + suffix) : default_upper[i];
  }

  if (const auto* c1 = get("c1")) s.embedding.c1 = parse_scalar(*c1, "c1");
  if (const auto* c2 = get("c2")) s.embedding.c2 = parse_scalar(*c2, "c2");
  if (const auto* c3 = get("c3")) s.embedding.c3 = parse_scalar(*c3, "c3");
  const std::string convention = get_or("sigma_convention", "derived");
  if (convention == "derived")
    s.embedding.convention = SigmaConvention::derived;
  else if (convention == "paper")
    s.embedding.convention = SigmaConvention::paper;
  else
    throw ScenarioError("sigma_convention must be 'derived' or 'paper'");

  s.spec_echo["domain"] = domain_echo;
  for (const auto& [key, value] : raw)
    if (key != "n" && key != "mesh") s.spec_echo[key] = value;

  s.validate();
  return s;
}

Scenario load_scenario_file(const std::string& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides)
{
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  RawScenario raw = parse_scenario_text(buffer.str());
  for (const auto& [key, value] : overrides) apply_override(raw, key, value);
  return build_scenario(raw, std::filesystem::path(path).parent_path().string());
}

} // namespace rdb
