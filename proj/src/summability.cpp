#include "klab/summability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace klab {

namespace {

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw std::invalid_argument(std::string(what) + " must be positive");
}

void require_horizon(std::span<const double> norms, std::int64_t N, const char* what) {
  if (N < 1) throw std::invalid_argument(std::string(what) + ": horizon N must be >= 1");
  if (static_cast<std::int64_t>(norms.size()) < N)
    throw std::out_of_range(std::string(what) + ": norm profile shorter than horizon " +
                            std::to_string(N));
}

double norm_at(std::span<const double> norms, std::int64_t j, const char* what) {
  if (j < 1 || j > static_cast<std::int64_t>(norms.size()))
    throw std::out_of_range(std::string(what) + ": row reads term " + std::to_string(j) +
                            " beyond the available " + std::to_string(norms.size()));
  return norms[static_cast<std::size_t>(j - 1)];
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<SampledFunction> materialize(const FunctionSequence& seq, std::int64_t count,
                                         std::int64_t offset) {
  std::vector<std::optional<SampledFunction>> slots(static_cast<std::size_t>(count));
  parallel_for(count, Execution::parallel, [&](std::int64_t i) {
    slots[static_cast<std::size_t>(i)].emplace(seq(i + 1 + offset));
  });
  std::vector<SampledFunction> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Nodewise prefix sums of x_1..x_T over the distinct nodes, carried in long
/// double so long windows keep their low bits.
class WindowSums {
 public:
  explicit WindowSums(std::span<const SampledFunction> terms) {
    if (terms.empty()) throw std::invalid_argument("almost: no terms");
    width_ = terms.front().grid().distinct_size();
    prefix_.assign((terms.size() + 1) * width_, 0.0L);
    for (std::size_t k = 0; k < terms.size(); ++k) {
      require_same_grid(terms[k].grid(), terms.front().grid(), "almost");
      for (std::size_t i = 0; i < width_; ++i)
        prefix_[(k + 1) * width_ + i] = prefix_[k * width_ + i] + terms[k][i];
    }
    count_ = static_cast<std::int64_t>(terms.size());
  }

  double residual(std::int64_t m, std::int64_t n_max, const SampledFunction& limit) const {
    if (m < 0 || n_max < 1) throw std::invalid_argument("almost: require m >= 0 and n_max >= 1");
    if (n_max + m > count_)
      throw std::out_of_range("almost: window needs " + std::to_string(n_max + m) +
                              " terms, have " + std::to_string(count_));
    const double inv = static_cast<double>(m + 1);
    double worst = 0.0;
    for (std::int64_t n = 1; n <= n_max; ++n) {
      const auto hi = static_cast<std::size_t>(n + m) * width_;
      const auto lo = static_cast<std::size_t>(n - 1) * width_;
      for (std::size_t i = 0; i < width_; ++i) {
        const auto window = static_cast<double>(prefix_[hi + i] - prefix_[lo + i]);
        worst = std::max(worst, std::abs(window / inv - limit[i]));
      }
    }
    return worst;
  }

 private:
  std::size_t width_ = 0;
  std::int64_t count_ = 0;
  std::vector<long double> prefix_;
};

}  // namespace

// ---------------------------------------------------------------------------
// MatrixSpec

MatrixSpec::MatrixSpec(std::string name, RowFn row, SupportFn support,
                       std::optional<std::int64_t> row_count, nlohmann::json description)
    : name_(std::move(name)), row_(std::move(row)), support_(std::move(support)),
      row_count_(row_count), description_(std::move(description)) {
  if (!row_ || !support_) throw std::invalid_argument("matrix: row and support are required");
  if (description_.is_null()) description_ = {{"name", name_}};
}

MatrixSpec MatrixSpec::cesaro(double scale) {
  require_positive(scale, "cesaro scale");
  auto row = [scale](std::int64_t n) {
    MatrixRow r;
    r.entries.reserve(static_cast<std::size_t>(n));
    const double w = scale / static_cast<double>(n);
    for (std::int64_t j = 1; j <= n; ++j) r.entries.emplace_back(j, w);
    r.declared_sum = scale;
    return r;
  };
  nlohmann::json desc = {{"name", "cesaro"}};
  if (scale != 1.0) desc["scale"] = scale;
  MatrixSpec spec(scale == 1.0 ? "cesaro" : "cesaro*" + nlohmann::json(scale).dump(),
                  std::move(row), [](std::int64_t n) { return n; }, std::nullopt,
                  std::move(desc));
  spec.cesaro_scale_ = scale;
  return spec;
}

MatrixSpec MatrixSpec::identity() {
  return {"identity",
          [](std::int64_t n) { return MatrixRow{{{n, 1.0}}, 1.0}; },
          [](std::int64_t n) { return n; }};
}

MatrixSpec MatrixSpec::custom(std::vector<MatrixRow> rows) {
  std::int64_t widest = 0;
  std::vector<std::int64_t> support(rows.size());
  nlohmann::json listed = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::int64_t top = 0;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [j, a] : rows[i].entries) {
      top = std::max(top, j);
      entries.push_back({j, a});
    }
    support[i] = std::max(top, widest);
    widest = support[i];
    nlohmann::json row = {{"entries", entries}};
    if (rows[i].declared_sum) row["sum"] = *rows[i].declared_sum;
    listed.push_back(std::move(row));
  }
  const auto count = static_cast<std::int64_t>(rows.size());
  auto shared = std::make_shared<const std::vector<MatrixRow>>(std::move(rows));
  return {"custom",
          [shared](std::int64_t n) { return (*shared)[static_cast<std::size_t>(n - 1)]; },
          [support = std::move(support)](std::int64_t n) {
            return support.empty() ? 0 : support[static_cast<std::size_t>(
                                             std::min<std::int64_t>(n, support.size()) - 1)];
          },
          count, nlohmann::json{{"name", "custom"}, {"rows", std::move(listed)}}};
}

MatrixRow MatrixSpec::row(std::int64_t n) const {
  if (n < 1 || (row_count_ && n > *row_count_))
    throw std::out_of_range("matrix " + name_ + ": row " + std::to_string(n) + " is not defined");
  MatrixRow r = row_(n);
  const auto bound = support_(n);
  double total = 0.0;
  for (const auto& [j, a] : r.entries) {
    if (j < 1 || j > bound)
      throw std::invalid_argument("matrix " + name_ + ": row " + std::to_string(n) +
                                  " has entry at column " + std::to_string(j) +
                                  " outside its declared support " + std::to_string(bound));
    if (!(a >= 0.0) || !std::isfinite(a))
      throw std::invalid_argument("matrix " + name_ + ": row " + std::to_string(n) +
                                  " has a negative or non-finite entry");
    total += a;
  }
  if (r.declared_sum && std::abs(total - *r.declared_sum) > row_sum_tolerance)
    throw std::invalid_argument("matrix " + name_ + ": row " + std::to_string(n) +
                                " truncated sum deviates from its declared total");
  return r;
}

// ---------------------------------------------------------------------------
// Moduli and ideals

ModulusSpec ModulusSpec::identity() { return {"identity", [](double x) { return x; }}; }
ModulusSpec ModulusSpec::sqrt() { return {"sqrt", [](double x) { return std::sqrt(x); }}; }
ModulusSpec ModulusSpec::log1p() { return {"log1p", [](double x) { return std::log1p(x); }}; }
ModulusSpec ModulusSpec::square() { return {"square", [](double x) { return x * x; }}; }

ModulusSpec ModulusSpec::from_name(const std::string& name) {
  if (name == "identity") return identity();
  if (name == "sqrt") return sqrt();
  if (name == "log1p") return log1p();
  if (name == "square") return square();
  throw std::invalid_argument("unknown modulus '" + name + "'");
}

IdealSpec IdealSpec::finite_sets() {
  return {IdealKind::finite_sets, "finite_sets",
          [](std::span<const std::int64_t> s, std::int64_t N) {
            const std::int64_t half = N / 2;
            const auto first = std::upper_bound(s.begin(), s.end(), half);
            const auto last = std::upper_bound(s.begin(), s.end(), N);
            return static_cast<double>(last - first) / static_cast<double>(N - half);
          }};
}

IdealSpec IdealSpec::zero_density() {
  return {IdealKind::zero_density, "zero_density",
          [](std::span<const std::int64_t> s, std::int64_t N) {
            const auto last = std::upper_bound(s.begin(), s.end(), N);
            return static_cast<double>(last - s.begin()) / static_cast<double>(N);
          }};
}

IdealSpec IdealSpec::custom_density(
    std::string name, std::function<double(std::span<const std::int64_t>, std::int64_t)> d) {
  return {IdealKind::custom_density, std::move(name), std::move(d)};
}

// ---------------------------------------------------------------------------
// MethodSpec

const char* to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::norm: return "norm";
    case MethodKind::statistical: return "statistical";
    case MethodKind::ideal: return "ideal";
    case MethodKind::strong_wp: return "strong_wp";
    case MethodKind::a_statistical: return "a_statistical";
    case MethodKind::a_strong: return "a_strong";
    case MethodKind::f_statistical: return "f_statistical";
    case MethodKind::f_strong: return "f_strong";
    case MethodKind::almost: return "almost";
    case MethodKind::matrix: return "matrix";
  }
  return "?";
}

std::optional<MethodKind> method_kind_from_string(const std::string& s) {
  for (auto k : {MethodKind::norm, MethodKind::statistical, MethodKind::ideal,
                 MethodKind::strong_wp, MethodKind::a_statistical, MethodKind::a_strong,
                 MethodKind::f_statistical, MethodKind::f_strong, MethodKind::almost,
                 MethodKind::matrix})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

MethodSpec MethodSpec::norm() { return {}; }

MethodSpec MethodSpec::statistical(double epsilon) {
  MethodSpec m;
  m.kind = MethodKind::statistical;
  m.epsilon = epsilon;
  return m;
}

MethodSpec MethodSpec::ideal_method(IdealSpec ideal, double epsilon) {
  MethodSpec m;
  m.kind = MethodKind::ideal;
  m.ideal = std::move(ideal);
  m.epsilon = epsilon;
  return m;
}

MethodSpec MethodSpec::strong_wp(double p) {
  MethodSpec m;
  m.kind = MethodKind::strong_wp;
  m.p = p;
  return m;
}

MethodSpec MethodSpec::a_statistical(MatrixSpec a, double epsilon) {
  MethodSpec m;
  m.kind = MethodKind::a_statistical;
  m.matrix = std::move(a);
  m.epsilon = epsilon;
  return m;
}

MethodSpec MethodSpec::a_strong(MatrixSpec a) {
  MethodSpec m;
  m.kind = MethodKind::a_strong;
  m.matrix = std::move(a);
  return m;
}

MethodSpec MethodSpec::f_statistical(ModulusSpec f, double epsilon) {
  MethodSpec m;
  m.kind = MethodKind::f_statistical;
  m.modulus = std::move(f);
  m.epsilon = epsilon;
  return m;
}

MethodSpec MethodSpec::f_strong(ModulusSpec f) {
  MethodSpec m;
  m.kind = MethodKind::f_strong;
  m.modulus = std::move(f);
  return m;
}

MethodSpec MethodSpec::almost(std::int64_t window, std::int64_t n_max) {
  MethodSpec m;
  m.kind = MethodKind::almost;
  m.almost_m = window;
  m.almost_n_max = n_max;
  return m;
}

MethodSpec MethodSpec::matrix_method(MatrixSpec a) {
  MethodSpec m;
  m.kind = MethodKind::matrix;
  m.matrix = std::move(a);
  return m;
}

void MethodSpec::validate() const {
  const std::string k = to_string(kind);
  switch (kind) {
    case MethodKind::statistical:
    case MethodKind::ideal:
    case MethodKind::a_statistical:
    case MethodKind::f_statistical:
      require_positive(epsilon, (k + ": epsilon").c_str());
      break;
    case MethodKind::strong_wp: require_positive(p, "strong_wp: p"); break;
    default: break;
  }
  if ((kind == MethodKind::a_statistical || kind == MethodKind::a_strong ||
       kind == MethodKind::matrix) &&
      !matrix)
    throw std::invalid_argument(k + ": matrix is required");
  if ((kind == MethodKind::f_statistical || kind == MethodKind::f_strong) &&
      (!modulus || !modulus->eval))
    throw std::invalid_argument(k + ": modulus is required");
  if (kind == MethodKind::ideal && (!ideal || !ideal->density))
    throw std::invalid_argument("ideal: ideal is required");
  if (kind == MethodKind::almost && (almost_m < 0 || almost_n_max < 0))
    throw std::invalid_argument("almost: m and n_max must be nonnegative");
}

std::string MethodSpec::label() const {
  std::ostringstream out;
  out << to_string(kind);
  switch (kind) {
    case MethodKind::statistical: out << "(eps=" << epsilon << ")"; break;
    case MethodKind::ideal: out << "(" << ideal->name << ", eps=" << epsilon << ")"; break;
    case MethodKind::strong_wp: out << "(p=" << p << ")"; break;
    case MethodKind::a_statistical: out << "(" << matrix->name() << ", eps=" << epsilon << ")"; break;
    case MethodKind::a_strong:
    case MethodKind::matrix: out << "(" << matrix->name() << ")"; break;
    case MethodKind::f_statistical: out << "(" << modulus->name << ", eps=" << epsilon << ")"; break;
    case MethodKind::f_strong: out << "(" << modulus->name << ")"; break;
    case MethodKind::almost: out << "(m=" << almost_m << ", n_max=" << almost_n_max << ")"; break;
    case MethodKind::norm: break;
  }
  return out.str();
}

std::vector<std::string> method_json_errors(const nlohmann::json& j, const std::string& path) {
  std::vector<std::string> errors;
  if (!j.is_object()) {
    errors.push_back(path + ": must be an object");
    return errors;
  }
  const auto positive_number = [&](const char* key) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) errors.push_back(path + "." + key + ": must be a number");
    else if (!(v.get<double>() > 0.0)) errors.push_back(path + "." + key + ": must be positive");
  };
  std::optional<MethodKind> kind;
  if (!j.contains("kind")) {
    errors.push_back(path + ".kind: required");
  } else if (!j.at("kind").is_string()) {
    errors.push_back(path + ".kind: must be a string");
  } else {
    kind = method_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) errors.push_back(path + ".kind: unknown method '" + j.at("kind").get<std::string>() + "'");
  }
  positive_number("p");
  positive_number("epsilon");

  if (j.contains("modulus")) {
    const auto& mod = j.at("modulus");
    if (!mod.is_object() || !mod.contains("name") || !mod.at("name").is_string()) {
      errors.push_back(path + ".modulus.name: required string");
    } else {
      const auto name = mod.at("name").get<std::string>();
      if (name != "sqrt" && name != "log1p" && name != "identity")
        errors.push_back(path + ".modulus.name: must be one of sqrt, log1p, identity");
    }
  } else if (kind == MethodKind::f_statistical || kind == MethodKind::f_strong) {
    errors.push_back(path + ".modulus: required for kind " + to_string(*kind));
  }

  if (j.contains("matrix")) {
    const auto& mat = j.at("matrix");
    const std::string mp = path + ".matrix";
    if (!mat.is_object() || !mat.contains("name") || !mat.at("name").is_string()) {
      errors.push_back(mp + ".name: required string");
    } else {
      const auto name = mat.at("name").get<std::string>();
      if (name != "cesaro" && name != "identity" && name != "custom")
        errors.push_back(mp + ".name: must be one of cesaro, identity, custom");
      if (mat.contains("scale") &&
          (!mat.at("scale").is_number() || !(mat.at("scale").get<double>() > 0.0)))
        errors.push_back(mp + ".scale: must be positive");
      if (name == "custom") {
        if (!mat.contains("rows") || !mat.at("rows").is_array() || mat.at("rows").empty()) {
          errors.push_back(mp + ".rows: required non-empty array for custom matrices");
        } else {
          const auto& rows = mat.at("rows");
          for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::string rp = mp + ".rows[" + std::to_string(i) + "]";
            const auto& row = rows[i];
            const auto& entries = row.is_object() ? row.value("entries", nlohmann::json()) : row;
            if (!entries.is_array()) {
              errors.push_back(rp + ": must be an array of [j, alpha] pairs");
              continue;
            }
            for (const auto& e : entries) {
              if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
                  !e[1].is_number() || e[0].get<std::int64_t>() < 1 ||
                  e[1].get<double>() < 0.0) {
                errors.push_back(rp + ": entries must be [j >= 1, alpha >= 0]");
                break;
              }
            }
          }
        }
      }
    }
  }

  if (j.contains("ideal")) {
    const auto& id = j.at("ideal");
    if (!id.is_object() || !id.contains("kind") || !id.at("kind").is_string()) {
      errors.push_back(path + ".ideal.kind: required string");
    } else {
      const auto k = id.at("kind").get<std::string>();
      if (k != "finite_sets" && k != "zero_density")
        errors.push_back(path + ".ideal.kind: must be one of finite_sets, zero_density");
    }
  }

  if (j.contains("almost")) {
    const auto& al = j.at("almost");
    if (!al.is_object()) {
      errors.push_back(path + ".almost: must be an object");
    } else {
      if (al.contains("m") && (!al.at("m").is_number_integer() || al.at("m").get<std::int64_t>() < 0))
        errors.push_back(path + ".almost.m: must be a nonnegative integer");
      if (al.contains("n_max") &&
          (!al.at("n_max").is_number_integer() || al.at("n_max").get<std::int64_t>() < 1))
        errors.push_back(path + ".almost.n_max: must be a positive integer");
    }
  }
  return errors;
}

namespace {

MatrixSpec matrix_from_json(const nlohmann::json& mat) {
  const auto name = mat.at("name").get<std::string>();
  const double scale = mat.value("scale", 1.0);
  if (name == "cesaro") return MatrixSpec::cesaro(scale);
  if (name == "identity") {
    if (scale == 1.0) return MatrixSpec::identity();
    return {"identity*" + nlohmann::json(scale).dump(),
            [scale](std::int64_t n) { return MatrixRow{{{n, scale}}, scale}; },
            [](std::int64_t n) { return n; }, std::nullopt,
            nlohmann::json{{"name", "identity"}, {"scale", scale}}};
  }
  std::vector<MatrixRow> rows;
  for (const auto& row : mat.at("rows")) {
    const auto& entries = row.is_object() ? row.at("entries") : row;
    MatrixRow r;
    for (const auto& e : entries)
      r.entries.emplace_back(e[0].get<std::int64_t>(), e[1].get<double>() * scale);
    if (row.is_object() && row.contains("sum")) r.declared_sum = row.at("sum").get<double>() * scale;
    rows.push_back(std::move(r));
  }
  return MatrixSpec::custom(std::move(rows));
}

}  // namespace

MethodSpec method_from_json(const nlohmann::json& j, double default_epsilon) {
  const auto errors = method_json_errors(j, "method");
  if (!errors.empty()) {
    std::string all;
    for (const auto& e : errors) all += (all.empty() ? "" : "; ") + e;
    throw std::invalid_argument(all);
  }
  MethodSpec m;
  m.kind = *method_kind_from_string(j.at("kind").get<std::string>());
  m.p = j.value("p", 1.0);
  m.epsilon = j.value("epsilon", default_epsilon);
  if (j.contains("modulus")) m.modulus = ModulusSpec::from_name(j.at("modulus").at("name"));
  if (j.contains("matrix")) m.matrix = matrix_from_json(j.at("matrix"));
  if (j.contains("ideal")) {
    m.ideal = j.at("ideal").at("kind") == "finite_sets" ? IdealSpec::finite_sets()
                                                        : IdealSpec::zero_density();
  }
  if (j.contains("almost")) {
    m.almost_m = j.at("almost").value("m", std::int64_t{0});
    m.almost_n_max = j.at("almost").value("n_max", std::int64_t{0});
  }
  // Kind-specific defaults for omitted parameter blocks.
  if (!m.matrix && (m.kind == MethodKind::a_statistical || m.kind == MethodKind::a_strong ||
                    m.kind == MethodKind::matrix))
    m.matrix = MatrixSpec::cesaro();
  if (!m.ideal && m.kind == MethodKind::ideal) m.ideal = IdealSpec::zero_density();
  if (m.kind == MethodKind::almost && !j.contains("almost")) m.almost_m = 100;
  m.validate();
  return m;
}

nlohmann::json to_json(const MethodSpec& m) {
  nlohmann::json j = {{"kind", to_string(m.kind)}};
  switch (m.kind) {
    case MethodKind::statistical:
    case MethodKind::ideal:
    case MethodKind::a_statistical:
    case MethodKind::f_statistical: j["epsilon"] = m.epsilon; break;
    case MethodKind::strong_wp: j["p"] = m.p; break;
    default: break;
  }
  if (m.matrix) j["matrix"] = m.matrix->description();
  if (m.modulus) j["modulus"] = {{"name", m.modulus->name}};
  if (m.ideal) j["ideal"] = {{"kind", m.ideal->name}};
  if (m.kind == MethodKind::almost) j["almost"] = {{"m", m.almost_m}, {"n_max", m.almost_n_max}};
  return j;
}

// ---------------------------------------------------------------------------
// Residuals

std::vector<double> norm_profile(const FunctionSequence& seq, const SampledFunction& limit,
                                 std::int64_t count, std::int64_t offset, Execution exec) {
  if (count < 0) throw std::invalid_argument("norm_profile: negative count");
  std::vector<double> norms(static_cast<std::size_t>(count));
  parallel_for(count, exec, [&](std::int64_t i) {
    norms[static_cast<std::size_t>(i)] = sup_distance(seq(i + 1 + offset), limit);
  });
  return norms;
}

double residual_norm(const FunctionSequence& seq, const SampledFunction& limit, std::int64_t n,
                     std::int64_t offset) {
  return sup_distance(seq(n + offset), limit);
}

double residual_statistical(std::span<const double> norms, double epsilon, std::int64_t N) {
  require_positive(epsilon, "statistical: epsilon");
  require_horizon(norms, N, "statistical");
  const auto head = norms.first(static_cast<std::size_t>(N));
  const auto count = std::count_if(head.begin(), head.end(), [&](double r) { return r > epsilon; });
  return static_cast<double>(count) / static_cast<double>(N);
}

double residual_statistical(const FunctionSequence& seq, const SampledFunction& limit,
                            double epsilon, std::int64_t N, std::int64_t offset) {
  require_positive(epsilon, "statistical: epsilon");
  return residual_statistical(norm_profile(seq, limit, N, offset), epsilon, N);
}

double residual_strong_wp(std::span<const double> norms, double p, std::int64_t N) {
  require_positive(p, "strong_wp: p");
  require_horizon(norms, N, "strong_wp");
  double sum = 0.0;
  for (std::int64_t l = 0; l < N; ++l) sum += std::pow(norms[static_cast<std::size_t>(l)], p);
  return sum / static_cast<double>(N);
}

double residual_strong_wp(const FunctionSequence& seq, const SampledFunction& limit, double p,
                          std::int64_t N, std::int64_t offset) {
  require_positive(p, "strong_wp: p");
  return residual_strong_wp(norm_profile(seq, limit, N, offset), p, N);
}

double residual_a_strong(std::span<const double> norms, const MatrixSpec& a, std::int64_t n) {
  double sum = 0.0;
  for (const auto& [j, alpha] : a.row(n).entries) sum += alpha * norm_at(norms, j, "a_strong");
  return sum;
}

double residual_a_strong(const FunctionSequence& seq, const SampledFunction& limit,
                         const MatrixSpec& a, std::int64_t n, std::int64_t offset) {
  return residual_a_strong(norm_profile(seq, limit, a.support(n), offset), a, n);
}

double residual_a_statistical(std::span<const double> norms, const MatrixSpec& a,
                              double epsilon, std::int64_t n) {
  require_positive(epsilon, "a_statistical: epsilon");
  double sum = 0.0;
  for (const auto& [j, alpha] : a.row(n).entries)
    if (norm_at(norms, j, "a_statistical") >= epsilon) sum += alpha;
  return sum;
}

double residual_a_statistical(const FunctionSequence& seq, const SampledFunction& limit,
                              const MatrixSpec& a, double epsilon, std::int64_t n,
                              std::int64_t offset) {
  require_positive(epsilon, "a_statistical: epsilon");
  return residual_a_statistical(norm_profile(seq, limit, a.support(n), offset), a, epsilon, n);
}

double residual_f_statistical(std::span<const double> norms, const ModulusSpec& f,
                              double epsilon, std::int64_t N) {
  require_positive(epsilon, "f_statistical: epsilon");
  require_horizon(norms, N, "f_statistical");
  const double denom = f(static_cast<double>(N));
  if (!(denom > 0.0))
    throw std::invalid_argument("f_statistical: degenerate modulus, f(N) = 0 at N = " +
                                std::to_string(N));
  const auto head = norms.first(static_cast<std::size_t>(N));
  const auto count = std::count_if(head.begin(), head.end(), [&](double r) { return r > epsilon; });
  return f(static_cast<double>(count)) / denom;
}

double residual_f_statistical(const FunctionSequence& seq, const SampledFunction& limit,
                              const ModulusSpec& f, double epsilon, std::int64_t N,
                              std::int64_t offset) {
  require_positive(epsilon, "f_statistical: epsilon");
  return residual_f_statistical(norm_profile(seq, limit, N, offset), f, epsilon, N);
}

double residual_f_strong(std::span<const double> norms, const ModulusSpec& f, std::int64_t N) {
  require_horizon(norms, N, "f_strong");
  const double denom = f(static_cast<double>(N));
  if (!(denom > 0.0))
    throw std::invalid_argument("f_strong: degenerate modulus, f(N) = 0 at N = " +
                                std::to_string(N));
  double sum = 0.0;
  for (std::int64_t k = 0; k < N; ++k) sum += norms[static_cast<std::size_t>(k)];
  return f(sum) / denom;
}

double residual_f_strong(const FunctionSequence& seq, const SampledFunction& limit,
                         const ModulusSpec& f, std::int64_t N, std::int64_t offset) {
  return residual_f_strong(norm_profile(seq, limit, N, offset), f, N);
}

double residual_ideal(std::span<const double> norms, const IdealSpec& ideal, double epsilon,
                      std::int64_t N) {
  require_positive(epsilon, "ideal: epsilon");
  require_horizon(norms, N, "ideal");
  std::vector<std::int64_t> exceed;
  for (std::int64_t k = 1; k <= N; ++k)
    if (norms[static_cast<std::size_t>(k - 1)] > epsilon) exceed.push_back(k);
  return ideal.density(exceed, N);
}

double residual_ideal(const FunctionSequence& seq, const SampledFunction& limit,
                      const IdealSpec& ideal, double epsilon, std::int64_t N,
                      std::int64_t offset) {
  require_positive(epsilon, "ideal: epsilon");
  return residual_ideal(norm_profile(seq, limit, N, offset), ideal, epsilon, N);
}

double residual_almost(std::span<const SampledFunction> terms, const SampledFunction& limit,
                       std::int64_t m, std::int64_t n_max) {
  if (m < 0 || n_max < 1) throw std::invalid_argument("almost: require m >= 0 and n_max >= 1");
  if (static_cast<std::int64_t>(terms.size()) < n_max + m)
    throw std::out_of_range("almost: not enough terms");
  require_same_grid(terms.front().grid(), limit.grid(), "almost");
  return WindowSums(terms.first(static_cast<std::size_t>(n_max + m))).residual(m, n_max, limit);
}

double residual_almost(const FunctionSequence& seq, const SampledFunction& limit,
                       std::int64_t m, std::int64_t n_max, std::int64_t offset) {
  if (m < 0 || n_max < 1) throw std::invalid_argument("almost: require m >= 0 and n_max >= 1");
  const auto terms = materialize(seq, n_max + m, offset);
  return residual_almost(terms, limit, m, n_max);
}

SampledFunction apply_matrix(std::span<const SampledFunction> terms, const MatrixSpec& a,
                             std::int64_t n) {
  if (terms.empty()) throw std::invalid_argument("apply_matrix: no terms");
  const auto& grid = terms.front().grid();
  std::vector<double> acc(grid.size(), 0.0);
  for (const auto& [j, alpha] : a.row(n).entries) {
    if (j > static_cast<std::int64_t>(terms.size()))
      throw std::out_of_range("apply_matrix: row " + std::to_string(n) + " reads term " +
                              std::to_string(j) + " beyond the available " +
                              std::to_string(terms.size()));
    const auto& x = terms[static_cast<std::size_t>(j - 1)];
    require_same_grid(x.grid(), grid, "apply_matrix");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += alpha * x[i];
  }
  if (grid.periodic()) acc.back() = acc.front();
  return {grid, std::move(acc)};
}

SampledFunction apply_matrix(const FunctionSequence& seq, const MatrixSpec& a, std::int64_t n,
                             std::int64_t offset) {
  const auto terms = materialize(seq, a.support(n), offset);
  return apply_matrix(terms, a, n);
}

// ---------------------------------------------------------------------------
// Validators

std::vector<std::string> RegularityReport::failed_conditions() const {
  std::vector<std::string> out;
  if (!bounded_row_sums) out.emplace_back("(i) bounded row sums");
  if (!vanishing_columns) out.emplace_back("(ii) vanishing columns");
  if (!unit_row_limit) out.emplace_back("(iii) row sums tend to 1");
  return out;
}

RegularityReport check_regularity(const MatrixSpec& a, std::int64_t N,
                                  RegularityThresholds thresholds) {
  if (N < 2) throw std::invalid_argument("check_regularity: N must be >= 2");
  RegularityReport report;
  report.horizon = N;
  const auto row_sum = [](const MatrixRow& r) {
    double s = 0.0;
    for (const auto& e : r.entries) s += e.second;
    return s;
  };
  const auto entry = [](const MatrixRow& r, std::int64_t j) {
    for (const auto& [col, alpha] : r.entries)
      if (col == j) return alpha;
    return 0.0;
  };
  for (std::int64_t n = 1; n <= N; ++n) report.max_row_sum = std::max(report.max_row_sum, row_sum(a.row(n)));
  const auto last = a.row(N);
  const auto half = a.row(std::max<std::int64_t>(1, N / 2));
  report.row_sum_at_horizon = row_sum(last);

  report.vanishing_columns = true;
  for (std::int64_t j = 1; j <= thresholds.columns; ++j) {
    ColumnDecay c{j, entry(half, j), entry(last, j)};
    if (c.at_end > thresholds.column_tolerance || c.at_end > c.at_half + 1e-15)
      report.vanishing_columns = false;
    report.columns.push_back(c);
  }
  report.bounded_row_sums = report.max_row_sum <= thresholds.row_sum_cap;
  report.unit_row_limit = std::abs(report.row_sum_at_horizon - 1.0) <= thresholds.limit_tolerance;
  return report;
}

std::vector<double> default_modulus_sample_points() {
  return {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 50.0, 100.0, 1e3, 1e4};
}

ModulusReport is_modulus(const ModulusSpec& f, std::span<const double> sample_points) {
  std::vector<double> pts(sample_points.begin(), sample_points.end());
  if (std::any_of(pts.begin(), pts.end(), [](double x) { return !(x >= 0.0); }))
    throw std::invalid_argument("is_modulus: sample points must be nonnegative");
  if (std::find(pts.begin(), pts.end(), 0.0) == pts.end())
    throw std::invalid_argument("is_modulus: sample points must include 0");
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  ModulusReport report;

  report.zero_only_at_origin = f(0.0) == 0.0;
  if (!report.zero_only_at_origin) report.zero_witness = 0.0;
  for (double x : pts) {
    if (x > 0.0 && !(f(x) > 0.0)) {
      report.zero_only_at_origin = false;
      if (!report.zero_witness) report.zero_witness = x;
    }
  }

  report.subadditive = true;
  for (std::size_t i = 0; i < pts.size() && report.subadditive; ++i) {
    for (std::size_t j = i; j < pts.size(); ++j) {
      const double lhs = f(pts[i] + pts[j]);
      const double rhs = f(pts[i]) + f(pts[j]);
      if (lhs > rhs * (1.0 + 1e-14)) {
        report.subadditive = false;
        report.subadditivity_witness = {pts[i], pts[j]};
        break;
      }
    }
  }

  report.increasing = true;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (f(pts[i]) < f(pts[i - 1])) {
      report.increasing = false;
      report.monotonicity_witness = {pts[i - 1], pts[i]};
      break;
    }
  }

  // f(10^-k) must shrink towards 0 for k = 1..12.
  report.right_continuous_at_zero = true;
  double previous = f(1e-1);
  for (int k = 2; k <= 12; ++k) {
    const double v = f(std::pow(10.0, -k));
    if (v > previous) report.right_continuous_at_zero = false;
    previous = v;
  }
  if (!(previous <= 1e-5 * std::max(1.0, f(1.0)))) report.right_continuous_at_zero = false;

  report.unbounded = f(1e6) > f(1.0);
  return report;
}

// ---------------------------------------------------------------------------
// Verdicts and curves

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::consistent: return "consistent";
    case Verdict::inconsistent: return "inconsistent";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "?";
}

Verdict decide_verdict(std::span<const std::pair<std::int64_t, double>> curve, double tau) {
  if (curve.size() < 8)
    throw std::invalid_argument("decide_verdict: need at least 8 points, got " +
                                std::to_string(curve.size()));
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].first <= curve[i - 1].first)
      throw std::invalid_argument("decide_verdict: indices must be strictly increasing");
  const std::size_t q = curve.size() / 4;
  std::vector<double> first, last;
  for (std::size_t i = 0; i < q; ++i) first.push_back(curve[i].second);
  for (std::size_t i = curve.size() - q; i < curve.size(); ++i) last.push_back(curve[i].second);
  const double first_median = median(first);
  const double last_median = median(last);
  const double last_max = *std::max_element(last.begin(), last.end());
  const double last_min = *std::min_element(last.begin(), last.end());
  if (last_max <= tau && last_median <= first_median + verdict_noise_floor)
    return Verdict::consistent;
  if (last_min > tau && last_median > first_median - tau)
    return Verdict::inconsistent;
  return Verdict::indeterminate;
}

std::string to_csv(const CurvePoints& points) {
  std::ostringstream out;
  out << "n,residual\n";
  char buf[32];
  for (const auto& [n, r] : points) {
    std::snprintf(buf, sizeof buf, "%.17g", r);
    out << n << ',' << buf << '\n';
  }
  return out.str();
}

bool needs_terms(const MethodSpec& method) {
  return method.kind == MethodKind::almost || method.kind == MethodKind::matrix;
}

std::int64_t terms_required(const MethodSpec& method, std::int64_t N) {
  switch (method.kind) {
    case MethodKind::almost:
      return (method.almost_n_max > 0 ? method.almost_n_max : N) + method.almost_m;
    case MethodKind::a_statistical:
    case MethodKind::a_strong:
    case MethodKind::matrix: {
      std::int64_t widest = 0;
      for (std::int64_t n = 1; n <= N; ++n) widest = std::max(widest, method.matrix->support(n));
      return widest;
    }
    default: return N;
  }
}

CurvePoints residual_points(const MethodSpec& method, std::span<const double> norms,
                            std::int64_t N) {
  method.validate();
  if (needs_terms(method))
    throw std::invalid_argument(std::string(to_string(method.kind)) +
                                ": residuals need the terms, not just their norms");
  const auto required = terms_required(method, N);
  if (N < 1 || static_cast<std::int64_t>(norms.size()) < required)
    throw std::out_of_range("residual_points: need " + std::to_string(required) + " norms");
  const auto at = [&](std::int64_t k) { return norms[static_cast<std::size_t>(k - 1)]; };

  CurvePoints pts;
  switch (method.kind) {
    case MethodKind::norm: {
      const std::int64_t count = std::min<std::int64_t>(N, std::max<std::int64_t>(8, (N + 1) / 2));
      std::vector<double> tail(static_cast<std::size_t>(N) + 2, 0.0);
      for (std::int64_t k = N; k >= 1; --k)
        tail[static_cast<std::size_t>(k)] = std::max(tail[static_cast<std::size_t>(k + 1)], at(k));
      for (std::int64_t n = 1; n <= count; ++n) pts.emplace_back(n, tail[static_cast<std::size_t>(n)]);
      break;
    }
    case MethodKind::statistical: {
      std::int64_t count = 0;
      for (std::int64_t n = 1; n <= N; ++n) {
        if (at(n) > method.epsilon) ++count;
        pts.emplace_back(n, static_cast<double>(count) / static_cast<double>(n));
      }
      break;
    }
    case MethodKind::ideal: {
      std::vector<std::int64_t> exceed;
      for (std::int64_t n = 1; n <= N; ++n) {
        if (at(n) > method.epsilon) exceed.push_back(n);
        pts.emplace_back(n, method.ideal->density(exceed, n));
      }
      break;
    }
    case MethodKind::strong_wp: {
      double sum = 0.0;
      for (std::int64_t n = 1; n <= N; ++n) {
        sum += std::pow(at(n), method.p);
        pts.emplace_back(n, sum / static_cast<double>(n));
      }
      break;
    }
    case MethodKind::a_strong:
      if (const auto scale = method.matrix->cesaro_scale()) {
        double sum = 0.0;
        for (std::int64_t n = 1; n <= N; ++n) {
          sum += at(n);
          pts.emplace_back(n, *scale * sum / static_cast<double>(n));
        }
        break;
      }
      for (std::int64_t n = 1; n <= N; ++n)
        pts.emplace_back(n, residual_a_strong(norms, *method.matrix, n));
      break;
    case MethodKind::a_statistical:
      if (const auto scale = method.matrix->cesaro_scale()) {
        std::int64_t count = 0;
        for (std::int64_t n = 1; n <= N; ++n) {
          if (at(n) >= method.epsilon) ++count;
          pts.emplace_back(n, *scale * static_cast<double>(count) / static_cast<double>(n));
        }
        break;
      }
      for (std::int64_t n = 1; n <= N; ++n)
        pts.emplace_back(n, residual_a_statistical(norms, *method.matrix, method.epsilon, n));
      break;
    case MethodKind::f_statistical: {
      std::int64_t count = 0;
      const auto& f = *method.modulus;
      for (std::int64_t n = 1; n <= N; ++n) {
        if (at(n) > method.epsilon) ++count;
        const double denom = f(static_cast<double>(n));
        if (!(denom > 0.0)) throw std::invalid_argument("f_statistical: degenerate modulus");
        pts.emplace_back(n, f(static_cast<double>(count)) / denom);
      }
      break;
    }
    case MethodKind::f_strong: {
      double sum = 0.0;
      const auto& f = *method.modulus;
      for (std::int64_t n = 1; n <= N; ++n) {
        sum += at(n);
        const double denom = f(static_cast<double>(n));
        if (!(denom > 0.0)) throw std::invalid_argument("f_strong: degenerate modulus");
        pts.emplace_back(n, f(sum) / denom);
      }
      break;
    }
    case MethodKind::almost:
    case MethodKind::matrix: break;
  }
  return pts;
}

CurvePoints residual_points(const MethodSpec& method, std::span<const SampledFunction> terms,
                            const SampledFunction& limit, std::int64_t N) {
  method.validate();
  const auto required = terms_required(method, N);
  if (static_cast<std::int64_t>(terms.size()) < required)
    throw std::out_of_range("residual_points: need " + std::to_string(required) + " terms");
  if (!needs_terms(method)) {
    std::vector<double> norms(static_cast<std::size_t>(required));
    parallel_for(required, Execution::parallel, [&](std::int64_t i) {
      norms[static_cast<std::size_t>(i)] = sup_distance(terms[static_cast<std::size_t>(i)], limit);
    });
    return residual_points(method, norms, N);
  }

  CurvePoints pts;
  if (method.kind == MethodKind::almost) {
    const std::int64_t n_max = method.almost_n_max > 0 ? method.almost_n_max : N;
    require_same_grid(terms.front().grid(), limit.grid(), "almost");
    const WindowSums sums(terms.first(static_cast<std::size_t>(required)));
    pts.resize(static_cast<std::size_t>(method.almost_m) + 1);
    parallel_for(method.almost_m + 1, Execution::parallel, [&](std::int64_t m) {
      pts[static_cast<std::size_t>(m)] = {m, sums.residual(m, n_max, limit)};
    });
    return pts;
  }

  // Matrix summability: sup-distance of the transformed sequence to L.
  const auto& a = *method.matrix;
  pts.resize(static_cast<std::size_t>(N));
  if (const auto scale = a.cesaro_scale()) {
    const auto width = limit.grid().distinct_size();
    std::vector<double> running(width, 0.0);
    for (std::int64_t n = 1; n <= N; ++n) {
      const auto& x = terms[static_cast<std::size_t>(n - 1)];
      require_same_grid(x.grid(), limit.grid(), "apply_matrix");
      double worst = 0.0;
      for (std::size_t i = 0; i < width; ++i) {
        running[i] += x[i];
        worst = std::max(worst, std::abs(*scale * running[i] / static_cast<double>(n) - limit[i]));
      }
      pts[static_cast<std::size_t>(n - 1)] = {n, worst};
    }
    return pts;
  }
  parallel_for(N, Execution::parallel, [&](std::int64_t i) {
    const auto n = i + 1;
    pts[static_cast<std::size_t>(i)] = {n, sup_distance(apply_matrix(terms, a, n), limit)};
  });
  return pts;
}

ResidualCurve residual_curve(const MethodSpec& method, std::span<const SampledFunction> terms,
                             const SampledFunction& limit, std::int64_t N, double tau) {
  auto pts = residual_points(method, terms, limit, N);
  const auto verdict = decide_verdict(pts, tau);
  return {method, limit, std::move(pts), verdict};
}

ResidualCurve residual_curve_from_norms(const MethodSpec& method, std::span<const double> norms,
                                        const SampledFunction& limit, std::int64_t N,
                                        double tau) {
  auto pts = residual_points(method, norms, N);
  const auto verdict = decide_verdict(pts, tau);
  return {method, limit, std::move(pts), verdict};
}

ResidualCurve residual_curve(const MethodSpec& method, const FunctionSequence& seq,
                             const SampledFunction& limit, std::int64_t N, double tau,
                             std::int64_t offset) {
  const auto required = terms_required(method, N);
  if (needs_terms(method)) {
    const auto terms = materialize(seq, required, offset);
    return residual_curve(method, terms, limit, N, tau);
  }
  return residual_curve_from_norms(method, norm_profile(seq, limit, required, offset), limit, N,
                                   tau);
}

}  // namespace klab
