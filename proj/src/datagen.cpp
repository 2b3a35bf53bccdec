#include "permimp/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "permimp/error.hpp"
#include "permimp/io.hpp"

namespace permimp {

std::string_view to_string(LinkKind kind) noexcept {
  switch (kind) {
    case LinkKind::linear: return "linear";
    case LinkKind::polynomial: return "polynomial";
    case LinkKind::trigonometric: return "trigonometric";
    case LinkKind::non_continuous: return "non_continuous";
  }
  return "unknown";
}

LinkKind parse_link_kind(std::string_view name) {
  if (name == "linear") return LinkKind::linear;
  if (name == "polynomial") return LinkKind::polynomial;
  if (name == "trigonometric") return LinkKind::trigonometric;
  if (name == "non_continuous" || name == "non-continuous") return LinkKind::non_continuous;
  throw Error(ErrorKind::invalid_parameter, "unknown model kind '" + std::string(name) + "'");
}

std::vector<double> default_beta() { return {2, 4, 2, -3, 1, 0, 0, 0, 0, 0}; }

LinkModel::LinkModel(LinkKind kind, std::vector<double> beta) : kind_(kind), beta_(std::move(beta)) {
  if (beta_.empty()) throw Error(ErrorKind::invalid_parameter, "coefficient vector must be non-empty");
  for (double b : beta_) {
    if (!std::isfinite(b)) throw Error(ErrorKind::invalid_parameter, "coefficients must be finite");
  }
  if (kind_ == LinkKind::non_continuous) {
    if (beta_.size() < 5) {
      throw Error(ErrorKind::invalid_parameter, "non_continuous model needs p >= 5");
    }
    informative_ = {0, 1, 2, 3, 4};
  } else {
    for (std::size_t j = 0; j < beta_.size(); ++j) {
      if (beta_[j] != 0.0) informative_.push_back(j);
    }
  }
  if (informative_.empty()) {
    throw Error(ErrorKind::invalid_parameter, "model needs at least one informative feature");
  }
}

bool LinkModel::is_informative(std::size_t j) const noexcept {
  for (auto s : informative_) {
    if (s == j) return true;
  }
  return false;
}

double LinkModel::operator()(std::span<const double> x) const {
  if (x.size() != beta_.size()) {
    throw Error(ErrorKind::invalid_input, "point has dimension " + std::to_string(x.size()) +
                                              ", model expects " + std::to_string(beta_.size()));
  }
  switch (kind_) {
    case LinkKind::linear: {
      double s = 0.0;
      for (auto j : informative_) s += beta_[j] * x[j];
      return s;
    }
    case LinkKind::polynomial: {
      double s = 0.0;
      for (auto j : informative_) s += beta_[j] * std::pow(x[j], static_cast<double>(j + 1));
      return s;
    }
    case LinkKind::trigonometric: {
      double s = 0.0;
      for (auto j : informative_) s += beta_[j] * x[j];
      return 2.0 * std::sin(s + 2.0);
    }
    case LinkKind::non_continuous:
      if (x[2] > 0.5) return beta_[0] * x[0] + beta_[1] * x[1] + beta_[2] * x[2];
      return beta_[3] * x[3] + beta_[4] * x[4] + 3.0;
  }
  return 0.0;
}

double link_eval(const LinkModel& model, std::span<const double> x) { return model(x); }

LinkModel high_dim_model(std::size_t n) {
  if (n < 1) throw Error(ErrorKind::invalid_parameter, "high-dimensional model needs n >= 1");
  std::vector<double> beta(n + 5, 0.0);
  const double head[] = {2, 4, 2, -3, 1};
  std::copy(std::begin(head), std::end(head), beta.begin());
  return LinkModel(LinkKind::linear, std::move(beta));
}

LinkVariance link_variance(const LinkModel& model, std::size_t draws) {
  const auto& beta = model.beta();
  if (model.kind() == LinkKind::linear) {
    double s = 0.0;
    for (double b : beta) s += b * b;
    return {s / 12.0, 0.0, true, 0, 0};
  }
  if (model.kind() == LinkKind::polynomial) {
    double s = 0.0;
    for (std::size_t idx = 0; idx < beta.size(); ++idx) {
      const double k = static_cast<double>(idx + 1);
      s += beta[idx] * beta[idx] * (1.0 / (2.0 * k + 1.0) - 1.0 / ((k + 1.0) * (k + 1.0)));
    }
    return {s, 0.0, true, 0, 0};
  }
  if (draws < 2) throw Error(ErrorKind::invalid_parameter, "link variance needs at least 2 draws");
  // Only informative coordinates influence m(X); the rest stay at 0.
  const SeedSpec seed{kLinkVarianceSeed, StreamId{.purpose = Purpose::link_variance}};
  Rng rng(seed);
  std::vector<double> x(model.p(), 0.0);
  std::vector<double> values(draws);
  for (auto& v : values) {
    for (auto j : model.informative()) x[j] = rng.uniform01();
    v = model(x);
  }
  const double count = static_cast<double>(draws);
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= count;
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d2 = (v - mean) * (v - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  const double var = m2 / (count - 1.0);
  // Delta-method standard error of the sample variance.
  const double se = std::sqrt(std::max(0.0, m4 / count - (m2 / count) * (m2 / count)) / count);
  return {var, se, false, draws, seed.key()};
}

RegressionDataset::RegressionDataset(std::size_t n, std::size_t p, std::vector<double> features,
                                     std::vector<double> response)
    : n_(n), p_(p), features_(std::move(features)), response_(std::move(response)) {
  if (n_ < 2) throw Error(ErrorKind::invalid_input, "dataset needs n >= 2 rows");
  if (p_ < 1) throw Error(ErrorKind::invalid_input, "dataset needs p >= 1 features");
  if (features_.size() != n_ * p_ || response_.size() != n_) {
    throw Error(ErrorKind::invalid_input, "dataset storage does not match n x p shape");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < p_; ++j) {
      const double v = features_[i * p_ + j];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::invalid_input, "row " + std::to_string(i + 1) + ": feature x" +
                                                  std::to_string(j + 1) + "=" + io::format_double(v) +
                                                  " outside [0,1]");
      }
    }
    if (!std::isfinite(response_[i])) {
      throw Error(ErrorKind::invalid_input, "row " + std::to_string(i + 1) + ": response is not finite");
    }
  }
}

std::uint64_t RegressionDataset::fingerprint() const noexcept {
  std::uint64_t h = hash_combine(0x9a7f'0d15'c0de'0001ULL, n_);
  h = hash_combine(h, p_);
  for (double v : features_) h = hash_combine(h, std::bit_cast<std::uint64_t>(v));
  for (double v : response_) h = hash_combine(h, std::bit_cast<std::uint64_t>(v));
  return h;
}

NoiseSpec NoiseSpec::from_sn(double sn, const LinkVariance& var) {
  if (!(sn > 0.0) || !std::isfinite(sn)) {
    throw Error(ErrorKind::invalid_parameter, "signal-to-noise ratio must be positive and finite");
  }
  return {sn, var.value / sn};
}

RegressionDataset generate_dataset(const LinkModel& model, std::size_t n, const NoiseSpec& noise,
                                   const SeedSpec& seed) {
  if (n < 2) throw Error(ErrorKind::invalid_parameter, "generate_dataset needs n >= 2");
  if (!(noise.sigma2 >= 0.0)) throw Error(ErrorKind::invalid_parameter, "noise variance must be >= 0");
  const std::size_t p = model.p();
  std::vector<double> features(n * p);
  std::vector<double> response(n);
  Rng feature_rng(seed.with_purpose(Purpose::features));
  for (auto& v : features) v = feature_rng.uniform01();
  Rng noise_rng(seed.with_purpose(Purpose::noise));
  const double sigma = std::sqrt(noise.sigma2);
  for (std::size_t i = 0; i < n; ++i) {
    response[i] = model(std::span<const double>(features.data() + i * p, p));
    if (noise.sn) response[i] += sigma * noise_rng.normal();
  }
  RegressionDataset data(n, p, std::move(features), std::move(response));
  data.set_provenance({model.kind(), model.beta(), noise.sn, noise.sigma2, seed});
  return data;
}

RegressionDataset generate_dataset(const LinkModel& model, std::size_t n, double sn, const SeedSpec& seed) {
  return generate_dataset(model, n, NoiseSpec::from_sn(sn, link_variance(model)), seed);
}

std::string dataset_csv(const RegressionDataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.p(); ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "y\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j) {
      out += io::format_double(data.x(i, j));
      out += ',';
    }
    out += io::format_double(data.y(i));
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const RegressionDataset& data, const std::string& path) {
  io::write_file_atomic(path, dataset_csv(data));
}

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : io::split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Returns p and whether a trailing y column is present.
std::pair<std::size_t, bool> parse_header(std::string_view header) {
  const auto cols = io::split(header, ',');
  std::size_t p = 0;
  bool has_y = false;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const std::string expected = "x" + std::to_string(c + 1);
    if (cols[c] == expected) {
      if (has_y) throw Error(ErrorKind::invalid_input, "header: column y must be last");
      ++p;
    } else if (cols[c] == "y" && c + 1 == cols.size()) {
      has_y = true;
    } else {
      throw Error(ErrorKind::invalid_input, "header: expected '" + expected + "' or trailing 'y', got '" +
                                                std::string(cols[c]) + "'");
    }
  }
  if (p == 0) throw Error(ErrorKind::invalid_input, "header: no feature columns");
  return {p, has_y};
}

double parse_cell(std::string_view cell, std::size_t row, std::string_view column) {
  try {
    return io::parse_double(cell);
  } catch (const Error&) {
    throw Error(ErrorKind::invalid_input, "row " + std::to_string(row) + ": column " + std::string(column) +
                                              " is not a number ('" + std::string(cell) + "')");
  }
}

}  // namespace

RegressionDataset parse_dataset_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorKind::invalid_input, "empty CSV");
  const auto [p, has_y] = parse_header(lines[0]);
  if (!has_y) throw Error(ErrorKind::invalid_input, "header: training data needs a trailing 'y' column");
  const std::size_t n = lines.size() - 1;
  std::vector<double> features; features.reserve(n * p);
  std::vector<double> response; response.reserve(n);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = io::split(lines[r], ',');
    if (cells.size() != p + 1) {
      throw Error(ErrorKind::invalid_input, "row " + std::to_string(r) + ": expected " + std::to_string(p + 1) +
                                                " fields, got " + std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < p; ++j) {
      const double v = parse_cell(cells[j], r, "x" + std::to_string(j + 1));
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::invalid_input, "row " + std::to_string(r) + ": feature x" + std::to_string(j + 1) +
                                                  "=" + std::string(cells[j]) + " outside [0,1]");
      }
      features.push_back(v);
    }
    response.push_back(parse_cell(cells[p], r, "y"));
  }
  return RegressionDataset(n, p, std::move(features), std::move(response));
}

RegressionDataset read_dataset_csv(const std::string& path) { return parse_dataset_csv(io::read_file(path)); }

std::vector<std::vector<double>> read_points_csv(const std::string& path, std::size_t p) {
  const auto text = io::read_file(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorKind::invalid_input, "empty CSV");
  const auto [cols, has_y] = parse_header(lines[0]);
  if (cols != p) {
    throw Error(ErrorKind::invalid_input, "CSV has " + std::to_string(cols) + " features, model expects " +
                                              std::to_string(p));
  }
  std::vector<std::vector<double>> points;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = io::split(lines[r], ',');
    if (cells.size() != p + (has_y ? 1 : 0)) {
      throw Error(ErrorKind::invalid_input, "row " + std::to_string(r) + ": wrong field count");
    }
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j) x[j] = parse_cell(cells[j], r, "x" + std::to_string(j + 1));
    points.push_back(std::move(x));
  }
  return points;
}

std::string provenance_json(const Provenance& prov) {
  nlohmann::json j;
  j["model"] = std::string(to_string(prov.kind));
  j["beta"] = prov.beta;
  j["sn"] = prov.sn ? nlohmann::json(*prov.sn) : nlohmann::json(nullptr);
  j["sigma2"] = prov.sigma2;
  j["seed"] = io::seed_to_json(prov.seed);
  return j.dump(2) + "\n";
}

Provenance parse_provenance_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Provenance prov;
    prov.kind = parse_link_kind(j.at("model").get<std::string>());
    prov.beta = j.at("beta").get<std::vector<double>>();
    if (!j.at("sn").is_null()) prov.sn = j.at("sn").get<double>();
    prov.sigma2 = j.at("sigma2").get<double>();
    prov.seed = io::seed_from_json(j.at("seed"));
    return prov;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, std::string("provenance JSON: ") + e.what());
  }
}

}  // namespace permimp
