#include "cbo/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <boost/random/sobol.hpp>

#include "cbo/error.hpp"

namespace cbo {
namespace {

double AsNumber(const ParamSpec& p, const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw InvalidArgument("parameter '" + p.name + "' expects a number, got \"" +
                        std::get<std::string>(v) + "\"");
}

// Position of a numeric value in [0,1] under the parameter's scale.
double ToUnit(const ParamSpec& p, double v) {
  if (p.scale == Scale::kLog) {
    if (v <= 0.0) {
      throw InvalidArgument("log-scale parameter '" + p.name + "' needs a positive value");
    }
    return (std::log(v) - std::log(p.low)) / (std::log(p.high) - std::log(p.low));
  }
  return (v - p.low) / (p.high - p.low);
}

double FromUnit(const ParamSpec& p, double u) {
  if (p.scale == Scale::kLog) {
    return std::exp(std::log(p.low) + u * (std::log(p.high) - std::log(p.low)));
  }
  return p.low + u * (p.high - p.low);
}

}  // namespace

ParamSpec ParamSpec::Continuous(std::string name, double low, double high, Scale scale) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::kContinuous;
  p.low = low;
  p.high = high;
  p.scale = scale;
  p.Validate();
  return p;
}

ParamSpec ParamSpec::Integer(std::string name, std::int64_t low, std::int64_t high,
                             Scale scale) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::kInteger;
  p.low = static_cast<double>(low);
  p.high = static_cast<double>(high);
  p.scale = scale;
  p.Validate();
  return p;
}

ParamSpec ParamSpec::Categorical(std::string name, std::vector<std::string> categories) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::kCategorical;
  p.categories = std::move(categories);
  p.Validate();
  return p;
}

void ParamSpec::Validate() const {
  if (name.empty()) throw InvalidArgument("parameter name must not be empty");
  if (kind == ParamKind::kCategorical) {
    if (categories.empty()) {
      throw InvalidArgument("categorical parameter '" + name + "' has no categories");
    }
    std::set<std::string> unique(categories.begin(), categories.end());
    if (unique.size() != categories.size()) {
      throw InvalidArgument("categorical parameter '" + name + "' has duplicate categories");
    }
    if (scale == Scale::kLog) {
      throw InvalidArgument("categorical parameter '" + name + "' cannot be log-scaled");
    }
    return;
  }
  if (!std::isfinite(low) || !std::isfinite(high) || !(low < high)) {
    throw InvalidArgument("parameter '" + name + "' needs finite bounds with low < high");
  }
  if (kind == ParamKind::kInteger && (low != std::round(low) || high != std::round(high))) {
    throw InvalidArgument("integer parameter '" + name + "' needs integral bounds");
  }
  if (scale == Scale::kLog && low <= 0.0) {
    throw InvalidArgument("log-scale parameter '" + name + "' needs strictly positive bounds");
  }
}

SearchSpace::SearchSpace(std::vector<ParamSpec> params) : params_(std::move(params)) {
  std::set<std::string> names;
  for (const auto& p : params_) {
    p.Validate();
    if (!names.insert(p.name).second) {
      throw InvalidArgument("duplicate parameter name '" + p.name + "'");
    }
  }
  // Defaults must themselves be encodable.
  for (const auto& p : params_) {
    if (!p.default_value) continue;
    SearchSpace one;
    one.params_ = {p};
    one.Encode({{p.name, *p.default_value}});
  }
}

UnitPoint SearchSpace::Encode(const ParamValues& values) const {
  for (const auto& [name, _] : values) {
    auto it = std::find_if(params_.begin(), params_.end(),
                           [&](const ParamSpec& p) { return p.name == name; });
    if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  }
  UnitPoint u(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    auto it = values.find(p.name);
    if (it == values.end()) throw InvalidArgument("missing parameter '" + p.name + "'");
    const ParamValue& v = it->second;
    if (p.kind == ParamKind::kCategorical) {
      const auto* s = std::get_if<std::string>(&v);
      if (s == nullptr) {
        throw InvalidArgument("categorical parameter '" + p.name + "' expects a string");
      }
      auto c = std::find(p.categories.begin(), p.categories.end(), *s);
      if (c == p.categories.end()) {
        throw InvalidArgument("value \"" + *s + "\" is not a category of '" + p.name + "'");
      }
      const auto k = static_cast<double>(p.categories.size());
      u[i] = (static_cast<double>(c - p.categories.begin()) + 0.5) / k;
      continue;
    }
    const double x = AsNumber(p, v);
    if (!std::isfinite(x) || x < p.low || x > p.high) {
      std::ostringstream msg;
      msg << "value " << x << " of '" << p.name << "' is outside [" << p.low << ", " << p.high
          << "]";
      throw InvalidArgument(msg.str());
    }
    if (p.kind == ParamKind::kInteger && x != std::round(x)) {
      throw InvalidArgument("integer parameter '" + p.name + "' got a fractional value");
    }
    u[i] = std::clamp(ToUnit(p, x), 0.0, 1.0);
  }
  return u;
}

ParamValues SearchSpace::Decode(std::span<const double> u) const {
  if (u.size() != params_.size()) {
    throw InvalidArgument("unit point has dimension " + std::to_string(u.size()) +
                          ", search space has " + std::to_string(params_.size()));
  }
  ParamValues out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    const double ui = std::isnan(u[i]) ? 0.0 : std::clamp(u[i], 0.0, 1.0);
    switch (p.kind) {
      case ParamKind::kCategorical: {
        const auto k = p.categories.size();
        auto idx = static_cast<std::size_t>(std::floor(ui * static_cast<double>(k)));
        out.emplace(p.name, p.categories[std::min(idx, k - 1)]);
        break;
      }
      case ParamKind::kInteger: {
        const double r = std::clamp(std::round(FromUnit(p, ui)), p.low, p.high);
        out.emplace(p.name, static_cast<std::int64_t>(r));
        break;
      }
      case ParamKind::kContinuous:
        // Exact bounds at the cube faces; log/exp would otherwise drift by an ulp.
        out.emplace(p.name, ui == 0.0   ? p.low
                            : ui == 1.0 ? p.high
                                        : std::clamp(FromUnit(p, ui), p.low, p.high));
        break;
    }
  }
  return out;
}

ParamValues SearchSpace::DefaultConfig() const {
  ParamValues out;
  for (const auto& p : params_) {
    if (p.default_value) {
      out.emplace(p.name, *p.default_value);
      continue;
    }
    SearchSpace one;
    one.params_ = {p};
    const double centre = 0.5;
    out.merge(one.Decode(std::span<const double>(&centre, 1)));
  }
  return out;
}

struct SobolSequence::Engine {
  explicit Engine(std::size_t dim) : sobol(static_cast<unsigned>(dim)) {}
  boost::random::sobol_engine<std::uint32_t, 32> sobol;
};

SobolSequence::SobolSequence(std::size_t dim, std::uint64_t seed)
    : dim_(dim), shift_(dim), engine_(std::make_unique<Engine>(std::max<std::size_t>(dim, 1))) {
  if (dim == 0) throw InvalidArgument("Sobol' sequence needs dim >= 1");
  std::mt19937_64 rng(seed);
  for (auto& s : shift_) s = static_cast<std::uint32_t>(rng() >> 32);
}

SobolSequence::~SobolSequence() = default;
SobolSequence::SobolSequence(SobolSequence&&) noexcept = default;
SobolSequence& SobolSequence::operator=(SobolSequence&&) noexcept = default;

UnitPoint SobolSequence::Next() {
  constexpr double kScale = 1.0 / 4294967296.0;
  UnitPoint u(dim_);
  // boost starts at the second point of the sequence; emit the origin first.
  for (std::size_t d = 0; d < dim_; ++d) {
    const std::uint32_t raw = index_ == 0 ? 0u : engine_->sobol();
    u[d] = static_cast<double>(raw ^ shift_[d]) * kScale;
  }
  ++index_;
  return u;
}

std::vector<UnitPoint> SampleUnitCube(std::size_t dim, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("sample size must be >= 1");
  SobolSequence seq(dim, seed);
  std::vector<UnitPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(seq.Next());
  return out;
}

std::vector<UnitPoint> Sample(const SearchSpace& space, std::size_t n, std::uint64_t seed) {
  return SampleUnitCube(space.dim(), n, seed);
}

std::string ToString(const ParamValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  std::ostringstream os;
  os.precision(17);
  os << std::get<double>(v);
  return os.str();
}

}  // namespace cbo
