#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cbo {

enum class ParamKind { kContinuous, kInteger, kCategorical };
enum class Scale { kLinear, kLog };

/// A single user-facing hyperparameter value.
using ParamValue = std::variant<double, std::int64_t, std::string>;

/// A full configuration, keyed by parameter name.
using ParamValues = std::map<std::string, ParamValue>;

/// One point of the unit hypercube the surrogates operate on.
using UnitPoint = std::vector<double>;

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::kContinuous;
  double low = 0.0;
  double high = 1.0;
  std::vector<std::string> categories;
  Scale scale = Scale::kLinear;
  /// Value used for the first (baseline) evaluation. Domain centre when absent.
  std::optional<ParamValue> default_value;

  static ParamSpec Continuous(std::string name, double low, double high,
                              Scale scale = Scale::kLinear);
  static ParamSpec Integer(std::string name, std::int64_t low, std::int64_t high,
                           Scale scale = Scale::kLinear);
  static ParamSpec Categorical(std::string name, std::vector<std::string> categories);

  ParamSpec&& WithDefault(ParamValue v) && {
    default_value = std::move(v);
    return std::move(*this);
  }

  /// Throws InvalidArgument when bounds, scale or categories are inconsistent.
  void Validate() const;
};

/// Ordered hyperparameter domain with a bijection onto [0,1]^dim.
///
/// Every parameter occupies exactly one encoded dimension. Categoricals use
/// the normalized index (i + 0.5) / k, which imposes an artificial order on
/// the categories but keeps the GP input dimension small.
class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<ParamSpec> params);

  const std::vector<ParamSpec>& params() const { return params_; }
  std::size_t dim() const { return params_.size(); }

  /// Maps a complete configuration to the unit cube.
  UnitPoint Encode(const ParamValues& values) const;

  /// Maps a unit-cube point back to parameter values. Coordinates are clamped
  /// to [0,1]; integers are rounded to the nearest valid value.
  ParamValues Decode(std::span<const double> u) const;

  /// The configuration evaluated first: declared defaults, else domain centres.
  ParamValues DefaultConfig() const;

 private:
  std::vector<ParamSpec> params_;
};

/// Digitally shifted Sobol' sequence on [0,1)^dim.
///
/// The unshifted origin is emitted first, so any prefix of length 2^m is a
/// full (t,m,s)-net. A seeded XOR shift per coordinate scrambles the sequence
/// while preserving the net structure.
class SobolSequence {
 public:
  SobolSequence(std::size_t dim, std::uint64_t seed);
  ~SobolSequence();
  SobolSequence(SobolSequence&&) noexcept;
  SobolSequence& operator=(SobolSequence&&) noexcept;

  std::size_t dim() const { return dim_; }
  UnitPoint Next();

 private:
  struct Engine;
  std::size_t dim_;
  std::vector<std::uint32_t> shift_;
  std::uint64_t index_ = 0;
  std::unique_ptr<Engine> engine_;
};

/// n points of the seeded Sobol' sequence. Pure function of (n, seed, dim).
std::vector<UnitPoint> Sample(const SearchSpace& space, std::size_t n, std::uint64_t seed);
std::vector<UnitPoint> SampleUnitCube(std::size_t dim, std::size_t n, std::uint64_t seed);

std::string ToString(const ParamValue& v);

}  // namespace cbo
