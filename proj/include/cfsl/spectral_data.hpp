#pragma once

// The four spectral data sets, synthetic generation from a Problem, the first
// spectral moment estimate and (de)serialization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cfsl/conformable.hpp"
#include "cfsl/errors.hpp"
#include "cfsl/forward.hpp"
#include "cfsl/io.hpp"
#include "cfsl/problem.hpp"

namespace cfsl {

enum class DataKind { weyl_samples, two_spectra, spectrum_with_norms, mixed_half };

inline std::string to_string(DataKind k) {
  switch (k) {
    case DataKind::weyl_samples: return "WeylSamples";
    case DataKind::two_spectra: return "TwoSpectra";
    case DataKind::spectrum_with_norms: return "SpectrumWithNorms";
    case DataKind::mixed_half: return "MixedHalf";
  }
  return "?";
}

inline DataKind data_kind_from_string(const std::string& s) {
  for (auto k : {DataKind::weyl_samples, DataKind::two_spectra, DataKind::spectrum_with_norms, DataKind::mixed_half})
    if (to_string(k) == s) return k;
  throw parse_error("kind: unknown dataset kind '" + s + "'");
}

/// Samples (lambda_j, M(lambda_j)) of the Weyl function, lambda_j off the spectrum.
struct WeylSamples {
  std::vector<double> lambdas;
  std::vector<double> values;
  bool operator==(const WeylSamples&) const = default;
};

/// {lambda_n} and the spectrum {xi_n} of the problem with y(0) = 0.
struct TwoSpectra {
  std::vector<double> lambdas;
  std::vector<double> xis;
  bool operator==(const TwoSpectra&) const = default;
};

/// {lambda_n} with norming constants alpha_n = int phi_n^2 d_alpha x.
struct SpectrumWithNorms {
  std::vector<double> lambdas;
  std::vector<double> norms;
  bool operator==(const SpectrumWithNorms&) const = default;
};

/// One spectrum, the known H and q on [pi/2, pi] sampled on a uniform x-grid.
struct MixedHalf {
  std::vector<double> lambdas;
  double H = 0.0;
  std::vector<double> tail;
  bool operator==(const MixedHalf&) const = default;

  /// x-coordinate of tail sample i.
  double tail_node(std::size_t i) const {
    return 0.5 * pi + 0.5 * pi * static_cast<double>(i) / static_cast<double>(tail.size() - 1);
  }
};

using DataPayload = std::variant<WeylSamples, TwoSpectra, SpectrumWithNorms, MixedHalf>;

namespace detail {

inline void check_increasing(const std::vector<double>& v, const std::string& path) {
  if (v.empty()) throw parse_error(path + ": empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw parse_error(path + ": non-finite entry");
    if (i > 0 && !(v[i] > v[i - 1])) throw parse_error(path + ": spectrum not increasing at index " + std::to_string(i));
  }
}

}  // namespace detail

/// A validated, immutable spectral data set.
class SpectralDataset {
 public:
  SpectralDataset(Order order, DataPayload payload) : order_(order), payload_(std::move(payload)) { validate(); }

  DataKind kind() const noexcept { return static_cast<DataKind>(payload_.index()); }
  Order order() const noexcept { return order_; }
  const DataPayload& payload() const noexcept { return payload_; }

  template <typename T>
  const T& get() const {
    return std::get<T>(payload_);
  }

  /// Number of scalar data entries a fit can use.
  std::size_t size() const {
    return std::visit(
        [](const auto& d) -> std::size_t {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, WeylSamples>) return d.lambdas.size();
          else if constexpr (std::is_same_v<T, TwoSpectra>) return d.lambdas.size() + d.xis.size();
          else if constexpr (std::is_same_v<T, SpectrumWithNorms>) return 2 * d.lambdas.size();
          else return d.lambdas.size();
        },
        payload_);
  }

  bool operator==(const SpectralDataset& o) const { return order_ == o.order_ && payload_ == o.payload_; }

 private:
  void validate() const {
    std::visit(
        [](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, WeylSamples>) {
            if (d.lambdas.empty()) throw parse_error("payload.lambda: empty");
            if (d.lambdas.size() != d.values.size()) throw parse_error("payload.M: length differs from payload.lambda");
            for (std::size_t i = 0; i < d.lambdas.size(); ++i)
              if (!std::isfinite(d.lambdas[i]) || !std::isfinite(d.values[i]))
                throw parse_error("payload: non-finite Weyl sample at index " + std::to_string(i));
          } else if constexpr (std::is_same_v<T, TwoSpectra>) {
            detail::check_increasing(d.lambdas, "payload.lambda");
            detail::check_increasing(d.xis, "payload.xi");
          } else if constexpr (std::is_same_v<T, SpectrumWithNorms>) {
            detail::check_increasing(d.lambdas, "payload.lambda");
            if (d.norms.size() != d.lambdas.size()) throw parse_error("payload.alpha: length differs from payload.lambda");
            for (double a : d.norms)
              if (!(a > 0.0) || !std::isfinite(a)) throw parse_error("payload.alpha: norming constants must be positive");
          } else {
            detail::check_increasing(d.lambdas, "payload.lambda");
            if (!std::isfinite(d.H)) throw parse_error("payload.H: not finite");
            if (d.tail.size() < 4) throw parse_error("payload.tail: need at least four samples");
            for (double v : d.tail)
              if (!std::isfinite(v)) throw parse_error("payload.tail: non-finite sample");
          }
        },
        payload_);
  }

  Order order_;
  DataPayload payload_;
};

/// Weyl samples of p at the given spectral parameters.
inline WeylSamples weyl_samples(const Problem& p, std::span<const double> lambdas, const IntegratorOptions& opt = {}) {
  WeylSamples w;
  for (double l : lambdas) {
    w.lambdas.push_back(l);
    w.values.push_back(weyl_function(p, l, opt));
  }
  return w;
}

/// Synthetic data from the forward map. WeylSamples places `count` samples at
/// midpoints of consecutive eigenvalues and 10 more at min(lambda_0, 0) - j.
/// MixedHalf samples the tail on `tail_nodes` uniform x-nodes over [pi/2, pi].
inline SpectralDataset generate(const Problem& p, DataKind kind, std::size_t count, const IntegratorOptions& opt = {},
                                std::size_t tail_nodes = 257) {
  if (count == 0) throw usage_error("generate: count must be at least 1");
  switch (kind) {
    case DataKind::two_spectra:
      return {p.order, TwoSpectra{eigenvalues(p, count, opt), second_spectrum(p, count, opt)}};
    case DataKind::spectrum_with_norms: {
      const auto eigs = eigenvalues(p, count, opt);
      SpectrumWithNorms d;
      d.lambdas = eigs;
      for (const auto& r : norming_constants(p, eigs, opt)) d.norms.push_back(r.alpha);
      return {p.order, d};
    }
    case DataKind::weyl_samples: {
      const auto eigs = eigenvalues(p, count + 1, opt);
      std::vector<double> at;
      for (std::size_t j = 10; j >= 1; --j) at.push_back(std::min(eigs[0], 0.0) - static_cast<double>(j));
      for (std::size_t n = 0; n < count; ++n) at.push_back(0.5 * (eigs[n] + eigs[n + 1]));
      return {p.order, weyl_samples(p, at, opt)};
    }
    case DataKind::mixed_half: {
      MixedHalf d;
      d.lambdas = eigenvalues(p, count, opt);
      d.H = p.H;
      d.tail.resize(tail_nodes);
      for (std::size_t i = 0; i < tail_nodes; ++i) d.tail[i] = p.q.at_x(d.tail_node(i));
      return {p.order, d};
    }
  }
  throw usage_error("generate: unknown kind");
}

/// omega = h + H + 1/2 int q d_alpha x estimated from an eigenvalue list.
/// moments[n] = n pi (sqrt(lambda_n) - n alpha / pi^(alpha-1)) for n >= 1
/// (moments[0] is unused and 0); residuals[n] = moments[n] - omega.
struct OmegaEstimate {
  double omega = 0.0;
  std::vector<double> moments;
  std::vector<double> residuals;
};

inline OmegaEstimate estimate_omega(std::span<const double> eigs, Order order) {
  const std::size_t count = eigs.size();
  if (count < 10) throw usage_error("estimate_omega: insufficient data (need at least 10 eigenvalues)");
  const double w = pi / order.t_end();
  OmegaEstimate e;
  e.moments.assign(count, 0.0);
  for (std::size_t n = 1; n < count; ++n) {
    const double k = static_cast<double>(n);
    e.moments[n] = k * pi * (std::sqrt(std::max(eigs[n], 0.0)) - k * w);
  }
  std::vector<double> tail(e.moments.begin() + static_cast<std::ptrdiff_t>(count / 2), e.moments.end());
  std::sort(tail.begin(), tail.end());
  const std::size_t m = tail.size();
  e.omega = m % 2 == 1 ? tail[m / 2] : 0.5 * (tail[m / 2 - 1] + tail[m / 2]);
  e.residuals.assign(count, 0.0);
  for (std::size_t n = 1; n < count; ++n) e.residuals[n] = e.moments[n] - e.omega;
  return e;
}

inline json to_json(const SpectralDataset& d) {
  json payload = std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WeylSamples>) return {{"lambda", p.lambdas}, {"M", p.values}};
        else if constexpr (std::is_same_v<T, TwoSpectra>) return {{"lambda", p.lambdas}, {"xi", p.xis}};
        else if constexpr (std::is_same_v<T, SpectrumWithNorms>) return {{"lambda", p.lambdas}, {"alpha", p.norms}};
        else return {{"lambda", p.lambdas}, {"H", p.H}, {"tail", p.tail}};
      },
      d.payload());
  return json{{"kind", to_string(d.kind())}, {"alpha", d.order().value()}, {"payload", payload}};
}

inline SpectralDataset dataset_from_json(const json& j) {
  const json& kind = detail::field(j, "kind", "dataset");
  if (!kind.is_string()) throw parse_error("kind: expected a string");
  const DataKind k = data_kind_from_string(kind.get<std::string>());
  const Order order = detail::order_field(j, "dataset");
  const json& pl = detail::field(j, "payload", "dataset");
  auto list = [&](const char* key) { return detail::numbers(detail::field(pl, key, "payload"), std::string("payload.") + key); };
  switch (k) {
    case DataKind::weyl_samples: return {order, WeylSamples{list("lambda"), list("M")}};
    case DataKind::two_spectra: return {order, TwoSpectra{list("lambda"), list("xi")}};
    case DataKind::spectrum_with_norms: return {order, SpectrumWithNorms{list("lambda"), list("alpha")}};
    case DataKind::mixed_half:
      return {order, MixedHalf{list("lambda"), detail::number(detail::field(pl, "H", "payload"), "payload.H"), list("tail")}};
  }
  throw parse_error("kind: unsupported");
}

inline SpectralDataset read_dataset(const std::filesystem::path& path) { return dataset_from_json(read_json_file(path)); }

inline void write_dataset(const SpectralDataset& d, const std::filesystem::path& path) { write_json_file(path, to_json(d)); }

/// (n, lambda_n, ...) table; the extra column depends on the kind.
inline std::string dataset_csv(const SpectralDataset& d) {
  std::ostringstream os;
  auto row = [&](std::size_t n, double a, const double* b) {
    os << n << ',' << format_number(a);
    if (b) os << ',' << format_number(*b);
    os << '\n';
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WeylSamples>) {
          os << "j,lambda,M\n";
          for (std::size_t i = 0; i < p.lambdas.size(); ++i) row(i, p.lambdas[i], &p.values[i]);
        } else if constexpr (std::is_same_v<T, TwoSpectra>) {
          os << "n,lambda,xi\n";
          for (std::size_t i = 0; i < std::max(p.lambdas.size(), p.xis.size()); ++i) {
            os << i << ',' << (i < p.lambdas.size() ? format_number(p.lambdas[i]) : "") << ','
               << (i < p.xis.size() ? format_number(p.xis[i]) : "") << '\n';
          }
        } else if constexpr (std::is_same_v<T, SpectrumWithNorms>) {
          os << "n,lambda,alpha\n";
          for (std::size_t i = 0; i < p.lambdas.size(); ++i) row(i, p.lambdas[i], &p.norms[i]);
        } else {
          os << "n,lambda\n";
          for (std::size_t i = 0; i < p.lambdas.size(); ++i) row(i, p.lambdas[i], nullptr);
        }
      },
      d.payload());
  return os.str();
}

}  // namespace cfsl
