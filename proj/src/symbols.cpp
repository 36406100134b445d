#include "psolv/symbols.hpp"

#include <cmath>
#include <random>

#include "psolv/common.hpp"

namespace psolv {

ScalarSymbol builtin_symbol(const std::string& name) {
  if (name == "zero")
    return [](double, double, double) { return 0.0; };
  if (name == "coordinate_x")
    return [](double, double x, double) { return x; };
  if (name == "t_times_g")
    return [](double t, double, double xi) { return t * (1.0 + std::tanh(xi)); };
  if (name == "minus_t_times_g")
    return
        [](double t, double, double xi) { return -t * (1.0 + std::tanh(xi)); };
  if (name == "xsq_minus_xi_bump")
    return [](double, double x, double xi) {
      return x * x - std::exp(-xi * xi);
    };
  if (name == "t_ramp_bump")
    return [](double t, double x, double xi) {
      return t * std::exp(-x * x - xi * xi);
    };
  throw Error("unknown builtin symbol: " + name);
}

std::vector<std::string> builtin_names() {
  return {"zero",            "coordinate_x",      "t_times_g",
          "minus_t_times_g", "xsq_minus_xi_bump", "t_ramp_bump"};
}

ScalarSymbol random_compliant_symbol(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.2, 1.1);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979324);
  std::normal_distribution<double> amp(0.0, 1.0);

  // Low-frequency trigonometric polynomials keep h^{1/2}|f'| and h|f''|
  // inside the symbol-class budget on the standard windows.
  const int K = 3;
  struct Mode {
    double a, wx, wxi, px, pxi;
  };
  std::vector<Mode> base(K), root(K);
  for (int j = 0; j < K; ++j)
    base[j] = {amp(rng) / K, freq(rng), freq(rng), phase(rng), phase(rng)};
  for (int j = 0; j < K; ++j)
    root[j] = {amp(rng) / K, freq(rng), freq(rng), phase(rng), phase(rng)};

  return [base, root](double t, double x, double xi) {
    double a = 0.0, g = 0.0;
    for (const auto& m : base)
      a += m.a * std::sin(m.wx * x + m.px) * std::sin(m.wxi * xi + m.pxi);
    for (const auto& m : root)
      g += m.a * std::sin(m.wx * x + m.px) * std::sin(m.wxi * xi + m.pxi);
    return a + t * g * g;  // c = g^2 >= 0
  };
}

std::vector<NamedSymbol> compliance_corpus(std::size_t n_random,
                                           std::uint64_t seed) {
  std::vector<NamedSymbol> out;
  for (const std::string& name : builtin_names())
    if (name != "minus_t_times_g")
      out.push_back({name, builtin_symbol(name)});
  for (std::size_t j = 0; j < n_random; ++j) {
    out.push_back({"random-" + std::to_string(j),
                   random_compliant_symbol(seed + 0x9e3779b9u * (j + 1))});
  }
  return out;
}

}  // namespace psolv
