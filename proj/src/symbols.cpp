#include "sito/symbols.hpp"

#include <cmath>
#include <stdexcept>

namespace sito {

double eval_H(const SymbolModel& s, double q, double p) {
  double v = 0.0;
  if (s.k0) v += s.k0(q);
  if (s.h0) v += s.h0(p);
  if (s.l) v += s.l(q, p);
  return v;
}

namespace {

double take(std::map<std::string, double>* rest, const std::string& key,
            double fallback) {
  auto it = rest->find(key);
  if (it == rest->end()) return fallback;
  double v = it->second;
  rest->erase(it);
  return v;
}

void reject_leftovers(const std::string& name,
                      const std::map<std::string, double>& rest,
                      const std::string& allowed) {
  if (rest.empty()) return;
  throw std::invalid_argument("unknown parameter '" + rest.begin()->first +
                              "' for builtin '" + name +
                              "' (allowed: " + allowed + ")");
}

RealFn1 gauss_bump() {
  return [](double x) { return std::exp(-0.5 * x * x); };
}

}  // namespace

SymbolModel builtin(const std::string& name,
                    const std::map<std::string, double>& params) {
  SymbolModel s;
  s.name = name;
  std::map<std::string, double> rest = params;
  s.mu1 = take(&rest, "mu1", 0.0);
  s.mu2 = take(&rest, "mu2", 0.0);
  if (s.mu1 < 0.0 || s.mu2 < 0.0)
    throw std::invalid_argument("mu1/mu2 must be nonnegative");
  s.k = gauss_bump();
  s.h = gauss_bump();
  s.k_bound = 1.0;
  s.h_bound = 1.0;

  if (name == "free") {
    double mass = take(&rest, "mass", 1.0);
    reject_leftovers(name, rest, "mu1, mu2, mass");
    s.h0 = [mass](double p) { return 0.5 * p * p / mass; };
    s.out_of_hypotheses = true;
  } else if (name == "gaussian_well") {
    double depth = take(&rest, "depth", 1.0);
    reject_leftovers(name, rest, "mu1, mu2, depth");
    s.k0 = [depth](double q) { return -depth * std::exp(-q * q); };
    s.h0 = [](double p) { return 0.5 * p * p; };
  } else if (name == "cosine_potential") {
    double amp = take(&rest, "amp", 1.0);
    double freq = take(&rest, "freq", 1.0);
    reject_leftovers(name, rest, "mu1, mu2, amp, freq");
    s.k0 = [amp, freq](double q) { return amp * std::cos(freq * q); };
    s.h0 = [](double p) { return 0.5 * p * p; };
  } else if (name == "harmonic") {
    double omega = take(&rest, "omega", 1.0);
    reject_leftovers(name, rest, "mu1, mu2, omega");
    s.k0 = [omega](double q) { return 0.5 * omega * omega * q * q; };
    s.h0 = [](double p) { return 0.5 * p * p; };
    s.out_of_hypotheses = true;
  } else if (name == "bounded_coupled") {
    double a = take(&rest, "coupling", 0.5);
    reject_leftovers(name, rest, "mu1, mu2, coupling");
    s.k0 = [](double q) { return -std::exp(-q * q); };
    s.h0 = [](double p) { return std::exp(-p * p); };
    s.l = [a](double q, double p) { return a * std::exp(-q * q - p * p); };
    s.separable = false;
  } else {
    throw std::invalid_argument(
        "unknown builtin symbol '" + name +
        "' (known: free, gaussian_well, cosine_potential, harmonic, "
        "bounded_coupled)");
  }
  return s;
}

}  // namespace sito
