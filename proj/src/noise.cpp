#include "sito/noise.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sito {

namespace rng {

namespace {

// Philox4x32-10 round constants (Salmon et al., SC'11).
constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t* hi, uint32_t* lo) {
  uint64_t prod = static_cast<uint64_t>(a) * b;
  *hi = static_cast<uint32_t>(prod >> 32);
  *lo = static_cast<uint32_t>(prod);
}

std::array<uint32_t, 4> philox(std::array<uint32_t, 4> ctr,
                               std::array<uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], &hi0, &lo0);
    mulhilo(kPhiloxM1, ctr[2], &hi1, &lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::array<uint32_t, 4> block_for(uint64_t seed, const DrawKey& k) {
  std::array<uint32_t, 4> ctr = {
      static_cast<uint32_t>(k.stream),
      static_cast<uint32_t>(k.stream >> 32),
      (k.process & 0xFu) | ((k.purpose & 0xFu) << 4) | ((k.level & 0xFFu) << 8),
      k.index};
  std::array<uint32_t, 2> key = {static_cast<uint32_t>(seed),
                                 static_cast<uint32_t>(seed >> 32)};
  return philox(ctr, key);
}

inline double to_unit(uint32_t hi, uint32_t lo) {
  uint64_t bits = (static_cast<uint64_t>(hi) << 32) | lo;
  double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return u > 0.0 ? u : 0x1.0p-53;
}

}  // namespace

void uniform_pair(uint64_t seed, const DrawKey& key, double* u1, double* u2) {
  auto out = block_for(seed, key);
  *u1 = to_unit(out[0], out[1]);
  *u2 = to_unit(out[2], out[3]);
}

double gaussian(uint64_t seed, const DrawKey& key) {
  double u1, u2;
  uniform_pair(seed, key, &u1, &u2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace rng

WienerPath sample_path(double t, int n, uint64_t seed, uint64_t stream) {
  if (!(t > 0.0)) throw std::invalid_argument("path horizon must be positive");
  if (n < 1) throw std::invalid_argument("path needs at least one step");
  WienerPath p;
  p.horizon = t;
  p.steps = n;
  p.seed = seed;
  p.stream = stream;
  p.level = 0;
  p.base_steps = n;
  p.dw1.resize(n);
  p.dw2.resize(n);
  const double sd = std::sqrt(t / n);
  for (int j = 0; j < n; ++j) {
    p.dw1[j] = sd * rng::gaussian(seed, {stream, 0, 0, 0, static_cast<uint32_t>(j)});
    p.dw2[j] = sd * rng::gaussian(seed, {stream, 1, 0, 0, static_cast<uint32_t>(j)});
  }
  return p;
}

WienerPath refine(const WienerPath& path) {
  WienerPath out;
  out.horizon = path.horizon;
  out.steps = 2 * path.steps;
  out.seed = path.seed;
  out.stream = path.stream;
  out.level = path.level + 1;
  out.base_steps = path.base_steps;
  out.dw1.resize(out.steps);
  out.dw2.resize(out.steps);
  const double v = path.step_size();
  const double half_sd = 0.5 * std::sqrt(v);
  const uint32_t child_level = static_cast<uint32_t>(out.level);
  for (int j = 0; j < path.steps; ++j) {
    // Midpoint draws are keyed by the odd boundary they create, which is
    // unique across the whole dyadic tree.
    uint32_t odd = static_cast<uint32_t>(2 * j + 1);
    double z1 = rng::gaussian(path.seed, {path.stream, 0, 1, child_level, odd});
    double z2 = rng::gaussian(path.seed, {path.stream, 1, 1, child_level, odd});
    double a1 = 0.5 * path.dw1[j] + half_sd * z1;
    double a2 = 0.5 * path.dw2[j] + half_sd * z2;
    out.dw1[2 * j] = a1;
    out.dw1[2 * j + 1] = path.dw1[j] - a1;
    out.dw2[2 * j] = a2;
    out.dw2[2 * j + 1] = path.dw2[j] - a2;
  }
  return out;
}

WienerPath coarsen(const WienerPath& path) {
  if (path.steps % 2 != 0)
    throw std::invalid_argument("cannot coarsen an odd-length path");
  WienerPath out;
  out.horizon = path.horizon;
  out.steps = path.steps / 2;
  out.seed = path.seed;
  out.stream = path.stream;
  out.level = path.level - 1;
  out.base_steps = path.base_steps;
  out.dw1.resize(out.steps);
  out.dw2.resize(out.steps);
  for (int j = 0; j < out.steps; ++j) {
    out.dw1[j] = path.dw1[2 * j] + path.dw1[2 * j + 1];
    out.dw2[j] = path.dw2[2 * j] + path.dw2[2 * j + 1];
  }
  return out;
}

double levy_modulus(const WienerPath& path) {
  if (path.steps < 64)
    throw std::invalid_argument("levy_modulus needs at least 64 steps");
  const double v = path.step_size();
  if (v >= 1.0)
    throw std::invalid_argument("levy_modulus needs step size t/n < 1");
  const double denom = std::sqrt(-2.0 * v * std::log(v));
  double worst = 0.0;
  for (int j = 0; j < path.steps; ++j) {
    worst = std::max(worst, std::abs(path.dw1[j]));
    worst = std::max(worst, std::abs(path.dw2[j]));
  }
  return worst / denom;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void write_sidecar(const WienerPath& path, const std::string& filename) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(filename.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open sidecar for writing: " + filename);
  double t = path.horizon;
  uint64_t n = static_cast<uint64_t>(path.steps);
  uint64_t seed = path.seed;
  bool ok = std::fwrite(&t, sizeof t, 1, f.get()) == 1 &&
            std::fwrite(&n, sizeof n, 1, f.get()) == 1 &&
            std::fwrite(&seed, sizeof seed, 1, f.get()) == 1 &&
            std::fwrite(path.dw1.data(), sizeof(double), path.steps, f.get()) ==
                static_cast<size_t>(path.steps) &&
            std::fwrite(path.dw2.data(), sizeof(double), path.steps, f.get()) ==
                static_cast<size_t>(path.steps);
  if (!ok) throw std::runtime_error("short write on sidecar: " + filename);
}

WienerPath read_sidecar(const std::string& filename) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(filename.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open sidecar: " + filename);
  double t = 0.0;
  uint64_t n = 0, seed = 0;
  if (std::fread(&t, sizeof t, 1, f.get()) != 1 ||
      std::fread(&n, sizeof n, 1, f.get()) != 1 ||
      std::fread(&seed, sizeof seed, 1, f.get()) != 1)
    throw std::runtime_error("truncated sidecar header: " + filename);
  WienerPath p;
  p.horizon = t;
  p.steps = static_cast<int>(n);
  p.seed = seed;
  p.base_steps = p.steps;
  p.dw1.resize(p.steps);
  p.dw2.resize(p.steps);
  if (std::fread(p.dw1.data(), sizeof(double), p.steps, f.get()) !=
          static_cast<size_t>(p.steps) ||
      std::fread(p.dw2.data(), sizeof(double), p.steps, f.get()) !=
          static_cast<size_t>(p.steps))
    throw std::runtime_error("truncated sidecar payload: " + filename);
  return p;
}

}  // namespace sito
