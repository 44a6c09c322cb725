#include "actlab/zoo.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "actlab/error.hpp"
#include "actlab/eval.hpp"

namespace actlab {

namespace {

double clip01(double v) { return std::min(std::max(v, 0.0), 1.0); }

ZooEntry dsl_entry(std::string name, const char* text, std::string description,
                   std::string source) {
  ZooEntry e;
  e.name = std::move(name);
  e.kind = EntryKind::DslExpressible;
  e.trainability = Trainability::ExactAd;
  e.expr = parse(text);
  e.description = std::move(description);
  e.source_dataset = std::move(source);
  return e;
}

std::map<std::string, ZooEntry> make_table() {
  std::map<std::string, ZooEntry> t;
  auto put = [&](ZooEntry e) { t.emplace(e.name, std::move(e)); };

  put(dsl_entry("relu", "(relu x)", "max(0, x); the search seed", "baseline"));
  put(dsl_entry("gelu", "(gelu x)", "tanh-approximation GELU", "baseline"));
  put(dsl_entry("gelusine", "(add (gelu x) (mul 0.1 (sin x)))", "GELU(x) + 0.1 sin(x)",
                "sin product"));
  put(dsl_entry("gelusinc", "(mul (gelu x) (add 1 (mul 0.5 (sinc x))))",
                "GELU(x) * (1 + 0.5 sinc(x)), normalized sinc", "polynomials"));
  put(dsl_entry("gmtu",
                "(add (mul (mul 1 (tanh (mul 1.5 x))) (exp (mul -0.2 (mul x x)))) (mul 0.1 x))",
                "tanh(1.5x) exp(-0.2x^2) + 0.1x", "sin product"));
  put(dsl_entry("turbulent",
                "(add (mul (sign x) (log1p (mul 0.5 (abs x))))"
                " (mul (mul 0.2 (exp (mul -0.5 (pow (div (sub x (batch-mean x)) (batch-std x)) 2))))"
                " (sin (mul 2 x))))",
                "sign(x) log1p(0.5|x|) plus a batch-standardized Gaussian ripple",
                "Feynman equations"));

  ZooEntry q;
  q.name = "quaternion";
  q.kind = EntryKind::NativePointwise;
  q.trainability = Trainability::FiniteDifference;
  q.pointwise = quaternion;
  q.description = "x times a four-component damped oscillatory gate";
  q.source_dataset = "Feynman equations";
  put(std::move(q));

  ZooEntry p;
  p.name = "pler";
  p.kind = EntryKind::NativePointwise;
  p.trainability = Trainability::FiniteDifference;
  p.pointwise = pler;
  p.description = "x times the state of a 10-step coupled logistic map";
  p.source_dataset = "spherical harmonics";
  put(std::move(p));

  ZooEntry f;
  f.name = "fisg";
  f.kind = EntryKind::NativeTensor;
  f.trainability = Trainability::ForwardOnly;
  f.tensor = fisg;
  f.description = "per-row blend with a phase-conjugated high band, gated by spectral imbalance";
  f.source_dataset = "Feynman equations";
  put(std::move(f));

  ZooEntry s;
  s.name = "spf";
  s.kind = EntryKind::NativeTensor;
  s.trainability = Trainability::ForwardOnly;
  s.tensor = spf;
  s.description = "switches between two phase-flipped saturating states using feature neighbours";
  s.source_dataset = "polynomials";
  put(std::move(s));
  return t;
}

const std::map<std::string, ZooEntry>& table() {
  static const auto t = make_table();
  return t;
}

}  // namespace

const char* to_string(EntryKind kind) noexcept {
  switch (kind) {
    case EntryKind::DslExpressible: return "dsl-expressible";
    case EntryKind::NativePointwise: return "native-pointwise";
    case EntryKind::NativeTensor: return "native-tensor";
  }
  return "unknown";
}

Activation ZooEntry::activation() const {
  switch (kind) {
    case EntryKind::DslExpressible: return Activation::from_expr(*expr);
    case EntryKind::NativePointwise: return Activation::pointwise(name, pointwise);
    case EntryKind::NativeTensor: break;
  }
  return Activation::forward_only(name, tensor);
}

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {
      "relu", "gelu", "gelusine", "gelusinc", "gmtu",
      "turbulent", "quaternion", "pler", "fisg", "spf"};
  return names;
}

const ZooEntry& builtin(const std::string& name) {
  const auto& t = table();
  const auto it = t.find(name);
  if (it == t.end()) {
    throw Error(ErrorKind::UnknownActivation, "unknown activation '" + name + "'");
  }
  return it->second;
}

Tensor2 eval_entry(const ZooEntry& entry, const Tensor2& x) {
  return entry.activation().forward(x);
}

Tensor2 fd_gradient(const ZooEntry& entry, const Tensor2& x, double h) {
  if (entry.kind == EntryKind::NativePointwise) return central_difference(entry.pointwise, x, h);
  if (entry.kind == EntryKind::DslExpressible && !entry.expr->uses_batch_stats()) {
    const CompiledExpr program(*entry.expr);
    return central_difference(
        [&](double v) { return program.forward(Tensor2(1, 1, v))(0, 0); }, x, h);
  }
  throw Error(ErrorKind::InvalidArgument, "'" + entry.name + "' is not pointwise");
}

double quaternion(double x) {
  const double A = 0.1 + 0.05 * std::cos(4.0 * x);
  const double B_freq = 2.5;
  const double B = 0.5 + 0.2 * std::sin(B_freq * x + 2.0 * A);
  const double y_chaos = (std::sin(2.1 * x) * std::cos(1.3 * x) + 1.0) / 2.0;

  const double C_freq = 2.0;
  const double C_amp = 0.05 + 0.1 * y_chaos;
  const double u = std::tanh(C_freq * x);
  const double u2 = u * u;
  const double cheby_t4 = 8 * (u2 * u2) - 8 * u2 + 1.0;
  const double Cr = 0.1 + C_amp * cheby_t4;

  const double Ci_amp = 0.2 + 0.4 * (1.0 - y_chaos);
  const double ui = std::tanh(2.0 * x);
  const double cheby_t3 = 4 * (ui * ui * ui) - 3 * ui;
  const double Ci = 0.0 + Ci_amp * cheby_t3;

  const double xc = x - Cr;
  const double stable_magnitude = A * (x * x) * std::exp(-B * (xc * xc));
  const double phase = 2 * B * Ci * xc;
  const double q_w = stable_magnitude * std::cos(phase);
  const double q_i = stable_magnitude * std::sin(phase);

  const double D_amp = 0.1 + 0.2 * y_chaos;
  const double ud = std::tanh(1.5 * x);
  const double D_shift = D_amp * (2 * (ud * ud) - 1.0);
  const double xj = x - D_shift;
  const double xk = x + D_shift;
  const double q_j = (0.5 * A * (x * x)) * std::exp(-B * (xj * xj)) * std::sin(C_freq * x + Ci);
  const double q_k = (0.5 * B * (x * x)) * std::exp(-A * (xk * xk)) * std::cos(B_freq * x - Cr);

  const double gate = 1.0 - (q_w - 0.2 * q_i - 0.15 * q_j - 0.15 * q_k);
  return x * gate;
}

double pler(double x) {
  const double x2 = x * x;
  const double r = 2.5 + 1.5 * std::tanh(x2 / 4.0);
  const double alpha = 0.1 * std::tanh(x2 / 16.0);
  const double r_ref = 3.9;
  const double alpha_ref = 0.05;
  const double beta = 0.1 * (1.0 - 2.0 * std::tanh(x2 / 8.0));
  const double omega_ref = std::cos(x * 2.5);
  const double resonance_gate = std::exp(-25.0 * (omega_ref * omega_ref));

  double y = 0.5 + 0.49 * std::tanh(x / 4.0);
  double z = 0.5 - 0.49 * std::tanh(x / 4.0);
  double y_ref = 0.2;
  double z_ref = 0.8;
  double c = 0.0;

  for (int i = 0; i < 10; ++i) {
    const double instability_feedback = std::tanh(c * 4.0);
    const double beta_eff = beta - 0.2 * instability_feedback;
    const double is_ood = 1.0 / (1.0 + std::exp(beta_eff * 50.0));

    const double coupling_internal = alpha * (z - y);
    double y_dyn = r * y * (1 - y) + coupling_internal;
    double z_dyn = r * z * (1 - z) - coupling_internal;
    y_dyn -= is_ood * 0.5 * y;
    z_dyn -= is_ood * 0.5 * z;

    const double gamma = is_ood * std::tanh(c * 4.0);
    double y_next = y_dyn * (1.0 - gamma);
    double z_next = z_dyn * (1.0 - gamma);

    const double tunnel_y = resonance_gate * 0.6 * (0.5 - y_next);
    const double tunnel_z = resonance_gate * 0.6 * (0.5 - z_next);
    y_next += tunnel_y;
    z_next += tunnel_z;

    const double coupling_ref_internal = alpha_ref * (z_ref - y_ref);
    double y_ref_next = r_ref * y_ref * (1 - y_ref) + coupling_ref_internal;
    const double z_ref_next = r_ref * z_ref * (1 - z_ref) - coupling_ref_internal;

    const double c_next = 0.8 * c + 0.2 * std::abs(y_next - z_next);

    const double ood_modulation = 1.0 + std::tanh(std::abs(beta_eff) * 5.0) * (z * z);
    const double ood_amplification = 1.0 + std::tanh(c_next * 2.0);
    const double coupling_sync = beta_eff * (y_ref - y) * ood_modulation * ood_amplification;

    y_next += coupling_sync;
    y_ref_next -= (1.0 - is_ood) * coupling_sync;

    y = clip01(y_next);
    z = clip01(z_next);
    y_ref = clip01(y_ref_next);
    z_ref = clip01(z_ref_next);
    c = c_next;
  }
  const double gate = (y + z) / 2.0;
  return x * gate;
}

Tensor2 fisg(const Tensor2& x) {
  const std::size_t n = x.cols();
  if (n < 4) {
    throw Error(ErrorKind::ShapeTooSmall, "fisg needs at least 4 features, got " + std::to_string(n));
  }
  const double sensitivity = 2.0;
  const double split_fraction = 0.25;
  const double epsilon = 1e-7;
  const std::size_t num_freqs = n / 2 + 1;
  const auto split_idx = static_cast<std::size_t>(static_cast<double>(num_freqs) * split_fraction);

  // Twiddles indexed by (j * k) mod n keep the angles exact multiples.
  std::vector<double> cos_t(n), sin_t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    cos_t[i] = std::cos(a);
    sin_t[i] = std::sin(a);
  }

  Tensor2 out(x.rows(), n);
  std::vector<double> re(num_freqs), im(num_freqs);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    // Forward real DFT: X_k = sum_j x_j exp(-2 pi i j k / n).
    for (std::size_t k = 0; k < num_freqs; ++k) {
      double sr = 0.0, si = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t t = (j * k) % n;
        sr += row[j] * cos_t[t];
        si -= row[j] * sin_t[t];
      }
      re[k] = sr;
      im[k] = si;
    }
    double high = 0.0, total = 0.0;
    for (std::size_t k = 0; k < num_freqs; ++k) {
      const double mag = std::hypot(re[k], im[k]);
      total += mag;
      if (k >= split_idx) high += mag;
    }
    const double imbalance = high / (total + epsilon);
    const double gate = std::exp(-sensitivity * imbalance);

    for (std::size_t k = split_idx; k < num_freqs; ++k) im[k] = -im[k];

    // Inverse real DFT of length n. Imaginary parts of the DC and Nyquist
    // bins are dropped, as a Hermitian inverse does.
    auto o = out.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = re[0];
      for (std::size_t k = 1; k < num_freqs; ++k) {
        const std::size_t t = (j * k) % n;
        const bool nyquist = n % 2 == 0 && k == n / 2;
        if (nyquist) {
          acc += re[k] * cos_t[t];
        } else {
          acc += 2.0 * (re[k] * cos_t[t] - im[k] * sin_t[t]);
        }
      }
      const double modified = acc / static_cast<double>(n);
      o[j] = gate * row[j] + (1.0 - gate) * modified;
    }
  }
  return out;
}

Tensor2 spf(const Tensor2& x) {
  const double M = 10.0, C = 10.0, beta = 2.0, freq = 1.0, chirp_k = 0.5;
  const double A_disrupt = 0.2, freq_disrupt = 15.0, coupling_strength = 2.0;
  const double A_disrupt_agitated = 0.8, freq_disrupt_agitated = 40.0;
  const double k_blend = 2.0, laplacian_strength = 5.0, k_decay = 2.0;
  const double freq_switch = 50.0, power_switch = 3.0;
  const double A_switch_disrupt = 0.5, freq_switch_disrupt = 25.0;
  const double gamma_meta = 2.0;

  const std::size_t n = x.cols();
  Tensor2 out(x.rows(), n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    auto o = out.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = row[i];
      const double x_prev = row[(i + n - 1) % n];  // roll by +1
      const double x_next = row[(i + 1) % n];      // roll by -1

      const double xc = v / C;
      const double u = xc * xc;
      const double meta_modulator = 1.0 + gamma_meta * u * std::exp(-u / 1.5);
      const double amplitude = beta * u * std::exp(-u / 2.0);
      const double sgn = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      const double phase_base = freq * v + chirp_k * (v * v) * sgn / C;

      const double local_energy_sq = v * v + 0.25 * (x_prev * x_prev + x_next * x_next);
      const double local_laplacian = v - 0.5 * (x_prev + x_next);
      const double lc = local_laplacian / C;
      const double ood_metric =
          k_blend * (local_energy_sq - C * C) / (C * C) + laplacian_strength * (lc * lc);
      const double alpha = sigmoid(ood_metric);

      const double calm = A_disrupt * std::sin(freq_disrupt * v);
      const double agitated =
          A_disrupt_agitated * std::sin(freq_disrupt_agitated * v + laplacian_strength * local_laplacian);
      const double phase_disruption = (1.0 - alpha) * calm + alpha * agitated;
      const double phase_coupling = coupling_strength * (0.5 * x_prev - 1.0 * x_next) / C;
      const double phase = phase_base + phase_disruption + phase_coupling;
      const double y_detail = amplitude * std::sin(phase);

      const double d = std::abs(v) / (k_decay * C);
      const double d2 = d * d;
      const double g_x = std::exp(-(d2 * d2));
      const double plus = M * std::tanh((g_x * v + meta_modulator * y_detail) / M);
      const double minus = M * std::tanh((g_x * v - meta_modulator * y_detail) / M);

      const double switch_phase = freq_switch * std::pow(v / C, power_switch) +
                                  A_switch_disrupt * std::sin(freq_switch_disrupt * v / C);
      o[i] = std::cos(switch_phase) > 0.0 ? plus : minus;
    }
  }
  return out;
}

std::vector<double> probe_points() {
  std::vector<double> p(25);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = -3.0 + 0.25 * static_cast<double>(i);
  return p;
}

std::string zoo_list_csv() {
  std::string out = "name,kind,trainability,flop_cost,source_dataset\n";
  for (const auto& name : builtin_names()) {
    const ZooEntry& e = builtin(name);
    out += e.name + ',' + to_string(e.kind) + ',' + to_string(e.trainability) + ',';
    if (e.expr) out += std::to_string(cost(*e.expr));
    out += ',' + e.source_dataset + '\n';
  }
  return out;
}

}  // namespace actlab
