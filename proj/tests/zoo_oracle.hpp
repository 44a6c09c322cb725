// Independent reference implementations of the zoo entries, shared by the
// unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

// Oracles written independently of the library, kept as literal as
// practical. They share no code with it.
namespace oracle {

constexpr double kPi = std::numbers::pi;

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / kPi) * (x + 0.044715 * std::pow(x, 3))));
}
inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

inline double relu(double x) { return std::max(x, 0.0); }
inline double gelusine(double x) { return gelu(x) + 0.1 * std::sin(x); }
inline double gelusinc(double x) {
  const double alpha = 0.5;
  return gelu(x) * (1.0 + alpha * sinc(x));
}
inline double gmtu(double x) {
  const double p_alpha = 1.0, p_beta = 1.5, p_gamma = 0.2, leak = 0.1;
  const double primary_response = p_alpha * std::tanh(p_beta * x) * std::exp(-p_gamma * std::pow(x, 2));
  return primary_response + (leak * x);
}

inline std::vector<double> turbulent(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double std_ = std::sqrt(var / static_cast<double>(x.size())) + 1e-6;
  std::vector<double> out;
  for (double v : x) {
    const double sgn = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
    const double base = sgn * std::log1p(0.5 * std::abs(v));
    const double z = (v - mean) / std_;
    const double amplitude = 0.2, frequency = 2.0;
    const double gaussian_envelope = std::exp(-0.5 * std::pow(z, 2));
    out.push_back(base + amplitude * gaussian_envelope * std::sin(frequency * v));
  }
  return out;
}

inline double quaternion(double x) {
  using std::cos, std::sin, std::tanh, std::exp, std::pow;
  const double A_base = 0.1, A_amp = 0.05, A_freq = 4.0;
  const double A = A_base + A_amp * cos(A_freq * x);
  const double B_base = 0.5, B_amp = 0.2, B_freq = 2.5, B_phase_mod_coeff = 2.0;
  const double B = B_base + B_amp * sin(B_freq * x + B_phase_mod_coeff * A);
  const double mod_freq1 = 2.1, mod_freq2 = 1.3;
  const double y_chaos = (sin(mod_freq1 * x) * cos(mod_freq2 * x) + 1.0) / 2.0;
  const double C_freq = 2.0;
  const double C_amp = 0.05 + 0.1 * y_chaos;
  const double C_base = 0.1;
  const double u = tanh(C_freq * x);
  const double cheby_T4 = 8 * pow(u, 4) - 8 * pow(u, 2) + 1.0;
  const double Cr = C_base + C_amp * cheby_T4;
  const double Ci_freq = 2.0;
  const double Ci_amp = 0.2 + 0.4 * (1.0 - y_chaos);
  const double Ci_base = 0.0;
  const double u_i = tanh(Ci_freq * x);
  const double cheby_T3 = 4 * pow(u_i, 3) - 3 * u_i;
  const double Ci = Ci_base + Ci_amp * cheby_T3;
  const double stable_magnitude = A * pow(x, 2) * exp(-B * pow(x - Cr, 2));
  const double phase = 2 * B * Ci * (x - Cr);
  const std::complex<double> complex_rotation(cos(phase), sin(phase));
  const std::complex<double> damping_term_complex = stable_magnitude * complex_rotation;
  const double D_freq = 1.5;
  const double D_amp = 0.1 + 0.2 * y_chaos;
  const double u_d = tanh(D_freq * x);
  const double cheby_T2 = 2 * pow(u_d, 2) - 1.0;
  const double D_shift = D_amp * cheby_T2;
  const double Q_j_envelope = (0.5 * A * pow(x, 2)) * exp(-B * pow(x - D_shift, 2));
  const double Q_k_envelope = (0.5 * B * pow(x, 2)) * exp(-A * pow(x + D_shift, 2));
  const double Q_j = Q_j_envelope * sin(C_freq * x + Ci);
  const double Q_k = Q_k_envelope * cos(B_freq * x - Cr);
  const double Q_w = damping_term_complex.real();
  const double Q_i = damping_term_complex.imag();
  const double c_i = 0.2, c_j = 0.15, c_k = 0.15;
  const double gate = 1.0 - (Q_w - c_i * Q_i - c_j * Q_j - c_k * Q_k);
  return x * gate;
}

inline double pler(double x) {
  using std::tanh, std::exp, std::cos, std::abs, std::pow;
  auto clip = [](double v) { return std::clamp(v, 0.0, 1.0); };
  const double r = 2.5 + 1.5 * tanh(pow(x, 2) / 4.0);
  const double alpha = 0.1 * tanh(pow(x, 2) / 16.0);
  const double r_ref = 3.9, alpha_ref = 0.05;
  const double beta = 0.1 * (1.0 - 2.0 * tanh(pow(x, 2) / 8.0));
  const double omega_ref = cos(x * 2.5);
  const double resonance_gate = exp(-25.0 * pow(omega_ref, 2));
  double y = 0.5 + 0.49 * tanh(x / 4.0);
  double z = 0.5 - 0.49 * tanh(x / 4.0);
  double y_ref = 0.2, z_ref = 0.8, c = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double y_val = y, z_val = z, y_ref_val = y_ref, z_ref_val = z_ref, c_val = c;
    const double instability_feedback = tanh(c_val * 4.0);
    const double beta_eff = beta - 0.2 * instability_feedback;
    const double is_ood = 1.0 / (1.0 + exp(beta_eff * 50.0));
    const double coupling_internal = alpha * (z_val - y_val);
    double y_dyn = r * y_val * (1 - y_val) + coupling_internal;
    double z_dyn = r * z_val * (1 - z_val) - coupling_internal;
    const double collapse_strength = 0.5;
    y_dyn -= is_ood * collapse_strength * y_val;
    z_dyn -= is_ood * collapse_strength * z_val;
    const double gamma = is_ood * tanh(c_val * 4.0);
    double y_next = y_dyn * (1.0 - gamma);
    double z_next = z_dyn * (1.0 - gamma);
    const double tunneling_strength = 0.6;
    const double tunnel_force_y = resonance_gate * tunneling_strength * (0.5 - y_next);
    const double tunnel_force_z = resonance_gate * tunneling_strength * (0.5 - z_next);
    y_next += tunnel_force_y;
    z_next += tunnel_force_z;
    const double coupling_ref_internal = alpha_ref * (z_ref_val - y_ref_val);
    double y_ref_next = r_ref * y_ref_val * (1 - y_ref_val) + coupling_ref_internal;
    double z_ref_next = r_ref * z_ref_val * (1 - z_ref_val) - coupling_ref_internal;
    const double instability = abs(y_next - z_next);
    const double c_next = 0.8 * c_val + 0.2 * instability;
    const double ood_modulation = 1.0 + tanh(abs(beta_eff) * 5.0) * pow(z_val, 2);
    const double ood_amplification = 1.0 + tanh(c_next * 2.0);
    const double coupling_sync = beta_eff * (y_ref_val - y_val) * ood_modulation * ood_amplification;
    y_next += coupling_sync;
    y_ref_next -= (1.0 - is_ood) * coupling_sync;
    y = clip(y_next);
    z = clip(z_next);
    y_ref = clip(y_ref_next);
    z_ref = clip(z_ref_next);
    c = c_next;
  }
  const double gate = (y + z) / 2.0;
  return x * gate;
}

// rfft / conj(high band) / irfft on one row, through a full complex spectrum.
inline std::vector<double> fisg(const std::vector<double>& x) {
  using cd = std::complex<double>;
  const std::size_t n = x.size();
  const double sensitivity = 2.0, split_fraction = 0.25, epsilon = 1e-7;
  const std::size_t num_freqs = n / 2 + 1;
  std::vector<cd> x_fft(num_freqs);
  for (std::size_t k = 0; k < num_freqs; ++k)
    for (std::size_t j = 0; j < n; ++j)
      x_fft[k] += x[j] * std::polar(1.0, -2.0 * kPi * double(j) * double(k) / double(n));
  const auto split_idx = static_cast<std::size_t>(double(num_freqs) * split_fraction);
  double high = 0.0, total = 0.0;
  for (std::size_t k = 0; k < num_freqs; ++k) {
    total += std::abs(x_fft[k]);
    if (k >= split_idx) high += std::abs(x_fft[k]);
  }
  const double gate = std::exp(-sensitivity * (high / (total + epsilon)));
  std::vector<cd> half = x_fft;
  for (std::size_t k = split_idx; k < num_freqs; ++k) half[k] = std::conj(half[k]);
  // irfft treats the DC and Nyquist bins as real.
  half[0] = half[0].real();
  if (n % 2 == 0) half[n / 2] = half[n / 2].real();
  std::vector<cd> full(n);
  for (std::size_t k = 0; k < num_freqs; ++k) full[k] = half[k];
  for (std::size_t k = 1; k < num_freqs; ++k) full[n - k] = std::conj(half[k]);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    cd acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += full[k] * std::polar(1.0, 2.0 * kPi * double(j) * double(k) / double(n));
    out[j] = gate * x[j] + (1.0 - gate) * (acc.real() / double(n));
  }
  return out;
}

inline std::vector<double> spf(const std::vector<double>& xs) {
  using std::pow, std::exp, std::sin, std::tanh, std::abs;
  const double M = 10.0, C = 10.0, beta = 2.0, freq = 1.0, chirp_k = 0.5;
  const double A_disrupt = 0.2, freq_disrupt = 15.0, coupling_strength = 2.0;
  const double A_disrupt_agitated = 0.8, freq_disrupt_agitated = 40.0, k_blend = 2.0;
  const double laplacian_strength = 5.0, k_decay = 2.0;
  const double freq_switch = 50.0, power_switch = 3.0, A_switch_disrupt = 0.5, freq_switch_disrupt = 25.0;
  const double gamma_meta = 2.0;
  const std::size_t n = xs.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs[i];
    const double u = pow(x / C, 2);
    const double meta_modulator = 1.0 + gamma_meta * u * exp(-u / 1.5);
    const double amplitude = beta * u * exp(-u / 2.0);
    const double sgn = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
    const double phase_base = freq * x + chirp_k * pow(x, 2) * sgn / C;
    // jnp.roll(x, 1)[i] = x[i-1]; jnp.roll(x, -1)[i] = x[i+1]
    const double x_prev = xs[(i + n - 1) % n];
    const double x_next = xs[(i + 1) % n];
    const double local_energy_sq = pow(x, 2) + 0.25 * (pow(x_prev, 2) + pow(x_next, 2));
    const double local_laplacian = x - 0.5 * (x_prev + x_next);
    const double ood_metric =
        k_blend * (local_energy_sq - pow(C, 2)) / pow(C, 2) + laplacian_strength * pow(local_laplacian / C, 2);
    const double alpha = 1.0 / (1.0 + exp(-ood_metric));
    const double calm = A_disrupt * sin(freq_disrupt * x);
    const double agitated = A_disrupt_agitated * sin(freq_disrupt_agitated * x + laplacian_strength * local_laplacian);
    const double phase_disruption = (1.0 - alpha) * calm + alpha * agitated;
    const double phase_coupling = coupling_strength * (0.5 * x_prev - 1.0 * x_next) / C;
    const double phase = phase_base + phase_disruption + phase_coupling;
    const double y_detail = amplitude * sin(phase);
    const double g_x = exp(-pow(abs(x) / (k_decay * C), 4));
    const double plus = M * tanh((g_x * x + meta_modulator * y_detail) / M);
    const double minus = M * tanh((g_x * x - meta_modulator * y_detail) / M);
    const double switch_phase =
        freq_switch * pow(x / C, power_switch) + A_switch_disrupt * sin(freq_switch_disrupt * x / C);
    out[i] = std::cos(switch_phase) > 0.0 ? plus : minus;
  }
  return out;
}

}  // namespace oracle
