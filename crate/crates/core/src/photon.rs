//! Steady-state response of linear quantum systems to continuous-mode
//! single-photon, photon-Gaussian and multi-photon field states.
//!
//! Single-photon and photon-Gaussian transforms act in the frequency domain:
//! the pulse is FFT'd (with 4x zero padding against circular aliasing), each
//! bin is multiplied by the transfer function evaluated at s = iω, and the
//! result is transformed back. The delta part of the impulse response is the
//! constant scattering term of the transfer function and is never
//! discretized. Multi-photon tensors are transformed by mode-wise products
//! with the discretized impulse-response kernel.

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{op_norm, C64, CMat};
use crate::model::{build_state_space, is_passive, to_quadrature, transfer_function, PhysicalParams, StateSpace};

/// Uniformly sampled complex temporal wave packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<C64>,
}

impl PulseShape {
    pub fn new(t0: f64, dt: f64, samples: Vec<C64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Dimension("pulse needs at least two samples".into()));
        }
        if dt <= 0.0 || !samples.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Parameter("pulse grid or samples invalid".into()));
        }
        Ok(Self { t0, dt, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Discrete L₂ norm √(Σ|ξ|² dt).
    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt).sqrt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| self.t0 + k as f64 * self.dt)
    }

    /// Normalized Gaussian packet exp(-(t-c)²/(2w²)) / (π w²)^{1/4}.
    pub fn gaussian(t0: f64, dt: f64, len: usize, center: f64, width: f64) -> Self {
        let norm = (std::f64::consts::PI * width * width).powf(-0.25);
        let samples = (0..len)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                C64::new(norm * (-(t - center) * (t - center) / (2.0 * width * width)).exp(), 0.0)
            })
            .collect();
        Self { t0, dt, samples }
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.t0 == other.t0 && self.dt == other.dt && self.samples.len() == other.samples.len()
    }
}

/// Zero-padding factor applied before frequency-domain multiplication.
const PAD_FACTOR: usize = 4;

fn fft_forward(data: &mut [C64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(data.len()).process(data);
}

fn fft_inverse(data: &mut [C64]) {
    let len = data.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(len).process(data);
    let scale = 1.0 / len as f64;
    for z in data.iter_mut() {
        *z *= scale;
    }
}

/// Angular frequency of FFT bin k on a length-`len` grid with spacing `dt`.
fn bin_omega(k: usize, len: usize, dt: f64) -> f64 {
    let kk = if k <= len / 2 { k as i64 } else { k as i64 - len as i64 };
    2.0 * std::f64::consts::PI * kk as f64 / (len as f64 * dt)
}

/// Annihilation-block matrices of a passive system: A = -iΩ₋ - ½C₋†C₋,
/// and the transfer function Ξ_{G⁻}[s] = S + C₋ (sI - A)⁻¹ (-C₋†S).
struct PassiveBlocks {
    a: CMat,
    c: CMat,
    s: CMat,
}

impl PassiveBlocks {
    fn new(p: &PhysicalParams) -> Self {
        let a = p.omega_minus.clone() * C64::new(0.0, -1.0)
            - p.c_minus.adjoint() * &p.c_minus * C64::new(0.5, 0.0);
        Self {
            a,
            c: p.c_minus.clone(),
            s: p.s.clone(),
        }
    }

    fn xi_minus(&self, s: C64) -> Result<CMat> {
        let n = self.a.nrows();
        if n == 0 {
            return Ok(self.s.clone());
        }
        let m = CMat::identity(n, n) * s - &self.a;
        let inv = m
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("resolvent singular at s = {s}")))?;
        Ok(&self.s - &self.c * inv * self.c.adjoint() * &self.s)
    }

    /// Smooth part of the impulse response at lag t ≥ 0:
    /// g⁻(t) = -C₋ e^{At} C₋† S.
    fn impulse_smooth(&self, t: f64) -> CMat {
        let e = (self.a.clone() * C64::new(t, 0.0)).exp();
        -(&self.c * e * self.c.adjoint() * &self.s)
    }
}

fn require_passive_hurwitz(p: &PhysicalParams) -> Result<PassiveBlocks> {
    if !is_passive(p, crate::algebra::DEFAULT_TOL) {
        return Err(Error::Precondition("system is not passive".into()));
    }
    let qs = to_quadrature(&build_state_space(p)?)?;
    let spec = crate::analysis::is_hurwitz(&qs, 0.0);
    if !spec.is_hurwitz {
        return Err(Error::Precondition(format!(
            "system is not Hurwitz stable (abscissa {:.3e})",
            spec.abscissa
        )));
    }
    Ok(PassiveBlocks::new(p))
}

#[derive(Debug, Clone)]
pub struct PassivePulseOutput {
    pub pulses: Vec<PulseShape>,
    /// True when the transfer function still deviates from its high-frequency
    /// limit by more than 0.1 at the Nyquist frequency of the grid.
    pub nyquist_warning: bool,
    pub nyquist_residual: f64,
}

/// Steady-state single-photon output pulses ν[iω] = Ξ_{G⁻}[iω] μ[iω] of a
/// passive Hurwitz system. The output grid equals the input grid.
pub fn output_pulse_passive(
    p: &PhysicalParams,
    input: &[PulseShape],
) -> Result<PassivePulseOutput> {
    let blocks = require_passive_hurwitz(p)?;
    let m = p.m;
    if input.len() != m {
        return Err(Error::Dimension(format!(
            "expected {m} input pulses, got {}",
            input.len()
        )));
    }
    let first = &input[0];
    if !input.iter().all(|q| q.same_grid(first)) {
        return Err(Error::Dimension("input pulses must share one grid".into()));
    }
    let len = first.len();
    let padded = (len * PAD_FACTOR).next_power_of_two();

    let mut spectra: Vec<Vec<C64>> = input
        .iter()
        .map(|pulse| {
            let mut buf = vec![C64::new(0.0, 0.0); padded];
            buf[..len].copy_from_slice(&pulse.samples);
            fft_forward(&mut buf);
            buf
        })
        .collect();

    let nyq = blocks.xi_minus(C64::new(0.0, std::f64::consts::PI / first.dt))?;
    let nyquist_residual = op_norm(&(&nyq - &blocks.s));

    let mut mu = CMat::zeros(m, 1);
    for k in 0..padded {
        let omega = bin_omega(k, padded, first.dt);
        let xi = blocks.xi_minus(C64::new(0.0, omega))?;
        for ch in 0..m {
            mu[(ch, 0)] = spectra[ch][k];
        }
        let nu = &xi * &mu;
        for ch in 0..m {
            spectra[ch][k] = nu[(ch, 0)];
        }
    }

    let pulses = spectra
        .iter_mut()
        .map(|buf| {
            fft_inverse(buf);
            PulseShape {
                t0: first.t0,
                dt: first.dt,
                samples: buf[..len].to_vec(),
            }
        })
        .collect();

    Ok(PassivePulseOutput {
        pulses,
        nyquist_warning: nyquist_residual > 0.1,
        nyquist_residual,
    })
}

/// Photon-Gaussian field state: the doubled-up pulse matrix ξ = Δ(ξ⁻, ξ⁺)
/// and the frequency-sampled Gaussian part R (one Hermitian 2m×2m matrix per
/// FFT bin of the pulse grid).
#[derive(Debug, Clone)]
pub struct PhotonGaussianSpec {
    pub xi_minus: Vec<Vec<PulseShape>>,
    pub xi_plus: Vec<Vec<PulseShape>>,
    pub r_freq: Vec<CMat>,
}

impl PhotonGaussianSpec {
    pub fn channels(&self) -> usize {
        self.xi_minus.len()
    }

    fn grid(&self) -> Result<(f64, f64, usize)> {
        let first = self
            .xi_minus
            .first()
            .and_then(|row| row.first())
            .ok_or_else(|| Error::Dimension("empty pulse matrix".into()))?;
        let m = self.channels();
        if self.xi_minus.iter().any(|r| r.len() != m)
            || self.xi_plus.len() != m
            || self.xi_plus.iter().any(|r| r.len() != m)
        {
            return Err(Error::Dimension("pulse matrices must be m x m".into()));
        }
        for row in self.xi_minus.iter().chain(self.xi_plus.iter()) {
            for pulse in row {
                if !pulse.same_grid(first) {
                    return Err(Error::Dimension("pulse matrix entries must share one grid".into()));
                }
            }
        }
        if self.r_freq.len() != first.len()
            || self.r_freq.iter().any(|r| r.shape() != (2 * m, 2 * m))
        {
            return Err(Error::Dimension(
                "R must hold one 2m x 2m matrix per FFT bin of the pulse grid".into(),
            ));
        }
        Ok((first.t0, first.dt, first.len()))
    }

    /// Trace-normalization residual, evaluated in the computable case
    /// ξ⁺ ≡ 0 (each column of ξ⁻ carries one photon): max_k |Σ_j ‖ξ⁻_jk‖² - 1|.
    pub fn normalization_residual(&self) -> Option<f64> {
        let plus_norm: f64 = self
            .xi_plus
            .iter()
            .flatten()
            .map(|pulse| pulse.l2_norm())
            .fold(0.0, f64::max);
        if plus_norm > 1e-12 {
            return None;
        }
        let m = self.channels();
        let mut worst = 0.0f64;
        for k in 0..m {
            let total: f64 = (0..m)
                .map(|j| self.xi_minus[j][k].l2_norm().powi(2))
                .sum();
            worst = worst.max((total - 1.0).abs());
        }
        Some(worst)
    }
}

/// Steady-state action of a Hurwitz system on a photon-Gaussian state:
/// ξ_out[iω] = Ξ_G[iω] ξ_in[iω] and R_out[iω] = Ξ_G[iω] R_in[iω] Ξ_G[iω]†.
pub fn photon_gaussian_transform(
    ss: &StateSpace,
    spec: &PhotonGaussianSpec,
) -> Result<PhotonGaussianSpec> {
    let qs = crate::model::to_quadrature(ss)?;
    let hur = crate::analysis::is_hurwitz(&qs, 0.0);
    if !hur.is_hurwitz {
        return Err(Error::Precondition(format!(
            "system is not Hurwitz stable (abscissa {:.3e})",
            hur.abscissa
        )));
    }
    let m = spec.channels();
    if ss.m != m {
        return Err(Error::Dimension(format!(
            "system has {} channels, state has {m}",
            ss.m
        )));
    }
    let (t0, dt, len) = spec.grid()?;
    let padded = (len * PAD_FACTOR).next_power_of_two();

    // FFT all pulse entries on the padded grid.
    let transform = |rows: &Vec<Vec<PulseShape>>| -> Vec<Vec<Vec<C64>>> {
        rows.iter()
            .map(|row| {
                row.iter()
                    .map(|pulse| {
                        let mut buf = vec![C64::new(0.0, 0.0); padded];
                        buf[..len].copy_from_slice(&pulse.samples);
                        fft_forward(&mut buf);
                        buf
                    })
                    .collect()
            })
            .collect()
    };
    let f_minus = transform(&spec.xi_minus);
    let f_plus = transform(&spec.xi_plus);

    let mut out_minus = vec![vec![vec![C64::new(0.0, 0.0); padded]; m]; m];
    let mut out_plus = vec![vec![vec![C64::new(0.0, 0.0); padded]; m]; m];
    for k in 0..padded {
        let mirror = (padded - k) % padded;
        let omega = bin_omega(k, padded, dt);
        let (xi_g, _) = transfer_function(ss, C64::new(0.0, omega))?;
        // full doubled pulse matrix at this bin
        let mut xmat = CMat::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                xmat[(i, j)] = f_minus[i][j][k];
                xmat[(i, m + j)] = f_plus[i][j][k];
                xmat[(m + i, j)] = f_plus[i][j][mirror].conj();
                xmat[(m + i, m + j)] = f_minus[i][j][mirror].conj();
            }
        }
        let prod = &xi_g * xmat;
        for i in 0..m {
            for j in 0..m {
                out_minus[i][j][k] = prod[(i, j)];
                out_plus[i][j][k] = prod[(i, m + j)];
            }
        }
    }

    let back = |mut rows: Vec<Vec<Vec<C64>>>| -> Vec<Vec<PulseShape>> {
        rows.iter_mut()
            .map(|row| {
                row.iter_mut()
                    .map(|buf| {
                        fft_inverse(buf);
                        PulseShape {
                            t0,
                            dt,
                            samples: buf[..len].to_vec(),
                        }
                    })
                    .collect()
            })
            .collect()
    };

    let mut r_out = Vec::with_capacity(spec.r_freq.len());
    for (k, r) in spec.r_freq.iter().enumerate() {
        let omega = bin_omega(k, len, dt);
        let (xi_g, _) = transfer_function(ss, C64::new(0.0, omega))?;
        r_out.push(&xi_g * r * xi_g.adjoint());
    }

    Ok(PhotonGaussianSpec {
        xi_minus: back(out_minus),
        xi_plus: back(out_plus),
        r_freq: r_out,
    })
}

/// Multi-photon pulse tensor: `ell` axes, each indexed by (channel, time) as
/// channel*grid_len + time_index, row-major data layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTensor {
    pub channels: usize,
    pub grid_len: usize,
    pub ell: usize,
    pub t0: f64,
    pub dt: f64,
    pub data: Vec<C64>,
}

impl PulseTensor {
    pub fn new(
        channels: usize,
        grid_len: usize,
        ell: usize,
        t0: f64,
        dt: f64,
        data: Vec<C64>,
    ) -> Result<Self> {
        let axis = channels * grid_len;
        let expected = axis.checked_pow(ell as u32).ok_or_else(|| {
            Error::Resource("tensor size overflows".into())
        })?;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "tensor data has {} entries, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            grid_len,
            ell,
            t0,
            dt,
            data,
        })
    }

    pub fn axis_len(&self) -> usize {
        self.channels * self.grid_len
    }

    /// Discrete L₂ norm √(Σ|ψ|² dtᵉ); its square is the normalization
    /// constant of the multi-photon state, recomputed numerically.
    pub fn l2_norm(&self) -> f64 {
        let vol = self.dt.powi(self.ell as i32);
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * vol).sqrt()
    }

    /// Separable tensor from per-axis pulses on the same grid.
    pub fn separable(factors: &[Vec<PulseShape>]) -> Result<Self> {
        let ell = factors.len();
        if ell == 0 {
            return Err(Error::Dimension("need at least one axis".into()));
        }
        let channels = factors[0].len();
        let first = &factors[0][0];
        let grid_len = first.len();
        for axis in factors {
            if axis.len() != channels {
                return Err(Error::Dimension("axes must have equal channel counts".into()));
            }
            for pulse in axis {
                if !pulse.same_grid(first) {
                    return Err(Error::Dimension("pulses must share one grid".into()));
                }
            }
        }
        let axis_len = channels * grid_len;
        let total = axis_len.pow(ell as u32);
        let mut data = vec![C64::new(1.0, 0.0); total];
        for (flat, value) in data.iter_mut().enumerate() {
            let mut rest = flat;
            let mut acc = C64::new(1.0, 0.0);
            for axis in (0..ell).rev() {
                let idx = rest % axis_len;
                rest /= axis_len;
                let (ch, ti) = (idx / grid_len, idx % grid_len);
                acc *= factors[axis][ch].samples[ti];
            }
            *value = acc;
        }
        Ok(Self {
            channels,
            grid_len,
            ell,
            t0: first.t0,
            dt: first.dt,
            data,
        })
    }
}

/// Discretized impulse-response kernel of a passive system:
/// K[(r,τ),(c,σ)] = S_rc δ_τσ + g⁻_rc(t_τ - t_σ) dt. The delta part stays an
/// exact identity term.
pub fn impulse_kernel(p: &PhysicalParams, grid_len: usize, dt: f64) -> Result<CMat> {
    let blocks = require_passive_hurwitz(p)?;
    let m = p.m;
    let axis = m * grid_len;
    let mut kernel = CMat::zeros(axis, axis);
    let lags: Vec<CMat> = (0..grid_len)
        .map(|j| blocks.impulse_smooth(j as f64 * dt) * C64::new(dt, 0.0))
        .collect();
    for tau in 0..grid_len {
        for sigma in 0..=tau {
            let g = &lags[tau - sigma];
            for r in 0..m {
                for c in 0..m {
                    kernel[(r * grid_len + tau, c * grid_len + sigma)] = g[(r, c)];
                }
            }
        }
    }
    for r in 0..m {
        for c in 0..m {
            let s = blocks.s[(r, c)];
            if s.norm() > 0.0 {
                for tau in 0..grid_len {
                    kernel[(r * grid_len + tau, c * grid_len + tau)] += s;
                }
            }
        }
    }
    Ok(kernel)
}

/// Steady-state multi-photon transform: the kernel applied along every tensor
/// mode (ψ_out = ψ_in ×₁ g⁻ ×₂ … ×_ℓ g⁻).
pub fn multiphoton_transform(p: &PhysicalParams, psi: &PulseTensor) -> Result<PulseTensor> {
    if psi.channels > 2 || psi.ell > 2 {
        return Err(Error::Parameter(
            "multi-photon transform is limited to m <= 2 channels and 2 photons per channel".into(),
        ));
    }
    if psi.data.len() > 10_000_000 {
        return Err(Error::Resource(format!(
            "tensor with {} entries exceeds the 1e7 guardrail",
            psi.data.len()
        )));
    }
    if psi.channels != p.m {
        return Err(Error::Dimension(format!(
            "system has {} channels, tensor has {}",
            p.m, psi.channels
        )));
    }
    let kernel = impulse_kernel(p, psi.grid_len, psi.dt)?;
    let mut out = psi.clone();
    for mode in 0..psi.ell {
        out = mode_product(&out, &kernel, mode)?;
    }
    Ok(out)
}

/// Mode-k product: contracts `kernel` with the k-th axis of the tensor.
pub fn mode_product(psi: &PulseTensor, kernel: &CMat, mode: usize) -> Result<PulseTensor> {
    let axis = psi.axis_len();
    if kernel.shape() != (axis, axis) {
        return Err(Error::Dimension("kernel does not match the tensor axis".into()));
    }
    if mode >= psi.ell {
        return Err(Error::Dimension(format!(
            "mode {mode} out of range for an {}-way tensor",
            psi.ell
        )));
    }
    // stride of the chosen mode in the row-major layout
    let stride = axis.pow((psi.ell - 1 - mode) as u32);
    let mut out = vec![C64::new(0.0, 0.0); psi.data.len()];
    let outer = psi.data.len() / (axis * stride);
    for block in 0..outer {
        for inner in 0..stride {
            let base = block * axis * stride + inner;
            for row in 0..axis {
                let mut acc = C64::new(0.0, 0.0);
                for col in 0..axis {
                    let k = kernel[(row, col)];
                    if k.re != 0.0 || k.im != 0.0 {
                        acc += k * psi.data[base + col * stride];
                    }
                }
                out[base + row * stride] = acc;
            }
        }
    }
    PulseTensor::new(psi.channels, psi.grid_len, psi.ell, psi.t0, psi.dt, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cavity(kappa: f64, omega: f64) -> PhysicalParams {
        PhysicalParams::new(
            CMat::identity(1, 1),
            CMat::from_element(1, 1, c(kappa.sqrt(), 0.0)),
            CMat::zeros(1, 1),
            CMat::from_element(1, 1, c(omega, 0.0)),
            CMat::zeros(1, 1),
            CMat::zeros(2, 0),
        )
        .unwrap()
    }

    /// A static scattering device: zero oscillators, identity scattering.
    fn decoupled() -> PhysicalParams {
        PhysicalParams::new(
            CMat::identity(1, 1),
            CMat::zeros(1, 0),
            CMat::zeros(1, 0),
            CMat::zeros(0, 0),
            CMat::zeros(0, 0),
            CMat::zeros(0, 0),
        )
        .unwrap()
    }

    #[test]
    fn trivial_system_passes_pulse_through() {
        let p = decoupled();
        let pulse = PulseShape::gaussian(-8.0, 1.0 / 64.0, 1024, 0.0, 1.0);
        let out = output_pulse_passive(&p, &[pulse.clone()]).unwrap();
        let diff: f64 = out.pulses[0]
            .samples
            .iter()
            .zip(&pulse.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9, "max deviation {diff}");
        assert!(!out.nyquist_warning);
    }

    #[test]
    fn cavity_output_matches_time_domain_convolution() {
        // ν(t) = μ(t) - κ ∫_{-∞}^t e^{-κ(t-ι)/2} μ(ι) dι, trapezoid oracle
        let kappa = 2.0;
        let p = cavity(kappa, 0.0);
        let (t0, dt, len) = (-8.0, 1.0 / 512.0, 16384);
        let pulse = PulseShape::gaussian(t0, dt, len, 0.0, 1.0);
        let out = output_pulse_passive(&p, &[pulse.clone()]).unwrap();

        let mu: Vec<f64> = pulse.samples.iter().map(|z| z.re).collect();
        let mut err_sq = 0.0;
        for (j, t) in pulse.times().enumerate() {
            let mut integral = 0.0;
            for (i, tau) in pulse.times().enumerate().take(j + 1) {
                let w = if i == 0 || i == j { 0.5 } else { 1.0 };
                integral += w * (-kappa * (t - tau) / 2.0).exp() * mu[i] * dt;
            }
            let nu = mu[j] - kappa * integral;
            err_sq += (out.pulses[0].samples[j].re - nu).powi(2) * dt;
            err_sq += out.pulses[0].samples[j].im.powi(2) * dt;
        }
        assert!(err_sq.sqrt() < 1e-5, "L2 error {}", err_sq.sqrt());
    }

    #[test]
    fn passive_output_preserves_norm() {
        let p = cavity(2.0, 0.4);
        let pulse = PulseShape::gaussian(-8.0, 1.0 / 256.0, 8192, 0.0, 1.0);
        assert_relative_eq!(pulse.l2_norm(), 1.0, epsilon = 1e-9);
        let out = output_pulse_passive(&p, &[pulse]).unwrap();
        assert!((out.pulses[0].l2_norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn output_is_linear_in_the_input() {
        let p = cavity(1.5, 0.2);
        let a = PulseShape::gaussian(-6.0, 1.0 / 64.0, 1024, 0.0, 1.0);
        let b = PulseShape::gaussian(-6.0, 1.0 / 64.0, 1024, 1.5, 0.5);
        let (alpha, beta) = (c(0.3, -0.7), c(-1.1, 0.2));
        let combo = PulseShape::new(
            -6.0,
            1.0 / 64.0,
            a.samples
                .iter()
                .zip(&b.samples)
                .map(|(x, y)| alpha * x + beta * y)
                .collect(),
        )
        .unwrap();
        let out_a = output_pulse_passive(&p, &[a]).unwrap();
        let out_b = output_pulse_passive(&p, &[b]).unwrap();
        let out_c = output_pulse_passive(&p, &[combo]).unwrap();
        for k in 0..1024 {
            let expect = alpha * out_a.pulses[0].samples[k] + beta * out_b.pulses[0].samples[k];
            assert!((out_c.pulses[0].samples[k] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn non_passive_or_unstable_systems_are_rejected() {
        let mut p = cavity(1.0, 0.0);
        p.c_plus = CMat::from_element(1, 1, c(0.4, 0.0));
        p.omega_plus = CMat::from_element(1, 1, c(0.0, 0.0));
        let pulse = PulseShape::gaussian(-4.0, 0.05, 256, 0.0, 1.0);
        assert!(matches!(
            output_pulse_passive(&p, &[pulse.clone()]),
            Err(Error::Precondition(_))
        ));

        // undriven oscillator: passive but only marginally stable
        let free = PhysicalParams::new(
            CMat::identity(1, 1),
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            CMat::from_element(1, 1, c(1.0, 0.0)),
            CMat::zeros(1, 1),
            CMat::zeros(2, 0),
        )
        .unwrap();
        assert!(matches!(
            output_pulse_passive(&free, &[pulse]),
            Err(Error::Precondition(_))
        ));
    }

    fn vacuum_r(m: usize, len: usize) -> Vec<CMat> {
        let mut r = CMat::zeros(2 * m, 2 * m);
        for i in 0..m {
            r[(i, i)] = c(1.0, 0.0);
        }
        vec![r; len]
    }

    #[test]
    fn photon_gaussian_vacuum_r_is_invariant_under_passive_action() {
        let p = cavity(2.0, 0.3);
        let ss = build_state_space(&p).unwrap();
        let len = 512;
        let pulse = PulseShape::gaussian(-6.0, 1.0 / 32.0, len, 0.0, 1.0);
        let zero = PulseShape::new(-6.0, 1.0 / 32.0, vec![c(0.0, 0.0); len]).unwrap();
        let spec = PhotonGaussianSpec {
            xi_minus: vec![vec![pulse]],
            xi_plus: vec![vec![zero]],
            r_freq: vacuum_r(1, len),
        };
        assert!(spec.normalization_residual().unwrap() < 1e-6);
        let out = photon_gaussian_transform(&ss, &spec).unwrap();
        for (k, r) in out.r_freq.iter().enumerate() {
            let diff = op_norm(&(r - &spec.r_freq[k]));
            assert!(diff < 1e-9, "bin {k}: {diff}");
        }
        // ξ⁺ stays zero through a passive system
        let plus_norm: f64 = out.xi_plus[0][0].l2_norm();
        assert!(plus_norm < 1e-10);
        // ξ⁻ transforms like the single-photon pulse
        let single = output_pulse_passive(&p, &spec.xi_minus[0].clone()).unwrap();
        let diff: f64 = out.xi_minus[0][0]
            .samples
            .iter()
            .zip(&single.pulses[0].samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10, "pulse deviation {diff}");
    }

    #[test]
    fn photon_gaussian_identity_system_is_noop() {
        let p = decoupled();
        let ss = build_state_space(&p).unwrap();
        let len = 256;
        let pulse = PulseShape::gaussian(-4.0, 1.0 / 32.0, len, 0.0, 1.0);
        let zero = PulseShape::new(-4.0, 1.0 / 32.0, vec![c(0.0, 0.0); len]).unwrap();
        let spec = PhotonGaussianSpec {
            xi_minus: vec![vec![pulse.clone()]],
            xi_plus: vec![vec![zero]],
            r_freq: vacuum_r(1, len),
        };
        let out = photon_gaussian_transform(&ss, &spec).unwrap();
        let diff: f64 = out.xi_minus[0][0]
            .samples
            .iter()
            .zip(&pulse.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "deviation {diff}");
    }

    #[test]
    fn single_photon_tensor_matches_pulse_path() {
        let p = cavity(2.0, 0.0);
        let (t0, dt, len) = (-6.0, 1.0 / 16.0, 512);
        let pulse = PulseShape::gaussian(t0, dt, len, 0.0, 1.0);
        let tensor = PulseTensor::separable(&[vec![pulse.clone()]]).unwrap();
        let out_tensor = multiphoton_transform(&p, &tensor).unwrap();

        // independent direct convolution with the same Riemann discretization
        let kappa = 2.0;
        for (j, t) in pulse.times().enumerate() {
            let mut acc = pulse.samples[j];
            for (i, tau) in pulse.times().enumerate().take(j + 1) {
                acc += C64::new(-kappa * (-kappa * (t - tau) / 2.0).exp() * dt, 0.0)
                    * pulse.samples[i];
            }
            assert!(
                (out_tensor.data[j] - acc).norm() < 1e-10,
                "index {j}: {} vs {acc}",
                out_tensor.data[j]
            );
        }

        // and the FFT path agrees up to the O(dt) quadrature gap
        let out_pulse = output_pulse_passive(&p, &[pulse]).unwrap();
        let mut worst = 0.0f64;
        for k in 0..len {
            worst = worst.max((out_tensor.data[k] - out_pulse.pulses[0].samples[k]).norm());
        }
        assert!(worst < 0.1, "max deviation {worst}");
    }

    #[test]
    fn two_photon_separable_output_factorizes() {
        let p = cavity(2.0, 0.0);
        let (t0, dt, len) = (-6.0, 1.0 / 8.0, 160);
        let pulse = PulseShape::gaussian(t0, dt, len, 0.0, 1.0);
        let tensor = PulseTensor::separable(&[vec![pulse.clone()], vec![pulse.clone()]]).unwrap();
        let out = multiphoton_transform(&p, &tensor).unwrap();
        // single-photon output through the same kernel
        let kernel = impulse_kernel(&p, len, dt).unwrap();
        let single = mode_product(
            &PulseTensor::separable(&[vec![pulse]]).unwrap(),
            &kernel,
            0,
        )
        .unwrap();
        for i in 0..len {
            for j in 0..len {
                let expect = single.data[i] * single.data[j];
                assert!((out.data[i * len + j] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn mode_products_commute() {
        let p = cavity(1.5, 0.3);
        let (t0, dt, len) = (-4.0, 1.0 / 8.0, 96);
        let a = PulseShape::gaussian(t0, dt, len, 0.0, 1.0);
        let b = PulseShape::gaussian(t0, dt, len, 0.8, 0.6);
        let tensor = PulseTensor::separable(&[vec![a], vec![b]]).unwrap();
        let kernel = impulse_kernel(&p, len, dt).unwrap();
        let ab = mode_product(&mode_product(&tensor, &kernel, 0).unwrap(), &kernel, 1).unwrap();
        let ba = mode_product(&mode_product(&tensor, &kernel, 1).unwrap(), &kernel, 0).unwrap();
        let mut worst = 0.0f64;
        for (x, y) in ab.data.iter().zip(&ba.data) {
            worst = worst.max((x - y).norm());
        }
        assert!(worst < 1e-10, "max deviation {worst}");
    }

    #[test]
    fn resource_guardrails() {
        let p = cavity(1.0, 0.0);
        let pulse = PulseShape::gaussian(-4.0, 0.1, 64, 0.0, 1.0);
        let tensor = PulseTensor::separable(&[
            vec![pulse.clone()],
            vec![pulse.clone()],
            vec![pulse],
        ])
        .unwrap();
        assert!(matches!(
            multiphoton_transform(&p, &tensor),
            Err(Error::Parameter(_))
        ));
    }
}
