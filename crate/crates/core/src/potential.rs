//! The convolution potential V_γ(x) = |x|^{−γ} and the cubic convolution
//! nonlinearity F_γ(u) = λ (V_γ ∗ |u|²) u.
//!
//! Two kernel backends are provided. The truncated-kernel backend samples
//! |x|^{−γ} at centered grid displacements (the origin cell takes the
//! exact cell average of the singularity) and is therefore a genuine
//! discrete convolution, matched bit-for-bit by a brute-force periodic
//! sum. The riesz-multiplier backend uses the continuum symbol
//! c_{n,γ}|ξ|^{γ−n} with c_{n,γ} = 2^{n−γ} π^{n/2} Γ((n−γ)/2)/Γ(γ/2),
//! with the zero mode set to the box integral of the kernel.

use std::sync::Arc;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ComplexField, SpectralGrid};
use crate::util::rational_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelBackend {
    TruncatedKernel,
    RieszMultiplier,
}

/// How the singular origin cell of the truncated kernel is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OriginRule {
    /// Exact integral of |x|^{−γ} over the central cell divided by the
    /// cell volume.
    CellAverage,
    /// Origin entry set to zero (no self-interaction).
    PlainSample,
}

/// Kernel construction choices plus the coupling λ multiplying the
/// nonlinearity. λ = −1 is the defocusing sign of F_γ; other values are
/// out of theorem scope but useful for contrast runs.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    gamma: BigRational,
    pub backend: KernelBackend,
    pub origin_rule: OriginRule,
    pub coupling: f64,
}

impl PotentialSpec {
    pub fn new(gamma: BigRational) -> Result<Self> {
        if !gamma.is_positive() {
            return Err(Error::InvalidParameter("potential gamma must be > 0".into()));
        }
        Ok(Self {
            gamma,
            backend: KernelBackend::TruncatedKernel,
            origin_rule: OriginRule::CellAverage,
            coupling: -1.0,
        })
    }

    pub fn with_backend(mut self, backend: KernelBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_origin_rule(mut self, rule: OriginRule) -> Self {
        self.origin_rule = rule;
        self
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn gamma(&self) -> &BigRational {
        &self.gamma
    }

    pub fn gamma_f64(&self) -> f64 {
        rational_f64(&self.gamma)
    }
}

/// Precomputed kernel spectrum on a grid, scaled so that spectral
/// multiplication reproduces Σ_y K(x−y)ρ(y) h^n. Real because the kernel
/// is real and even.
#[derive(Debug, Clone)]
pub struct KernelMultiplier {
    grid: Arc<SpectralGrid>,
    values: Vec<f64>,
    pub gamma: f64,
    pub backend: KernelBackend,
}

impl KernelMultiplier {
    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    /// Kernel spectrum entries (wrap-around mode order).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Zero-frequency entry; for the truncated backend this equals
    /// Σ K(x_j) h^n.
    pub fn zero_mode(&self) -> f64 {
        self.values[0]
    }

    /// Spectrum as a complex field for export in the flat binary format.
    pub fn spectrum_field(&self) -> ComplexField {
        let values = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        ComplexField::from_values(&self.grid, values).expect("length matches grid")
    }
}

/// Build the kernel spectrum for a grid. Rejects γ ≥ n, where the origin
/// is not integrable.
pub fn build_kernel(grid: &Arc<SpectralGrid>, spec: &PotentialSpec) -> Result<KernelMultiplier> {
    let n = grid.dim();
    let gamma = spec.gamma_f64();
    if !(gamma > 0.0 && gamma < n as f64) {
        return Err(Error::InvalidParameter(format!(
            "potential gamma must satisfy 0 < γ < n = {n}, got {gamma}"
        )));
    }
    let values = match spec.backend {
        KernelBackend::TruncatedKernel => {
            let h = grid.spacing();
            let hn = grid.cell_volume();
            let mut kernel: Vec<Complex64> = (0..grid.total_points())
                .map(|flat| {
                    let d = grid.displacement(flat);
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    Complex64::new(r2.sqrt().powf(-gamma), 0.0)
                })
                .collect();
            kernel[0] = Complex64::new(
                match spec.origin_rule {
                    OriginRule::CellAverage => cell_average_origin(n, gamma, h),
                    OriginRule::PlainSample => 0.0,
                },
                0.0,
            );
            let field = ComplexField::from_values(grid, kernel)?;
            let dft = field.spectrum();
            let max_mag = dft.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
            let max_imag = dft.iter().fold(0.0f64, |acc, v| acc.max(v.im.abs()));
            debug_assert!(max_imag <= 1e-12 * max_mag, "even real kernel must have a real spectrum");
            dft.iter().map(|v| v.re * hn).collect()
        }
        KernelBackend::RieszMultiplier => {
            let c = riesz_constant(n, gamma);
            let mut values: Vec<f64> = (0..grid.total_points())
                .map(|flat| {
                    let xi = grid.mode(flat);
                    let mag = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                    if mag == 0.0 {
                        0.0
                    } else {
                        c * mag.powf(gamma - n as f64)
                    }
                })
                .collect();
            values[0] = box_integral(n, gamma, grid.length() / 2.0);
            values
        }
    };
    Ok(KernelMultiplier { grid: grid.clone(), values, gamma, backend: spec.backend })
}

/// Periodic discrete convolution (V_γ ∗ density) via spectral
/// multiplication, scaled by h^n to approximate the integral convolution.
pub fn convolve(mult: &KernelMultiplier, density: &ComplexField) -> Result<ComplexField> {
    if mult.grid.as_ref() != density.grid().as_ref() {
        return Err(Error::GridMismatch);
    }
    let mut spec = density.spectrum();
    for (v, &m) in spec.iter_mut().zip(&mult.values) {
        *v *= m;
    }
    ComplexField::from_spectrum(&mult.grid, spec)
}

/// F_γ-type force: coupling · (V_γ ∗ |u|²) u. With coupling = −1 this is
/// the defocusing nonlinearity −(V_γ ∗ |u|²)u.
pub fn hartree_force(u: &ComplexField, mult: &KernelMultiplier, coupling: f64) -> Result<ComplexField> {
    let potential = convolve(mult, &u.abs_squared())?;
    Ok(potential.pointwise_mul(u).scaled(Complex64::new(coupling, 0.0)))
}

/// Force evaluated from half-wave variables through u = (w⁺ − w⁻)/2.
pub fn force_from_halfwaves(
    w_plus: &ComplexField,
    w_minus: &ComplexField,
    mult: &KernelMultiplier,
    coupling: f64,
) -> Result<ComplexField> {
    w_plus.same_grid(w_minus)?;
    let u = w_plus.sub(w_minus).scaled(Complex64::new(0.5, 0.0));
    hartree_force(&u, mult, coupling)
}

/// The same force as the expanded eight-term sum
/// Σ C_{ε₁ε₂ε₃} (V_γ ∗ conj(w^{ε₁}) w^{ε₂}) w^{ε₃} with
/// C_{ε₁ε₂ε₃} = coupling · ε₁ε₂ε₃ / 8. Kept as an independent route for
/// tests; must agree with [`force_from_halfwaves`].
pub fn force_from_halfwaves_expanded(
    w_plus: &ComplexField,
    w_minus: &ComplexField,
    mult: &KernelMultiplier,
    coupling: f64,
) -> Result<ComplexField> {
    w_plus.same_grid(w_minus)?;
    let branches = [(1.0f64, w_plus), (-1.0f64, w_minus)];
    let mut acc = ComplexField::zeros(w_plus.grid());
    for &(s1, w1) in &branches {
        for &(s2, w2) in &branches {
            let density = w1.conj().pointwise_mul(w2);
            let conv = convolve(mult, &density)?;
            for &(s3, w3) in &branches {
                let c = Complex64::new(coupling * s1 * s2 * s3 / 8.0, 0.0);
                acc.axpy(c, &conv.pointwise_mul(w3));
            }
        }
    }
    Ok(acc)
}

/// Zero-padded (linear) convolution: the density is embedded in a box of
/// twice the side length so no periodic image contributes. Used for
/// backend-agreement studies; the evolution itself is always periodic.
pub fn convolve_linear(spec: &PotentialSpec, density: &ComplexField) -> Result<ComplexField> {
    let grid = density.grid();
    let n = grid.dim();
    let ns = grid.points();
    let big = SpectralGrid::new(n, 2 * ns, 2.0 * grid.length())?;
    let offset = ns / 2;
    let map = |flat: usize| -> usize {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for ax in (0..n).rev() {
            idx[ax] = rem % ns;
            rem /= ns;
        }
        idx[..n].iter().fold(0usize, |acc, j| acc * 2 * ns + j + offset)
    };
    let mut padded = ComplexField::zeros(&big);
    for flat in 0..grid.total_points() {
        padded.values_mut()[map(flat)] = density.values()[flat];
    }
    let kernel = build_kernel(&big, spec)?;
    let conv = convolve(&kernel, &padded)?;
    let mut out = ComplexField::zeros(grid);
    for flat in 0..grid.total_points() {
        out.values_mut()[flat] = conv.values()[map(flat)];
    }
    Ok(out)
}

/// Riesz constant c_{n,γ} = 2^{n−γ} π^{n/2} Γ((n−γ)/2) / Γ(γ/2) for the
/// transform convention φ̂(ξ) = ∫ φ e^{−iξ·x} dx.
pub fn riesz_constant(n: usize, gamma: f64) -> f64 {
    let n = n as f64;
    2.0f64.powf(n - gamma) * std::f64::consts::PI.powf(n / 2.0) * gamma_fn((n - gamma) / 2.0)
        / gamma_fn(gamma / 2.0)
}

/// ∫_{[−b, b]^n} |x|^{−γ} dx, exact up to Gauss-Legendre accuracy.
///
/// By symmetry this is 2^n times the corner integral over \[0, b\]^n,
/// and the corner integral obeys the exact scaling I(b) = b^{n−γ} I(1)
/// with I(1) = S / (1 − 2^{γ−n}), where S integrates over the smooth
/// shell \[0,1\]^n minus \[0,1/2\]^n. S is evaluated by tensor
/// Gauss-Legendre on the 2^n − 1 shell boxes, where the integrand is
/// analytic.
pub fn box_integral(n: usize, gamma: f64, half_width: f64) -> f64 {
    assert!(gamma < n as f64, "integral diverges for gamma >= n");
    let shell = unit_shell_integral(n, gamma);
    let corner_unit = shell / (1.0 - 2.0f64.powf(gamma - n as f64));
    2.0f64.powi(n as i32) * half_width.powf(n as f64 - gamma) * corner_unit
}

/// Exact cell average of |x|^{−γ} over the central cell [−h/2, h/2]^n.
pub fn cell_average_origin(n: usize, gamma: f64, h: f64) -> f64 {
    box_integral(n, gamma, h / 2.0) / h.powi(n as i32)
}

/// ∫ over [0,1]^n \ [0,1/2]^n of |x|^{−γ}.
fn unit_shell_integral(n: usize, gamma: f64) -> f64 {
    let mut total = 0.0;
    // Each shell box picks [0,1/2] or [1/2,1] per axis, excluding the
    // all-low combination.
    for mask in 1..(1usize << n) {
        let mut lo = [0.0f64; 3];
        let mut hi = [0.0f64; 3];
        for ax in 0..n {
            if mask & (1 << ax) != 0 {
                lo[ax] = 0.5;
                hi[ax] = 1.0;
            } else {
                lo[ax] = 0.0;
                hi[ax] = 0.5;
            }
        }
        total += gl_box(n, &lo, &hi, |x| {
            let r2: f64 = x[..n].iter().map(|&v| v * v).sum();
            r2.sqrt().powf(-gamma)
        });
    }
    total
}

/// Tensor-product 16-point Gauss-Legendre over an axis-aligned box.
fn gl_box(n: usize, lo: &[f64; 3], hi: &[f64; 3], f: impl Fn(&[f64; 3]) -> f64) -> f64 {
    let m = GL_NODES.len();
    let count = m.pow(n as u32);
    let mut sum = 0.0;
    let mut jacobian = 1.0;
    for ax in 0..n {
        jacobian *= (hi[ax] - lo[ax]) / 2.0;
    }
    for flat in 0..count {
        let mut rem = flat;
        let mut x = [0.0f64; 3];
        let mut w = 1.0;
        for ax in 0..n {
            let i = rem % m;
            rem /= m;
            x[ax] = 0.5 * (lo[ax] + hi[ax]) + 0.5 * (hi[ax] - lo[ax]) * GL_NODES[i];
            w *= GL_WEIGHTS[i];
        }
        sum += w * f(&x);
    }
    sum * jacobian
}

// 16-point Gauss-Legendre nodes and weights on [−1, 1].
const GL_NODES: [f64; 16] = [
    -0.9894009349916499,
    -0.9445750230732326,
    -0.8656312023878318,
    -0.755404408355003,
    -0.6178762444026438,
    -0.4580167776572274,
    -0.2816035507792589,
    -0.0950125098376374,
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.755404408355003,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL_WEIGHTS: [f64; 16] = [
    0.0271524594117541,
    0.0622535239386479,
    0.0951585116824928,
    0.1246289712555339,
    0.1495959888165767,
    0.1691565193950025,
    0.1826034150449236,
    0.1894506104550685,
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

/// Lanczos approximation (g = 7, 9 terms), positive arguments.
pub fn gamma_fn(x: f64) -> f64 {
    assert!(x > 0.0, "gamma_fn expects a positive argument");
    const G: [f64; 9] = [
        0.9999999999998099,
        676.5203681218851,
        -1259.1392167224028,
        771.3234287776531,
        -176.6150291621406,
        12.507343278686905,
        -0.13857109526572012,
        9.984369578019572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection: Γ(x) = π / (sin(πx) Γ(1−x))
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, &g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}
