//! Periodic-box discretization and Fourier-multiplier calculus.
//!
//! The box [−L/2, L/2)^n with N points per axis stands in for R^n. Grid
//! points are x_j = jh − L/2 with h = L/N; the frequency lattice is
//! ξ_m = 2πm/L with m running over the symmetric range. The transform
//! convention is φ̂(ξ) = Σ φ(x) e^{−iξ·x} h^n with the reciprocal
//! normalization on the inverse; multipliers and kernel spectra are all
//! defined against it.
//!
//! Because the Klein-Gordon group velocity |ξ|/⟨ξ⟩ is below 1, a run is
//! faithful to the whole-space problem up to the clean horizon
//! T_clean = L/2 − R₀, where R₀ is the effective radius of the initial
//! data; see [`clean_horizon`].

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::NdFft;

/// Relative amplitude below which a field is considered absent when
/// measuring effective support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Half-wave branch sign ε ∈ {+, −}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// Periodic cubic grid: n ∈ {1,2,3} axes, N points per axis (power of
/// two), physical box length L per axis.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    dim: usize,
    points: usize,
    length: f64,
    /// ξ per axis index, FFT (wrap-around) order.
    freqs: Vec<f64>,
    /// centered coordinate per axis index.
    coords: Vec<f64>,
    fft: NdFft,
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.length == other.length
    }
}

impl SpectralGrid {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Arc<Self>> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dim must be 1..=3, got {dim}")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two >= 4, got {points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!("box length must be positive, got {length}")));
        }
        let h = length / points as f64;
        let freqs = (0..points)
            .map(|m| {
                let m = if m < points / 2 { m as i64 } else { m as i64 - points as i64 };
                2.0 * std::f64::consts::PI * m as f64 / length
            })
            .collect();
        let coords = (0..points).map(|j| j as f64 * h - length / 2.0).collect();
        Ok(Arc::new(Self { dim, points, length, freqs, coords, fft: NdFft::new(dim, points) }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn points(&self) -> usize {
        self.points
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    /// Grid spacing h = L/N.
    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }
    /// Quadrature weight h^n.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }
    pub fn total_points(&self) -> usize {
        self.points.pow(self.dim as u32)
    }
    /// Frequency lattice spacing 2π/L.
    pub fn freq_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Frequency vector of a flat index, padded with zeros past `dim`.
    #[inline]
    pub fn mode(&self, flat: usize) -> [f64; 3] {
        let mut xi = [0.0; 3];
        let mut rem = flat;
        for ax in (0..self.dim).rev() {
            xi[ax] = self.freqs[rem % self.points];
            rem /= self.points;
        }
        xi
    }

    /// Centered coordinate vector of a flat index.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rem = flat;
        for ax in (0..self.dim).rev() {
            x[ax] = self.coords[rem % self.points];
            rem /= self.points;
        }
        x
    }

    /// Signed displacement vector of a flat index in wrap-around order:
    /// component m maps to (m < N/2 ? m : m − N)·h. This is the layout a
    /// convolution kernel must be sampled in.
    #[inline]
    pub fn displacement(&self, flat: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut d = [0.0; 3];
        let mut rem = flat;
        for ax in (0..self.dim).rev() {
            let m = rem % self.points;
            let m = if m < self.points / 2 { m as i64 } else { m as i64 - self.points as i64 };
            d[ax] = m as f64 * h;
            rem /= self.points;
        }
        d
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.fft.forward(data);
    }
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.fft.inverse(data);
    }
}

fn norm_sq(v: &[f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// ⟨·⟩ = √(1 + |·|²)
#[inline]
pub fn bracket(v: f64) -> f64 {
    (1.0 + v * v).sqrt()
}

/// Complex-valued grid function.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<SpectralGrid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![Complex64::default(); grid.total_points()] }
    }

    pub fn from_values(grid: &Arc<SpectralGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::InvalidParameter(format!(
                "field length {} does not match grid ({} points)",
                values.len(),
                grid.total_points()
            )));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Sample a function of the centered coordinate.
    pub fn from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.total_points())
            .map(|flat| {
                let x = grid.point(flat);
                f(&x[..dim])
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    /// Lattice-exact plane wave e^{ik·x} with k = 2π·modes/L.
    pub fn plane_wave(grid: &Arc<SpectralGrid>, modes: &[i64]) -> Self {
        assert_eq!(modes.len(), grid.dim(), "one mode number per axis");
        let k: Vec<f64> = modes.iter().map(|&m| m as f64 * grid.freq_spacing()).collect();
        Self::from_fn(grid, |x| {
            let phase: f64 = k.iter().zip(x).map(|(ki, xi)| ki * xi).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    /// Modulated Gaussian a·e^{−|x|²/(2σ²)}·e^{ik₀·x}.
    pub fn gaussian(grid: &Arc<SpectralGrid>, amplitude: f64, sigma: f64, k0: &[f64]) -> Self {
        let dim = grid.dim();
        assert_eq!(k0.len(), dim, "one wavenumber component per axis");
        let k0 = k0.to_vec();
        Self::from_fn(grid, move |x| {
            let r2: f64 = x.iter().map(|&xi| xi * xi).sum();
            let phase: f64 = k0.iter().zip(x).map(|(ki, xi)| ki * xi).sum();
            Complex64::from_polar(amplitude * (-r2 / (2.0 * sigma * sigma)).exp(), phase)
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid.as_ref() == other.grid.as_ref() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Raw DFT spectrum in wrap-around layout (no h^n factor).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut spec = self.values.clone();
        self.grid.forward(&mut spec);
        spec
    }

    pub fn from_spectrum(grid: &Arc<SpectralGrid>, mut spec: Vec<Complex64>) -> Result<Self> {
        if spec.len() != grid.total_points() {
            return Err(Error::InvalidParameter("spectrum length does not match grid".into()));
        }
        grid.inverse(&mut spec);
        Ok(Self { grid: grid.clone(), values: spec })
    }

    /// Apply a Fourier multiplier m(ξ).
    pub fn apply_multiplier(&self, m: impl Fn(&[f64; 3]) -> Complex64) -> Self {
        let mut spec = self.values.clone();
        self.grid.forward(&mut spec);
        for (flat, v) in spec.iter_mut().enumerate() {
            *v *= m(&self.grid.mode(flat));
        }
        self.grid.inverse(&mut spec);
        Self { grid: self.grid.clone(), values: spec }
    }

    /// Bessel multiplier ⟨i∇⟩^s: spectrum scaled by (1+|ξ|²)^{s/2}.
    /// Never singular; s may be negative.
    pub fn bessel(&self, s: f64) -> Self {
        self.apply_multiplier(|xi| Complex64::new((1.0 + norm_sq(xi)).powf(s / 2.0), 0.0))
    }

    /// Free half-wave propagator U_ε(t): spectrum multiplied by
    /// e^{−iε⟨ξ⟩t}. Exact group property by construction.
    pub fn free_propagate(&self, t: f64, eps: Branch) -> Self {
        let sign = eps.sign();
        self.apply_multiplier(|xi| Complex64::from_polar(1.0, -sign * bracket(norm_sq(xi).sqrt()) * t))
    }

    /// Spectral gradient: component j carries the multiplier iξ_j.
    pub fn gradient(&self) -> VectorField {
        let dim = self.grid.dim();
        let mut spec = self.values.clone();
        self.grid.forward(&mut spec);
        let components = (0..dim)
            .map(|ax| {
                let mut comp = spec.clone();
                for (flat, v) in comp.iter_mut().enumerate() {
                    let xi = self.grid.mode(flat);
                    *v *= Complex64::new(0.0, xi[ax]);
                }
                self.grid.inverse(&mut comp);
                ComplexField { grid: self.grid.clone(), values: comp }
            })
            .collect();
        VectorField { components }
    }

    /// Pointwise multiplication by the centered coordinate x_axis.
    pub fn mul_coordinate(&self, axis: usize) -> Self {
        assert!(axis < self.grid.dim());
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(flat, v)| v * self.grid.point(flat)[axis])
            .collect();
        Self { grid: self.grid.clone(), values }
    }

    /// J_ε = ⟨i∇⟩x + iεt∇ applied componentwise per spatial direction.
    pub fn apply_j(&self, t: f64, eps: Branch) -> VectorField {
        let grad = self.gradient();
        let dim = self.grid.dim();
        let i_eps_t = Complex64::new(0.0, eps.sign() * t);
        let components = (0..dim)
            .map(|ax| {
                let weighted = self.mul_coordinate(ax).bessel(1.0);
                let mut values = weighted.values;
                for (v, g) in values.iter_mut().zip(&grad.components[ax].values) {
                    *v += i_eps_t * g;
                }
                ComplexField { grid: self.grid.clone(), values }
            })
            .collect();
        VectorField { components }
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v.conj()).collect() }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn pointwise_mul(&self, other: &ComplexField) -> Self {
        debug_assert!(self.same_grid(other).is_ok());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// |φ|² as a (real-valued) complex field.
    pub fn abs_squared(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.norm()))
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.im.abs()))
    }

    /// Discrete L² norm (Σ|φ|² h^n)^{1/2}, computed in physical space.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (sum * self.grid.cell_volume()).sqrt()
    }

    /// Weighted Sobolev norm ‖⟨x⟩^k ⟨i∇⟩^β φ‖_{L^p}. For p = 2, k = 0 the
    /// norm is evaluated purely spectrally (Parseval); otherwise ⟨i∇⟩^β is
    /// applied spectrally, the weight pointwise, and the L^p quadrature
    /// norm taken on the grid.
    pub fn sobolev_norm(&self, spec: &NormSpec) -> f64 {
        if spec.k == 0.0 && spec.p == LebesgueExponent::Finite(2.0) {
            let mut s = self.values.clone();
            self.grid.forward(&mut s);
            let mut sum = 0.0;
            for (flat, v) in s.iter().enumerate() {
                let w = (1.0 + norm_sq(&self.grid.mode(flat))).powf(spec.beta);
                sum += w * v.norm_sqr();
            }
            // Parseval: Σ|φ|² h^n = Σ|φ̂|² / L^n with φ̂ = h^n·DFT.
            let hn = self.grid.cell_volume();
            let ln = self.grid.length().powi(self.grid.dim() as i32);
            return (sum * hn * hn / ln).sqrt();
        }
        let smoothed = if spec.beta == 0.0 { self.clone() } else { self.bessel(spec.beta) };
        let weighted: Vec<f64> = smoothed
            .values
            .iter()
            .enumerate()
            .map(|(flat, v)| {
                let x = self.grid.point(flat);
                (1.0 + norm_sq(&x)).powf(spec.k / 2.0) * v.norm()
            })
            .collect();
        lp_quadrature(&weighted, spec.p, self.grid.cell_volume())
    }

    /// H^β = H₂^{β,0} norm.
    pub fn h_norm(&self, beta: f64) -> f64 {
        self.sobolev_norm(&NormSpec::h(beta))
    }

    pub fn add(&self, other: &ComplexField) -> Self {
        debug_assert!(self.same_grid(other).is_ok());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn sub(&self, other: &ComplexField) -> Self {
        debug_assert!(self.same_grid(other).is_ok());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// self += c · other
    pub fn axpy(&mut self, c: Complex64, other: &ComplexField) {
        debug_assert!(self.same_grid(other).is_ok());
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += c * o;
        }
    }
}

fn lp_quadrature(values: &[f64], p: LebesgueExponent, cell_volume: f64) -> f64 {
    match p {
        LebesgueExponent::Infinity => values.iter().fold(0.0, |acc, &v| acc.max(v)),
        LebesgueExponent::Finite(p) => {
            let sum: f64 = values.iter().map(|&v| v.powf(p)).sum();
            (sum * cell_volume).powf(1.0 / p)
        }
    }
}

/// Lebesgue exponent with an explicit ∞ marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LebesgueExponent {
    Finite(f64),
    Infinity,
}

/// Specification of a weighted Sobolev norm H_p^{β,k}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub beta: f64,
    pub p: LebesgueExponent,
    pub k: f64,
}

impl NormSpec {
    pub fn new(beta: f64, p: LebesgueExponent, k: f64) -> Result<Self> {
        if let LebesgueExponent::Finite(p) = p {
            // NaN must be rejected too
            if p.is_nan() || p < 1.0 {
                return Err(Error::InvalidParameter(format!("Lebesgue exponent p must be >= 1, got {p}")));
            }
        }
        if k < 0.0 {
            return Err(Error::InvalidParameter("weight order k must be >= 0".into()));
        }
        Ok(Self { beta, p, k })
    }

    /// H^β (p = 2, k = 0).
    pub fn h(beta: f64) -> Self {
        Self { beta, p: LebesgueExponent::Finite(2.0), k: 0.0 }
    }

    /// H^{β,k} (p = 2).
    pub fn weighted(beta: f64, k: f64) -> Self {
        Self { beta, p: LebesgueExponent::Finite(2.0), k }
    }

    /// Plain L^p.
    pub fn lp(p: f64) -> Result<Self> {
        Self::new(0.0, LebesgueExponent::Finite(p), 0.0)
    }
}

/// Vector of n component fields (gradients, J_ε φ, Pφ). Norms reduce the
/// components by pointwise Euclidean magnitude.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<ComplexField>,
}

impl VectorField {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        assert_eq!(self.dim(), other.dim());
        VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    /// ‖⟨x⟩^k ⟨i∇⟩^β F‖_{L^p} with |F| the pointwise Euclidean magnitude.
    pub fn sobolev_norm(&self, spec: &NormSpec) -> f64 {
        let grid = self.components[0].grid.clone();
        if spec.k == 0.0 && spec.p == LebesgueExponent::Finite(2.0) {
            let sq: f64 = self.components.iter().map(|c| c.sobolev_norm(spec).powi(2)).sum();
            return sq.sqrt();
        }
        let smoothed: Vec<ComplexField> =
            self.components.iter().map(|c| c.bessel(spec.beta)).collect();
        let weighted: Vec<f64> = (0..grid.total_points())
            .map(|flat| {
                let mag2: f64 = smoothed.iter().map(|c| c.values[flat].norm_sqr()).sum();
                let x = grid.point(flat);
                (1.0 + norm_sq(&x)).powf(spec.k / 2.0) * mag2.sqrt()
            })
            .collect();
        lp_quadrature(&weighted, spec.p, grid.cell_volume())
    }

    pub fn h_norm(&self, beta: f64) -> f64 {
        self.sobolev_norm(&NormSpec::h(beta))
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: f64 = self.components.iter().map(|c| c.l2_norm().powi(2)).sum();
        sq.sqrt()
    }
}

/// Largest distance from the box center at which any of the fields still
/// carries at least `threshold` of its peak amplitude.
pub fn support_radius(fields: &[&ComplexField], threshold: f64) -> f64 {
    let peak = fields.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let cutoff = threshold * peak;
    let grid = fields[0].grid.clone();
    let mut radius: f64 = 0.0;
    for flat in 0..grid.total_points() {
        let amp = fields.iter().map(|f| f.values[flat].norm()).fold(0.0, f64::max);
        if amp >= cutoff {
            radius = radius.max(norm_sq(&grid.point(flat)).sqrt());
        }
    }
    radius
}

/// Support radius at the clean-horizon threshold `SUPPORT_THRESHOLD`.
pub fn effective_radius(fields: &[&ComplexField]) -> f64 {
    support_radius(fields, SUPPORT_THRESHOLD)
}

/// Clean horizon T_clean = L/2 − R₀: signal speed is bounded by 1, so up
/// to this time nothing emitted by the data can wrap around the torus.
pub fn clean_horizon(grid: &SpectralGrid, fields: &[&ComplexField]) -> f64 {
    (grid.length() / 2.0 - effective_radius(fields)).max(0.0)
}

// --- flat binary field format ---------------------------------------------
//
// header: u64 dim; dim × u64 points-per-axis; dim × f64 box-length-per-axis;
// payload: total_points × (re: f64, im: f64), row-major, all little-endian.

pub fn write_field(field: &ComplexField, w: &mut impl Write) -> Result<()> {
    let grid = field.grid();
    w.write_all(&(grid.dim() as u64).to_le_bytes())?;
    for _ in 0..grid.dim() {
        w.write_all(&(grid.points() as u64).to_le_bytes())?;
    }
    for _ in 0..grid.dim() {
        w.write_all(&grid.length().to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<ComplexField> {
    let mut u = [0u8; 8];
    r.read_exact(&mut u)?;
    let dim = u64::from_le_bytes(u) as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter(format!("bad dim {dim} in field header")));
    }
    let mut points = 0usize;
    for ax in 0..dim {
        r.read_exact(&mut u)?;
        let n = u64::from_le_bytes(u) as usize;
        if ax == 0 {
            points = n;
        } else if n != points {
            return Err(Error::InvalidParameter("anisotropic grids are not supported".into()));
        }
    }
    let mut length = 0.0f64;
    for ax in 0..dim {
        r.read_exact(&mut u)?;
        let l = f64::from_le_bytes(u);
        if ax == 0 {
            length = l;
        } else if l != length {
            return Err(Error::InvalidParameter("anisotropic grids are not supported".into()));
        }
    }
    let grid = SpectralGrid::new(dim, points, length)?;
    let mut values = Vec::with_capacity(grid.total_points());
    for _ in 0..grid.total_points() {
        r.read_exact(&mut u)?;
        let re = f64::from_le_bytes(u);
        r.read_exact(&mut u)?;
        let im = f64::from_le_bytes(u);
        values.push(Complex64::new(re, im));
    }
    ComplexField::from_values(&grid, values)
}
