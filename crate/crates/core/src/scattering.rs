//! Interaction-picture diagnostics, final-state extraction with
//! decay-rate fitting, the final-state (backward) problem realizing the
//! scattering operator S, and the X-norm diagnostic suite.
//!
//! The interaction profile Φ^ε(t) = U_ε(−t) w^ε(t) is constant for the
//! free flow; for the nonlinear flow its Cauchy differences decay like
//! ⟨t⟩^{−δ} with δ = 2nβ/(n+2) − 2, and its limit defines the final
//! state. The scattering operator maps prescribed past data (f₋, g₋)
//! through the truncated Duhamel fixed point on [−T, T] to extracted
//! future data (f₊, g₊).

use num_complex::Complex64;
use num_rational::BigRational;
use serde::Serialize;

use crate::dynamics::{picard_iterate, HalfWavePair, PicardDiagnostics, Trajectory};
use crate::error::{Error, Result};
use crate::params::RationalJson;
use crate::potential::{force_from_halfwaves, KernelMultiplier};
use crate::spectral::{support_radius, Branch, ComplexField, NormSpec};

/// Amplitude threshold (relative to peak) for the x-weighted support
/// guard. Coarser than the clean-horizon threshold: the half-wave
/// variables carry e^{−|x|} tails outside the light cone, and amplitude
/// at this level contributes at most ~L·1e−6 through an x-weight.
const X_WEIGHT_SUPPORT_THRESHOLD: f64 = 1e-6;

/// Φ^ε(t) = U_ε(−t) w^ε(t), branchwise. The time label is kept.
pub fn interaction_profile(pair: &HalfWavePair) -> HalfWavePair {
    let t = pair.time;
    HalfWavePair {
        plus: pair.plus.free_propagate(-t, Branch::Plus),
        minus: pair.minus.free_propagate(-t, Branch::Minus),
        time: t,
    }
}

/// Least-squares decay fit: slope of log(value) against log⟨t⟩ with
/// ⟨t⟩ = √(1+t²). Reported as δ_fit = −slope.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub delta: f64,
    pub residual_rms: f64,
    pub points: usize,
    pub window: (f64, f64),
}

pub fn fit_decay_exponent(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<DecayFit> {
    let window = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let selected: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if selected.len() < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: selected.len() });
    }
    if selected.iter().any(|(_, v)| *v <= 0.0) {
        return Err(Error::NonPositiveFitValues);
    }
    let xs: Vec<f64> = selected.iter().map(|(t, _)| (1.0 + t * t).sqrt().ln()).collect();
    let ys: Vec<f64> = selected.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("decay fit needs spread in log⟨t⟩".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let t_lo = selected.iter().map(|(t, _)| *t).fold(f64::INFINITY, f64::min);
    let t_hi = selected.iter().map(|(t, _)| *t).fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayFit { delta: -slope, residual_rms, points: selected.len(), window: (t_lo, t_hi) })
}

/// Final states, interaction-picture tail series, and the decay fit.
#[derive(Debug)]
pub struct ScatteringReport {
    /// Extracted final profile w_±^ε := Φ^ε(T_max).
    pub final_state: HalfWavePair,
    /// (t_j, ‖Φ(T_max) − Φ(t_j)‖_{H^β}), t_j < T_max.
    pub tail_series: Vec<(f64, f64)>,
    /// (t_j, ‖Φ(t_{j+1}) − Φ(t_j)‖_{H^β}).
    pub cauchy_series: Vec<(f64, f64)>,
    pub delta_fit: Option<DecayFit>,
    pub delta_theory: Option<BigRational>,
    pub beta: f64,
    pub horizon: f64,
    pub fit_window: (f64, f64),
    /// Tail values all below the free-flow threshold; no fit attempted.
    pub free_flow: bool,
    /// Cauchy differences grew somewhere past the transient window.
    pub non_monotone_tail: bool,
}

impl ScatteringReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "beta": self.beta,
            "horizon": self.horizon,
            "fit_window": { "t_lo": self.fit_window.0, "t_hi": self.fit_window.1 },
            "delta_fit": self.delta_fit,
            "delta_theory": self.delta_theory.as_ref().map(RationalJson::from),
            "free_flow": self.free_flow,
            "non_monotone_tail": self.non_monotone_tail,
            "tail_series": self.tail_series,
            "cauchy_series": self.cauchy_series,
        })
    }
}

/// Relative level below which a tail is considered identically zero
/// (free flow) and no decay fit is attempted.
const FREE_FLOW_TAIL: f64 = 1e-10;

/// Extract final states and tail diagnostics from a trajectory.
/// The default fit window is the last half of the samples.
pub fn extract_final_state(
    traj: &Trajectory,
    beta: f64,
    delta_theory: Option<BigRational>,
    fit_window: Option<(f64, f64)>,
) -> Result<ScatteringReport> {
    let samples = traj.samples();
    if samples.len() < 8 {
        return Err(Error::InsufficientSamples { needed: 8, got: samples.len() });
    }
    let profiles: Vec<HalfWavePair> = samples.iter().map(interaction_profile).collect();
    let last = profiles.last().expect("nonempty");
    let final_norm = last.h_norm(beta);

    let tail_series: Vec<(f64, f64)> = profiles[..profiles.len() - 1]
        .iter()
        .map(|p| (p.time, last.sub(p).h_norm(beta)))
        .collect();
    let cauchy_series: Vec<(f64, f64)> = profiles
        .windows(2)
        .map(|w| (w[0].time, w[1].sub(&w[0]).h_norm(beta)))
        .collect();

    let max_tail = tail_series.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let free_flow = max_tail <= FREE_FLOW_TAIL * final_norm.max(1e-300);

    // monotonicity of the Cauchy differences past the transient quarter
    let transient = cauchy_series.len() / 4;
    let mut non_monotone_tail = false;
    if !free_flow {
        for w in cauchy_series[transient..].windows(2) {
            if w[1].1 > w[0].1 * (1.0 + 1e-6) {
                non_monotone_tail = true;
                break;
            }
        }
    }

    let window = fit_window.unwrap_or_else(|| {
        let mid = tail_series[tail_series.len() / 2].0;
        let hi = tail_series.last().expect("nonempty").0;
        (mid, hi)
    });

    let delta_fit = if free_flow {
        None
    } else {
        let positives: Vec<(f64, f64)> = tail_series
            .iter()
            .copied()
            .filter(|(t, v)| *t >= window.0 && *t <= window.1 && *v > 0.0)
            .collect();
        fit_decay_exponent(&positives, None).ok()
    };

    Ok(ScatteringReport {
        final_state: interaction_profile(samples.last().expect("nonempty")),
        tail_series,
        cauchy_series,
        delta_fit,
        delta_theory,
        beta,
        horizon: traj.meta.t_clean,
        fit_window: window,
        free_flow,
        non_monotone_tail,
    })
}

/// Sign s tying the prescribed data to the past profile,
/// w₋^ε = i⟨i∇⟩^{−1}g₋ + s·εf₋. The plus convention matches the forward
/// half-wave data map (and makes S the identity for the free flow); the
/// minus variant is kept as a switchable alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum FinalStateSign {
    #[default]
    PlusF,
    MinusF,
}

/// Solution of the final-state (backward) problem.
#[derive(Debug)]
pub struct FinalStateSolution {
    pub trajectory: Trajectory,
    pub report: ScatteringReport,
    pub picard: PicardDiagnostics,
    /// Prescribed past profile w₋^ε.
    pub w_minus: HalfWavePair,
    /// Extracted future profile w₊^ε = U_ε(−T) w^ε(T).
    pub w_plus: HalfWavePair,
    pub f_plus: ComplexField,
    pub g_plus: ComplexField,
}

/// Configuration for [`solve_final_state_problem`].
#[derive(Debug, Clone)]
pub struct FinalStateConfig {
    /// Truncation point replacing −∞: the lattice covers [−T, T].
    pub t_start: f64,
    pub dtau: f64,
    pub iterations: usize,
    pub beta: f64,
    pub sign: FinalStateSign,
    /// Reject data with ‖(f₋,g₋)‖_{X^{β,1}} above this.
    pub smallness_guard: Option<f64>,
    /// Reject runs whose lattice extends past the clean horizon
    /// (theorem mode); otherwise the violation is tolerated.
    pub enforce_horizon: bool,
}

/// Solve w^ε(t) = U_ε(t) w₋^ε + i ∫_{−T}^t U_ε(t−τ)⟨i∇⟩^{−1}F_γ(u(τ)) dτ
/// by Picard iteration and realize S: (f₋, g₋) ↦ (f₊, g₊) by extracting
/// the interaction profile at +T.
pub fn solve_final_state_problem(
    f_minus: &ComplexField,
    g_minus: &ComplexField,
    cfg: &FinalStateConfig,
    kernel: &KernelMultiplier,
    coupling: f64,
) -> Result<FinalStateSolution> {
    f_minus.same_grid(g_minus)?;
    if cfg.t_start <= 0.0 {
        return Err(Error::InvalidParameter("final-state problem needs T_start > 0".into()));
    }
    if let Some(guard) = cfg.smallness_guard {
        let norm = f_minus.sobolev_norm(&NormSpec::weighted(cfg.beta, 1.0))
            + g_minus.sobolev_norm(&NormSpec::weighted(cfg.beta - 1.0, 1.0));
        if norm > guard {
            return Err(Error::SmallnessGuard { norm, guard });
        }
    }

    // w₋^ε = i⟨i∇⟩^{−1}g₋ + s·εf₋
    let s = match cfg.sign {
        FinalStateSign::PlusF => 1.0,
        FinalStateSign::MinusF => -1.0,
    };
    let ig = g_minus.bessel(-1.0).scaled(Complex64::new(0.0, 1.0));
    let w_minus = HalfWavePair::new(
        ig.add(&f_minus.scaled(Complex64::new(s, 0.0))),
        ig.sub(&f_minus.scaled(Complex64::new(s, 0.0))),
        -cfg.t_start,
    )?;

    if cfg.enforce_horizon {
        let t_clean =
            crate::spectral::clean_horizon(f_minus.grid(), &[&w_minus.plus, &w_minus.minus]);
        if cfg.t_start > t_clean {
            return Err(Error::HorizonViolation { t_final: cfg.t_start, t_clean });
        }
    }

    let out = picard_iterate(
        &w_minus,
        -cfg.t_start,
        cfg.t_start,
        cfg.dtau,
        cfg.iterations,
        kernel,
        coupling,
        cfg.beta,
    )?;
    if out.diagnostics.diverged {
        return Err(Error::PicardDiverged);
    }

    let last = out.trajectory.samples().last().expect("picard lattice is nonempty");
    let w_plus = interaction_profile(last);
    // f₊ = ½(w₊⁺ − w₊⁻), g₊ = −(i/2)⟨i∇⟩(w₊⁺ + w₊⁻)
    let f_plus = w_plus.plus.sub(&w_plus.minus).scaled(Complex64::new(0.5, 0.0));
    let g_plus = w_plus.plus.add(&w_plus.minus).bessel(1.0).scaled(Complex64::new(0.0, -0.5));

    let report = extract_final_state(&out.trajectory, cfg.beta, None, None)?;
    Ok(FinalStateSolution {
        trajectory: out.trajectory,
        report,
        picard: out.diagnostics,
        w_minus,
        w_plus,
        f_plus,
        g_plus,
    })
}

/// Per-sample X-norm components and their suprema over the run. The
/// space-time L^r components of the full X-norm are horizon-truncated
/// by construction; everything here is evaluated at sample times only.
#[derive(Debug, Clone, Serialize)]
pub struct XNormRow {
    pub t: f64,
    /// ‖w‖_{H^β}, branch-summed.
    pub w_hbeta: f64,
    /// ‖∂_t w‖_{H^{β−1}} with ∂_t w from the equation.
    pub dtw_hbm1: f64,
    /// ‖Pw‖_{H^{β−1}}, P = t∇ + x∂_t.
    pub pw_hbm1: f64,
    /// ‖J_ε w^ε‖_{H^{β−1}}.
    pub jw_hbm1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct XNormReport {
    pub rows: Vec<XNormRow>,
    pub sup_w: f64,
    pub sup_dtw: f64,
    pub sup_pw: f64,
    pub sup_jw: f64,
    pub beta: f64,
    pub horizon_truncated: bool,
}

/// Evaluate the X-norm components on every trajectory sample.
///
/// ∂_t w^ε is reconstructed from the equation,
/// ∂_t w^ε = −i(ε⟨i∇⟩w^ε − ⟨i∇⟩^{−1}F_γ(u)), never from finite
/// differences. Errors if the fields sit too close to the box boundary
/// for the x-weighted quantities to make sense.
pub fn xnorm_diagnostics(
    traj: &Trajectory,
    kernel: &KernelMultiplier,
    coupling: f64,
    beta: f64,
) -> Result<XNormReport> {
    let spec_m1 = NormSpec::h(beta - 1.0);
    let mut rows = Vec::with_capacity(traj.len());
    for pair in traj.samples() {
        let grid = pair.grid();
        let radius = support_radius(&[&pair.plus, &pair.minus], X_WEIGHT_SUPPORT_THRESHOLD);
        let limit = 0.45 * grid.length();
        if radius > limit {
            return Err(Error::SupportNearBoundary { radius, limit });
        }
        let t = pair.time;
        let force = force_from_halfwaves(&pair.plus, &pair.minus, kernel, coupling)?;
        let force_term = force.bessel(-1.0);

        let mut w_hbeta = 0.0;
        let mut dtw = 0.0;
        let mut pw = 0.0;
        let mut jw = 0.0;
        for eps in Branch::BOTH {
            let w = pair.branch(eps);
            w_hbeta += w.h_norm(beta);

            // ∂_t w^ε = −iε⟨i∇⟩w^ε + i⟨i∇⟩^{−1}F
            let mut dt_w = w.bessel(1.0).scaled(Complex64::new(0.0, -eps.sign()));
            dt_w.axpy(Complex64::new(0.0, 1.0), &force_term);
            dtw += dt_w.sobolev_norm(&spec_m1);

            // P w = t ∇w + x ∂_t w
            let grad = w.gradient();
            let p_components: Vec<ComplexField> = (0..grid.dim())
                .map(|ax| {
                    let mut c = grad.components[ax].scaled(Complex64::new(t, 0.0));
                    c.axpy(Complex64::new(1.0, 0.0), &dt_w.mul_coordinate(ax));
                    c
                })
                .collect();
            pw += crate::spectral::VectorField { components: p_components }
                .sobolev_norm(&spec_m1);

            jw += w.apply_j(t, eps).sobolev_norm(&spec_m1);
        }
        rows.push(XNormRow { t, w_hbeta, dtw_hbm1: dtw, pw_hbm1: pw, jw_hbm1: jw });
    }
    let sup = |f: fn(&XNormRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(XNormReport {
        sup_w: sup(|r| r.w_hbeta),
        sup_dtw: sup(|r| r.dtw_hbm1),
        sup_pw: sup(|r| r.pw_hbm1),
        sup_jw: sup(|r| r.jw_hbm1),
        rows,
        beta,
        horizon_truncated: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{to_halfwaves, RunMeta};
    use crate::potential::{build_kernel, PotentialSpec};
    use crate::spectral::SpectralGrid;
    use crate::util::{rat, SplitMix64};

    fn free_trajectory(
        grid: &std::sync::Arc<SpectralGrid>,
        sigma: f64,
        amp: f64,
        times: &[f64],
    ) -> Trajectory {
        let k0 = vec![0.25; grid.dim()];
        let f = ComplexField::gaussian(grid, amp, sigma, &k0);
        let g = ComplexField::zeros(grid);
        let w0 = to_halfwaves(&f, &g, 0.0).unwrap();
        let meta = RunMeta {
            dim: grid.dim(),
            points: grid.points(),
            box_length: grid.length(),
            dt: times[1] - times[0],
            coupling: 0.0,
            gamma: 0.5,
            t_clean: crate::spectral::clean_horizon(grid, &[&f, &g]),
            horizon_exceeded: false,
        };
        let mut traj = Trajectory::new(meta);
        for &t in times {
            traj.push(w0.free_propagate(t));
        }
        traj
    }

    #[test]
    fn interaction_profile_identities() {
        let grid = SpectralGrid::new(1, 64, 40.0).unwrap();
        let times: Vec<f64> = (0..10).map(|j| j as f64 * 0.5).collect();
        let traj = free_trajectory(&grid, 2.0, 0.3, &times);

        // t = 0 is the identity
        let p0 = interaction_profile(&traj.samples()[0]);
        assert!(p0.sub(&traj.samples()[0]).h_norm(1.0) < 1e-13);

        // free evolution → profile constant in t
        let base = interaction_profile(&traj.samples()[0]);
        for s in traj.samples() {
            let p = interaction_profile(s);
            let rel = p.sub(&base).h_norm(1.0) / base.h_norm(1.0);
            assert!(rel < 1e-10, "profile drift {rel}");
        }
    }

    #[test]
    fn decay_fit_exact_models() {
        // value = ⟨t⟩^{−1/2} → δ = 0.5 up to roundoff
        let series: Vec<(f64, f64)> = (1..40)
            .map(|j| {
                let t = j as f64 * 0.5;
                (t, (1.0 + t * t).sqrt().powf(-0.5))
            })
            .collect();
        let fit = fit_decay_exponent(&series, None).unwrap();
        assert!((fit.delta - 0.5).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);

        // constant series → δ = 0
        let flat: Vec<(f64, f64)> = (1..20).map(|j| (j as f64, 2.5)).collect();
        let fit = fit_decay_exponent(&flat, None).unwrap();
        assert!(fit.delta.abs() < 1e-12);

        // ⟨t⟩^{−4/25} fits its own model: δ = 0.16 up to solver roundoff
        let model: Vec<(f64, f64)> = (1..40)
            .map(|j| {
                let t = j as f64 * 0.5;
                (t, (1.0 + t * t).sqrt().powf(-4.0 / 25.0))
            })
            .collect();
        let fit = fit_decay_exponent(&model, None).unwrap();
        assert!((fit.delta - 0.16).abs() < 1e-3);

        // planted 0.16 with 1% multiplicative noise
        let mut rng = SplitMix64::new(9);
        let noisy: Vec<(f64, f64)> = (2..80)
            .map(|j| {
                let t = j as f64 * 0.5;
                let v = 3.0 * (1.0 + t * t).sqrt().powf(-0.16) * (1.0 + 0.01 * rng.next_signed());
                (t, v)
            })
            .collect();
        let fit = fit_decay_exponent(&noisy, None).unwrap();
        assert!((fit.delta - 0.16).abs() < 0.02, "planted-fit delta {}", fit.delta);

        // windows and errors
        assert!(fit_decay_exponent(&series[..3], None).is_err());
        let with_zero = vec![(1.0, 1.0), (2.0, 0.0), (3.0, 0.5), (4.0, 0.4)];
        assert!(matches!(
            fit_decay_exponent(&with_zero, None),
            Err(Error::NonPositiveFitValues)
        ));
        let fit = fit_decay_exponent(&series, Some((5.0, 15.0))).unwrap();
        assert!(fit.window.0 >= 5.0 && fit.window.1 <= 15.0);
    }

    #[test]
    fn extract_on_free_run_flags_zero_tail() {
        let grid = SpectralGrid::new(1, 64, 40.0).unwrap();
        let times: Vec<f64> = (0..12).map(|j| j as f64 * 0.25).collect();
        let traj = free_trajectory(&grid, 2.0, 0.3, &times);
        let report = extract_final_state(&traj, 1.0, None, None).unwrap();
        assert!(report.free_flow);
        assert!(report.delta_fit.is_none());
        assert!(!report.non_monotone_tail);
        assert_eq!(report.tail_series.len(), 11);
        for (_, v) in &report.tail_series {
            assert!(*v <= 1e-10 * report.final_state.h_norm(1.0));
        }
        // the extracted final state is the initial half-wave pair
        let initial = &traj.samples()[0];
        let rel = report.final_state.sub(initial).h_norm(1.0) / initial.h_norm(1.0);
        assert!(rel < 1e-10, "free final state differs from data: {rel}");
    }

    #[test]
    fn extract_requires_enough_samples() {
        let grid = SpectralGrid::new(1, 64, 40.0).unwrap();
        let times: Vec<f64> = (0..5).map(|j| j as f64 * 0.25).collect();
        let traj = free_trajectory(&grid, 2.0, 0.3, &times);
        assert!(matches!(
            extract_final_state(&traj, 1.0, None, None),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn scattering_operator_is_identity_for_free_flow() {
        let grid = SpectralGrid::new(1, 64, 60.0).unwrap();
        let kernel = build_kernel(&grid, &PotentialSpec::new(rat(1, 2)).unwrap()).unwrap();
        let f = ComplexField::gaussian(&grid, 0.2, 2.0, &[0.4]);
        let g = ComplexField::gaussian(&grid, 0.1, 2.0, &[0.0]);
        let cfg = FinalStateConfig {
            t_start: 2.0,
            dtau: 0.05,
            iterations: 3,
            beta: 1.0,
            sign: FinalStateSign::PlusF,
            smallness_guard: None,
            enforce_horizon: false,
        };
        let sol = solve_final_state_problem(&f, &g, &cfg, &kernel, 0.0).unwrap();
        let rel_f = sol.f_plus.sub(&f).l2_norm() / f.l2_norm();
        let rel_g = sol.g_plus.sub(&g).l2_norm() / g.l2_norm();
        assert!(rel_f < 1e-10, "S should be the identity on f: {rel_f}");
        assert!(rel_g < 1e-10, "S should be the identity on g: {rel_g}");
        assert!(sol.report.free_flow);
    }

    #[test]
    fn final_state_guards() {
        let grid = SpectralGrid::new(1, 64, 60.0).unwrap();
        let kernel = build_kernel(&grid, &PotentialSpec::new(rat(1, 2)).unwrap()).unwrap();
        let f = ComplexField::gaussian(&grid, 5.0, 2.0, &[0.0]);
        let g = ComplexField::zeros(&grid);
        let cfg = FinalStateConfig {
            t_start: 1.0,
            dtau: 0.05,
            iterations: 2,
            beta: 1.0,
            sign: FinalStateSign::PlusF,
            smallness_guard: Some(1.0),
            enforce_horizon: false,
        };
        assert!(matches!(
            solve_final_state_problem(&f, &g, &cfg, &kernel, -1.0),
            Err(Error::SmallnessGuard { .. })
        ));
        let bad = FinalStateConfig { t_start: -1.0, smallness_guard: None, ..cfg.clone() };
        assert!(solve_final_state_problem(&f, &g, &bad, &kernel, -1.0).is_err());

        // horizon enforcement: σ = 2 on L = 60 leaves T_clean ≈ 15
        let far = FinalStateConfig {
            t_start: 20.0,
            smallness_guard: None,
            enforce_horizon: true,
            ..cfg
        };
        assert!(matches!(
            solve_final_state_problem(&f, &g, &far, &kernel, -1.0),
            Err(Error::HorizonViolation { .. })
        ));
    }

    #[test]
    fn picard_divergence_is_an_error_for_large_data() {
        let grid = SpectralGrid::new(1, 64, 60.0).unwrap();
        let kernel = build_kernel(&grid, &PotentialSpec::new(rat(1, 2)).unwrap()).unwrap();
        let f = ComplexField::gaussian(&grid, 4.0, 2.0, &[0.0]);
        let g = ComplexField::zeros(&grid);
        let cfg = FinalStateConfig {
            t_start: 3.0,
            dtau: 0.05,
            iterations: 10,
            beta: 1.0,
            sign: FinalStateSign::PlusF,
            smallness_guard: None,
            enforce_horizon: false,
        };
        assert!(matches!(
            solve_final_state_problem(&f, &g, &cfg, &kernel, -1.0),
            Err(Error::PicardDiverged)
        ));
    }

    #[test]
    fn minus_sign_convention_flips_f() {
        // with coupling 0 the two conventions give S = identity on g and
        // ±identity on f respectively
        let grid = SpectralGrid::new(1, 32, 40.0).unwrap();
        let kernel = build_kernel(&grid, &PotentialSpec::new(rat(1, 2)).unwrap()).unwrap();
        let f = ComplexField::gaussian(&grid, 0.2, 2.0, &[0.0]);
        let g = ComplexField::zeros(&grid);
        let cfg = FinalStateConfig {
            t_start: 1.0,
            dtau: 0.05,
            iterations: 2,
            beta: 1.0,
            sign: FinalStateSign::MinusF,
            smallness_guard: None,
            enforce_horizon: false,
        };
        let sol = solve_final_state_problem(&f, &g, &cfg, &kernel, 0.0).unwrap();
        let rel = sol.f_plus.add(&f).l2_norm() / f.l2_norm();
        assert!(rel < 1e-10, "minus convention should negate f: {rel}");
    }

    #[test]
    fn xnorm_zero_trajectory_is_zero() {
        let grid = SpectralGrid::new(1, 32, 30.0).unwrap();
        let kernel = build_kernel(&grid, &PotentialSpec::new(rat(1, 2)).unwrap()).unwrap();
        let zero = ComplexField::zeros(&grid);
        let meta = RunMeta {
            dim: 1,
            points: 32,
            box_length: 30.0,
            dt: 0.5,
            coupling: -1.0,
            gamma: 0.5,
            t_clean: 15.0,
            horizon_exceeded: false,
        };
        let mut traj = Trajectory::new(meta);
        for j in 0..4 {
            traj.push(HalfWavePair::new(zero.clone(), zero.clone(), j as f64 * 0.5).unwrap());
        }
        let report = xnorm_diagnostics(&traj, &kernel, -1.0, 1.0).unwrap();
        assert_eq!(report.sup_w, 0.0);
        assert_eq!(report.sup_dtw, 0.0);
        assert_eq!(report.sup_pw, 0.0);
        assert_eq!(report.sup_jw, 0.0);
    }

    #[test]
    fn xnorm_jw_constant_on_free_flow() {
        let grid = SpectralGrid::new(2, 64, 32.0 * std::f64::consts::PI).unwrap();
        let kernel = build_kernel(&grid, &PotentialSpec::new(rat(13, 10)).unwrap()).unwrap();
        let times: Vec<f64> = (0..6).map(|j| j as f64 * 0.4).collect();
        let traj = free_trajectory(&grid, 3.0, 0.2, &times);
        let report = xnorm_diagnostics(&traj, &kernel, 0.0, 1.3).unwrap();
        let base = report.rows[0].jw_hbm1;
        for row in &report.rows {
            let rel = (row.jw_hbm1 - base).abs() / base;
            assert!(rel < 1e-6, "Jw drift {rel} at t={}", row.t);
        }
    }

    #[test]
    fn xnorm_rejects_wide_support() {
        let grid = SpectralGrid::new(1, 64, 20.0).unwrap();
        let kernel = build_kernel(&grid, &PotentialSpec::new(rat(1, 2)).unwrap()).unwrap();
        // σ = 4 on L = 20: support radius ≈ 10 > 0.45 L
        let f = ComplexField::gaussian(&grid, 0.3, 4.0, &[0.0]);
        let pair = to_halfwaves(&f, &ComplexField::zeros(&grid), 0.0).unwrap();
        let meta = RunMeta {
            dim: 1,
            points: 64,
            box_length: 20.0,
            dt: 0.5,
            coupling: -1.0,
            gamma: 0.5,
            t_clean: 1.0,
            horizon_exceeded: false,
        };
        let mut traj = Trajectory::new(meta);
        traj.push(pair);
        assert!(matches!(
            xnorm_diagnostics(&traj, &kernel, -1.0, 1.0),
            Err(Error::SupportNearBoundary { .. })
        ));
    }

    #[test]
    fn free_lp_decay_rate_matches_dispersive_estimate() {
        // ‖u(t)‖_{L^p} ≲ ⟨t⟩^{−(n/2)(1−2/p)}(‖u‖_{H^α}+‖Ju‖_{H^{α−1}}):
        // on a free n=2 run the L⁴ norm should decay at rate ≈ 1/2.
        let grid = SpectralGrid::new(2, 128, 64.0 * std::f64::consts::PI).unwrap();
        let f = ComplexField::gaussian(&grid, 0.3, 2.0, &[0.0, 0.0]);
        let g = ComplexField::zeros(&grid);
        let w0 = to_halfwaves(&f, &g, 0.0).unwrap();
        let p4 = NormSpec::lp(4.0).unwrap();
        let series: Vec<(f64, f64)> = (4..20)
            .map(|j| {
                let t = j as f64 * 2.0;
                let state = crate::dynamics::from_halfwaves(&w0.free_propagate(t));
                (t, state.u.sobolev_norm(&p4))
            })
            .collect();
        let fit = fit_decay_exponent(&series, Some((12.0, 40.0))).unwrap();
        assert!(
            (fit.delta - 0.5).abs() < 0.2,
            "free L⁴ decay rate {} (expected ≈ 0.5)",
            fit.delta
        );
    }
}
