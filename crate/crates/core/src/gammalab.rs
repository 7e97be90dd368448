//! Finite-ε experiments around the homogenized limit of the λ-kernel energy.
//!
//! Covers the limit on constants, the candidate homogenized functional, the
//! two-scale pairing, the step-function limit, the s-dependence of the
//! implied `g(1)` and the truncated-potential threshold.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{gamma_closed_form, optimal_profile, Orientation};
use crate::energy::evaluate;
use crate::error::{domain, Error, Result};
use crate::kernel::{make_lambda_kernel, PeriodicStep, PeriodicStepKernel};
use crate::numeric::{fit_power_law, ExtReal};
use crate::states::{
    admissible_interval, oscillating_profile, CellArc, Potential, StepFunction, DEFAULT_MAX_PIECES,
};

/// Errors at or below this are treated as exact and left out of rate fits.
pub const EXACT_ERROR_FLOOR: f64 = 1e-12;
/// Allowed undershoot of the limit value on whole-period grids.
pub const LIMINF_SLACK: f64 = 1e-9;

/// Parameters `(α, β, λ)` of the λ-kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaParams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl LambdaParams {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        let p = Self { alpha, beta, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        make_lambda_kernel(self.alpha, self.beta, self.lambda).map(|_| ())
    }

    pub fn kernel(&self) -> Result<PeriodicStepKernel> {
        make_lambda_kernel(self.alpha, self.beta, self.lambda)
    }

    pub fn mean(&self) -> f64 {
        self.lambda * self.alpha + (1.0 - self.lambda) * self.beta
    }
}

/// `((1 − (1 − λ)²) α + (1 − λ)² β) / 2`, the limit energy of every constant.
pub fn gamma_limit_constant_value(alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    LambdaParams::new(alpha, beta, lambda)?;
    let m = (1.0 - lambda) * (1.0 - lambda);
    Ok(0.5 * ((1.0 - m) * alpha + m * beta))
}

/// Candidate homogenized functional `min { γ(t) : t ∈ I_u }`.
///
/// `γ` is piecewise quadratic, so the minimum over `[ι, ς]` is attained at an
/// endpoint, a branch point or a branch vertex inside the interval.
pub fn homogenized_f(u: &StepFunction, params: &LambdaParams) -> Result<ExtReal> {
    params.validate()?;
    let interval = admissible_interval(u);
    if interval.empty {
        return Ok(ExtReal::PosInfinity);
    }
    let LambdaParams { alpha, beta, lambda } = *params;
    let lo = interval.iota.clamp(0.0, 1.0);
    let hi = interval.sigma.clamp(lo, 1.0);
    let vertex = params.mean() / (2.0 * alpha);
    let candidates = [lo, hi, 0.5 * lambda, 1.0 - 0.5 * lambda, vertex, 0.5, 1.0 - vertex];
    let best = candidates
        .iter()
        .filter(|&&t| (lo..=hi).contains(&t))
        .map(|&t| gamma_closed_form(alpha, beta, lambda, t))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(ExtReal::Finite(best))
}

/// Energies along a sequence `ε → 0` compared with a limit value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub eps_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub limit_ref: f64,
    pub errors: Vec<f64>,
    /// Fitted `r` in `|value − limit| ≈ C ε^r` over the last half of the
    /// grid; absent when fewer than two errors there exceed
    /// [`EXACT_ERROR_FLOOR`].
    pub fitted_rate: Option<f64>,
    pub fitted_constant: Option<f64>,
    pub final_error: f64,
    /// Every value is at least `limit_ref − LIMINF_SLACK`, except at flagged
    /// non-integer `1/ε`.
    pub liminf_holds: bool,
    /// `|last error| ≤ 2 |first error|`.
    pub envelope_holds: bool,
    pub notes: Vec<String>,
}

fn check_eps_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.is_empty() {
        return Err(domain("eps grid is empty"));
    }
    if let Some(e) = eps_grid.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(domain(format!("eps {e} outside (0, 1]")));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(domain("eps grid must be strictly decreasing"));
    }
    Ok(())
}

fn whole_periods(eps: f64) -> bool {
    let m = 1.0 / eps;
    (m - m.round()).abs() <= 1e-9 * m
}

impl ConvergenceStudy {
    pub fn from_values(eps_grid: Vec<f64>, values: Vec<f64>, limit_ref: f64) -> Result<Self> {
        check_eps_grid(&eps_grid)?;
        if values.len() != eps_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: eps_grid.len(),
                found: values.len(),
            });
        }
        let errors: Vec<f64> = values.iter().map(|v| (v - limit_ref).abs()).collect();
        let mut notes = Vec::new();

        let mut liminf_holds = true;
        for (e, v) in eps_grid.iter().zip(&values) {
            if whole_periods(*e) {
                if *v < limit_ref - LIMINF_SLACK {
                    liminf_holds = false;
                }
            } else {
                notes.push(format!(
                    "1/eps = {} is not an integer; O(eps) boundary layers affect this point",
                    1.0 / e
                ));
            }
        }

        let start = eps_grid.len() / 2;
        let tail: Vec<(f64, f64)> = eps_grid[start..]
            .iter()
            .zip(&errors[start..])
            .filter(|(_, &err)| err > EXACT_ERROR_FLOOR)
            .map(|(&e, &err)| (e, err))
            .collect();
        let skipped = eps_grid.len() - start - tail.len();
        if skipped > 0 {
            notes.push(format!(
                "{skipped} point(s) in the fitted range are exact to within {EXACT_ERROR_FLOOR:e} and carry no rate information"
            ));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = tail.into_iter().unzip();
        let fit = fit_power_law(&xs, &ys);
        if fit.is_none() {
            notes.push("fewer than two informative points; no rate fitted".to_string());
        }

        let final_error = *errors.last().expect("non-empty");
        let envelope_holds = final_error <= 2.0 * errors[0] + EXACT_ERROR_FLOOR;
        Ok(Self {
            eps_grid,
            values,
            limit_ref,
            errors,
            fitted_rate: fit.map(|f| f.rate),
            fitted_constant: fit.map(|f| f.constant),
            final_error,
            liminf_holds,
            envelope_holds,
            notes,
        })
    }
}

fn infinite_energy_on_grid<F>(eps_grid: &[f64], params: &LambdaParams, build: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<StepFunction> + Sync,
{
    check_eps_grid(eps_grid)?;
    let kernel = params.kernel()?;
    eps_grid
        .par_iter()
        .map(|&eps| {
            let u = build(eps)?;
            let r = evaluate(&u, Potential::InfiniteTripleWell, &kernel, eps)?;
            r.value
                .finite()
                .ok_or_else(|| domain("sequence element is not admissible"))
        })
        .collect()
}

/// The oscillating state `c − 1/2 + φ_{1/2}(x/ε)`.
pub fn recovery_state(c: f64, eps: f64) -> Result<StepFunction> {
    let arcs = optimal_profile(0.5, Orientation::LowCostAtZero)?;
    oscillating_profile(c - 0.5, &arcs, eps, DEFAULT_MAX_PIECES)
}

/// Energies of the recovery sequence for the constant `c`.
pub fn run_recovery_study(c: f64, params: &LambdaParams, eps_grid: &[f64]) -> Result<ConvergenceStudy> {
    let values = infinite_energy_on_grid(eps_grid, params, |eps| recovery_state(c, eps))?;
    let limit = gamma_limit_constant_value(params.alpha, params.beta, params.lambda)?;
    ConvergenceStudy::from_values(eps_grid.to_vec(), values, limit)
}

/// Energies of the flat sequence `u_ε ≡ c`, referenced to `ā`.
pub fn run_flat_study(c: f64, params: &LambdaParams, eps_grid: &[f64]) -> Result<ConvergenceStudy> {
    let u = StepFunction::constant(c)?;
    let values = infinite_energy_on_grid(eps_grid, params, |_| Ok(u.clone()))?;
    ConvergenceStudy::from_values(eps_grid.to_vec(), values, params.mean())
}

/// Energies of the fixed step `u_s` along the grid.
pub fn run_step_study(s: f64, params: &LambdaParams, eps_grid: &[f64]) -> Result<ConvergenceStudy> {
    let limit = step_limit_value(s, params.alpha, params.beta, params.lambda)?;
    let u = StepFunction::unit_step(s)?;
    let values = infinite_energy_on_grid(eps_grid, params, |_| Ok(u.clone()))?;
    ConvergenceStudy::from_values(eps_grid.to_vec(), values, limit)
}

/// `∫_Ω χ(x) ψ₁(x) ψ₂(x/ε) dx`, exact for step functions.
pub fn two_scale_pairing(chi: &StepFunction, psi1: &StepFunction, psi2: &PeriodicStep, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(domain(format!("eps must be positive, found {eps}")));
    }
    if chi.values().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(domain("pairing needs a {0, 1}-valued function"));
    }
    let mut cuts: Vec<f64> = chi.breakpoints().iter().chain(psi1.breakpoints()).cloned().collect();
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let terms = cuts.windows(2).filter_map(|w| {
        let (x0, x1) = (w[0], w[1]);
        let mid = 0.5 * (x0 + x1);
        let weight = chi.eval(mid) * psi1.eval(mid);
        (weight != 0.0).then(|| weight * eps * psi2.integrate(x0 / eps, x1 / eps))
    });
    Ok(crate::numeric::compensated_sum(terms))
}

/// `(∫_Ω ψ₁) · ∫_Y φ ψ₂` for the indicator `φ` of `arcs`.
pub fn two_scale_limit(arcs: &[CellArc], psi1: &StepFunction, psi2: &PeriodicStep) -> f64 {
    let cell: f64 = arcs.iter().map(|a| psi2.integrate(a.start, a.end)).sum();
    crate::states::integrate(psi1) * cell
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleRow {
    pub eps: f64,
    pub pairing: f64,
    pub limit: f64,
    pub error: f64,
}

/// Pairings of the tiled indicator of `arcs` along `eps_grid`.
pub fn two_scale_table(
    arcs: &[CellArc],
    psi1: &StepFunction,
    psi2: &PeriodicStep,
    eps_grid: &[f64],
) -> Result<Vec<TwoScaleRow>> {
    check_eps_grid(eps_grid)?;
    let limit = two_scale_limit(arcs, psi1, psi2);
    eps_grid
        .par_iter()
        .map(|&eps| {
            let chi = oscillating_profile(0.0, arcs, eps, DEFAULT_MAX_PIECES)?;
            let pairing = two_scale_pairing(&chi, psi1, psi2, eps)?;
            Ok(TwoScaleRow {
                eps,
                pairing,
                limit,
                error: (pairing - limit).abs(),
            })
        })
        .collect()
}

fn check_open_unit(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(domain(format!("jump point must lie in (0, 1), found {s}")));
    }
    Ok(())
}

/// `ā (s² + (1 − s)²)`, the limit energy of the unit step at `s`.
pub fn step_limit_value(s: f64, alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    check_open_unit(s)?;
    let p = LambdaParams::new(alpha, beta, lambda)?;
    Ok(p.mean() * (s * s + (1.0 - s) * (1.0 - s)))
}

/// `(s² + (1 − s)²) / (2 s (1 − s))`.
pub fn jump_ratio(s: f64) -> f64 {
    (s * s + (1.0 - s) * (1.0 - s)) / (2.0 * s * (1.0 - s))
}

/// The value `g(1)` forced by a translation-invariant representation
/// `∫∫ g(u(x) − u(y))` matching both the constant and the step limits.
pub fn implied_g1(s: f64, alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    check_open_unit(s)?;
    LambdaParams::new(alpha, beta, lambda)?;
    let l2 = lambda * lambda;
    Ok(jump_ratio(s) * 0.5 * (l2 * alpha + (1.0 - l2) * beta))
}

/// [`implied_g1`] computed from the two limit values instead.
pub fn implied_g1_from_limits(s: f64, alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    check_open_unit(s)?;
    let p = LambdaParams::new(alpha, beta, lambda)?;
    let g0 = gamma_limit_constant_value(alpha, beta, lambda)?;
    Ok(jump_ratio(s) * (p.mean() - g0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Confirmed,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(flatten)]
    pub payload: CertificatePayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum CertificatePayload {
    GammaLimitConstant(GammaLimitPayload),
    StepLimit(StepLimitPayload),
    NonRepresentability(NonRepPayload),
    #[serde(rename = "fM_threshold")]
    FmThreshold(FmPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaLimitPayload {
    pub params: LambdaParams,
    pub c: f64,
    pub limit_value: f64,
    pub cell_minimum_at_half: f64,
    pub kernel_mean: f64,
    pub recovery: ConvergenceStudy,
    pub flat: ConvergenceStudy,
}

/// Reproduces the limit on the constant `c` with the recovery sequence and
/// contrasts it with the flat sequence.
pub fn gamma_limit_certificate(params: &LambdaParams, c: f64, eps_grid: &[f64], tol: f64) -> Result<Certificate> {
    check_tol(tol)?;
    let recovery = run_recovery_study(c, params, eps_grid)?;
    let flat = run_flat_study(c, params, eps_grid)?;
    let LambdaParams { alpha, beta, lambda } = *params;
    let verdict = if recovery.final_error <= tol && recovery.liminf_holds {
        Verdict::Confirmed
    } else {
        Verdict::Inconclusive
    };
    Ok(Certificate {
        verdict,
        tolerances: BTreeMap::from([("final_error".to_string(), tol), ("liminf_slack".to_string(), LIMINF_SLACK)]),
        payload: CertificatePayload::GammaLimitConstant(GammaLimitPayload {
            params: *params,
            c,
            limit_value: gamma_limit_constant_value(alpha, beta, lambda)?,
            cell_minimum_at_half: gamma_closed_form(alpha, beta, lambda, 0.5)?,
            kernel_mean: params.mean(),
            recovery,
            flat,
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLimitPayload {
    pub params: LambdaParams,
    pub s_grid: Vec<f64>,
    pub limit_values: Vec<f64>,
    pub studies: Vec<ConvergenceStudy>,
}

/// Reproduces `ā (s² + (1 − s)²)` for every `s` in `s_grid`.
pub fn step_limit_certificate(params: &LambdaParams, s_grid: &[f64], eps_grid: &[f64], tol: f64) -> Result<Certificate> {
    check_tol(tol)?;
    if s_grid.is_empty() {
        return Err(domain("s grid is empty"));
    }
    let studies = s_grid
        .iter()
        .map(|&s| run_step_study(s, params, eps_grid))
        .collect::<Result<Vec<_>>>()?;
    let verdict = if studies.iter().all(|st| st.final_error <= tol) {
        Verdict::Confirmed
    } else {
        Verdict::Inconclusive
    };
    Ok(Certificate {
        verdict,
        tolerances: BTreeMap::from([("final_error".to_string(), tol)]),
        payload: CertificatePayload::StepLimit(StepLimitPayload {
            params: *params,
            s_grid: s_grid.to_vec(),
            limit_values: studies.iter().map(|st| st.limit_ref).collect(),
            studies,
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonRepPayload {
    pub params: LambdaParams,
    pub s1: f64,
    pub s2: f64,
    pub g1_s1: f64,
    pub g1_s2: f64,
    pub difference: f64,
    /// The same difference as `(ā − γ(1/2)) (r(s1) − r(s2))`.
    pub difference_from_limits: f64,
    pub constant_study: ConvergenceStudy,
    pub step_studies: Vec<ConvergenceStudy>,
    pub constant_reproduced: bool,
    pub steps_reproduced: bool,
}

/// Tolerances of [`non_representability_certificate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonRepTolerances {
    /// Minimal `|g(1; s1) − g(1; s2)|` for a confirmation.
    pub difference: f64,
    /// Final error each constituent study must reach.
    pub study: f64,
}

impl Default for NonRepTolerances {
    fn default() -> Self {
        Self {
            difference: 1e-3,
            study: 1e-2,
        }
    }
}

/// Certifies that the limit has no representation `∫∫ g(u(x) − u(y))` by
/// exhibiting two jump points with different implied `g(1)`, after
/// reproducing both constituent limits at finite ε.
pub fn non_representability_certificate(
    params: &LambdaParams,
    s1: f64,
    s2: f64,
    tol: NonRepTolerances,
    eps_grid: &[f64],
) -> Result<Certificate> {
    check_tol(tol.difference)?;
    check_tol(tol.study)?;
    check_open_unit(s1)?;
    check_open_unit(s2)?;
    if (s1 - s2).abs() <= f64::EPSILON || (s1 + s2 - 1.0).abs() <= f64::EPSILON {
        return Err(Error::DegeneratePair { s1, s2 });
    }
    let LambdaParams { alpha, beta, lambda } = *params;
    let g1_s1 = implied_g1(s1, alpha, beta, lambda)?;
    let g1_s2 = implied_g1(s2, alpha, beta, lambda)?;
    let difference = (g1_s1 - g1_s2).abs();
    let gap = params.mean() - gamma_limit_constant_value(alpha, beta, lambda)?;
    let difference_from_limits = (gap * (jump_ratio(s1) - jump_ratio(s2))).abs();

    let constant_study = run_recovery_study(0.0, params, eps_grid)?;
    let step_studies = vec![run_step_study(s1, params, eps_grid)?, run_step_study(s2, params, eps_grid)?];
    let constant_reproduced = constant_study.final_error <= tol.study;
    let steps_reproduced = step_studies.iter().all(|s| s.final_error <= tol.study);

    let verdict = if !(constant_reproduced && steps_reproduced) {
        Verdict::Inconclusive
    } else if difference > tol.difference {
        Verdict::Confirmed
    } else {
        Verdict::Refuted
    };
    Ok(Certificate {
        verdict,
        tolerances: BTreeMap::from([
            ("difference".to_string(), tol.difference),
            ("study_final_error".to_string(), tol.study),
        ]),
        payload: CertificatePayload::NonRepresentability(NonRepPayload {
            params: *params,
            s1,
            s2,
            g1_s1,
            g1_s2,
            difference,
            difference_from_limits,
            constant_study,
            step_studies,
            constant_reproduced,
            steps_reproduced,
        }),
    })
}

/// A named competitor for the truncated-potential experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub name: String,
    pub profile: StepFunction,
}

/// Levels `{z, z + 1/2, z + 1}` on equal thirds.
pub fn deviation_thirds(z: f64) -> Result<Deviation> {
    Ok(Deviation {
        name: "three_level_thirds".into(),
        profile: StepFunction::from_pieces(&[(1.0 / 3.0, z), (1.0 / 3.0, z + 0.5), (1.0 / 3.0, z + 1.0)])?,
    })
}

/// Levels `{z, z + gap}` on equal halves.
pub fn deviation_two_level(z: f64, gap: f64) -> Result<Deviation> {
    Ok(Deviation {
        name: format!("two_level_gap_{gap}"),
        profile: StepFunction::jump(0.5, z, z + gap)?,
    })
}

/// The recovery state with the middle of each lower run raised by 2:
/// cell levels `z + 1, z, z + 2, z, z + 1` on
/// `[0, 1/4), [1/4, 3/8), [3/8, 5/8), [5/8, 3/4), [3/4, 1)`.
pub fn deviation_oscillating_lift(z: f64, eps: f64) -> Result<Deviation> {
    let cell = [(0.25, z + 1.0), (0.125, z), (0.25, z + 2.0), (0.125, z), (0.25, z + 1.0)];
    Ok(Deviation {
        name: "oscillating_lift".into(),
        profile: tile_cell_levels(&cell, eps)?,
    })
}

/// `(1/3, 1/2, 2)` family: equal thirds with gaps 1/2, halves with gap 1/2,
/// halves with gap 2.
pub fn default_deviations(z: f64) -> Result<Vec<Deviation>> {
    Ok(vec![deviation_thirds(z)?, deviation_two_level(z, 0.5)?, deviation_two_level(z, 2.0)?])
}

/// Tiles a cell profile given as `(length, value)` pieces summing to 1.
pub fn tile_cell_levels(cell: &[(f64, f64)], eps: f64) -> Result<StepFunction> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(domain(format!("eps must lie in (0, 1], found {eps}")));
    }
    let total: f64 = cell.iter().map(|p| p.0).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(domain(format!("cell pieces sum to {total}, not 1")));
    }
    let periods = (1.0 / eps).ceil() as usize;
    if periods.saturating_mul(cell.len()) > DEFAULT_MAX_PIECES {
        return Err(Error::Resource(format!("tiling needs {} pieces", periods * cell.len())));
    }
    let mut pieces = Vec::with_capacity(periods * cell.len());
    let mut x = 0.0;
    'outer: for j in 0..periods {
        let mut start = j as f64 * eps;
        for &(len, v) in cell {
            let end = (start + len * eps).min(1.0);
            if end > x {
                pieces.push((end - x, v));
                x = end;
            }
            if end >= 1.0 {
                break 'outer;
            }
            start += len * eps;
        }
    }
    let sum: f64 = pieces.iter().map(|p| p.0).sum();
    if let Some(last) = pieces.last_mut() {
        last.0 += 1.0 - sum;
    }
    Ok(StepFunction::from_pieces(&pieces)?.simplified())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmRow {
    pub m: f64,
    /// Energies of the deviations, in input order.
    pub energies: Vec<f64>,
    pub all_strictly_worse: bool,
    /// `max |F_M − F|` over the admissible reference states.
    pub admissible_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmPayload {
    pub params: LambdaParams,
    pub eps: f64,
    pub reference_energy: f64,
    pub deviation_names: Vec<String>,
    pub rows: Vec<FmRow>,
    /// Smallest tested `M` from which every deviation is strictly worse.
    pub threshold: Option<f64>,
}

/// Compares deviations under `f_M` with the admissible recovery state.
pub fn fm_threshold_experiment(
    params: &LambdaParams,
    eps: f64,
    m_grid: &[f64],
    deviations: &[Deviation],
    tol: f64,
) -> Result<Certificate> {
    check_tol(tol)?;
    if m_grid.is_empty() || deviations.is_empty() {
        return Err(domain("M grid and deviation family must be non-empty"));
    }
    let kernel = params.kernel()?;
    let reference = recovery_state(0.0, eps)?;
    let reference_energy = evaluate(&reference, Potential::InfiniteTripleWell, &kernel, eps)?
        .value
        .finite()
        .expect("recovery state is admissible");
    let admissible = [reference.clone(), StepFunction::unit_step(0.5)?, StepFunction::constant(0.0)?];
    let admissible_infinite = admissible
        .iter()
        .map(|u| Ok(evaluate(u, Potential::InfiniteTripleWell, &kernel, eps)?.value.finite().expect("admissible")))
        .collect::<Result<Vec<f64>>>()?;

    let margin = 1e-12 * reference_energy.abs().max(1.0);
    let rows = m_grid
        .par_iter()
        .map(|&m| {
            let p = Potential::finite(m)?;
            let energies = deviations
                .iter()
                .map(|d| Ok(evaluate(&d.profile, p, &kernel, eps)?.value.finite().expect("finite M")))
                .collect::<Result<Vec<f64>>>()?;
            let mut discrepancy: f64 = 0.0;
            for (u, inf) in admissible.iter().zip(&admissible_infinite) {
                let v = evaluate(u, p, &kernel, eps)?.value.finite().expect("finite M");
                discrepancy = discrepancy.max((v - inf).abs());
            }
            Ok(FmRow {
                m,
                all_strictly_worse: energies.iter().all(|&e| e > reference_energy + margin),
                energies,
                admissible_discrepancy: discrepancy,
            })
        })
        .collect::<Result<Vec<FmRow>>>()?;

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].m.total_cmp(&rows[b].m));
    let mut threshold = None;
    for &i in order.iter().rev() {
        if rows[i].all_strictly_worse {
            threshold = Some(rows[i].m);
        } else {
            break;
        }
    }
    let consistent = rows.iter().all(|r| r.admissible_discrepancy <= tol);
    let verdict = match (consistent, threshold) {
        (false, _) => Verdict::Refuted,
        (true, Some(_)) => Verdict::Confirmed,
        (true, None) => Verdict::Inconclusive,
    };
    Ok(Certificate {
        verdict,
        tolerances: BTreeMap::from([("admissible_agreement".to_string(), tol), ("strict_margin".to_string(), margin)]),
        payload: CertificatePayload::FmThreshold(FmPayload {
            params: *params,
            eps,
            reference_energy,
            deviation_names: deviations.iter().map(|d| d.name.clone()).collect(),
            rows,
            threshold,
        }),
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(domain(format!("tolerance must be positive, found {tol}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> LambdaParams {
        LambdaParams::new(1.0, 2.0, 0.5).unwrap()
    }

    fn grid(ms: &[usize]) -> Vec<f64> {
        ms.iter().map(|&m| 1.0 / m as f64).collect()
    }

    #[test]
    fn constant_limit_examples() {
        assert!((gamma_limit_constant_value(1.0, 2.0, 0.5).unwrap() - 0.625).abs() < 1e-15);
        assert!((gamma_limit_constant_value(1.0, 2.0, 1.0 - 1e-9).unwrap() - 0.5).abs() < 1e-8);
        assert!((gamma_limit_constant_value(1.0, 2.0, 1e-9).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn homogenized_examples() {
        let p = base();
        for c in [-3.0, 0.0, 0.4, 17.0] {
            let v = homogenized_f(&StepFunction::constant(c).unwrap(), &p).unwrap();
            assert!((v.finite().unwrap() - 0.625).abs() < 1e-14);
        }
        let wide = StepFunction::jump(0.5, 0.0, 1.5).unwrap();
        assert_eq!(homogenized_f(&wide, &p).unwrap(), ExtReal::PosInfinity);
        let us = StepFunction::unit_step(0.5).unwrap();
        assert!((homogenized_f(&us, &p).unwrap().finite().unwrap() - 0.625).abs() < 1e-14);
        let quarter = StepFunction::unit_step(0.25).unwrap();
        let expected = gamma_closed_form(1.0, 2.0, 0.5, 0.25).unwrap();
        assert!((homogenized_f(&quarter, &p).unwrap().finite().unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn recovery_study_converges() {
        let s = run_recovery_study(0.0, &base(), &grid(&[8, 16, 32, 64, 128, 256])).unwrap();
        assert!(s.final_error <= 1e-2);
        assert!(s.liminf_holds);
        assert!(s.envelope_holds);
        let flat = run_flat_study(0.0, &base(), &grid(&[8, 16, 32])).unwrap();
        assert!(flat.values.iter().all(|v| (v - 1.5).abs() < 1e-10));
    }

    #[test]
    fn recovery_study_constant_kernel() {
        let p = LambdaParams::new(1.0, 1.0, 0.5).unwrap();
        let s = run_recovery_study(0.3, &p, &grid(&[3, 8, 21, 64])).unwrap();
        assert!(s.values.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(s.fitted_rate.is_none());
    }

    #[test]
    fn non_integer_periods_are_flagged() {
        let s = run_recovery_study(0.0, &base(), &[0.3, 0.11]).unwrap();
        assert_eq!(s.notes.iter().filter(|n| n.contains("not an integer")).count(), 2);
    }

    #[test]
    fn study_grid_validation() {
        assert!(run_flat_study(0.0, &base(), &[]).is_err());
        assert!(run_flat_study(0.0, &base(), &[0.1, 0.2]).is_err());
        assert!(run_flat_study(0.0, &base(), &[1.5]).is_err());
    }

    #[test]
    fn two_scale_examples() {
        let arcs = optimal_profile(0.5, Orientation::LowCostAtZero).unwrap();
        let one = StepFunction::constant(1.0).unwrap();
        let unit = PeriodicStep::constant(1.0).unwrap();
        let kernel = make_lambda_kernel(1.0, 2.0, 0.5).unwrap();
        for m in [1usize, 4, 9, 64] {
            let eps = 1.0 / m as f64;
            let chi = oscillating_profile(0.0, &arcs, eps, DEFAULT_MAX_PIECES).unwrap();
            assert!((two_scale_pairing(&chi, &one, &unit, eps).unwrap() - 0.5).abs() < 1e-13);
            let v = two_scale_pairing(&chi, &one, kernel.step(), eps).unwrap();
            assert!((v - 0.5).abs() < 1e-13, "m = {m}: {v}");
        }
        let zero = StepFunction::constant(0.0).unwrap();
        assert_eq!(two_scale_pairing(&zero, &one, kernel.step(), 0.1).unwrap(), 0.0);
        assert!(two_scale_pairing(&StepFunction::constant(0.5).unwrap(), &one, &unit, 0.1).is_err());
    }

    #[test]
    fn two_scale_converges_for_non_constant_weights() {
        let arcs = optimal_profile(0.3, Orientation::LowCostAtHalf).unwrap();
        let psi1 = StepFunction::new(vec![0.0, 0.37], vec![2.0, -1.0]).unwrap();
        let psi2 = PeriodicStep::new(vec![0.0, 0.45], vec![1.0, 3.0]).unwrap();
        let rows = two_scale_table(&arcs, &psi1, &psi2, &grid(&[7, 30, 300, 3000])).unwrap();
        assert!(rows.last().unwrap().error < 5e-3);
        for r in &rows {
            assert!(r.error <= 4.0 * r.eps, "eps {}: {}", r.eps, r.error);
        }
    }

    #[test]
    fn step_limit_examples() {
        assert!((step_limit_value(0.5, 1.0, 2.0, 0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!((step_limit_value(0.25, 1.0, 2.0, 0.5).unwrap() - 0.9375).abs() < 1e-15);
        assert!((step_limit_value(1e-9, 1.0, 2.0, 0.5).unwrap() - 1.5).abs() < 1e-8);
        assert!(step_limit_value(0.0, 1.0, 2.0, 0.5).is_err());
        assert!(step_limit_value(1.0, 1.0, 2.0, 0.5).is_err());
        let st = run_step_study(0.25, &base(), &grid(&[8, 64, 256])).unwrap();
        assert!(st.final_error <= 1e-2);
    }

    #[test]
    fn implied_g1_examples() {
        assert!((implied_g1(0.5, 1.0, 2.0, 0.5).unwrap() - 0.875).abs() < 1e-15);
        assert!((implied_g1(0.25, 1.0, 2.0, 0.5).unwrap() - 0.875 * 5.0 / 3.0).abs() < 1e-14);
        assert!(implied_g1(0.0, 1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn certificate_examples() {
        let tol = NonRepTolerances::default();
        let eps = grid(&[8, 32, 128, 256]);
        let c = non_representability_certificate(&base(), 0.5, 0.25, tol, &eps).unwrap();
        assert_eq!(c.verdict, Verdict::Confirmed);
        let CertificatePayload::NonRepresentability(p) = &c.payload else { panic!() };
        assert!((p.difference - 0.875 * 2.0 / 3.0).abs() < 1e-12);
        assert!((p.difference - p.difference_from_limits).abs() < 1e-12);

        let flat = LambdaParams::new(1.5, 1.5, 0.3).unwrap();
        let c = non_representability_certificate(&flat, 0.5, 0.25, tol, &eps).unwrap();
        assert_eq!(c.verdict, Verdict::Confirmed);

        assert!(matches!(
            non_representability_certificate(&base(), 0.3, 0.7, tol, &eps),
            Err(Error::DegeneratePair { .. })
        ));
        assert!(matches!(
            non_representability_certificate(&base(), 0.3, 0.3, tol, &eps),
            Err(Error::DegeneratePair { .. })
        ));
    }

    #[test]
    fn certificate_is_inconclusive_on_coarse_grids() {
        let c = non_representability_certificate(&base(), 0.5, 0.25, NonRepTolerances::default(), &[1.0 / 3.0]).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn certificate_serializes_kind_and_payload() {
        let c = step_limit_certificate(&base(), &[0.5], &grid(&[4, 8]), 0.1).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["kind"], "step_limit");
        assert!(v["payload"]["studies"].is_array());
        let back: Certificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn truncated_threshold_with_default_family() {
        let devs = default_deviations(-0.5).unwrap();
        let c = fm_threshold_experiment(&base(), 1.0 / 32.0, &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0], &devs, 1e-12).unwrap();
        assert_eq!(c.verdict, Verdict::Confirmed);
        let CertificatePayload::FmThreshold(p) = &c.payload else { panic!() };
        assert!(p.rows.iter().all(|r| r.admissible_discrepancy <= 1e-12));
        assert_eq!(p.threshold, Some(1.0));
    }

    #[test]
    fn oscillating_lift_ties_at_unit_truncation() {
        let eps = 1.0 / 32.0;
        let dev = deviation_oscillating_lift(-0.5, eps).unwrap();
        let c = fm_threshold_experiment(&base(), eps, &[1.0, 2.0, 4.0], &[dev], 1e-12).unwrap();
        let CertificatePayload::FmThreshold(p) = &c.payload else { panic!() };
        assert!(!p.rows[0].all_strictly_worse);
        assert!((p.rows[0].energies[0] - p.reference_energy).abs() < 1e-12);
        assert_eq!(p.threshold, Some(2.0));
    }

    #[test]
    fn inconclusive_without_threshold() {
        let eps = 1.0 / 16.0;
        let dev = deviation_oscillating_lift(0.0, eps).unwrap();
        let c = fm_threshold_experiment(&base(), eps, &[0.5, 1.0], &[dev], 1e-12).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn tiling_lengths() {
        let u = tile_cell_levels(&[(0.5, 0.0), (0.5, 1.0)], 0.3).unwrap();
        assert_eq!(u.breakpoints().len(), 7);
        assert!(tile_cell_levels(&[(0.5, 0.0)], 0.3).is_err());
    }

    proptest! {
        #[test]
        fn limit_identities(alpha in 0.1f64..5.0, beta in 0.1f64..5.0, lambda in 0.01f64..0.99) {
            let a = gamma_limit_constant_value(alpha, beta, lambda).unwrap();
            let b = gamma_closed_form(alpha, beta, lambda, 0.5).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * alpha.max(beta));
        }

        #[test]
        fn g1_identities(alpha in 0.1f64..5.0, beta in 0.1f64..5.0, lambda in 0.01f64..0.99, s in 0.01f64..0.99, s2 in 0.01f64..0.99) {
            let g = implied_g1(s, alpha, beta, lambda).unwrap();
            let h = implied_g1_from_limits(s, alpha, beta, lambda).unwrap();
            prop_assert!((g - h).abs() <= 1e-12 * g.abs().max(1.0));
            let mirrored = implied_g1(1.0 - s, alpha, beta, lambda).unwrap();
            prop_assert!((g - mirrored).abs() <= 1e-12 * g.abs().max(1.0));
            let half = implied_g1(0.5, alpha, beta, lambda).unwrap();
            prop_assert!(g >= half - 1e-12);
            let d = g - implied_g1(s2, alpha, beta, lambda).unwrap();
            let gap = LambdaParams::new(alpha, beta, lambda).unwrap().mean() - gamma_limit_constant_value(alpha, beta, lambda).unwrap();
            prop_assert!((d - gap * (jump_ratio(s) - jump_ratio(s2))).abs() <= 1e-10 * g.abs().max(1.0));
        }

        #[test]
        fn g1_decreasing_on_left_half(s in 0.01f64..0.49, ds in 0.001f64..0.01) {
            let a = implied_g1(s, 1.0, 2.0, 0.5).unwrap();
            let b = implied_g1((s + ds).min(0.5), 1.0, 2.0, 0.5).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn step_limit_below_mean(s in 1e-6f64..(1.0 - 1e-6)) {
            prop_assert!(step_limit_value(s, 1.0, 2.0, 0.5).unwrap() < 1.5);
        }

        #[test]
        fn homogenized_translation_invariant(c in -50.0f64..50.0, alpha in 0.1f64..5.0, beta in 0.1f64..5.0, lambda in 0.01f64..0.99) {
            let p = LambdaParams::new(alpha, beta, lambda).unwrap();
            let a = homogenized_f(&StepFunction::constant(c).unwrap(), &p).unwrap().finite().unwrap();
            let b = homogenized_f(&StepFunction::constant(0.0).unwrap(), &p).unwrap().finite().unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * alpha.max(beta));
        }
    }
}
