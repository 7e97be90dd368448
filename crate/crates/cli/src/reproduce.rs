//! The acceptance checks behind `reproduce-all`.
//!
//! Each check returns a [`CriterionOutcome`] whose JSON form depends only on
//! the inputs, never on timing or thread count.

use anyhow::Result;
use homog_core::cell::{
    build_cell_matrix, gamma_closed_form, is_rotation_of, optimal_profile, solve_brute_force, solve_closed_form,
    BruteForceMode, CellProfile, Orientation,
};
use homog_core::energy::{evaluate, evaluate_quadrature};
use homog_core::gammalab::{
    default_deviations, fm_threshold_experiment, gamma_limit_constant_value, non_representability_certificate,
    run_flat_study, run_recovery_study, run_step_study, CertificatePayload, LambdaParams, NonRepTolerances, Verdict,
};
use homog_core::kernel::{make_lambda_kernel, PeriodicStepKernel};
use homog_core::states::{Potential, StepFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub const CLOSED_FORM_TOL: f64 = 1e-12;
pub const REARRANGEMENT_TOL: f64 = 1e-12;
pub const HALVING_RANGE: (f64, f64) = (1.7, 2.3);
pub const LIMIT_TOL: f64 = 1e-2;
pub const FLAT_TOL: f64 = 1e-10;
pub const CONSTANT_KERNEL_TOL: f64 = 1e-9;
pub const QUADRATURE_N: usize = 4096;
pub const G1_DIFFERENCE_TOL: f64 = 1e-3;
pub const ADMISSIBLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub details: Value,
}

fn base() -> LambdaParams {
    LambdaParams::new(1.0, 2.0, 0.5).expect("valid parameters")
}

fn recip_grid(ms: &[usize]) -> Vec<f64> {
    ms.iter().map(|&m| 1.0 / m as f64).collect()
}

pub const LIMIT_GRID: [usize; 6] = [8, 16, 32, 64, 128, 256];

/// Closed form at the centre, branch continuity and symmetry.
pub fn criterion_1() -> Result<CriterionOutcome> {
    let (a, b, l) = (1.0, 2.0, 0.5);
    let at_half = gamma_closed_form(a, b, l, 0.5)?;
    let limit = gamma_limit_constant_value(a, b, l)?;
    let mean = l * a + (1.0 - l) * b;
    let mut continuity: f64 = 0.0;
    for t in [0.5 * l, 1.0 - 0.5 * l] {
        // the public function takes the outer branch at both branch points
        let middle = 2.0 * b * (t * t - t) - 0.5 * (a - b) * l * l + mean;
        continuity = continuity.max((gamma_closed_form(a, b, l, t)? - middle).abs());
    }
    let mut symmetry: f64 = 0.0;
    for i in 0..=1000 {
        let t = i as f64 / 1000.0;
        symmetry = symmetry.max((gamma_closed_form(a, b, l, t)? - gamma_closed_form(a, b, l, 1.0 - t)?).abs());
    }
    let centre_error = (at_half - 0.625).abs().max((limit - 0.625).abs()).max((at_half - limit).abs());
    let passed = centre_error <= CLOSED_FORM_TOL && continuity <= CLOSED_FORM_TOL && symmetry <= CLOSED_FORM_TOL;
    Ok(CriterionOutcome {
        id: 1,
        name: "closed-form consistency",
        passed,
        summary: format!(
            "gamma(1/2) = {at_half}, constant limit = {limit}, continuity gap {continuity:e}, symmetry gap {symmetry:e}"
        ),
        details: json!({
            "gamma_half": at_half,
            "constant_limit": limit,
            "branch_continuity_gap": continuity,
            "symmetry_gap": symmetry,
            "tolerance": CLOSED_FORM_TOL,
        }),
    })
}

/// Exhaustive subsets against cyclic arcs on a 16-cell grid.
pub fn criterion_2() -> Result<CriterionOutcome> {
    let n = 16;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (alpha, beta) in [(1.0, 2.0), (2.0, 1.0)] {
        for lambda in [0.25, 0.5] {
            let k = build_cell_matrix(&make_lambda_kernel(alpha, beta, lambda)?, n)?;
            for ones in [2usize, 4, 6, 8] {
                let t = ones as f64 / n as f64;
                let all = solve_brute_force(&k, ones, BruteForceMode::AllSubsets)?;
                let arcs = solve_brute_force(&k, ones, BruteForceMode::ArcsOnly)?;
                let orientation = if alpha < beta {
                    Orientation::LowCostAtZero
                } else {
                    Orientation::LowCostAtHalf
                };
                let expected = CellProfile::from_arcs(&optimal_profile(t, orientation)?, n)?.support_indices();
                let minimizer = all.profile.support_indices();
                let equal = (all.energy - arcs.energy).abs() <= REARRANGEMENT_TOL;
                let rotation = is_rotation_of(&minimizer, &expected, n);
                let (sa, sb, sl) = if alpha > beta { (beta, alpha, 1.0 - lambda) } else { (alpha, beta, lambda) };
                let predicted = gamma_closed_form(sa, sb, sl, t)?;
                if !(equal && rotation) {
                    failures.push(format!("(a={alpha}, b={beta}, lambda={lambda}, k={ones})"));
                }
                rows.push(json!({
                    "alpha": alpha, "beta": beta, "lambda": lambda, "k": ones,
                    "all_subsets_energy": all.energy,
                    "arcs_only_energy": arcs.energy,
                    "all_subsets_minimizer": minimizer,
                    "expected_arc": expected,
                    "energies_equal": equal,
                    "minimizer_is_rotation": rotation,
                    "predicted_closed_form": predicted,
                }));
            }
        }
    }
    let passed = failures.is_empty();
    let summary = if passed {
        "all 16 cases: subsets and arcs agree, minimizers are rotations of the predicted arcs".to_string()
    } else {
        format!("{} of 16 cases fail: {}", failures.len(), failures.join(", "))
    };
    Ok(CriterionOutcome {
        id: 2,
        name: "discrete rearrangement oracle",
        passed,
        summary,
        details: json!({ "n": n, "cases": rows, "tolerance": REARRANGEMENT_TOL }),
    })
}

/// Error of the discretized half-mass arc under grid doubling.
pub fn criterion_3() -> Result<CriterionOutcome> {
    let kernel = make_lambda_kernel(1.0, 2.0, 0.5)?;
    let ns = [64usize, 128, 256, 512];
    let mut errors = Vec::new();
    for &n in &ns {
        let k = build_cell_matrix(&kernel, n)?;
        let r = solve_closed_form(&k, 0.5, Orientation::LowCostAtZero)?;
        errors.push((r.energy - 0.625).abs());
    }
    let ratios: Vec<Option<f64>> = errors
        .windows(2)
        .map(|w| (w[1] > 0.0).then(|| w[0] / w[1]))
        .collect();
    let passed = ratios
        .iter()
        .all(|r| r.is_some_and(|r| (HALVING_RANGE.0..=HALVING_RANGE.1).contains(&r)));
    let summary = format!(
        "errors {:?}, halving factors {:?} (required in [{}, {}])",
        errors, ratios, HALVING_RANGE.0, HALVING_RANGE.1
    );
    Ok(CriterionOutcome {
        id: 3,
        name: "discrete-to-continuum rate",
        passed,
        summary,
        details: json!({ "n": ns, "errors": errors, "ratios": ratios, "range": [HALVING_RANGE.0, HALVING_RANGE.1] }),
    })
}

/// Recovery sequence against the flat sequence for a constant target.
pub fn criterion_4() -> Result<CriterionOutcome> {
    let grid = recip_grid(&LIMIT_GRID);
    let recovery = run_recovery_study(0.0, &base(), &grid)?;
    let flat = run_flat_study(0.0, &base(), &grid)?;
    let flat_gap = flat.values.iter().map(|v| (v - 1.5).abs()).fold(0.0, f64::max);
    let passed = recovery.final_error <= LIMIT_TOL && flat_gap <= FLAT_TOL;
    Ok(CriterionOutcome {
        id: 4,
        name: "limit on constants",
        passed,
        summary: format!(
            "recovery final error {:e} at eps = 1/256, flat sequence max |F - 1.5| = {flat_gap:e}",
            recovery.final_error
        ),
        details: json!({ "recovery": recovery, "flat": flat, "limit_tol": LIMIT_TOL, "flat_tol": FLAT_TOL }),
    })
}

#[derive(Debug, Clone, Serialize)]
struct QuadratureCase {
    index: usize,
    kernel: PeriodicStepKernel,
    state: StepFunction,
    potential: Potential,
    eps: f64,
    exact: f64,
    quadrature: f64,
    bound: f64,
    constant_kernel: bool,
    ok: bool,
}

fn random_cuts(rng: &mut ChaCha8Rng, count: usize, min_gap: f64) -> Vec<f64> {
    loop {
        let mut cuts: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..1.0)).collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        let ok = cuts.windows(2).all(|w| w[1] - w[0] >= min_gap) && 1.0 - cuts[cuts.len() - 1] >= min_gap;
        if ok {
            return cuts;
        }
    }
}

/// Exact evaluation against midpoint quadrature on random instances.
pub fn criterion_5(seed: u64, instances: usize) -> Result<CriterionOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(instances);
    for index in 0..instances {
        let constant_kernel = index % 5 == 0;
        let kernel = if constant_kernel {
            PeriodicStepKernel::constant(rng.random_range(0.5..3.0))?
        } else {
            let segments = rng.random_range(2..=4);
            let bps = random_cuts(&mut rng, segments - 1, 0.02);
            let values = (0..segments).map(|_| rng.random_range(0.5..3.0)).collect();
            PeriodicStepKernel::new(bps, values)?
        };
        let pieces = rng.random_range(1..=6);
        let bps = random_cuts(&mut rng, pieces - 1, 0.01);
        let z = rng.random_range(-1.0..1.0);
        let (potential, values): (Potential, Vec<f64>) = if index % 2 == 0 {
            let vals = (0..pieces).map(|_| z + if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
            (Potential::InfiniteTripleWell, vals)
        } else {
            let levels = [0.0, 0.5, 1.0, 2.0, -1.0];
            let vals = (0..pieces).map(|_| z + levels[rng.random_range(0..levels.len())]).collect();
            (Potential::finite(rng.random_range(0.5..10.0))?, vals)
        };
        let state = StepFunction::new(bps, values)?;
        let eps = if index % 3 == 0 {
            rng.random_range(1.0 / 64.0..1.0)
        } else {
            1.0 / rng.random_range(1..=64) as f64
        };
        let exact = evaluate(&state, potential, &kernel, eps)?;
        let quad = evaluate_quadrature(&state, potential, &kernel, eps, QUADRATURE_N)?;
        let (e, q) = (exact.value.finite().unwrap_or(f64::NAN), quad.value.finite().unwrap_or(f64::NAN));
        let diff = (e - q).abs();
        let ok = diff <= quad.bound && (!constant_kernel || diff <= CONSTANT_KERNEL_TOL);
        cases.push(QuadratureCase {
            index,
            kernel,
            state,
            potential,
            eps,
            exact: e,
            quadrature: q,
            bound: quad.bound,
            constant_kernel,
            ok,
        });
    }
    let failed: Vec<usize> = cases.iter().filter(|c| !c.ok).map(|c| c.index).collect();
    let worst_ratio = cases
        .iter()
        .filter(|c| c.bound > 0.0)
        .map(|c| (c.exact - c.quadrature).abs() / c.bound)
        .fold(0.0, f64::max);
    Ok(CriterionOutcome {
        id: 5,
        name: "exact vs quadrature",
        passed: failed.is_empty() && cases.len() == instances,
        summary: format!(
            "{} of {instances} instances within bound (worst |diff|/bound = {worst_ratio:.3}); failures {failed:?}",
            instances - failed.len()
        ),
        details: json!({ "seed": seed, "n": QUADRATURE_N, "cases": cases }),
    })
}

/// Fixed steps along whole-period grids.
pub fn criterion_6() -> Result<CriterionOutcome> {
    let grid = recip_grid(&LIMIT_GRID);
    let studies = [0.25, 0.5]
        .iter()
        .map(|&s| run_step_study(s, &base(), &grid))
        .collect::<homog_core::Result<Vec<_>>>()?;
    let expected = [0.9375, 0.75];
    let limits_ok = studies.iter().zip(expected).all(|(s, e)| (s.limit_ref - e).abs() <= 1e-15);
    let passed = limits_ok && studies.iter().all(|s| s.final_error <= LIMIT_TOL);
    Ok(CriterionOutcome {
        id: 6,
        name: "step-target limit",
        passed,
        summary: format!(
            "s = 0.25: final error {:e} (limit {}); s = 0.5: final error {:e} (limit {})",
            studies[0].final_error, studies[0].limit_ref, studies[1].final_error, studies[1].limit_ref
        ),
        details: json!({ "s": [0.25, 0.5], "studies": studies, "tolerance": LIMIT_TOL }),
    })
}

/// The non-representability certificate at `s = 1/2, 1/4`.
pub fn criterion_7() -> Result<CriterionOutcome> {
    let tol = NonRepTolerances {
        difference: G1_DIFFERENCE_TOL,
        study: LIMIT_TOL,
    };
    let cert = non_representability_certificate(&base(), 0.5, 0.25, tol, &recip_grid(&LIMIT_GRID))?;
    let CertificatePayload::NonRepresentability(p) = &cert.payload else {
        anyhow::bail!("unexpected certificate kind");
    };
    let values_ok = (p.g1_s1 - 0.875).abs() <= 1e-12
        && (p.g1_s2 - 0.875 * 5.0 / 3.0).abs() <= 1e-12
        && (p.difference - p.difference_from_limits).abs() <= 1e-12;
    let passed = cert.verdict == Verdict::Confirmed && values_ok && p.constant_reproduced && p.steps_reproduced;
    Ok(CriterionOutcome {
        id: 7,
        name: "non-representability certificate",
        passed,
        summary: format!(
            "g(1) = {} at s = 1/2 and {} at s = 1/4, difference {} > {G1_DIFFERENCE_TOL:e}, verdict {:?}",
            p.g1_s1, p.g1_s2, p.difference, cert.verdict
        ),
        details: serde_json::to_value(&cert)?,
    })
}

/// Truncated potential with the default deviation family at `ε = 1/32`.
pub fn criterion_8() -> Result<CriterionOutcome> {
    let eps = 1.0 / 32.0;
    let devs = default_deviations(-0.5)?;
    let cert = fm_threshold_experiment(&base(), eps, &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0], &devs, ADMISSIBLE_TOL)?;
    let CertificatePayload::FmThreshold(p) = &cert.payload else {
        anyhow::bail!("unexpected certificate kind");
    };
    let discrepancy = p.rows.iter().map(|r| r.admissible_discrepancy).fold(0.0, f64::max);
    let passed = cert.verdict == Verdict::Confirmed && discrepancy <= ADMISSIBLE_TOL;
    Ok(CriterionOutcome {
        id: 8,
        name: "truncated potential threshold",
        passed,
        summary: format!(
            "threshold M = {:?}, admissible discrepancy {discrepancy:e}, verdict {:?}",
            p.threshold, cert.verdict
        ),
        details: serde_json::to_value(&cert)?,
    })
}

/// Runs criteria 1 to 8 in order.
pub fn run_all(seed: u64, instances: usize) -> Result<Vec<CriterionOutcome>> {
    Ok(vec![
        criterion_1()?,
        criterion_2()?,
        criterion_3()?,
        criterion_4()?,
        criterion_5(seed, instances)?,
        criterion_6()?,
        criterion_7()?,
        criterion_8()?,
    ])
}
