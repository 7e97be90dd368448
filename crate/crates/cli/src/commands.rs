//! One function per subcommand. Each writes its JSON (and CSV where
//! defined) into the output directory and returns a summary and exit code.

use std::fs;

use anyhow::{Context, Result};
use homog_core::cell::{
    build_cell_matrix, gamma_closed_form, is_cyclic_arc, optimal_profile, solve_brute_force, solve_closed_form,
    solve_relaxed, BruteForceMode, RelaxedOptions,
};
use homog_core::energy::{evaluate, evaluate_quadrature};
use homog_core::gammalab::{
    default_deviations, deviation_oscillating_lift, deviation_thirds, deviation_two_level, fm_threshold_experiment,
    gamma_limit_certificate, homogenized_f, non_representability_certificate, two_scale_table, Certificate,
    CertificatePayload, Deviation, NonRepTolerances, Verdict,
};
use homog_core::kernel::PeriodicStep;
use homog_core::states::StepFunction;
use serde_json::json;

use crate::config::{ConfigError, RunConfig, SolveMethod, DEVIATION_NAMES};
use crate::output::{csv_float, render_json, Csv, Outputs};
use crate::reproduce;

/// What a finished subcommand reports back to the dispatcher.
pub struct Finished {
    pub summary: String,
    pub exit_code: i32,
}

impl Finished {
    fn ok(summary: String) -> Self {
        Self { summary, exit_code: 0 }
    }
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Confirmed => 0,
        Verdict::Refuted => 2,
        Verdict::Inconclusive => 3,
    }
}

fn write_json<T: serde::Serialize>(out: &Outputs, cfg: &RunConfig, command: &str, value: &T) -> Result<()> {
    out.write(&format!("{command}.json"), &render_json(command, cfg, value)?)?;
    Ok(())
}

pub fn energy(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    let path = cfg
        .state
        .as_ref()
        .ok_or_else(|| ConfigError::new("state", "energy needs a step function JSON file (--state)"))?;
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new("state", format!("cannot read {}: {e}", path.display())))?;
    let u: StepFunction =
        serde_json::from_str(&text).map_err(|e| ConfigError::new("state", format!("{}: {e}", path.display())))?;
    let kernel = match &cfg.kernel {
        Some(k) => k.clone(),
        None => cfg.params()?.kernel()?,
    };
    let exact = evaluate(&u, cfg.potential, &kernel, cfg.eps)?;
    let quadrature = cfg
        .quadrature_n
        .map(|n| evaluate_quadrature(&u, cfg.potential, &kernel, cfg.eps, n))
        .transpose()?;
    let candidate = if cfg.kernel.is_none() {
        Some(homogenized_f(&u, &cfg.params()?)?)
    } else {
        None
    };
    write_json(
        out,
        cfg,
        "energy",
        &json!({ "exact": exact, "quadrature": quadrature, "candidate_functional": candidate }),
    )?;
    let mut summary = format!("F_eps(u) = {} at eps = {}", exact.value, cfg.eps);
    if let Some(q) = quadrature {
        summary.push_str(&format!("; quadrature {} (bound {:e})", q.value, q.bound));
    }
    Ok(Finished::ok(summary))
}

pub fn gamma_table(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    let p = cfg.params()?;
    if cfg.t_steps < 2 {
        return Err(ConfigError::new("t_steps", "needs at least 2 points").into());
    }
    let mut csv = Csv::new(&["t", "gamma"]);
    let mut rows = Vec::with_capacity(cfg.t_steps);
    for i in 0..cfg.t_steps {
        let t = i as f64 / (cfg.t_steps - 1) as f64;
        let g = gamma_closed_form(p.alpha, p.beta, p.lambda, t)?;
        csv.row(&[csv_float(t), csv_float(g)]);
        rows.push(json!({ "t": t, "gamma": g }));
    }
    out.write("gamma-table.csv", &csv.render())?;
    write_json(out, cfg, "gamma-table", &rows)?;
    let g = |t| gamma_closed_form(p.alpha, p.beta, p.lambda, t);
    Ok(Finished::ok(format!(
        "gamma(0) = {}, gamma(1/2) = {}, gamma(1) = {} over {} points",
        g(0.0)?,
        g(0.5)?,
        g(1.0)?,
        cfg.t_steps
    )))
}

pub fn cell_solve(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    let p = cfg.params()?;
    let k = build_cell_matrix(&p.kernel()?, cfg.n)?;
    let result = match cfg.method {
        SolveMethod::ClosedForm => solve_closed_form(&k, cfg.t, cfg.orientation)?,
        SolveMethod::ProjectedGradient => solve_relaxed(
            &k,
            cfg.t,
            &RelaxedOptions {
                step: None,
                max_iter: cfg.max_iter,
                tol: cfg.solver_tol,
                seed: cfg.seed,
            },
        )?,
        SolveMethod::BruteForce => {
            let ones = (cfg.t * cfg.n as f64).round() as usize;
            if (ones as f64 - cfg.t * cfg.n as f64).abs() > 1e-9 {
                return Err(ConfigError::new("t", "brute force needs t * n to be an integer").into());
            }
            solve_brute_force(&k, ones, cfg.brute_mode)?
        }
    };
    let reference = gamma_closed_form(p.alpha, p.beta, p.lambda, cfg.t)?;
    write_json(out, cfg, "cell-solve", &json!({ "result": result, "gamma_closed_form": reference }))?;
    Ok(Finished::ok(format!(
        "{:?} on n = {}: energy {} (closed form {reference}), {} iterations, converged {}",
        result.method, cfg.n, result.energy, result.iterations, result.converged
    )))
}

pub fn cell_verify(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    let p = cfg.params()?;
    let n = cfg.brute_n;
    let k = build_cell_matrix(&p.kernel()?, n)?;
    let mut csv = Csv::new(&["k", "t", "all_subsets", "arcs_only", "closed_form", "minimizer_is_arc"]);
    let mut rows = Vec::new();
    let mut agree = true;
    for ones in 0..=n {
        let t = ones as f64 / n as f64;
        let all = solve_brute_force(&k, ones, BruteForceMode::AllSubsets)?;
        let arcs = solve_brute_force(&k, ones, BruteForceMode::ArcsOnly)?;
        let cf = gamma_closed_form(p.alpha, p.beta, p.lambda, t)?;
        let is_arc = is_cyclic_arc(&all.profile.support_indices(), n);
        let equal = (all.energy - arcs.energy).abs() <= reproduce::REARRANGEMENT_TOL;
        agree &= equal && is_arc;
        csv.row(&[
            ones.to_string(),
            csv_float(t),
            csv_float(all.energy),
            csv_float(arcs.energy),
            csv_float(cf),
            is_arc.to_string(),
        ]);
        rows.push(json!({
            "k": ones, "t": t,
            "all_subsets": all.energy, "arcs_only": arcs.energy, "closed_form": cf,
            "minimizer": all.profile.support_indices(), "minimizer_is_arc": is_arc, "energies_equal": equal,
        }));
    }
    out.write("cell-verify.csv", &csv.render())?;
    write_json(out, cfg, "cell-verify", &json!({ "n": n, "arcs_optimal": agree, "rows": rows }))?;
    Ok(Finished {
        summary: format!(
            "n = {n}: exhaustive search {} the arc minimizers for every k",
            if agree { "agrees with" } else { "does NOT agree with" }
        ),
        exit_code: if agree { 0 } else { 2 },
    })
}

fn certificate_summary(cert: &Certificate) -> String {
    let detail = match &cert.payload {
        CertificatePayload::GammaLimitConstant(p) => format!(
            "recovery final error {:e} against limit {}; flat sequence at {}",
            p.recovery.final_error,
            p.limit_value,
            p.flat.values.last().copied().unwrap_or(f64::NAN)
        ),
        CertificatePayload::StepLimit(p) => format!("{} step studies", p.studies.len()),
        CertificatePayload::NonRepresentability(p) => format!(
            "implied g(1) = {} at s = {} and {} at s = {}, difference {}",
            p.g1_s1, p.s1, p.g1_s2, p.s2, p.difference
        ),
        CertificatePayload::FmThreshold(p) => format!("threshold M = {:?}", p.threshold),
    };
    format!("verdict {:?}: {detail}", cert.verdict)
}

pub fn gamma_limit(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    cfg.require_eps_grid()?;
    let cert = gamma_limit_certificate(&cfg.params()?, 0.0, &cfg.eps_grid, cfg.tolerances.study)?;
    let CertificatePayload::GammaLimitConstant(p) = &cert.payload else {
        unreachable!()
    };
    let mut csv = Csv::new(&["eps", "recovery", "recovery_error", "flat", "flat_error"]);
    for i in 0..p.recovery.eps_grid.len() {
        csv.row(&[
            csv_float(p.recovery.eps_grid[i]),
            csv_float(p.recovery.values[i]),
            csv_float(p.recovery.errors[i]),
            csv_float(p.flat.values[i]),
            csv_float(p.flat.values[i] - p.limit_value),
        ]);
    }
    out.write("gamma-limit.csv", &csv.render())?;
    write_json(out, cfg, "gamma-limit", &cert)?;
    Ok(Finished {
        summary: certificate_summary(&cert),
        exit_code: verdict_exit_code(cert.verdict),
    })
}

pub fn two_scale(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    cfg.require_eps_grid()?;
    let p = cfg.params()?;
    let arcs = optimal_profile(cfg.t, cfg.orientation)?;
    let kernel = p.kernel()?;
    let psi1 = StepFunction::constant(1.0)?;
    let unit = PeriodicStep::constant(1.0)?;
    let mut csv = Csv::new(&["weight", "eps", "pairing", "limit", "error"]);
    let mut tables = Vec::new();
    for (name, psi2) in [("unit", &unit), ("kernel", kernel.step())] {
        let rows = two_scale_table(&arcs, &psi1, psi2, &cfg.eps_grid)?;
        for r in &rows {
            csv.row(&[name.to_string(), csv_float(r.eps), csv_float(r.pairing), csv_float(r.limit), csv_float(r.error)]);
        }
        tables.push(json!({ "weight": name, "rows": rows }));
    }
    out.write("two-scale.csv", &csv.render())?;
    write_json(out, cfg, "two-scale", &tables)?;
    Ok(Finished::ok(format!("pairings for t = {} over {} eps values", cfg.t, cfg.eps_grid.len())))
}

pub fn non_rep(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    cfg.require_eps_grid()?;
    cfg.require_s_grid(2)?;
    let tol = NonRepTolerances {
        difference: cfg.tolerances.difference,
        study: cfg.tolerances.study,
    };
    let cert = non_representability_certificate(&cfg.params()?, cfg.s_grid[0], cfg.s_grid[1], tol, &cfg.eps_grid)
        .map_err(|e| match e {
            homog_core::Error::DegeneratePair { .. } => anyhow::Error::new(ConfigError::new("s_grid", e.to_string())),
            other => other.into(),
        })?;
    write_json(out, cfg, "non-rep", &cert)?;
    Ok(Finished {
        summary: certificate_summary(&cert),
        exit_code: verdict_exit_code(cert.verdict),
    })
}

fn named_deviation(name: &str, eps: f64) -> Result<Deviation> {
    let z = -0.5;
    Ok(match name {
        "three_level_thirds" => deviation_thirds(z)?,
        "two_level_gap_0.5" => deviation_two_level(z, 0.5)?,
        "two_level_gap_2" => deviation_two_level(z, 2.0)?,
        "oscillating_lift" => deviation_oscillating_lift(z, eps)?,
        other => {
            return Err(ConfigError::new(
                "deviations",
                format!("unknown deviation {other:?}; known: {}", DEVIATION_NAMES.join(", ")),
            )
            .into())
        }
    })
}

pub fn fm_threshold(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    cfg.require_m_grid()?;
    let devs = if cfg.deviations.is_empty() {
        default_deviations(-0.5)?
    } else {
        cfg.deviations
            .iter()
            .map(|d| named_deviation(d, cfg.eps))
            .collect::<Result<Vec<_>>>()?
    };
    let cert = fm_threshold_experiment(&cfg.params()?, cfg.eps, &cfg.m_grid, &devs, cfg.tolerances.admissible)?;
    let CertificatePayload::FmThreshold(p) = &cert.payload else {
        unreachable!()
    };
    let mut csv = Csv::new(&["M", "deviation", "energy", "reference", "strictly_worse"]);
    for row in &p.rows {
        for (name, e) in p.deviation_names.iter().zip(&row.energies) {
            csv.row(&[
                csv_float(row.m),
                name.clone(),
                csv_float(*e),
                csv_float(p.reference_energy),
                (*e > p.reference_energy + cert.tolerances["strict_margin"]).to_string(),
            ]);
        }
    }
    out.write("fm-threshold.csv", &csv.render())?;
    write_json(out, cfg, "fm-threshold", &cert)?;
    Ok(Finished {
        summary: certificate_summary(&cert),
        exit_code: verdict_exit_code(cert.verdict),
    })
}

pub fn reproduce_all(cfg: &RunConfig, out: &Outputs) -> Result<Finished> {
    let mut outcomes = Vec::new();
    let mut lines = Vec::new();
    for id in 1..=8u8 {
        let start = std::time::Instant::now();
        let outcome = match id {
            1 => reproduce::criterion_1(),
            2 => reproduce::criterion_2(),
            3 => reproduce::criterion_3(),
            4 => reproduce::criterion_4(),
            5 => reproduce::criterion_5(cfg.seed, cfg.instances),
            6 => reproduce::criterion_6(),
            7 => reproduce::criterion_7(),
            _ => reproduce::criterion_8(),
        }
        .with_context(|| format!("criterion {id}"))?;
        lines.push(format!(
            "[{}] {} {} ({:.2} s): {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.id,
            outcome.name,
            start.elapsed().as_secs_f64(),
            outcome.summary
        ));
        outcomes.push(outcome);
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    write_json(out, cfg, "reproduce-all", &json!({ "all_passed": all_passed, "criteria": outcomes }))?;
    Ok(Finished {
        summary: lines.join("\n"),
        exit_code: if all_passed { 0 } else { 2 },
    })
}
