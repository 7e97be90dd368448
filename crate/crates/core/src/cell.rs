//! The cell problem on `Y = (0, 1)`.
//!
//! ```text
//! γ(t) = min { F(φ) : φ ∈ L^∞(Y; [0, 1]), ∫_Y φ = t }
//! F(φ) = 2 J(φ) − 2 ā t + ā,   J(φ) = ∫_Y ∫_Y a(σ − τ) φ(σ) φ(τ)
//! ```
//!
//! Profiles are piecewise constant on a uniform `n`-grid. Matrix entries are
//! exact cell-pair integrals, so the discrete energy is the exact continuum
//! energy of the piecewise-constant profile.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::energy::rect_integral_unchecked;
use crate::error::{domain, Error, Result};
use crate::kernel::PeriodicStepKernel;
use crate::states::CellArc;

/// Grid size from which [`MatvecMode::Auto`] switches to the FFT path.
pub const FFT_THRESHOLD: usize = 1024;
/// Largest subset count [`solve_brute_force`] will enumerate.
pub const MAX_ENUMERATION: u64 = 10_000_000;
/// Residual at which the Dykstra projection stops.
pub const PROJECTION_TOL: f64 = 1e-12;
const PROJECTION_MAX_SWEEPS: usize = 1_000_000;
const TIE_TOL: f64 = 1e-12;

/// A piecewise-constant profile on the uniform cell grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct CellProfile {
    n: usize,
    values: Vec<f64>,
    mean: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    #[serde(default)]
    n: Option<usize>,
    values: Vec<f64>,
    #[serde(default)]
    #[allow(dead_code)]
    mean: Option<f64>,
}

impl TryFrom<RawProfile> for CellProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        if let Some(n) = raw.n {
            if n != raw.values.len() {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: raw.values.len(),
                });
            }
        }
        CellProfile::new(raw.values)
    }
}

impl CellProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(domain(format!("a cell profile needs n >= 2 cells, found {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(domain(format!("profile value {v} outside [0, 1]")));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self {
            n: values.len(),
            values,
            mean,
        })
    }

    pub fn constant(n: usize, t: f64) -> Result<Self> {
        Self::new(vec![t; n])
    }

    /// The `{0, 1}` profile with ones at `indices`.
    pub fn indicator(n: usize, indices: &[usize]) -> Result<Self> {
        let mut values = vec![0.0; n];
        for &i in indices {
            if i >= n {
                return Err(domain(format!("index {i} outside grid of size {n}")));
            }
            values[i] = 1.0;
        }
        Self::new(values)
    }

    /// Cell averages of the indicator of a union of arcs.
    pub fn from_arcs(arcs: &[CellArc], n: usize) -> Result<Self> {
        if n < 2 {
            return Err(domain(format!("a cell profile needs n >= 2 cells, found {n}")));
        }
        let mut values = vec![0.0; n];
        let h = 1.0 / n as f64;
        for arc in arcs {
            let first = (arc.start * n as f64).floor() as usize;
            let last = ((arc.end * n as f64).ceil() as usize).min(n);
            for (i, v) in values.iter_mut().enumerate().take(last).skip(first) {
                let lo = (i as f64 * h).max(arc.start);
                let hi = ((i + 1) as f64 * h).min(arc.end);
                if hi > lo {
                    *v += (hi - lo) * n as f64;
                }
            }
        }
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Indices of cells with value 1.
    pub fn support_indices(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_indicator(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.n;
        let values = (0..n).map(|i| self.values[(i + n - shift % n) % n]).collect();
        Self::new(values).expect("rotation preserves validity")
    }
}

/// Whether `indices` (sorted, distinct) form a contiguous cyclic arc of `Z_n`.
pub fn is_cyclic_arc(indices: &[usize], n: usize) -> bool {
    let k = indices.len();
    if k == 0 || k == n {
        return true;
    }
    let mut member = vec![false; n];
    for &i in indices {
        member[i] = true;
    }
    // An arc has exactly one entry point: a member whose predecessor is not.
    (0..n).filter(|&i| member[i] && !member[(i + n - 1) % n]).count() == 1
}

/// Whether `a` is a cyclic rotation of `b` as subsets of `Z_n`.
pub fn is_rotation_of(a: &[usize], b: &[usize], n: usize) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut target = vec![false; n];
    for &i in b {
        target[i] = true;
    }
    (0..n).any(|r| a.iter().all(|&i| target[(i + r) % n]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatvecMode {
    Direct,
    Fft,
    /// Direct below [`FFT_THRESHOLD`], FFT from there on.
    Auto,
}

/// Symmetric circulant matrix of cell-pair kernel integrals, scaled by `n²`.
#[derive(Clone, Serialize)]
pub struct CellKernelMatrix {
    n: usize,
    first_row: Vec<f64>,
    mean: f64,
    #[serde(skip)]
    spectrum: Vec<f64>,
    #[serde(skip)]
    fft: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl std::fmt::Debug for CellKernelMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CellKernelMatrix")
            .field("n", &self.n)
            .field("first_row", &self.first_row)
            .field("mean", &self.mean)
            .finish()
    }
}

/// Builds the cell matrix: `first_row[j] = n² ∫_{cell_0} ∫_{cell_j} a(σ − τ)`,
/// symmetrized so the matrix is exactly symmetric for any kernel.
pub fn build_cell_matrix(k: &PeriodicStepKernel, n: usize) -> Result<CellKernelMatrix> {
    if n < 2 {
        return Err(domain(format!("cell grid needs n >= 2, found {n}")));
    }
    let h = 1.0 / n as f64;
    let scale = (n * n) as f64;
    let raw: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| scale * rect_integral_unchecked(k, 1.0, 0.0, h, j as f64 * h, (j + 1) as f64 * h))
        .collect();
    let first_row: Vec<f64> = (0..n).map(|j| 0.5 * (raw[j] + raw[(n - j) % n])).collect();
    CellKernelMatrix::from_first_row(first_row, k.mean())
}

impl CellKernelMatrix {
    /// A symmetric circulant matrix from its first row.
    pub fn from_first_row(first_row: Vec<f64>, mean: f64) -> Result<Self> {
        let n = first_row.len();
        if n < 2 {
            return Err(domain(format!("cell grid needs n >= 2, found {n}")));
        }
        if (1..n).any(|j| first_row[j] != first_row[n - j]) {
            return Err(domain("circulant first row is not symmetric"));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut buf: Vec<Complex<f64>> = first_row.iter().map(|&r| Complex::new(r, 0.0)).collect();
        forward.process(&mut buf);
        let spectrum = buf.iter().map(|c| c.re).collect();
        Ok(Self {
            n,
            first_row,
            mean,
            spectrum,
            fft: Some((forward, inverse)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    /// Kernel mean `ā`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.first_row[(j + self.n - i % self.n) % self.n]
    }

    /// Eigenvalues, the discrete Fourier transform of the first row.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectrum.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64], mode: MatvecMode) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let use_fft = match mode {
            MatvecMode::Direct => false,
            MatvecMode::Fft => true,
            MatvecMode::Auto => self.n >= FFT_THRESHOLD,
        };
        Ok(if use_fft { self.matvec_fft(x) } else { self.matvec_direct(x) })
    }

    fn matvec_direct(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let r = &self.first_row;
        (0..n)
            .map(|i| {
                // Row i is the first row rotated right by i.
                let (head, tail) = x.split_at(i);
                let mut s = 0.0;
                for (a, b) in r[..n - i].iter().zip(tail) {
                    s += a * b;
                }
                for (a, b) in r[n - i..].iter().zip(head) {
                    s += a * b;
                }
                s
            })
            .collect()
    }

    fn matvec_fft(&self, x: &[f64]) -> Vec<f64> {
        let (forward, inverse) = self.fft.as_ref().expect("fft plans");
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        forward.process(&mut buf);
        for (b, &l) in buf.iter_mut().zip(&self.spectrum) {
            *b *= l;
        }
        inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// `J(φ) = φᵀ K φ / n²`.
    pub fn interaction(&self, phi: &[f64]) -> Result<f64> {
        let kx = self.matvec(phi, MatvecMode::Auto)?;
        let n2 = (self.n * self.n) as f64;
        Ok(kx.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>() / n2)
    }
}

/// `F(φ) = 2 J(φ) − 2 ā t + ā` with `t` the profile mean.
pub fn cell_energy(k: &CellKernelMatrix, phi: &CellProfile) -> Result<f64> {
    if phi.n() != k.n() {
        return Err(Error::DimensionMismatch {
            expected: k.n(),
            found: phi.n(),
        });
    }
    let j = k.interaction(phi.values())?;
    Ok(2.0 * j - 2.0 * k.mean() * phi.mean() + k.mean())
}

fn check_lambda_params(alpha: f64, beta: f64, lambda: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
        return Err(domain(format!("kernel values must be positive, found alpha={alpha}, beta={beta}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(domain(format!("lambda must lie in (0, 1), found {lambda}")));
    }
    Ok(())
}

/// Closed-form energy of the arc profile of mass `t` against the λ-kernel:
///
/// ```text
/// 2α t² − 2ā t + ā                          t ≤ λ/2
/// 2β (t² − t) − (α − β) λ²/2 + ā            λ/2 ≤ t ≤ 1 − λ/2
/// 2α (1 − t)² + 2ā t − ā                    t ≥ 1 − λ/2
/// ```
///
/// For `α ≤ β` this is the cell minimum `γ(t)`. The branches hold for every
/// `λ ∈ (0, 1)`.
pub fn gamma_closed_form(alpha: f64, beta: f64, lambda: f64, t: f64) -> Result<f64> {
    check_lambda_params(alpha, beta, lambda)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("volume fraction must lie in [0, 1], found {t}")));
    }
    let mean = lambda * alpha + (1.0 - lambda) * beta;
    Ok(if t <= 0.5 * lambda {
        2.0 * alpha * t * t - 2.0 * mean * t + mean
    } else if t < 1.0 - 0.5 * lambda {
        2.0 * beta * (t * t - t) - 0.5 * (alpha - beta) * lambda * lambda + mean
    } else {
        2.0 * alpha * (1.0 - t) * (1.0 - t) + 2.0 * mean * t - mean
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Arc centred at 0: `[0, t/2) ∪ (1 − t/2, 1)`.
    LowCostAtZero,
    /// Arc centred at 1/2: `(1/2 − t/2, 1/2 + t/2)`.
    LowCostAtHalf,
}

/// The optimal arc profile of mass `t`.
pub fn optimal_profile(t: f64, orientation: Orientation) -> Result<Vec<CellArc>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("volume fraction must lie in [0, 1], found {t}")));
    }
    if t == 0.0 {
        return Ok(Vec::new());
    }
    if t == 1.0 {
        return Ok(vec![CellArc::new(0.0, 1.0)?]);
    }
    let h = 0.5 * t;
    Ok(match orientation {
        Orientation::LowCostAtZero => vec![CellArc::new(0.0, h)?, CellArc::new(1.0 - h, 1.0)?],
        Orientation::LowCostAtHalf => vec![CellArc::new(0.5 - h, 0.5 + h)?],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMethod {
    ClosedForm,
    ProjectedGradient,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSolveResult {
    pub profile: CellProfile,
    pub energy: f64,
    pub method: CellMethod,
    pub iterations: usize,
    pub constraint_residual: f64,
    pub converged: bool,
}

/// The discretized arc profile and its discrete energy.
pub fn solve_closed_form(k: &CellKernelMatrix, t: f64, orientation: Orientation) -> Result<CellSolveResult> {
    let profile = CellProfile::from_arcs(&optimal_profile(t, orientation)?, k.n())?;
    let energy = cell_energy(k, &profile)?;
    Ok(CellSolveResult {
        constraint_residual: (profile.mean() - t).abs(),
        profile,
        energy,
        method: CellMethod::ClosedForm,
        iterations: 0,
        converged: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedOptions {
    /// Step size; `None` uses `1/L` with `L` the gradient's Lipschitz constant.
    pub step: Option<f64>,
    pub max_iter: usize,
    /// Stop when the RMS change of an iterate falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for RelaxedOptions {
    fn default() -> Self {
        Self {
            step: None,
            max_iter: 20_000,
            tol: 1e-12,
            seed: 0,
        }
    }
}

/// Outcome of [`project_box_mean`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub sweeps: usize,
    pub residual: f64,
}

/// Euclidean projection onto `[0, 1]^n ∩ {mean = t}` by Dykstra's
/// alternating projections, stopped once the box and hyperplane iterates
/// agree to [`PROJECTION_TOL`]. The returned point lies in the box.
pub fn project_box_mean(y: &[f64], t: f64) -> Projection {
    let n = y.len();
    let mut x = y.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < PROJECTION_MAX_SWEEPS {
        sweeps += 1;
        for i in 0..n {
            a[i] = (x[i] + p[i]).clamp(0.0, 1.0);
            p[i] += x[i] - a[i];
        }
        let shift = t - a.iter().zip(&q).map(|(a, q)| a + q).sum::<f64>() / n as f64;
        residual = 0.0;
        for i in 0..n {
            let b = a[i] + q[i] + shift;
            q[i] = a[i] + q[i] - b;
            residual = f64::max(residual, (b - a[i]).abs());
            x[i] = b;
        }
        if residual <= PROJECTION_TOL {
            break;
        }
    }
    Projection {
        point: a,
        sweeps,
        residual,
    }
}

/// Projected-gradient minimization of the cell energy at mass `t`, started
/// from the discretized arc, the flat profile and a seeded random point.
/// The best of the three runs is returned.
pub fn solve_relaxed(k: &CellKernelMatrix, t: f64, opts: &RelaxedOptions) -> Result<CellSolveResult> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("volume fraction must lie in [0, 1], found {t}")));
    }
    if opts.max_iter == 0 || !(opts.tol > 0.0) {
        return Err(domain("solver needs max_iter > 0 and tol > 0"));
    }
    let n = k.n();
    if t == 0.0 || t == 1.0 {
        let profile = CellProfile::constant(n, t)?;
        let energy = cell_energy(k, &profile)?;
        return Ok(CellSolveResult {
            profile,
            energy,
            method: CellMethod::ProjectedGradient,
            iterations: 0,
            constraint_residual: 0.0,
            converged: true,
        });
    }
    let n2 = (n * n) as f64;
    let lipschitz = 4.0 * k.spectral_radius() / n2;
    let step = match opts.step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(domain(format!("step must be positive, found {s}"))),
        None => 1.0 / lipschitz,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let starts = [
        CellProfile::from_arcs(&optimal_profile(t, Orientation::LowCostAtZero)?, n)?
            .values()
            .to_vec(),
        vec![t; n],
        random,
    ];

    let mut best: Option<CellSolveResult> = None;
    for start in starts {
        let run = descend(k, t, start, step, opts)?;
        if best.as_ref().map_or(true, |b| run.energy < b.energy) {
            best = Some(run);
        }
    }
    Ok(best.expect("three starts"))
}

fn descend(k: &CellKernelMatrix, t: f64, start: Vec<f64>, step: f64, opts: &RelaxedOptions) -> Result<CellSolveResult> {
    let n = k.n();
    let n2 = (n * n) as f64;
    let mut phi = project_box_mean(&start, t).point;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let kx = k.matvec(&phi, MatvecMode::Auto)?;
        let trial: Vec<f64> = phi.iter().zip(&kx).map(|(p, g)| p - step * 4.0 * g / n2).collect();
        let next = project_box_mean(&trial, t).point;
        let change = (next.iter().zip(&phi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64).sqrt();
        phi = next;
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    let profile = CellProfile::new(phi)?;
    let energy = cell_energy(k, &profile)?;
    Ok(CellSolveResult {
        constraint_residual: (profile.mean() - t).abs(),
        profile,
        energy,
        method: CellMethod::ProjectedGradient,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BruteForceMode {
    AllSubsets,
    ArcsOnly,
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    c
}

/// `Σ_{i, j ∈ S} K_ij`.
fn subset_interaction(k: &CellKernelMatrix, set: &[usize]) -> f64 {
    let r = k.first_row();
    let n = k.n();
    let mut s = 0.0;
    for &i in set {
        for &j in set {
            s += r[(j + n - i) % n];
        }
    }
    s
}

#[derive(Clone)]
struct Best {
    energy: f64,
    set: Vec<usize>,
}

impl Best {
    /// Keeps the incumbent unless the candidate is better beyond the tie tolerance.
    fn offer(&mut self, energy: f64, set: &[usize]) {
        if self.set.is_empty() && self.energy == f64::INFINITY
            || energy < self.energy - TIE_TOL * self.energy.abs().max(1.0)
        {
            self.energy = energy;
            self.set.clear();
            self.set.extend_from_slice(set);
        }
    }
}

/// Exact minimizer over `{0, 1}` profiles with exactly `k_ones` ones.
///
/// Ties within a relative `1e-12` go to the lexicographically smallest
/// index list.
pub fn solve_brute_force(k: &CellKernelMatrix, k_ones: usize, mode: BruteForceMode) -> Result<CellSolveResult> {
    let n = k.n();
    if k_ones > n {
        return Err(domain(format!("cannot place {k_ones} ones on {n} cells")));
    }
    let t = k_ones as f64 / n as f64;
    let n2 = (n * n) as f64;
    let mean = k.mean();
    let energy_of = |s: f64| 2.0 * s / n2 - 2.0 * mean * t + mean;

    let (best, count) = match mode {
        BruteForceMode::ArcsOnly => {
            let mut best = Best {
                energy: f64::INFINITY,
                set: Vec::new(),
            };
            let starts = if k_ones == 0 || k_ones == n { 1 } else { n };
            for s in 0..starts {
                let mut set: Vec<usize> = (0..k_ones).map(|i| (s + i) % n).collect();
                set.sort_unstable();
                let e = energy_of(subset_interaction(k, &set));
                let scale = TIE_TOL * best.energy.abs().max(1.0);
                let better = s == 0 || e < best.energy - scale;
                let tie = !better && (e - best.energy).abs() <= scale;
                if better || (tie && set < best.set) {
                    best = Best { energy: e, set };
                }
            }
            (best, starts as u64)
        }
        BruteForceMode::AllSubsets => {
            let count = binomial(n, k_ones);
            if count > MAX_ENUMERATION {
                return Err(Error::Resource(format!(
                    "C({n}, {k_ones}) = {count} subsets exceeds the enumeration limit {MAX_ENUMERATION}"
                )));
            }
            if k_ones == 0 {
                (
                    Best {
                        energy: energy_of(0.0),
                        set: Vec::new(),
                    },
                    1,
                )
            } else {
                // Split by the smallest index; each branch enumerates in
                // lexicographic order and branches are merged in order.
                let partial: Vec<Best> = (0..=n - k_ones)
                    .into_par_iter()
                    .map(|first| {
                        let mut best = Best {
                            energy: f64::INFINITY,
                            set: Vec::new(),
                        };
                        let rest = k_ones - 1;
                        let mut set: Vec<usize> = std::iter::once(first).chain(first + 1..first + 1 + rest).collect();
                        loop {
                            best.offer(energy_of(subset_interaction(k, &set)), &set);
                            if !next_combination(&mut set[1..], n) {
                                break;
                            }
                        }
                        best
                    })
                    .collect();
                let mut best = partial[0].clone();
                for b in &partial[1..] {
                    best.offer(b.energy, &b.set);
                }
                (best, count)
            }
        }
    };
    let profile = CellProfile::indicator(n, &best.set)?;
    Ok(CellSolveResult {
        constraint_residual: (profile.mean() - t).abs(),
        profile,
        energy: best.energy,
        method: CellMethod::BruteForce,
        iterations: count as usize,
        converged: true,
    })
}

/// Advances a strictly increasing index list to its lexicographic successor
/// with entries below `n`; returns false when exhausted.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
