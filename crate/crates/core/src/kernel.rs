//! One-periodic piecewise-constant weights and their exact antiderivatives.
//!
//! A weight `a` is described on one period `[0, 1)` by a sorted list of
//! breakpoints (the first is `0`) and one value per left-closed segment
//! `[b_i, b_{i+1})`. The antiderivative table stores everything needed to
//! integrate `a((x - y)/ε)` over rectangles in closed form: the first
//! antiderivative `A(t) = ∫₀ᵗ a` and the second antiderivative
//!
//! ```text
//! B(t) = ∫₀ᵗ A(s) ds = ā t²/2 + b₁ t + B_per(t),
//! ```
//!
//! where `B_per` is one-periodic and bounded. Keeping the three parts apart
//! lets callers cancel the unbounded polynomial parts symbolically.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest `|t|` accepted by the periodic reductions. Past this the
/// fractional part `t - floor(t)` retains fewer than ~4 significant digits.
pub const MAX_PERIODIC_ARGUMENT: f64 = 1e12;

/// Reduces `t` to `[0, 1)`.
#[inline]
pub(crate) fn fract_unit(t: f64) -> f64 {
    let r = t - t.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// JSON form shared by kernels and periodic test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

/// A one-periodic step function with arbitrary finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepSpec", into = "StepSpec")]
pub struct PeriodicStep {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    // cumulative[i] = ∫₀^{b_i} a, with cumulative[len] = mean
    cumulative: Vec<f64>,
}

impl PeriodicStep {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(domain("periodic step needs at least one segment"));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: breakpoints.len(),
                found: values.len(),
            });
        }
        if breakpoints[0] != 0.0 {
            return Err(domain(format!(
                "first breakpoint must be 0, found {}",
                breakpoints[0]
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[0] < w[1]) {
                return Err(domain(format!(
                    "breakpoints must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let last = *breakpoints.last().unwrap();
        if !(last < 1.0) {
            return Err(domain(format!("breakpoints must lie in [0, 1), found {last}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("segment values must be finite, found {v}")));
        }
        let mut cumulative = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..values.len() {
            let end = breakpoints.get(i + 1).copied().unwrap_or(1.0);
            acc += values[i] * (end - breakpoints[i]);
            cumulative.push(acc);
        }
        Ok(Self {
            breakpoints,
            values,
            cumulative,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![c])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_segments(&self) -> usize {
        self.values.len()
    }

    /// Right end of segment `i` (the next breakpoint, or 1).
    #[inline]
    pub fn segment_end(&self, i: usize) -> f64 {
        self.breakpoints.get(i + 1).copied().unwrap_or(1.0)
    }

    /// Index of the segment containing `r ∈ [0, 1)`.
    #[inline]
    pub fn segment_of(&self, r: f64) -> usize {
        // Short lists dominate in practice; a linear scan beats the
        // branchy binary search for them.
        if self.breakpoints.len() <= 8 {
            let mut i = 0;
            while i + 1 < self.breakpoints.len() && self.breakpoints[i + 1] <= r {
                i += 1;
            }
            i
        } else {
            self.breakpoints.partition_point(|&b| b <= r).max(1) - 1
        }
    }

    /// Value at `t`, extended periodically with left-closed segments.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.segment_of(fract_unit(t))]
    }

    /// `∫₀¹` of the function.
    pub fn mean(&self) -> f64 {
        self.cumulative[self.values.len()]
    }

    /// First antiderivative `A(t) = ∫₀ᵗ`, valid for every real `t`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        let whole = t.floor();
        let r = fract_unit(t);
        let i = self.segment_of(r);
        whole * self.mean() + self.cumulative[i] + self.values[i] * (r - self.breakpoints[i])
    }

    /// `∫ₐᵇ` of the function over an arbitrary real interval.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<StepSpec> for PeriodicStep {
    type Error = Error;

    fn try_from(spec: StepSpec) -> Result<Self> {
        Self::new(spec.breakpoints, spec.values)
    }
}

impl From<PeriodicStep> for StepSpec {
    fn from(p: PeriodicStep) -> Self {
        StepSpec {
            breakpoints: p.breakpoints,
            values: p.values,
        }
    }
}

/// Precomputed integration data for a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct AntiderivativeTable {
    /// `ā = ∫₀¹ a`.
    pub mean: f64,
    /// `A(b_i)` at every breakpoint, plus `A(1) = ā` at the end.
    pub a_at_breakpoints: Vec<f64>,
    /// Coefficient `b₁` of the linear part of `B`.
    pub linear_coeff: f64,
    /// Per segment `[c0, c1, c2]` with `B_per(b_i + s) = c0 + c1 s + c2 s²`.
    pub periodic_coeffs: Vec<[f64; 3]>,
}

impl AntiderivativeTable {
    fn build(step: &PeriodicStep) -> Self {
        let mean = step.mean();
        let m = step.num_segments();
        // C(t) = ∫₀ᵗ A on [0, 1]; C is quadratic on each segment.
        let mut c_at = Vec::with_capacity(m + 1);
        c_at.push(0.0);
        for i in 0..m {
            let len = step.segment_end(i) - step.breakpoints[i];
            let a_i = step.cumulative[i];
            c_at.push(c_at[i] + a_i * len + 0.5 * step.values[i] * len * len);
        }
        // A_per = A - ā t has mean C(1) - ā/2 over one period.
        let linear_coeff = c_at[m] - 0.5 * mean;
        let periodic_coeffs = (0..m)
            .map(|i| {
                let b = step.breakpoints[i];
                [
                    c_at[i] - 0.5 * mean * b * b - linear_coeff * b,
                    step.cumulative[i] - mean * b - linear_coeff,
                    0.5 * (step.values[i] - mean),
                ]
            })
            .collect();
        Self {
            mean,
            a_at_breakpoints: step.cumulative.clone(),
            linear_coeff,
            periodic_coeffs,
        }
    }
}

/// `B(t)` split into its quadratic, linear and bounded periodic parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondAntiderivative {
    pub quadratic_part: f64,
    pub linear_part: f64,
    pub periodic_part: f64,
}

impl SecondAntiderivative {
    pub fn total(&self) -> f64 {
        self.quadratic_part + self.linear_part + self.periodic_part
    }
}

/// Strictly positive one-periodic step weight `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepSpec", into = "StepSpec")]
pub struct PeriodicStepKernel {
    step: PeriodicStep,
    table: AntiderivativeTable,
}

impl PeriodicStepKernel {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::from_step(PeriodicStep::new(breakpoints, values)?)
    }

    pub fn from_step(step: PeriodicStep) -> Result<Self> {
        if let Some(v) = step.values.iter().find(|v| !(**v > 0.0)) {
            return Err(domain(format!("kernel values must be strictly positive, found {v}")));
        }
        let table = AntiderivativeTable::build(&step);
        Ok(Self { step, table })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::from_step(PeriodicStep::constant(c)?)
    }

    pub fn step(&self) -> &PeriodicStep {
        &self.step
    }

    pub fn table(&self) -> &AntiderivativeTable {
        &self.table
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.step.breakpoints()
    }

    pub fn values(&self) -> &[f64] {
        self.step.values()
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.step.eval(t)
    }

    pub fn mean(&self) -> f64 {
        self.table.mean
    }

    /// `max a − min a`.
    pub fn oscillation(&self) -> f64 {
        self.step.max_value() - self.step.min_value()
    }

    pub fn is_constant(&self) -> bool {
        self.oscillation() == 0.0
    }

    pub fn first_antiderivative(&self, t: f64) -> f64 {
        self.step.antiderivative(t)
    }

    /// Bounded periodic remainder `B_per(t)`, with `B_per(0) = 0`.
    #[inline]
    pub fn periodic_part(&self, t: f64) -> f64 {
        let r = fract_unit(t);
        let i = self.step.segment_of(r);
        let s = r - self.step.breakpoints[i];
        let [c0, c1, c2] = self.table.periodic_coeffs[i];
        c0 + s * (c1 + s * c2)
    }

    pub fn second_antiderivative(&self, t: f64) -> SecondAntiderivative {
        SecondAntiderivative {
            quadratic_part: 0.5 * self.table.mean * t * t,
            linear_part: self.table.linear_coeff * t,
            periodic_part: self.periodic_part(t),
        }
    }
}

impl TryFrom<StepSpec> for PeriodicStepKernel {
    type Error = Error;

    fn try_from(spec: StepSpec) -> Result<Self> {
        Self::new(spec.breakpoints, spec.values)
    }
}

impl From<PeriodicStepKernel> for StepSpec {
    fn from(k: PeriodicStepKernel) -> Self {
        k.step.into()
    }
}

/// The symmetric two-level weight `a_λ`: `α` on `[0, λ/2) ∪ [1 − λ/2, 1)`,
/// `β` on `[λ/2, 1 − λ/2)`.
pub fn make_lambda_kernel(alpha: f64, beta: f64, lambda: f64) -> Result<PeriodicStepKernel> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
        return Err(domain(format!(
            "alpha and beta must be positive and finite, found alpha={alpha}, beta={beta}"
        )));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(domain(format!("lambda must lie in (0, 1), found {lambda}")));
    }
    PeriodicStepKernel::new(
        vec![0.0, 0.5 * lambda, 1.0 - 0.5 * lambda],
        vec![alpha, beta, alpha],
    )
}

pub fn kernel_mean(k: &PeriodicStepKernel) -> f64 {
    k.mean()
}
