//! Step functions on `Ω = (0, 1)`, the triple-well potentials and the
//! two-level structure `u = z + χ` of finite-energy states.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::StepSpec;
use crate::numeric::ExtReal;

/// Default clustering tolerance for step-function values.
pub const DEFAULT_VALUE_TOL: f64 = 1e-12;

/// Pieces closer than this are treated as touching when profiles are tiled.
const TILE_GAP: f64 = 1e-13;

/// Default cap on the number of pieces an oscillating profile may have.
pub const DEFAULT_MAX_PIECES: usize = 1 << 22;

/// A piecewise-constant function on `(0, 1)`.
///
/// Piece `i` covers `[b_i, b_{i+1})` with `b_0 = 0` and an implicit final
/// breakpoint `1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepSpec", into = "StepSpec")]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(domain("step function needs at least one piece"));
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
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(domain(format!(
                "breakpoints must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let last = *breakpoints.last().unwrap();
        if !(last < 1.0) {
            return Err(domain(format!("breakpoints must lie in [0, 1), found {last}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("values must be finite, found {v}")));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![c])
    }

    /// `left` on `(0, s]`, `right` on `(s, 1)`.
    pub fn jump(s: f64, left: f64, right: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(domain(format!("jump point must lie in (0, 1), found {s}")));
        }
        Self::new(vec![0.0, s], vec![left, right])
    }

    /// The step target `u_s = 1` on `(0, s]`, `0` on `(s, 1)`.
    pub fn unit_step(s: f64) -> Result<Self> {
        Self::jump(s, 1.0, 0.0)
    }

    /// Builds a function from consecutive `(length, value)` pieces that must
    /// tile `(0, 1)`; equal neighbours are merged.
    pub fn from_pieces(pieces: &[(f64, f64)]) -> Result<Self> {
        let mut breakpoints = Vec::with_capacity(pieces.len());
        let mut values: Vec<f64> = Vec::with_capacity(pieces.len());
        let mut x = 0.0;
        for &(len, v) in pieces {
            if !(len > 0.0) {
                return Err(domain(format!("piece lengths must be positive, found {len}")));
            }
            if values.last() != Some(&v) {
                breakpoints.push(x);
                values.push(v);
            }
            x += len;
        }
        if (x - 1.0).abs() > 1e-12 {
            return Err(domain(format!("pieces must tile (0, 1), total length {x}")));
        }
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_pieces(&self) -> usize {
        self.values.len()
    }

    /// `(x0, x1, value)` for every piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.values.len()).map(move |i| {
            let end = self.breakpoints.get(i + 1).copied().unwrap_or(1.0);
            (self.breakpoints[i], end, self.values[i])
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= x).max(1) - 1;
        self.values[i]
    }

    pub fn ess_inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn ess_sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn oscillation(&self) -> f64 {
        self.ess_sup() - self.ess_inf()
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.breakpoints.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// `u + c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        self.map_values(|v| v + c)
    }

    /// Merges neighbouring pieces with identical values.
    pub fn simplified(&self) -> Self {
        let mut breakpoints = Vec::with_capacity(self.values.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.values.len());
        for (b, v) in self.breakpoints.iter().zip(&self.values) {
            if values.last() != Some(v) {
                breakpoints.push(*b);
                values.push(*v);
            }
        }
        Self { breakpoints, values }
    }
}

impl TryFrom<StepSpec> for StepFunction {
    type Error = Error;

    fn try_from(spec: StepSpec) -> Result<Self> {
        Self::new(spec.breakpoints, spec.values)
    }
}

impl From<StepFunction> for StepSpec {
    fn from(u: StepFunction) -> Self {
        StepSpec {
            breakpoints: u.breakpoints,
            values: u.values,
        }
    }
}

/// `∫_Ω u` as the exact sum of value × length.
pub fn integrate(u: &StepFunction) -> f64 {
    crate::numeric::compensated_sum(u.pieces().map(|(x0, x1, v)| v * (x1 - x0)))
}

/// The triple-well potential and its finite truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// `0` on `{−1, 1}`, `1` at `0`, `+∞` elsewhere.
    InfiniteTripleWell,
    /// `0` on `{−1, 1}`, `1` at `0`, `m` elsewhere.
    FiniteM { m: f64 },
}

impl Potential {
    pub fn finite(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(domain(format!("truncation level M must be positive and finite, found {m}")));
        }
        Ok(Potential::FiniteM { m })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::InfiniteTripleWell => Ok(()),
            Potential::FiniteM { m } => Potential::finite(m).map(|_| ()),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Potential::InfiniteTripleWell)
    }
}

/// Evaluates the potential at the increment `z`, snapping to the nearest
/// well when it is within `tol`.
pub fn eval_potential(p: Potential, z: f64, tol: f64) -> ExtReal {
    let nearest = z.round().clamp(-1.0, 1.0);
    if (z - nearest).abs() <= tol {
        return if nearest == 0.0 {
            ExtReal::Finite(1.0)
        } else {
            ExtReal::Finite(0.0)
        };
    }
    match p {
        Potential::InfiniteTripleWell => ExtReal::PosInfinity,
        Potential::FiniteM { m } => ExtReal::Finite(m),
    }
}

/// `u = z + χ` with `χ` taking only the values 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleDecomposition {
    pub z: f64,
    pub chi: StepFunction,
}

impl AdmissibleDecomposition {
    pub fn reconstruct(&self) -> StepFunction {
        StepFunction {
            breakpoints: self.chi.breakpoints.clone(),
            values: self.chi.values.iter().map(|c| self.z + c).collect(),
        }
    }

    /// Same `z`, with `χ` replaced by `1 − χ`.
    pub fn swapped(&self) -> Self {
        AdmissibleDecomposition {
            z: self.z,
            chi: StepFunction {
                breakpoints: self.chi.breakpoints.clone(),
                values: self.chi.values.iter().map(|c| 1.0 - c).collect(),
            },
        }
    }
}

/// Two values of `u` whose gap is outside `{0, 1}`: the triple-well energy
/// of `u` is infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotAdmissible {
    pub low: f64,
    pub high: f64,
    pub gap: f64,
}

impl fmt::Display for NotAdmissible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "values {} and {} differ by {}, not an increment in {{0, 1}}",
            self.low, self.high, self.gap
        )
    }
}

impl std::error::Error for NotAdmissible {}

/// Splits `u` into `z + χ`, or reports why that is impossible.
///
/// Values are clustered with tolerance `tol`; `z` is the smallest value of
/// the lower cluster.
pub fn decompose(u: &StepFunction, tol: f64) -> std::result::Result<AdmissibleDecomposition, NotAdmissible> {
    let mut sorted = u.values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut levels: Vec<f64> = vec![sorted[0]];
    for w in sorted.windows(2) {
        if w[1] - w[0] > tol {
            levels.push(w[1]);
        }
    }
    let z = levels[0];
    match levels.len() {
        1 => Ok(AdmissibleDecomposition {
            z,
            chi: StepFunction {
                breakpoints: u.breakpoints.clone(),
                values: vec![0.0; u.values.len()],
            },
        }),
        2 if ((levels[1] - z) - 1.0).abs() <= tol => {
            let split = 0.5 * (z + levels[1]);
            Ok(AdmissibleDecomposition {
                z,
                chi: StepFunction {
                    breakpoints: u.breakpoints.clone(),
                    values: u.values.iter().map(|&v| if v > split { 1.0 } else { 0.0 }).collect(),
                },
            })
        }
        _ => {
            let high = if ((levels[1] - z) - 1.0).abs() > tol {
                levels[1]
            } else {
                levels[2]
            };
            Err(NotAdmissible {
                low: z,
                high,
                gap: high - z,
            })
        }
    }
}

/// `I_u = [ι(u), ς(u)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleInterval {
    pub iota: f64,
    pub sigma: f64,
    pub empty: bool,
}

pub fn admissible_interval(u: &StepFunction) -> AdmissibleInterval {
    let mass = integrate(u);
    let (inf, sup) = (u.ess_inf(), u.ess_sup());
    let iota = mass - inf;
    let mut sigma = mass - sup + 1.0;
    let empty = sup - inf > 1.0;
    if !empty && sigma < iota {
        // rounding when the oscillation is exactly 1
        sigma = iota;
    }
    AdmissibleInterval { iota, sigma, empty }
}

/// A closed arc `[start, end]` of the unit cell, `0 ≤ start ≤ end ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellArc {
    pub start: f64,
    pub end: f64,
}

impl CellArc {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(0.0 <= start && start <= end && end <= 1.0) {
            return Err(domain(format!("arc [{start}, {end}] is not inside [0, 1]")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Tiles `x ↦ z + φ(x/ε mod 1)` over `(0, 1)` for an indicator `φ` given as
/// disjoint arcs of the cell.
pub fn oscillating_profile(z: f64, arcs: &[CellArc], eps: f64, max_pieces: usize) -> Result<StepFunction> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(domain(format!("eps must lie in (0, 1], found {eps}")));
    }
    let periods = (1.0 / eps).ceil();
    let estimate = 2.0 * (arcs.len() as f64) * periods + 1.0;
    if estimate > max_pieces as f64 {
        return Err(Error::Resource(format!(
            "oscillating profile would need ~{estimate} pieces (cap {max_pieces})"
        )));
    }
    let periods = periods as usize;
    let mut ones: Vec<(f64, f64)> = Vec::with_capacity(arcs.len() * periods);
    for j in 0..periods {
        for arc in arcs.iter().filter(|a| !a.is_empty()) {
            let x0 = (eps * (j as f64 + arc.start)).max(0.0);
            let x1 = (eps * (j as f64 + arc.end)).min(1.0);
            if x1 - x0 > TILE_GAP {
                ones.push((x0, x1));
            }
        }
    }
    ones.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(ones.len());
    for (a, b) in ones {
        match merged.last_mut() {
            Some(last) if a <= last.1 + TILE_GAP => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }

    let (low, high) = (z, z + 1.0);
    let mut breakpoints = vec![0.0];
    let mut values = Vec::new();
    let mut cursor = 0.0;
    for (a, b) in merged {
        if a > cursor + TILE_GAP {
            if values.is_empty() {
                values.push(low);
            } else {
                breakpoints.push(cursor);
                values.push(low);
            }
            cursor = a;
        }
        if values.is_empty() {
            values.push(high);
        } else {
            breakpoints.push(cursor);
            values.push(high);
        }
        cursor = b;
    }
    if values.is_empty() {
        values.push(low);
    } else if cursor < 1.0 - TILE_GAP {
        breakpoints.push(cursor);
        values.push(low);
    }
    Ok(StepFunction::new(breakpoints, values)?.simplified())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn potential_values() {
        let inf = Potential::InfiniteTripleWell;
        assert_eq!(eval_potential(inf, 1.0, 0.0), ExtReal::Finite(0.0));
        assert_eq!(eval_potential(inf, -1.0, 0.0), ExtReal::Finite(0.0));
        assert_eq!(eval_potential(inf, 0.0, 0.0), ExtReal::Finite(1.0));
        assert_eq!(eval_potential(inf, 0.5, 0.0), ExtReal::PosInfinity);
        assert_eq!(eval_potential(inf, 2.0, 0.0), ExtReal::PosInfinity);
        let fm = Potential::finite(10.0).unwrap();
        assert_eq!(eval_potential(fm, 0.5, 0.0), ExtReal::Finite(10.0));
        assert_eq!(eval_potential(fm, 1.0 + 1e-13, 1e-12), ExtReal::Finite(0.0));
        assert!(Potential::finite(0.0).is_err());
        assert!(Potential::finite(f64::INFINITY).is_err());
    }

    #[test]
    fn potential_json() {
        let p: Potential = serde_json::from_str(r#"{"kind":"finite_m","m":4.0}"#).unwrap();
        assert_eq!(p, Potential::FiniteM { m: 4.0 });
        let q: Potential = serde_json::from_str(r#"{"kind":"infinite_triple_well"}"#).unwrap();
        assert!(q.is_infinite());
    }

    #[test]
    fn decompose_two_levels() {
        let u = StepFunction::new(vec![0.0, 0.4, 0.7], vec![0.3, 1.3, 0.3]).unwrap();
        let d = decompose(&u, DEFAULT_VALUE_TOL).unwrap();
        assert_eq!(d.z, 0.3);
        assert_eq!(d.chi.values(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn decompose_constant() {
        let u = StepFunction::constant(2.5).unwrap();
        let d = decompose(&u, DEFAULT_VALUE_TOL).unwrap();
        assert_eq!(d.z, 2.5);
        assert_eq!(d.chi.values(), &[0.0]);
        assert_eq!(d.reconstruct(), u);
    }

    #[test]
    fn decompose_rejects_half_gap() {
        let u = StepFunction::jump(0.5, 0.0, 0.5).unwrap();
        let err = decompose(&u, DEFAULT_VALUE_TOL).unwrap_err();
        assert_eq!(err.gap, 0.5);
        // three levels 0, 1, 2: the offending pair is (0, 2)
        let v = StepFunction::new(vec![0.0, 0.3, 0.6], vec![0.0, 1.0, 2.0]).unwrap();
        let err = decompose(&v, DEFAULT_VALUE_TOL).unwrap_err();
        assert_eq!((err.low, err.high), (0.0, 2.0));
    }

    #[test]
    fn interval_examples() {
        let c = admissible_interval(&StepFunction::constant(0.7).unwrap());
        assert_eq!((c.iota, c.sigma, c.empty), (0.0, 1.0, false));
        let us = admissible_interval(&StepFunction::unit_step(0.3).unwrap());
        assert!((us.iota - 0.3).abs() < 1e-15 && (us.sigma - 0.3).abs() < 1e-15);
        assert!(!us.empty);
        let wide = admissible_interval(&StepFunction::jump(0.5, 0.0, 1.5).unwrap());
        assert!(wide.empty);
        assert!(wide.iota > wide.sigma);
    }

    #[test]
    fn integrate_examples() {
        assert_eq!(integrate(&StepFunction::constant(0.4).unwrap()), 0.4);
        assert!((integrate(&StepFunction::unit_step(0.3).unwrap()) - 0.3).abs() < 1e-16);
        let two = StepFunction::jump(0.5, 0.2, 0.8).unwrap();
        assert!((integrate(&two) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn step_function_validation() {
        assert!(StepFunction::new(vec![0.0, 0.5], vec![1.0]).is_err());
        assert!(StepFunction::new(vec![0.1], vec![1.0]).is_err());
        assert!(StepFunction::new(vec![0.0, 0.5, 0.5], vec![1.0; 3]).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0], vec![1.0; 2]).is_err());
        assert!(StepFunction::new(vec![0.0], vec![f64::NAN]).is_err());
        let json = r#"{"breakpoints":[0.0,0.5],"values":[1.0,0.0]}"#;
        let u: StepFunction = serde_json::from_str(json).unwrap();
        assert_eq!(u, StepFunction::unit_step(0.5).unwrap());
        assert!(serde_json::from_str::<StepFunction>(r#"{"breakpoints":[0.5],"values":[1.0]}"#).is_err());
    }

    #[test]
    fn recovery_profile_quarter_period() {
        let arcs = [CellArc::new(0.0, 0.25).unwrap(), CellArc::new(0.75, 1.0).unwrap()];
        let u = oscillating_profile(-0.5, &arcs, 0.25, DEFAULT_MAX_PIECES).unwrap();
        // 8 arc copies; neighbouring copies merge across period ends, leaving
        // 5 raised pieces separated by 4 lower ones
        assert_eq!(u.num_pieces(), 9);
        assert_eq!(u.values()[0], 0.5);
        let mut levels = u.values().to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels, vec![-0.5, 0.5]);
        assert!(integrate(&u).abs() < 1e-15);
    }

    #[test]
    fn full_and_half_profiles() {
        let full = [CellArc::new(0.0, 1.0).unwrap()];
        let u = oscillating_profile(0.0, &full, 0.1, DEFAULT_MAX_PIECES).unwrap();
        assert_eq!(u, StepFunction::constant(1.0).unwrap());
        let half = [CellArc::new(0.0, 0.25).unwrap(), CellArc::new(0.75, 1.0).unwrap()];
        let v = oscillating_profile(0.0, &half, 0.5, DEFAULT_MAX_PIECES).unwrap();
        assert!((integrate(&v) - 0.5).abs() < 1e-15);
        let empty = oscillating_profile(0.3, &[], 0.5, DEFAULT_MAX_PIECES).unwrap();
        assert_eq!(empty, StepFunction::constant(0.3).unwrap());
    }

    #[test]
    fn profile_piece_cap() {
        let half = [CellArc::new(0.0, 0.25).unwrap(), CellArc::new(0.75, 1.0).unwrap()];
        let err = oscillating_profile(0.0, &half, 1e-6, 1000).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
        assert!(oscillating_profile(0.0, &half, 0.0, 1000).is_err());
    }

    fn arb_step() -> impl Strategy<Value = StepFunction> {
        (1usize..7)
            .prop_flat_map(|p| {
                (
                    prop::collection::vec(0.01f64..0.99, p - 1),
                    prop::collection::vec(-3.0f64..3.0, p),
                )
            })
            .prop_filter_map("distinct", |(mut cuts, vals)| {
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let mut bps = vec![0.0];
                bps.extend(cuts);
                let n = bps.len();
                StepFunction::new(bps, vals[..n].to_vec()).ok()
            })
    }

    fn arb_admissible() -> impl Strategy<Value = StepFunction> {
        (arb_step(), -3.0f64..3.0).prop_map(|(u, z)| {
            u.map_values(|v| if v > 0.0 { z + 1.0 } else { z }).unwrap()
        })
    }

    proptest! {
        #[test]
        fn decomposition_round_trip(u in arb_admissible()) {
            let d = decompose(&u, DEFAULT_VALUE_TOL).unwrap();
            prop_assert_eq!(d.reconstruct(), u.clone());
            prop_assert!(d.chi.values().iter().all(|&c| c == 0.0 || c == 1.0));
            let lhs = integrate(&u);
            let rhs = d.z + integrate(&d.chi);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + d.z.abs()));
        }

        #[test]
        fn empty_interval_iff_oscillation_exceeds_one(u in arb_step()) {
            let iv = admissible_interval(&u);
            prop_assert_eq!(iv.empty, u.oscillation() > 1.0);
            prop_assert_eq!(iv.empty, iv.iota > iv.sigma);
        }

        #[test]
        fn truncated_potential_below_infinite(z in -3.0f64..3.0, m1 in 0.1f64..50.0, m2 in 0.1f64..50.0) {
            let inf = eval_potential(Potential::InfiniteTripleWell, z, 0.0);
            let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
            let a = eval_potential(Potential::FiniteM { m: lo }, z, 0.0);
            let b = eval_potential(Potential::FiniteM { m: hi }, z, 0.0);
            prop_assert!(a <= inf && b <= inf);
            prop_assert!(a <= b);
        }

        #[test]
        fn tiled_indicator_oscillates_at_most_one(
            z in -2.0f64..2.0, start in 0.0f64..1.0, len in 0.0f64..1.0, m in 1usize..40
        ) {
            let end = (start + len).min(1.0);
            let arcs = [CellArc::new(start, end).unwrap()];
            let u = oscillating_profile(z, &arcs, 1.0 / m as f64, DEFAULT_MAX_PIECES).unwrap();
            prop_assert!(u.oscillation() <= 1.0 + 1e-15);
            prop_assert!(decompose(&u, DEFAULT_VALUE_TOL).is_ok());
        }
    }
}
