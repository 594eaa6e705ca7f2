//! Time-basis design matrices: penalised thin-plate (cubic radial) splines
//! and clamped B-splines.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{quantile_sorted, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplineKind {
    ThinPlate,
    BSpline,
    /// No time basis; time enters the fixed effects linearly.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnotPlacement {
    /// Empirical quantiles `i / (k + 1)` of the pooled observation times.
    Quantile,
    /// Evenly spaced over the observed time range.
    Equispaced,
}

pub const DEFAULT_THIN_PLATE_KNOTS: usize = 20;
pub const DEFAULT_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSpec {
    pub kind: SplineKind,
    pub knots: Vec<f64>,
    /// B-spline degree; ignored otherwise.
    pub degree: usize,
    /// B-spline boundary knots (the observed time range).
    pub boundary: (f64, f64),
}

impl SplineSpec {
    pub fn none() -> Self {
        Self {
            kind: SplineKind::None,
            knots: Vec::new(),
            degree: DEFAULT_DEGREE,
            boundary: (0.0, 1.0),
        }
    }

    /// Places `k` knots from the pooled observation times.
    pub fn from_times(
        kind: SplineKind,
        times: &[f64],
        k: usize,
        placement: KnotPlacement,
        degree: usize,
    ) -> Result<Self> {
        if kind == SplineKind::None {
            return Ok(Self::none());
        }
        let knots = default_knots(times, k, kind, placement)?;
        let (lo, hi) = time_range(times)?;
        Ok(Self {
            kind,
            knots,
            degree,
            boundary: (lo, hi),
        })
    }
}

fn time_range(times: &[f64]) -> Result<(f64, f64)> {
    if times.is_empty() {
        return Err(Error::EmptyTimes);
    }
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateRange);
    }
    Ok((lo, hi))
}

/// Default knot locations. Thin-plate knots follow `placement`; B-spline
/// interior knots are always evenly spaced over the time range. Duplicate
/// quantiles (heavily tied times) are collapsed, so fewer than `k` knots
/// may come back.
pub fn default_knots(
    times: &[f64],
    k: usize,
    kind: SplineKind,
    placement: KnotPlacement,
) -> Result<Vec<f64>> {
    if kind == SplineKind::None {
        return Ok(Vec::new());
    }
    if k == 0 {
        return Err(Error::Invalid("knot count must be at least 1".into()));
    }
    let (lo, hi) = time_range(times)?;
    let placement = match kind {
        SplineKind::BSpline => KnotPlacement::Equispaced,
        _ => placement,
    };
    let mut knots: Vec<f64> = match placement {
        KnotPlacement::Equispaced => (1..=k)
            .map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64)
            .collect(),
        KnotPlacement::Quantile => {
            let mut sorted = times.to_vec();
            sorted.sort_by(f64::total_cmp);
            (1..=k)
                .map(|i| quantile_sorted(&sorted, i as f64 / (k + 1) as f64))
                .collect()
        }
    };
    knots.dedup();
    Ok(knots)
}

/// Thin-plate basis for a fixed knot set. The rows of `Z_k` are the cubic
/// radial functions `|t - q_l|^3`; the reported basis is `Z_k Ω^{-1/2}`
/// with `Ω[l, m] = |q_l - q_m|^3`.
///
/// Ω has a zero diagonal and is indefinite, so its square root comes from
/// the SVD `Ω = U D Vᵀ`: `Ω^{1/2} = U D^{1/2} Vᵀ` and
/// `Ω^{-1/2} = (Ω^{1/2})^{-1} = V D^{-1/2} Uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinPlateBasis {
    knots: Vec<f64>,
    omega_inv_sqrt: DMatrix<f64>,
    omega_sqrt: DMatrix<f64>,
}

impl ThinPlateBasis {
    pub fn new(knots: &[f64]) -> Result<Self> {
        let k = knots.len();
        if k == 0 {
            return Err(Error::Invalid("thin-plate basis needs at least one knot".into()));
        }
        let mut sorted = knots.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DegenerateKnots);
        }
        if k == 1 {
            // Ω = [0]: nothing to normalise, keep the raw radial column.
            return Ok(Self {
                knots: knots.to_vec(),
                omega_inv_sqrt: DMatrix::identity(1, 1),
                omega_sqrt: DMatrix::identity(1, 1),
            });
        }
        let omega = penalty_matrix(knots);
        let svd = omega.svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested Vᵀ");
        let d = svd.singular_values;
        let dmax = d.max();
        if d.iter().any(|&s| !(s > dmax * 1e-13)) {
            return Err(Error::DegenerateKnots);
        }
        let mut inv_sqrt = DMatrix::zeros(k, k);
        let mut fwd_sqrt = DMatrix::zeros(k, k);
        for r in 0..k {
            for c in 0..k {
                let mut a = 0.0;
                let mut b = 0.0;
                for s in 0..k {
                    // V D^{-1/2} Uᵀ and U D^{1/2} Vᵀ
                    a += v_t[(s, r)] * u[(c, s)] / sqrt(d[s]);
                    b += u[(r, s)] * v_t[(s, c)] * sqrt(d[s]);
                }
                inv_sqrt[(r, c)] = a;
                fwd_sqrt[(r, c)] = b;
            }
        }
        Ok(Self {
            knots: knots.to_vec(),
            omega_inv_sqrt: inv_sqrt,
            omega_sqrt: fwd_sqrt,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn omega_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.omega_inv_sqrt
    }

    pub fn omega_sqrt(&self) -> &DMatrix<f64> {
        &self.omega_sqrt
    }

    /// Writes the basis row at time `t` into `out` (length = knot count).
    pub fn eval_row(&self, t: f64, out: &mut [f64]) {
        let k = self.knots.len();
        out.fill(0.0);
        for (l, &q) in self.knots.iter().enumerate() {
            let r = (t - q).abs();
            let zk = r * r * r;
            if zk != 0.0 {
                for (m, o) in out.iter_mut().enumerate().take(k) {
                    *o += zk * self.omega_inv_sqrt[(l, m)];
                }
            }
        }
    }

    pub fn design(&self, t_values: &[f64]) -> DMatrix<f64> {
        let k = self.knots.len();
        let mut z = DMatrix::zeros(t_values.len(), k);
        let mut row = vec![0.0; k];
        for (i, &t) in t_values.iter().enumerate() {
            self.eval_row(t, &mut row);
            for (m, &v) in row.iter().enumerate() {
                z[(i, m)] = v;
            }
        }
        z
    }
}

pub fn penalty_matrix(knots: &[f64]) -> DMatrix<f64> {
    let k = knots.len();
    DMatrix::from_fn(k, k, |l, m| {
        let r = (knots[l] - knots[m]).abs();
        r * r * r
    })
}

/// `M × k` thin-plate design at `t_values`.
pub fn thin_plate_basis(t_values: &[f64], knots: &[f64]) -> Result<DMatrix<f64>> {
    Ok(ThinPlateBasis::new(knots)?.design(t_values))
}

/// Clamped B-spline basis with interior `knots` and the given boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    full_knots: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl BSplineBasis {
    pub fn new(knots: &[f64], degree: usize, boundary: (f64, f64)) -> Result<Self> {
        let (lo, hi) = boundary;
        if degree == 0 {
            return Err(Error::Invalid("B-spline degree must be at least 1".into()));
        }
        if !(hi > lo) {
            return Err(Error::DegenerateRange);
        }
        if knots.windows(2).any(|w| w[1] < w[0]) || knots.iter().any(|&q| q <= lo || q >= hi) {
            return Err(Error::Invalid(
                "B-spline interior knots must be sorted and strictly inside the boundary".into(),
            ));
        }
        let mut full = vec![lo; degree + 1];
        full.extend_from_slice(knots);
        full.extend(core::iter::repeat_n(hi, degree + 1));
        Ok(Self {
            degree,
            full_knots: full,
            lo,
            hi,
        })
    }

    pub fn ncols(&self) -> usize {
        self.full_knots.len() - self.degree - 1
    }

    pub fn boundary(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Evaluates the basis at `t`; times outside the boundary are an error.
    pub fn eval_row(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !(t >= self.lo && t <= self.hi) {
            return Err(Error::OutOfRange(t));
        }
        let p = self.degree;
        let kn = &self.full_knots;
        let nb = self.ncols();
        // Knot span s with kn[s] <= t < kn[s + 1]; the right end uses the last
        // non-empty span.
        let s = if t >= self.hi {
            nb - 1
        } else {
            let mut s = p;
            while s + 1 < kn.len() && kn[s + 1] <= t {
                s += 1;
            }
            s
        };
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = t - kn[s + 1 - j];
            right[j] = kn[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let tmp = if denom != 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        out.fill(0.0);
        for (r, &v) in n.iter().enumerate() {
            out[s - p + r] = v;
        }
        Ok(())
    }
}

/// `M × (k + degree + 1)` B-spline design. Errors on times outside the
/// boundary knots.
pub fn bspline_basis(
    t_values: &[f64],
    knots: &[f64],
    degree: usize,
    boundary: (f64, f64),
) -> Result<DMatrix<f64>> {
    let b = BSplineBasis::new(knots, degree, boundary)?;
    let mut z = DMatrix::zeros(t_values.len(), b.ncols());
    let mut row = vec![0.0; b.ncols()];
    for (i, &t) in t_values.iter().enumerate() {
        b.eval_row(t, &mut row)?;
        for (m, &v) in row.iter().enumerate() {
            z[(i, m)] = v;
        }
    }
    Ok(z)
}

/// A time basis ready for evaluation at arbitrary times.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeBasis {
    ThinPlate(ThinPlateBasis),
    BSpline(BSplineBasis),
    None,
}

impl TimeBasis {
    pub fn new(spec: &SplineSpec) -> Result<Self> {
        Ok(match spec.kind {
            SplineKind::ThinPlate => TimeBasis::ThinPlate(ThinPlateBasis::new(&spec.knots)?),
            SplineKind::BSpline => {
                TimeBasis::BSpline(BSplineBasis::new(&spec.knots, spec.degree, spec.boundary)?)
            }
            SplineKind::None => TimeBasis::None,
        })
    }

    pub fn ncols(&self) -> usize {
        match self {
            TimeBasis::ThinPlate(b) => b.knots().len(),
            TimeBasis::BSpline(b) => b.ncols(),
            TimeBasis::None => 0,
        }
    }

    /// Whether time enters the fixed-effect design directly.
    pub fn time_in_fixed_effects(&self) -> bool {
        matches!(self, TimeBasis::None)
    }

    /// Evaluates the basis row; B-spline times outside the boundary are
    /// clamped to it. Returns `true` when clamping happened.
    pub fn eval_row(&self, t: f64, out: &mut [f64]) -> bool {
        match self {
            TimeBasis::ThinPlate(b) => {
                b.eval_row(t, out);
                false
            }
            TimeBasis::BSpline(b) => {
                let (lo, hi) = b.boundary();
                let tc = t.clamp(lo, hi);
                b.eval_row(tc, out).expect("clamped time is inside the boundary");
                tc != t
            }
            TimeBasis::None => false,
        }
    }
}
