//! Per-observation design rows, precomputed once per dataset.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::Result;
use crate::splines::{SplineSpec, TimeBasis};
use crate::types::{CovariateSchema, LongitudinalDataset};

/// Fixed-effect rows `x* = (1, x, [t])`, basis rows `z(t)`, outcomes and
/// per-subject Gram matrices for a validated dataset.
#[derive(Debug, Clone)]
pub struct Design {
    basis: TimeBasis,
    schema: CovariateSchema,
    fixed_dim: usize,
    basis_dim: usize,
    offsets: Vec<usize>,
    fixed_rows: Vec<f64>,
    basis_rows: Vec<f64>,
    y: Vec<f64>,
    covariates: Vec<f64>,
    fixed_gram: Vec<f64>,
    basis_gram: Vec<f64>,
    mean_y: f64,
}

impl Design {
    pub fn new(dataset: &LongitudinalDataset, spec: &SplineSpec) -> Result<Self> {
        let basis = TimeBasis::new(spec)?;
        let p = dataset.schema.p();
        let with_time = basis.time_in_fixed_effects();
        let fixed_dim = 1 + p + usize::from(with_time);
        let basis_dim = basis.ncols();
        let n_obs = dataset.n_obs();
        let mut design = Design {
            basis,
            schema: dataset.schema.clone(),
            fixed_dim,
            basis_dim,
            offsets: Vec::with_capacity(dataset.n() + 1),
            fixed_rows: vec![0.0; n_obs * fixed_dim],
            basis_rows: vec![0.0; n_obs * basis_dim],
            y: Vec::with_capacity(n_obs),
            covariates: Vec::with_capacity(dataset.n() * p),
            fixed_gram: vec![0.0; dataset.n() * fixed_dim * fixed_dim],
            basis_gram: vec![0.0; dataset.n() * basis_dim * basis_dim],
            mean_y: dataset.mean_y().unwrap_or(0.0),
        };
        let mut v = 0;
        design.offsets.push(0);
        for (i, s) in dataset.subjects.iter().enumerate() {
            design.covariates.extend_from_slice(&s.x);
            for (&t, &y) in s.t.iter().zip(&s.y) {
                let row = &mut design.fixed_rows[v * fixed_dim..(v + 1) * fixed_dim];
                fill_fixed_row(&s.x, t, with_time, row);
                let zrow = &mut design.basis_rows[v * basis_dim..(v + 1) * basis_dim];
                design.basis.eval_row(t, zrow);
                design.y.push(y);
                v += 1;
            }
            design.offsets.push(v);
            let range = design.obs_range(i);
            accumulate_gram(
                &design.fixed_rows,
                fixed_dim,
                range.clone(),
                &mut design.fixed_gram[i * fixed_dim * fixed_dim..(i + 1) * fixed_dim * fixed_dim],
            );
            accumulate_gram(
                &design.basis_rows,
                basis_dim,
                range,
                &mut design.basis_gram[i * basis_dim * basis_dim..(i + 1) * basis_dim * basis_dim],
            );
        }
        Ok(design)
    }

    pub fn n_subjects(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn fixed_dim(&self) -> usize {
        self.fixed_dim
    }

    pub fn basis_dim(&self) -> usize {
        self.basis_dim
    }

    pub fn basis(&self) -> &TimeBasis {
        &self.basis
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    /// Pooled mean of all outcomes, 0 without observations.
    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn obs_range(&self, subject: usize) -> Range<usize> {
        self.offsets[subject]..self.offsets[subject + 1]
    }

    pub fn n_obs_of(&self, subject: usize) -> usize {
        self.offsets[subject + 1] - self.offsets[subject]
    }

    #[inline]
    pub fn fixed_row(&self, v: usize) -> &[f64] {
        &self.fixed_rows[v * self.fixed_dim..(v + 1) * self.fixed_dim]
    }

    #[inline]
    pub fn basis_row(&self, v: usize) -> &[f64] {
        &self.basis_rows[v * self.basis_dim..(v + 1) * self.basis_dim]
    }

    pub fn fixed_rows_of(&self, subject: usize) -> &[f64] {
        let r = self.obs_range(subject);
        &self.fixed_rows[r.start * self.fixed_dim..r.end * self.fixed_dim]
    }

    pub fn basis_rows_of(&self, subject: usize) -> &[f64] {
        let r = self.obs_range(subject);
        &self.basis_rows[r.start * self.basis_dim..r.end * self.basis_dim]
    }

    #[inline]
    pub fn y(&self, v: usize) -> f64 {
        self.y[v]
    }

    pub fn y_of(&self, subject: usize) -> &[f64] {
        &self.y[self.obs_range(subject)]
    }

    pub fn covariates(&self, subject: usize) -> &[f64] {
        let p = self.schema.p();
        &self.covariates[subject * p..(subject + 1) * p]
    }

    /// Row-major `Σ_v x*_v x*_vᵀ` over the subject's observations.
    pub fn fixed_gram(&self, subject: usize) -> &[f64] {
        let d2 = self.fixed_dim * self.fixed_dim;
        &self.fixed_gram[subject * d2..(subject + 1) * d2]
    }

    pub fn basis_gram(&self, subject: usize) -> &[f64] {
        let k2 = self.basis_dim * self.basis_dim;
        &self.basis_gram[subject * k2..(subject + 1) * k2]
    }

    /// `x*` for arbitrary covariates and time.
    pub fn fixed_row_at(&self, x: &[f64], t: f64, out: &mut [f64]) {
        fill_fixed_row(x, t, self.basis.time_in_fixed_effects(), out);
    }

    /// `z(t)`; returns `true` if the time was clamped into the basis range.
    pub fn basis_row_at(&self, t: f64, out: &mut [f64]) -> bool {
        self.basis.eval_row(t, out)
    }
}

fn fill_fixed_row(x: &[f64], t: f64, with_time: bool, out: &mut [f64]) {
    out[0] = 1.0;
    out[1..1 + x.len()].copy_from_slice(x);
    if with_time {
        out[1 + x.len()] = t;
    }
}

fn accumulate_gram(rows: &[f64], dim: usize, range: Range<usize>, out: &mut [f64]) {
    for v in range {
        let r = &rows[v * dim..(v + 1) * dim];
        for a in 0..dim {
            let ra = r[a];
            for b in 0..dim {
                out[a * dim + b] += ra * r[b];
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splines::{KnotPlacement, SplineKind};
    use crate::types::SubjectRecord;
    use alloc::string::ToString;

    fn dataset() -> LongitudinalDataset {
        let s = |id: &str, x: Vec<f64>, t: Vec<f64>, y: Vec<f64>| SubjectRecord {
            id: id.to_string(),
            x,
            t,
            y,
        };
        LongitudinalDataset {
            schema: CovariateSchema::numbered(1, 1),
            subjects: vec![
                s("a", vec![1.0, 0.5], vec![0.1, 0.4], vec![1.0, 2.0]),
                s("b", vec![0.0, -1.0], vec![], vec![]),
                s("c", vec![0.0, 2.0], vec![0.9], vec![3.0]),
            ],
        }
    }

    #[test]
    fn rows_without_spline_carry_time() {
        let d = Design::new(&dataset(), &SplineSpec::none()).unwrap();
        assert_eq!(d.fixed_dim(), 4);
        assert_eq!(d.basis_dim(), 0);
        assert_eq!(d.fixed_row(1), &[1.0, 1.0, 0.5, 0.4]);
        assert_eq!(d.fixed_row(2), &[1.0, 0.0, 2.0, 0.9]);
        assert_eq!(d.obs_range(1), 2..2);
        assert_eq!(d.covariates(1), &[0.0, -1.0]);
        assert!((d.mean_y() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn grams_match_row_products() {
        let ds = dataset();
        let spec = SplineSpec::from_times(
            SplineKind::ThinPlate,
            &ds.all_times(),
            3,
            KnotPlacement::Quantile,
            3,
        )
        .unwrap();
        let d = Design::new(&ds, &spec).unwrap();
        assert_eq!(d.fixed_dim(), 3);
        let k = d.basis_dim();
        let g = d.basis_gram(0);
        for a in 0..k {
            for b in 0..k {
                let e: f64 = (0..2).map(|v| d.basis_row(v)[a] * d.basis_row(v)[b]).sum();
                assert!((g[a * k + b] - e).abs() < 1e-14);
            }
        }
        assert!(d.basis_gram(1).iter().all(|&v| v == 0.0));
    }
}
