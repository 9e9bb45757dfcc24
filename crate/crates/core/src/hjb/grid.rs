use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{TextReader, TextWriter};
use crate::scalar::Real;

pub const VALUE_TAG: &str = "HJBPOD-VALUE";

/// Node values of `V` on a uniform tensor grid, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueGrid<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    k: T,
    counts: Vec<usize>,
    strides: Vec<usize>,
    h: T,
    lambda: T,
    values: Vec<T>,
}

/// Multilinear stencil: base node of the containing cell and the local
/// coordinates in `[0, 1]` per axis.
#[derive(Clone, Debug, Default)]
pub(crate) struct Cell<T> {
    pub base: usize,
    pub frac: Vec<T>,
}

impl<T: Real> ValueGrid<T> {
    /// Zero-initialized grid over `bounds` with spacing `k`. Rejects
    /// `λh ∉ (0, 1)` and boxes whose extent is not a multiple of `k`.
    pub fn new(bounds: &[(T, T)], k: T, h: T, lambda: T) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::param("bounds", "need at least one axis"));
        }
        if !(k > T::zero()) {
            return Err(Error::param("k", "grid spacing must be positive"));
        }
        if !(h > T::zero() && lambda > T::zero()) {
            return Err(Error::param("h", "pseudo time step and discount must be positive"));
        }
        if !(lambda * h < T::one()) {
            return Err(Error::param(
                "h",
                format!("lambda * h = {} must be < 1 for the scheme to contract", lambda * h),
            ));
        }
        let mut counts = Vec::with_capacity(bounds.len());
        for &(lo, hi) in bounds {
            if !(hi > lo) {
                return Err(Error::param("bounds", "each axis needs lo < hi"));
            }
            let cells = (hi - lo) / k;
            let n = cells.round();
            if (cells - n).abs() > T::lit(1e-9) * n.max(T::one()) {
                return Err(Error::param("bounds", "axis extent must be a multiple of k"));
            }
            counts.push(n.to_usize().expect("cell count") + 1);
        }
        let mut strides = vec![1; counts.len()];
        for a in (0..counts.len() - 1).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        let total = counts.iter().product();
        Ok(Self {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            k,
            counts,
            strides,
            h,
            lambda,
            values: vec![T::zero(); total],
        })
    }

    /// Symmetric box `[-rᵢ, rᵢ]` per axis with `rᵢ` rounded up to a multiple
    /// of `k`, so that the origin is a node.
    pub fn symmetric(radii: &[T], k: T, h: T, lambda: T) -> Result<Self> {
        let bounds: Vec<(T, T)> = radii
            .iter()
            .map(|&r| {
                let r = (r / k).ceil().max(T::one()) * k;
                (-r, r)
            })
            .collect();
        Self::new(&bounds, k, h, lambda)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> T {
        self.k
    }

    pub fn time_step(&self) -> T {
        self.h
    }

    pub fn discount(&self) -> T {
        self.lambda
    }

    /// `1 - λh`
    pub fn contraction(&self) -> T {
        T::one() - self.lambda * self.h
    }

    pub fn bounds(&self) -> Vec<(T, T)> {
        self.lo.iter().copied().zip(self.hi.iter().copied()).collect()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub(crate) fn values_mut_vec(&mut self) -> &mut Vec<T> {
        &mut self.values
    }

    /// Coordinates of node `index`.
    pub fn node(&self, index: usize, x: &mut [T]) {
        let mut rem = index;
        for a in 0..self.dim() {
            let i = rem / self.strides[a];
            rem %= self.strides[a];
            x[a] = self.lo[a] + T::from_usize_lossy(i) * self.k;
        }
    }

    pub fn node_vec(&self, index: usize) -> Vec<T> {
        let mut x = vec![T::zero(); self.dim()];
        self.node(index, &mut x);
        x
    }

    /// Componentwise projection onto the box.
    pub fn clamp(&self, x: &[T], out: &mut [T]) {
        for a in 0..self.dim() {
            out[a] = x[a].max(self.lo[a]).min(self.hi[a]);
        }
    }

    pub(crate) fn locate(&self, x: &[T], cell: &mut Cell<T>) {
        cell.base = 0;
        cell.frac.resize(self.dim(), T::zero());
        for a in 0..self.dim() {
            let xa = x[a].max(self.lo[a]).min(self.hi[a]);
            let s = (xa - self.lo[a]) / self.k;
            let last = self.counts[a] - 2;
            let i = s.floor().to_usize().unwrap_or(0).min(last);
            let t = (s - T::from_usize_lossy(i)).max(T::zero()).min(T::one());
            cell.base += i * self.strides[a];
            cell.frac[a] = t;
        }
    }

    pub(crate) fn eval_cell(&self, values: &[T], cell: &Cell<T>) -> T {
        let d = self.dim();
        let mut acc = T::zero();
        for corner in 0..(1usize << d) {
            let mut w = T::one();
            let mut idx = cell.base;
            for a in 0..d {
                if corner >> a & 1 == 1 {
                    w *= cell.frac[a];
                    idx += self.strides[a];
                } else {
                    w *= T::one() - cell.frac[a];
                }
            }
            if w != T::zero() {
                acc += w * values[idx];
            }
        }
        acc
    }

    /// Multilinear interpolant at `x`, clamped to the box first.
    pub fn interpolate(&self, x: &[T]) -> T {
        let mut cell = Cell::default();
        self.locate(x, &mut cell);
        self.eval_cell(&self.values, &cell)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = TextWriter::new(
            VALUE_TAG,
            &[
                self.dim().to_string(),
                format!("{:e}", self.k),
                format!("{:e}", self.h),
                format!("{:e}", self.lambda),
            ],
        );
        for (&lo, &hi) in self.lo.iter().zip(&self.hi) {
            w.values(&[lo, hi]);
        }
        w.values(&self.values);
        w.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = TextReader::open(path, VALUE_TAG)?;
        let dim: usize = r.header_field(0, "l")?;
        let k: T = r.header_field(1, "k")?;
        let h: T = r.header_field(2, "h")?;
        let lambda: T = r.header_field(3, "lambda")?;
        let mut bounds = Vec::with_capacity(dim);
        for _ in 0..dim {
            let b: Vec<T> = r.values(2)?;
            bounds.push((b[0], b[1]));
        }
        let mut grid = Self::new(&bounds, k, h, lambda)?;
        grid.values = r.values(grid.len())?;
        r.finish()?;
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_at_default_spacing_has_1331_nodes() {
        let g = ValueGrid::<f64>::new(&[(-1.0, 1.0); 3], 0.2, 0.04, 1.0).unwrap();
        assert_eq!(g.len(), 1331);
        assert!((g.contraction() - 0.96).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_contracting_step() {
        let err = ValueGrid::<f64>::new(&[(-1.0, 1.0)], 0.2, 1.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "h", .. }));
        assert!(ValueGrid::<f64>::new(&[(-1.0, 1.0)], 0.3, 0.01, 1.0).is_err());
    }

    #[test]
    fn interpolation_hits_nodes_and_affine_data() {
        let mut g = ValueGrid::<f64>::new(&[(-1.0, 1.0), (0.0, 2.0), (-0.5, 0.5)], 0.25, 0.1, 1.0).unwrap();
        let affine = |x: &[f64]| 0.3 + 1.5 * x[0] - 2.0 * x[1] + 0.25 * x[2];
        for i in 0..g.len() {
            let x = g.node_vec(i);
            g.values_mut()[i] = affine(&x);
        }
        for i in (0..g.len()).step_by(7) {
            let x = g.node_vec(i);
            assert_eq!(g.interpolate(&x), g.values()[i]);
        }
        for x in [[0.13, 1.71, -0.33], [-0.99, 0.01, 0.49], [0.5, 1.0, 0.0]] {
            assert!((g.interpolate(&x) - affine(&x)).abs() < 1e-12);
        }
        let outside = [3.0, -1.0, 0.2];
        let mut clamped = [0.0; 3];
        g.clamp(&outside, &mut clamped);
        assert_eq!(g.interpolate(&outside), g.interpolate(&clamped));
    }

    #[test]
    fn symmetric_box_contains_origin_node() {
        let g = ValueGrid::<f64>::symmetric(&[1.03, 0.1], 0.2, 0.04, 1.0).unwrap();
        assert!((g.bounds()[0].1 - 1.2).abs() < 1e-12);
        assert_eq!(g.counts(), &[13, 3]);
        assert!(g.counts().iter().all(|c| c % 2 == 1));
    }
}
