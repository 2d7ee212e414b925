//! Dense-term multivariate polynomials with f64 coefficients.
//!
//! Terms are kept sorted by exponent vector, so evaluation and all derived
//! quantities are deterministic. Monomials are evaluated exactly and
//! accumulated in a fixed order; scaling a point by a power of two therefore
//! rescales every intermediate exactly, which the doubling-index tests rely
//! on for homogeneous instances.

use crate::geom::BoxRegion;
use serde::{Deserialize, Serialize};

/// A multivariate polynomial sum of `coeff * x^exponents` terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiPoly {
    dim: usize,
    /// Sorted lexicographically by exponent vector; no duplicates, no zeros.
    terms: Vec<(Vec<u32>, f64)>,
}

impl MultiPoly {
    pub fn new(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> Self {
        for (e, _) in &terms {
            assert_eq!(e.len(), dim, "exponent arity must match dimension");
        }
        let mut p = MultiPoly { dim, terms };
        p.normalize();
        p
    }

    pub fn zero(dim: usize) -> Self {
        MultiPoly { dim, terms: vec![] }
    }

    /// The coordinate polynomial x_i.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut e = vec![0u32; dim];
        e[i] = 1;
        MultiPoly::new(dim, vec![(e, 1.0)])
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Vec<u32>, f64)> = Vec::with_capacity(self.terms.len());
        for (e, c) in self.terms.drain(..) {
            if let Some(last) = merged.last_mut() {
                if last.0 == e {
                    last.1 += c;
                    continue;
                }
            }
            merged.push((e, c));
        }
        merged.retain(|(_, c)| *c != 0.0);
        self.terms = merged;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(Vec<u32>, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest total degree among terms (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(e, _)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.iter().map(|(e, _)| e.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(d0) => degs.all(|d| d == d0),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = *c;
            for (xi, ei) in x.iter().zip(e) {
                if *ei > 0 {
                    m *= xi.powi(*ei as i32);
                }
            }
            acc += m;
        }
        acc
    }

    /// Partial derivative with respect to coordinate `i`.
    pub fn partial(&self, i: usize) -> MultiPoly {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[i] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (e2, c * e[i] as f64)
            })
            .collect();
        MultiPoly::new(self.dim, terms)
    }

    pub fn gradient(&self) -> Vec<MultiPoly> {
        (0..self.dim).map(|i| self.partial(i)).collect()
    }

    pub fn laplacian(&self) -> MultiPoly {
        let mut acc = MultiPoly::zero(self.dim);
        for i in 0..self.dim {
            acc = acc.add(&self.partial(i).partial(i));
        }
        acc
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.dim, other.dim);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        MultiPoly::new(self.dim, terms)
    }

    pub fn scaled(&self, factor: f64) -> MultiPoly {
        MultiPoly::new(
            self.dim,
            self.terms
                .iter()
                .map(|(e, c)| (e.clone(), c * factor))
                .collect(),
        )
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.dim, other.dim);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                terms.push((e, ca * cb));
            }
        }
        MultiPoly::new(self.dim, terms)
    }

    /// Substitute x_i -> scale * y_i + shift_i and expand.
    pub fn compose_affine(&self, scale: f64, shift: &[f64]) -> MultiPoly {
        assert_eq!(shift.len(), self.dim);
        let subs: Vec<MultiPoly> = (0..self.dim)
            .map(|i| {
                let mut t = vec![(vec![0u32; self.dim], shift[i])];
                let mut e = vec![0u32; self.dim];
                e[i] = 1;
                t.push((e, scale));
                MultiPoly::new(self.dim, t)
            })
            .collect();
        self.compose(&subs)
    }

    /// Substitute x_i -> sum_j matrix[i][j] * y_j (e.g. a rotation).
    pub fn compose_linear(&self, matrix: &[Vec<f64>]) -> MultiPoly {
        assert_eq!(matrix.len(), self.dim);
        let subs: Vec<MultiPoly> = matrix
            .iter()
            .map(|row| {
                assert_eq!(row.len(), self.dim);
                let terms = row
                    .iter()
                    .enumerate()
                    .map(|(j, a)| {
                        let mut e = vec![0u32; self.dim];
                        e[j] = 1;
                        (e, *a)
                    })
                    .collect();
                MultiPoly::new(self.dim, terms)
            })
            .collect();
        self.compose(&subs)
    }

    fn compose(&self, subs: &[MultiPoly]) -> MultiPoly {
        let one = MultiPoly::new(self.dim, vec![(vec![0u32; self.dim], 1.0)]);
        let mut acc = MultiPoly::zero(self.dim);
        for (e, c) in &self.terms {
            let mut m = one.scaled(*c);
            for (i, ei) in e.iter().enumerate() {
                for _ in 0..*ei {
                    m = m.mul(&subs[i]);
                }
            }
            acc = acc.add(&m);
        }
        acc
    }

    /// Upper bound for |p| over a box: sum of |coeff| * max |monomial|.
    pub fn abs_bound_on_box(&self, bx: &BoxRegion) -> f64 {
        let axis_max = bx.abs_axis_max();
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = c.abs();
            for (a, ei) in axis_max.iter().zip(e) {
                if *ei > 0 {
                    m *= a.powi(*ei as i32);
                }
            }
            acc += m;
        }
        acc
    }

    /// Largest |coefficient| (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max)
    }
}
