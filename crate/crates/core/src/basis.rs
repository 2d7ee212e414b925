//! Exact construction of harmonic polynomials.
//!
//! Homogeneous polynomials decompose as p = h_d + |x|^2 h_{d-2} + ... with
//! each h_m harmonic (the classical Gauss decomposition). Running the
//! decomposition in exact rational arithmetic and clearing denominators
//! yields integer-coefficient harmonic polynomials whose f64 symbolic
//! Laplacian vanishes identically, which the test zoo depends on.

use crate::error::{Result, UclabError};
use crate::poly::MultiPoly;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

/// Sparse polynomial with exact rational coefficients, keyed by exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct RatPoly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl RatPoly {
    pub fn zero(dim: usize) -> Self {
        RatPoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_int_terms(dim: usize, terms: &[(Vec<u32>, i64)]) -> Self {
        let mut p = RatPoly::zero(dim);
        for (e, c) in terms {
            assert_eq!(e.len(), dim);
            p.add_term(e.clone(), BigRational::from_integer(BigInt::from(*c)));
        }
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scaled(&self, f: &BigRational) -> RatPoly {
        let mut out = RatPoly::zero(self.dim);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * f);
        }
        out
    }

    pub fn laplacian(&self) -> RatPoly {
        let mut out = RatPoly::zero(self.dim);
        for (e, c) in &self.terms {
            for i in 0..self.dim {
                if e[i] >= 2 {
                    let mut e2 = e.clone();
                    e2[i] -= 2;
                    let k = BigRational::from_integer(BigInt::from(e[i] as i64 * (e[i] as i64 - 1)));
                    out.add_term(e2, c * k);
                }
            }
        }
        out
    }

    /// Multiply by |x|^2 = sum_i x_i^2.
    pub fn mul_radius_sq(&self) -> RatPoly {
        let mut out = RatPoly::zero(self.dim);
        for (e, c) in &self.terms {
            for i in 0..self.dim {
                let mut e2 = e.clone();
                e2[i] += 2;
                out.add_term(e2, c.clone());
            }
        }
        out
    }

    /// Split into homogeneous parts, lowest degree first.
    pub fn homogeneous_parts(&self) -> Vec<(u32, RatPoly)> {
        let mut parts: BTreeMap<u32, RatPoly> = BTreeMap::new();
        for (e, c) in &self.terms {
            let d = e.iter().sum::<u32>();
            parts
                .entry(d)
                .or_insert_with(|| RatPoly::zero(self.dim))
                .add_term(e.clone(), c.clone());
        }
        parts.into_iter().collect()
    }

    /// Clear denominators and divide by the content, giving a primitive
    /// integer multiple of the polynomial; then convert to f64.
    /// Errors if an integer coefficient cannot be represented exactly.
    pub fn to_primitive_multipoly(&self) -> Result<MultiPoly> {
        if self.is_zero() {
            return Ok(MultiPoly::zero(self.dim));
        }
        let mut denom_lcm = BigInt::one();
        for c in self.terms.values() {
            denom_lcm = lcm(&denom_lcm, c.denom());
        }
        let ints: Vec<(Vec<u32>, BigInt)> = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), c.numer() * (&denom_lcm / c.denom())))
            .collect();
        let mut g = BigInt::zero();
        for (_, v) in &ints {
            g = gcd(&g, &v.abs());
        }
        // 2^48 keeps the f64 symbolic Laplacian exact even after the
        // e*(e-1) coefficient multipliers of second derivatives.
        let limit = BigInt::from(1i64 << 48);
        let mut terms = Vec::with_capacity(ints.len());
        for (e, v) in ints {
            let reduced = v / &g;
            if reduced.abs() > limit {
                return Err(UclabError::InvalidParameter {
                    name: "coefficients".into(),
                    reason: format!("primitive integer coefficient {reduced} exceeds exact f64 range"),
                });
            }
            let as_f64 = reduced
                .to_string()
                .parse::<f64>()
                .expect("integer within f64 range");
            terms.push((e, as_f64));
        }
        Ok(MultiPoly::new(self.dim, terms))
    }
}

fn gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let (mut a, mut b) = (a.abs(), b.abs());
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

fn lcm(a: &BigInt, b: &BigInt) -> BigInt {
    if a.is_zero() || b.is_zero() {
        return BigInt::zero();
    }
    (a * b).abs() / gcd(a, b)
}

/// Gauss decomposition of a homogeneous polynomial:
/// p = sum_k |x|^{2k} h_{d-2k} with every h harmonic. Returns [h_d, h_{d-2}, ...].
fn gauss_decompose(p: &RatPoly, dim: usize) -> Vec<RatPoly> {
    let d = p.degree();
    if p.is_zero() || d <= 1 {
        return vec![p.clone()];
    }
    let lap = p.laplacian();
    let sub = gauss_decompose(&lap, dim); // lap = sum_j |x|^{2j} g_{d-2-2j}
    let mut lower: Vec<RatPoly> = Vec::with_capacity(sub.len());
    for (j, g) in sub.iter().enumerate() {
        // Match |x|^{2(k-1)} g against Delta(|x|^{2k} h_m) = 2k(2m+n+2k-2)|x|^{2k-2} h_m
        let k = (j + 1) as i64;
        let m = d as i64 - 2 * k;
        let factor = 2 * k * (2 * m + dim as i64 + 2 * k - 2);
        debug_assert!(factor > 0);
        let inv = BigRational::new(BigInt::one(), BigInt::from(factor));
        lower.push(g.scaled(&inv));
    }
    // h_d = p - sum_{k>=1} |x|^{2k} h_{d-2k}
    let mut h_top = p.clone();
    for (idx, h) in lower.iter().enumerate() {
        let mut lifted = h.clone();
        for _ in 0..(idx + 1) {
            lifted = lifted.mul_radius_sq();
        }
        h_top = h_top.add(&lifted.scaled(&-BigRational::one()));
    }
    let mut out = vec![h_top];
    out.extend(lower);
    out
}

/// Exact orthogonal-in-spirit projection onto the harmonic subspace:
/// each homogeneous part is replaced by the harmonic component of its
/// Gauss decomposition.
pub fn harmonic_projection(p: &RatPoly) -> RatPoly {
    let dim = p.dim;
    let mut out = RatPoly::zero(dim);
    for (_, part) in p.homogeneous_parts() {
        let comps = gauss_decompose(&part, dim);
        out = out.add(&comps[0]);
    }
    out
}

/// All monomial exponent vectors of total degree `d` in `dim` variables,
/// in lexicographic order.
pub fn monomials_of_degree(dim: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim - 1 {
            let mut e = prefix.clone();
            e.push(d);
            out.push(e);
            return;
        }
        for k in 0..=d {
            prefix.push(k);
            rec(dim, d - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, d, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Dimension of the space of homogeneous harmonic polynomials of degree `d`.
pub fn harmonic_space_dim(dim: usize, d: u32) -> usize {
    fn homog_dim(n: usize, d: u32) -> usize {
        // binom(n + d - 1, d)
        let mut v: u128 = 1;
        for i in 0..(n as u128 - 1) {
            v = v * (d as u128 + 1 + i) / (i + 1);
        }
        v as usize
    }
    if d < 2 {
        return homog_dim(dim, d);
    }
    homog_dim(dim, d) - homog_dim(dim, d - 2)
}

/// An exact integer-coefficient basis of the homogeneous harmonic
/// polynomials of degree `d` in `dim` variables.
///
/// Built by projecting every degree-d monomial and row-reducing the result
/// over the rationals; deterministic, with primitive integer output vectors.
pub fn harmonic_basis(dim: usize, d: u32) -> Result<Vec<MultiPoly>> {
    let monos = monomials_of_degree(dim, d);
    let col_index: BTreeMap<Vec<u32>, usize> = monos
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, e)| (e, i))
        .collect();
    // Rows: projections of each monomial, as rational coefficient vectors.
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    for m in &monos {
        let p = RatPoly::from_int_terms(dim, &[(m.clone(), 1)]);
        let h = harmonic_projection(&p);
        if h.is_zero() {
            continue;
        }
        let mut row = vec![BigRational::zero(); monos.len()];
        for (e, c) in &h.terms {
            row[col_index[e]] = c.clone();
        }
        rows.push(row);
    }
    // Exact Gaussian elimination to row echelon form.
    let mut pivot_rows: Vec<Vec<BigRational>> = Vec::new();
    for mut row in rows {
        for p in &pivot_rows {
            let lead = p.iter().position(|v| !v.is_zero()).unwrap();
            if !row[lead].is_zero() {
                let f = &row[lead] / &p[lead];
                for (ri, pi) in row.iter_mut().zip(p) {
                    *ri -= &f * pi;
                }
            }
        }
        if row.iter().any(|v| !v.is_zero()) {
            pivot_rows.push(row);
        }
    }
    let expected = harmonic_space_dim(dim, d);
    assert_eq!(
        pivot_rows.len(),
        expected,
        "harmonic space dimension mismatch"
    );
    pivot_rows
        .into_iter()
        .map(|row| {
            let mut p = RatPoly::zero(dim);
            for (j, c) in row.into_iter().enumerate() {
                p.add_term(monos[j].clone(), c);
            }
            p.to_primitive_multipoly()
        })
        .collect()
}
