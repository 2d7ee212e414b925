//! Harmonic functions with exact evaluation and exact gradients.
//!
//! Three closed-form families are supported: harmonic polynomials (exact
//! symbolic Laplacian equal to zero, enforced at construction), sums of
//! homogeneous solid harmonics (lowered to polynomials on construction), and
//! exterior point-charge potentials (harmonic away from the charges).

use crate::basis::harmonic_basis;
use crate::error::{Result, UclabError};
use crate::geom::{dist, BoxRegion, Region};
use crate::poly::MultiPoly;
use serde::{Deserialize, Serialize};

/// How a norm value was obtained and how to read its error bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    /// Closed form; error_bound is zero.
    Exact,
    /// Best value seen on a sample grid; no two-sided guarantee.
    Sampled,
    /// True value lies in [value - error_bound, value + error_bound].
    Certified,
}

/// A nonnegative norm-like quantity with an error bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub mode: EstimateMode,
}

impl NormEstimate {
    pub fn exact(value: f64) -> Self {
        NormEstimate {
            value,
            error_bound: 0.0,
            mode: EstimateMode::Exact,
        }
    }

    pub fn lower(&self) -> f64 {
        (self.value - self.error_bound).max(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error_bound
    }
}

/// A single solid-harmonic term: `amplitude` times the `order`-th member of
/// the exact harmonic basis of the given degree. Orders are 0-based indices
/// into the deterministic echelon basis (for n = 3 the basis of degree d has
/// the familiar 2d+1 members).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalTerm {
    pub degree: u32,
    pub order: u32,
    pub amplitude: f64,
}

/// A point charge: fundamental-solution pole outside the experiment domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub location: Vec<f64>,
    pub charge: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Polynomial,
    SphericalSum(Vec<SphericalTerm>),
    PointCharges(Vec<Charge>),
}

/// A harmonic function with exact gradient and derivative bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicFunction {
    dim: usize,
    repr: Repr,
    /// Polynomial form for the first two kinds; empty for point charges.
    poly: MultiPoly,
    grad: Vec<MultiPoly>,
}

impl HarmonicFunction {
    /// Harmonic polynomial from a term list. Fails unless the symbolic
    /// Laplacian of the given coefficients is identically zero.
    pub fn polynomial(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        if dim < 2 {
            return Err(UclabError::InvalidParameter {
                name: "dimension".into(),
                reason: "needs n >= 2".into(),
            });
        }
        let poly = MultiPoly::new(dim, terms);
        let lap = poly.laplacian();
        if !lap.is_zero() {
            let (e, c) = &lap.terms()[0];
            return Err(UclabError::NotHarmonic {
                coeff: *c,
                monomial: e.clone(),
            });
        }
        let grad = poly.gradient();
        Ok(HarmonicFunction {
            dim,
            repr: Repr::Polynomial,
            poly,
            grad,
        })
    }

    pub fn from_poly(poly: MultiPoly) -> Result<Self> {
        Self::polynomial(poly.dim(), poly.terms().to_vec())
    }

    /// Sum of exact solid harmonics, lowered to a polynomial.
    pub fn spherical_sum(dim: usize, terms: Vec<SphericalTerm>) -> Result<Self> {
        let mut acc = MultiPoly::zero(dim);
        for t in &terms {
            let basis = harmonic_basis(dim, t.degree)?;
            let b = basis.get(t.order as usize).ok_or_else(|| {
                UclabError::InvalidParameter {
                    name: "order".into(),
                    reason: format!(
                        "degree {} in dimension {} has {} basis members, got order {}",
                        t.degree,
                        dim,
                        basis.len(),
                        t.order
                    ),
                }
            })?;
            acc = acc.add(&b.scaled(t.amplitude));
        }
        let grad = acc.gradient();
        Ok(HarmonicFunction {
            dim,
            repr: Repr::SphericalSum(terms),
            poly: acc,
            grad,
        })
    }

    /// Potential of point charges; all poles must lie strictly outside the
    /// closed unit experiment cube.
    pub fn point_charges(dim: usize, charges: Vec<Charge>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(UclabError::InvalidParameter {
                name: "dimension".into(),
                reason: "point-charge kind is implemented for n in {2, 3}".into(),
            });
        }
        let q0 = BoxRegion::cube(&vec![0.0; dim], 1.0);
        for c in &charges {
            if c.location.len() != dim {
                return Err(UclabError::DimensionMismatch {
                    expected: dim,
                    got: c.location.len(),
                });
            }
            if q0.dist_to_point(&c.location) <= 0.0 {
                return Err(UclabError::DomainViolation {
                    reason: format!("charge at {:?} meets the closed unit cube", c.location),
                });
            }
        }
        Ok(HarmonicFunction {
            dim,
            repr: Repr::PointCharges(charges),
            poly: MultiPoly::zero(dim),
            grad: vec![],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind_name(&self) -> &'static str {
        match self.repr {
            Repr::Polynomial => "polynomial",
            Repr::SphericalSum(_) => "spherical_harmonic_sum",
            Repr::PointCharges(_) => "point_charge_sum",
        }
    }

    /// Polynomial form (zero polynomial for point charges).
    pub fn as_poly(&self) -> Option<&MultiPoly> {
        match self.repr {
            Repr::PointCharges(_) => None,
            _ => Some(&self.poly),
        }
    }

    pub fn degree(&self) -> Option<u32> {
        self.as_poly().map(|p| p.degree())
    }

    /// Same function scaled by a constant (still harmonic).
    pub fn scaled(&self, factor: f64) -> HarmonicFunction {
        match &self.repr {
            Repr::Polynomial => HarmonicFunction {
                dim: self.dim,
                repr: Repr::Polynomial,
                poly: self.poly.scaled(factor),
                grad: self.grad.iter().map(|g| g.scaled(factor)).collect(),
            },
            Repr::SphericalSum(terms) => {
                let t2 = terms
                    .iter()
                    .map(|t| SphericalTerm {
                        degree: t.degree,
                        order: t.order,
                        amplitude: t.amplitude * factor,
                    })
                    .collect();
                HarmonicFunction {
                    dim: self.dim,
                    repr: Repr::SphericalSum(t2),
                    poly: self.poly.scaled(factor),
                    grad: self.grad.iter().map(|g| g.scaled(factor)).collect(),
                }
            }
            Repr::PointCharges(charges) => {
                let c2 = charges
                    .iter()
                    .map(|c| Charge {
                        location: c.location.clone(),
                        charge: c.charge * factor,
                    })
                    .collect();
                HarmonicFunction {
                    dim: self.dim,
                    repr: Repr::PointCharges(c2),
                    poly: MultiPoly::zero(self.dim),
                    grad: vec![],
                }
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(UclabError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match &self.repr {
            Repr::Polynomial | Repr::SphericalSum(_) => Ok(self.poly.eval(x)),
            Repr::PointCharges(charges) => {
                let mut acc = 0.0;
                for c in charges {
                    let r = dist(x, &c.location);
                    if r == 0.0 {
                        return Err(UclabError::ChargeEvaluation {
                            location: c.location.clone(),
                        });
                    }
                    acc += c.charge * fundamental(self.dim, r);
                }
                Ok(acc)
            }
        }
    }

    /// Exact gradient (symbolic for polynomial kinds, closed form for poles).
    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match &self.repr {
            Repr::Polynomial | Repr::SphericalSum(_) => {
                Ok(self.grad.iter().map(|g| g.eval(x)).collect())
            }
            Repr::PointCharges(charges) => {
                let n = self.dim;
                let mut out = vec![0.0; n];
                for c in charges {
                    let r = dist(x, &c.location);
                    if r == 0.0 {
                        return Err(UclabError::ChargeEvaluation {
                            location: c.location.clone(),
                        });
                    }
                    // n=2: grad log r = d/r^2; n>=3: grad r^{2-n} = (2-n) d r^{-n}
                    let f = if n == 2 {
                        1.0 / (r * r)
                    } else {
                        (2.0 - n as f64) * r.powi(-(n as i32))
                    };
                    for i in 0..n {
                        out[i] += c.charge * f * (x[i] - c.location[i]);
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn grad_norm_at(&self, x: &[f64]) -> Result<f64> {
        let g = self.gradient_at(x)?;
        Ok(g.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Exact Hessian matrix at a point (row-major n x n).
    pub fn hessian_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        let n = self.dim;
        match &self.repr {
            Repr::Polynomial | Repr::SphericalSum(_) => {
                let mut h = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in i..n {
                        let v = self.grad[i].partial(j).eval(x);
                        h[i][j] = v;
                        h[j][i] = v;
                    }
                }
                Ok(h)
            }
            Repr::PointCharges(charges) => {
                let mut h = vec![vec![0.0; n]; n];
                for c in charges {
                    let d: Vec<f64> = x.iter().zip(&c.location).map(|(a, b)| a - b).collect();
                    let r2: f64 = d.iter().map(|v| v * v).sum();
                    if r2 == 0.0 {
                        return Err(UclabError::ChargeEvaluation {
                            location: c.location.clone(),
                        });
                    }
                    if n == 2 {
                        // H = I/r^2 - 2 d d^T / r^4
                        for i in 0..n {
                            for j in 0..n {
                                let mut v = -2.0 * d[i] * d[j] / (r2 * r2);
                                if i == j {
                                    v += 1.0 / r2;
                                }
                                h[i][j] += c.charge * v;
                            }
                        }
                    } else {
                        let r = r2.sqrt();
                        let rn = r.powi(n as i32);
                        for i in 0..n {
                            for j in 0..n {
                                let mut v = (n as f64) * d[i] * d[j] / (rn * r2);
                                if i == j {
                                    v -= 1.0 / rn;
                                }
                                h[i][j] += c.charge * (2.0 - n as f64) * (-v);
                            }
                        }
                    }
                }
                Ok(h)
            }
        }
    }

    /// Upper bound for the Frobenius norm of the Hessian over a box.
    pub fn hessian_bound(&self, bx: &BoxRegion) -> Result<f64> {
        let n = self.dim;
        match &self.repr {
            Repr::Polynomial | Repr::SphericalSum(_) => {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let b = self.grad[i].partial(j).abs_bound_on_box(bx);
                        acc += b * b;
                    }
                }
                Ok(acc.sqrt())
            }
            Repr::PointCharges(charges) => {
                let mut acc = 0.0;
                for c in charges {
                    let d = bx.dist_to_point(&c.location);
                    if d <= 0.0 {
                        return Err(UclabError::DomainViolation {
                            reason: format!("box touches charge at {:?}", c.location),
                        });
                    }
                    let entry = if n == 2 {
                        3.0 / (d * d)
                    } else {
                        (n as f64 - 2.0) * (n as f64 + 1.0) / d.powi(n as i32)
                    };
                    acc += c.charge.abs() * (n as f64) * entry;
                }
                Ok(acc)
            }
        }
    }

    /// Upper bound for the Frobenius norm of the third-derivative tensor
    /// over a box (the Lipschitz modulus of the Hessian).
    pub fn third_deriv_bound(&self, bx: &BoxRegion) -> Result<f64> {
        let n = self.dim;
        match &self.repr {
            Repr::Polynomial | Repr::SphericalSum(_) => {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in i..n {
                        let hij = self.grad[i].partial(j);
                        for k in 0..n {
                            let b = hij.partial(k).abs_bound_on_box(bx);
                            // account for symmetric duplicates (i,j) vs (j,i)
                            let mult = if i == j { 1.0 } else { 2.0 };
                            acc += mult * b * b;
                        }
                    }
                }
                Ok(acc.sqrt())
            }
            Repr::PointCharges(charges) => {
                let mut acc = 0.0;
                for c in charges {
                    let d = bx.dist_to_point(&c.location);
                    if d <= 0.0 {
                        return Err(UclabError::DomainViolation {
                            reason: format!("box touches charge at {:?}", c.location),
                        });
                    }
                    let entry = if n == 2 {
                        14.0 / (d * d * d)
                    } else {
                        let nf = n as f64;
                        (nf - 2.0) * nf * (nf + 5.0) / d.powi(n as i32 + 1)
                    };
                    acc += c.charge.abs() * (n as f64).powf(1.5) * entry;
                }
                Ok(acc)
            }
        }
    }

    /// Checks the region stays inside the harmonicity domain.
    pub fn check_region(&self, region: &Region) -> Result<()> {
        if region.dim() != self.dim {
            return Err(UclabError::DimensionMismatch {
                expected: self.dim,
                got: region.dim(),
            });
        }
        if let Repr::PointCharges(charges) = &self.repr {
            let bb = region.bounding_box();
            for c in charges {
                if bb.dist_to_point(&c.location) <= 0.0 && region.contains(&c.location) {
                    return Err(UclabError::DomainViolation {
                        reason: format!("region contains charge at {:?}", c.location),
                    });
                }
                // Even a near miss ruins derivative bounds; demand clearance.
                if bb.dist_to_point(&c.location) <= 0.0 {
                    return Err(UclabError::DomainViolation {
                        reason: format!(
                            "bounding box of region touches charge at {:?}",
                            c.location
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

fn fundamental(dim: usize, r: f64) -> f64 {
    if dim == 2 {
        r.ln()
    } else {
        r.powi(2 - dim as i32)
    }
}

// ---------------------------------------------------------------------------
// Serialization: {kind, dimension, terms} with decimal-string coefficients.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FunctionSpec {
    Polynomial {
        dimension: usize,
        terms: Vec<PolyTermSpec>,
    },
    SphericalHarmonicSum {
        dimension: usize,
        terms: Vec<ShTermSpec>,
    },
    PointChargeSum {
        dimension: usize,
        terms: Vec<ChargeSpec>,
    },
}

#[derive(Serialize, Deserialize)]
struct PolyTermSpec {
    exponents: Vec<u32>,
    coefficient: String,
}

#[derive(Serialize, Deserialize)]
struct ShTermSpec {
    degree: u32,
    order: u32,
    amplitude: String,
}

#[derive(Serialize, Deserialize)]
struct ChargeSpec {
    location: Vec<String>,
    charge: String,
}

fn f64_to_decimal(v: f64) -> String {
    // Display emits the shortest decimal string that parses back exactly.
    format!("{v}")
}

fn decimal_to_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| UclabError::InvalidParameter {
        name: "coefficient".into(),
        reason: format!("not a decimal number: {s}"),
    })
}

impl HarmonicFunction {
    pub fn to_spec_json(&self) -> serde_json::Value {
        let spec = match &self.repr {
            Repr::Polynomial => FunctionSpec::Polynomial {
                dimension: self.dim,
                terms: self
                    .poly
                    .terms()
                    .iter()
                    .map(|(e, c)| PolyTermSpec {
                        exponents: e.clone(),
                        coefficient: f64_to_decimal(*c),
                    })
                    .collect(),
            },
            Repr::SphericalSum(terms) => FunctionSpec::SphericalHarmonicSum {
                dimension: self.dim,
                terms: terms
                    .iter()
                    .map(|t| ShTermSpec {
                        degree: t.degree,
                        order: t.order,
                        amplitude: f64_to_decimal(t.amplitude),
                    })
                    .collect(),
            },
            Repr::PointCharges(charges) => FunctionSpec::PointChargeSum {
                dimension: self.dim,
                terms: charges
                    .iter()
                    .map(|c| ChargeSpec {
                        location: c.location.iter().map(|v| f64_to_decimal(*v)).collect(),
                        charge: f64_to_decimal(c.charge),
                    })
                    .collect(),
            },
        };
        serde_json::to_value(spec).expect("function spec serializes")
    }

    pub fn from_spec_json(v: &serde_json::Value) -> Result<Self> {
        let spec: FunctionSpec = serde_json::from_value(v.clone())?;
        match spec {
            FunctionSpec::Polynomial { dimension, terms } => {
                let t = terms
                    .iter()
                    .map(|t| Ok((t.exponents.clone(), decimal_to_f64(&t.coefficient)?)))
                    .collect::<Result<Vec<_>>>()?;
                HarmonicFunction::polynomial(dimension, t)
            }
            FunctionSpec::SphericalHarmonicSum { dimension, terms } => {
                let t = terms
                    .iter()
                    .map(|t| {
                        Ok(SphericalTerm {
                            degree: t.degree,
                            order: t.order,
                            amplitude: decimal_to_f64(&t.amplitude)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                HarmonicFunction::spherical_sum(dimension, t)
            }
            FunctionSpec::PointChargeSum { dimension, terms } => {
                let t = terms
                    .iter()
                    .map(|c| {
                        Ok(Charge {
                            location: c
                                .location
                                .iter()
                                .map(|s| decimal_to_f64(s))
                                .collect::<Result<Vec<_>>>()?,
                            charge: decimal_to_f64(&c.charge)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                HarmonicFunction::point_charges(dimension, t)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub fn linear_x1(dim: usize) -> HarmonicFunction {
        let mut e = vec![0u32; dim];
        e[0] = 1;
        HarmonicFunction::polynomial(dim, vec![(e, 1.0)]).unwrap()
    }

    pub fn saddle() -> HarmonicFunction {
        HarmonicFunction::polynomial(2, vec![(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(linear_x1(2).evaluate(&[3.0, -2.0]).unwrap(), 3.0);
        assert_eq!(saddle().evaluate(&[1.0, 2.0]).unwrap(), -3.0);
        let cubic =
            HarmonicFunction::polynomial(2, vec![(vec![3, 0], 1.0), (vec![1, 2], -3.0)]).unwrap();
        assert_eq!(cubic.evaluate(&[0.5, 0.5]).unwrap(), -0.25);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(linear_x1(3).gradient_at(&[0.2, 0.5, -1.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(saddle().gradient_at(&[1.0, 2.0]).unwrap(), vec![2.0, -4.0]);
        let cubic =
            HarmonicFunction::polynomial(2, vec![(vec![3, 0], 1.0), (vec![1, 2], -3.0)]).unwrap();
        assert_eq!(cubic.gradient_at(&[1.0, 1.0]).unwrap(), vec![0.0, -6.0]);
    }

    #[test]
    fn non_harmonic_is_rejected() {
        let err = HarmonicFunction::polynomial(2, vec![(vec![2, 0], 1.0)]);
        assert!(matches!(err, Err(UclabError::NotHarmonic { .. })));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let u = saddle();
        assert!(matches!(
            u.evaluate(&[1.0, 2.0, 3.0]),
            Err(UclabError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn charge_potential_is_harmonic_numerically() {
        let u = HarmonicFunction::point_charges(
            2,
            vec![Charge {
                location: vec![4.0, 1.0],
                charge: 2.0,
            }],
        )
        .unwrap();
        // Finite-difference Laplacian at a point away from the charge.
        let h = 1e-4;
        let x = [0.1, -0.2];
        let f = |p: &[f64]| u.evaluate(p).unwrap();
        let lap = (f(&[x[0] + h, x[1]]) + f(&[x[0] - h, x[1]]) + f(&[x[0], x[1] + h])
            + f(&[x[0], x[1] - h])
            - 4.0 * f(&x))
            / (h * h);
        assert_abs_diff_eq!(lap, 0.0, epsilon = 1e-5);
    }

    #[test]
    fn charge_gradient_matches_finite_differences() {
        let u = HarmonicFunction::point_charges(
            3,
            vec![Charge {
                location: vec![3.5, 0.0, -4.0],
                charge: -1.5,
            }],
        )
        .unwrap();
        let x = [0.2, 0.1, 0.3];
        let g = u.gradient_at(&x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (u.evaluate(&xp).unwrap() - u.evaluate(&xm).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(g[i], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn charge_inside_cube_rejected() {
        let err = HarmonicFunction::point_charges(
            2,
            vec![Charge {
                location: vec![0.2, 0.2],
                charge: 1.0,
            }],
        );
        assert!(matches!(err, Err(UclabError::DomainViolation { .. })));
    }

    #[test]
    fn spec_roundtrip_is_bit_exact() {
        let u = HarmonicFunction::polynomial(
            2,
            vec![(vec![2, 0], 0.1), (vec![0, 2], -0.1), (vec![1, 0], 1.0 / 3.0)],
        )
        .unwrap();
        let v = u.to_spec_json();
        let u2 = HarmonicFunction::from_spec_json(&v).unwrap();
        assert_eq!(u.poly, u2.poly);
        let v2 = u2.to_spec_json();
        assert_eq!(v, v2);
    }

    #[test]
    fn spherical_sum_lowers_to_harmonic_poly() {
        let u = HarmonicFunction::spherical_sum(
            3,
            vec![SphericalTerm {
                degree: 4,
                order: 3,
                amplitude: 0.5,
            }],
        )
        .unwrap();
        assert!(u.as_poly().unwrap().laplacian().is_zero());
        assert_eq!(u.degree(), Some(4));
    }

    #[test]
    fn hessian_bound_dominates_pointwise_hessian() {
        let u = HarmonicFunction::polynomial(2, vec![(vec![3, 0], 1.0), (vec![1, 2], -3.0)])
            .unwrap();
        let bx = BoxRegion::cube(&[0.2, -0.1], 0.4);
        let bound = u.hessian_bound(&bx).unwrap();
        let h = u.hessian_at(&bx.center()).unwrap();
        let frob: f64 = h
            .iter()
            .flat_map(|r| r.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!(frob <= bound + 1e-12);
    }
}
