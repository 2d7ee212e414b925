//! The function zoo: deterministic generators for test harmonic functions.
//!
//! Three families, per the experiment design: exact homogeneous harmonic
//! basis members up to degree 12 in n = 2, 3; random harmonic polynomials
//! obtained by exact projection of random integer polynomials onto the
//! harmonic subspace; and point-charge potentials with poles at distance
//! at least 3 from the unit cube.

use crate::basis::{harmonic_basis, harmonic_projection, monomials_of_degree, RatPoly};
use crate::error::{Result, UclabError};
use crate::geom::norm;
use crate::harmonic::{Charge, HarmonicFunction};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A zoo member with a reproducible name.
#[derive(Clone, Debug)]
pub struct ZooInstance {
    pub name: String,
    pub function: HarmonicFunction,
}

/// The `order`-th member of the exact harmonic basis of the given degree.
pub fn homogeneous(dim: usize, degree: u32, order: usize) -> Result<ZooInstance> {
    let basis = harmonic_basis(dim, degree)?;
    let b = basis
        .get(order)
        .ok_or_else(|| UclabError::InvalidParameter {
            name: "order".into(),
            reason: format!("only {} basis members at degree {degree}", basis.len()),
        })?;
    Ok(ZooInstance {
        name: format!("homogeneous_n{dim}_d{degree}_o{order}"),
        function: HarmonicFunction::from_poly(b.clone())?,
    })
}

/// Random harmonic polynomial: a random integer polynomial of total degree
/// at most `max_degree` is projected exactly onto the harmonic subspace and
/// the result is scaled to primitive integer coefficients.
pub fn random_harmonic(dim: usize, max_degree: u32, rng: &mut ChaCha8Rng) -> Result<ZooInstance> {
    for _attempt in 0..16 {
        let mut terms: Vec<(Vec<u32>, i64)> = Vec::new();
        for d in 1..=max_degree {
            for e in monomials_of_degree(dim, d) {
                // Sparse-ish random integer coefficients.
                if rng.gen_range(0..3) == 0 {
                    let c = rng.gen_range(-9i64..=9);
                    if c != 0 {
                        terms.push((e, c));
                    }
                }
            }
        }
        if terms.is_empty() {
            continue;
        }
        let p = RatPoly::from_int_terms(dim, &terms);
        let h = harmonic_projection(&p);
        if h.is_zero() {
            continue;
        }
        match h.to_primitive_multipoly() {
            Ok(poly) => {
                if poly.degree() >= 1 {
                    return Ok(ZooInstance {
                        name: format!("random_n{dim}_d{}", poly.degree()),
                        function: HarmonicFunction::from_poly(poly)?,
                    });
                }
            }
            Err(_) => continue, // integer overflow: resample
        }
    }
    Err(UclabError::InvalidParameter {
        name: "random_harmonic".into(),
        reason: "failed to draw a nonzero projectable polynomial".into(),
    })
}

/// Random point-charge potential with poles at distance >= 3 from the unit
/// cube (|pole| >= 4 guarantees this in n <= 3).
pub fn random_point_charges(
    dim: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ZooInstance> {
    let mut charges = Vec::with_capacity(count);
    for _ in 0..count.max(1) {
        let dir: Vec<f64> = loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = norm(&v);
            if n > 0.3 {
                break v.iter().map(|x| x / n).collect();
            }
        };
        let radius = rng.gen_range(4.0..7.0);
        let q = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        charges.push(Charge {
            location: dir.iter().map(|x| x * radius).collect(),
            charge: q,
        });
    }
    Ok(ZooInstance {
        name: format!("charges_n{dim}_k{}", charges.len()),
        function: HarmonicFunction::point_charges(dim, charges)?,
    })
}

/// Seeded mixed zoo: homogeneous members across degrees plus random
/// projections. Deterministic for a fixed seed.
pub fn mixed_zoo(dim: usize, max_degree: u32, count: usize, seed: u64) -> Result<Vec<ZooInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut k = 0usize;
    while out.len() < count {
        let pick = k % 3;
        k += 1;
        let inst = match pick {
            0 => {
                let d = 2 + (k as u32 * 3) % max_degree.max(2);
                let basis_len = crate::basis::harmonic_space_dim(dim, d.min(max_degree));
                homogeneous(dim, d.min(max_degree), k % basis_len)?
            }
            1 => random_harmonic(dim, max_degree, &mut rng)?,
            _ => {
                let d = 2 + (k as u32) % max_degree.max(2);
                random_harmonic(dim, d.min(max_degree), &mut rng)?
            }
        };
        out.push(ZooInstance {
            name: format!("zoo{:03}_{}", out.len(), inst.name),
            function: inst.function,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_members_are_homogeneous_and_harmonic() {
        for dim in [2usize, 3] {
            for d in [2u32, 5, 12] {
                let z = homogeneous(dim, d, 0).unwrap();
                let p = z.function.as_poly().unwrap();
                assert!(p.is_homogeneous());
                assert_eq!(p.degree(), d);
                assert!(p.laplacian().is_zero());
            }
        }
    }

    #[test]
    fn random_zoo_is_exactly_harmonic_and_reproducible() {
        let mut rng1 = ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_harmonic(2, 10, &mut rng1).unwrap();
            let b = random_harmonic(2, 10, &mut rng2).unwrap();
            assert_eq!(a.function.as_poly(), b.function.as_poly());
            assert!(a.function.as_poly().unwrap().laplacian().is_zero());
        }
        let mut rng3 = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let a = random_harmonic(3, 8, &mut rng3).unwrap();
            assert!(a.function.as_poly().unwrap().laplacian().is_zero());
        }
    }

    #[test]
    fn charge_poles_are_far_from_the_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_point_charges(3, 4, &mut rng).unwrap();
        // Distance to the unit cube is at least |p| - sqrt(n)/2 >= 4 - 0.87 > 3.
        assert_eq!(z.function.kind_name(), "point_charge_sum");
    }

    #[test]
    fn mixed_zoo_is_deterministic() {
        let a = mixed_zoo(2, 10, 9, 42).unwrap();
        let b = mixed_zoo(2, 10, 9, 42).unwrap();
        assert_eq!(a.len(), 9);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.function.as_poly(), y.function.as_poly());
        }
    }
}
