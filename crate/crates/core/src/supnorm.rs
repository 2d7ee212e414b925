//! Certified suprema and infima of |grad u| over convex regions.
//!
//! Branch and bound with second-order cell bounds. On a cell with center c,
//! the linearization grad u(c) + H(c)(x - c) dominates |grad u| at the
//! extreme points of the cell (convexity of the norm of an affine map), and
//! a third-derivative bound over the whole query box controls the Lagrange
//! remainder, so bounds tighten quadratically in the cell size.
//!
//! Ball queries use the fact that |grad u|^2 is subharmonic when u is
//! harmonic: the supremum over the closed ball is attained on the sphere,
//! so the search runs over angular cells of the sphere itself (n = 2, 3),
//! with chord-plus-sagitta corrections keeping the bounds second order.
//!
//! All branching decisions are scale-relative. Scaling an origin-centered
//! query by a power of two rescales every float intermediate exactly, so
//! doubling ratios of homogeneous polynomials come out exact - several
//! tests rely on this.

use crate::error::{Result, UclabError};
use crate::geom::{Ball, BoxRegion, Region};
use crate::harmonic::{EstimateMode, HarmonicFunction, NormEstimate};
use rayon::prelude::*;

/// Resource limits and target accuracy for certification.
#[derive(Clone, Copy, Debug)]
pub struct CertifyParams {
    /// Relative tolerance on the returned value.
    pub tolerance: f64,
    /// Refinement rounds (cells halve per round).
    pub max_rounds: usize,
    /// Active cell budget.
    pub max_cells: usize,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams {
            tolerance: 1e-6,
            max_rounds: 64,
            max_cells: 400_000,
        }
    }
}

impl CertifyParams {
    pub fn with_tolerance(tolerance: f64) -> Self {
        CertifyParams {
            tolerance,
            ..Default::default()
        }
    }
}

fn split_box(bx: &BoxRegion) -> Vec<BoxRegion> {
    let n = bx.dim();
    let mid: Vec<f64> = bx.center();
    let mut out = Vec::with_capacity(1 << n);
    for mask in 0..(1u32 << n) {
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for i in 0..n {
            if mask >> i & 1 == 0 {
                lo.push(bx.lo[i]);
                hi.push(mid[i]);
            } else {
                lo.push(mid[i]);
                hi.push(bx.hi[i]);
            }
        }
        out.push(BoxRegion { lo, hi });
    }
    out
}

fn frob(h: &[Vec<f64>]) -> f64 {
    h.iter()
        .flat_map(|r| r.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

fn lin_norm_at(g: &[f64], h: &[Vec<f64>], d: &[f64]) -> f64 {
    let n = g.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut vi = g[i];
        for j in 0..n {
            vi += h[i][j] * d[j];
        }
        acc += vi * vi;
    }
    acc.sqrt()
}

/// Generic branch-and-bound state shared by the drivers below.
struct Verdict {
    lower: f64,
    upper: f64,
}

fn finish(
    v: Verdict,
    params: &CertifyParams,
    rounds_used: usize,
) -> Result<NormEstimate> {
    let gap = (v.upper - v.lower).max(0.0);
    if v.upper <= 0.0 {
        return Ok(NormEstimate::exact(0.0));
    }
    if gap <= params.tolerance * v.lower {
        return Ok(NormEstimate {
            value: 0.5 * (v.upper + v.lower),
            error_bound: 0.5 * gap,
            mode: EstimateMode::Certified,
        });
    }
    Err(UclabError::NonConvergence {
        achieved: gap / v.lower.max(f64::MIN_POSITIVE),
        steps: rounds_used,
        budget: params.max_cells,
    })
}

// ---------------------------------------------------------------------------
// Cartesian driver: boxes and box-cap-ball regions.
// ---------------------------------------------------------------------------

struct BoxCell {
    bx: BoxRegion,
    upper: f64,
}

fn cell_intersects(region: &Region, bx: &BoxRegion) -> bool {
    match region {
        Region::Box(_) => true,
        Region::Ball(b) => bx.intersects_ball(b),
        Region::BoxCapBall(rb, ball) => {
            let lo: Vec<f64> = bx.lo.iter().zip(&rb.lo).map(|(a, b)| a.max(*b)).collect();
            let hi: Vec<f64> = bx.hi.iter().zip(&rb.hi).map(|(a, b)| a.min(*b)).collect();
            if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                return false;
            }
            BoxRegion { lo, hi }.intersects_ball(ball)
        }
    }
}

fn sup_grad_cartesian(
    u: &HarmonicFunction,
    region: &Region,
    params: &CertifyParams,
) -> Result<NormEstimate> {
    let root = region.bounding_box();
    let third_global = u.third_deriv_bound(&root)?;
    let pure_box = matches!(region, Region::Box(_));

    let bound_cell = |bx: &BoxRegion| -> Result<(BoxCell, f64)> {
        let c = bx.center();
        let g = u.gradient_at(&c)?;
        let h = u.hessian_at(&c)?;
        let r = bx.diameter() / 2.0;
        let corners = bx.corners();
        let mut lin_max = 0.0f64;
        let mut best_corner = 0usize;
        for (k, corner) in corners.iter().enumerate() {
            let d: Vec<f64> = corner.iter().zip(&c).map(|(a, b)| a - b).collect();
            let v = lin_norm_at(&g, &h, &d);
            if v > lin_max {
                lin_max = v;
                best_corner = k;
            }
        }
        let upper = lin_max + 0.5 * third_global * r * r;
        // Lower-bound samples must lie in the region.
        let mut sample = if pure_box {
            u.grad_norm_at(&c)?
        } else {
            u.grad_norm_at(&region.project(&c))?
        };
        let s2 = if pure_box {
            corners[best_corner].clone()
        } else {
            region.project(&corners[best_corner])
        };
        sample = sample.max(u.grad_norm_at(&s2)?);
        Ok((BoxCell { bx: bx.clone(), upper }, sample))
    };

    let (c0, s0) = bound_cell(&root)?;
    let mut active = vec![c0];
    let mut lower = s0;
    let mut upper = active[0].upper.max(lower);

    for round in 0..params.max_rounds {
        if upper <= 0.0 || (upper - lower) <= params.tolerance * lower {
            return finish(Verdict { lower, upper }, params, round);
        }
        let children: Vec<BoxRegion> = active
            .iter()
            .filter(|cell| cell.upper > lower)
            .flat_map(|cell| split_box(&cell.bx))
            .filter(|bx| cell_intersects(region, bx))
            .collect();
        if children.is_empty() {
            break;
        }
        if children.len() > params.max_cells {
            break;
        }
        let bounded: Result<Vec<(BoxCell, f64)>> =
            children.par_iter().map(|bx| bound_cell(bx)).collect();
        active = Vec::with_capacity(children.len());
        for (cell, sample) in bounded? {
            lower = lower.max(sample);
            active.push(cell);
        }
        upper = active.iter().map(|c| c.upper).fold(lower, f64::max);
    }
    finish(Verdict { lower, upper }, params, params.max_rounds)
}

// ---------------------------------------------------------------------------
// Sphere drivers: ball regions in n = 2, 3 reduce to the boundary sphere.
// ---------------------------------------------------------------------------

/// Angular cell on a circle or sphere: ranges in (theta[, phi]).
#[derive(Clone)]
struct SphCell {
    a_lo: f64,
    a_hi: f64,
    b_lo: f64,
    b_hi: f64,
    upper: f64,
}

fn sup_grad_sphere(
    u: &HarmonicFunction,
    ball: &Ball,
    params: &CertifyParams,
) -> Result<NormEstimate> {
    let n = ball.dim();
    debug_assert!(n == 2 || n == 3);
    let root_box = ball.bounding_box();
    let third_global = u.third_deriv_bound(&root_box)?;
    if third_global == 0.0 && u.hessian_bound(&root_box)? == 0.0 {
        return Ok(NormEstimate::exact(u.grad_norm_at(&ball.center)?));
    }
    let r = ball.radius;
    let z = &ball.center;

    let point2 = |theta: f64| -> Vec<f64> { vec![z[0] + r * theta.cos(), z[1] + r * theta.sin()] };
    let point3 = |theta: f64, phi: f64| -> Vec<f64> {
        vec![
            z[0] + r * theta.sin() * phi.cos(),
            z[1] + r * theta.sin() * phi.sin(),
            z[2] + r * theta.cos(),
        ]
    };

    let bound_cell = |cell: &SphCell| -> Result<(f64, f64)> {
        if n == 2 {
            let mid = 0.5 * (cell.a_lo + cell.a_hi);
            let xc = point2(mid);
            let g = u.gradient_at(&xc)?;
            let h = u.hessian_at(&xc)?;
            let e0 = point2(cell.a_lo);
            let e1 = point2(cell.a_hi);
            let d0: Vec<f64> = e0.iter().zip(&xc).map(|(a, b)| a - b).collect();
            let d1: Vec<f64> = e1.iter().zip(&xc).map(|(a, b)| a - b).collect();
            let lin = lin_norm_at(&g, &h, &d0).max(lin_norm_at(&g, &h, &d1));
            let dth = cell.a_hi - cell.a_lo;
            // Arc deviates from its chord by the sagitta.
            let sag = r * (1.0 - (0.5 * dth).cos());
            let reach = r * 0.5 * dth; // chord half-length bound |x - xc|
            let upper = lin + frob(&h) * sag + 0.5 * third_global * reach * reach;
            let sample = u
                .grad_norm_at(&xc)?
                .max(u.grad_norm_at(&e0)?)
                .max(u.grad_norm_at(&e1)?);
            Ok((upper, sample))
        } else {
            let tm = 0.5 * (cell.a_lo + cell.a_hi);
            let pm = 0.5 * (cell.b_lo + cell.b_hi);
            let xc = point3(tm, pm);
            let g = u.gradient_at(&xc)?;
            let h = u.hessian_at(&xc)?;
            let corners = [
                point3(cell.a_lo, cell.b_lo),
                point3(cell.a_lo, cell.b_hi),
                point3(cell.a_hi, cell.b_lo),
                point3(cell.a_hi, cell.b_hi),
            ];
            let mut lin = 0.0f64;
            let mut best = 0usize;
            for (k, corner) in corners.iter().enumerate() {
                let d: Vec<f64> = corner.iter().zip(&xc).map(|(a, b)| a - b).collect();
                let v = lin_norm_at(&g, &h, &d);
                if v > lin {
                    lin = v;
                    best = k;
                }
            }
            let dth = cell.a_hi - cell.a_lo;
            let dph = cell.b_hi - cell.b_lo;
            // Bilinear-interpolant error bound: all second parameter
            // derivatives of the patch are at most r in norm, and the
            // bilinear surface stays in the convex hull of the corners.
            let dev = r * (dth * dth / 8.0 + dph * dph / 8.0 + dth * dph / 4.0);
            let reach2 = r * r * (0.25 * dth * dth + 0.25 * dph * dph);
            let upper = lin + frob(&h) * dev + 0.5 * third_global * reach2;
            let sample = u.grad_norm_at(&xc)?.max(u.grad_norm_at(&corners[best])?);
            Ok((upper, sample))
        }
    };

    let seed = if n == 2 {
        // Quarter-circle cells avoid over-wide linearizations at round 0.
        (0..4)
            .map(|k| SphCell {
                a_lo: std::f64::consts::FRAC_PI_2 * k as f64,
                a_hi: std::f64::consts::FRAC_PI_2 * (k + 1) as f64,
                b_lo: 0.0,
                b_hi: 0.0,
                upper: f64::INFINITY,
            })
            .collect::<Vec<_>>()
    } else {
        let mut cells = Vec::new();
        for i in 0..2 {
            for j in 0..4 {
                cells.push(SphCell {
                    a_lo: std::f64::consts::FRAC_PI_2 * i as f64,
                    a_hi: std::f64::consts::FRAC_PI_2 * (i + 1) as f64,
                    b_lo: std::f64::consts::FRAC_PI_2 * j as f64,
                    b_hi: std::f64::consts::FRAC_PI_2 * (j + 1) as f64,
                    upper: f64::INFINITY,
                });
            }
        }
        cells
    };

    let mut lower = 0.0f64;
    let mut active: Vec<SphCell> = Vec::new();
    for mut cell in seed {
        let (up, sample) = bound_cell(&cell)?;
        cell.upper = up;
        lower = lower.max(sample);
        active.push(cell);
    }
    let mut upper = active.iter().map(|c| c.upper).fold(lower, f64::max);

    for round in 0..params.max_rounds {
        if upper <= 0.0 || (upper - lower) <= params.tolerance * lower {
            return finish(Verdict { lower, upper }, params, round);
        }
        let mut children: Vec<SphCell> = Vec::new();
        for cell in active.iter().filter(|c| c.upper > lower) {
            let am = 0.5 * (cell.a_lo + cell.a_hi);
            if n == 2 {
                for (lo, hi) in [(cell.a_lo, am), (am, cell.a_hi)] {
                    children.push(SphCell {
                        a_lo: lo,
                        a_hi: hi,
                        b_lo: 0.0,
                        b_hi: 0.0,
                        upper: f64::INFINITY,
                    });
                }
            } else {
                let bm = 0.5 * (cell.b_lo + cell.b_hi);
                for (alo, ahi) in [(cell.a_lo, am), (am, cell.a_hi)] {
                    for (blo, bhi) in [(cell.b_lo, bm), (bm, cell.b_hi)] {
                        children.push(SphCell {
                            a_lo: alo,
                            a_hi: ahi,
                            b_lo: blo,
                            b_hi: bhi,
                            upper: f64::INFINITY,
                        });
                    }
                }
            }
        }
        if children.is_empty() || children.len() > params.max_cells {
            break;
        }
        let bounded: Result<Vec<(f64, f64)>> =
            children.par_iter().map(|c| bound_cell(c)).collect();
        let bounded = bounded?;
        for (cell, (up, sample)) in children.iter_mut().zip(&bounded) {
            cell.upper = *up;
            lower = lower.max(*sample);
        }
        active = children;
        upper = active.iter().map(|c| c.upper).fold(lower, f64::max);
    }
    finish(Verdict { lower, upper }, params, params.max_rounds)
}

/// Certified supremum of |grad u| over a convex region.
///
/// Ball regions in n = 2, 3 are reduced to their boundary sphere (|grad u|^2
/// is subharmonic for harmonic u, so the maximum sits on the boundary).
pub fn sup_grad(
    u: &HarmonicFunction,
    region: &Region,
    params: &CertifyParams,
) -> Result<NormEstimate> {
    u.check_region(region)?;
    let root = region.bounding_box();
    if u.third_deriv_bound(&root)? == 0.0 && u.hessian_bound(&root)? == 0.0 {
        let v = u.grad_norm_at(&region.project(&root.center()))?;
        return Ok(NormEstimate::exact(v));
    }
    match region {
        Region::Ball(b) if b.dim() <= 3 => sup_grad_sphere(u, b, params),
        _ => sup_grad_cartesian(u, region, params),
    }
}

/// Uncertified grid-sampled supremum (`sampled` mode).
pub fn sup_grad_sampled(
    u: &HarmonicFunction,
    region: &Region,
    per_axis: usize,
) -> Result<NormEstimate> {
    u.check_region(region)?;
    let bb = region.bounding_box();
    let n = bb.dim();
    let m = per_axis.max(2);
    let mut idx = vec![0usize; n];
    let mut best = 0.0f64;
    loop {
        let x: Vec<f64> = (0..n)
            .map(|i| bb.lo[i] + (bb.hi[i] - bb.lo[i]) * idx[i] as f64 / (m - 1) as f64)
            .collect();
        let p = region.project(&x);
        best = best.max(u.grad_norm_at(&p)?);
        let mut k = 0;
        loop {
            if k == n {
                return Ok(NormEstimate {
                    value: best,
                    error_bound: 0.0,
                    mode: EstimateMode::Sampled,
                });
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Outcome of a certified threshold test for the infimum of |grad u|.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InfDecision {
    /// inf |grad u| < threshold, witnessed by an evaluated point.
    Below,
    /// inf |grad u| >= threshold, certified by cell lower bounds.
    AtOrAbove,
    /// Resource budget exhausted before a certificate emerged.
    Borderline,
}

struct MinCell {
    bx: BoxRegion,
    lower: f64,
}

fn min_bound_cell(
    u: &HarmonicFunction,
    region: &Region,
    bx: &BoxRegion,
) -> Result<(MinCell, f64)> {
    let c = bx.center();
    let s = region.project(&c);
    let sample = u.grad_norm_at(&s)?;
    let g = u.grad_norm_at(&c)?;
    let lip = u.hessian_bound(bx)?;
    let r = bx.diameter() / 2.0;
    Ok((
        MinCell {
            bx: bx.clone(),
            lower: (g - lip * r).max(0.0),
        },
        sample,
    ))
}

/// Decide whether the infimum of |grad u| over the region is below
/// `threshold`. Stops as soon as either side is certain.
pub fn inf_grad_decide(
    u: &HarmonicFunction,
    region: &Region,
    threshold: f64,
    params: &CertifyParams,
) -> Result<InfDecision> {
    u.check_region(region)?;
    let root = region.bounding_box();
    let (c0, s0) = min_bound_cell(u, region, &root)?;
    let mut upper = s0;
    let mut active = vec![c0];

    for _ in 0..params.max_rounds {
        if upper < threshold {
            return Ok(InfDecision::Below);
        }
        if active.iter().all(|c| c.lower >= threshold) {
            return Ok(InfDecision::AtOrAbove);
        }
        let children: Vec<BoxRegion> = active
            .iter()
            .filter(|c| c.lower < threshold)
            .flat_map(|c| split_box(&c.bx))
            .filter(|bx| cell_intersects(region, bx))
            .collect();
        if children.is_empty() {
            return Ok(InfDecision::AtOrAbove);
        }
        if children.len() > params.max_cells {
            return Ok(InfDecision::Borderline);
        }
        let next: Result<Vec<(MinCell, f64)>> = children
            .par_iter()
            .map(|bx| min_bound_cell(u, region, bx))
            .collect();
        let mut cells = Vec::with_capacity(children.len());
        for (cell, sample) in next? {
            upper = upper.min(sample);
            cells.push(cell);
        }
        active = cells;
    }
    Ok(InfDecision::Borderline)
}

/// Certified infimum of |grad u| with an absolute accuracy target.
pub fn inf_grad(
    u: &HarmonicFunction,
    region: &Region,
    abs_tolerance: f64,
    params: &CertifyParams,
) -> Result<NormEstimate> {
    u.check_region(region)?;
    let root = region.bounding_box();
    let (c0, s0) = min_bound_cell(u, region, &root)?;
    let mut upper = s0;
    let mut active = vec![c0];
    for round in 0..params.max_rounds {
        let lower = active
            .iter()
            .map(|c| c.lower)
            .fold(f64::INFINITY, f64::min)
            .min(upper);
        if upper - lower <= abs_tolerance {
            return Ok(NormEstimate {
                value: 0.5 * (upper + lower),
                error_bound: 0.5 * (upper - lower),
                mode: EstimateMode::Certified,
            });
        }
        let cutoff = upper;
        let children: Vec<BoxRegion> = active
            .iter()
            .filter(|c| c.lower < cutoff)
            .flat_map(|c| split_box(&c.bx))
            .filter(|bx| cell_intersects(region, bx))
            .collect();
        if children.len() > params.max_cells {
            return Err(UclabError::NonConvergence {
                achieved: upper - lower,
                steps: round,
                budget: params.max_cells,
            });
        }
        let next: Result<Vec<(MinCell, f64)>> = children
            .par_iter()
            .map(|bx| min_bound_cell(u, region, bx))
            .collect();
        let mut cells = Vec::with_capacity(children.len());
        for (cell, sample) in next? {
            upper = upper.min(sample);
            cells.push(cell);
        }
        if cells.is_empty() {
            return Ok(NormEstimate {
                value: upper,
                error_bound: 0.0,
                mode: EstimateMode::Certified,
            });
        }
        active = cells;
    }
    let lower = active
        .iter()
        .map(|c| c.lower)
        .fold(f64::INFINITY, f64::min)
        .min(upper);
    Err(UclabError::NonConvergence {
        achieved: upper - lower,
        steps: params.max_rounds,
        budget: params.max_cells,
    })
}

/// Certified supremum over a union of regions (max of per-region estimates).
pub fn sup_grad_union(
    u: &HarmonicFunction,
    regions: &[Region],
    params: &CertifyParams,
) -> Result<NormEstimate> {
    if regions.is_empty() {
        return Err(UclabError::EmptySet);
    }
    let estimates: Result<Vec<NormEstimate>> = regions
        .par_iter()
        .map(|r| sup_grad(u, r, params))
        .collect();
    let estimates = estimates?;
    let lo = estimates.iter().map(|e| e.lower()).fold(0.0, f64::max);
    let hi = estimates.iter().map(|e| e.upper()).fold(0.0, f64::max);
    Ok(NormEstimate {
        value: 0.5 * (lo + hi),
        error_bound: 0.5 * (hi - lo),
        mode: if estimates.iter().all(|e| e.mode == EstimateMode::Exact) {
            EstimateMode::Exact
        } else {
            EstimateMode::Certified
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Ball;
    use crate::harmonic::HarmonicFunction;
    use approx::assert_abs_diff_eq;

    fn linear() -> HarmonicFunction {
        HarmonicFunction::polynomial(2, vec![(vec![1, 0], 1.0)]).unwrap()
    }

    fn saddle() -> HarmonicFunction {
        HarmonicFunction::polynomial(2, vec![(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap()
    }

    fn cubic() -> HarmonicFunction {
        HarmonicFunction::polynomial(2, vec![(vec![3, 0], 1.0), (vec![1, 2], -3.0)]).unwrap()
    }

    #[test]
    fn linear_sup_is_exact_one() {
        let est = sup_grad(
            &linear(),
            &Region::Ball(Ball::new(vec![0.0, 0.0], 0.7)),
            &CertifyParams::default(),
        )
        .unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.error_bound, 0.0);
        assert_eq!(est.mode, EstimateMode::Exact);
    }

    #[test]
    fn saddle_sup_on_ball_is_two_r() {
        // |grad (x^2 - y^2)| = 2|x|, so sup over B(0, r) is 2r.
        for r in [0.25, 0.5, 1.0] {
            let est = sup_grad(
                &saddle(),
                &Region::Ball(Ball::new(vec![0.0, 0.0], r)),
                &CertifyParams::with_tolerance(1e-8),
            )
            .unwrap();
            assert_abs_diff_eq!(est.value, 2.0 * r, epsilon = 1e-6 * r);
            assert!(est.error_bound <= 1e-7 * est.value);
        }
    }

    #[test]
    fn cubic_sup_on_unit_ball_is_three() {
        // |grad (x^3 - 3xy^2)| = 3(x^2 + y^2).
        let est = sup_grad(
            &cubic(),
            &Region::Ball(Ball::new(vec![0.0, 0.0], 1.0)),
            &CertifyParams::with_tolerance(1e-8),
        )
        .unwrap();
        assert_abs_diff_eq!(est.value, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn sphere_sup_in_3d() {
        // u = x^2 - z^2: |grad| = 2 sqrt(x^2 + z^2), sup over B(0,1) = 2.
        let u =
            HarmonicFunction::polynomial(3, vec![(vec![2, 0, 0], 1.0), (vec![0, 0, 2], -1.0)])
                .unwrap();
        let est = sup_grad(
            &u,
            &Region::Ball(Ball::new(vec![0.0, 0.0, 0.0], 1.0)),
            &CertifyParams::with_tolerance(1e-6),
        )
        .unwrap();
        assert_abs_diff_eq!(est.value, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn homogeneous_doubling_ratio_is_bitwise_exact() {
        // The B&B must make identical decisions for B(0,r) and B(0,2r)
        // when the scale factor is a power of two.
        let u = cubic();
        let p = CertifyParams::with_tolerance(1e-3);
        let e1 = sup_grad(&u, &Region::Ball(Ball::new(vec![0.0, 0.0], 0.125)), &p).unwrap();
        let e2 = sup_grad(&u, &Region::Ball(Ball::new(vec![0.0, 0.0], 0.25)), &p).unwrap();
        // degree 3 => |grad| homogeneous of degree 2 => ratio exactly 4.
        assert_eq!(e2.value, 4.0 * e1.value);
    }

    #[test]
    fn sampled_below_certified_upper() {
        let u = cubic();
        let region = Region::Box(BoxRegion::cube(&[0.1, 0.2], 0.5));
        let s = sup_grad_sampled(&u, &region, 9).unwrap();
        let c = sup_grad(&u, &region, &CertifyParams::with_tolerance(1e-6)).unwrap();
        assert!(s.value <= c.value + c.error_bound + 1e-12);
    }

    #[test]
    fn sup_on_box_hits_corner() {
        // sup of 2|x| over the cube [-1/2,1/2]^2 is sqrt(2).
        let est = sup_grad(
            &saddle(),
            &Region::Box(BoxRegion::cube(&[0.0, 0.0], 1.0)),
            &CertifyParams::with_tolerance(1e-9),
        )
        .unwrap();
        assert_abs_diff_eq!(est.value, std::f64::consts::SQRT_2, epsilon = 1e-8);
    }

    #[test]
    fn box_cap_ball_sup() {
        // Box [0.3, 0.6]^2 cap B(0, 0.5): sup of 2|x| = 1 on the arc.
        let region = Region::BoxCapBall(
            BoxRegion::new(vec![0.3, 0.3], vec![0.6, 0.6]),
            Ball::new(vec![0.0, 0.0], 0.5),
        );
        let est = sup_grad(&saddle(), &region, &CertifyParams::with_tolerance(1e-4)).unwrap();
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn inf_decision_below_at_critical_point() {
        let u = saddle();
        let region = Region::Box(BoxRegion::cube(&[0.0, 0.0], 0.2));
        let d = inf_grad_decide(&u, &region, 1e-3, &CertifyParams::default()).unwrap();
        assert_eq!(d, InfDecision::Below);
    }

    #[test]
    fn inf_decision_above_away_from_zero() {
        let u = saddle();
        // On the cell around (0.4, 0), |grad| = 2|x| >= 0.6.
        let region = Region::Box(BoxRegion::cube(&[0.4, 0.0], 0.2));
        let d = inf_grad_decide(&u, &region, 0.5, &CertifyParams::default()).unwrap();
        assert_eq!(d, InfDecision::AtOrAbove);
    }

    #[test]
    fn inf_value_on_offset_box() {
        let u = saddle();
        // min of 2|x| over box [0.3,0.5]x[-0.1,0.1] is 0.6.
        let region = Region::Box(BoxRegion::new(vec![0.3, -0.1], vec![0.5, 0.1]));
        let est = inf_grad(&u, &region, 1e-6, &CertifyParams::default()).unwrap();
        assert_abs_diff_eq!(est.value, 0.6, epsilon = 1e-5);
    }

    #[test]
    fn charge_potential_sup_certifies() {
        let u = HarmonicFunction::point_charges(
            2,
            vec![crate::harmonic::Charge {
                location: vec![3.0, 3.0],
                charge: 1.0,
            }],
        )
        .unwrap();
        // |grad u| = 1/r, maximized at the box corner closest to the charge.
        let region = Region::Box(BoxRegion::cube(&[0.0, 0.0], 1.0));
        let est = sup_grad(&u, &region, &CertifyParams::with_tolerance(1e-7)).unwrap();
        let expected = 1.0 / crate::geom::dist(&[0.5, 0.5], &[3.0, 3.0]);
        assert_abs_diff_eq!(est.value, expected, epsilon = 1e-6);
    }

    #[test]
    fn rotation_equivariance_within_error() {
        let u = cubic();
        let theta = 0.7f64;
        let rot = vec![
            vec![theta.cos(), -theta.sin()],
            vec![theta.sin(), theta.cos()],
        ];
        let rotated =
            HarmonicFunction::from_poly(u.as_poly().unwrap().compose_linear(&rot)).unwrap();
        let p = CertifyParams::with_tolerance(1e-7);
        let b = Region::Ball(Ball::new(vec![0.1, -0.2], 0.3));
        // rotate the query center by the inverse map for the composed function
        let c = [0.1f64, -0.2f64];
        let c_rot = [
            rot[0][0] * c[0] + rot[1][0] * c[1],
            rot[0][1] * c[0] + rot[1][1] * c[1],
        ];
        let b_rot = Region::Ball(Ball::new(c_rot.to_vec(), 0.3));
        let e1 = sup_grad(&u, &b, &p).unwrap();
        let e2 = sup_grad(&rotated, &b_rot, &p).unwrap();
        assert!((e1.value - e2.value).abs() <= e1.error_bound + e2.error_bound + 1e-9);
    }

    #[test]
    fn homogeneity_scaling_within_error() {
        // sup over B(0, 3r) = 3^{d-1} sup over B(0, r) for homogeneous u,
        // within combined certification error (factor 3 is not exact in fp).
        let u = cubic();
        let p = CertifyParams::with_tolerance(1e-9);
        let e1 = sup_grad(&u, &Region::Ball(Ball::new(vec![0.0, 0.0], 0.1)), &p).unwrap();
        let e3 = sup_grad(&u, &Region::Ball(Ball::new(vec![0.0, 0.0], 0.3)), &p).unwrap();
        let lhs = e3.value;
        let rhs = 9.0 * e1.value;
        assert!((lhs - rhs).abs() <= 9.0 * e1.error_bound + e3.error_bound + 1e-9 * rhs);
    }
}
