//! Quadrature: Gauss-Legendre rules, sphere rules, and the ball / sphere
//! norms built from them.
//!
//! Spheres use product rules (equispaced angles in n = 2, Gauss-Legendre in
//! cos(theta) times equispaced longitudes in n = 3, and a recursive polar
//! product as the fallback in higher dimensions). For polynomial integrands
//! the n = 2, 3 rules are exact once the order passes the degree, so the
//! refinement loop typically certifies at machine accuracy in one step.

use crate::error::{Result, UclabError};
use crate::geom::Ball;
use crate::harmonic::{EstimateMode, HarmonicFunction, NormEstimate};

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        // Chebyshev initial guess, then Newton on P_k.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(k, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(k, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Newton iterates from the Chebyshev guess arrive in descending order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_and_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let pj = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = pj;
    }
    let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_n = pi^{n/2} / Gamma(n/2 + 1), by the usual two-step recursion.
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// Surface area of the unit sphere S^{n-1}.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Nodes and weights integrating over the unit sphere S^{n-1}
/// (weights sum to its surface area).
pub fn sphere_rule(dim: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    assert!(dim >= 2);
    let m = order.max(4);
    match dim {
        2 => {
            let w = 2.0 * std::f64::consts::PI / m as f64;
            (0..m)
                .map(|j| {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    (vec![th.cos(), th.sin()], w)
                })
                .collect()
        }
        3 => {
            let k = m.div_ceil(2);
            let (tn, tw) = gauss_legendre(k);
            let mphi = 2 * k;
            let wphi = 2.0 * std::f64::consts::PI / mphi as f64;
            let mut out = Vec::with_capacity(k * mphi);
            for (t, wt) in tn.iter().zip(&tw) {
                let s = (1.0 - t * t).max(0.0).sqrt();
                for j in 0..mphi {
                    let phi = 2.0 * std::f64::consts::PI * j as f64 / mphi as f64;
                    out.push((vec![s * phi.cos(), s * phi.sin(), *t], wt * wphi));
                }
            }
            out
        }
        _ => {
            // Recursive polar product: S^{n-1} = [0, pi] x S^{n-2} with
            // sin^{n-2}(theta) folded into the weights.
            let inner = sphere_rule(dim - 1, order);
            let k = m;
            let (tn, tw) = gauss_legendre(k);
            let mut out = Vec::with_capacity(k * inner.len());
            for (t, wt) in tn.iter().zip(&tw) {
                let theta = 0.5 * std::f64::consts::PI * (t + 1.0);
                let jac = 0.5 * std::f64::consts::PI * theta.sin().powi(dim as i32 - 2);
                for (omega, wo) in &inner {
                    let mut x = Vec::with_capacity(dim);
                    x.push(theta.cos());
                    for v in omega {
                        x.push(theta.sin() * v);
                    }
                    out.push((x, wt * jac * wo));
                }
            }
            out
        }
    }
}

fn sphere_integral_once<F>(f: &F, ball: &Ball, order: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let dim = ball.dim();
    let rule = sphere_rule(dim, order);
    let scale = ball.radius.powi(dim as i32 - 1);
    let mut acc = 0.0;
    for (omega, w) in &rule {
        let x: Vec<f64> = ball
            .center
            .iter()
            .zip(omega)
            .map(|(c, o)| c + ball.radius * o)
            .collect();
        acc += w * f(&x)?;
    }
    Ok(acc * scale)
}

/// Integral of `f` over the sphere bounding `ball`, refined by doubling the
/// order until the relative change drops below `tolerance`.
pub fn sphere_integral<F>(f: &F, ball: &Ball, base_order: usize, tolerance: f64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut order = base_order.max(8);
    let mut prev = sphere_integral_once(f, ball, order)?;
    for _ in 0..12 {
        order *= 2;
        let next = sphere_integral_once(f, ball, order)?;
        let change = (next - prev).abs();
        if change <= tolerance * next.abs().max(f64::MIN_POSITIVE) {
            return Ok((next, change));
        }
        prev = next;
    }
    Err(UclabError::NonConvergence {
        achieved: f64::NAN,
        steps: 12,
        budget: order,
    })
}

fn ball_integral_once<F>(f: &F, ball: &Ball, radial: usize, angular: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let dim = ball.dim();
    let (rn, rw) = gauss_legendre(radial);
    let rule = sphere_rule(dim, angular);
    let mut acc = 0.0;
    for (t, wt) in rn.iter().zip(&rw) {
        let rho = 0.5 * ball.radius * (t + 1.0);
        let jac = 0.5 * ball.radius * rho.powi(dim as i32 - 1);
        let mut shell = 0.0;
        for (omega, wo) in &rule {
            let x: Vec<f64> = ball
                .center
                .iter()
                .zip(omega)
                .map(|(c, o)| c + rho * o)
                .collect();
            shell += wo * f(&x)?;
        }
        acc += wt * jac * shell;
    }
    Ok(acc)
}

/// Integral of `f` over the solid ball with order-doubling refinement.
pub fn ball_integral<F>(
    f: &F,
    ball: &Ball,
    base_radial: usize,
    base_angular: usize,
    tolerance: f64,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut radial = base_radial.max(4);
    let mut angular = base_angular.max(8);
    let mut prev = ball_integral_once(f, ball, radial, angular)?;
    for _ in 0..10 {
        radial *= 2;
        angular *= 2;
        let next = ball_integral_once(f, ball, radial, angular)?;
        let change = (next - prev).abs();
        if change <= tolerance * next.abs().max(f64::MIN_POSITIVE) {
            return Ok((next, change));
        }
        prev = next;
    }
    Err(UclabError::NonConvergence {
        achieved: f64::NAN,
        steps: 10,
        budget: radial * angular,
    })
}

/// Default quadrature orders: 32 radial x 64 angular nodes.
pub const DEFAULT_RADIAL_ORDER: usize = 32;
pub const DEFAULT_ANGULAR_ORDER: usize = 64;

/// Mean of |grad u|^2 over a ball (the bracket average of the gradient).
pub fn mean_square_grad(
    u: &HarmonicFunction,
    ball: &Ball,
    tolerance: f64,
) -> Result<NormEstimate> {
    u.check_region(&crate::geom::Region::Ball(ball.clone()))?;
    let f = |x: &[f64]| -> Result<f64> {
        let g = u.gradient_at(x)?;
        Ok(g.iter().map(|v| v * v).sum())
    };
    let (integral, change) = ball_integral(
        &f,
        ball,
        DEFAULT_RADIAL_ORDER,
        DEFAULT_ANGULAR_ORDER,
        tolerance,
    )?;
    let vol = unit_ball_volume(ball.dim()) * ball.radius.powi(ball.dim() as i32);
    Ok(NormEstimate {
        value: integral / vol,
        error_bound: change / vol,
        mode: EstimateMode::Certified,
    })
}

/// L^2 norm of u over the sphere bounding `ball` (surface measure).
pub fn sphere_l2_norm(u: &HarmonicFunction, ball: &Ball, tolerance: f64) -> Result<NormEstimate> {
    u.check_region(&crate::geom::Region::Ball(ball.clone()))?;
    let f = |x: &[f64]| -> Result<f64> {
        let v = u.evaluate(x)?;
        Ok(v * v)
    };
    let (integral, change) = sphere_integral(&f, ball, DEFAULT_ANGULAR_ORDER, tolerance)?;
    let value = integral.max(0.0).sqrt();
    let err = if value > 0.0 {
        0.5 * change / value
    } else {
        change.sqrt()
    };
    Ok(NormEstimate {
        value,
        error_bound: err,
        mode: EstimateMode::Certified,
    })
}

/// Average of `f` over the sphere bounding `ball`.
pub fn sphere_mean<F>(f: &F, ball: &Ball, base_order: usize, tolerance: f64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let (integral, change) = sphere_integral(f, ball, base_order, tolerance)?;
    let area = unit_sphere_area(ball.dim()) * ball.radius.powi(ball.dim() as i32 - 1);
    Ok((integral / area, change / area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (n, w) = gauss_legendre(5);
        // integral of x^8 over [-1,1] = 2/9
        let i: f64 = n.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_abs_diff_eq!(i, 2.0 / 9.0, epsilon = 1e-13);
    }

    #[test]
    fn sphere_areas() {
        for dim in [2usize, 3, 4] {
            let rule = sphere_rule(dim, 24);
            let total: f64 = rule.iter().map(|(_, w)| w).sum();
            assert_abs_diff_eq!(total, unit_sphere_area(dim), epsilon = 1e-9);
        }
    }

    #[test]
    fn mean_square_grad_of_linear_is_one() {
        let u = HarmonicFunction::polynomial(2, vec![(vec![1, 0], 1.0)]).unwrap();
        let est = mean_square_grad(&u, &Ball::new(vec![0.3, -0.1], 0.7), 1e-10).unwrap();
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_square_grad_saddle_unit_disk() {
        // mean of 4(x^2+y^2) over the unit disk = 2.
        let u =
            HarmonicFunction::polynomial(2, vec![(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
        let est = mean_square_grad(&u, &Ball::new(vec![0.0, 0.0], 1.0), 1e-10).unwrap();
        assert_abs_diff_eq!(est.value, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn mean_square_grad_cubic_unit_disk() {
        // mean of 9(x^2+y^2)^2 over the unit disk = 3.
        let u =
            HarmonicFunction::polynomial(2, vec![(vec![3, 0], 1.0), (vec![1, 2], -3.0)]).unwrap();
        let est = mean_square_grad(&u, &Ball::new(vec![0.0, 0.0], 1.0), 1e-10).unwrap();
        assert_abs_diff_eq!(est.value, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn sphere_l2_of_x1_on_unit_circle() {
        let u = HarmonicFunction::polynomial(2, vec![(vec![1, 0], 1.0)]).unwrap();
        let est = sphere_l2_norm(&u, &Ball::new(vec![0.0, 0.0], 1.0), 1e-12).unwrap();
        assert_abs_diff_eq!(est.value, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sphere_l2_scales_by_homogeneity() {
        // degree-d harmonic: ||u||_{L2(dB_r)} = r^{d + (n-1)/2} ||u||_{L2(dB_1)}.
        let u =
            HarmonicFunction::polynomial(2, vec![(vec![3, 0], 1.0), (vec![1, 2], -3.0)]).unwrap();
        let n1 = sphere_l2_norm(&u, &Ball::new(vec![0.0, 0.0], 1.0), 1e-12).unwrap();
        let nh = sphere_l2_norm(&u, &Ball::new(vec![0.0, 0.0], 0.5), 1e-12).unwrap();
        let expected = 0.5f64.powf(3.0 + 0.5) * n1.value;
        assert_abs_diff_eq!(nh.value, expected, epsilon = 1e-12);
    }

    #[test]
    fn sphere_mean_of_squared_coordinate() {
        // mean of (y1 - x1)^2 over the sphere of radius R centered at x is R^2/n.
        let ball = Ball::new(vec![0.2, -0.3, 0.1], 0.4);
        let f = |y: &[f64]| -> crate::error::Result<f64> {
            let d = y[0] - 0.2;
            Ok(d * d)
        };
        let (m, _) = sphere_mean(&f, &ball, 16, 1e-12).unwrap();
        assert_abs_diff_eq!(m, 0.4 * 0.4 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_cross_check_mixed_degrees_radius_half() {
        // u = x + (x^2 - y^2) at radius 1/2: independent dense trapezoid oracle.
        let u = HarmonicFunction::polynomial(
            2,
            vec![(vec![1, 0], 1.0), (vec![2, 0], 1.0), (vec![0, 2], -1.0)],
        )
        .unwrap();
        let est = sphere_l2_norm(&u, &Ball::new(vec![0.0, 0.0], 0.5), 1e-12).unwrap();
        // Oracle: 10x node count, plain Riemann sum on the circle.
        let m = 40960;
        let r = 0.5;
        let mut acc = 0.0;
        for j in 0..m {
            let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let x = [r * th.cos(), r * th.sin()];
            let v = u.evaluate(&x).unwrap();
            acc += v * v;
        }
        acc *= 2.0 * std::f64::consts::PI * r / m as f64;
        assert_abs_diff_eq!(est.value, acc.sqrt(), epsilon = 1e-10);
    }
}
