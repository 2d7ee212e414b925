//! Doubling indices of |grad u| and their monotonicity / comparability
//! diagnostics: the pointwise sup-ratio index N(x, r), its mean-square
//! variant, the maximal index of a cube (a grid lower bound), the three
//! spheres defect, and the large-scale decay check.

use crate::error::{Result, UclabError};
use crate::geom::{Ball, BoxRegion, Region};
use crate::harmonic::HarmonicFunction;
use crate::quad::{mean_square_grad, sphere_l2_norm};
use crate::supnorm::{sup_grad, CertifyParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Below this certified supremum the gradient is treated as vanishing.
pub const VANISH_THRESHOLD: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoublingVariant {
    SupRatio,
    L2Ratio,
    MaximalCube,
}

/// A measured doubling index with propagated certification error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoublingReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub index_value: f64,
    pub error_bound: f64,
    pub variant: DoublingVariant,
}

impl DoublingReport {
    pub fn lower(&self) -> f64 {
        self.index_value - self.error_bound
    }

    pub fn upper(&self) -> f64 {
        self.index_value + self.error_bound
    }
}

fn log_ratio_report(
    center: &[f64],
    radius: f64,
    num: (f64, f64, f64), // (value, lower, upper)
    den: (f64, f64, f64),
    variant: DoublingVariant,
) -> Result<DoublingReport> {
    let (nv, nl, nu) = num;
    let (dv, dl, du) = den;
    if dl <= VANISH_THRESHOLD {
        return Err(UclabError::VanishingGradient { value: dv });
    }
    let value = (nv / dv).ln();
    let hi = (nu / dl).ln();
    let lo = (nl.max(f64::MIN_POSITIVE) / du).ln();
    let err = (hi - value).max(value - lo).max(0.0);
    Ok(DoublingReport {
        center: center.to_vec(),
        radius,
        index_value: value,
        error_bound: err,
        variant,
    })
}

/// N(x, r) = log( sup_{B(x, ratio r)} |grad u| / sup_{B(x, r)} |grad u| ).
/// The classical definition uses ratio = 2; censuses use 10n.
pub fn doubling_index_with_ratio(
    u: &HarmonicFunction,
    x: &[f64],
    r: f64,
    ratio: f64,
    params: &CertifyParams,
) -> Result<DoublingReport> {
    if r <= 0.0 || ratio <= 1.0 {
        return Err(UclabError::InvalidParameter {
            name: "radius/ratio".into(),
            reason: "need r > 0 and ratio > 1".into(),
        });
    }
    let inner = sup_grad(u, &Region::Ball(Ball::new(x.to_vec(), r)), params)?;
    if inner.lower() <= VANISH_THRESHOLD && inner.upper() <= VANISH_THRESHOLD {
        return Err(UclabError::VanishingGradient { value: inner.value });
    }
    let outer = sup_grad(u, &Region::Ball(Ball::new(x.to_vec(), ratio * r)), params)?;
    log_ratio_report(
        x,
        r,
        (outer.value, outer.lower(), outer.upper()),
        (inner.value, inner.lower(), inner.upper()),
        DoublingVariant::SupRatio,
    )
}

pub fn doubling_index(
    u: &HarmonicFunction,
    x: &[f64],
    r: f64,
    params: &CertifyParams,
) -> Result<DoublingReport> {
    doubling_index_with_ratio(u, x, r, 2.0, params)
}

/// Mean-square variant: N2(x, r) = log of the ratio of ball averages of
/// |grad u|^2 at radii 2r and r. For homogeneous degree-d instances this is
/// exactly 2(d-1) log 2.
pub fn l2_doubling_index(
    u: &HarmonicFunction,
    x: &[f64],
    r: f64,
    tolerance: f64,
) -> Result<DoublingReport> {
    let inner = mean_square_grad(u, &Ball::new(x.to_vec(), r), tolerance)?;
    if inner.value <= VANISH_THRESHOLD {
        return Err(UclabError::VanishingGradient { value: inner.value });
    }
    let outer = mean_square_grad(u, &Ball::new(x.to_vec(), 2.0 * r), tolerance)?;
    log_ratio_report(
        x,
        r,
        (outer.value, outer.lower(), outer.upper()),
        (inner.value, inner.lower(), inner.upper()),
        DoublingVariant::L2Ratio,
    )
}

/// Parameters for the grid lower bound on the maximal doubling index N(Q).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalDoublingParams {
    /// Grid points per axis inside the cube.
    pub grid_per_axis: usize,
    /// Dyadic ladder length; rung k uses r = side * 2^{-k}.
    pub ladder_rungs: usize,
    /// Ball ratio in the maximal index; defaults to 10n when `None`.
    pub ratio: Option<f64>,
    /// Certification settings for each supremum.
    pub sup_tolerance: f64,
}

impl Default for MaximalDoublingParams {
    fn default() -> Self {
        MaximalDoublingParams {
            grid_per_axis: 9,
            ladder_rungs: 8,
            ratio: None,
            sup_tolerance: 1e-4,
        }
    }
}

/// Grid lower bound for the maximal doubling index of a cube, with the grid
/// and ladder that produced it recorded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalDoublingReport {
    pub best: DoublingReport,
    pub grid_per_axis: usize,
    pub ladder: Vec<f64>,
    pub ratio: f64,
    /// Always true: the grid can only underestimate the true supremum.
    pub is_lower_bound: bool,
}

fn grid_points(q: &BoxRegion, per_axis: usize) -> Vec<Vec<f64>> {
    let n = q.dim();
    let m = per_axis.max(1);
    let mut pts = Vec::with_capacity(m.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        let x: Vec<f64> = (0..n)
            .map(|i| q.lo[i] + (q.hi[i] - q.lo[i]) * (idx[i] as f64 + 0.5) / m as f64)
            .collect();
        pts.push(x);
        let mut k = 0;
        loop {
            if k == n {
                return pts;
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

/// Lower bound for N(Q) = sup over x in Q, r <= side, of the ratio-10n
/// doubling index, maximized over a point grid and a dyadic radius ladder.
pub fn maximal_doubling(
    u: &HarmonicFunction,
    q: &BoxRegion,
    params: &MaximalDoublingParams,
) -> Result<MaximalDoublingReport> {
    let n = q.dim();
    let side = q.widths()[0];
    let ratio = params.ratio.unwrap_or(10.0 * n as f64);
    let ladder: Vec<f64> = (0..params.ladder_rungs.max(1))
        .map(|k| side * 0.5f64.powi(k as i32))
        .collect();
    let certify = CertifyParams::with_tolerance(params.sup_tolerance);
    let pts = grid_points(q, params.grid_per_axis);

    let jobs: Vec<(usize, usize)> = (0..pts.len())
        .flat_map(|i| (0..ladder.len()).map(move |j| (i, j)))
        .collect();
    let reports: Result<Vec<DoublingReport>> = jobs
        .par_iter()
        .map(|(i, j)| doubling_index_with_ratio(u, &pts[*i], ladder[*j], ratio, &certify))
        .collect();
    let reports = reports?;
    let best = reports
        .into_iter()
        .max_by(|a, b| a.lower().total_cmp(&b.lower()))
        .ok_or(UclabError::EmptySet)?;
    Ok(MaximalDoublingReport {
        best: DoublingReport {
            variant: DoublingVariant::MaximalCube,
            ..best
        },
        grid_per_axis: params.grid_per_axis,
        ladder,
        ratio,
        is_lower_bound: true,
    })
}

/// Three spheres defect:
/// log||u||_{r2} - alpha log||u||_{r1} - (1 - alpha) log||u||_{r3},
/// with alpha = log(r3/r2)/log(r3/r1). Nonpositive (up to quadrature error)
/// by the three spheres theorem; zero for a single solid harmonic.
pub fn three_spheres_defect(
    u: &HarmonicFunction,
    x: &[f64],
    radii: (f64, f64, f64),
    tolerance: f64,
) -> Result<f64> {
    let (r1, r2, r3) = radii;
    if !(0.0 < r1 && r1 <= r2 && r2 <= r3) {
        return Err(UclabError::InvalidParameter {
            name: "radii".into(),
            reason: "need 0 < r1 <= r2 <= r3".into(),
        });
    }
    if r1 == r2 {
        return Ok(0.0); // alpha = 1 degenerate case
    }
    let alpha = (r3 / r2).ln() / (r3 / r1).ln();
    let n1 = sphere_l2_norm(u, &Ball::new(x.to_vec(), r1), tolerance)?;
    let n2 = sphere_l2_norm(u, &Ball::new(x.to_vec(), r2), tolerance)?;
    let n3 = sphere_l2_norm(u, &Ball::new(x.to_vec(), r3), tolerance)?;
    for est in [&n1, &n2, &n3] {
        if est.value <= VANISH_THRESHOLD {
            return Err(UclabError::VanishingGradient { value: est.value });
        }
    }
    Ok(n2.value.ln() - alpha * n1.value.ln() - (1.0 - alpha) * n3.value.ln())
}

/// Result of the large-scale decay check driven by a confirmed doubling
/// index: inapplicable when the doubling at scale tr is below the threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BigScaleReport {
    pub applicable: bool,
    pub doubling_at_tr: Option<DoublingReport>,
    /// e(t) = log(sup_{B(x,tr)} / sup_{B(x,r)}) / log t.
    pub measured_exponent: Option<f64>,
    pub threshold_over_6: f64,
    pub slack: f64,
    pub satisfied: Option<bool>,
}

/// Checks sup_{B(x,tr)} <= C t^{N/6} sup_{B(x,r)} in exponent form.
pub fn big_scale_doubling_check(
    u: &HarmonicFunction,
    x: &[f64],
    r: f64,
    t: f64,
    n_threshold: f64,
    slack: f64,
    params: &CertifyParams,
) -> Result<BigScaleReport> {
    if !(0.0 < t && t < 0.5) {
        return Err(UclabError::InvalidParameter {
            name: "t".into(),
            reason: "need 0 < t < 1/2".into(),
        });
    }
    let threshold_over_6 = n_threshold / 6.0;
    let d = doubling_index(u, x, t * r, params)?;
    if d.index_value < n_threshold {
        return Ok(BigScaleReport {
            applicable: false,
            doubling_at_tr: Some(d),
            measured_exponent: None,
            threshold_over_6,
            slack,
            satisfied: None,
        });
    }
    let small = sup_grad(u, &Region::Ball(Ball::new(x.to_vec(), t * r)), params)?;
    let big = sup_grad(u, &Region::Ball(Ball::new(x.to_vec(), r)), params)?;
    if small.lower() <= VANISH_THRESHOLD {
        return Err(UclabError::VanishingGradient { value: small.value });
    }
    let e = (small.value / big.value).ln() / t.ln();
    Ok(BigScaleReport {
        applicable: true,
        doubling_at_tr: Some(d),
        measured_exponent: Some(e),
        threshold_over_6,
        slack,
        satisfied: Some(e >= threshold_over_6 - slack),
    })
}

// ---------------------------------------------------------------------------
// Three-way cube classification for censuses.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeClass {
    Good,
    Bad,
    Undecided,
}

/// Margins and proxies for classifying a cube against a threshold N.
///
/// A cube is bad only when the certified grid lower bound clears N plus a
/// margin; good only when the comparability proxy (offset + scale times the
/// single-rung index at r = side) stays below N minus the margin; undecided
/// otherwise and counted pessimistically by all censuses.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub grid_per_axis: usize,
    pub ladder_rungs: usize,
    pub ratio: Option<f64>,
    pub margin_frac: f64,
    /// Empirical comparability constants: upper proxy = offset + scale * single-rung index.
    pub comp_scale: f64,
    pub comp_offset: f64,
    pub sup_tolerance: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            grid_per_axis: 3,
            ladder_rungs: 4,
            ratio: None,
            margin_frac: 0.05,
            comp_scale: 3.0,
            comp_offset: 0.0,
            sup_tolerance: 1e-2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubeClassification {
    pub class: CubeClass,
    /// Certified grid lower bound on N(q).
    pub lower_bound: f64,
    /// Empirical comparability upper proxy for N(q).
    pub upper_proxy: f64,
}

pub fn classify_cube(
    u: &HarmonicFunction,
    q: &BoxRegion,
    threshold_n: f64,
    params: &ClassifyParams,
) -> Result<CubeClassification> {
    let n = q.dim();
    let side = q.widths()[0];
    let ratio = params.ratio.unwrap_or(10.0 * n as f64);
    let certify = CertifyParams::with_tolerance(params.sup_tolerance);
    let pts = grid_points(q, params.grid_per_axis);

    let mut lower = 0.0f64;
    let mut top_rung_upper = 0.0f64;
    for x in &pts {
        for k in 0..params.ladder_rungs.max(1) {
            let r = side * 0.5f64.powi(k as i32);
            let rep = doubling_index_with_ratio(u, x, r, ratio, &certify)?;
            lower = lower.max(rep.lower());
            if k == 0 {
                top_rung_upper = top_rung_upper.max(rep.upper());
            }
        }
    }
    let upper_proxy = params.comp_offset + params.comp_scale * top_rung_upper;
    let margin = params.margin_frac * threshold_n;
    let class = if lower > threshold_n + margin {
        CubeClass::Bad
    } else if upper_proxy < threshold_n - margin {
        CubeClass::Good
    } else {
        CubeClass::Undecided
    };
    Ok(CubeClassification {
        class,
        lower_bound: lower,
        upper_proxy,
    })
}
