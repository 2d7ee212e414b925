//! The headline experiments: bad-cube censuses against their predicted
//! ceilings, hyperplane and capacity censuses, width of the bad set,
//! sublevel-set content, effective critical sets, the recursion dynamic
//! program, and propagation-exponent fits.
//!
//! Census classifications are three-way (bad / good / undecided) and every
//! ceiling comparison counts undecided cubes as bad, so a reported census is
//! always a valid upper-bound test of the claim it probes.

use crate::content::{hausdorff_content, ContentEstimate};
use crate::doubling::{
    classify_cube, maximal_doubling, ClassifyParams, CubeClass, MaximalDoublingParams,
};
use crate::error::{Result, UclabError};
use crate::geom::{norm, Ball, BoxRegion, Region};
use crate::gmt::{riesz_capacity_lower, CapacityReport, MeasureFamily};
use crate::harmonic::HarmonicFunction;
use crate::lattice::{Cube, GridSet};
use crate::quad::sphere_mean;
use crate::supnorm::{inf_grad_decide, sup_grad, CertifyParams, InfDecision};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Experiments whose mathematical preconditions fail do not error out; they
/// report themselves as inapplicable (CLI exit code 2).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Applicability<T> {
    Ran(T),
    Inapplicable { reason: String },
}

impl<T> Applicability<T> {
    pub fn ran(self) -> Option<T> {
        match self {
            Applicability::Ran(t) => Some(t),
            Applicability::Inapplicable { .. } => None,
        }
    }

    pub fn is_inapplicable(&self) -> bool {
        matches!(self, Applicability::Inapplicable { .. })
    }
}

/// Census parameters shared by the cube censuses.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensusParams {
    /// Subdivision parameter: (2A+1) children per axis.
    pub a: u32,
    /// Content exponent offset in the ceiling (n - 2 + delta).
    pub delta: f64,
    /// Precondition slack: requires N(Q) <= (1+c) N.
    pub c: f64,
    /// Hyperplane ceiling factor.
    pub eta: f64,
    pub classify: ClassifyParams,
    pub precondition_grid: MaximalDoublingParams,
}

impl Default for CensusParams {
    fn default() -> Self {
        CensusParams {
            a: 4,
            delta: 0.5,
            c: 0.2,
            eta: 0.1,
            classify: ClassifyParams::default(),
            precondition_grid: MaximalDoublingParams {
                grid_per_axis: 5,
                ladder_rungs: 4,
                ..Default::default()
            },
        }
    }
}

/// One generation of a bad-cube census.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensusResult {
    pub level: u32,
    pub threshold_n: f64,
    pub bad_count: u64,
    pub undecided_count: u64,
    pub good_count: u64,
    pub total_count: u64,
    /// Predicted ceiling (1/2 (2A+1)^{n-2+delta})^level, from the formula,
    /// never from data.
    pub bound: f64,
    pub ceiling_respected: bool,
    pub context: CensusContext,
    /// Bad and undecided cubes, for visual audit.
    pub classification_map: GridSet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensusContext {
    pub a: u32,
    pub delta: f64,
    pub eta: Option<f64>,
    pub c: f64,
}

fn census_ceiling(n: usize, a: u32, delta: f64, level: u32) -> f64 {
    let b = (2 * a + 1) as f64;
    (0.5 * b.powf(n as f64 - 2.0 + delta)).powi(level as i32)
}

/// Classify the children of `frontier` cubes, pruning descendants of good
/// cubes (maximal doubling is monotone under inclusion, so good is final).
fn classify_generation(
    u: &HarmonicFunction,
    frontier: &[Cube],
    a: u32,
    threshold_n: f64,
    params: &ClassifyParams,
) -> Result<(Vec<Cube>, Vec<Cube>, u64)> {
    let mut children: Vec<Cube> = Vec::new();
    for q in frontier {
        children.extend(q.subdivide(a)?);
    }
    let classes: Result<Vec<CubeClass>> = children
        .par_iter()
        .map(|q| classify_cube(u, &q.to_box(), threshold_n, params).map(|c| c.class))
        .collect();
    let classes = classes?;
    let mut bad = Vec::new();
    let mut undecided = Vec::new();
    let mut good = 0u64;
    for (q, class) in children.into_iter().zip(classes) {
        match class {
            CubeClass::Bad => bad.push(q),
            CubeClass::Undecided => undecided.push(q),
            CubeClass::Good => good += 1,
        }
    }
    Ok((bad, undecided, good))
}

/// Bad-cube census of the unit cube across generations, checked against the
/// predicted ceilings. Precondition: N(Q) <= (1+c) N for the measured lower
/// bound, otherwise the experiment is inapplicable.
pub fn bad_cube_census(
    u: &HarmonicFunction,
    threshold_n: f64,
    generations: u32,
    params: &CensusParams,
) -> Result<Applicability<Vec<CensusResult>>> {
    let n = u.dim();
    let root = Cube::root(n);
    let nq = maximal_doubling(u, &root.to_box(), &params.precondition_grid)?;
    let limit = (1.0 + params.c) * threshold_n;
    if nq.best.lower() > limit {
        return Ok(Applicability::Inapplicable {
            reason: format!(
                "measured N(Q) lower bound {:.4} exceeds (1+c) N = {:.4}",
                nq.best.lower(),
                limit
            ),
        });
    }

    let mut results = Vec::with_capacity(generations as usize);
    // Frontier of cubes that may still contain bad descendants, plus the
    // count of good cubes pruned at each earlier generation.
    let mut frontier: Vec<Cube> = vec![root];
    let mut pruned_good: u64 = 0;
    let b_pow_n = ((2 * params.a + 1) as u64).pow(n as u32);
    for g in 1..=generations {
        let (bad, undecided, good_now) =
            classify_generation(u, &frontier, params.a, threshold_n, &params.classify)?;
        pruned_good = pruned_good * b_pow_n + good_now;
        let total = b_pow_n.pow(g); // (2A+1)^{n g}
        let bad_count = bad.len() as u64;
        let undecided_count = undecided.len() as u64;
        let good_count = total - bad_count - undecided_count;
        let bound = census_ceiling(n, params.a, params.delta, g);
        let mut map_cells: Vec<Vec<u64>> = Vec::with_capacity(bad.len() + undecided.len());
        for q in bad.iter().chain(undecided.iter()) {
            map_cells.push(q.index.clone());
        }
        let resolution = bad
            .first()
            .or(undecided.first())
            .map(|q| q.cells_per_axis())
            .unwrap_or(3);
        let classification_map = GridSet::from_cells(n, resolution, map_cells)?;
        results.push(CensusResult {
            level: g,
            threshold_n,
            bad_count,
            undecided_count,
            good_count,
            total_count: total,
            bound,
            ceiling_respected: (bad_count + undecided_count) as f64 <= bound,
            context: CensusContext {
                a: params.a,
                delta: params.delta,
                eta: None,
                c: params.c,
            },
            classification_map,
        });
        frontier = bad.into_iter().chain(undecided).collect();
        if frontier.is_empty() {
            // All remaining generations are certified all-good.
            for g2 in (g + 1)..=generations {
                let total = b_pow_n.pow(g2);
                results.push(CensusResult {
                    level: g2,
                    threshold_n,
                    bad_count: 0,
                    undecided_count: 0,
                    good_count: total,
                    total_count: total,
                    bound: census_ceiling(n, params.a, params.delta, g2),
                    ceiling_respected: true,
                    context: CensusContext {
                        a: params.a,
                        delta: params.delta,
                        eta: None,
                        c: params.c,
                    },
                    classification_map: GridSet::from_cells(n, 3, vec![])?,
                });
            }
            break;
        }
    }
    Ok(Applicability::Ran(results))
}

/// Census restricted to the hyperplane children of the unit cube, against
/// the ceiling eta (2A+1)^{n-2+delta}. Precondition: N(2Q) <= 2N.
pub fn hyperplane_census(
    u: &HarmonicFunction,
    threshold_n: f64,
    params: &CensusParams,
) -> Result<Applicability<CensusResult>> {
    let n = u.dim();
    let root = Cube::root(n);
    let two_q = root.to_scaled_box(2.0);
    let n2q = maximal_doubling(u, &two_q, &params.precondition_grid)?;
    if n2q.best.lower() > 2.0 * threshold_n {
        return Ok(Applicability::Inapplicable {
            reason: format!(
                "measured N(2Q) lower bound {:.4} exceeds 2N = {:.4}",
                n2q.best.lower(),
                2.0 * threshold_n
            ),
        });
    }
    let children = root.hyperplane_children(params.a)?;
    let classes: Result<Vec<CubeClass>> = children
        .par_iter()
        .map(|q| classify_cube(u, &q.to_box(), threshold_n, &params.classify).map(|c| c.class))
        .collect();
    let classes = classes?;
    let mut bad_count = 0u64;
    let mut undecided_count = 0u64;
    let mut map_cells = Vec::new();
    for (q, class) in children.iter().zip(&classes) {
        match class {
            CubeClass::Bad => {
                bad_count += 1;
                map_cells.push(q.index.clone());
            }
            CubeClass::Undecided => {
                undecided_count += 1;
                map_cells.push(q.index.clone());
            }
            CubeClass::Good => {}
        }
    }
    let b = (2 * params.a + 1) as f64;
    let bound = params.eta * b.powf(n as f64 - 2.0 + params.delta);
    let total = children.len() as u64;
    let resolution = children[0].cells_per_axis();
    Ok(Applicability::Ran(CensusResult {
        level: 1,
        threshold_n,
        bad_count,
        undecided_count,
        good_count: total - bad_count - undecided_count,
        total_count: total,
        bound,
        ceiling_respected: (bad_count + undecided_count) as f64 <= bound,
        context: CensusContext {
            a: params.a,
            delta: params.delta,
            eta: Some(params.eta),
            c: params.c,
        },
        classification_map: GridSet::from_cells(n, resolution, map_cells)?,
    }))
}

/// The (capacity, doubling ratio) pair for the contrapositive scatter of
/// the Riesz-capacity hyperplane lemma: whenever the capacity of the bad
/// hyperplane set reaches m, the доubling ratio should exceed 2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityCensusReport {
    pub threshold_n: f64,
    pub bad_count: u64,
    pub undecided_count: u64,
    pub capacity: Option<CapacityReport>,
    pub bad_set: GridSet,
    pub n2q_lower: f64,
    pub doubling_ratio: f64,
    pub context: CensusContext,
}

pub fn capacity_census(
    u: &HarmonicFunction,
    threshold_n: f64,
    params: &CensusParams,
) -> Result<Applicability<CapacityCensusReport>> {
    let n = u.dim();
    let root = Cube::root(n);
    let children = root.hyperplane_children(params.a)?;
    let classes: Result<Vec<CubeClass>> = children
        .par_iter()
        .map(|q| classify_cube(u, &q.to_box(), threshold_n, &params.classify).map(|c| c.class))
        .collect();
    let classes = classes?;
    let mut bad_cells = Vec::new();
    let mut bad_count = 0u64;
    let mut undecided_count = 0u64;
    for (q, class) in children.iter().zip(&classes) {
        match class {
            CubeClass::Bad => {
                bad_count += 1;
                bad_cells.push(q.index.clone());
            }
            CubeClass::Undecided => undecided_count += 1,
            CubeClass::Good => {}
        }
    }
    let resolution = children[0].cells_per_axis();
    let bad_set = GridSet::from_cells(n, resolution, bad_cells)?;
    let s = n as f64 - 2.0 + params.delta;
    let capacity = if bad_set.is_empty() {
        None
    } else {
        Some(riesz_capacity_lower(
            &bad_set,
            s,
            MeasureFamily::Uniform,
            0,
        )?)
    };
    let two_q = root.to_scaled_box(2.0);
    let n2q = maximal_doubling(u, &two_q, &params.precondition_grid)?;
    Ok(Applicability::Ran(CapacityCensusReport {
        threshold_n,
        bad_count,
        undecided_count,
        capacity,
        bad_set,
        n2q_lower: n2q.best.lower(),
        doubling_ratio: n2q.best.lower() / threshold_n,
        context: CensusContext {
            a: params.a,
            delta: params.delta,
            eta: Some(params.eta),
            c: params.c,
        },
    }))
}

/// Width measurement of the set F of points in a cube whose small-scale
/// doubling exceeds a threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WidthReport {
    pub threshold: f64,
    pub samples_in_f: usize,
    pub samples_total: usize,
    /// Minimal slab width containing all F-samples over the candidate
    /// normal directions; a lower bound within that direction family.
    pub width: f64,
    pub best_direction: Vec<f64>,
    pub directions_tried: usize,
}

/// Parameters: sample grid density, radius ladder, and direction count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WidthParams {
    pub a: u32,
    pub grid_per_axis: usize,
    pub ladder_rungs: usize,
    pub directions: usize,
    pub sup_tolerance: f64,
}

impl Default for WidthParams {
    fn default() -> Self {
        WidthParams {
            a: 4,
            grid_per_axis: 12,
            ladder_rungs: 6,
            directions: 32,
            sup_tolerance: 1e-3,
        }
    }
}

/// Samples the indicator of F = {x in q : sup_{r < diam(q)/(2A+1)} N(x, r)
/// > threshold} on a grid and reports the thinnest sample-containing slab.
pub fn width_of_bad_set(
    u: &HarmonicFunction,
    q: &BoxRegion,
    threshold: f64,
    params: &WidthParams,
) -> Result<WidthReport> {
    let n = q.dim();
    let r_max = q.diameter() / (2.0 * params.a as f64 + 1.0) * (1.0 - 1e-9);
    let certify = CertifyParams::with_tolerance(params.sup_tolerance);
    let ladder: Vec<f64> = (0..params.ladder_rungs)
        .map(|k| r_max * 0.5f64.powi(k as i32))
        .collect();
    let m = params.grid_per_axis.max(2);
    let mut pts = Vec::new();
    let mut idx = vec![0usize; n];
    'grid: loop {
        let x: Vec<f64> = (0..n)
            .map(|i| q.lo[i] + (q.hi[i] - q.lo[i]) * (idx[i] as f64 + 0.5) / m as f64)
            .collect();
        pts.push(x);
        let mut k = 0;
        loop {
            if k == n {
                break 'grid;
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
    let in_f: Vec<bool> = pts
        .par_iter()
        .map(|x| {
            for r in &ladder {
                match crate::doubling::doubling_index(u, x, *r, &certify) {
                    Ok(rep) if rep.lower() > threshold => return Ok(true),
                    Ok(_) => {}
                    Err(UclabError::VanishingGradient { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(false)
        })
        .collect::<Result<Vec<bool>>>()?;
    let f_pts: Vec<&Vec<f64>> = pts.iter().zip(&in_f).filter(|(_, b)| **b).map(|(p, _)| p).collect();
    if f_pts.is_empty() {
        return Ok(WidthReport {
            threshold,
            samples_in_f: 0,
            samples_total: pts.len(),
            width: 0.0,
            best_direction: vec![0.0; n],
            directions_tried: 0,
        });
    }
    // Candidate directions: axes plus a deterministic angular family.
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut d = vec![0.0; n];
        d[i] = 1.0;
        dirs.push(d);
    }
    if n == 2 {
        for k in 1..params.directions {
            let th = std::f64::consts::PI * k as f64 / params.directions as f64;
            dirs.push(vec![th.cos(), th.sin()]);
        }
    } else {
        // low-discrepancy-ish deterministic directions on the sphere
        for k in 0..params.directions {
            let z = -1.0 + 2.0 * (k as f64 + 0.5) / params.directions as f64;
            let phi = 2.399963229728653 * k as f64; // golden angle
            let s = (1.0 - z * z).max(0.0).sqrt();
            let mut d = vec![s * phi.cos(), s * phi.sin(), z];
            d.truncate(n);
            let nn = norm(&d);
            if nn > 0.0 {
                for v in &mut d {
                    *v /= nn;
                }
                dirs.push(d);
            }
        }
    }
    let mut best_width = f64::INFINITY;
    let mut best_dir = dirs[0].clone();
    for d in &dirs {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &f_pts {
            let t: f64 = p.iter().zip(d).map(|(a, b)| a * b).sum();
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if hi - lo < best_width {
            best_width = hi - lo;
            best_dir = d.clone();
        }
    }
    Ok(WidthReport {
        threshold,
        samples_in_f: f_pts.len(),
        samples_total: pts.len(),
        width: best_width,
        best_direction: best_dir,
        directions_tried: dirs.len(),
    })
}

/// How strictly the sublevel extraction checks the gradient normalization.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationCheck {
    Strict { tol: f64 },
    Skip,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SublevelReport {
    pub a: f64,
    pub threshold: f64,
    pub s: f64,
    pub k: u64,
    pub cells_in: usize,
    pub borderline: usize,
    pub total_cells: u64,
    /// Set when no cell could be certified either way.
    pub too_coarse: bool,
    pub set: GridSet,
    /// None when the sublevel set is empty (content zero).
    pub content: Option<ContentEstimate>,
}

/// Extracts the sublevel lattice set {certified min of |grad u| < e^{-a}}
/// at resolution 1/K and measures its content at exponent s. Borderline
/// cells are included (pessimistic for an upper-bound test).
pub fn sublevel_content(
    u: &HarmonicFunction,
    a: f64,
    s: f64,
    k: u64,
    normalization: NormalizationCheck,
    certify: &CertifyParams,
) -> Result<SublevelReport> {
    let n = u.dim();
    if let NormalizationCheck::Strict { tol } = normalization {
        let root = BoxRegion::cube(&vec![0.0; n], 1.0);
        let sup = sup_grad(u, &Region::Box(root), certify)?;
        if (sup.value - 1.0).abs() > tol {
            return Err(UclabError::InvalidParameter {
                name: "normalization".into(),
                reason: format!(
                    "certified sup_grad(Q) = {:.6} is not within {tol} of 1",
                    sup.value
                ),
            });
        }
    }
    let threshold = (-a).exp();
    let e_template = GridSet::from_cells(n, k, vec![])?;
    let total: u64 = k.pow(n as u32);
    let cell_list: Vec<Vec<u64>> = {
        let mut out = Vec::with_capacity(total as usize);
        let mut idx = vec![0u64; n];
        loop {
            out.push(idx.clone());
            let mut axis = 0;
            loop {
                if axis == n {
                    break;
                }
                idx[axis] += 1;
                if idx[axis] < k {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if idx.iter().all(|v| *v == 0) {
                break;
            }
        }
        out
    };
    let decisions: Result<Vec<InfDecision>> = cell_list
        .par_iter()
        .map(|cell| {
            let bx = e_template.cell_box(cell);
            inf_grad_decide(u, &Region::Box(bx), threshold, certify)
        })
        .collect();
    let decisions = decisions?;
    let mut in_cells = Vec::new();
    let mut borderline = 0usize;
    for (cell, d) in cell_list.into_iter().zip(decisions) {
        match d {
            InfDecision::Below => in_cells.push(cell),
            InfDecision::Borderline => {
                borderline += 1;
                in_cells.push(cell);
            }
            InfDecision::AtOrAbove => {}
        }
    }
    let too_coarse = borderline > 0 && borderline == in_cells.len() && {
        // no cell certified on either side
        in_cells.len() == total as usize
    };
    let cells_in = in_cells.len();
    let set = GridSet::from_cells(n, k, in_cells)?;
    let content = if set.is_empty() {
        None
    } else {
        Some(hausdorff_content(&set, s, 32)?)
    };
    Ok(SublevelReport {
        a,
        threshold,
        s,
        k,
        cells_in,
        borderline,
        total_cells: total,
        too_coarse,
        set,
        content,
    })
}

/// Decay curve of sublevel content across thresholds, with the fitted
/// log-slope (an estimate of beta(delta)/N0).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SublevelDecay {
    pub points: Vec<(f64, f64)>,
    pub log_slope: Option<f64>,
}

pub fn sublevel_decay(
    u: &HarmonicFunction,
    a_values: &[f64],
    s: f64,
    k: u64,
    normalization: NormalizationCheck,
    certify: &CertifyParams,
) -> Result<SublevelDecay> {
    let mut points = Vec::with_capacity(a_values.len());
    for a in a_values {
        let rep = sublevel_content(u, *a, s, k, normalization, certify)?;
        let c = rep.content.as_ref().map(|c| c.upper).unwrap_or(0.0);
        points.push((*a, c));
    }
    let finite: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, c)| *c > 0.0)
        .map(|(a, c)| (*a, c.ln()))
        .collect();
    let log_slope = if finite.len() >= 2 {
        Some(least_squares_slope(&finite).0)
    } else {
        None
    };
    Ok(SublevelDecay { points, log_slope })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = pts.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, residual)
}

/// Greedy ball cover of the detected r-effective critical cells.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalSetCover {
    pub r: f64,
    pub centers: Vec<Vec<f64>>,
    pub ball_count: usize,
    pub detected_cells: usize,
    pub borderline_cells: usize,
    pub set: GridSet,
}

/// Evaluates the effective-critical-set inequality
/// inf_{B_r(x)} |grad u|^2 < (n/16) r^{-2} avg_{dB_{2r}(x)} |u(y)-u(x)|^2
/// on cell centers and returns a greedy r-ball cover of the detections.
pub fn effective_critical_set(
    u: &HarmonicFunction,
    r: f64,
    k: u64,
    certify: &CertifyParams,
    quad_tolerance: f64,
) -> Result<CriticalSetCover> {
    let n = u.dim();
    if (k as f64) * r < 1.0 {
        return Err(UclabError::InvalidParameter {
            name: "K".into(),
            reason: format!("need K r >= 1, got K = {k}, r = {r}"),
        });
    }
    let template = GridSet::from_cells(n, k, vec![])?;
    let mut cell_list: Vec<Vec<u64>> = Vec::with_capacity((k as usize).pow(n as u32));
    let mut idx = vec![0u64; n];
    loop {
        cell_list.push(idx.clone());
        let mut axis = 0;
        loop {
            if axis == n {
                break;
            }
            idx[axis] += 1;
            if idx[axis] < k {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
        if idx.iter().all(|v| *v == 0) {
            break;
        }
    }
    #[derive(Clone, Copy)]
    enum Detect {
        Yes,
        Borderline,
        No,
    }
    let detections: Result<Vec<Detect>> = cell_list
        .par_iter()
        .map(|cell| {
            let bx = template.cell_box(cell);
            let x = bx.center();
            let ux = u.evaluate(&x)?;
            let f = |y: &[f64]| -> Result<f64> {
                let v = u.evaluate(y)?;
                Ok((v - ux) * (v - ux))
            };
            let ball2 = Ball::new(x.clone(), 2.0 * r);
            let (mean, mean_err) = sphere_mean(&f, &ball2, 32, quad_tolerance)?;
            let rhs = (n as f64 / 16.0) * mean / (r * r);
            let rhs_err = (n as f64 / 16.0) * mean_err / (r * r);
            // inf |grad u|^2 < rhs  <=>  inf |grad u| < sqrt(rhs)
            let thr = rhs.max(0.0).sqrt();
            let ball1 = Region::Ball(Ball::new(x, r));
            let d = inf_grad_decide(u, &ball1, thr, certify)?;
            Ok(match d {
                InfDecision::Below => {
                    if rhs_err > 0.05 * rhs.abs().max(1e-300) {
                        Detect::Borderline
                    } else {
                        Detect::Yes
                    }
                }
                InfDecision::AtOrAbove => Detect::No,
                InfDecision::Borderline => Detect::Borderline,
            })
        })
        .collect();
    let detections = detections?;
    let mut detected: Vec<Vec<u64>> = Vec::new();
    let mut borderline = 0usize;
    for (cell, d) in cell_list.into_iter().zip(detections) {
        match d {
            Detect::Yes => detected.push(cell),
            Detect::Borderline => {
                borderline += 1;
                detected.push(cell);
            }
            Detect::No => {}
        }
    }
    let set = GridSet::from_cells(n, k, detected.clone())?;
    // Greedy cover in deterministic lexicographic order.
    let centers_all: Vec<Vec<f64>> = detected
        .iter()
        .map(|c| template.cell_box(c).center())
        .collect();
    let mut covered = vec![false; centers_all.len()];
    let mut centers = Vec::new();
    for i in 0..centers_all.len() {
        if covered[i] {
            continue;
        }
        centers.push(centers_all[i].clone());
        for j in i..centers_all.len() {
            if !covered[j] && crate::geom::dist(&centers_all[i], &centers_all[j]) <= r {
                covered[j] = true;
            }
        }
    }
    Ok(CriticalSetCover {
        r,
        ball_count: centers.len(),
        centers,
        detected_cells: set.len(),
        borderline_cells: borderline,
        set,
    })
}

// ---------------------------------------------------------------------------
// Recursion dynamic program.
// ---------------------------------------------------------------------------

/// Which decrement the second recursion term uses: the statement's
/// a - C1 log N or the proof's a - C1 N log A.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecrementVariant {
    Proof,
    Statement,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecursionParams {
    /// Subdivision count per axis in the recursion (the A of A^{2-delta}).
    pub a_subdiv: f64,
    pub delta: f64,
    pub c: f64,
    pub c1: f64,
    /// Base frequency: boundary curve applies for N <= n0.
    pub n0: f64,
    /// Trivial cap: content of the unit cube at the working exponent.
    pub cap: f64,
    pub variant: DecrementVariant,
}

/// Boundary data M(N0, a) for the lowest frequency level.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCurve {
    Zero,
    Constant { value: f64 },
    Exponential { c: f64, beta: f64 },
    Table { points: Vec<(f64, f64)> },
}

impl BoundaryCurve {
    fn log_value(&self, a: f64, n0: f64) -> f64 {
        match self {
            BoundaryCurve::Zero => f64::NEG_INFINITY,
            BoundaryCurve::Constant { value } => value.ln(),
            BoundaryCurve::Exponential { c, beta } => c.ln() - beta * a / n0,
            BoundaryCurve::Table { points } => {
                // monotone linear interpolation in a of log M
                if points.is_empty() {
                    return f64::NEG_INFINITY;
                }
                let mut prev = &points[0];
                if a <= prev.0 {
                    return prev.1.max(0.0).ln();
                }
                for p in points.iter().skip(1) {
                    if a <= p.0 {
                        let t = (a - prev.0) / (p.0 - prev.0);
                        let l0 = prev.1.max(1e-300).ln();
                        let l1 = p.1.max(1e-300).ln();
                        return l0 + t * (l1 - l0);
                    }
                    prev = p;
                }
                prev.1.max(1e-300).ln()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecursionFit {
    pub beta: f64,
    pub log_c: f64,
    pub residual: f64,
}

/// Replay of the double-induction inequality
/// A^{2-delta} e^{-c beta a0/N} + A^{-delta} <= A^{-C1 beta}
/// for the fitted beta: feasible iff beta < delta/C1, with the minimal
/// C' making the chain close recorded when it exists.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InductionCheck {
    pub beta: f64,
    pub beta_upper_limit: f64,
    pub feasible: bool,
    pub c_prime_min: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecursionState {
    pub params: RecursionParams,
    pub n_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    /// log M(N, a) per (N level, a node).
    pub log_m: Vec<Vec<f64>>,
    pub fit: RecursionFit,
    pub induction: InductionCheck,
    pub interpolation: String,
}

/// Tabulates the tightest M consistent with the recursive inequality and
/// the boundary curve, then fits the exponential shape M <= C e^{-beta a/N}.
pub fn recursion_simulate(
    params: &RecursionParams,
    boundary: &BoundaryCurve,
    n_max: f64,
    a_max: f64,
    a_step: f64,
) -> Result<RecursionState> {
    if params.a_subdiv <= 1.0 || params.delta <= 0.0 || params.c <= 0.0 || params.c1 <= 0.0 {
        return Err(UclabError::InvalidParameter {
            name: "params".into(),
            reason: "need A > 1, delta > 0, c > 0, C1 > 0".into(),
        });
    }
    let min_shift = match params.variant {
        DecrementVariant::Proof => params.c1 * params.n0 * params.a_subdiv.ln(),
        DecrementVariant::Statement => params.c1 * params.n0.ln().max(f64::MIN_POSITIVE),
    };
    if a_step > 0.5 * min_shift {
        return Err(UclabError::GridTooCoarse(format!(
            "a-step {a_step} exceeds half the smallest recursion shift {min_shift:.4}"
        )));
    }
    let mut n_grid = vec![params.n0];
    while *n_grid.last().unwrap() < n_max {
        n_grid.push(n_grid.last().unwrap() * (1.0 + params.c));
    }
    let a_count = (a_max / a_step).ceil() as usize + 1;
    let a_grid: Vec<f64> = (0..a_count).map(|i| i as f64 * a_step).collect();
    let log_cap = params.cap.ln();

    let interp = |row: &Vec<f64>, a: f64| -> f64 {
        if a <= 0.0 {
            return log_cap;
        }
        let pos = a / a_step;
        let i0 = pos.floor() as usize;
        if i0 + 1 >= row.len() {
            return *row.last().unwrap();
        }
        let t = pos - i0 as f64;
        let l0 = row[i0];
        let l1 = row[i0 + 1];
        if l0 == f64::NEG_INFINITY || l1 == f64::NEG_INFINITY {
            return if t == 0.0 { l0 } else { f64::NEG_INFINITY.max(l1.min(l0)) };
        }
        l0 + t * (l1 - l0)
    };

    let ln_a = params.a_subdiv.ln();
    let mut log_m: Vec<Vec<f64>> = Vec::with_capacity(n_grid.len());
    // Base level.
    let base: Vec<f64> = a_grid
        .iter()
        .map(|a| boundary.log_value(*a, params.n0).min(log_cap))
        .collect();
    log_m.push(base);
    for j in 1..n_grid.len() {
        let nj = n_grid[j];
        let shift1 = params.c1 * nj * ln_a;
        let shift2 = match params.variant {
            DecrementVariant::Proof => shift1,
            DecrementVariant::Statement => params.c1 * nj.ln(),
        };
        let mut row = Vec::with_capacity(a_grid.len());
        for (i, a) in a_grid.iter().enumerate() {
            let t1 = (2.0 - params.delta) * ln_a + interp(&log_m[j - 1], a - shift1);
            let prev_row_here: f64 = if i == 0 {
                log_cap
            } else {
                // same level, smaller a: already computed entries of `row`
                let pos = (a - shift2) / a_step;
                if a - shift2 <= 0.0 {
                    log_cap
                } else {
                    let i0 = pos.floor() as usize;
                    let t = pos - i0 as f64;
                    if i0 + 1 < row.len() {
                        let (l0, l1): (f64, f64) = (row[i0], row[i0 + 1]);
                        if l0 == f64::NEG_INFINITY || l1 == f64::NEG_INFINITY {
                            f64::NEG_INFINITY
                        } else {
                            l0 + t * (l1 - l0)
                        }
                    } else if i0 < row.len() {
                        row[i0]
                    } else {
                        log_cap
                    }
                }
            };
            let t2 = -params.delta * ln_a + prev_row_here;
            // log(e^{t1} + e^{t2})
            let m = t1.max(t2);
            let val = if m == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                m + ((t1 - m).exp() + (t2 - m).exp()).ln()
            };
            row.push(val.min(log_cap));
        }
        log_m.push(row);
    }

    // Fit log M = log C - beta (a/N).
    let mut pts = Vec::new();
    for (j, nj) in n_grid.iter().enumerate() {
        for (i, a) in a_grid.iter().enumerate() {
            let l = log_m[j][i];
            if l.is_finite() {
                pts.push((a / nj, l));
            }
        }
    }
    let (slope, intercept, residual) = if pts.len() >= 2 {
        least_squares_slope(&pts)
    } else {
        (0.0, f64::NEG_INFINITY, 0.0)
    };
    let beta = -slope;
    // The smallest C' with M <= C' e^{-beta a / N} across the grid.
    let mut log_c = f64::NEG_INFINITY;
    for (j, nj) in n_grid.iter().enumerate() {
        for (i, a) in a_grid.iter().enumerate() {
            let l = log_m[j][i];
            if l.is_finite() {
                log_c = log_c.max(l + beta * a / nj);
            }
        }
    }
    let fit = RecursionFit {
        beta,
        log_c: if log_c.is_finite() { log_c } else { intercept },
        residual,
    };
    // Induction replay.
    let beta_limit = params.delta / params.c1;
    let feasible = beta > 0.0 && beta < beta_limit;
    let c_prime_min = if feasible {
        let gap = params.a_subdiv.powf(-params.c1 * beta)
            - params.a_subdiv.powf(-params.delta);
        if gap > 0.0 {
            // A^{2-delta-c C' beta} <= gap  =>  C' >= (2 - delta - log_A gap)/(c beta)
            let need = (2.0 - params.delta - gap.ln() / ln_a) / (params.c * beta);
            Some(need.max(0.0))
        } else {
            None
        }
    } else {
        None
    };
    Ok(RecursionState {
        params: params.clone(),
        n_grid,
        a_grid,
        log_m,
        fit,
        induction: InductionCheck {
            beta,
            beta_upper_limit: beta_limit,
            feasible,
            c_prime_min,
        },
        interpolation: "linear in log M over the a-grid".into(),
    })
}

// ---------------------------------------------------------------------------
// Propagation exponent fit.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagationPair {
    pub name: String,
    pub eps: f64,
    pub sigma: f64,
    pub normalization: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagationFit {
    pub alpha: f64,
    pub intercept: f64,
    pub residual: f64,
    pub pairs: Vec<PropagationPair>,
}

fn cell_region_in_half_ball(e: &GridSet, cell: &[u64], half_ball: &Ball) -> Region {
    let mut bx = e.cell_box(cell);
    if e.is_hyperplane() {
        // the set lives on the geometric section x_n = 0
        let n = bx.dim();
        bx.lo[n - 1] = 0.0;
        bx.hi[n - 1] = 0.0;
    }
    let far = bx
        .corners()
        .iter()
        .map(|c| norm(c))
        .fold(0.0f64, f64::max);
    if far <= half_ball.radius {
        Region::Box(bx)
    } else {
        Region::BoxCapBall(bx, half_ball.clone())
    }
}

/// Certified sup of |grad u| over the cells of E intersected with the
/// closed half ball.
pub fn sup_grad_over_set(
    u: &HarmonicFunction,
    e: &GridSet,
    certify: &CertifyParams,
) -> Result<f64> {
    let half_ball = Ball::new(vec![0.0; u.dim()], 0.5);
    let sups: Result<Vec<f64>> = e
        .cells_decoded()
        .par_iter()
        .map(|cell| {
            let region = cell_region_in_half_ball(e, cell, &half_ball);
            sup_grad(u, &region, certify).map(|est| est.value)
        })
        .collect();
    Ok(sups?.into_iter().fold(0.0, f64::max))
}

/// The lattice cover of the half ball at resolution K (cells meeting the
/// closed ball B(0, 1/2)).
pub fn half_ball_cover(dim: usize, k: u64) -> Result<GridSet> {
    let template = GridSet::from_cells(dim, k, vec![])?;
    let ball = Ball::new(vec![0.0; dim], 0.5);
    let mut cells = Vec::new();
    let mut idx = vec![0u64; dim];
    loop {
        let bx = template.cell_box(&idx);
        if bx.intersects_ball(&ball) {
            cells.push(idx.clone());
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return GridSet::from_cells(dim, k, cells);
            }
            idx[axis] += 1;
            if idx[axis] < k {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Fits sup_{B_{1/2}} |grad u| <= C (sup_E |grad u|)^alpha across a family:
/// each member is normalized to certified sup over B(0,1) equal to 1, eps
/// and sigma are certified sups over E and over the half-ball cover, and
/// alpha is the log-log least-squares slope.
pub fn fit_propagation_exponent(
    family: &[(String, HarmonicFunction)],
    e: &GridSet,
    k_sigma: u64,
    certify: &CertifyParams,
) -> Result<PropagationFit> {
    if family.len() < 4 {
        return Err(UclabError::FamilyTooSmall {
            required: 4,
            got: family.len(),
        });
    }
    // E must lie inside the half ball: every measured piece is cell
    // intersected with the closed ball, so cells only need to meet it.
    let half_ball = Ball::new(vec![0.0; family[0].1.dim()], 0.5);
    for cell in e.cells_decoded() {
        if !e.cell_box(&cell).intersects_ball(&half_ball) {
            return Err(UclabError::InvalidParameter {
                name: "E".into(),
                reason: "a cell of E lies entirely outside the half ball B(0, 1/2)".into(),
            });
        }
    }
    let sigma_cover = half_ball_cover(family[0].1.dim(), k_sigma)?;
    let mut pairs = Vec::with_capacity(family.len());
    for (name, u) in family {
        let b1 = Ball::new(vec![0.0; u.dim()], 1.0);
        let s1 = sup_grad(u, &Region::Ball(b1), certify)?;
        if s1.value <= 0.0 {
            return Err(UclabError::VanishingGradient { value: s1.value });
        }
        let nu = u.scaled(1.0 / s1.value);
        let eps = sup_grad_over_set(&nu, e, certify)?;
        let sigma = sup_grad_over_set(&nu, &sigma_cover, certify)?;
        if eps <= 0.0 || sigma <= 0.0 {
            return Err(UclabError::VanishingGradient { value: eps.min(sigma) });
        }
        pairs.push(PropagationPair {
            name: name.clone(),
            eps,
            sigma,
            normalization: s1.value,
        });
    }
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .map(|p| (p.eps.ln(), p.sigma.ln()))
        .collect();
    let (alpha, intercept, residual) = least_squares_slope(&pts);
    Ok(PropagationFit {
        alpha,
        intercept,
        residual,
        pairs,
    })
}

// ---------------------------------------------------------------------------
// Weak propagation bound calculator.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakBoundReport {
    pub frequency_lower_bound: f64,
    pub implied_smallness: f64,
}

/// Solves N^3 log C - N log kappa = beta log(1/eps) for the frequency lower
/// bound and returns it with the implied smallness bound e^{-N}.
pub fn weak_bound_calculator(
    kappa: f64,
    epsilon: f64,
    c_census: f64,
    beta: f64,
) -> Result<WeakBoundReport> {
    if !(kappa > 0.0 && c_census > 1.0 && beta > 0.0 && epsilon > 0.0 && epsilon <= 1.0) {
        return Err(UclabError::InvalidParameter {
            name: "inputs".into(),
            reason: "need kappa > 0, C > 1, beta > 0, 0 < eps <= 1".into(),
        });
    }
    let rhs = beta * (1.0 / epsilon).ln();
    if rhs == 0.0 {
        return Ok(WeakBoundReport {
            frequency_lower_bound: 0.0,
            implied_smallness: 1.0,
        });
    }
    let g = |n: f64| -> f64 { n * n * n * c_census.ln() - n * kappa.ln() - rhs };
    // Bracket the smallest positive root.
    let mut hi = 1.0f64;
    let mut tries = 0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(UclabError::NoPositiveRoot(
                "g(N) stays negative for all reachable N".into(),
            ));
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let n_star = 0.5 * (lo + hi);
    Ok(WeakBoundReport {
        frequency_lower_bound: n_star,
        implied_smallness: (-n_star).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn linear() -> HarmonicFunction {
        HarmonicFunction::polynomial(2, vec![(vec![1, 0], 1.0)]).unwrap()
    }

    fn saddle() -> HarmonicFunction {
        HarmonicFunction::polynomial(2, vec![(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap()
    }

    fn fast_census_params() -> CensusParams {
        CensusParams {
            classify: ClassifyParams {
                grid_per_axis: 2,
                ladder_rungs: 2,
                sup_tolerance: 5e-2,
                ..Default::default()
            },
            precondition_grid: MaximalDoublingParams {
                grid_per_axis: 3,
                ladder_rungs: 2,
                sup_tolerance: 1e-3,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn census_of_linear_has_no_bad_cubes() {
        let out = bad_cube_census(&linear(), 0.7, 2, &fast_census_params()).unwrap();
        let results = out.ran().unwrap();
        for r in &results {
            assert_eq!(r.bad_count, 0);
            assert!(r.ceiling_respected || r.undecided_count > 0);
        }
    }

    #[test]
    fn census_threshold_above_global_index_is_clean() {
        let z = zoo::homogeneous(2, 4, 0).unwrap();
        // N far above anything measurable on Q0 for this instance.
        let out = bad_cube_census(&z.function, 500.0, 1, &fast_census_params()).unwrap();
        let results = out.ran().unwrap();
        assert_eq!(results[0].bad_count, 0);
    }

    #[test]
    fn census_monotone_in_threshold() {
        let z = zoo::homogeneous(2, 6, 0).unwrap();
        let p = fast_census_params();
        let lo = bad_cube_census(&z.function, 2.0, 1, &p).unwrap().ran();
        let hi = bad_cube_census(&z.function, 6.0, 1, &p).unwrap().ran();
        if let (Some(lo), Some(hi)) = (lo, hi) {
            assert!(hi[0].bad_count <= lo[0].bad_count);
        }
    }

    #[test]
    fn census_inapplicable_when_threshold_too_small() {
        let z = zoo::homogeneous(2, 8, 0).unwrap();
        let out = bad_cube_census(&z.function, 0.05, 1, &fast_census_params()).unwrap();
        assert!(out.is_inapplicable());
    }

    #[test]
    fn census_exhaustive_oracle_generation_one() {
        // Oracle: classify every child independently (no pruning) and
        // compare counts, A = 4, n = 2.
        let z = zoo::homogeneous(2, 5, 1).unwrap();
        let u = &z.function;
        let p = fast_census_params();
        let threshold = 3.0;
        let out = bad_cube_census(u, threshold, 1, &p).unwrap();
        if let Some(results) = out.ran() {
            let root = Cube::root(2);
            let children = root.subdivide(p.a).unwrap();
            let mut bad = 0u64;
            let mut und = 0u64;
            for q in &children {
                match classify_cube(u, &q.to_box(), threshold, &p.classify)
                    .unwrap()
                    .class
                {
                    CubeClass::Bad => bad += 1,
                    CubeClass::Undecided => und += 1,
                    CubeClass::Good => {}
                }
            }
            assert_eq!(results[0].bad_count, bad);
            assert_eq!(results[0].undecided_count, und);
        }
    }

    #[test]
    fn hyperplane_census_of_linear() {
        let out = hyperplane_census(&linear(), 0.7, &fast_census_params()).unwrap();
        let r = out.ran().unwrap();
        assert_eq!(r.bad_count, 0);
        assert_eq!(r.total_count, 9);
    }

    #[test]
    fn hyperplane_census_counts_axis_cubes() {
        // Re((x+iy)^d) concentrates doubling near the origin; with a small
        // threshold the middle hyperplane cubes near 0 go bad.
        let z = zoo::homogeneous(2, 7, 0).unwrap();
        let out = hyperplane_census(&z.function, 1.0, &fast_census_params()).unwrap();
        match out {
            Applicability::Ran(r) => {
                assert!(r.bad_count + r.undecided_count >= 1);
                assert_eq!(r.total_count, 9);
            }
            Applicability::Inapplicable { .. } => {} // precondition refused: fine
        }
    }

    #[test]
    fn capacity_census_empty_bad_set_is_vacuous() {
        let out = capacity_census(&linear(), 0.7, &fast_census_params()).unwrap();
        let r = out.ran().unwrap();
        assert_eq!(r.bad_count, 0);
        assert!(r.capacity.is_none());
    }

    #[test]
    fn width_of_linear_is_zero() {
        let q = BoxRegion::cube(&[0.0, 0.0], 1.0 / 3.0);
        let rep = width_of_bad_set(&linear(), &q, 0.5, &WidthParams::default()).unwrap();
        assert_eq!(rep.samples_in_f, 0);
        assert_eq!(rep.width, 0.0);
    }

    #[test]
    fn width_huge_threshold_gives_empty_f() {
        let z = zoo::homogeneous(2, 6, 0).unwrap();
        let q = BoxRegion::cube(&[0.05, 0.05], 1.0 / 9.0);
        let rep = width_of_bad_set(&z.function, &q, 1e6, &WidthParams::default()).unwrap();
        assert_eq!(rep.width, 0.0);
    }

    #[test]
    fn width_saddle_near_origin_is_thin() {
        // F concentrates near the critical point at the origin.
        let q = BoxRegion::cube(&[0.0, 0.0], 1.0 / 3.0);
        let mut params = WidthParams::default();
        params.grid_per_axis = 15;
        let rep = width_of_bad_set(&saddle(), &q, 0.45, &params).unwrap();
        if rep.samples_in_f > 0 {
            assert!(rep.width < q.diameter() * 0.5);
        }
    }

    #[test]
    fn sublevel_of_saddle_matches_exact_disk() {
        // |grad (x^2-y^2)| = 2|x| < e^{-a} is the disk of radius e^{-a}/2.
        let u = saddle();
        let k = 243;
        for a in [1.0f64, 2.0, 3.0] {
            let rep = sublevel_content(
                &u,
                a,
                0.5,
                k,
                NormalizationCheck::Skip,
                &CertifyParams::with_tolerance(1e-3),
            )
            .unwrap();
            let radius = (-a).exp() / 2.0;
            let h = 1.0 / k as f64;
            let diag = (2f64).sqrt() * h;
            // Every cell within the disk must be in; nothing beyond one
            // cell outside the disk may be in.
            for cell in rep.set.cells_decoded() {
                let c = rep.set.cell_box(&cell).center();
                assert!(
                    norm(&c) <= radius + diag,
                    "cell center {c:?} too far outside exact disk (r = {radius})"
                );
            }
            let template = GridSet::from_cells(2, k, vec![]).unwrap();
            let mid = (k - 1) / 2;
            for cell in [[mid, mid], [mid + 1, mid], [mid, mid + 1]] {
                let bx = template.cell_box(&cell);
                let far = bx.corners().iter().map(|p| norm(p)).fold(0.0f64, f64::max);
                if far < radius {
                    assert!(rep.set.contains_id(GridSet::encode(2, k, &cell)));
                }
            }
        }
    }

    #[test]
    fn sublevel_empty_when_threshold_below_min() {
        // u = x1: |grad| = 1 everywhere; e^{-a} < 1 for a > 0.
        let rep = sublevel_content(
            &linear(),
            2.0,
            0.5,
            27,
            NormalizationCheck::Strict { tol: 1e-6 },
            &CertifyParams::default(),
        )
        .unwrap();
        assert_eq!(rep.cells_in, 0);
        assert!(rep.content.is_none());
    }

    #[test]
    fn sublevel_monotone_in_a() {
        let z = zoo::homogeneous(2, 4, 0).unwrap();
        let u = z
            .function
            .scaled(1.0 / {
                let root = BoxRegion::cube(&[0.0, 0.0], 1.0);
                sup_grad(
                    &z.function,
                    &Region::Box(root),
                    &CertifyParams::with_tolerance(1e-6),
                )
                .unwrap()
                .value
            });
        let certify = CertifyParams::with_tolerance(1e-2);
        let r1 = sublevel_content(&u, 1.0, 0.5, 81, NormalizationCheck::Skip, &certify).unwrap();
        let r2 = sublevel_content(&u, 2.0, 0.5, 81, NormalizationCheck::Skip, &certify).unwrap();
        assert!(r2.cells_in <= r1.cells_in);
        let c1 = r1.content.map(|c| c.upper).unwrap_or(0.0);
        let c2 = r2.content.map(|c| c.upper).unwrap_or(0.0);
        assert!(c2 <= c1 + 1e-12);
    }

    #[test]
    fn critical_set_of_linear_is_empty() {
        let cover = effective_critical_set(
            &linear(),
            1.0 / 27.0,
            81,
            &CertifyParams::default(),
            1e-9,
        )
        .unwrap();
        assert_eq!(cover.ball_count, 0);
        assert_eq!(cover.detected_cells, 0);
    }

    #[test]
    fn critical_set_of_saddle_contains_origin() {
        let k = 81;
        let cover = effective_critical_set(
            &saddle(),
            1.0 / 27.0,
            k,
            &CertifyParams::default(),
            1e-9,
        )
        .unwrap();
        assert!(cover.ball_count >= 1);
        // the four central cells surround the origin; at least one detected
        let mid = (k - 1) / 2;
        assert!(cover.set.contains_id(GridSet::encode(2, k, &[mid, mid])));
        // every detected center is within r of a cover center
        for cell in cover.set.cells_decoded() {
            let c = GridSet::from_cells(2, k, vec![cell.clone()])
                .unwrap()
                .cell_box(&cell)
                .center();
            let covered = cover
                .centers
                .iter()
                .any(|z| crate::geom::dist(z, &c) <= cover.r + 1e-12);
            assert!(covered);
        }
    }

    #[test]
    fn recursion_zero_boundary_stays_zero() {
        let params = RecursionParams {
            a_subdiv: 9.0,
            delta: 0.5,
            c: 0.2,
            c1: 1.0,
            n0: 10.0,
            cap: 2.0,
            variant: DecrementVariant::Proof,
        };
        let st = recursion_simulate(&params, &BoundaryCurve::Zero, 40.0, 200.0, 1.0).unwrap();
        for row in &st.log_m {
            for v in row.iter().skip(1) {
                assert!(
                    *v == f64::NEG_INFINITY || *v <= params.cap.ln() + 1e-12,
                    "value {v}"
                );
            }
        }
        // At a beyond all shifts the zero boundary forces zero mass.
        let last = st.log_m[0].last().unwrap();
        assert_eq!(*last, f64::NEG_INFINITY);
    }

    #[test]
    fn recursion_constant_boundary_two_level_closed_form() {
        let params = RecursionParams {
            a_subdiv: 9.0,
            delta: 0.5,
            c: 0.2,
            c1: 1.0,
            n0: 10.0,
            cap: 30.0,
            variant: DecrementVariant::Proof,
        };
        let kappa = 0.37;
        let st = recursion_simulate(
            &params,
            &BoundaryCurve::Constant { value: kappa },
            11.0,
            800.0,
            1.0,
        )
        .unwrap();
        assert_eq!(st.n_grid.len(), 2);
        // For a beyond both shifts: M(N1, a) = A^{2-d} kappa + A^{-d} M(N1, a - shift)
        // whose fixed point is A^{2-d} kappa / (1 - A^{-d}); the influence of
        // the a <= 0 cap decays by A^{-d} per shift and is gone by a = 800.
        let a_big = 9f64;
        let expected = a_big.powf(1.5) * kappa / (1.0 - a_big.powf(-0.5));
        let last = st.log_m[1].last().unwrap().exp();
        assert_relative_eq!(last, expected, max_relative = 1e-9);
    }

    #[test]
    fn recursion_monotone_in_a_and_boundary() {
        let params = RecursionParams {
            a_subdiv: 9.0,
            delta: 0.5,
            c: 0.2,
            c1: 1.0,
            n0: 10.0,
            cap: 2.0,
            variant: DecrementVariant::Proof,
        };
        let b1 = BoundaryCurve::Exponential { c: 2.0, beta: 1.0 };
        let b2 = BoundaryCurve::Exponential { c: 3.0, beta: 1.0 };
        let s1 = recursion_simulate(&params, &b1, 160.0, 1000.0, 1.0).unwrap();
        let s2 = recursion_simulate(&params, &b2, 160.0, 1000.0, 1.0).unwrap();
        for (r1, r2) in s1.log_m.iter().zip(&s2.log_m) {
            for (i, (v1, v2)) in r1.iter().zip(r2).enumerate() {
                if i > 0 {
                    assert!(r1[i] <= r1[i - 1] + 1e-12, "monotone in a");
                }
                assert!(v1 <= &(v2 + 1e-12), "monotone in boundary");
            }
        }
        assert!(s1.fit.beta > 0.0);
    }

    #[test]
    fn recursion_statement_variant_differs() {
        let mk = |variant| RecursionParams {
            a_subdiv: 9.0,
            delta: 0.5,
            c: 0.2,
            c1: 1.0,
            n0: 10.0,
            cap: 2.0,
            variant,
        };
        let b = BoundaryCurve::Exponential { c: 2.0, beta: 1.0 };
        let p = recursion_simulate(&mk(DecrementVariant::Proof), &b, 40.0, 300.0, 1.0).unwrap();
        let s =
            recursion_simulate(&mk(DecrementVariant::Statement), &b, 40.0, 300.0, 1.0).unwrap();
        let diff = p
            .log_m
            .iter()
            .flatten()
            .zip(s.log_m.iter().flatten())
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff > 1e-6, "variants should differ, max diff {diff}");
    }

    #[test]
    fn recursion_rejects_coarse_grid() {
        let params = RecursionParams {
            a_subdiv: 9.0,
            delta: 0.5,
            c: 0.2,
            c1: 1.0,
            n0: 10.0,
            cap: 2.0,
            variant: DecrementVariant::Proof,
        };
        let err = recursion_simulate(
            &params,
            &BoundaryCurve::Exponential { c: 2.0, beta: 1.0 },
            160.0,
            100.0,
            50.0,
        );
        assert!(matches!(err, Err(UclabError::GridTooCoarse(_))));
    }

    #[test]
    fn weak_bound_examples() {
        // eps = 1: bound 0.
        let r = weak_bound_calculator(0.5, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(r.frequency_lower_bound, 0.0);
        // log kappa = 0, log C = 1, beta log(1/eps) = 8 -> N = 2.
        let r = weak_bound_calculator(1.0, (-8.0f64).exp(), std::f64::consts::E, 1.0).unwrap();
        assert_abs_diff_eq!(r.frequency_lower_bound, 2.0, epsilon = 1e-9);
        // generic: bisection against a fine scan oracle
        let (kappa, eps, c, beta) = (0.7, 1e-3, 3.0, 0.8);
        let r = weak_bound_calculator(kappa, eps, c, beta).unwrap();
        let rhs = beta * (1.0f64 / eps).ln();
        let g = |n: f64| n * n * n * c.ln() - n * kappa.ln() - rhs;
        let mut scan = 0.0;
        let mut n = 0.0;
        while g(n) < 0.0 {
            scan = n;
            n += 1e-5;
        }
        assert_abs_diff_eq!(r.frequency_lower_bound, scan, epsilon = 1e-4);
        assert_relative_eq!(
            r.implied_smallness,
            (-r.frequency_lower_bound).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn propagation_alpha_one_when_e_is_half_ball() {
        let mut family = Vec::new();
        for d in 2..=5u32 {
            let z = zoo::homogeneous(2, d, 0).unwrap();
            family.push((z.name, z.function));
        }
        let e = half_ball_cover(2, 27).unwrap();
        let fit =
            fit_propagation_exponent(&family, &e, 27, &CertifyParams::with_tolerance(1e-4))
                .unwrap();
        assert_abs_diff_eq!(fit.alpha, 1.0, epsilon = 1e-9);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn propagation_family_too_small() {
        let z = zoo::homogeneous(2, 3, 0).unwrap();
        let family = vec![(z.name, z.function)];
        let e = half_ball_cover(2, 27).unwrap();
        assert!(matches!(
            fit_propagation_exponent(&family, &e, 27, &CertifyParams::default()),
            Err(UclabError::FamilyTooSmall { .. })
        ));
    }

    #[test]
    fn propagation_positive_alpha_for_cantor_set() {
        let mut family = Vec::new();
        for d in 2..=7u32 {
            let z = zoo::homogeneous(2, d, 0).unwrap();
            family.push((z.name, z.function));
        }
        let s = 2f64.ln() / 3f64.ln();
        let cantor = crate::content::cantor_product_set(
            s,
            2,
            3,
            crate::content::Placement::Hyperplane,
        )
        .unwrap();
        let e = cantor.set.shrink_into_center().unwrap();
        let fit =
            fit_propagation_exponent(&family, &e, 27, &CertifyParams::with_tolerance(1e-3))
                .unwrap();
        assert!(fit.alpha > 0.0);
        assert!(fit.residual < 0.1, "residual {}", fit.residual);
    }
}
