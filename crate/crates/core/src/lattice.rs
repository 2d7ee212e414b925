//! Triadic cube decompositions of the unit experiment cube and lattice sets.
//!
//! All intersection queries run on integer cell indices: cube positions are
//! dyadic-free rationals with power-of-three denominators, so censuses are
//! reproducible bit for bit. Floating point appears only when a cube or cell
//! is handed to an evaluator as a geometric box.
//!
//! The ambient domain is the unit cube Q0 = [-1/2, 1/2]^n; experiments
//! assume their functions harmonic on 100 Q0.

use crate::error::{Result, UclabError};
use crate::geom::BoxRegion;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// True if `b` is a power of three and at least 3.
pub fn is_power_of_three(b: u64) -> bool {
    if b < 3 {
        return false;
    }
    let mut v = b;
    while v % 3 == 0 {
        v /= 3;
    }
    v == 1
}

pub fn log3(b: u64) -> Option<u32> {
    let mut v = b;
    let mut k = 0;
    while v > 1 {
        if v % 3 != 0 {
            return None;
        }
        v /= 3;
        k += 1;
    }
    Some(k)
}

/// A triadic cube: side 3^{-side_exp}, lower corner at -1/2 + index/3^{side_exp}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cube {
    pub side_exp: u32,
    pub index: Vec<u64>,
    pub generation: u32,
    /// Flattened child ranks from the root, one entry per subdivision.
    pub path: Vec<u32>,
}

impl Cube {
    /// The unit experiment cube Q0.
    pub fn root(dim: usize) -> Cube {
        Cube {
            side_exp: 0,
            index: vec![0; dim],
            generation: 0,
            path: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> f64 {
        3f64.powi(-(self.side_exp as i32))
    }

    /// Cells per axis at this depth (3^side_exp).
    pub fn cells_per_axis(&self) -> u64 {
        3u64.pow(self.side_exp)
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.cells_per_axis();
        self.index
            .iter()
            .map(|i| ((2 * i + 1) as f64 - s as f64) / (2.0 * s as f64))
            .collect()
    }

    pub fn to_box(&self) -> BoxRegion {
        let s = self.cells_per_axis() as f64;
        let lo: Vec<f64> = self.index.iter().map(|i| *i as f64 / s - 0.5).collect();
        let hi: Vec<f64> = self.index.iter().map(|i| (*i + 1) as f64 / s - 0.5).collect();
        BoxRegion { lo, hi }
    }

    /// Geometric box of this cube scaled by `factor` about its center.
    pub fn to_scaled_box(&self, factor: f64) -> BoxRegion {
        BoxRegion::cube(&self.center(), self.side() * factor)
    }

    /// True if the cube is centered on the hyperplane {x_n = 0}.
    pub fn centered_on_hyperplane(&self) -> bool {
        let s = self.cells_per_axis();
        let last = *self.index.last().expect("nonempty index");
        2 * last + 1 == s
    }

    /// Subdivide into (2A+1)^n children, ordered lexicographically by their
    /// per-axis offset vector. 2A+1 must be a power of three.
    pub fn subdivide(&self, a: u32) -> Result<Vec<Cube>> {
        let b = 2 * a as u64 + 1;
        if !is_power_of_three(b) {
            return Err(UclabError::InvalidBranching(b as u32));
        }
        let t = log3(b).unwrap();
        let n = self.dim();
        let mut out = Vec::with_capacity((b as usize).pow(n as u32));
        let mut offset = vec![0u64; n];
        loop {
            let index: Vec<u64> = self
                .index
                .iter()
                .zip(&offset)
                .map(|(i, o)| i * b + o)
                .collect();
            let rank: u64 = offset.iter().fold(0, |acc, o| acc * b + o);
            let mut path = self.path.clone();
            path.push(rank as u32);
            out.push(Cube {
                side_exp: self.side_exp + t,
                index,
                generation: self.generation + 1,
                path,
            });
            // lexicographic increment, first axis most significant
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                offset[k] += 1;
                if offset[k] < b {
                    break;
                }
                offset[k] = 0;
                if k == 0 {
                    return Ok(out);
                }
            }
        }
    }

    /// Children meeting the hyperplane {x_n = 0}; requires this cube to be
    /// centered on it. For odd branching these are exactly the middle slab.
    pub fn hyperplane_children(&self, a: u32) -> Result<Vec<Cube>> {
        if !self.centered_on_hyperplane() {
            return Err(UclabError::InvalidParameter {
                name: "cube".into(),
                reason: "hyperplane {x_n = 0} does not pass through the cube center".into(),
            });
        }
        let b = 2 * a as u64 + 1;
        let n = self.dim();
        let mid_index = self.index[n - 1] * b + (b - 1) / 2;
        let children = self.subdivide(a)?;
        Ok(children
            .into_iter()
            .filter(|c| c.index[n - 1] == mid_index)
            .collect())
    }
}

/// A materialized triadic tree over the unit cube with fixed branching.
#[derive(Clone, Debug)]
pub struct CubeTree {
    pub dim: usize,
    pub branching: u64,
    levels: Vec<Vec<Cube>>,
}

impl CubeTree {
    pub fn new(dim: usize, branching: u64) -> Result<CubeTree> {
        if !is_power_of_three(branching) {
            return Err(UclabError::InvalidBranching(branching as u32));
        }
        Ok(CubeTree {
            dim,
            branching,
            levels: vec![vec![Cube::root(dim)]],
        })
    }

    pub fn a_param(&self) -> u32 {
        ((self.branching - 1) / 2) as u32
    }

    /// The cubes of generation `g`, materializing levels as needed.
    pub fn level(&mut self, g: usize) -> Result<&[Cube]> {
        while self.levels.len() <= g {
            let a = self.a_param();
            let last = self.levels.last().unwrap();
            let mut next = Vec::with_capacity(last.len() * (self.branching as usize).pow(self.dim as u32));
            for q in last {
                next.extend(q.subdivide(a)?);
            }
            self.levels.push(next);
        }
        Ok(&self.levels[g])
    }
}

/// A finite union of lattice cells of the unit cube at resolution K
/// (cells indexed in [0, K)^n, K a power of three).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSet {
    dim: usize,
    resolution: u64,
    /// Sorted encoded cell ids (mixed radix base `resolution`, axis 0 most
    /// significant).
    cells: Vec<u64>,
    hyperplane: bool,
}

impl GridSet {
    pub fn encode(dim: usize, resolution: u64, cell: &[u64]) -> u64 {
        debug_assert_eq!(cell.len(), dim);
        cell.iter().fold(0u64, |acc, c| {
            debug_assert!(*c < resolution);
            acc * resolution + c
        })
    }

    pub fn decode(&self, mut id: u64) -> Vec<u64> {
        let mut out = vec![0u64; self.dim];
        for i in (0..self.dim).rev() {
            out[i] = id % self.resolution;
            id /= self.resolution;
        }
        out
    }

    pub fn from_cells(dim: usize, resolution: u64, cells: Vec<Vec<u64>>) -> Result<GridSet> {
        if !is_power_of_three(resolution) {
            return Err(UclabError::IncommensurateResolution(format!(
                "resolution {resolution} is not a power of three"
            )));
        }
        let needed_bits = (resolution as f64).log2() * dim as f64;
        if needed_bits >= 63.0 {
            return Err(UclabError::IncommensurateResolution(format!(
                "resolution {resolution}^{dim} does not fit the cell encoding"
            )));
        }
        let mut ids: Vec<u64> = cells
            .iter()
            .map(|c| {
                if c.len() != dim || c.iter().any(|v| *v >= resolution) {
                    return Err(UclabError::InvalidParameter {
                        name: "cells".into(),
                        reason: format!("cell {c:?} out of range for resolution {resolution}"),
                    });
                }
                Ok(GridSet::encode(dim, resolution, c))
            })
            .collect::<Result<Vec<_>>>()?;
        ids.sort_unstable();
        ids.dedup();
        let mut set = GridSet {
            dim,
            resolution,
            cells: ids,
            hyperplane: false,
        };
        set.hyperplane = set.detect_hyperplane();
        Ok(set)
    }

    fn detect_hyperplane(&self) -> bool {
        if self.cells.is_empty() {
            return false;
        }
        let mid = (self.resolution - 1) / 2;
        self.cells
            .iter()
            .all(|id| self.decode(*id)[self.dim - 1] == mid)
    }

    /// The full middle-slab face {x_n = 0} thickened to one cell.
    pub fn full_hyperplane(dim: usize, resolution: u64) -> Result<GridSet> {
        let mid = (resolution - 1) / 2;
        let mut cells = Vec::new();
        let mut idx = vec![0u64; dim - 1];
        loop {
            let mut cell: Vec<u64> = idx.clone();
            cell.push(mid);
            cells.push(cell);
            let mut k = 0;
            loop {
                if k == dim - 1 {
                    return GridSet::from_cells(dim, resolution, cells);
                }
                idx[k] += 1;
                if idx[k] < resolution {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> u64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn is_hyperplane(&self) -> bool {
        self.hyperplane
    }

    pub fn cell_ids(&self) -> &[u64] {
        &self.cells
    }

    pub fn cells_decoded(&self) -> Vec<Vec<u64>> {
        self.cells.iter().map(|id| self.decode(*id)).collect()
    }

    pub fn contains_id(&self, id: u64) -> bool {
        self.cells.binary_search(&id).is_ok()
    }

    pub fn cell_box(&self, cell: &[u64]) -> BoxRegion {
        let k = self.resolution as f64;
        BoxRegion {
            lo: cell.iter().map(|c| *c as f64 / k - 0.5).collect(),
            hi: cell.iter().map(|c| (*c + 1) as f64 / k - 0.5).collect(),
        }
    }

    pub fn union(&self, other: &GridSet) -> Result<GridSet> {
        if self.dim != other.dim || self.resolution != other.resolution {
            return Err(UclabError::IncommensurateResolution(
                "union requires matching dimension and resolution".into(),
            ));
        }
        let mut ids = self.cells.clone();
        ids.extend_from_slice(&other.cells);
        ids.sort_unstable();
        ids.dedup();
        let mut s = GridSet {
            dim: self.dim,
            resolution: self.resolution,
            cells: ids,
            hyperplane: false,
        };
        s.hyperplane = s.detect_hyperplane();
        Ok(s)
    }

    pub fn is_subset_of(&self, other: &GridSet) -> bool {
        self.dim == other.dim
            && self.resolution == other.resolution
            && self.cells.iter().all(|id| other.contains_id(*id))
    }

    /// Refine by a power-of-three factor: every cell splits into factor^n.
    pub fn refine(&self, factor: u64) -> Result<GridSet> {
        if !is_power_of_three(factor) {
            return Err(UclabError::IncommensurateResolution(format!(
                "refinement factor {factor} is not a power of three"
            )));
        }
        let new_res = self.resolution * factor;
        let mut cells = Vec::with_capacity(self.len() * (factor as usize).pow(self.dim as u32));
        for id in &self.cells {
            let base = self.decode(*id);
            let mut off = vec![0u64; self.dim];
            loop {
                let cell: Vec<u64> = base
                    .iter()
                    .zip(&off)
                    .map(|(c, o)| c * factor + o)
                    .collect();
                cells.push(cell);
                let mut k = 0;
                loop {
                    if k == self.dim {
                        break;
                    }
                    off[k] += 1;
                    if off[k] < factor {
                        break;
                    }
                    off[k] = 0;
                    k += 1;
                }
                if off.iter().all(|o| *o == 0) {
                    break;
                }
            }
        }
        GridSet::from_cells(self.dim, new_res, cells)
    }

    /// Map the whole set into the central third of the cube (resolution
    /// triples, indices shift by the old resolution).
    pub fn shrink_into_center(&self) -> Result<GridSet> {
        let new_res = self.resolution * 3;
        let cells = self
            .cells
            .iter()
            .map(|id| {
                self.decode(*id)
                    .iter()
                    .map(|c| c + self.resolution)
                    .collect()
            })
            .collect();
        GridSet::from_cells(self.dim, new_res, cells)
    }
}

// --- serialization: run-length encoded sorted ids, bit-exact ---

#[derive(Serialize, Deserialize)]
struct GridSetSpec {
    dimension: usize,
    resolution: u64,
    hyperplane: bool,
    runs: Vec<(u64, u64)>,
}

impl Serialize for GridSet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut runs: Vec<(u64, u64)> = Vec::new();
        for id in &self.cells {
            match runs.last_mut() {
                Some((start, len)) if *start + *len == *id => *len += 1,
                _ => runs.push((*id, 1)),
            }
        }
        GridSetSpec {
            dimension: self.dim,
            resolution: self.resolution,
            hyperplane: self.hyperplane,
            runs,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GridSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let spec = GridSetSpec::deserialize(de)?;
        let mut cells = Vec::new();
        for (start, len) in spec.runs {
            for id in start..start + len {
                cells.push(id);
            }
        }
        cells.sort_unstable();
        cells.dedup();
        let mut s = GridSet {
            dim: spec.dimension,
            resolution: spec.resolution,
            cells,
            hyperplane: false,
        };
        s.hyperplane = s.detect_hyperplane();
        Ok(s)
    }
}

/// Closed-box overlap test between a triadic cube and a lattice cell, in
/// exact integer arithmetic. Sides are 3^{-s} and 1/K over the unit cube.
///
/// A hyperplane-flagged set stands for its geometric section {x_n = 0}, so
/// on the last axis the cube must straddle the hyperplane itself (for odd
/// 3^s this is the single middle index) rather than the thickened slab.
fn cube_cell_overlap(q: &[u64], s_cells: u64, cell: &[u64], k: u64, hyperplane: bool) -> bool {
    let n = q.len();
    for (axis, (qi, ci)) in q.iter().zip(cell).enumerate() {
        if hyperplane && axis == n - 1 {
            if *qi != (s_cells - 1) / 2 {
                return false;
            }
        } else if !(qi * k <= (ci + 1) * s_cells && ci * s_cells <= (qi + 1) * k) {
            return false;
        }
    }
    true
}

/// The subset of `cubes` whose closed boxes intersect the closed union E.
/// Resolutions must be commensurate (both powers of three).
pub fn cubes_meeting_set(cubes: &[Cube], e: &GridSet) -> Result<Vec<Cube>> {
    let k = e.resolution();
    let mut hit: BTreeSet<usize> = BTreeSet::new();
    // Index the cubes by (side_exp, index) for direct lookup.
    let mut by_key: BTreeMap<(u32, Vec<u64>), usize> = BTreeMap::new();
    for (pos, q) in cubes.iter().enumerate() {
        if q.dim() != e.dim() {
            return Err(UclabError::DimensionMismatch {
                expected: e.dim(),
                got: q.dim(),
            });
        }
        by_key.insert((q.side_exp, q.index.clone()), pos);
    }
    // Group cubes by depth so each cell probes a small candidate range.
    let depths: BTreeSet<u32> = cubes.iter().map(|q| q.side_exp).collect();
    for depth in depths {
        let s_cells = 3u64.pow(depth);
        for id in e.cell_ids() {
            let cell = e.decode(*id);
            // candidate cube index range per axis from the closed overlap test
            let mut ranges: Vec<(u64, u64)> = Vec::with_capacity(e.dim());
            for ci in &cell {
                // q >= ci*S/K - 1  and  q <= (ci+1)*S/K
                let lo_num = ci * s_cells;
                let lo = if lo_num % k == 0 {
                    (lo_num / k).saturating_sub(1)
                } else {
                    lo_num / k
                };
                let hi = ((ci + 1) * s_cells / k).min(s_cells - 1);
                ranges.push((lo, hi));
            }
            if e.is_hyperplane() {
                let mid = (s_cells - 1) / 2;
                let last = ranges.len() - 1;
                ranges[last] = (mid, mid);
            }
            let mut q = ranges.iter().map(|(lo, _)| *lo).collect::<Vec<_>>();
            loop {
                if cube_cell_overlap(&q, s_cells, &cell, k, e.is_hyperplane()) {
                    if let Some(pos) = by_key.get(&(depth, q.clone())) {
                        hit.insert(*pos);
                    }
                }
                let mut axis = e.dim();
                loop {
                    if axis == 0 {
                        break;
                    }
                    axis -= 1;
                    q[axis] += 1;
                    if q[axis] <= ranges[axis].1 {
                        break;
                    }
                    q[axis] = ranges[axis].0;
                    if axis == 0 {
                        break;
                    }
                }
                if q.iter().zip(&ranges).all(|(v, (lo, _))| v == lo) {
                    break;
                }
            }
        }
    }
    Ok(hit.into_iter().map(|pos| cubes[pos].clone()).collect())
}

/// Count of side-1/K subcubes of the unit cube meeting E, computed without
/// materializing the full level.
pub fn census_cube_count(e: &GridSet, k_census: u64) -> Result<usize> {
    if !is_power_of_three(k_census) {
        return Err(UclabError::IncommensurateResolution(format!(
            "census side 1/{k_census} is not a power of three"
        )));
    }
    let k = e.resolution();
    let s_cells = k_census;
    let mut hit: BTreeSet<Vec<u64>> = BTreeSet::new();
    for id in e.cell_ids() {
        let cell = e.decode(*id);
        let mut ranges: Vec<(u64, u64)> = Vec::with_capacity(e.dim());
        for ci in &cell {
            let lo_num = ci * s_cells;
            let lo = if lo_num % k == 0 {
                (lo_num / k).saturating_sub(1)
            } else {
                lo_num / k
            };
            let hi = ((ci + 1) * s_cells / k).min(s_cells - 1);
            ranges.push((lo, hi));
        }
        if e.is_hyperplane() {
            let mid = (s_cells - 1) / 2;
            let last = ranges.len() - 1;
            ranges[last] = (mid, mid);
        }
        let mut q = ranges.iter().map(|(lo, _)| *lo).collect::<Vec<_>>();
        loop {
            if cube_cell_overlap(&q, s_cells, &cell, k, e.is_hyperplane()) {
                hit.insert(q.clone());
            }
            let mut axis = e.dim();
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                q[axis] += 1;
                if q[axis] <= ranges[axis].1 {
                    break;
                }
                q[axis] = ranges[axis].0;
                if axis == 0 {
                    break;
                }
            }
            if q.iter().zip(&ranges).all(|(v, (lo, _))| v == lo) {
                break;
            }
        }
    }
    Ok(hit.len())
}

/// Report of the counting lower bound |S| >= C_n H^s_inf(E) K^s.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CountingReport {
    pub k: u64,
    pub s: f64,
    pub cube_count: usize,
    pub content_upper: f64,
    /// |S| / (H^s_inf(E) K^s); None when the check is vacuous.
    pub ratio: Option<f64>,
    pub vacuous: bool,
}

pub fn counting_ratio(cube_count: usize, content_upper: f64, k: u64, s: f64) -> CountingReport {
    let denom = content_upper * (k as f64).powf(s);
    if denom <= 0.0 {
        return CountingReport {
            k,
            s,
            cube_count,
            content_upper,
            ratio: None,
            vacuous: true,
        };
    }
    CountingReport {
        k,
        s,
        cube_count,
        content_upper,
        ratio: Some(cube_count as f64 / denom),
        vacuous: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subdivision_tiles_exactly() {
        let root = Cube::root(2);
        let children = root.subdivide(1).unwrap();
        assert_eq!(children.len(), 9);
        // side 1/3; first child lower corner at (-1/2, -1/2)
        assert_eq!(children[0].index, vec![0, 0]);
        let c0 = children[0].center();
        assert_eq!(c0, vec![-1.0 / 3.0, -1.0 / 3.0]);
        // total volume check via count * side^n == 1 in exact integers
        let per_axis = children[0].cells_per_axis();
        assert_eq!((per_axis * per_axis) as usize, children.len());
    }

    #[test]
    fn grandchildren_have_side_one_ninth() {
        let root = Cube::root(2);
        let child = &root.subdivide(1).unwrap()[4];
        let grand = child.subdivide(1).unwrap();
        assert_eq!(grand.len(), 9);
        assert_eq!(grand[0].side_exp, 2);
        assert_eq!(grand[0].side(), 3f64.powi(-2));
    }

    #[test]
    fn nine_way_subdivision() {
        let root = Cube::root(2);
        let children = root.subdivide(4).unwrap();
        assert_eq!(children.len(), 81);
        assert_eq!(children[0].side_exp, 2);
    }

    #[test]
    fn even_branching_rejected() {
        let root = Cube::root(2);
        assert!(matches!(
            root.subdivide(2),
            Err(UclabError::InvalidBranching(5))
        ));
    }

    #[test]
    fn path_reconstructs_center() {
        let root = Cube::root(3);
        let children = root.subdivide(1).unwrap();
        for q in children.iter().take(5) {
            let grand = q.subdivide(4).unwrap();
            for g in grand.iter().step_by(17) {
                // replay the path from the root
                let mut cur = Cube::root(3);
                for (step, rank) in g.path.iter().enumerate() {
                    let a = if step == 0 { 1 } else { 4 };
                    cur = cur.subdivide(a).unwrap()[*rank as usize].clone();
                }
                assert_eq!(&cur, g);
                assert_eq!(cur.center(), g.center());
            }
        }
    }

    #[test]
    fn hyperplane_children_middle_slab() {
        let root = Cube::root(2);
        let hc = root.hyperplane_children(1).unwrap();
        assert_eq!(hc.len(), 3);
        for c in &hc {
            assert!(c.to_box().lo[1] < 0.0 && c.to_box().hi[1] > 0.0);
        }
        let root3 = Cube::root(3);
        let hc3 = root3.hyperplane_children(4).unwrap();
        assert_eq!(hc3.len(), 81);
    }

    #[test]
    fn hyperplane_children_reject_offset_cube() {
        let root = Cube::root(2);
        let corner = &root.subdivide(1).unwrap()[0];
        assert!(corner.hyperplane_children(1).is_err());
    }

    #[test]
    fn single_interior_cell_meets_one_cube() {
        let e = GridSet::from_cells(2, 27, vec![vec![4, 4]]).unwrap();
        let mut tree = CubeTree::new(2, 3).unwrap();
        let level: Vec<Cube> = tree.level(1).unwrap().to_vec();
        let hits = cubes_meeting_set(&level, &e).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].index, vec![0, 0]);
    }

    #[test]
    fn aligned_cell_touches_neighbor_cubes() {
        // cell [9,10)/27 per axis starts exactly at a cube boundary of the
        // 3x3 level, so 4 cubes touch it in 2d.
        let e = GridSet::from_cells(2, 27, vec![vec![9, 9]]).unwrap();
        let mut tree = CubeTree::new(2, 3).unwrap();
        let level: Vec<Cube> = tree.level(1).unwrap().to_vec();
        let hits = cubes_meeting_set(&level, &e).unwrap();
        assert_eq!(hits.len(), 4);
    }

    #[test]
    fn hyperplane_face_meets_one_row() {
        // E = the full face {x_2 = 0}; census at side 1/9 gives 9 cubes
        // because the flagged set stands for the geometric section.
        let e = GridSet::full_hyperplane(2, 9).unwrap();
        assert!(e.is_hyperplane());
        let count = census_cube_count(&e, 9).unwrap();
        assert_eq!(count, 9);
    }

    #[test]
    fn meeting_set_is_monotone_in_e() {
        let e_small = GridSet::from_cells(2, 27, vec![vec![3, 5], vec![20, 20]]).unwrap();
        let e_big = e_small
            .union(&GridSet::from_cells(2, 27, vec![vec![10, 10], vec![3, 6]]).unwrap())
            .unwrap();
        let mut tree = CubeTree::new(2, 9).unwrap();
        let level: Vec<Cube> = tree.level(1).unwrap().to_vec();
        let hits_small = cubes_meeting_set(&level, &e_small).unwrap();
        let hits_big = cubes_meeting_set(&level, &e_big).unwrap();
        let keys: BTreeSet<Vec<u64>> = hits_big.iter().map(|c| c.index.clone()).collect();
        for h in hits_small {
            assert!(keys.contains(&h.index));
        }
    }

    #[test]
    fn gridset_roundtrip_bit_exact() {
        let e = GridSet::from_cells(2, 27, vec![vec![3, 13], vec![4, 13], vec![5, 13], vec![20, 13]])
            .unwrap();
        let json = serde_json::to_string(&e).unwrap();
        let back: GridSet = serde_json::from_str(&json).unwrap();
        assert_eq!(e, back);
        assert!(back.is_hyperplane());
        let json2 = serde_json::to_string(&back).unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn full_hyperplane_flag_and_size() {
        let e = GridSet::full_hyperplane(3, 9).unwrap();
        assert!(e.is_hyperplane());
        assert_eq!(e.len(), 81);
    }

    #[test]
    fn refine_preserves_geometry() {
        let e = GridSet::from_cells(2, 3, vec![vec![1, 1]]).unwrap();
        let f = e.refine(3).unwrap();
        assert_eq!(f.resolution(), 9);
        assert_eq!(f.len(), 9);
        for cell in f.cells_decoded() {
            assert!(cell.iter().all(|c| (3..6).contains(c)));
        }
    }

    #[test]
    fn shrink_into_center_lands_in_middle_third() {
        let e = GridSet::full_hyperplane(2, 9).unwrap();
        let s = e.shrink_into_center().unwrap();
        assert_eq!(s.resolution(), 27);
        for cell in s.cells_decoded() {
            assert!((9..18).contains(&cell[0]));
        }
    }

    #[test]
    fn counting_ratio_face_case() {
        // E = unit face at s = n-1 in n=2: |S| = K, content 1 -> ratio 1.
        let r = counting_ratio(27, 1.0, 27, 1.0);
        assert!(!r.vacuous);
        assert!((r.ratio.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counting_ratio_vacuous_for_zero_content() {
        let r = counting_ratio(1, 0.0, 27, 0.5);
        assert!(r.vacuous);
        assert!(r.ratio.is_none());
    }

    #[test]
    fn incommensurate_resolution_rejected() {
        assert!(GridSet::from_cells(2, 10, vec![vec![0, 0]]).is_err());
    }
}
