//! Markov partitions and symbolic coding of hyperbolic toral automorphisms.
//!
//! Partitions of `T²` are built from two rectangles with edges along `E_s`
//! and `E_u`, then refined by images under `A^{±1}`. Internally a planar
//! rectangle is an axis-aligned box in eigen coordinates `x = s·e_s + u·e_u`,
//! where `A` acts diagonally. Rectangles of arbitrary dimension are
//! parallelepipeds `anchor + Σ t_j edge_j`, `t ∈ [0,1]^d`, and only the
//! verifier and the coder accept them.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::BadSetW;
use crate::hyperbolic::{wrap, HyperbolicConstants, HyperbolicSystem, TAU_GEO};
use crate::lattice::IntMatrix;
use crate::parallel::map_range;
use crate::walk::ModMatrix;

/// Overlap area below which two rectangles count as disjoint.
pub const TAU_AREA: f64 = 1e-12;

const MAX_RECTANGLES: usize = 100_000;
const MAX_WORDS: usize = 4096;
const DYADIC_BITS: u32 = 53;

/// A parallelepiped `anchor + Σ t_j edges[j]`, `t ∈ [0, 1]^d`, on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct Rectangle {
    pub id: usize,
    pub anchor: Vec<f64>,
    pub edges: Vec<Vec<f64>>,
}

impl Rectangle {
    pub fn parallelogram(id: usize, anchor: [f64; 2], stable_edge: [f64; 2], unstable_edge: [f64; 2]) -> Self {
        Rectangle { id, anchor: anchor.to_vec(), edges: vec![stable_edge.to_vec(), unstable_edge.to_vec()] }
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    fn edge_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.edges.get(j).and_then(|e| e.get(i)).copied().unwrap_or(0.0))
    }

    pub fn volume(&self) -> f64 {
        if self.edges.len() != self.dim() {
            return 0.0;
        }
        self.edge_matrix().determinant().abs()
    }

    /// All `2^d` corners.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.edges.len();
        (0..1usize << d)
            .map(|mask| {
                let mut v = self.anchor.clone();
                for (j, e) in self.edges.iter().enumerate() {
                    if mask >> j & 1 == 1 {
                        for (vi, ei) in v.iter_mut().zip(e) {
                            *vi += ei;
                        }
                    }
                }
                v
            })
            .collect()
    }
}

/// Precomputed inverse of a rectangle's edge matrix.
#[derive(Clone, Debug)]
struct Shape {
    inverse: DMatrix<f64>,
    /// Coefficient slack equivalent to `TAU_GEO` along each edge.
    slack: Vec<f64>,
}

impl Shape {
    fn new(r: &Rectangle) -> Option<Shape> {
        if r.edges.len() != r.dim() || r.volume() <= TAU_AREA {
            return None;
        }
        let inverse = r.edge_matrix().try_inverse()?;
        let slack = r.edges.iter().map(|e| TAU_GEO / e.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
        Some(Shape { inverse, slack })
    }

    fn coefficients(&self, r: &Rectangle, lift: &[f64]) -> Vec<f64> {
        let v = DVector::from_iterator(lift.len(), lift.iter().zip(&r.anchor).map(|(p, a)| p - a));
        (&self.inverse * v).iter().copied().collect()
    }
}

/// How far `coeffs` lies outside `[0, 1]^d`, measured along the edges.
fn excess(r: &Rectangle, coeffs: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(&r.edges)
        .map(|(&c, e)| {
            let len = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            (-c).max(c - 1.0).max(0.0) * len
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
struct Hit {
    rect: usize,
    /// The rectangle's lift plus `shift` contains the query point.
    shift: Vec<i64>,
    interior: bool,
}

/// Uniform grid over `[0,1)^d` listing which rectangle lifts meet each cell.
#[derive(Clone, Debug)]
struct Locator {
    dim: usize,
    grid: usize,
    cells: Vec<Vec<(usize, Vec<i64>)>>,
    shapes: Vec<Option<Shape>>,
}

impl Locator {
    fn new(rects: &[Rectangle]) -> Locator {
        let dim = rects.first().map_or(2, Rectangle::dim);
        let grid = ((4.0 * rects.len() as f64).powf(1.0 / dim as f64).ceil() as usize).clamp(1, 256 >> (dim.min(4) - 1));
        let mut cells = vec![Vec::new(); grid.pow(dim as u32)];
        let shapes: Vec<Option<Shape>> = rects.iter().map(Shape::new).collect();
        for (idx, r) in rects.iter().enumerate() {
            if shapes[idx].is_none() {
                continue;
            }
            let verts = r.vertices();
            let lo: Vec<f64> = (0..dim).map(|i| verts.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min) - 1e-9).collect();
            let hi: Vec<f64> = (0..dim).map(|i| verts.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max) + 1e-9).collect();
            let ranges: Vec<(i64, i64)> =
                (0..dim).map(|i| ((-hi[i]).floor() as i64, (1.0 - lo[i]).ceil() as i64)).collect();
            for shift in box_points(&ranges) {
                let mut cell_ranges = Vec::with_capacity(dim);
                let mut empty = false;
                for i in 0..dim {
                    let a = lo[i] + shift[i] as f64;
                    let b = hi[i] + shift[i] as f64;
                    if b < 0.0 || a >= 1.0 {
                        empty = true;
                        break;
                    }
                    let ca = ((a.max(0.0) * grid as f64).floor() as i64).clamp(0, grid as i64 - 1);
                    let cb = ((b.min(1.0) * grid as f64).floor() as i64).clamp(0, grid as i64 - 1);
                    cell_ranges.push((ca, cb));
                }
                if empty {
                    continue;
                }
                for cell in box_points(&cell_ranges) {
                    let flat = cell.iter().rev().fold(0usize, |acc, &c| acc * grid + c as usize);
                    cells[flat].push((idx, shift.clone()));
                }
            }
        }
        Locator { dim, grid, cells, shapes }
    }

    /// Rectangles whose closure contains the torus point `p ∈ [0,1)^d`.
    fn locate(&self, rects: &[Rectangle], p: &[f64]) -> Vec<Hit> {
        let flat = p
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.grid + ((c * self.grid as f64) as usize).min(self.grid - 1));
        let mut hits: Vec<Hit> = Vec::new();
        for (idx, shift) in &self.cells[flat] {
            let Some(shape) = &self.shapes[*idx] else { continue };
            let r = &rects[*idx];
            let lift: Vec<f64> = p.iter().zip(shift).map(|(x, m)| x - *m as f64).collect();
            let coeffs = shape.coefficients(r, &lift);
            let closed = coeffs.iter().zip(&shape.slack).all(|(&c, &t)| c >= -t && c <= 1.0 + t);
            if !closed || hits.iter().any(|h| h.rect == *idx) {
                continue;
            }
            let interior = coeffs.iter().zip(&shape.slack).all(|(&c, &t)| c > t && c < 1.0 - t);
            hits.push(Hit { rect: *idx, shift: shift.clone(), interior });
        }
        hits.sort_by_key(|h| h.rect);
        debug_assert_eq!(p.len(), self.dim);
        hits
    }
}

/// Integer points of a product of closed ranges.
fn box_points(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &(a, b) in ranges {
        let mut next = Vec::new();
        for prefix in &out {
            for v in a..=b {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Eigen coordinates of a planar hyperbolic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenFrame {
    pub stable_direction: [f64; 2],
    pub unstable_direction: [f64; 2],
    to_eigen: [[f64; 2]; 2],
    pub stable_eigenvalue: f64,
    pub unstable_eigenvalue: f64,
    /// `‖e_s‖'` and `‖e_u‖'`, so that `‖(s, u)‖' = max(w_s |s|, w_u |u|)`.
    pub stable_weight: f64,
    pub unstable_weight: f64,
}

impl EigenFrame {
    pub fn new(system: &HyperbolicSystem) -> Result<Self> {
        let sp = &system.norm.splitting;
        if sp.dim != 2 {
            return Err(Error::DimensionUnsupported(sp.dim));
        }
        let es = [sp.stable_basis[(0, 0)], sp.stable_basis[(1, 0)]];
        let eu = [sp.unstable_basis[(0, 0)], sp.unstable_basis[(1, 0)]];
        let det = es[0] * eu[1] - eu[0] * es[1];
        if det.abs() < 1e-12 {
            return Err(Error::Numerical("eigen directions are parallel".into()));
        }
        let to_eigen = [[eu[1] / det, -eu[0] / det], [-es[1] / det, es[0] / det]];
        let one = DVector::from_element(1, 1.0);
        Ok(EigenFrame {
            stable_direction: es,
            unstable_direction: eu,
            to_eigen,
            stable_eigenvalue: sp.stable_map[(0, 0)],
            unstable_eigenvalue: sp.unstable_map[(0, 0)],
            stable_weight: system.norm.stable_coord_norm(&one),
            unstable_weight: system.norm.unstable_coord_norm(&one),
        })
    }

    pub fn to_eigen(&self, x: [f64; 2]) -> [f64; 2] {
        let m = &self.to_eigen;
        [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]]
    }

    pub fn from_eigen(&self, c: [f64; 2]) -> [f64; 2] {
        let (es, eu) = (self.stable_direction, self.unstable_direction);
        [c[0] * es[0] + c[1] * eu[0], c[0] * es[1] + c[1] * eu[1]]
    }

    /// Standard area of a unit square in eigen coordinates.
    fn area_scale(&self) -> f64 {
        let (es, eu) = (self.stable_direction, self.unstable_direction);
        (es[0] * eu[1] - eu[0] * es[1]).abs()
    }

    /// Integer points whose eigen coordinates lie in `[s₀,s₁] × [u₀,u₁]`.
    fn lattice_points(&self, s: [f64; 2], u: [f64; 2]) -> Vec<([i64; 2], [f64; 2])> {
        let corners = [
            self.from_eigen([s[0], u[0]]),
            self.from_eigen([s[0], u[1]]),
            self.from_eigen([s[1], u[0]]),
            self.from_eigen([s[1], u[1]]),
        ];
        let lo = |i: usize| corners.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min);
        let hi = |i: usize| corners.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max);
        let mut out = Vec::new();
        for x in lo(0).ceil() as i64..=hi(0).floor() as i64 {
            for y in lo(1).ceil() as i64..=hi(1).floor() as i64 {
                let c = self.to_eigen([x as f64, y as f64]);
                if c[0] >= s[0] && c[0] <= s[1] && c[1] >= u[0] && c[1] <= u[1] {
                    out.push(([x, y], c));
                }
            }
        }
        out
    }

    fn box_diameter(&self, b: &EigenBox) -> f64 {
        (self.stable_weight * b.stable_width()).max(self.unstable_weight * b.unstable_width())
    }
}

/// An axis-aligned box in eigen coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenBox {
    pub s: [f64; 2],
    pub u: [f64; 2],
}

impl EigenBox {
    pub fn stable_width(&self) -> f64 {
        self.s[1] - self.s[0]
    }

    pub fn unstable_width(&self) -> f64 {
        self.u[1] - self.u[0]
    }

    fn scaled(&self, ls: f64, lu: f64) -> EigenBox {
        EigenBox { s: sorted([self.s[0] * ls, self.s[1] * ls]), u: sorted([self.u[0] * lu, self.u[1] * lu]) }
    }

    fn translated(&self, c: [f64; 2]) -> EigenBox {
        EigenBox { s: [self.s[0] + c[0], self.s[1] + c[0]], u: [self.u[0] + c[1], self.u[1] + c[1]] }
    }

    fn intersect(&self, o: &EigenBox) -> EigenBox {
        EigenBox { s: [self.s[0].max(o.s[0]), self.s[1].min(o.s[1])], u: [self.u[0].max(o.u[0]), self.u[1].min(o.u[1])] }
    }
}

fn sorted(x: [f64; 2]) -> [f64; 2] {
    if x[0] <= x[1] {
        x
    } else {
        [x[1], x[0]]
    }
}

/// `A·box_i` meets `box_target + offset`; `offset` is the eigen image of `shift`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub target: usize,
    pub shift: [i64; 2],
    pub offset: [f64; 2],
}

/// Lattice translates `ℓ` with `area(x ∩ (y + ℓ)) > tau`, with the intersections.
fn overlaps(frame: &EigenFrame, x: &EigenBox, y: &EigenBox, tau: f64) -> Vec<(EigenBox, [i64; 2], [f64; 2])> {
    let s = [x.s[0] - y.s[1], x.s[1] - y.s[0]];
    let u = [x.u[0] - y.u[1], x.u[1] - y.u[0]];
    let scale = frame.area_scale();
    frame
        .lattice_points(s, u)
        .into_iter()
        .filter_map(|(m, c)| {
            let cut = x.intersect(&y.translated(c));
            let (ws, wu) = (cut.stable_width(), cut.unstable_width());
            (ws > 0.0 && wu > 0.0 && ws * wu * scale > tau).then_some((cut, m, c))
        })
        .collect()
}

/// Which direction a refinement shrinks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cut {
    /// Common refinement with `A`-images: stable widths shrink.
    Stable,
    /// Common refinement with `A⁻¹`-images: unstable widths shrink.
    Unstable,
}

#[derive(Clone, Debug)]
struct Planar {
    frame: EigenFrame,
    boxes: Vec<EigenBox>,
    transitions: Vec<Vec<Transition>>,
    adjacency_stable: bool,
}

/// A finite cover of the torus by rectangles with disjoint interiors.
#[derive(Clone, Debug)]
pub struct MarkovPartition {
    pub rectangles: Vec<Rectangle>,
    pub diameter: f64,
    /// `adjacency[i][j] = 1` iff `A(int R_i) ∩ int R_j ≠ ∅`.
    pub adjacency: Vec<Vec<u8>>,
    /// Expansiveness constant of the map the partition is built for.
    pub delta0: f64,
    planar: Option<Planar>,
    locator: Locator,
}

impl MarkovPartition {
    pub fn len(&self) -> usize {
        self.rectangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rectangles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rectangles.first().map_or(0, Rectangle::dim)
    }

    pub fn frame(&self) -> Option<&EigenFrame> {
        self.planar.as_ref().map(|p| &p.frame)
    }

    pub fn boxes(&self) -> Option<&[EigenBox]> {
        self.planar.as_ref().map(|p| p.boxes.as_slice())
    }

    pub fn transitions(&self, i: usize) -> &[Transition] {
        self.planar.as_ref().map_or(&[], |p| p.transitions[i].as_slice())
    }

    /// Whether recomputing the adjacency with `TAU_AREA / 2` changes nothing.
    pub fn adjacency_is_stable(&self) -> bool {
        self.planar.as_ref().is_some_and(|p| p.adjacency_stable)
    }

    pub fn total_area(&self) -> f64 {
        self.rectangles.iter().map(Rectangle::volume).sum()
    }

    /// Number of overlapping pieces of `A R_i ∩ R_j`; equals `adjacency` when
    /// every piece is connected.
    pub fn transition_counts(&self) -> Vec<Vec<u32>> {
        match &self.planar {
            Some(p) => {
                let m = p.boxes.len();
                let mut c = vec![vec![0u32; m]; m];
                for (i, ts) in p.transitions.iter().enumerate() {
                    for t in ts {
                        c[i][t.target] += 1;
                    }
                }
                c
            }
            None => self.adjacency.iter().map(|row| row.iter().map(|&x| x as u32).collect()).collect(),
        }
    }

    /// Rectangles whose closure contains `x`.
    pub fn containing(&self, x: &[f64]) -> Vec<usize> {
        self.locator.locate(&self.rectangles, &wrap(x)).into_iter().map(|h| h.rect).collect()
    }

    /// A partition supplied as data. Planar rectangles aligned with the
    /// eigen directions get the eigen-box geometry, and the supplied
    /// adjacency must then agree with the recomputed one.
    pub fn from_parts(rectangles: Vec<Rectangle>, adjacency: Vec<Vec<u8>>, system: &HyperbolicSystem) -> Result<Self> {
        let m = rectangles.len();
        let d = system.dim();
        if m == 0 {
            return Err(Error::Domain("partition has no rectangles".into()));
        }
        if let Some(r) = rectangles.iter().find(|r| r.dim() != d || r.edges.len() != d || r.edges.iter().any(|e| e.len() != d)) {
            return Err(Error::DimensionMismatch { expected: d, found: r.dim() });
        }
        if adjacency.len() != m || adjacency.iter().any(|row| row.len() != m) {
            return Err(Error::Domain(format!("adjacency must be {m}×{m}")));
        }
        if d == 2 {
            if let Some(boxes) = aligned_boxes(&rectangles, system)? {
                let frame = EigenFrame::new(system)?;
                let built = from_boxes(&frame, boxes, system.expansiveness_constant())?;
                if built.adjacency != adjacency {
                    return Err(Error::Domain("adjacency does not match the rectangles".into()));
                }
                return Ok(MarkovPartition { rectangles, ..built });
            }
        }
        let diameter = rectangles.iter().map(|r| rectangle_diameter(r, system)).fold(0.0, f64::max);
        let locator = Locator::new(&rectangles);
        Ok(MarkovPartition { rectangles, diameter, adjacency, delta0: system.expansiveness_constant(), planar: None, locator })
    }

    /// Common refinement with the images of the partition under `A` or `A⁻¹`.
    pub fn refine(&self, cut: Cut) -> Result<Self> {
        let p = self.planar.as_ref().ok_or(Error::DimensionUnsupported(self.dim()))?;
        refine_boxes(&p.frame, &p.boxes, cut, self.delta0)
    }

    /// One refinement in each direction.
    pub fn refine_round(&self) -> Result<Self> {
        self.refine(Cut::Stable)?.refine(Cut::Unstable)
    }

    /// Spectral radius of the transition counts.
    pub fn perron_root(&self) -> PerronRoot {
        perron_root(&self.transition_counts())
    }
}

fn aligned_boxes(rectangles: &[Rectangle], system: &HyperbolicSystem) -> Result<Option<Vec<EigenBox>>> {
    let frame = EigenFrame::new(system)?;
    let mut boxes = Vec::with_capacity(rectangles.len());
    for r in rectangles {
        let a = frame.to_eigen([r.anchor[0], r.anchor[1]]);
        let e0 = frame.to_eigen([r.edges[0][0], r.edges[0][1]]);
        let e1 = frame.to_eigen([r.edges[1][0], r.edges[1][1]]);
        let (es, eu) = if e0[1].abs() <= e0[0].abs() { (e0, e1) } else { (e1, e0) };
        let tol = 1e-9;
        if es[1].abs() > tol * es[0].abs() || eu[0].abs() > tol * eu[1].abs() {
            return Ok(None);
        }
        boxes.push(EigenBox { s: sorted([a[0], a[0] + es[0]]), u: sorted([a[1], a[1] + eu[1]]) });
    }
    Ok(Some(boxes))
}

/// Shifts a box so its lower corner has standard coordinates in `[0,1)²`.
fn normalize(frame: &EigenFrame, b: EigenBox) -> EigenBox {
    let x = frame.from_eigen([b.s[0], b.u[0]]);
    // corners often sit on lattice points; round those consistently
    let m = [(x[0] + 1e-9).floor(), (x[1] + 1e-9).floor()];
    let c = frame.to_eigen(m);
    b.translated([-c[0], -c[1]])
}

fn transitions_for(frame: &EigenFrame, boxes: &[EigenBox], tau: f64) -> Vec<Vec<Transition>> {
    let (ls, lu) = (frame.stable_eigenvalue, frame.unstable_eigenvalue);
    map_range(boxes.len(), |i| {
        let image = boxes[i].scaled(ls, lu);
        let mut out = Vec::new();
        for (j, b) in boxes.iter().enumerate() {
            for (_, shift, offset) in overlaps(frame, &image, b, tau) {
                out.push(Transition { target: j, shift, offset });
            }
        }
        out
    })
}

fn from_boxes(frame: &EigenFrame, boxes: Vec<EigenBox>, delta0: f64) -> Result<MarkovPartition> {
    let m = boxes.len();
    let transitions = transitions_for(frame, &boxes, TAU_AREA);
    let check = transitions_for(frame, &boxes, TAU_AREA / 2.0);
    let key = |t: &Vec<Vec<Transition>>| -> Vec<Vec<(usize, [i64; 2])>> {
        t.iter().map(|row| row.iter().map(|x| (x.target, x.shift)).collect()).collect()
    };
    let adjacency_stable = key(&transitions) == key(&check);
    let mut adjacency = vec![vec![0u8; m]; m];
    for (i, ts) in transitions.iter().enumerate() {
        for t in ts {
            adjacency[i][t.target] = 1;
        }
    }
    let rectangles: Vec<Rectangle> = boxes
        .iter()
        .enumerate()
        .map(|(id, b)| {
            let anchor = frame.from_eigen([b.s[0], b.u[0]]);
            let se = frame.from_eigen([b.stable_width(), 0.0]);
            let ue = frame.from_eigen([0.0, b.unstable_width()]);
            Rectangle::parallelogram(id, anchor, se, ue)
        })
        .collect();
    let diameter = boxes.iter().map(|b| frame.box_diameter(b)).fold(0.0, f64::max);
    let locator = Locator::new(&rectangles);
    Ok(MarkovPartition {
        rectangles,
        diameter,
        adjacency,
        delta0,
        planar: Some(Planar { frame: frame.clone(), boxes, transitions, adjacency_stable }),
        locator,
    })
}

fn refine_boxes(frame: &EigenFrame, boxes: &[EigenBox], cut: Cut, delta0: f64) -> Result<MarkovPartition> {
    let (ls, lu) = match cut {
        Cut::Stable => (frame.stable_eigenvalue, frame.unstable_eigenvalue),
        Cut::Unstable => (1.0 / frame.stable_eigenvalue, 1.0 / frame.unstable_eigenvalue),
    };
    let images: Vec<EigenBox> = boxes.iter().map(|b| b.scaled(ls, lu)).collect();
    let pieces: Vec<Vec<EigenBox>> = map_range(boxes.len(), |i| {
        images
            .iter()
            .flat_map(|img| overlaps(frame, &boxes[i], img, TAU_AREA).into_iter().map(|(cut, _, _)| normalize(frame, cut)))
            .collect()
    });
    let refined: Vec<EigenBox> = pieces.into_iter().flatten().collect();
    if refined.len() > MAX_RECTANGLES {
        return Err(Error::BudgetExceeded { states: refined.len() as u128, cap: MAX_RECTANGLES as u128 });
    }
    from_boxes(frame, refined, delta0)
}

/// Candidate two-rectangle partitions, smallest diameter first. A lattice
/// basis `w₁ = (p₁, q₂)`, `w₂ = (−q₁, p₂)` in eigen coordinates gives
/// `P = [0,p₁]×[0,p₂]` and `Q = [p₁,p₁+q₁]×[0,q₂]`, which tile the plane
/// and are Markov for every map with these eigen directions and positive
/// eigenvalues.
fn two_rectangle_candidates(frame: &EigenFrame, radius: i64) -> Vec<(f64, [EigenBox; 2])> {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for x in -radius..=radius {
        for y in -radius..=radius {
            let c = frame.to_eigen([x as f64, y as f64]);
            if c[1] > 0.0 && c[0] > 0.0 {
                first.push(([x, y], c));
            } else if c[1] > 0.0 && c[0] < 0.0 {
                second.push(([x, y], c));
            }
        }
    }
    let mut out = Vec::new();
    for (v1, c1) in &first {
        for (v2, c2) in &second {
            if (v1[0] * v2[1] - v1[1] * v2[0]).abs() != 1 {
                continue;
            }
            let (p1, q2, q1, p2) = (c1[0], c1[1], -c2[0], c2[1]);
            let diam = (frame.stable_weight * p1.max(q1)).max(frame.unstable_weight * p2.max(q2));
            out.push((diam, [EigenBox { s: [0.0, p1], u: [0.0, p2] }, EigenBox { s: [p1, p1 + q1], u: [0.0, q2] }]));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn two_rectangles(frame: &EigenFrame) -> Result<Vec<EigenBox>> {
    for radius in [4i64, 8, 16, 32, 64] {
        if let Some((_, boxes)) = two_rectangle_candidates(frame, radius).into_iter().next() {
            return Ok(boxes.to_vec());
        }
    }
    Err(Error::Numerical("no lattice basis adapted to the eigen directions".into()))
}

/// Every base partition from lattice bases with entries up to `radius`.
pub fn base_partitions(system: &HyperbolicSystem, radius: i64) -> Result<Vec<MarkovPartition>> {
    let frame = EigenFrame::new(system)?;
    let eps = system.expansiveness_constant();
    two_rectangle_candidates(&frame, radius)
        .into_iter()
        .map(|(_, boxes)| {
            if frame.stable_eigenvalue > 0.0 && frame.unstable_eigenvalue > 0.0 {
                from_boxes(&frame, boxes.to_vec(), eps)
            } else {
                refine_boxes(&frame, &boxes, Cut::Unstable, eps)
            }
        })
        .collect()
}

/// The base partition of a planar hyperbolic system. Orientation-reversing
/// eigenvalues use the partition of `A²` refined once by `A⁻¹`.
pub fn base_partition(system: &HyperbolicSystem) -> Result<MarkovPartition> {
    let frame = EigenFrame::new(system)?;
    let boxes = two_rectangles(&frame)?;
    let eps = system.expansiveness_constant();
    if frame.stable_eigenvalue > 0.0 && frame.unstable_eigenvalue > 0.0 {
        from_boxes(&frame, boxes, eps)
    } else {
        refine_boxes(&frame, &boxes, Cut::Unstable, eps)
    }
}

/// Points of `Λ = centers + Z²` with eigen coordinates in `[s₀,s₁] × [u₀,u₁]`.
fn lattice_points_shifted(frame: &EigenFrame, centers: &[[f64; 2]], s: [f64; 2], u: [f64; 2]) -> Vec<[f64; 2]> {
    centers
        .iter()
        .flat_map(|c| {
            frame
                .lattice_points([s[0] - c[0], s[1] - c[0]], [u[0] - c[1], u[1] - c[1]])
                .into_iter()
                .map(move |(_, p)| [p[0] + c[0], p[1] + c[1]])
        })
        .collect()
}

/// The component of the complement of the segments containing `x`, found by
/// shooting rays along both eigen directions.
fn cell_around(frame: &EigenFrame, centers: &[[f64; 2]], a: f64, c: f64, x: [f64; 2]) -> Option<EigenBox> {
    let mut reach = 1.0;
    while reach <= 64.0 {
        let vertical = lattice_points_shifted(frame, centers, [x[0] - reach, x[0] + reach], [x[1] - c, x[1] + c]);
        let horizontal = lattice_points_shifted(frame, centers, [x[0] - a, x[0] + a], [x[1] - reach, x[1] + reach]);
        let right = vertical.iter().map(|p| p[0]).filter(|&v| v > x[0]).fold(f64::INFINITY, f64::min);
        let left = vertical.iter().map(|p| p[0]).filter(|&v| v < x[0]).fold(f64::NEG_INFINITY, f64::max);
        let up = horizontal.iter().map(|p| p[1]).filter(|&v| v > x[1]).fold(f64::INFINITY, f64::min);
        let down = horizontal.iter().map(|p| p[1]).filter(|&v| v < x[1]).fold(f64::NEG_INFINITY, f64::max);
        if [right, left, up, down].iter().all(|v| v.is_finite()) {
            return Some(EigenBox { s: [left, right], u: [down, up] });
        }
        reach *= 2.0;
    }
    None
}

/// The partition cut out by the stable segments `w + [−a, a]·e_s` and the
/// unstable segments `w + [−c, c]·e_u` through the points `w` of
/// `Λ = centers + Z²`, where `centers` is a finite `A`-invariant group
/// containing 0.
///
/// `A` maps the stable segments into themselves and `A⁻¹` the unstable
/// ones, whatever the signs of the eigenvalues. The pieces are rectangles
/// when every endpoint lies strictly inside a segment of the other kind,
/// that is when `a = s(λ)` with `|u(λ)| < c` and `c = u(μ)` with
/// `|s(μ)| < a` for some `λ, μ ∈ Λ`.
pub fn cross_partition(system: &HyperbolicSystem, centers: &[Vec<f64>], a: f64, c: f64) -> Result<MarkovPartition> {
    let frame = EigenFrame::new(system)?;
    let centers = eigen_centers(&frame, centers)?;
    let boxes = cross_boxes(&frame, &centers, a, c)?;
    from_boxes(&frame, boxes, system.expansiveness_constant())
}

fn eigen_centers(frame: &EigenFrame, centers: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let mut out: Vec<[f64; 2]> = centers
        .iter()
        .map(|w| match w.as_slice() {
            [x, y] => Ok(frame.to_eigen([*x, *y])),
            _ => Err(Error::DimensionMismatch { expected: 2, found: w.len() }),
        })
        .collect::<Result<_>>()?;
    if !out.iter().any(|p| p[0].abs() < 1e-12 && p[1].abs() < 1e-12) {
        out.push([0.0, 0.0]);
    }
    Ok(out)
}

fn cross_boxes(frame: &EigenFrame, centers: &[[f64; 2]], a: f64, c: f64) -> Result<Vec<EigenBox>> {
    if !(a > 0.0 && c > 0.0) {
        return Err(Error::Domain("segment half-lengths must be positive".into()));
    }
    let nudge = 1e-9 * a.min(c);
    let mut found: Vec<EigenBox> = Vec::new();
    let mut keys: BTreeSet<(i64, i64)> = BTreeSet::new();
    for w in centers {
        for p in lattice_points_shifted(frame, centers, [w[0] - a - nudge, w[0] + a + nudge], [w[1] - c - nudge, w[1] + c + nudge]) {
            // p's unstable segment crosses w's stable segment at (s(p), u(w)).
            for (ds, du) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let x = [p[0] + ds * nudge, w[1] + du * nudge];
                let b = cell_around(frame, centers, a, c, x)
                    .ok_or_else(|| Error::Numerical("segments leave an unbounded region".into()))?;
                let b = normalize(frame, b);
                let key = ((b.s[0] * 1e8).round() as i64, (b.u[0] * 1e8).round() as i64);
                if keys.insert(key) {
                    found.push(b);
                }
            }
        }
    }
    let area: f64 = found.iter().map(|b| b.stable_width() * b.unstable_width()).sum::<f64>() * frame.area_scale();
    if (area - 1.0).abs() > 1e-9 {
        return Err(Error::Numerical(format!("segments do not cut the torus into rectangles (area {area})")));
    }
    Ok(found)
}

/// Among cross partitions of diameter below `max_diameter`, the one whose
/// rectangles avoiding `centers` stay farthest from them. Candidate
/// half-lengths are coordinates of points of `Λ` up to `reach`.
pub fn widest_cross_partition(system: &HyperbolicSystem, centers: &[Vec<f64>], max_diameter: f64, reach: f64) -> Result<MarkovPartition> {
    let frame = EigenFrame::new(system)?;
    let eig = eigen_centers(&frame, centers)?;
    let pts = lattice_points_shifted(&frame, &eig, [-reach, reach], [-reach, reach]);
    let tol = 1e-9;
    let mut a_list: Vec<(f64, f64)> = pts.iter().filter(|p| p[0] > tol).map(|p| (p[0], p[1].abs())).collect();
    let mut c_list: Vec<(f64, f64)> = pts.iter().filter(|p| p[1] > tol).map(|p| (p[1], p[0].abs())).collect();
    a_list.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    c_list.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    a_list.dedup_by(|x, y| (x.0 - y.0).abs() < tol);
    c_list.dedup_by(|x, y| (x.0 - y.0).abs() < tol);
    let pairs: Vec<(f64, f64)> = a_list
        .iter()
        .flat_map(|&(a, ua)| c_list.iter().filter(move |&&(c, sc)| ua < c - tol && sc < a - tol).map(move |&(c, _)| (a, c)))
        .collect();
    let scored: Vec<Option<(f64, usize, f64, f64)>> = map_range(pairs.len(), |i| {
        let (a, c) = pairs[i];
        let boxes = cross_boxes(&frame, &eig, a, c).ok()?;
        let diameter = boxes.iter().map(|b| frame.box_diameter(b)).fold(0.0, f64::max);
        if diameter >= max_diameter {
            return None;
        }
        Some((star_gap(&frame, &boxes, &eig), boxes.len(), a, c))
    });
    let best = scored
        .into_iter()
        .flatten()
        .max_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)))
        .ok_or_else(|| Error::Domain(format!("no cross partition below diameter {max_diameter}")))?;
    let boxes = cross_boxes(&frame, &eig, best.2, best.3)?;
    from_boxes(&frame, boxes, system.expansiveness_constant())
}

/// Smallest distance from a box containing no center to the nearest center.
fn star_gap(frame: &EigenFrame, boxes: &[EigenBox], centers: &[[f64; 2]]) -> f64 {
    let points: Vec<[f64; 2]> = centers.iter().map(|c| frame.from_eigen(*c)).collect();
    let dist: Vec<Vec<f64>> = boxes.iter().map(|b| points.iter().map(|p| box_distance(frame, b, p)).collect()).collect();
    dist.iter()
        .filter(|row| row.iter().all(|&d| d > TAU_GEO))
        .flat_map(|row| row.iter().copied())
        .fold(f64::INFINITY, f64::min)
}

/// A Markov partition of diameter at most `target_diameter` for a 2×2
/// hyperbolic matrix. Each step refines the direction with the larger
/// extent.
pub fn build_partition_2d(a: &IntMatrix, target_diameter: f64) -> Result<MarkovPartition> {
    if !a.is_square() || a.rows() != 2 {
        return Err(Error::DimensionUnsupported(a.rows()));
    }
    let system = HyperbolicSystem::new(a)?;
    build_partition_for(&system, target_diameter)
}

pub fn build_partition_for(system: &HyperbolicSystem, target_diameter: f64) -> Result<MarkovPartition> {
    if target_diameter.is_nan() || target_diameter <= 0.0 {
        return Err(Error::Domain(format!("target diameter must be positive, got {target_diameter}")));
    }
    let mut p = base_partition(system)?;
    while p.diameter > target_diameter {
        let (frame, boxes) = {
            let planar = p.planar.as_ref().expect("built partitions are planar");
            (&planar.frame, &planar.boxes)
        };
        let s_ext = boxes.iter().map(|b| frame.stable_weight * b.stable_width()).fold(0.0, f64::max);
        let u_ext = boxes.iter().map(|b| frame.unstable_weight * b.unstable_width()).fold(0.0, f64::max);
        p = p.refine(if s_ext >= u_ext { Cut::Stable } else { Cut::Unstable })?;
    }
    Ok(p)
}

/// Adapted-norm diameter of a parallelepiped: the largest `‖Σ ±e_j‖'`.
fn rectangle_diameter(r: &Rectangle, system: &HyperbolicSystem) -> f64 {
    let d = r.edges.len();
    (0..1usize << d)
        .map(|mask| {
            let mut v = vec![0.0; r.dim()];
            for (j, e) in r.edges.iter().enumerate() {
                let sign = if mask >> j & 1 == 1 { -1.0 } else { 1.0 };
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi += sign * ei;
                }
            }
            system.norm.norm(&v)
        })
        .fold(0.0, f64::max)
}

/// Certified bracket on the Perron root from Collatz–Wielandt ratios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerronRoot {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

/// Power iteration on `I + C`, which is aperiodic whenever `C` is irreducible.
pub fn perron_root(counts: &[Vec<u32>]) -> PerronRoot {
    let m = counts.len();
    if m == 0 {
        return PerronRoot { estimate: 0.0, lower: 0.0, upper: 0.0, iterations: 0 };
    }
    let sparse: Vec<Vec<(usize, f64)>> = counts
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &c)| c > 0).map(|(j, &c)| (j, c as f64)).collect())
        .collect();
    let mut x = vec![1.0 / m as f64; m];
    let mut y = vec![0.0; m];
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    let mut iterations = 0;
    while iterations < 1_000_000 {
        iterations += 1;
        for (i, row) in sparse.iter().enumerate() {
            y[i] = x[i] + row.iter().map(|&(j, c)| c * x[j]).sum::<f64>();
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..m {
            if x[i] > 0.0 {
                let r = y[i] / x[i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        lower = lo - 1.0;
        upper = hi - 1.0;
        let total: f64 = y.iter().sum();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / total;
        }
        if upper - lower <= 1e-13 * upper.max(1.0) {
            break;
        }
    }
    PerronRoot { estimate: 0.5 * (lower + upper), lower: lower.max(0.0), upper, iterations }
}

/// Result of checking the partition axioms on samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkovReport {
    pub rectangles: usize,
    pub total_volume: f64,
    pub volume_error: f64,
    /// Rectangles with fewer than `d` independent edges.
    pub degenerate: usize,
    /// Largest `‖P_u e‖ / ‖e‖` over stable edges, and dually.
    pub max_misalignment: f64,
    pub diameter: f64,
    /// The expansiveness constant the diameter must not exceed.
    pub epsilon: f64,
    pub diameter_ok: bool,
    pub coverage_samples: usize,
    pub uncovered: usize,
    pub overlapping: usize,
    pub markov_samples: usize,
    /// Samples whose stable or unstable slice leaves its target by more than `TAU_GEO`.
    pub violations: usize,
    pub worst_violation: f64,
    pub product_violations: usize,
    pub passed: bool,
}

/// Checks interior-disjointness, covering, edge alignment, closure under the
/// local product, and the stable and unstable inclusion property on
/// `samples` interior points per rectangle.
pub fn verify_markov(rectangles: &[Rectangle], system: &HyperbolicSystem, samples: usize, seed: u64) -> MarkovReport {
    let d = system.dim();
    let (ds, _) = system.norm.splitting.dims();
    let epsilon = system.expansiveness_constant();
    let total_volume: f64 = rectangles.iter().map(Rectangle::volume).sum();
    let locator = Locator::new(rectangles);
    let mut degenerate = 0;
    let mut misalignment = 0.0f64;
    let mut stable_edges: Vec<Vec<bool>> = Vec::with_capacity(rectangles.len());
    for (i, r) in rectangles.iter().enumerate() {
        if locator.shapes[i].is_none() || r.dim() != d {
            degenerate += 1;
        }
        let kinds: Vec<bool> = r
            .edges
            .iter()
            .map(|e| {
                let len = e.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let off_s = norm2(&system.norm.project_unstable(e)) / len;
                let off_u = norm2(&system.norm.project_stable(e)) / len;
                misalignment = misalignment.max(off_s.min(off_u));
                off_s <= off_u
            })
            .collect();
        if kinds.iter().filter(|&&k| k).count() != ds {
            misalignment = misalignment.max(1.0);
        }
        stable_edges.push(kinds);
    }
    let diameter = rectangles.iter().map(|r| rectangle_diameter(r, system)).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coverage_samples = (samples * rectangles.len()).clamp(1, 200_000);
    let (mut uncovered, mut overlapping) = (0, 0);
    for _ in 0..coverage_samples {
        let p: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let hits = locator.locate(rectangles, &p);
        if hits.is_empty() {
            uncovered += 1;
        }
        if hits.iter().filter(|h| h.interior).count() > 1 {
            overlapping += 1;
        }
    }
    let mut violations = 0;
    let mut worst = 0.0f64;
    let mut product_violations = 0;
    let mut markov_samples = 0;
    for (i, r) in rectangles.iter().enumerate() {
        let Some(shape) = &locator.shapes[i] else { continue };
        for _ in 0..samples {
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
            let x = point_at(r, &c);
            markov_samples += 1;
            let fwd = slice_violation(rectangles, &locator, system, r, &c, &stable_edges[i], true, &x);
            let bwd = slice_violation(rectangles, &locator, system, r, &c, &stable_edges[i], false, &x);
            let v = fwd.max(bwd);
            worst = worst.max(v);
            if v > TAU_GEO {
                violations += 1;
            }
            // [x, y] = x + P_s(y − x) must stay in the rectangle.
            let cy: Vec<f64> = (0..d).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
            let y = point_at(r, &cy);
            let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let z: Vec<f64> = x.iter().zip(system.norm.project_stable(&diff)).map(|(a, b)| a + b).collect();
            if excess(r, &shape.coefficients(r, &z)) > TAU_GEO {
                product_violations += 1;
            }
        }
    }
    let volume_error = (total_volume - 1.0).abs();
    let diameter_ok = diameter <= epsilon;
    let passed = volume_error <= 1e-9
        && degenerate == 0
        && misalignment <= 1e-9
        && diameter_ok
        && uncovered == 0
        && overlapping == 0
        && violations == 0
        && product_violations == 0;
    MarkovReport {
        rectangles: rectangles.len(),
        total_volume,
        volume_error,
        degenerate,
        max_misalignment: misalignment,
        diameter,
        epsilon,
        diameter_ok,
        coverage_samples,
        uncovered,
        overlapping,
        markov_samples,
        violations,
        worst_violation: worst,
        product_violations,
        passed,
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn point_at(r: &Rectangle, c: &[f64]) -> Vec<f64> {
    let mut x = r.anchor.clone();
    for (e, &t) in r.edges.iter().zip(c) {
        for (xi, ei) in x.iter_mut().zip(e) {
            *xi += t * ei;
        }
    }
    x
}

/// How far `A(W^s(x, R))` leaves the rectangle containing `Ax` (forward),
/// or `A⁻¹(W^u(x, R))` leaves the one containing `A⁻¹x`.
#[allow(clippy::too_many_arguments)]
fn slice_violation(
    rects: &[Rectangle],
    locator: &Locator,
    system: &HyperbolicSystem,
    r: &Rectangle,
    c: &[f64],
    stable: &[bool],
    forward: bool,
    x: &[f64],
) -> f64 {
    let map = |v: &[f64]| if forward { system.apply(v) } else { system.apply_inverse(v) };
    let free: Vec<usize> = (0..c.len()).filter(|&j| stable[j] == forward).collect();
    let corners: Vec<Vec<f64>> = (0..1usize << free.len())
        .map(|mask| {
            let mut cc = c.to_vec();
            for (b, &j) in free.iter().enumerate() {
                cc[j] = (mask >> b & 1) as f64;
            }
            map(&point_at(r, &cc))
        })
        .collect();
    let image = map(x);
    let base: Vec<f64> = image.iter().map(|v| v.floor()).collect();
    let p: Vec<f64> = image.iter().zip(&base).map(|(v, b)| v - b).collect();
    let hits = locator.locate(rects, &p);
    if hits.is_empty() {
        return f64::INFINITY;
    }
    hits.iter()
        .map(|h| {
            let target = &rects[h.rect];
            let shape = locator.shapes[h.rect].as_ref().expect("located rectangles have shapes");
            corners
                .iter()
                .map(|v| {
                    let lift: Vec<f64> = v.iter().zip(&base).zip(&h.shift).map(|((a, b), m)| a - b - *m as f64).collect();
                    excess(target, &shape.coefficients(target, &lift))
                })
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Symbolic codes of a finite window of an orbit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolicWindow {
    /// Index of time 0 inside each word.
    pub offset: usize,
    /// Every admissible word through the rectangles met by the orbit.
    pub words: Vec<Vec<usize>>,
    /// Boundary ties produced several words.
    pub ambiguous: bool,
    /// The enumeration stopped at the word cap.
    pub truncated: bool,
}

impl SymbolicWindow {
    pub fn word(&self) -> Option<&[usize]> {
        self.words.first().map(Vec::as_slice)
    }
}

/// Exact orbit `A^k ρ / n` for `k ∈ [−back, fwd]`, as floats in `[0,1)^d`.
pub fn rational_orbit(system: &HyperbolicSystem, rho: &[u64], n: u64, back: usize, fwd: usize) -> Vec<Vec<f64>> {
    let forward = ModMatrix::new(&system.matrix, n);
    let inverse = ModMatrix::new(&system.matrix.inverse().expect("hyperbolic systems are unimodular"), n);
    let to_f = |x: &[u64]| x.iter().map(|&c| c as f64 / n as f64).collect::<Vec<f64>>();
    let start: Vec<u64> = rho.iter().map(|&r| r % n).collect();
    let mut past = Vec::with_capacity(back);
    let mut x = start.clone();
    for _ in 0..back {
        x = inverse.apply(&x);
        past.push(to_f(&x));
    }
    past.reverse();
    past.push(to_f(&start));
    let mut x = start;
    for _ in 0..fwd {
        x = forward.apply(&x);
        past.push(to_f(&x));
    }
    past
}

/// All admissible words `w` with `w[k] ∈ candidates[k]`, up to a cap.
fn admissible_words(candidates: &[Vec<usize>], adjacency: &[Vec<u8>]) -> (Vec<Vec<usize>>, bool) {
    let len = candidates.len();
    if len == 0 {
        return (vec![Vec::new()], false);
    }
    // alive[k] keeps letters with an admissible continuation to the end.
    let mut alive: Vec<Vec<usize>> = vec![Vec::new(); len];
    alive[len - 1] = candidates[len - 1].clone();
    for k in (0..len - 1).rev() {
        alive[k] = candidates[k].iter().copied().filter(|&i| alive[k + 1].iter().any(|&j| adjacency[i][j] > 0)).collect();
    }
    let mut words = Vec::new();
    let mut truncated = false;
    let mut stack: Vec<Vec<usize>> = alive[0].iter().rev().map(|&i| vec![i]).collect();
    while let Some(w) = stack.pop() {
        if w.len() == len {
            if words.len() == MAX_WORDS {
                truncated = true;
                break;
            }
            words.push(w);
            continue;
        }
        let last = *w.last().expect("words are nonempty");
        for &j in alive[w.len()].iter().rev() {
            if adjacency[last][j] > 0 {
                let mut next = w.clone();
                next.push(j);
                stack.push(next);
            }
        }
    }
    (words, truncated)
}

fn code_orbit(orbit: &[Vec<f64>], offset: usize, partition: &MarkovPartition) -> SymbolicWindow {
    let candidates: Vec<Vec<usize>> = orbit.iter().map(|x| partition.containing(x)).collect();
    let (words, truncated) = admissible_words(&candidates, &partition.adjacency);
    SymbolicWindow { offset, ambiguous: words.len() > 1, words, truncated }
}

/// Codes `A^k ρ/n` for `k ∈ [−K, K]` using exact integer iterates.
pub fn code_rational(rho: &[u64], n: u64, partition: &MarkovPartition, system: &HyperbolicSystem, window: usize) -> SymbolicWindow {
    code_orbit(&rational_orbit(system, rho, n, window, window), window, partition)
}

/// Codes `A^k ξ` for `k ∈ [−K, K]`. `ξ` is first rounded to the nearest
/// multiple of `2^-53`, whose orbit is then computed exactly.
pub fn code_point(xi: &[f64], partition: &MarkovPartition, system: &HyperbolicSystem, window: usize) -> SymbolicWindow {
    let n = 1u64 << DYADIC_BITS;
    let rho: Vec<u64> = wrap(xi).iter().map(|&c| ((c * n as f64).round() as u64) % n).collect();
    code_rational(&rho, n, partition, system, window)
}

/// The cylinder of a word, as a box in eigen coordinates around its center.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decoded {
    pub point: Vec<f64>,
    /// Adapted-norm distance from `point` to the farthest point of the cylinder.
    pub radius: f64,
    pub stable_width: f64,
    pub unstable_width: f64,
}

/// Intersects `A^{-k} R_{w_k}` over the window. Letters after the offset cut
/// the unstable direction, letters before it the stable one.
pub fn decode_word(word: &[usize], offset: usize, partition: &MarkovPartition) -> Result<Decoded> {
    let p = partition.planar.as_ref().ok_or(Error::DimensionUnsupported(partition.dim()))?;
    let m = p.boxes.len();
    if offset >= word.len() {
        return Err(Error::Domain(format!("offset {offset} outside a word of length {}", word.len())));
    }
    if let Some(&bad) = word.iter().find(|&&w| w >= m) {
        return Err(Error::Domain(format!("letter {bad} out of range")));
    }
    let frame = &p.frame;
    let (ls, lu) = (frame.stable_eigenvalue, frame.unstable_eigenvalue);
    let position = |k: usize| k as i64 - offset as i64;
    let transition = |k: usize| -> Result<Transition> {
        let ts: Vec<&Transition> = p.transitions[word[k]].iter().filter(|t| t.target == word[k + 1]).collect();
        match ts.as_slice() {
            [t] => Ok(**t),
            _ => Err(Error::EmptyIntersection { position: position(k) }),
        }
    };
    let slack = 1e-12;
    // x_{k+1} = A x_k − shift, so u_k = (u_{k+1} + ℓ_u) / λ_u.
    let mut u = p.boxes[word[word.len() - 1]].u;
    for k in (offset..word.len() - 1).rev() {
        let t = transition(k)?;
        let pulled = sorted([(u[0] + t.offset[1]) / lu, (u[1] + t.offset[1]) / lu]);
        let own = p.boxes[word[k]].u;
        u = [own[0].max(pulled[0]), own[1].min(pulled[1])];
        if u[1] < u[0] - slack {
            return Err(Error::EmptyIntersection { position: position(k) });
        }
    }
    let mut s = p.boxes[word[0]].s;
    for k in 0..offset {
        let t = transition(k)?;
        let pushed = sorted([ls * s[0] - t.offset[0], ls * s[1] - t.offset[0]]);
        let own = p.boxes[word[k + 1]].s;
        s = [own[0].max(pushed[0]), own[1].min(pushed[1])];
        if s[1] < s[0] - slack {
            return Err(Error::EmptyIntersection { position: position(k + 1) });
        }
    }
    let (ws, wu) = ((s[1] - s[0]).max(0.0), (u[1] - u[0]).max(0.0));
    let center = frame.from_eigen([0.5 * (s[0] + s[1]), 0.5 * (u[0] + u[1])]);
    Ok(Decoded {
        point: wrap(&center),
        radius: 0.5 * (frame.stable_weight * ws).max(frame.unstable_weight * wu),
        stable_width: ws,
        unstable_width: wu,
    })
}

/// Rectangles meeting the bad set `W` and those avoiding it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub r0: Vec<usize>,
    pub r1: Vec<usize>,
    pub m0: usize,
    pub m1: usize,
    /// `min(ε_c, min_{w≠w'} d(w, w') / (1 + ‖A‖'))`.
    pub delta0: f64,
    /// For each point of `W`, the rectangles containing it.
    pub containing: Vec<Vec<usize>>,
    /// Rectangles of `R₀` without exactly one successor in `R₀`.
    pub successor_failures: Vec<usize>,
    pub unique_successor: bool,
    /// Smallest distance from a rectangle of `R₁` to `W`, for planar partitions.
    pub eta: Option<f64>,
}

pub fn classify_rectangles(partition: &MarkovPartition, w: &BadSetW, system: &HyperbolicSystem) -> Result<Classification> {
    let separation = w.min_separation(&system.norm);
    let delta0 = system.expansiveness_constant().min(separation / (1.0 + system.norm.forward_norm));
    if partition.diameter >= delta0 {
        return Err(Error::DiameterTooLarge { diameter: partition.diameter, delta0 });
    }
    let points = w.points_f64();
    let containing: Vec<Vec<usize>> = points.iter().map(|p| partition.containing(p)).collect();
    let r0: BTreeSet<usize> = containing.iter().flatten().copied().collect();
    let r1: Vec<usize> = (0..partition.len()).filter(|i| !r0.contains(i)).collect();
    let successor_failures: Vec<usize> = r0
        .iter()
        .copied()
        .filter(|&i| r0.iter().filter(|&&j| partition.adjacency[i][j] > 0).count() != 1)
        .collect();
    let eta = partition.planar.as_ref().map(|p| {
        r1.iter()
            .flat_map(|&i| points.iter().map(move |w| (i, w)))
            .map(|(i, w)| box_distance(&p.frame, &p.boxes[i], w))
            .fold(f64::INFINITY, f64::min)
    });
    Ok(Classification {
        m0: r0.len(),
        m1: r1.len(),
        r0: r0.into_iter().collect(),
        r1,
        delta0,
        containing,
        unique_successor: successor_failures.is_empty(),
        successor_failures,
        eta,
    })
}

/// Torus distance in the adapted norm from a point to a rectangle, capped at 1.
fn box_distance(frame: &EigenFrame, b: &EigenBox, point: &[f64]) -> f64 {
    let cap = 1.0;
    let p = frame.to_eigen([point[0], point[1]]);
    let (rs, ru) = (cap / frame.stable_weight, cap / frame.unstable_weight);
    let s = [p[0] - b.s[1] - rs, p[0] - b.s[0] + rs];
    let u = [p[1] - b.u[1] - ru, p[1] - b.u[0] + ru];
    let gap = |x: f64, lo: f64, hi: f64| (lo - x).max(x - hi).max(0.0);
    frame
        .lattice_points(s, u)
        .into_iter()
        .map(|(_, c)| {
            let gs = gap(p[0], b.s[0] + c[0], b.s[1] + c[0]);
            let gu = gap(p[1], b.u[0] + c[1], b.u[1] + c[1]);
            (frame.stable_weight * gs).max(frame.unstable_weight * gu)
        })
        .fold(cap, f64::min)
}

/// `k = 1 + ⌈c₂ log n / log(1/λ)⌉`.
pub fn block_length(n: u64, c2: f64, lambda: f64) -> usize {
    1 + (c2 * (n as f64).ln() / (1.0 / lambda).ln()).ceil().max(0.0) as usize
}

/// Blocks of `k` letters in the forward codes of `ρ/n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockReport {
    pub k: usize,
    pub r: usize,
    pub m0: usize,
    pub m1: usize,
    /// For each block index, the distinct blocks over all admissible words.
    pub blocks: Vec<Vec<Vec<usize>>>,
    /// For each block index, the most `R₁` letters in any of its blocks.
    pub g_counts: Vec<usize>,
    /// The most `R₁` letters in any whole word.
    pub g: usize,
    pub words: usize,
}

fn forward_words(rho: &[u64], n: u64, len: usize, partition: &MarkovPartition, system: &HyperbolicSystem) -> Vec<Vec<usize>> {
    let orbit = rational_orbit(system, rho, n, 0, len.saturating_sub(1));
    code_orbit(&orbit, 0, partition).words
}

fn split_blocks(words: &[Vec<usize>], k: usize, count: usize) -> Vec<Vec<Vec<usize>>> {
    (0..count)
        .map(|i| {
            let set: BTreeSet<Vec<usize>> = words.iter().map(|w| w[i * k..(i + 1) * k].to_vec()).collect();
            set.into_iter().collect()
        })
        .collect()
}

pub fn block_statistics(
    rho: &[u64],
    n: u64,
    partition: &MarkovPartition,
    system: &HyperbolicSystem,
    classification: &Classification,
    constants: &HyperbolicConstants,
    r: usize,
) -> Result<BlockReport> {
    if rho.iter().all(|&c| c % n == 0) {
        return Err(Error::Domain("ρ must be nonzero".into()));
    }
    let k = block_length(n, constants.c2, constants.lambda);
    let words = forward_words(rho, n, r * k, partition, system);
    if words.is_empty() {
        return Err(Error::EmptyIntersection { position: 0 });
    }
    let in_r1 = r1_mask(partition.len(), classification);
    let blocks = split_blocks(&words, k, r);
    let g_counts = blocks.iter().map(|bs| bs.iter().map(|b| count_r1(b, &in_r1)).max().unwrap_or(0)).collect();
    let g = words.iter().map(|w| count_r1(w, &in_r1)).max().unwrap_or(0);
    Ok(BlockReport { k, r, m0: classification.m0, m1: classification.m1, blocks, g_counts, g, words: words.len() })
}

fn r1_mask(m: usize, classification: &Classification) -> Vec<bool> {
    let mut mask = vec![false; m];
    for &i in &classification.r1 {
        mask[i] = true;
    }
    mask
}

fn count_r1(word: &[usize], in_r1: &[bool]) -> usize {
    word.iter().filter(|&&i| in_r1[i]).count()
}

/// Exhaustive check over `ρ ∈ T_n ∖ {0}` of the three block properties:
/// every first block meets `R₁`, first blocks of distinct `ρ` are distinct,
/// and the family of second blocks equals the family of first blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockPropertyCheck {
    pub n: u64,
    pub k: usize,
    /// `ρ` with a first block lying entirely in `R₀`.
    pub blocks_missing_r1: usize,
    /// Pairs `ρ ≠ ρ'` sharing a first block.
    pub shared_first_blocks: usize,
    pub shift_invariant: bool,
    pub holds: bool,
}

/// First and second `k`-blocks of one orbit code.
type BlockPair = (Vec<Vec<usize>>, Vec<Vec<usize>>);

pub fn check_block_properties(
    n: u64,
    partition: &MarkovPartition,
    system: &HyperbolicSystem,
    classification: &Classification,
    constants: &HyperbolicConstants,
) -> Result<BlockPropertyCheck> {
    let d = system.dim();
    let states = (n as u128).pow(d as u32);
    if states > 1 << 24 {
        return Err(Error::BudgetExceeded { states, cap: 1 << 24 });
    }
    let k = block_length(n, constants.c2, constants.lambda);
    let in_r1 = r1_mask(partition.len(), classification);
    let per_rho: Vec<Option<BlockPair>> = map_range(states as usize - 1, |idx| {
        let mut rho = vec![0u64; d];
        let mut rem = idx as u64 + 1;
        for c in rho.iter_mut() {
            *c = rem % n;
            rem /= n;
        }
        let words = forward_words(&rho, n, 2 * k, partition, system);
        if words.is_empty() {
            return None;
        }
        let mut blocks = split_blocks(&words, k, 2);
        let second = blocks.pop().expect("two blocks");
        let first = blocks.pop().expect("two blocks");
        Some((first, second))
    });
    if per_rho.iter().any(Option::is_none) {
        return Err(Error::Numerical(format!("some orbit of T_{n} has no admissible code")));
    }
    let per_rho: Vec<BlockPair> = per_rho.into_iter().flatten().collect();
    let blocks_missing_r1 = per_rho.iter().filter(|(first, _)| first.iter().any(|b| count_r1(b, &in_r1) == 0)).count();
    let mut owners: HashMap<&[usize], usize> = HashMap::new();
    let mut shared = 0;
    for (idx, (first, _)) in per_rho.iter().enumerate() {
        for b in first {
            match owners.get(b.as_slice()) {
                Some(&o) if o != idx => shared += 1,
                Some(_) => {}
                None => {
                    owners.insert(b.as_slice(), idx);
                }
            }
        }
    }
    let mut firsts: Vec<&Vec<Vec<usize>>> = per_rho.iter().map(|p| &p.0).collect();
    let mut seconds: Vec<&Vec<Vec<usize>>> = per_rho.iter().map(|p| &p.1).collect();
    firsts.sort();
    seconds.sort();
    let shift_invariant = firsts == seconds;
    Ok(BlockPropertyCheck {
        n,
        k,
        blocks_missing_r1,
        shared_first_blocks: shared,
        shift_invariant,
        holds: blocks_missing_r1 == 0 && shared == 0 && shift_invariant,
    })
}

/// Smallest tested `n` from which every larger tested `n` satisfies the
/// block properties.
pub fn block_threshold(checks: &[BlockPropertyCheck]) -> Option<u64> {
    let mut sorted: Vec<&BlockPropertyCheck> = checks.iter().collect();
    sorted.sort_by_key(|c| c.n);
    let mut threshold = None;
    for c in sorted.iter().rev() {
        if !c.holds {
            break;
        }
        threshold = Some(c.n);
    }
    threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::bad_set_w;
    use crate::lattice::invariant_subgroup;
    use crate::measure::IncrementMeasure;
    use proptest::prelude::*;

    fn cat() -> IntMatrix {
        IntMatrix::from_slice(2, 2, &[2, 1, 1, 1])
    }

    fn fib() -> IntMatrix {
        IntMatrix::from_slice(2, 2, &[1, 1, 1, 0])
    }

    fn golden_square() -> f64 {
        (3.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn base_partition_of_the_cat_map_is_markov() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let p = base_partition(&sys).unwrap();
        assert_eq!(p.len(), 2);
        // polygon area oracle: shoelace over the four corners of each parallelogram
        let area: f64 = p
            .rectangles
            .iter()
            .map(|r| {
                let v = r.vertices();
                let ring = [&v[0], &v[1], &v[3], &v[2]];
                let twice: f64 = (0..4).map(|i| ring[i][0] * ring[(i + 1) % 4][1] - ring[(i + 1) % 4][0] * ring[i][1]).sum();
                twice.abs() / 2.0
            })
            .sum();
        assert!((area - 1.0).abs() < 1e-9);
        let report = verify_markov(&p.rectangles, &sys, 300, 1);
        assert_eq!(report.uncovered, 0, "{report:?}");
        assert_eq!(report.overlapping, 0);
        assert_eq!(report.violations, 0, "{report:?}");
        assert_eq!(report.product_violations, 0);
        assert!(report.max_misalignment < 1e-9);
    }

    #[test]
    fn refined_cat_partition_has_the_right_entropy() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let p = build_partition_for(&sys, 0.5 * sys.expansiveness_constant()).unwrap();
        assert!(p.adjacency_is_stable());
        assert!(p.transition_counts().iter().flatten().all(|&c| c <= 1));
        let root = p.perron_root();
        assert!(root.upper - root.lower < 1e-10);
        assert!((root.estimate.ln() - golden_square().ln()).abs() < 1e-6, "{root:?}");
        let report = verify_markov(&p.rectangles, &sys, 200, 2);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn orientation_reversing_matrix_gets_a_markov_partition() {
        let sys = HyperbolicSystem::new(&fib()).unwrap();
        let p = build_partition_for(&sys, 0.9 * sys.expansiveness_constant()).unwrap();
        let report = verify_markov(&p.rectangles, &sys, 200, 3);
        assert!(report.passed, "{report:?}");
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.perron_root().estimate.ln() - phi.ln()).abs() < 1e-6);
    }

    #[test]
    fn refinement_rounds_contract_the_diameter() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let mut p = base_partition(&sys).unwrap();
        for _ in 0..3 {
            let next = p.refine_round().unwrap();
            assert!(next.diameter <= sys.norm.lambda * p.diameter + TAU_GEO);
            assert!((next.total_area() - 1.0).abs() < 1e-9);
            p = next;
        }
    }

    #[test]
    fn sheared_rectangle_is_caught() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let p = build_partition_for(&sys, sys.expansiveness_constant()).unwrap();
        let mut rects = p.rectangles.clone();
        let e = rects[0].edges[0].clone();
        rects[0].edges[0] = vec![e[0] + 0.02 * rects[0].edges[1][0], e[1] + 0.02 * rects[0].edges[1][1]];
        let report = verify_markov(&rects, &sys, 200, 4);
        assert!(!report.passed);
        assert!(report.max_misalignment > 1e-3);
        assert!(report.worst_violation > TAU_GEO);
    }

    #[test]
    fn whole_torus_is_rejected() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let whole = Rectangle::parallelogram(0, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let report = verify_markov(&[whole], &sys, 100, 5);
        assert!((report.total_volume - 1.0).abs() < 1e-12);
        assert!(!report.diameter_ok);
        assert!(!report.passed);
    }

    #[test]
    fn three_dimensional_partitions_are_only_verified() {
        let a = IntMatrix::from_slice(3, 3, &[0, 1, 0, 0, 0, 1, 1, 1, 0]);
        assert!(matches!(build_partition_2d(&a, 0.1), Err(Error::DimensionUnsupported(3))));
        let sys = HyperbolicSystem::new(&a).unwrap();
        let cube = Rectangle { id: 0, anchor: vec![0.0; 3], edges: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]] };
        let report = verify_markov(&[cube], &sys, 50, 6);
        assert_eq!(report.uncovered, 0);
        assert!(!report.passed);
    }

    #[test]
    fn non_hyperbolic_matrix_is_refused() {
        let a = IntMatrix::from_slice(2, 2, &[1, 1, 0, 1]);
        assert!(matches!(build_partition_2d(&a, 0.1), Err(Error::NotHyperbolic)));
    }

    #[test]
    fn fixed_point_codes_are_periodic() {
        let sys = HyperbolicSystem::new(&fib()).unwrap();
        let p = build_partition_for(&sys, 0.9 * sys.expansiveness_constant()).unwrap();
        let window = code_point(&[0.0, 0.0], &p, &sys, 6);
        assert!(!window.words.is_empty());
        for w in &window.words {
            let period = (1..=p.len()).find(|&q| (0..w.len() - q).all(|i| w[i] == w[i + q]));
            assert!(period.is_some(), "{w:?}");
        }
    }

    #[test]
    fn constant_word_decodes_to_the_fixed_point() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let p = build_partition_for(&sys, sys.expansiveness_constant()).unwrap();
        let loops: Vec<usize> = p.containing(&[0.0, 0.0]).into_iter().filter(|&i| p.adjacency[i][i] > 0).collect();
        assert!(!loops.is_empty());
        let i = loops[0];
        let mut last = f64::INFINITY;
        for half in [2usize, 4, 8, 16] {
            let word = vec![i; 2 * half + 1];
            let dec = decode_word(&word, half, &p).unwrap();
            let dist = sys.distance(&dec.point, &[0.0, 0.0]);
            assert!(dist <= dec.radius + 1e-12);
            assert!(dec.radius < last);
            last = dec.radius;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn inadmissible_words_do_not_decode() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let p = build_partition_for(&sys, sys.expansiveness_constant()).unwrap();
        let (i, j) = (0..p.len())
            .flat_map(|i| (0..p.len()).map(move |j| (i, j)))
            .find(|&(i, j)| p.adjacency[i][j] == 0)
            .unwrap();
        assert!(matches!(decode_word(&[i, j], 0, &p), Err(Error::EmptyIntersection { .. })));
    }

    #[test]
    fn radius_shrinks_by_lambda_per_two_letters() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let p = build_partition_for(&sys, sys.expansiveness_constant()).unwrap();
        let xi = [std::f64::consts::FRAC_1_PI, std::f64::consts::FRAC_1_SQRT_2];
        let mut prev: Option<f64> = None;
        for k in 3..9 {
            let w = code_point(&xi, &p, &sys, k);
            let dec = decode_word(w.word().unwrap(), k, &p).unwrap();
            if let Some(r) = prev {
                let ratio = dec.radius / r;
                assert!(ratio <= sys.norm.lambda + 1e-9, "ratio {ratio}");
            }
            prev = Some(dec.radius);
        }
    }

    #[test]
    fn bad_set_classification_for_the_fibonacci_walk() {
        let a = fib();
        let mu = IncrementMeasure::uniform(vec![vec![0, 0], vec![1, 0], vec![-1, 0]]).unwrap();
        let at = a.transpose();
        let sys = HyperbolicSystem::new(&at).unwrap();
        let w = bad_set_w(&invariant_subgroup(&a, &mu).unwrap()).unwrap();
        let coarse = base_partition(&sys).unwrap();
        assert!(matches!(classify_rectangles(&coarse, &w, &sys), Err(Error::DiameterTooLarge { .. })));
        let p = build_partition_for(&sys, 0.99 * sys.expansiveness_constant()).unwrap();
        let c = classify_rectangles(&p, &w, &sys).unwrap();
        assert_eq!(c.m0 + c.m1, p.len());
        assert!(c.m0 >= 1);
        assert!(c.unique_successor, "{c:?}");
        assert!(c.eta.unwrap() > 0.0);
    }

    #[test]
    fn cross_partition_keeps_rectangles_away_from_the_origin() {
        let sys = HyperbolicSystem::new(&fib()).unwrap();
        let p = widest_cross_partition(&sys, &[vec![0.0, 0.0]], sys.expansiveness_constant(), 6.0).unwrap();
        let report = verify_markov(&p.rectangles, &sys, 300, 7);
        assert!(report.passed, "{report:?}");
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.perron_root().estimate - phi).abs() < 1e-9);
        // lattice points with |s|,|u| both small satisfy |s·u| = |x² − xy − y²| / √5,
        // so the four boxes at 0 are squares of side φ⁻² / √(1 + φ²)
        let side = phi.powi(-2) / (1.0 + phi * phi).sqrt();
        let w = BadSetW { points: vec![vec![num_rational::BigRational::from_integer(0.into()); 2]], factors: vec![1.into(); 2] };
        let c = classify_rectangles(&p, &w, &sys).unwrap();
        assert_eq!(c.m0, 4);
        assert!(c.unique_successor);
        assert!((c.eta.unwrap() - side).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn cross_partition_around_a_larger_bad_set() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        let half = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.5], vec![0.5, 0.5]];
        let p = widest_cross_partition(&sys, &half, sys.expansiveness_constant(), 2.5).unwrap();
        let report = verify_markov(&p.rectangles, &sys, 200, 8);
        assert!(report.passed, "{report:?}");
        for w in &half {
            assert!(p.containing(w).len() >= 2, "{w:?} should sit on a corner");
        }
    }

    #[test]
    fn dangling_segments_are_refused() {
        let sys = HyperbolicSystem::new(&cat()).unwrap();
        assert!(cross_partition(&sys, &[vec![0.0, 0.0]], 0.3, 0.3).is_err());
    }

    #[test]
    fn block_length_matches_formula() {
        assert_eq!(block_length(1, 2.0, 0.5), 1);
        assert_eq!(block_length(64, 2.0, 0.5), 1 + 12);
    }

    #[test]
    fn block_threshold_reads_from_the_top() {
        let mk = |n, holds| BlockPropertyCheck { n, k: 1, blocks_missing_r1: 0, shared_first_blocks: 0, shift_invariant: true, holds };
        assert_eq!(block_threshold(&[mk(5, true), mk(7, false), mk(9, true), mk(11, true)]), Some(9));
        assert_eq!(block_threshold(&[mk(5, true), mk(7, false)]), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn coding_commutes_with_the_shift(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let sys = HyperbolicSystem::new(&cat()).unwrap();
            let p = build_partition_for(&sys, sys.expansiveness_constant()).unwrap();
            let w = code_point(&[x, y], &p, &sys, 5);
            let shifted = code_point(&sys.step(&[x, y]), &p, &sys, 5);
            prop_assume!(!w.ambiguous && !shifted.ambiguous);
            let (a, b) = (w.word().unwrap(), shifted.word().unwrap());
            prop_assert_eq!(&a[1..], &b[..b.len() - 1]);
        }

        #[test]
        fn decoding_recovers_the_point(x in 0.0f64..1.0, y in 0.0f64..1.0, k in 2usize..10) {
            let sys = HyperbolicSystem::new(&cat()).unwrap();
            let p = build_partition_for(&sys, sys.expansiveness_constant()).unwrap();
            let w = code_point(&[x, y], &p, &sys, k);
            let dec = decode_word(w.word().unwrap(), k, &p).unwrap();
            prop_assert!(sys.distance(&dec.point, &[x, y]) <= dec.radius + 1e-9);
            prop_assert!(dec.radius <= p.diameter * sys.norm.lambda.powi(k as i32) + 1e-9);
        }
    }
}
