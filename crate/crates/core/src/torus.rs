//! Geometry of the flat torus `(R / 2πZ)^d`.
//!
//! Sceneries are finite unions of open axis-aligned boxes. Every box is
//! stored as a product of intervals inside `[0, 2π]`; a box that crosses the
//! seam at `0 ≡ 2π` is split into fragments. Measures, intersections and
//! translations are computed exactly on a disjoint decomposition of the
//! union (the "cells"), so spatial correlations of box sceneries carry no
//! quadrature error in any dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use std::f64::consts::TAU;

/// Reduce a real number into `[0, 2π)`.
pub fn wrap_scalar(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid rounds tiny negatives up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A point of `T^d` with every coordinate in `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn origin(dim: usize) -> Self {
        TorusPoint(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Componentwise `self + other`, wrapped.
    pub fn add(&self, other: &TorusPoint) -> TorusPoint {
        TorusPoint(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| wrap_scalar(a + b))
                .collect(),
        )
    }

    pub fn neg(&self) -> TorusPoint {
        TorusPoint(self.0.iter().map(|a| wrap_scalar(-a)).collect())
    }
}

/// Componentwise reduction mod 2π into `[0, 2π)`.
pub fn wrap(x: &[f64]) -> Result<TorusPoint> {
    x.iter()
        .map(|&v| {
            if v.is_finite() {
                Ok(wrap_scalar(v))
            } else {
                Err(Error::NonFinite(v))
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(TorusPoint)
}

/// Open interval `(lo, hi)` with `0 ≤ lo < hi ≤ 2π`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then_some(Interval { lo, hi })
    }

    fn contains_open(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// Shift by `s` and split at the seam; up to two fragments.
    fn shifted(&self, s: f64) -> impl Iterator<Item = Interval> {
        let len = self.len();
        let lo = wrap_scalar(self.lo + s);
        let hi = lo + len;
        let (first, second) = if hi <= TAU {
            (Interval { lo, hi }, None)
        } else {
            (
                Interval { lo, hi: TAU },
                Some(Interval {
                    lo: 0.0,
                    hi: hi - TAU,
                }),
            )
        };
        std::iter::once(first)
            .chain(second)
            .filter(|iv| !iv.is_empty())
    }
}

/// An open axis-aligned box that does not cross the seam.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusBox {
    pub sides: Vec<Interval>,
}

impl TorusBox {
    pub fn volume(&self) -> f64 {
        self.sides.iter().map(Interval::len).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.sides.iter().zip(x).all(|(iv, &c)| iv.contains_open(c))
    }

    fn intersect(&self, other: &TorusBox) -> Option<TorusBox> {
        self.sides
            .iter()
            .zip(&other.sides)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(|sides| TorusBox { sides })
    }

    /// Translate by `shift`, splitting into at most `2^d` seam-free fragments.
    fn translated(&self, shift: &[f64]) -> Vec<TorusBox> {
        let mut out = vec![TorusBox { sides: Vec::new() }];
        for (iv, &s) in self.sides.iter().zip(shift) {
            let pieces: Vec<Interval> = iv.shifted(s).collect();
            out = out
                .into_iter()
                .flat_map(|b| {
                    pieces.iter().map(move |p| {
                        let mut sides = b.sides.clone();
                        sides.push(*p);
                        TorusBox { sides }
                    })
                })
                .collect();
        }
        out
    }

    fn reflected(&self) -> TorusBox {
        TorusBox {
            sides: self
                .sides
                .iter()
                .map(|iv| Interval {
                    lo: TAU - iv.hi,
                    hi: TAU - iv.lo,
                })
                .collect(),
        }
    }
}

/// A finite disjoint union of seam-free open boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    dim: usize,
    boxes: Vec<TorusBox>,
}

impl BoxSet {
    pub fn empty(dim: usize) -> Self {
        BoxSet {
            dim,
            boxes: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[TorusBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.boxes.iter().map(TorusBox::volume).sum()
    }

    pub fn translate(&self, shift: &[f64]) -> BoxSet {
        BoxSet {
            dim: self.dim,
            boxes: self
                .boxes
                .iter()
                .flat_map(|b| b.translated(shift))
                .collect(),
        }
    }

    pub fn reflect(&self) -> BoxSet {
        BoxSet {
            dim: self.dim,
            boxes: self.boxes.iter().map(TorusBox::reflected).collect(),
        }
    }

    pub fn intersect(&self, other: &BoxSet) -> BoxSet {
        let mut boxes = Vec::new();
        for a in &self.boxes {
            for b in &other.boxes {
                if let Some(c) = a.intersect(b) {
                    boxes.push(c);
                }
            }
        }
        BoxSet {
            dim: self.dim,
            boxes,
        }
    }

    /// Measure of `self ∩ other` without materialising the intersection.
    pub fn intersection_measure(&self, other: &BoxSet) -> f64 {
        let mut total = 0.0;
        for a in &self.boxes {
            for b in &other.boxes {
                if let Some(c) = a.intersect(b) {
                    total += c.volume();
                }
            }
        }
        total
    }
}

/// A scenery `Ω`: finite union of open boxes on `T^d`.
///
/// `boxes` keeps the union as given (merged for `d = 1`) and answers
/// membership queries; `cells` is a disjoint decomposition used for every
/// measure computation.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenery {
    dim: usize,
    boxes: Vec<TorusBox>,
    cells: BoxSet,
}

impl Scenery {
    /// Build a scenery from boxes given as `d` intervals `(lo, hi)` each.
    pub fn new(dim: usize, boxes: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidScenery("dimension must be positive".into()));
        }
        let mut parsed = Vec::with_capacity(boxes.len());
        for (i, b) in boxes.into_iter().enumerate() {
            if b.len() != dim {
                return Err(Error::InvalidScenery(format!(
                    "box {i} has {} intervals, expected {dim}",
                    b.len()
                )));
            }
            let mut sides = Vec::with_capacity(dim);
            for (lo, hi) in b {
                if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > TAU || lo >= hi {
                    return Err(Error::InvalidScenery(format!(
                        "box {i}: interval ({lo}, {hi}) must satisfy 0 <= lo < hi <= 2pi"
                    )));
                }
                sides.push(Interval { lo, hi });
            }
            parsed.push(TorusBox { sides });
        }
        Ok(Self::from_boxes(dim, parsed))
    }

    /// `d = 1` convenience constructor.
    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self> {
        Self::new(1, intervals.iter().map(|&iv| vec![iv]).collect())
    }

    pub fn empty(dim: usize) -> Self {
        Self::from_boxes(dim, Vec::new())
    }

    fn from_boxes(dim: usize, boxes: Vec<TorusBox>) -> Self {
        if dim == 1 {
            let merged = merge_intervals(boxes.iter().map(|b| b.sides[0]).collect());
            let boxes: Vec<TorusBox> = merged
                .into_iter()
                .map(|iv| TorusBox { sides: vec![iv] })
                .collect();
            let cells = BoxSet {
                dim,
                boxes: boxes.clone(),
            };
            Scenery { dim, boxes, cells }
        } else {
            let cells = disjoint_cells(dim, &boxes);
            Scenery { dim, boxes, cells }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[TorusBox] {
        &self.boxes
    }

    pub fn cells(&self) -> &BoxSet {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `1` iff `x` lies strictly inside some box.
    pub fn indicator(&self, x: &TorusPoint) -> Result<u8> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok(self.contains(x.coords()) as u8)
    }

    /// Unchecked membership on already wrapped coordinates.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    pub fn measure(&self) -> f64 {
        self.cells.measure()
    }

    /// `Ω + θ`.
    pub fn translate(&self, shift: &[f64]) -> Scenery {
        let boxes = self
            .boxes
            .iter()
            .flat_map(|b| b.translated(shift))
            .collect();
        Self::from_boxes(self.dim, boxes)
    }

    /// `-Ω`, the image under `x ↦ -x`.
    pub fn reflect(&self) -> Scenery {
        Self::from_boxes(
            self.dim,
            self.boxes.iter().map(TorusBox::reflected).collect(),
        )
    }

    /// Number of boundary points of a one-dimensional scenery, counting an
    /// arc that crosses the seam as a single arc.
    pub fn boundary_points(&self) -> Option<usize> {
        if self.dim != 1 {
            return None;
        }
        let ivs: Vec<Interval> = self.boxes.iter().map(|b| b.sides[0]).collect();
        if ivs.is_empty() {
            return Some(0);
        }
        let mut count = 2 * ivs.len();
        let wraps = ivs.first().map(|f| f.lo == 0.0).unwrap_or(false)
            && ivs.last().map(|l| l.hi == TAU).unwrap_or(false);
        if wraps {
            count = count.saturating_sub(2);
        }
        Some(count)
    }

    /// `μ(self Δ other)`.
    pub fn symmetric_difference_measure(&self, other: &Scenery) -> f64 {
        let common = self.cells.intersection_measure(&other.cells);
        (self.measure() + other.measure() - 2.0 * common).max(0.0)
    }

    /// The union of `self` and `other`.
    pub fn union(&self, other: &Scenery) -> Scenery {
        let mut boxes = self.boxes.clone();
        boxes.extend(other.boxes.iter().cloned());
        Self::from_boxes(self.dim, boxes)
    }

    pub fn to_json(&self) -> SceneryJson {
        SceneryJson {
            dim: self.dim,
            boxes: self
                .boxes
                .iter()
                .map(|b| b.sides.iter().map(|iv| [iv.lo, iv.hi]).collect())
                .collect(),
        }
    }

    pub fn from_json(json: &SceneryJson) -> Result<Self> {
        Self::new(
            json.dim,
            json.boxes
                .iter()
                .map(|b| b.iter().map(|iv| (iv[0], iv[1])).collect())
                .collect(),
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let json: SceneryJson = serde_json::from_str(s)?;
        Self::from_json(&json)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("scenery json")
    }
}

/// Wire form: `{"dim": d, "boxes": [[[lo, hi], ...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SceneryJson {
    pub dim: usize,
    pub boxes: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<SceneryJson> for Scenery {
    type Error = Error;

    fn try_from(value: SceneryJson) -> Result<Self> {
        Scenery::from_json(&value)
    }
}

impl From<&Scenery> for SceneryJson {
    fn from(s: &Scenery) -> Self {
        s.to_json()
    }
}

/// Sort and merge strictly overlapping intervals. Touching intervals stay
/// separate so the shared endpoint remains outside the open set.
fn merge_intervals(mut ivs: Vec<Interval>) -> Vec<Interval> {
    ivs.retain(|iv| !iv.is_empty());
    ivs.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
    let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match out.last_mut() {
            Some(last) if iv.lo < last.hi => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

/// Disjoint decomposition by coordinate compression.
fn disjoint_cells(dim: usize, boxes: &[TorusBox]) -> BoxSet {
    if boxes.is_empty() {
        return BoxSet::empty(dim);
    }
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            let mut cuts: Vec<f64> = boxes
                .iter()
                .flat_map(|b| [b.sides[j].lo, b.sides[j].hi])
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts
        })
        .collect();
    let counts: Vec<usize> = axes.iter().map(|a| a.len().saturating_sub(1)).collect();
    let mut cells = Vec::new();
    let mut idx = vec![0usize; dim];
    if counts.contains(&0) {
        return BoxSet::empty(dim);
    }
    loop {
        let sides: Vec<Interval> = idx
            .iter()
            .enumerate()
            .map(|(j, &i)| Interval {
                lo: axes[j][i],
                hi: axes[j][i + 1],
            })
            .collect();
        let centre: Vec<f64> = sides.iter().map(|iv| 0.5 * (iv.lo + iv.hi)).collect();
        if boxes.iter().any(|b| b.contains(&centre)) {
            cells.push(TorusBox { sides });
        }
        // odometer
        let mut j = dim;
        loop {
            if j == 0 {
                return BoxSet { dim, boxes: cells };
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// Result of [`aligned_distance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub shift: Vec<f64>,
    pub reflected: bool,
    pub distance: f64,
}

/// `min_θ μ((a + θ) Δ b)` over the `resolution^d` shift grid, optionally
/// also over the reflection `x ↦ -x` (one-dimensional sceneries only).
/// Ties keep the first grid shift in odometer order, unreflected first.
pub fn aligned_distance(
    a: &Scenery,
    b: &Scenery,
    resolution: usize,
    allow_reflection: bool,
) -> Result<Alignment> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    if allow_reflection && a.dim != 1 {
        return Err(Error::Unsupported(
            "reflection alignment is defined for d = 1 only".into(),
        ));
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let mut candidates = vec![(false, a.cells.clone())];
    if allow_reflection {
        candidates.push((true, a.cells.reflect()));
    }
    let step = TAU / resolution as f64;
    let total = resolution.pow(a.dim as u32);
    let mut best: Option<Alignment> = None;
    let ma = a.measure();
    let mb = b.measure();
    for (reflected, cells) in &candidates {
        for flat in 0..total {
            let mut rem = flat;
            let mut shift = vec![0.0; a.dim];
            for s in shift.iter_mut().rev() {
                *s = (rem % resolution) as f64 * step;
                rem /= resolution;
            }
            let common = cells.translate(&shift).intersection_measure(&b.cells);
            let distance = (ma + mb - 2.0 * common).max(0.0);
            if best.as_ref().is_none_or(|cur| distance < cur.distance) {
                best = Some(Alignment {
                    shift,
                    reflected: *reflected,
                    distance,
                });
            }
        }
    }
    Ok(best.expect("at least one shift"))
}
