//! Monodromy of a meshed torus family by transporting marked cycles from
//! each fiber to the next: every vertex of a marked loop is matched to the
//! nearest vertex of the successor's lifted grid, and the lattice class of
//! the matched path is read off from its endpoint.

use super::sl2z::Mat2;
use super::FibrationError;
use crate::ambient::{CalabiModelSpec, FlatTorusCY};
use crate::lagmesh::{build_model_slag, Deck, H1Loop, ImmersedLagrangian, SlagModelSpec};
use crate::{par, Point};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusFamily {
    /// Base points of the fibers; first and last describe the same fiber.
    pub base_loop: Vec<[f64; 2]>,
    pub fibers: Vec<ImmersedLagrangian>,
    pub degree: i64,
    /// Columns are the marked classes in grid coordinates of the first fiber.
    pub basis: Mat2,
    pub basis_labels: [String; 2],
    /// Ambient deck map taking the last fiber onto the first.
    pub closing: Option<Deck>,
}

impl TorusFamily {
    /// Same family with the marked basis replaced by basis·u.
    pub fn with_basis_change(mut self, u: Mat2) -> Self {
        self.basis = self.basis * u;
        self
    }

    fn validate(&self) -> Result<(), FibrationError> {
        if self.fibers.len() < 2 {
            return Err(FibrationError::Precondition("a family needs at least two fibers".into()));
        }
        let res = self.fibers[0].resolution;
        if self.fibers.iter().any(|f| f.resolution != res) {
            return Err(FibrationError::Precondition("fibers must share one grid resolution".into()));
        }
        if self.basis.det().abs() != 1 {
            return Err(FibrationError::Precondition(format!("marked basis {} is not unimodular", self.basis)));
        }
        Ok(())
    }
}

/// Integer matrix with determinant one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonodromyMatrix(Mat2);

impl MonodromyMatrix {
    pub fn new(m: Mat2) -> Result<Self, FibrationError> {
        match m.det() {
            1 => Ok(MonodromyMatrix(m)),
            d => Err(FibrationError::Determinant(d)),
        }
    }

    pub fn matrix(&self) -> Mat2 {
        self.0
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.0 .0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReport {
    pub monodromy: MonodromyMatrix,
    /// Grid-coordinate class map of each step, the closing step last.
    pub steps: Vec<Mat2>,
    /// Largest vertex-to-match distance of each step.
    pub match_distance: Vec<f64>,
}

fn dist(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Lifted vertices of a fiber over the 3×3 block of neighbouring periods,
/// with the separation scale used as matching tolerance.
struct LiftedGrid<'a> {
    lag: &'a ImmersedLagrangian,
    m: [isize; 2],
    pts: Vec<Point>,
    proxy: f64,
}

impl<'a> LiftedGrid<'a> {
    fn new(lag: &'a ImmersedLagrangian) -> Self {
        let m = [lag.resolution[0] as isize, lag.resolution[1] as isize];
        let mut pts = Vec::with_capacity((9 * m[0] * m[1]) as usize);
        for j in -m[1]..2 * m[1] {
            for i in -m[0]..2 * m[0] {
                pts.push(lag.lifted(i, j));
            }
        }
        let mut g = LiftedGrid { lag, m, pts, proxy: f64::INFINITY };
        g.proxy = g.separation();
        g
    }

    fn get(&self, i: isize, j: isize) -> Point {
        let [m1, m2] = self.m;
        if (-m1..2 * m1).contains(&i) && (-m2..2 * m2).contains(&j) {
            self.pts[((j + m2) * 3 * m1 + i + m1) as usize].clone()
        } else {
            self.lag.lifted(i, j)
        }
    }

    fn candidates(&self) -> impl Iterator<Item = ((isize, isize), &Point)> + '_ {
        let [m1, m2] = self.m;
        self.pts.iter().enumerate().map(move |(k, p)| {
            let k = k as isize;
            ((k % (3 * m1) - m1, k / (3 * m1) - m2), p)
        })
    }

    /// Smallest ambient distance from a vertex on a marked loop to its own
    /// images under the nontrivial deck maps of the grid.
    fn separation(&self) -> f64 {
        let [m1, m2] = self.m;
        let samples = (0..m1).map(|i| (i, 0)).chain((1..m2).map(|j| (0, j)));
        let mut best = f64::INFINITY;
        for (i, j) in samples {
            let p = self.get(i, j);
            for b in -2..=2 {
                for a in -2..=2 {
                    if (a, b) != (0, 0) {
                        best = best.min(dist(&p, &self.get(i + a * m1, j + b * m2)));
                    }
                }
            }
        }
        best
    }
}

/// Class in `to`'s grid coordinates of the closed path through `pts`.
/// A match is accepted when every vertex lies within half the deck
/// separation of the successor, which rules out matching a deck image.
fn match_loop(
    pts: &[Point],
    to: &LiftedGrid,
    step: usize,
    direction: usize,
) -> Result<([i64; 2], f64), FibrationError> {
    let [m1, m2] = to.m;
    let tol = 0.5 * to.proxy;
    let ambiguity = |detail: String| FibrationError::Ambiguity { step, direction, detail };
    let (mut best, mut idx) = (f64::INFINITY, (0, 0));
    for (k, q) in to.candidates() {
        let d = dist(&pts[0], q);
        if d < best {
            (best, idx) = (d, k);
        }
    }
    if best >= tol {
        return Err(ambiguity(format!("nearest vertex at {best:.3e}, tolerance {tol:.3e}")));
    }
    let start = idx;
    let mut worst = best;
    for p in &pts[1..] {
        let mut local = (f64::INFINITY, idx);
        for dj in -3..=3 {
            for di in -3..=3 {
                let d = dist(p, &to.get(idx.0 + di, idx.1 + dj));
                if d < local.0 {
                    local = (d, (idx.0 + di, idx.1 + dj));
                }
            }
        }
        if local.0 >= tol {
            return Err(ambiguity(format!("path leaves the successor fiber (distance {:.3e})", local.0)));
        }
        worst = worst.max(local.0);
        idx = local.1;
    }
    let (fi, fj) = ((idx.0 - start.0) as f64 / m1 as f64, (idx.1 - start.1) as f64 / m2 as f64);
    let (ri, rj) = (fi.round(), fj.round());
    if (fi - ri).abs() > 0.25 || (fj - rj).abs() > 0.25 {
        return Err(ambiguity(format!("matched path does not close up (shift {fi:.3}, {fj:.3} periods)")));
    }
    Ok(([ri as i64, rj as i64], worst))
}

fn transport_step(
    from: &ImmersedLagrangian,
    to: &LiftedGrid,
    map: Option<&Deck>,
    step: usize,
) -> Result<(Mat2, f64), FibrationError> {
    let mut cols = [[0i64; 2]; 2];
    let mut worst = 0.0f64;
    for (direction, col) in cols.iter_mut().enumerate() {
        let mut pts = from.loop_points(&H1Loop { label: String::new(), direction });
        if let Some(deck) = map {
            pts = pts.iter().map(|p| deck.apply(p, -1)).collect();
        }
        let (c, d) = match_loop(&pts, to, step, direction)?;
        *col = c;
        worst = worst.max(d);
    }
    Ok((Mat2::from_columns(cols[0], cols[1]), worst))
}

/// Monodromy of the family in its marked basis: the matrix expressing the
/// transported basis in the initial one.
pub fn monodromy(family: &TorusFamily) -> Result<MonodromyReport, FibrationError> {
    family.validate()?;
    let n = family.fibers.len();
    let results = par::try_map_indexed(n, |k| {
        let to = LiftedGrid::new(&family.fibers[(k + 1) % n]);
        let map = if k + 1 == n { family.closing.as_ref() } else { None };
        transport_step(&family.fibers[k], &to, map, k)
    })?;
    let (steps, match_distance): (Vec<Mat2>, Vec<f64>) = results.into_iter().unzip();
    let grid = steps.iter().fold(Mat2::IDENTITY, |acc, s| *s * acc);
    let b = family.basis;
    let inv = b.inverse().expect("validated");
    let monodromy = MonodromyMatrix::new(inv * grid * b)?;
    Ok(MonodromyReport { monodromy, steps, match_distance })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFibrationOptions {
    pub steps: usize,
    pub resolution: [usize; 2],
    pub epsilon: f64,
}

impl Default for ModelFibrationOptions {
    fn default() -> Self {
        ModelFibrationOptions { steps: 128, resolution: [96, 16], epsilon: (-4.0f64).exp() }
    }
}

/// Calabi model over the unit square elliptic curve with κ = dπ, so the
/// polarization has degree d.
fn model_ambient(d: i64) -> Result<CalabiModelSpec, FibrationError> {
    if d < 1 {
        return Err(FibrationError::Precondition(format!("degree {d} must be positive")));
    }
    let kappa = d as f64 * PI;
    let base = FlatTorusCY::square(1, 1.0, kappa).map_err(|e| FibrationError::Precondition(e.to_string()))?;
    CalabiModelSpec::new(base, kappa).map_err(|e| FibrationError::Precondition(e.to_string()))
}

fn model_fiber(
    amb: &CalabiModelSpec,
    opts: &ModelFibrationOptions,
    c: f64,
) -> Result<ImmersedLagrangian, FibrationError> {
    let mut spec = SlagModelSpec::new(opts.epsilon, [1, 0], opts.resolution);
    spec.base_point = [0.0, c];
    Ok(build_model_slag(amb, &spec)?)
}

// fiber circle first, then the lifted geodesic
fn model_basis() -> (Mat2, [String; 2]) {
    (Mat2::from_columns([0, 1], [1, 0]), ["fiber circle".into(), "lifted N".into()])
}

/// Torus fibers M_ε over the horizontal geodesics Im z = c, with c running
/// once around the vertical period: the loop around the fiber at infinity.
pub fn model_fibration(d: i64, opts: &ModelFibrationOptions) -> Result<TorusFamily, FibrationError> {
    let amb = model_ambient(d)?;
    if opts.steps < 1 {
        return Err(FibrationError::Precondition("need at least one step".into()));
    }
    let fibers = (0..=opts.steps)
        .map(|k| model_fiber(&amb, opts, k as f64 / opts.steps as f64))
        .collect::<Result<Vec<_>, _>>()?;
    let base_loop = (0..=opts.steps).map(|k| [0.0, k as f64 / opts.steps as f64]).collect();
    let (basis, basis_labels) = model_basis();
    Ok(TorusFamily {
        base_loop,
        fibers,
        degree: d,
        basis,
        basis_labels,
        closing: Some(Deck::Automorphy(amb.automorphy(&[0, 1], 0.0))),
    })
}

/// Constant family over a null loop.
pub fn null_family(d: i64, opts: &ModelFibrationOptions) -> Result<TorusFamily, FibrationError> {
    let amb = model_ambient(d)?;
    let f = model_fiber(&amb, opts, 0.0)?;
    let (basis, basis_labels) = model_basis();
    Ok(TorusFamily {
        base_loop: vec![[0.0, 0.0]; opts.steps.max(1) + 1],
        fibers: vec![f; opts.steps.max(1) + 1],
        degree: d,
        basis,
        basis_labels,
        closing: None,
    })
}
