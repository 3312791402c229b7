//! Geodesic balls by Dijkstra on the eight-neighbour graph and the
//! κ-noncollapsing test.

use super::geometry::{cell_jet, induced};
use super::{ImmersedLagrangian, LagError};
use crate::ambient::MetricField;
use crate::par;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const STEPS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)];

struct Graph {
    /// edge lengths indexed by vertex then STEPS slot
    edges: Vec<[f64; 8]>,
    mass: Vec<f64>,
}

fn graph<F: MetricField + ?Sized>(field: &F, lag: &ImmersedLagrangian) -> Result<Graph, LagError> {
    let [m1, _] = lag.resolution;
    let [h1, h2] = lag.spacing();
    let edges = par::try_map_indexed(lag.len(), |v| -> Result<[f64; 8], LagError> {
        let (i, j) = lag.coords(v);
        let (i, j) = (i as isize, j as isize);
        let p = lag.lifted(i, j);
        let mut out = [0.0; 8];
        for (s, &(di, dj)) in STEPS.iter().enumerate() {
            let q = lag.lifted(i + di, j + dj);
            let mid = (&p + &q) * 0.5;
            let g = field.metric(&mid)?;
            let d = &q - &p;
            out[s] = d.dot(&(&g * &d)).max(0.0).sqrt();
        }
        Ok(out)
    })?;
    let areas = par::try_map_indexed(lag.len(), |c| -> Result<f64, LagError> {
        let (i, j) = (c % m1, c / m1);
        let jet = cell_jet(lag, i, j);
        let g = field.metric(&jet.center)?;
        Ok(induced(&g, &jet.t).determinant().max(0.0).sqrt() * h1 * h2)
    })?;
    let mut mass = vec![0.0; lag.len()];
    for (c, a) in areas.iter().enumerate() {
        let (i, j) = ((c % m1) as isize, (c / m1) as isize);
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            mass[lag.wrapped(i + di, j + dj)] += 0.25 * a;
        }
    }
    Ok(Graph { edges, mass })
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal)
    }
}

fn distances(lag: &ImmersedLagrangian, gr: &Graph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; lag.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Item(0.0, source));
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        let (i, j) = lag.coords(v);
        for (s, &(di, dj)) in STEPS.iter().enumerate() {
            let w = lag.wrapped(i as isize + di, j as isize + dj);
            let nd = d + gr.edges[v][s];
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Item(nd, w));
            }
        }
    }
    dist
}

/// Vol(B(p, r)) for every basepoint and radius, with the graph diameter seen
/// from the first basepoint.
pub fn ball_volumes<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    basepoints: &[usize],
    radii: &[f64],
) -> Result<(Vec<Vec<f64>>, f64), LagError> {
    let gr = graph(field, lag)?;
    let per: Vec<(Vec<f64>, f64)> = par::map_indexed(basepoints.len(), |b| {
        let d = distances(lag, &gr, basepoints[b]);
        let vols =
            radii.iter().map(|&r| d.iter().zip(&gr.mass).filter(|(x, _)| **x <= r).map(|(_, m)| m).sum()).collect();
        (vols, d.iter().cloned().fold(0.0, f64::max))
    });
    let diam = per.first().map(|x| x.1).unwrap_or(0.0);
    Ok((per.into_iter().map(|x| x.0).collect(), diam))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoncollapseOutcome {
    pub pass: bool,
    /// (vertex, r, Vol(B)/r²) of the worst violation.
    pub witness: Option<(usize, f64, f64)>,
    /// (r, min over basepoints of Vol(B(p, r))/r²)
    pub table: Vec<(f64, f64)>,
}

/// Vol(B(p, r)) ≥ κ r² for `samples`² evenly spread basepoints and eight
/// radii up to r₀.
pub fn noncollapse_check<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    kappa: f64,
    r0: f64,
    samples: usize,
) -> Result<NoncollapseOutcome, LagError> {
    let [m1, m2] = lag.resolution;
    let s = samples.max(1);
    let basepoints: Vec<usize> = (0..s * s).map(|k| lag.index((k % s) * m1 / s, (k / s) * m2 / s)).collect();
    let radii: Vec<f64> = (1..=8).map(|q| r0 * q as f64 / 8.0).collect();
    let (vols, diam) = ball_volumes(field, lag, &basepoints, &radii)?;
    if r0 >= diam {
        return Err(LagError::Precondition(format!("r₀ = {r0} is not below the mesh diameter {diam}")));
    }
    let mut table = Vec::new();
    let mut witness: Option<(usize, f64, f64)> = None;
    for (q, &r) in radii.iter().enumerate() {
        let mut worst = f64::INFINITY;
        for (b, v) in vols.iter().enumerate() {
            let ratio = v[q] / (r * r);
            worst = worst.min(ratio);
            if ratio < kappa && witness.map_or(true, |w| ratio < w.2) {
                witness = Some((basepoints[b], r, ratio));
            }
        }
        table.push((r, worst));
    }
    Ok(NoncollapseOutcome { pass: witness.is_none(), witness, table })
}
