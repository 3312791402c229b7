//! Local jets of the mesh and the second fundamental form at a vertex.

use super::{ImmersedLagrangian, LagError};
use crate::ambient::{Christoffel, MetricField};
use crate::Point;
use nalgebra::{DMatrix, Matrix2};

/// Position, first and second parameter derivatives at a vertex (central
/// differences on the lifted grid).
#[derive(Clone, Debug)]
pub struct VertexJet {
    pub p: Point,
    pub t: [Point; 2],
    pub dd: [[Point; 2]; 2],
}

pub fn vertex_jet(lag: &ImmersedLagrangian, i: usize, j: usize) -> VertexJet {
    let [h1, h2] = lag.spacing();
    let (i, j) = (i as isize, j as isize);
    let x = |a: isize, b: isize| lag.lifted(i + a, j + b);
    let p = x(0, 0);
    let (e, w, n, s) = (x(1, 0), x(-1, 0), x(0, 1), x(0, -1));
    let t1 = (&e - &w) / (2.0 * h1);
    let t2 = (&n - &s) / (2.0 * h2);
    let d11 = (&e - &p * 2.0 + &w) / (h1 * h1);
    let d22 = (&n - &p * 2.0 + &s) / (h2 * h2);
    let d12 = (x(1, 1) - x(1, -1) - x(-1, 1) + x(-1, -1)) / (4.0 * h1 * h2);
    VertexJet { p, t: [t1, t2], dd: [[d11, d12.clone()], [d12, d22]] }
}

/// Cell center (corner average) and edge-averaged tangents of cell (i, j).
#[derive(Clone, Debug)]
pub struct CellJet {
    pub center: Point,
    pub t: [Point; 2],
}

pub fn cell_jet(lag: &ImmersedLagrangian, i: usize, j: usize) -> CellJet {
    let [h1, h2] = lag.spacing();
    let (i, j) = (i as isize, j as isize);
    let x00 = lag.lifted(i, j);
    let x10 = lag.lifted(i + 1, j);
    let x01 = lag.lifted(i, j + 1);
    let x11 = lag.lifted(i + 1, j + 1);
    let center = (&x00 + &x10 + &x01 + &x11) * 0.25;
    let t1 = ((&x10 - &x00) + (&x11 - &x01)) / (2.0 * h1);
    let t2 = ((&x01 - &x00) + (&x11 - &x10)) / (2.0 * h2);
    CellJet { center, t: [t1, t2] }
}

pub(crate) fn induced(g: &DMatrix<f64>, t: &[Point; 2]) -> Matrix2<f64> {
    Matrix2::from_fn(|a, b| t[a].dot(&(g * &t[b])))
}

#[derive(Clone, Debug)]
pub struct SecondFundamental {
    /// A(∂_i, ∂_j) as ambient normal vectors.
    pub a: [[Point; 2]; 2],
    pub h: Matrix2<f64>,
    pub hinv: Matrix2<f64>,
    pub g: DMatrix<f64>,
    pub mean: Point,
    pub a_norm2: f64,
    pub h_norm2: f64,
    /// |H − N(h^{ij}(∂²x + Γ(∂_i x, ∂_j x)))|_g
    pub trace_residual: f64,
}

impl SecondFundamental {
    /// g-orthogonal projection onto the normal space.
    pub fn normal_part(&self, t: &[Point; 2], v: &Point) -> Point {
        normal_part(&self.g, &self.hinv, t, v)
    }
}

pub(crate) fn normal_part(g: &DMatrix<f64>, hinv: &Matrix2<f64>, t: &[Point; 2], v: &Point) -> Point {
    let gv = g * v;
    let c = [t[0].dot(&gv), t[1].dot(&gv)];
    let mut out = v.clone();
    for a in 0..2 {
        let coef = hinv[(a, 0)] * c[0] + hinv[(a, 1)] * c[1];
        out -= &t[a] * coef;
    }
    out
}

pub fn second_fundamental<F: MetricField + ?Sized>(
    field: &F,
    jet: &VertexJet,
    vertex: (usize, usize),
) -> Result<SecondFundamental, LagError> {
    let g = field.metric(&jet.p)?;
    let gam = field.christoffel(&jet.p)?;
    second_fundamental_with(g, &gam, jet, vertex)
}

pub fn second_fundamental_with(
    g: DMatrix<f64>,
    gam: &Christoffel,
    jet: &VertexJet,
    vertex: (usize, usize),
) -> Result<SecondFundamental, LagError> {
    let h = induced(&g, &jet.t);
    let det = h.determinant();
    if !(det > 1e-12) {
        return Err(LagError::Degenerate { cell: vertex, det });
    }
    let hinv = h.try_inverse().expect("positive determinant");
    let cov: Vec<Point> = (0..4)
        .map(|k| {
            let (a, b) = (k / 2, k % 2);
            &jet.dd[a][b] + gam.apply(&jet.t[a], &jet.t[b])
        })
        .collect();
    let a = [
        [normal_part(&g, &hinv, &jet.t, &cov[0]), normal_part(&g, &hinv, &jet.t, &cov[1])],
        [normal_part(&g, &hinv, &jet.t, &cov[2]), normal_part(&g, &hinv, &jet.t, &cov[3])],
    ];
    let mut a_norm2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    a_norm2 += hinv[(i, k)] * hinv[(j, l)] * a[i][j].dot(&(&g * &a[k][l]));
                }
            }
        }
    }
    let mut mean = Point::zeros(g.nrows());
    let mut traced = Point::zeros(g.nrows());
    for i in 0..2 {
        for j in 0..2 {
            mean += &a[i][j] * hinv[(i, j)];
            traced += &cov[2 * i + j] * hinv[(i, j)];
        }
    }
    let traced = normal_part(&g, &hinv, &jet.t, &traced);
    let diff = &mean - &traced;
    let trace_residual = diff.dot(&(&g * &diff)).max(0.0).sqrt();
    let h_norm2 = mean.dot(&(&g * &mean));
    Ok(SecondFundamental { a, h, hinv, g, mean, a_norm2, h_norm2, trace_residual })
}
