//! Finite-volume Laplace–Beltrami operator on the structured grid and its
//! first nonzero eigenvalue.

use super::geometry::{cell_jet, induced};
use super::{ImmersedLagrangian, LagError};
use crate::ambient::MetricField;
use crate::par;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

const OFFSETS: [(isize, isize); 9] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

fn offset_slot(di: isize, dj: isize) -> usize {
    ((dj + 1) * 3 + (di + 1)) as usize
}

/// Stiffness S (nine-point stencil per vertex) and lumped mass M with
/// fᵀSf = Σ_cells √det h [h¹¹ ½(a² + b²) + h²² ½(c² + d²) + h¹² ½(a + b)(c + d)]
/// in terms of the four edge differences a, b (direction 1) and c, d
/// (direction 2) of each cell.
#[derive(Clone, Debug)]
pub struct Laplacian {
    pub resolution: [usize; 2],
    pub stiffness: Vec<[f64; 9]>,
    pub mass: Vec<f64>,
}

impl Laplacian {
    pub fn assemble<F: MetricField + ?Sized>(field: &F, lag: &ImmersedLagrangian) -> Result<Self, LagError> {
        let [m1, m2] = lag.resolution;
        let [h1, h2] = lag.spacing();
        let cells = par::try_map_indexed(m1 * m2, |c| -> Result<([[f64; 4]; 4], f64), LagError> {
            let (i, j) = (c % m1, c / m1);
            let jet = cell_jet(lag, i, j);
            let g = field.metric(&jet.center)?;
            let h = induced(&g, &jet.t);
            let det = h.determinant();
            if !(det > 1e-12) {
                return Err(LagError::Degenerate { cell: (i, j), det });
            }
            let hi = h.try_inverse().expect("positive determinant");
            let w = det.sqrt() * h1 * h2;
            // corners 0 = (0,0), 1 = (1,0), 2 = (0,1), 3 = (1,1)
            let ga = [-1.0 / h1, 1.0 / h1, 0.0, 0.0];
            let gb = [0.0, 0.0, -1.0 / h1, 1.0 / h1];
            let gc = [-1.0 / h2, 0.0, 1.0 / h2, 0.0];
            let gd = [0.0, -1.0 / h2, 0.0, 1.0 / h2];
            let mut k = [[0.0; 4]; 4];
            for r in 0..4 {
                for s in 0..4 {
                    let u = [ga[r] + gb[r], ga[s] + gb[s]];
                    let v = [gc[r] + gd[r], gc[s] + gd[s]];
                    k[r][s] = w
                        * (0.5 * hi[(0, 0)] * (ga[r] * ga[s] + gb[r] * gb[s])
                            + 0.5 * hi[(1, 1)] * (gc[r] * gc[s] + gd[r] * gd[s])
                            + 0.25 * hi[(0, 1)] * (u[0] * v[1] + v[0] * u[1]));
                }
            }
            Ok((k, w))
        })?;
        let n = m1 * m2;
        let mut stiffness = vec![[0.0; 9]; n];
        let mut mass = vec![0.0; n];
        let corner = [(0isize, 0isize), (1, 0), (0, 1), (1, 1)];
        for (c, (k, w)) in cells.iter().enumerate() {
            let (i, j) = ((c % m1) as isize, (c / m1) as isize);
            for r in 0..4 {
                let v = lag.wrapped(i + corner[r].0, j + corner[r].1);
                mass[v] += 0.25 * w;
                for s in 0..4 {
                    let slot = offset_slot(corner[s].0 - corner[r].0, corner[s].1 - corner[r].1);
                    stiffness[v][slot] += k[r][s];
                }
            }
        }
        Ok(Laplacian { resolution: lag.resolution, stiffness, mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    fn neighbor(&self, v: usize, o: usize) -> usize {
        let [m1, m2] = self.resolution;
        let (i, j) = ((v % m1) as isize, (v / m1) as isize);
        let (di, dj) = OFFSETS[o];
        let (a, b) = ((i + di).rem_euclid(m1 as isize) as usize, (j + dj).rem_euclid(m2 as isize) as usize);
        b * m1 + a
    }

    /// y = (S + τM)x
    pub fn apply_shifted(&self, x: &[f64], tau: f64) -> Vec<f64> {
        par::map_indexed(self.len(), |v| {
            let mut s = tau * self.mass[v] * x[v];
            for o in 0..9 {
                s += self.stiffness[v][o] * x[self.neighbor(v, o)];
            }
            s
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// fᵀSf / fᵀMf
    pub fn rayleigh(&self, f: &[f64]) -> f64 {
        let sf = self.apply_shifted(f, 0.0);
        dot(f, &sf) / self.mass.iter().zip(f).map(|(m, x)| m * x * x).sum::<f64>()
    }

    /// Remove the M-weighted mean.
    fn deflate(&self, x: &mut [f64]) {
        let mean = self.mass.iter().zip(x.iter()).map(|(m, v)| m * v).sum::<f64>() / self.total_mass();
        for v in x.iter_mut() {
            *v -= mean;
        }
    }

    /// Modified Gram–Schmidt in the M inner product, dropping dependent vectors.
    fn orthonormalize(&self, vs: &mut Vec<Vec<f64>>) {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
        for mut v in vs.drain(..) {
            for q in &out {
                let c: f64 = v.iter().zip(q).zip(&self.mass).map(|((a, b), m)| a * b * m).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
            let norm = v.iter().zip(&self.mass).map(|(a, m)| m * a * a).sum::<f64>().sqrt();
            if norm > 1e-12 {
                out.push(v.into_iter().map(|a| a / norm).collect());
            }
        }
        *vs = out;
    }

    /// Jacobi-preconditioned conjugate gradients for (S + τM)x = b.
    fn solve(&self, b: &[f64], tau: f64, x0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, LagError> {
        let diag: Vec<f64> = (0..self.len()).map(|v| self.stiffness[v][4] + tau * self.mass[v]).collect();
        let mut x = x0.to_vec();
        let ax = self.apply_shifted(&x, tau);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let bnorm = dot(b, b).sqrt().max(1e-300);
        for it in 0..max_iter {
            if dot(&r, &r).sqrt() <= tol * bnorm {
                return Ok(x);
            }
            let ap = self.apply_shifted(&p, tau);
            let alpha = rz / dot(&p, &ap);
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            z = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..p.len() {
                p[k] = z[k] + beta * p[k];
            }
            if it + 1 == max_iter {
                break;
            }
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol * 10.0 {
            return Ok(x);
        }
        Err(LagError::Numeric { what: "conjugate gradients".into(), iterations: max_iter, residual: res })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tolerance: 1e-9, max_iterations: 400, seed: 7 }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda1: f64,
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    pub shift: f64,
}

/// Smallest nonzero eigenvalue of S f = λ M f by shifted block inverse
/// iteration with Rayleigh–Ritz on the complement of the constants. The
/// block absorbs the near-degenerate lowest pairs of torus spectra.
pub fn first_eigenvalue(lap: &Laplacian, opts: &EigenOptions) -> Result<EigenResult, LagError> {
    let [m1, m2] = lap.resolution;
    let n = lap.len();
    let probe = |f: &dyn Fn(f64, f64) -> f64| -> f64 {
        let mut v: Vec<f64> = (0..n).map(|k| f((k % m1) as f64 / m1 as f64, (k / m1) as f64 / m2 as f64)).collect();
        lap.deflate(&mut v);
        lap.rayleigh(&v)
    };
    let rough = [
        probe(&|u, _| (TAU * u).cos()),
        probe(&|_, w| (TAU * w).cos()),
        probe(&|u, w| (TAU * (u + w)).cos()),
        probe(&|u, w| (TAU * (u - w)).cos()),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let tau = 0.05 * rough;
    let block = 6.min(n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut xs: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
    let mut lambda = f64::INFINITY;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let mut ys = Vec::with_capacity(block);
        for x in &xs {
            let b: Vec<f64> = x.iter().zip(&lap.mass).map(|(v, m)| v * m).collect();
            let mut y = lap.solve(&b, tau, x, 1e-12, 20 * n.max(100))?;
            lap.deflate(&mut y);
            ys.push(y);
        }
        lap.orthonormalize(&mut ys);
        let sy: Vec<Vec<f64>> = ys.iter().map(|y| lap.apply_shifted(y, 0.0)).collect();
        let k = ys.len();
        let proj = DMatrix::from_fn(k, k, |a, b| 0.5 * (dot(&ys[a], &sy[b]) + dot(&ys[b], &sy[a])));
        let eig = SymmetricEigen::new(proj);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        xs = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (a, y) in ys.iter().enumerate() {
                    let w = eig.eigenvectors[(a, c)];
                    for (vi, yi) in v.iter_mut().zip(y) {
                        *vi += w * yi;
                    }
                }
                v
            })
            .collect();
        let next = eig.eigenvalues[order[0]];
        change = (next - lambda).abs() / next.abs().max(1e-300);
        lambda = next;
        if change < opts.tolerance && it > 2 {
            let eigenvector = xs.swap_remove(0);
            return Ok(EigenResult { lambda1: lambda, eigenvector, iterations: it, shift: tau });
        }
    }
    Err(LagError::Numeric {
        what: "inverse iteration for λ₁".into(),
        iterations: opts.max_iterations,
        residual: change,
    })
}
