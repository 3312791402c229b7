//! Intrinsic tensor fields on a meshed surface: the cubic form of a
//! Lagrangian and its covariant derivatives by mesh differences.

use crate::ambient::MetricField;
use crate::lagmesh::{second_fundamental, vertex_jet, ImmersedLagrangian, LagError};
use crate::par;
use nalgebra::Matrix2;

/// Fully covariant tensor with `rank` surface indices at every vertex;
/// component (i₁,…,i_r) sits at Σ i_s 2^{r−1−s}.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub rank: usize,
    pub data: Vec<Vec<f64>>,
}

/// Induced metric and cubic form h_{ijk} = g(A(∂_i, ∂_j), J∂_k) per vertex.
pub fn cubic_form<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
) -> Result<(Vec<Matrix2<f64>>, TensorField), LagError> {
    let per = par::try_map_indexed(lag.len(), |v| -> Result<(Matrix2<f64>, Vec<f64>), LagError> {
        let (i, j) = lag.coords(v);
        let jet = vertex_jet(lag, i, j);
        let sf = second_fundamental(field, &jet, (i, j))?;
        let jm = field.frame(&jet.p)?.j;
        let jt = [&jm * &jet.t[0], &jm * &jet.t[1]];
        let mut c = vec![0.0; 8];
        for a in 0..2 {
            for b in 0..2 {
                let ga = &sf.g * &sf.a[a][b];
                for k in 0..2 {
                    c[4 * a + 2 * b + k] = jt[k].dot(&ga);
                }
            }
        }
        Ok((sf.h, c))
    })?;
    let (h, data): (Vec<_>, Vec<_>) = per.into_iter().unzip();
    Ok((h, TensorField { rank: 3, data }))
}

/// Γ^m_{li} of the induced metrics, indexed [m][l][i].
pub fn induced_christoffel(lag: &ImmersedLagrangian, h: &[Matrix2<f64>]) -> Vec<[[[f64; 2]; 2]; 2]> {
    let [h1, h2] = lag.spacing();
    par::map_indexed(lag.len(), |v| {
        let (i, j) = lag.coords(v);
        let (i, j) = (i as isize, j as isize);
        let dh = [
            (h[lag.wrapped(i + 1, j)] - h[lag.wrapped(i - 1, j)]) / (2.0 * h1),
            (h[lag.wrapped(i, j + 1)] - h[lag.wrapped(i, j - 1)]) / (2.0 * h2),
        ];
        let hinv = h[v].try_inverse().unwrap_or_else(Matrix2::zeros);
        let mut g = [[[0.0; 2]; 2]; 2];
        for m in 0..2 {
            for l in 0..2 {
                for a in 0..2 {
                    g[m][l][a] =
                        (0..2).map(|q| 0.5 * hinv[(m, q)] * (dh[l][(q, a)] + dh[a][(q, l)] - dh[q][(l, a)])).sum();
                }
            }
        }
        g
    })
}

/// (∇T)_{l i₁…i_r} with the new index first.
pub fn covariant_derivative(lag: &ImmersedLagrangian, t: &TensorField, gam: &[[[[f64; 2]; 2]; 2]]) -> TensorField {
    let [h1, h2] = lag.spacing();
    let r = t.rank;
    let size = 1usize << r;
    let data = par::map_indexed(lag.len(), |v| {
        let (i, j) = lag.coords(v);
        let (i, j) = (i as isize, j as isize);
        let here = &t.data[v];
        let nb = [
            (&t.data[lag.wrapped(i + 1, j)], &t.data[lag.wrapped(i - 1, j)], h1),
            (&t.data[lag.wrapped(i, j + 1)], &t.data[lag.wrapped(i, j - 1)], h2),
        ];
        let mut out = vec![0.0; 2 * size];
        for (l, (p, m, h)) in nb.iter().enumerate() {
            for c in 0..size {
                let mut val = (p[c] - m[c]) / (2.0 * h);
                for s in 0..r {
                    let bit = r - 1 - s;
                    let a = (c >> bit) & 1;
                    for q in 0..2 {
                        let c2 = (c & !(1 << bit)) | (q << bit);
                        val -= gam[v][q][l][a] * here[c2];
                    }
                }
                out[l * size + c] = val;
            }
        }
        out
    });
    TensorField { rank: r + 1, data }
}

/// |T|² at vertex v with all indices raised by h⁻¹.
pub fn norm2(t: &TensorField, h: &[Matrix2<f64>], v: usize) -> f64 {
    let hinv = h[v].try_inverse().unwrap_or_else(Matrix2::zeros);
    let r = t.rank;
    let size = 1usize << r;
    let x = &t.data[v];
    let mut raised = x.clone();
    for s in 0..r {
        let bit = r - 1 - s;
        let mut next = vec![0.0; size];
        for c in 0..size {
            let a = (c >> bit) & 1;
            next[c] = (0..2).map(|q| hinv[(a, q)] * raised[(c & !(1 << bit)) | (q << bit)]).sum();
        }
        raised = next;
    }
    x.iter().zip(&raised).map(|(a, b)| a * b).sum()
}

/// sup over vertices of |∇A|² and |∇²A|².
pub fn derivative_norms<F: MetricField + ?Sized>(field: &F, lag: &ImmersedLagrangian) -> Result<(f64, f64), LagError> {
    let (h, a) = cubic_form(field, lag)?;
    let gam = induced_christoffel(lag, &h);
    let da = covariant_derivative(lag, &a, &gam);
    let dda = covariant_derivative(lag, &da, &gam);
    let s1 = (0..lag.len()).map(|v| norm2(&da, &h, v)).fold(0.0, f64::max);
    let s2 = (0..lag.len()).map(|v| norm2(&dda, &h, v)).fold(0.0, f64::max);
    Ok((s1, s2))
}
