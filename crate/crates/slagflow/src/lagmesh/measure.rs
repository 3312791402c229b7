//! The geometric report of a meshed Lagrangian.

use super::geometry::{cell_jet, induced, second_fundamental, vertex_jet};
use super::spectral::{first_eigenvalue, EigenOptions, Laplacian};
use super::{balls, ImmersedLagrangian, LagError};
use crate::ambient::MetricField;
use crate::par;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct MeasureOptions {
    /// Solve for λ₁ (the most expensive estimator).
    pub eigen: Option<EigenOptions>,
    /// Radii for the noncollapsing table; empty skips it.
    pub radii: Vec<f64>,
    pub ball_samples: usize,
    /// Overrides the mesh's special phase.
    pub phase: Option<f64>,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions { eigen: Some(EigenOptions::default()), radii: Vec::new(), ball_samples: 3, phase: None }
    }
}

impl MeasureOptions {
    pub fn quick() -> Self {
        MeasureOptions { eigen: None, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricReport {
    /// Σ over vertices of √det h from forward-difference tangents.
    pub volume: f64,
    /// Σ over cells of √det h from edge-averaged tangents.
    pub volume_cell: f64,
    pub sup_a2: f64,
    pub sup_h2: f64,
    /// ∫|H|² over the mesh.
    pub int_h2: f64,
    pub lambda1: Option<f64>,
    pub scale_range: Option<(f64, f64)>,
    pub lagrangian_residual: f64,
    pub special_residual: f64,
    pub trace_residual: f64,
    pub noncollapse: Vec<(f64, f64)>,
}

struct VertexData {
    a2: f64,
    h2: f64,
    trace: f64,
    mass: f64,
    forward_area: f64,
    scale: Option<f64>,
}

pub fn measure<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    opts: &MeasureOptions,
) -> Result<GeometricReport, LagError> {
    let [m1, _] = lag.resolution;
    let [h1, h2] = lag.spacing();
    let phase = Complex64::from_polar(1.0, -opts.phase.unwrap_or(lag.special_phase));
    let cells = par::try_map_indexed(lag.len(), |c| -> Result<(f64, f64, f64), LagError> {
        let (i, j) = (c % m1, c / m1);
        let jet = cell_jet(lag, i, j);
        let fr = field.frame(&jet.center)?;
        let h = induced(&fr.g, &jet.t);
        let det = h.determinant();
        if !(det > 1e-12) {
            return Err(LagError::Degenerate { cell: (i, j), det });
        }
        let area = det.sqrt();
        let w = jet.t[0].dot(&(&fr.omega * &jet.t[1]));
        let om = fr.holo.eval(&[jet.t[0].clone(), jet.t[1].clone()]);
        Ok((area * h1 * h2, w.abs() / area, (phase * om).im.abs() / area))
    })?;
    let verts = par::try_map_indexed(lag.len(), |v| -> Result<VertexData, LagError> {
        let (i, j) = lag.coords(v);
        let jet = vertex_jet(lag, i, j);
        let sf = second_fundamental(field, &jet, (i, j))?;
        let mass = sf.h.determinant().sqrt() * h1 * h2;
        let fwd = [
            (lag.lifted(i as isize + 1, j as isize) - &jet.p) / h1,
            (lag.lifted(i as isize, j as isize + 1) - &jet.p) / h2,
        ];
        let forward_area = induced(&sf.g, &fwd).determinant().max(0.0).sqrt() * h1 * h2;
        Ok(VertexData {
            a2: sf.a_norm2,
            h2: sf.h_norm2,
            trace: sf.trace_residual,
            mass,
            forward_area,
            scale: field.scale(&jet.p),
        })
    })?;
    let volume_cell = cells.iter().map(|c| c.0).sum();
    let volume = verts.iter().map(|v| v.forward_area).sum();
    let lagrangian_residual = cells.iter().map(|c| c.1).fold(0.0, f64::max);
    let special_residual = cells.iter().map(|c| c.2).fold(0.0, f64::max);
    let sup_a2 = verts.iter().map(|v| v.a2).fold(0.0, f64::max);
    let sup_h2 = verts.iter().map(|v| v.h2).fold(0.0, f64::max);
    let int_h2 = verts.iter().map(|v| v.h2 * v.mass).sum();
    let trace_residual = verts.iter().map(|v| v.trace).fold(0.0, f64::max);
    let scales: Vec<f64> = verts.iter().filter_map(|v| v.scale).collect();
    let scale_range = if scales.is_empty() {
        None
    } else {
        Some((scales.iter().cloned().fold(f64::INFINITY, f64::min), scales.iter().cloned().fold(0.0, f64::max)))
    };
    let lambda1 = match &opts.eigen {
        Some(eo) => Some(first_eigenvalue(&Laplacian::assemble(field, lag)?, eo)?.lambda1),
        None => None,
    };
    let noncollapse = if opts.radii.is_empty() {
        Vec::new()
    } else {
        let [m1, m2] = lag.resolution;
        let s = opts.ball_samples.max(1);
        let bp: Vec<usize> = (0..s * s).map(|k| lag.index((k % s) * m1 / s, (k / s) * m2 / s)).collect();
        let (vols, _) = balls::ball_volumes(field, lag, &bp, &opts.radii)?;
        opts.radii
            .iter()
            .enumerate()
            .map(|(q, &r)| (r, vols.iter().map(|v| v[q] / (r * r)).fold(f64::INFINITY, f64::min)))
            .collect()
    };
    Ok(GeometricReport {
        volume,
        volume_cell,
        sup_a2,
        sup_h2,
        int_h2,
        lambda1,
        scale_range,
        lagrangian_residual,
        special_residual,
        trace_residual,
        noncollapse,
    })
}
