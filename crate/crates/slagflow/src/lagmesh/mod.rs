//! Lagrangian surfaces meshed on periodic structured grids, the model special
//! Lagrangians of the Calabi and cylindrical models, and discrete estimators
//! for every quantity in the bounded-geometry certificate.

mod balls;
mod build;
mod geometry;
mod measure;
mod spectral;
mod variation;

pub use balls::{ball_volumes, noncollapse_check, NoncollapseOutcome};
pub use build::{
    build_flat_subtorus, build_graph, build_model_cyl_slag, build_model_slag, model_special_phase, GraphMode,
    SlagModelSpec,
};
pub use geometry::{
    cell_jet, second_fundamental, second_fundamental_with, vertex_jet, CellJet, SecondFundamental, VertexJet,
};
pub use measure::{measure, GeometricReport, MeasureOptions};
pub use spectral::{first_eigenvalue, EigenOptions, EigenResult, Laplacian};
pub use variation::{
    second_fundamental_variation_check, ConformalFamily, InterpolatedFamily, MetricFamily, StaticFamily,
    VariationReport,
};

use crate::ambient::{AmbientError, Automorphy};
use crate::Point;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LagError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate cell {cell:?}: induced metric determinant {det:e}")]
    Degenerate { cell: (usize, usize), det: f64 },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("{what} did not converge after {iterations} iterations (last change {residual:e})")]
    Numeric { what: String, iterations: usize, residual: f64 },
    #[error(transparent)]
    Ambient(#[from] AmbientError),
}

/// Ambient map identifying the vertex one period further along a grid
/// direction with the image of the vertex itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Deck {
    Translate(Vec<f64>),
    Automorphy(Automorphy),
}

impl Deck {
    pub fn apply(&self, p: &Point, times: i64) -> Point {
        if times == 0 {
            return p.clone();
        }
        match self {
            Deck::Translate(v) => {
                let mut q = p.clone();
                for (i, x) in v.iter().enumerate() {
                    q[i] += times as f64 * x;
                }
                q
            }
            Deck::Automorphy(a) => a.apply(p, times as i32),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionTag {
    ModelMEps,
    ModelMRho,
    Transported,
    Flowed,
    Graph,
}

/// A marked lattice loop: the grid line running along `direction`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Loop {
    pub label: String,
    pub direction: usize,
}

/// A Lagrangian torus given by vertex positions on an m₁×m₂ periodic grid.
/// Vertex (i, j) sits at parameter (i/m₁, j/m₂); stepping once around
/// direction d applies `decks[d]` to the ambient position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImmersedLagrangian {
    pub resolution: [usize; 2],
    pub positions: Vec<Point>,
    pub decks: [Deck; 2],
    pub h1_basis: Vec<H1Loop>,
    pub tag: ConstructionTag,
    /// Phase φ₀ used by the special residual Im(e^{−iφ₀}Ω)|_L.
    pub special_phase: f64,
}

impl ImmersedLagrangian {
    pub fn new(
        resolution: [usize; 2],
        positions: Vec<Point>,
        decks: [Deck; 2],
        tag: ConstructionTag,
        special_phase: f64,
    ) -> Result<Self, LagError> {
        if resolution[0] < 3 || resolution[1] < 3 {
            return Err(LagError::Precondition(format!("grid {resolution:?} is too coarse; need at least 3×3")));
        }
        if positions.len() != resolution[0] * resolution[1] {
            return Err(LagError::Precondition("position count does not match the grid".into()));
        }
        let h1_basis = vec![H1Loop { label: "u1".into(), direction: 0 }, H1Loop { label: "u2".into(), direction: 1 }];
        Ok(ImmersedLagrangian { resolution, positions, decks, h1_basis, tag, special_phase })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.positions[0].len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.resolution[0] + i
    }

    #[inline]
    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v % self.resolution[0], v / self.resolution[0])
    }

    pub fn spacing(&self) -> [f64; 2] {
        [1.0 / self.resolution[0] as f64, 1.0 / self.resolution[1] as f64]
    }

    /// Position of the unwrapped vertex (i, j) on the universal cover.
    pub fn lifted(&self, i: isize, j: isize) -> Point {
        let [m1, m2] = [self.resolution[0] as isize, self.resolution[1] as isize];
        let (a, ii) = (i.div_euclid(m1), i.rem_euclid(m1));
        let (b, jj) = (j.div_euclid(m2), j.rem_euclid(m2));
        let p = &self.positions[self.index(ii as usize, jj as usize)];
        let q = self.decks[0].apply(p, a as i64);
        self.decks[1].apply(&q, b as i64)
    }

    /// Vertex index of the wrapped grid point.
    pub fn wrapped(&self, i: isize, j: isize) -> usize {
        let [m1, m2] = [self.resolution[0] as isize, self.resolution[1] as isize];
        self.index(i.rem_euclid(m1) as usize, j.rem_euclid(m2) as usize)
    }

    /// Vertices along the marked loop through vertex (0, 0), as lifted points
    /// including the closing point.
    pub fn loop_points(&self, l: &H1Loop) -> Vec<Point> {
        let m = self.resolution[l.direction] as isize;
        (0..=m).map(|s| if l.direction == 0 { self.lifted(s, 0) } else { self.lifted(0, s) }).collect()
    }

    pub fn with_tag(mut self, tag: ConstructionTag) -> Self {
        self.tag = tag;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ImmersedLagrangian {
        let res = [4, 3];
        let positions = (0..12)
            .map(|v| {
                let (i, j) = (v % 4, v / 4);
                Point::from_vec(vec![i as f64 / 4.0, j as f64 / 3.0])
            })
            .collect();
        ImmersedLagrangian::new(
            res,
            positions,
            [Deck::Translate(vec![1.0, 0.0]), Deck::Translate(vec![0.0, 1.0])],
            ConstructionTag::Graph,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn lifts_cross_seams_by_decks() {
        let l = toy();
        let p = l.lifted(5, -1);
        assert!((p[0] - 1.25).abs() < 1e-15 && (p[1] + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(l.wrapped(5, -1), l.index(1, 2));
    }

    #[test]
    fn loops_close_up_by_the_deck() {
        let l = toy();
        let pts = l.loop_points(&l.h1_basis[1]);
        assert_eq!(pts.len(), 4);
        assert!((pts[3][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let r = ImmersedLagrangian::new(
            [2, 3],
            vec![Point::zeros(2); 6],
            [Deck::Translate(vec![1.0, 0.0]), Deck::Translate(vec![0.0, 1.0])],
            ConstructionTag::Graph,
            0.0,
        );
        assert!(matches!(r, Err(LagError::Precondition(_))));
    }
}

#[cfg(test)]
mod model_tests;
