//! Geometry spec documents (TOML). Every key is required; unknown keys are
//! rejected.
//!
//! ```toml
//! dim = 2                      # total complex dimension n
//! kappa = 1.0                  # hermitian curvature κ
//! lattice = [[6.283185307179586, 0.0], [0.0, 6.283185307179586]]  # one generator per row, interleaved real coordinates
//! kahler_re = [[1.0]]          # real part of the Hermitian kahler matrix
//! kahler_im = [[0.0]]          # imaginary part
//! holvol_phase = 0.0           # radians
//! [perturbation]               # optional table
//! amplitude = 0.05
//! delta = 0.05                 # decay per unit of ℓ₀^{2n}
//! profile-id = "twist"
//! seed = 7
//! ```

use super::{AmbientError, CalabiModelSpec, FlatTorusCY, SyntheticTYPerturbation};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PerturbationDoc {
    pub amplitude: f64,
    pub delta: f64,
    #[serde(rename = "profile-id")]
    pub profile_id: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryDoc {
    pub dim: usize,
    pub kappa: f64,
    pub lattice: Vec<Vec<f64>>,
    pub kahler_re: Vec<Vec<f64>>,
    pub kahler_im: Vec<Vec<f64>>,
    pub holvol_phase: f64,
    pub perturbation: Option<PerturbationDoc>,
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>, AmbientError> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    if r == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(AmbientError::InvalidSpec(format!("{name} must be a nonempty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl GeometryDoc {
    pub fn parse(text: &str) -> Result<Self, AmbientError> {
        toml::from_str(text).map_err(|e| AmbientError::InvalidSpec(format!("geometry spec: {e}")))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("geometry spec serializes")
    }

    pub fn base(&self) -> Result<FlatTorusCY, AmbientError> {
        // rows of the document are generators; FlatTorusCY stores columns
        let lat = matrix(&self.lattice, "lattice")?.transpose();
        let re = matrix(&self.kahler_re, "kahler_re")?;
        let im = matrix(&self.kahler_im, "kahler_im")?;
        if re.shape() != im.shape() {
            return Err(AmbientError::InvalidSpec("kahler_re and kahler_im shapes differ".into()));
        }
        let k = DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
        FlatTorusCY::new(lat, k, Complex64::from_polar(1.0, self.holvol_phase))
    }

    pub fn calabi(&self) -> Result<CalabiModelSpec, AmbientError> {
        let base = self.base()?;
        if base.complex_dim_base + 1 != self.dim {
            return Err(AmbientError::InvalidSpec(format!(
                "dim = {} but the base has complex dimension {}",
                self.dim, base.complex_dim_base
            )));
        }
        CalabiModelSpec::new(base, self.kappa)
    }

    pub fn perturbation(&self) -> Result<Option<SyntheticTYPerturbation>, AmbientError> {
        self.perturbation
            .as_ref()
            .map(|p| Ok(SyntheticTYPerturbation::new(p.amplitude, p.delta, p.profile_id.parse()?, p.seed)))
            .transpose()
    }

    pub fn square(n: usize, side: f64) -> Self {
        let m = n - 1;
        GeometryDoc {
            dim: n,
            kappa: 1.0,
            lattice: (0..2 * m).map(|i| (0..2 * m).map(|j| if i == j { side } else { 0.0 }).collect()).collect(),
            kahler_re: (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            kahler_im: vec![vec![0.0; m]; m],
            holvol_phase: 0.0,
            perturbation: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_perturbation() {
        let mut doc = GeometryDoc::square(2, std::f64::consts::TAU);
        doc.perturbation = Some(PerturbationDoc { amplitude: 0.05, delta: 0.05, profile_id: "twist".into(), seed: 3 });
        let back = GeometryDoc::parse(&doc.to_text()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.calabi().unwrap().total_complex_dim, 2);
        assert!(back.perturbation().unwrap().is_some());
    }

    #[test]
    fn missing_key_fails_loudly() {
        let text =
            "dim = 2\nkappa = 1.0\nlattice = [[1.0, 0.0], [0.0, 1.0]]\nkahler_re = [[1.0]]\nholvol_phase = 0.0\n";
        let err = GeometryDoc::parse(text).unwrap_err();
        assert!(err.to_string().contains("kahler_im"));
    }

    #[test]
    fn unknown_profile_is_rejected() {
        let mut doc = GeometryDoc::square(2, 1.0);
        doc.perturbation = Some(PerturbationDoc { amplitude: 0.0, delta: 0.1, profile_id: "bogus".into(), seed: 0 });
        assert!(doc.perturbation().is_err());
    }
}
