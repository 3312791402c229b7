//! Integer 2×2 matrices, local monodromies of Kodaira fibers and the search
//! for factorizations of the monodromy at infinity into local monodromies.

use super::kodaira::KodairaType;
use super::FibrationError;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Mul, Neg};

/// Row-major [[a, b], [c, d]].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mat2(pub [[i64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1, 0], [0, 1]]);

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// Tⁿ = [[1, n], [0, 1]]
    pub const fn parabolic(n: i64) -> Self {
        Mat2::new(1, n, 0, 1)
    }

    pub fn from_columns(u: [i64; 2], v: [i64; 2]) -> Self {
        Mat2::new(u[0], v[0], u[1], v[1])
    }

    pub fn column(&self, j: usize) -> [i64; 2] {
        [self.0[0][j], self.0[1][j]]
    }

    pub fn apply(&self, v: [i64; 2]) -> [i64; 2] {
        [self.0[0][0] * v[0] + self.0[0][1] * v[1], self.0[1][0] * v[0] + self.0[1][1] * v[1]]
    }

    pub fn det(&self) -> i64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn trace(&self) -> i64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Inverse of a unimodular matrix.
    pub fn inverse(&self) -> Option<Mat2> {
        let [[a, b], [c, d]] = self.0;
        match self.det() {
            1 => Some(Mat2::new(d, -b, -c, a)),
            -1 => Some(Mat2::new(-d, b, c, -a)),
            _ => None,
        }
    }

    /// g·self·g⁻¹ for unimodular g.
    pub fn conjugate_by(&self, g: &Mat2) -> Mat2 {
        *g * *self * g.inverse().expect("conjugator must be unimodular")
    }

    pub fn max_abs(&self) -> i64 {
        self.0.iter().flatten().map(|x| x.abs()).max().unwrap_or(0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(-a, -b, -c, -d)
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a, b], [c, d]] = self.0;
        write!(f, "[[{a},{b}],[{c},{d}]]")
    }
}

impl KodairaType {
    /// Representative of the local monodromy class.
    pub fn local_monodromy(&self) -> Mat2 {
        match *self {
            KodairaType::I(n) => Mat2::parabolic(n as i64),
            KodairaType::II => Mat2::new(0, 1, -1, 1),
            KodairaType::III => Mat2::new(0, 1, -1, 0),
            KodairaType::IV => Mat2::new(0, 1, -1, -1),
            KodairaType::IStar(n) => -Mat2::parabolic(n as i64),
            KodairaType::IVStar => inverse_of(KodairaType::IV),
            KodairaType::IIIStar => inverse_of(KodairaType::III),
            KodairaType::IIStar => inverse_of(KodairaType::II),
        }
    }
}

fn inverse_of(t: KodairaType) -> Mat2 {
    t.local_monodromy().inverse().expect("local monodromies are unimodular")
}

/// g·Tⁿ·g⁻¹ for g with first column (a, b).
fn transvection(n: i64, a: i64, b: i64) -> Mat2 {
    Mat2::new(1 - n * a * b, n * a * a, -n * b * b, 1 + n * a * b)
}

fn isqrt(x: i64) -> Option<i64> {
    if x < 0 {
        return None;
    }
    let r = (x as f64).sqrt().round() as i64;
    (r * r == x).then_some(r)
}

/// SL(2,Z) matrix with first column (a, b), which must be coprime.
fn complete_column(a: i64, b: i64) -> Option<Mat2> {
    let e = a.extended_gcd(&b);
    (e.gcd == 1).then(|| Mat2::new(a, -e.y, b, e.x))
}

/// For m conjugate in SL(2,Z) to Tⁿ, returns n and a conjugator g with
/// g·Tⁿ·g⁻¹ = m.
pub fn parabolic_class(m: &Mat2) -> Option<(i64, Mat2)> {
    if m.det() != 1 || m.trace() != 2 {
        return None;
    }
    let [[p, q], [r, s]] = m.0;
    let (n00, n01, n10) = (p - 1, q, r);
    debug_assert_eq!(s - 1, -n00);
    if n00 == 0 && n01 == 0 && n10 == 0 {
        return Some((0, Mat2::IDENTITY));
    }
    let g = n00.abs().gcd(&n01.abs()).gcd(&n10.abs());
    let k = if n01 != 0 { n01.signum() * g } else { -n10.signum() * g };
    let a = isqrt(n01 / k)?;
    let mut b = isqrt(-n10 / k)?;
    if -n00 / k < 0 {
        b = -b;
    }
    let conj = complete_column(a, b)?;
    (Mat2::parabolic(k).conjugate_by(&conj) == *m).then_some((k, conj))
}

/// Euler characteristic of the compactified surface with fiber at infinity
/// of degree d.
pub fn surface_euler(d: i64) -> i64 {
    12 - d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Argument {
    /// The trace condition is a quadratic in a whose discriminant D·b² + E
    /// is negative for every real b.
    NoRealSolutions { discriminant: [i64; 2] },
    /// The trace condition forces b = 0, hence a = ±1, and the resulting
    /// product lies in the wrong parabolic class.
    Forced { product: Mat2, product_class: Option<i64> },
}

/// Closed-form obstruction for a pair {I₁, X}: with X fixed to its
/// representative M and I₁ conjugated by g with first column (a, b), the
/// product has trace tr M + r·a² + e·ab + f·b², which must equal 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstructionCertificate {
    pub fixed: Mat2,
    /// (r, e, f)
    pub form: [i64; 3],
    pub rhs: i64,
    /// The trace identity was checked exactly on a 5×5 integer grid, which
    /// determines a polynomial of degree two.
    pub identity_checked: bool,
    pub argument: Argument,
}

impl fmt::Display for ObstructionCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, e, g] = self.form;
        write!(f, "trace condition {r}·a² + {e}·ab + {g}·b² = {}; ", self.rhs)?;
        match &self.argument {
            Argument::NoRealSolutions { discriminant: [d, c] } => {
                write!(f, "discriminant in a is {d}·b² + {c} < 0, no real solutions")
            }
            Argument::Forced { product, product_class } => match product_class {
                Some(k) => write!(f, "forces b = 0, a = ±1, product {product} ~ T^{k}"),
                None => write!(f, "forces b = 0, a = ±1, product {product} is not parabolic"),
            },
        }
    }
}

/// Certificate for the pair {I₁, X} against the target class T^{−d}, or
/// None when the algebraic argument does not decide infeasibility.
pub fn two_fiber_certificate(x: KodairaType, target_d: i64) -> Option<ObstructionCertificate> {
    let m = x.local_monodromy();
    let [[p, q], [r, s]] = m.0;
    let form = [r, s - p, -q];
    let rhs = 2 - (p + s);
    let eval = |a: i64, b: i64| form[0] * a * a + form[1] * a * b + form[2] * b * b;
    let identity_checked = (-2..=2)
        .flat_map(|a| (-2..=2).map(move |b| (a, b)))
        .all(|(a, b)| (transvection(1, a, b) * m).trace() == p + s + eval(a, b));
    if !identity_checked {
        return None;
    }
    let [rr, e, f] = form;
    let disc = e * e - 4 * rr * f;
    let argument = if rr != 0 && disc < 0 && rr * rhs < 0 {
        Argument::NoRealSolutions { discriminant: [disc, 4 * rr * rhs] }
    } else if rr == 0 && e == 0 && f != 0 && rhs == 0 {
        let product = transvection(1, 1, 0) * m;
        let product_class = parabolic_class(&product).map(|(k, _)| k);
        if product_class == Some(-target_d) {
            return None;
        }
        Argument::Forced { product, product_class }
    } else {
        return None;
    };
    Some(ObstructionCertificate { fixed: m, form, rhs, identity_checked, argument })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub types: Vec<KodairaType>,
    pub conjugators: Vec<Mat2>,
    pub factors: Vec<Mat2>,
    pub product: Mat2,
    pub target: Mat2,
    /// h with h·target·h⁻¹ = product
    pub global: Mat2,
}

impl Witness {
    pub fn verify(&self) -> bool {
        let factors_ok = self
            .types
            .iter()
            .zip(&self.conjugators)
            .zip(&self.factors)
            .all(|((t, g), f)| g.det() == 1 && t.local_monodromy().conjugate_by(g) == *f);
        let product = self.factors.iter().fold(Mat2::IDENTITY, |acc, f| acc * *f);
        factors_ok
            && self.factors.len() == self.types.len()
            && product == self.product
            && self.global.det() == 1
            && self.target.conjugate_by(&self.global) == product
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sl2zVerdict {
    Feasible(Witness),
    Infeasible(ObstructionCertificate),
    InfeasibleUpToBound { bound: i64, searched: u64 },
}

impl Sl2zVerdict {
    pub fn feasible(&self) -> bool {
        matches!(self, Sl2zVerdict::Feasible(_))
    }
}

fn search_types_ok(types: &[KodairaType]) -> bool {
    types.iter().all(|t| {
        matches!(t, KodairaType::I(n) if *n >= 1) || matches!(t, KodairaType::II | KodairaType::III | KodairaType::IV)
    })
}

/// Conjugates of the local monodromy by SL(2,Z) elements with entries (or
/// first column, for Iₙ) bounded by `bound`, keyed by the conjugate.
fn conjugacy_set(t: KodairaType, bound: i64) -> BTreeMap<Mat2, Mat2> {
    let mut out = BTreeMap::new();
    if let KodairaType::I(n) = t {
        for a in -bound..=bound {
            for b in -bound..=bound {
                if let Some(g) = complete_column(a, b) {
                    out.entry(transvection(n as i64, a, b)).or_insert(g);
                }
            }
        }
        return out;
    }
    let m = t.local_monodromy();
    for a in -bound..=bound {
        for b in -bound..=bound {
            for c in -bound..=bound {
                let d = if a == 0 {
                    if b * c != -1 {
                        continue;
                    }
                    // any d works; sweep it
                    for d in -bound..=bound {
                        let g = Mat2::new(0, b, c, d);
                        out.entry(m.conjugate_by(&g)).or_insert(g);
                    }
                    continue;
                } else if (1 + b * c) % a == 0 {
                    (1 + b * c) / a
                } else {
                    continue;
                };
                if d.abs() <= bound {
                    let g = Mat2::new(a, b, c, d);
                    out.entry(m.conjugate_by(&g)).or_insert(g);
                }
            }
        }
    }
    out
}

/// Searches for conjugates of the local monodromies of `types` whose ordered
/// product is conjugate to T^{−d}. The last factor is fixed to its
/// representative, which loses nothing up to global conjugacy. Pairs
/// containing I₁ are first tried against the closed-form trace argument.
pub fn sl2z_obstruction(
    target_d: i64,
    types: &[KodairaType],
    search_bound: i64,
) -> Result<Sl2zVerdict, FibrationError> {
    if types.is_empty() {
        return Err(FibrationError::Precondition("empty fiber list".into()));
    }
    if !search_types_ok(types) {
        return Err(FibrationError::Precondition("types must be drawn from Iₙ, II, III, IV".into()));
    }
    if search_bound < 1 {
        return Err(FibrationError::Precondition("search bound must be positive".into()));
    }
    if types.len() == 2 {
        if let Some(pos) = types.iter().position(|t| *t == KodairaType::I(1)) {
            if let Some(cert) = two_fiber_certificate(types[1 - pos], target_d) {
                return Ok(Sl2zVerdict::Infeasible(cert));
            }
        }
    }
    let target = Mat2::parabolic(-target_d);
    let k = types.len();
    let sets: Vec<Vec<(Mat2, Mat2)>> =
        types[..k - 1].iter().map(|t| conjugacy_set(*t, search_bound).into_iter().collect()).collect();
    let last = types[k - 1].local_monodromy();
    let mut searched = 0u64;
    let mut idx = vec![0usize; k - 1];
    if sets.iter().any(|s| s.is_empty()) {
        return Ok(Sl2zVerdict::InfeasibleUpToBound { bound: search_bound, searched });
    }
    loop {
        searched += 1;
        let prefix = idx.iter().enumerate().fold(Mat2::IDENTITY, |acc, (i, &j)| acc * sets[i][j].0);
        let product = prefix * last;
        if let Some((cls, h)) = parabolic_class(&product) {
            if cls == -target_d {
                let mut conjugators: Vec<Mat2> = idx.iter().enumerate().map(|(i, &j)| sets[i][j].1).collect();
                conjugators.push(Mat2::IDENTITY);
                let mut factors: Vec<Mat2> = idx.iter().enumerate().map(|(i, &j)| sets[i][j].0).collect();
                factors.push(last);
                let w = Witness { types: types.to_vec(), conjugators, factors, product, target, global: h };
                return Ok(Sl2zVerdict::Feasible(w));
            }
        }
        // odometer over the free factors
        let mut pos = 0;
        loop {
            if pos == k - 1 {
                return Ok(Sl2zVerdict::InfeasibleUpToBound { bound: search_bound, searched });
            }
            idx[pos] += 1;
            if idx[pos] < sets[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationReport {
    pub d: i64,
    pub euler_sum: i64,
    pub chi_total: i64,
    pub euler_ok: bool,
    /// Run for d = 9 only.
    pub monodromy: Option<Sl2zVerdict>,
}

impl ConfigurationReport {
    pub fn pass(&self) -> bool {
        self.euler_ok && self.monodromy.as_ref().map_or(true, Sl2zVerdict::feasible)
    }
}

/// Euler sum against χ_total (12 − d when not given), plus the monodromy
/// search for d = 9.
pub fn configuration_check(
    types: &[KodairaType],
    d: i64,
    chi_total: Option<i64>,
    search_bound: i64,
) -> Result<ConfigurationReport, FibrationError> {
    if d < 0 {
        return Err(FibrationError::Precondition(format!("degree {d} is negative")));
    }
    let chi_total = chi_total.unwrap_or_else(|| surface_euler(d));
    let euler_sum = types.iter().map(KodairaType::euler).sum();
    let monodromy = if d == 9 { Some(sl2z_obstruction(d, types, search_bound)?) } else { None };
    Ok(ConfigurationReport { d, euler_sum, chi_total, euler_ok: euler_sum == chi_total, monodromy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use KodairaType::*;

    #[test]
    fn parabolic_class_recovers_exponent_and_conjugator() {
        for (n, a, b) in [(3, 2, 5), (-9, 1, 0), (1, -4, 7), (2, 0, 1)] {
            let m = transvection(n, a, b);
            let (k, g) = parabolic_class(&m).unwrap();
            assert_eq!(k, n);
            assert_eq!(Mat2::parabolic(k).conjugate_by(&g), m);
        }
        assert!(parabolic_class(&Mat2::new(2, 1, 1, 1)).is_none());
        assert!(parabolic_class(&-Mat2::parabolic(1)).is_none());
    }

    #[test]
    fn local_monodromies_have_the_right_orders() {
        let order = |m: Mat2| (1..=12).find(|&k| (0..k).fold(Mat2::IDENTITY, |acc, _| acc * m) == Mat2::IDENTITY);
        assert_eq!(order(II.local_monodromy()), Some(6));
        assert_eq!(order(III.local_monodromy()), Some(4));
        assert_eq!(order(IV.local_monodromy()), Some(3));
        assert_eq!(IStar(0).local_monodromy(), -Mat2::IDENTITY);
        for t in [IIStar, IIIStar, IVStar] {
            assert_eq!(t.local_monodromy().det(), 1);
        }
    }

    #[test]
    fn i1_i2_trace_forces_b_zero() {
        let c = two_fiber_certificate(I(2), 9).unwrap();
        assert_eq!((c.form, c.rhs), ([0, 0, -2], 0));
        assert_eq!(c.argument, Argument::Forced { product: Mat2::parabolic(3), product_class: Some(3) });
    }

    #[test]
    fn i1_ii_has_no_real_solutions() {
        let c = two_fiber_certificate(II, 9).unwrap();
        // −a² + ab − b² = 1, i.e. a² + b² − ab + 1 = 0
        assert_eq!((c.form, c.rhs), ([-1, 1, -1], 1));
        assert_eq!(c.argument, Argument::NoRealSolutions { discriminant: [-3, -4] });
    }

    #[test]
    fn three_nodal_fibers_realize_degree_nine() {
        let Sl2zVerdict::Feasible(w) = sl2z_obstruction(9, &[I(1), I(1), I(1)], 20).unwrap() else {
            panic!("no witness")
        };
        assert!(w.verify());
        assert_eq!(w.target, Mat2::parabolic(-9));
    }

    #[test]
    fn search_agrees_with_the_certificates() {
        assert!(!sl2z_obstruction(9, &[I(1), I(2)], 20).unwrap().feasible());
        assert!(matches!(
            sl2z_obstruction(9, &[I(2), I(1), I(1)], 4).unwrap(),
            Sl2zVerdict::InfeasibleUpToBound { .. } | Sl2zVerdict::Feasible(_)
        ));
    }

    #[test]
    fn tampered_witness_fails() {
        let Sl2zVerdict::Feasible(mut w) = sl2z_obstruction(9, &[I(1), I(1), I(1)], 20).unwrap() else { panic!() };
        w.factors[0] = Mat2::parabolic(1);
        assert!(!w.verify());
    }

    #[test]
    fn euler_sums() {
        let r = configuration_check(&[I(1); 3], 9, None, 20).unwrap();
        assert!(r.pass() && r.euler_sum == 3);
        let r = configuration_check(&[I(1); 12], 0, None, 20).unwrap();
        assert!(r.pass() && r.monodromy.is_none());
        let r = configuration_check(&[I(1), I(2)], 9, None, 20).unwrap();
        assert!(r.euler_ok && !r.pass());
        assert!(!configuration_check(&[I(1)], 9, None, 20).unwrap().euler_ok);
    }

    #[test]
    fn starred_types_are_outside_the_search() {
        assert!(sl2z_obstruction(9, &[IStar(0)], 3).is_err());
    }
}
