//! Singular fibers as configurations of curves: intersection data, the
//! exact semidefiniteness analysis of the negated intersection form, and
//! recognition of the affine ADE diagrams in Kodaira's list.

use super::FibrationError;
use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

type Q = Ratio<i128>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KodairaType {
    /// Iₙ, n ≥ 1
    I(u32),
    II,
    III,
    IV,
    /// Iₙ*, n ≥ 0
    IStar(u32),
    IVStar,
    IIIStar,
    IIStar,
}

impl KodairaType {
    pub fn euler(&self) -> i64 {
        match *self {
            KodairaType::I(n) => n as i64,
            KodairaType::II => 2,
            KodairaType::III => 3,
            KodairaType::IV => 4,
            KodairaType::IStar(n) => 6 + n as i64,
            KodairaType::IVStar => 8,
            KodairaType::IIIStar => 9,
            KodairaType::IIStar => 10,
        }
    }
}

impl fmt::Display for KodairaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KodairaType::I(n) => write!(f, "I{n}"),
            KodairaType::II => write!(f, "II"),
            KodairaType::III => write!(f, "III"),
            KodairaType::IV => write!(f, "IV"),
            KodairaType::IStar(n) => write!(f, "I{n}*"),
            KodairaType::IVStar => write!(f, "IV*"),
            KodairaType::IIIStar => write!(f, "III*"),
            KodairaType::IIStar => write!(f, "II*"),
        }
    }
}

impl FromStr for KodairaType {
    type Err = FibrationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FibrationError::Parse { line: 0, msg: format!("unknown Kodaira type {s:?}") };
        let t = s.trim();
        Ok(match t {
            "II" => KodairaType::II,
            "III" => KodairaType::III,
            "IV" => KodairaType::IV,
            "IV*" => KodairaType::IVStar,
            "III*" => KodairaType::IIIStar,
            "II*" => KodairaType::IIStar,
            _ => {
                let rest = t.strip_prefix('I').ok_or_else(bad)?;
                match rest.strip_suffix('*') {
                    Some(n) => KodairaType::IStar(n.parse().map_err(|_| bad())?),
                    None => {
                        let n: u32 = rest.parse().map_err(|_| bad())?;
                        if n == 0 {
                            return Err(bad());
                        }
                        KodairaType::I(n)
                    }
                }
            }
        })
    }
}

/// Iₙ for n ≤ `max_n`, II, III, IV, Iₙ* for n ≤ `max_star`, IV*, III*, II*.
pub fn kodaira_table(max_n: u32, max_star: u32) -> Vec<KodairaType> {
    let mut v: Vec<KodairaType> = (1..=max_n).map(KodairaType::I).collect();
    v.extend([KodairaType::II, KodairaType::III, KodairaType::IV]);
    v.extend((0..=max_star).map(KodairaType::IStar));
    v.extend([KodairaType::IVStar, KodairaType::IIIStar, KodairaType::IIStar]);
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub self_intersection: i64,
    pub multiplicity: u32,
    pub genus: u32,
    pub delta: u32,
}

impl Component {
    pub fn smooth_rational(multiplicity: u32) -> Self {
        Component { self_intersection: -2, multiplicity, genus: 0, delta: 0 }
    }
}

/// Incidence data invisible to the intersection matrix.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidenceNotes {
    /// Pairs meeting in a single point of contact order C_i·C_j.
    pub tangencies: Vec<(usize, usize)>,
    /// Sets of components passing through one common point.
    pub concurrent: Vec<Vec<usize>>,
    /// Components whose singular point is a cusp rather than a node.
    pub cusps: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KodairaGraph {
    pub components: Vec<Component>,
    pub adjacency: Vec<Vec<i64>>,
    pub notes: IncidenceNotes,
}

impl KodairaGraph {
    pub fn new(
        components: Vec<Component>,
        adjacency: Vec<Vec<i64>>,
        notes: IncidenceNotes,
    ) -> Result<Self, FibrationError> {
        let g = KodairaGraph { components, adjacency, notes };
        g.validate()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    fn validate(&self) -> Result<(), FibrationError> {
        let n = self.len();
        let pre = |m: String| Err(FibrationError::Precondition(m));
        if n == 0 {
            return pre("no components".into());
        }
        if self.adjacency.len() != n || self.adjacency.iter().any(|r| r.len() != n) {
            return pre(format!("adjacency must be {n}×{n}"));
        }
        for i in 0..n {
            if self.adjacency[i][i] != 0 {
                return pre(format!("adjacency diagonal entry {i} is nonzero"));
            }
            for j in 0..n {
                if self.adjacency[i][j] != self.adjacency[j][i] {
                    return pre(format!("adjacency is not symmetric at ({i}, {j})"));
                }
                if self.adjacency[i][j] < 0 {
                    return pre(format!("distinct components {i}, {j} have negative intersection"));
                }
            }
        }
        if self.components.iter().any(|c| c.multiplicity == 0) {
            return pre("multiplicities must be positive".into());
        }
        for &(i, j) in &self.notes.tangencies {
            if i >= n || j >= n || i == j || self.adjacency[i][j] < 2 {
                return pre(format!("tangency ({i}, {j}) needs two distinct components meeting with multiplicity ≥ 2"));
            }
        }
        for set in &self.notes.concurrent {
            if set.len() < 3 || set.iter().any(|&i| i >= n) {
                return pre(format!("concurrent set {set:?} needs at least three valid components"));
            }
            for (a, &i) in set.iter().enumerate() {
                for &j in &set[a + 1..] {
                    if i == j || self.adjacency[i][j] < 1 {
                        return pre(format!("concurrent components {i}, {j} do not meet"));
                    }
                }
            }
        }
        for &c in &self.notes.cusps {
            if c >= n || self.components[c].delta == 0 {
                return pre(format!("cusp on component {c} needs δ ≥ 1"));
            }
        }
        Ok(())
    }

    /// C_i·C_j, with self-intersections on the diagonal.
    pub fn intersection(&self, i: usize, j: usize) -> i64 {
        if i == j {
            self.components[i].self_intersection
        } else {
            self.adjacency[i][j]
        }
    }

    pub fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && self.adjacency[i][j] > 0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// (Σnᵢ[Cᵢ])²
    pub fn fiber_square(&self) -> i64 {
        let n = self.len();
        let m: Vec<i64> = self.components.iter().map(|c| c.multiplicity as i64).collect();
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| m[i] * m[j] * self.intersection(i, j)).sum()
    }

    /// Relabels components by `perm` (new index = perm[old]).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.len();
        let mut components = self.components.clone();
        let mut adjacency = vec![vec![0; n]; n];
        for i in 0..n {
            components[perm[i]] = self.components[i];
            for j in 0..n {
                adjacency[perm[i]][perm[j]] = self.adjacency[i][j];
            }
        }
        let notes = IncidenceNotes {
            tangencies: self.notes.tangencies.iter().map(|&(i, j)| (perm[i], perm[j])).collect(),
            concurrent: self.notes.concurrent.iter().map(|s| s.iter().map(|&i| perm[i]).collect()).collect(),
            cusps: self.notes.cusps.iter().map(|&i| perm[i]).collect(),
        };
        KodairaGraph { components, adjacency, notes }
    }

    /// Line format:
    ///
    /// ```text
    /// component <self-int> <mult> <genus> <delta>
    /// adjacency
    /// <row>
    /// tangent <i> <j>
    /// concurrent <i> <j> <k> ...
    /// cusp <i>
    /// ```
    pub fn parse(text: &str) -> Result<Self, FibrationError> {
        let mut components = Vec::new();
        let mut adjacency: Vec<Vec<i64>> = Vec::new();
        let mut notes = IncidenceNotes::default();
        let mut in_matrix = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| FibrationError::Parse { line: ln + 1, msg: msg.to_string() };
            let mut words = line.split_whitespace();
            let head = words.next().unwrap_or("");
            let ints = |w: std::str::SplitWhitespace| -> Result<Vec<i64>, FibrationError> {
                w.map(|x| x.parse::<i64>().map_err(|_| err(&format!("bad integer {x:?}")))).collect()
            };
            match head {
                "component" => {
                    let v = ints(words)?;
                    if v.len() != 4 || v[1] < 1 || v[2] < 0 || v[3] < 0 {
                        return Err(err("component needs <self-int> <mult ≥ 1> <genus ≥ 0> <delta ≥ 0>"));
                    }
                    components.push(Component {
                        self_intersection: v[0],
                        multiplicity: v[1] as u32,
                        genus: v[2] as u32,
                        delta: v[3] as u32,
                    });
                    in_matrix = false;
                }
                "adjacency" => in_matrix = true,
                "tangent" => {
                    let v = ints(words)?;
                    if v.len() != 2 || v.iter().any(|&x| x < 0) {
                        return Err(err("tangent needs two component indices"));
                    }
                    notes.tangencies.push((v[0] as usize, v[1] as usize));
                    in_matrix = false;
                }
                "concurrent" => {
                    let v = ints(words)?;
                    if v.iter().any(|&x| x < 0) {
                        return Err(err("negative component index"));
                    }
                    notes.concurrent.push(v.into_iter().map(|x| x as usize).collect());
                    in_matrix = false;
                }
                "cusp" => {
                    let v = ints(words)?;
                    if v.len() != 1 || v[0] < 0 {
                        return Err(err("cusp needs one component index"));
                    }
                    notes.cusps.push(v[0] as usize);
                    in_matrix = false;
                }
                _ if in_matrix => adjacency.push(ints(line.split_whitespace())?),
                other => return Err(err(&format!("unknown keyword {other:?}"))),
            }
        }
        if adjacency.is_empty() && components.len() == 1 {
            adjacency = vec![vec![0]];
        }
        KodairaGraph::new(components, adjacency, notes)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.components {
            s += &format!("component {} {} {} {}\n", c.self_intersection, c.multiplicity, c.genus, c.delta);
        }
        s += "adjacency\n";
        for row in &self.adjacency {
            s += &row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            s += "\n";
        }
        for (i, j) in &self.notes.tangencies {
            s += &format!("tangent {i} {j}\n");
        }
        for set in &self.notes.concurrent {
            s += &format!("concurrent {}\n", set.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
        }
        for c in &self.notes.cusps {
            s += &format!("cusp {c}\n");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadFormAnalysis {
    /// qᵢⱼ = −Cᵢ·Cⱼ
    pub matrix: Vec<Vec<i64>>,
    pub psd: bool,
    pub annihilator_rank: usize,
    /// Primitive nonnegative generator when the annihilator has rank one.
    pub generator: Option<Vec<i64>>,
    /// The annihilator is spanned by Σnₖ[Cₖ].
    pub spanned_by_fiber: bool,
}

fn to_q(m: &[Vec<i64>]) -> Vec<Vec<Q>> {
    m.iter().map(|r| r.iter().map(|&x| Q::from_integer(x as i128)).collect()).collect()
}

/// Exact semidefiniteness by symmetric elimination: a positive pivot is
/// eliminated by its Schur complement; a zero pivot must have a zero row.
fn is_psd(m: &[Vec<i64>]) -> bool {
    let mut a = to_q(m);
    let zero = Q::from_integer(0);
    loop {
        let n = a.len();
        if n == 0 {
            return true;
        }
        if (0..n).any(|i| a[i][i] < zero) {
            return false;
        }
        match (0..n).find(|&i| a[i][i] > zero) {
            Some(k) => {
                let piv = a[k][k];
                let rest: Vec<usize> = (0..n).filter(|&i| i != k).collect();
                a = rest.iter().map(|&i| rest.iter().map(|&j| a[i][j] - a[i][k] * a[k][j] / piv).collect()).collect();
            }
            None => {
                // all diagonal entries vanish
                if a.iter().flatten().any(|x| *x != zero) {
                    return false;
                }
                return true;
            }
        }
    }
}

/// Basis of the rational null space by reduced row echelon form.
fn null_space(m: &[Vec<i64>]) -> Vec<Vec<Q>> {
    let mut a = to_q(m);
    let (rows, cols) = (a.len(), a.first().map_or(0, |r| r.len()));
    let zero = Q::from_integer(0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| a[i][c] != zero) else { continue };
        a.swap(r, p);
        let piv = a[r][c];
        for x in a[r].iter_mut() {
            *x /= piv;
        }
        for i in 0..rows {
            if i != r && a[i][c] != zero {
                let f = a[i][c];
                for j in 0..cols {
                    let v = a[r][j];
                    a[i][j] -= f * v;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![zero; cols];
            v[f] = Q::from_integer(1);
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][f];
            }
            v
        })
        .collect()
}

fn primitive(v: &[Q]) -> Vec<i64> {
    let l = v.iter().fold(1i128, |acc, x| acc.lcm(x.denom()));
    let ints: Vec<i128> = v.iter().map(|x| (x * Q::from_integer(l)).to_integer()).collect();
    let g = ints.iter().fold(0i128, |acc, x| acc.gcd(x)).max(1);
    let sign = if ints.iter().find(|x| **x != 0).is_some_and(|x| *x < 0) { -1 } else { 1 };
    ints.iter().map(|x| (sign * x / g) as i64).collect()
}

/// Semidefiniteness and annihilator of Q = −(Cᵢ·Cⱼ), in exact rational
/// arithmetic.
pub fn quad_form_analysis(graph: &KodairaGraph) -> Result<QuadFormAnalysis, FibrationError> {
    graph.validate()?;
    if !graph.is_connected() {
        return Err(FibrationError::Precondition("dual graph is disconnected".into()));
    }
    let sq = graph.fiber_square();
    if sq != 0 {
        return Err(FibrationError::Precondition(format!("fiber class has square {sq}, expected 0")));
    }
    let n = graph.len();
    let matrix: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| -graph.intersection(i, j)).collect()).collect();
    let psd = is_psd(&matrix);
    let kernel = null_space(&matrix);
    let generator = (kernel.len() == 1).then(|| primitive(&kernel[0]));
    let mult: Vec<i64> = graph.components.iter().map(|c| c.multiplicity as i64).collect();
    let spanned_by_fiber = generator.as_ref().is_some_and(|g| {
        let ratio = Q::new(mult[0] as i128, g[0] as i128);
        g[0] != 0
            && g.iter().zip(&mult).all(|(gi, mi)| Q::from_integer(*gi as i128) * ratio == Q::from_integer(*mi as i128))
    });
    Ok(QuadFormAnalysis { matrix, psd, annihilator_rank: kernel.len(), generator, spanned_by_fiber })
}

/// Euler number Σ e(Cᵢ) − Σ_p (r_p − 1) over intersection points p with r_p
/// branches, where a rational curve with k nodes has e = 2 − k and a cusp
/// does not change e.
pub fn euler_from_incidence(graph: &KodairaGraph) -> i64 {
    let n = graph.len();
    let mut e: i64 = 0;
    for (i, c) in graph.components.iter().enumerate() {
        let cusps = graph.notes.cusps.iter().filter(|&&k| k == i).count() as i64;
        let nodes = c.delta as i64 - cusps;
        e += 2 - 2 * c.genus as i64 - nodes;
    }
    for i in 0..n {
        for j in i + 1..n {
            let k = graph.adjacency[i][j];
            if k == 0 {
                continue;
            }
            let tangent = graph.notes.tangencies.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i));
            e -= if tangent { 1 } else { k };
        }
    }
    for set in &graph.notes.concurrent {
        let r = set.len() as i64;
        // r(r−1)/2 pairwise points merge into one point with r branches
        e += r * (r - 1) / 2 - (r - 1);
    }
    e
}

fn err(msg: impl Into<String>) -> FibrationError {
    FibrationError::Classification(msg.into())
}

/// Kodaira type of the fiber from its intersection and incidence data.
pub fn classify_fiber(graph: &KodairaGraph) -> Result<KodairaType, FibrationError> {
    let qa = quad_form_analysis(graph)?;
    if !qa.psd || qa.annihilator_rank != 1 {
        return Err(err(format!(
            "negated intersection form is {}semidefinite with annihilator of rank {}",
            if qa.psd { "" } else { "not " },
            qa.annihilator_rank
        )));
    }
    if !qa.spanned_by_fiber {
        return Err(err("annihilator is not spanned by the fiber class"));
    }
    let gen = qa.generator.expect("rank one annihilator has a generator");
    if graph.components.iter().zip(&gen).any(|(c, g)| c.multiplicity as i64 != *g) {
        return Err(err("multiple fiber"));
    }
    let n = graph.len();
    if n == 1 {
        let c = graph.components[0];
        return match (c.genus, c.delta) {
            (1, 0) => Err(err("smooth elliptic fiber is not singular")),
            (0, 1) if graph.notes.cusps.contains(&0) => Ok(KodairaType::II),
            (0, 1) => Ok(KodairaType::I(1)),
            _ => Err(err(format!("single component of genus {} with δ = {}", c.genus, c.delta))),
        };
    }
    if graph.components.iter().any(|c| c.genus != 0 || c.delta != 0 || c.self_intersection != -2) {
        return Err(err("components of a reducible fiber must be smooth rational (−2)-curves"));
    }
    let adj = &graph.adjacency;
    let degree: Vec<i64> = (0..n).map(|i| adj[i].iter().sum()).collect();
    if adj.iter().flatten().any(|&k| k > 2) || (n > 2 && adj.iter().flatten().any(|&k| k > 1)) {
        return Err(err("intersection multiplicities exceed the affine diagrams"));
    }
    if n == 2 {
        return Ok(if graph.notes.tangencies.is_empty() { KodairaType::I(2) } else { KodairaType::III });
    }
    if !graph.notes.tangencies.is_empty() {
        return Err(err("tangency between components of a fiber with more than two components"));
    }
    let edges: i64 = degree.iter().sum::<i64>() / 2;
    if edges == n as i64 {
        if degree.iter().any(|&d| d != 2) {
            return Err(err("cycle graph with a vertex of degree other than two"));
        }
        if n == 3 && graph.notes.concurrent.iter().any(|s| s.len() == 3) {
            return Ok(KodairaType::IV);
        }
        if !graph.notes.concurrent.is_empty() {
            return Err(err("concurrency flags on a cycle of length above three"));
        }
        return Ok(KodairaType::I(n as u32));
    }
    if !graph.notes.concurrent.is_empty() {
        return Err(err("concurrency flags on a tree"));
    }
    if edges != n as i64 - 1 {
        return Err(err("dual graph is neither a cycle nor a tree"));
    }
    let branch: Vec<usize> = (0..n).filter(|&i| degree[i] >= 3).collect();
    let neighbours = |i: usize| (0..n).filter(move |&j| adj[i][j] > 0);
    match branch.as_slice() {
        [c] if degree[*c] == 4 && n == 5 => Ok(KodairaType::IStar(0)),
        [c] if degree[*c] == 3 => {
            let mut arms: Vec<usize> = neighbours(*c)
                .map(|start| {
                    let (mut prev, mut cur, mut len) = (*c, start, 1);
                    while let Some(next) = neighbours(cur).find(|&j| j != prev) {
                        prev = cur;
                        cur = next;
                        len += 1;
                    }
                    len
                })
                .collect();
            arms.sort_unstable();
            match arms.as_slice() {
                [2, 2, 2] => Ok(KodairaType::IVStar),
                [1, 3, 3] => Ok(KodairaType::IIIStar),
                [1, 2, 5] => Ok(KodairaType::IIStar),
                other => Err(err(format!("star with arms {other:?} is not affine"))),
            }
        }
        [a, b] if degree[*a] == 3 && degree[*b] == 3 => {
            let leaves_ok = [*a, *b].iter().all(|&v| neighbours(v).filter(|&j| degree[j] == 1).count() >= 2);
            let leaf_count = degree.iter().filter(|&&d| d == 1).count();
            if leaves_ok && leaf_count == 4 {
                Ok(KodairaType::IStar(n as u32 - 5))
            } else {
                Err(err("two branch points without two leaves each"))
            }
        }
        _ => Err(err("tree is not an affine D or E diagram")),
    }
}

fn chain_adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<i64>> {
    let mut a = vec![vec![0; n]; n];
    for &(i, j) in edges {
        a[i][j] += 1;
        a[j][i] += 1;
    }
    a
}

/// Canonical configuration of curves for each Kodaira type.
pub fn fixture(t: KodairaType) -> KodairaGraph {
    let rational = Component::smooth_rational;
    let tree = |mults: &[u32], edges: &[(usize, usize)]| KodairaGraph {
        components: mults.iter().map(|&m| rational(m)).collect(),
        adjacency: chain_adjacency(mults.len(), edges),
        notes: IncidenceNotes::default(),
    };
    match t {
        KodairaType::I(1) | KodairaType::II => KodairaGraph {
            components: vec![Component { self_intersection: 0, multiplicity: 1, genus: 0, delta: 1 }],
            adjacency: vec![vec![0]],
            notes: IncidenceNotes { cusps: if t == KodairaType::II { vec![0] } else { vec![] }, ..Default::default() },
        },
        KodairaType::I(2) | KodairaType::III => KodairaGraph {
            components: vec![rational(1), rational(1)],
            adjacency: vec![vec![0, 2], vec![2, 0]],
            notes: IncidenceNotes {
                tangencies: if t == KodairaType::III { vec![(0, 1)] } else { vec![] },
                ..Default::default()
            },
        },
        KodairaType::IV => {
            let mut g = fixture(KodairaType::I(3));
            g.notes.concurrent.push(vec![0, 1, 2]);
            g
        }
        KodairaType::I(n) => {
            let n = n as usize;
            let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            tree(&vec![1; n], &edges)
        }
        KodairaType::IStar(0) => tree(&[2, 1, 1, 1, 1], &[(0, 1), (0, 2), (0, 3), (0, 4)]),
        KodairaType::IStar(k) => {
            // chain 0..=k of multiplicity 2, leaves k+1, k+2 on 0 and k+3, k+4 on k
            let k = k as usize;
            let mut mults = vec![2; k + 1];
            mults.extend([1, 1, 1, 1]);
            let mut edges: Vec<(usize, usize)> = (0..k).map(|i| (i, i + 1)).collect();
            edges.extend([(0, k + 1), (0, k + 2), (k, k + 3), (k, k + 4)]);
            tree(&mults, &edges)
        }
        KodairaType::IVStar => tree(&[3, 2, 1, 2, 1, 2, 1], &[(0, 1), (1, 2), (0, 3), (3, 4), (0, 5), (5, 6)]),
        KodairaType::IIIStar => {
            tree(&[4, 3, 2, 1, 3, 2, 1, 2], &[(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6), (0, 7)])
        }
        KodairaType::IIStar => {
            tree(&[6, 5, 4, 3, 2, 1, 4, 2, 3], &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 6), (6, 7), (0, 8)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_curves_meeting_twice() {
        let g = fixture(KodairaType::I(2));
        let qa = quad_form_analysis(&g).unwrap();
        assert_eq!(qa.matrix, vec![vec![2, -2], vec![-2, 2]]);
        assert!(qa.psd && qa.spanned_by_fiber);
        assert_eq!(qa.generator, Some(vec![1, 1]));
    }

    #[test]
    fn single_component_is_its_own_annihilator() {
        let qa = quad_form_analysis(&fixture(KodairaType::I(1))).unwrap();
        assert_eq!((qa.psd, qa.annihilator_rank, qa.generator.clone()), (true, 1, Some(vec![1])));
    }

    #[test]
    fn nine_cycle_is_affine_a8() {
        let qa = quad_form_analysis(&fixture(KodairaType::I(9))).unwrap();
        assert!(qa.psd);
        assert_eq!(qa.generator, Some(vec![1; 9]));
    }

    #[test]
    fn star_of_five_is_i0_star() {
        let g = fixture(KodairaType::IStar(0));
        assert_eq!(classify_fiber(&g).unwrap(), KodairaType::IStar(0));
        assert_eq!(KodairaType::IStar(0).euler(), 6);
    }

    #[test]
    fn finite_diagram_is_definite_and_rejected() {
        // D₅ chain with the wrong multiplicities has nonzero fiber square
        let mut g = fixture(KodairaType::IStar(1));
        g.components[0].multiplicity = 1;
        assert!(matches!(quad_form_analysis(&g), Err(FibrationError::Precondition(_))));
    }

    #[test]
    fn disconnected_graph_is_a_precondition_error() {
        let g = KodairaGraph::new(
            vec![Component { self_intersection: 0, multiplicity: 1, genus: 1, delta: 0 }; 2],
            vec![vec![0, 0], vec![0, 0]],
            IncidenceNotes::default(),
        )
        .unwrap();
        assert!(matches!(quad_form_analysis(&g), Err(FibrationError::Precondition(_))));
    }

    #[test]
    fn indefinite_form_is_detected() {
        assert!(!is_psd(&[vec![1, 2], vec![2, 1]]));
        assert!(!is_psd(&[vec![0, 1], vec![1, 0]]));
        assert!(is_psd(&[vec![0, 0], vec![0, 3]]));
    }

    #[test]
    fn every_fixture_classifies_to_its_type() {
        for t in kodaira_table(9, 4) {
            let g = fixture(t);
            assert_eq!(classify_fiber(&g).unwrap(), t);
            assert_eq!(euler_from_incidence(&g), t.euler(), "{t}");
        }
    }

    #[test]
    fn incidence_flags_split_equal_lattices() {
        let (i3, iv) = (fixture(KodairaType::I(3)), fixture(KodairaType::IV));
        assert_eq!(quad_form_analysis(&i3).unwrap(), quad_form_analysis(&iv).unwrap());
        assert_ne!(classify_fiber(&i3).unwrap(), classify_fiber(&iv).unwrap());
    }

    #[test]
    fn smooth_fiber_and_multiple_fiber_are_rejected() {
        let smooth = KodairaGraph::new(
            vec![Component { self_intersection: 0, multiplicity: 1, genus: 1, delta: 0 }],
            vec![vec![0]],
            IncidenceNotes::default(),
        )
        .unwrap();
        assert!(matches!(classify_fiber(&smooth), Err(FibrationError::Classification(_))));
        let mut double = fixture(KodairaType::I(4));
        for c in &mut double.components {
            c.multiplicity = 2;
        }
        assert!(matches!(classify_fiber(&double), Err(FibrationError::Classification(_))));
    }

    #[test]
    fn text_round_trip() {
        for t in kodaira_table(4, 2) {
            let g = fixture(t);
            assert_eq!(KodairaGraph::parse(&g.to_text()).unwrap(), g, "{t}");
        }
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let e = KodairaGraph::parse("component -2 1 0 0\nbogus 1\n").unwrap_err();
        assert!(matches!(e, FibrationError::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn type_names_round_trip() {
        for t in kodaira_table(9, 4) {
            assert_eq!(t.to_string().parse::<KodairaType>().unwrap(), t);
        }
        assert!("I0".parse::<KodairaType>().is_err());
        assert!("V".parse::<KodairaType>().is_err());
    }
}
