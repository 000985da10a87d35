//! Finite groups as Cayley tables and their real irreducible representations.
//!
//! Elements are indexed canonically: for the dihedral family the order is
//! `e, r, r2, .., m, mr, mr2, ..` where `mr^k` means `m ∘ r^k` (apply `r^k`
//! first). [`GroupTable::dihedral`] with `n = 1` gives Z2 = {e, m}.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, serde_rows_vec};
use crate::TABLE_TOL;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTable {
    pub name: String,
    /// Display names, index = element id.
    pub elements: Vec<String>,
    /// `cayley[i][j]` is the index of `g_i ∘ g_j`.
    pub cayley: Vec<Vec<usize>>,
    pub identity: usize,
    pub inverses: Vec<usize>,
}

impl GroupTable {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn compose(&self, a: usize, b: usize) -> usize {
        self.cayley[a][b]
    }

    #[inline]
    pub fn inverse(&self, a: usize) -> usize {
        self.inverses[a]
    }

    pub fn element_index(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == name)
    }

    /// The group with a single element.
    pub fn trivial() -> Self {
        GroupTable {
            name: "trivial".into(),
            elements: vec!["e".into()],
            cayley: vec![vec![0]],
            identity: 0,
            inverses: vec![0],
        }
    }

    /// Dihedral group of order `2n`, generated by a rotation `r` of order `n`
    /// and a reflection `m` with `r ∘ m = m ∘ r^-1`.
    pub fn dihedral(n: usize, name: &str) -> Self {
        assert!(n >= 1);
        let order = 2 * n;
        let mut elements = Vec::with_capacity(order);
        for k in 0..n {
            elements.push(rotation_name(k));
        }
        for k in 0..n {
            elements.push(format!("m{}", rotation_name(k)).replace("me", "m"));
        }
        let idx = |reflect: bool, k: usize| if reflect { n + k % n } else { k % n };
        let cayley = (0..order)
            .map(|i| {
                (0..order)
                    .map(|j| {
                        let (ri, a) = (i >= n, i % n);
                        let (rj, b) = (j >= n, j % n);
                        match (ri, rj) {
                            (false, false) => idx(false, a + b),
                            (false, true) => idx(true, b + n - a),
                            (true, false) => idx(true, a + b),
                            (true, true) => idx(false, b + n - a),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut table = GroupTable {
            name: name.into(),
            elements,
            cayley,
            identity: 0,
            inverses: Vec::new(),
        };
        table.inverses = (0..order)
            .map(|i| (0..order).find(|&j| table.cayley[i][j] == 0).unwrap())
            .collect();
        table
    }
}

fn rotation_name(k: usize) -> String {
    match k {
        0 => "e".into(),
        1 => "r".into(),
        _ => format!("r{k}"),
    }
}

/// A real orthogonal irreducible representation given by one matrix per element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "IrrepDoc", into = "IrrepDoc")]
pub struct Irrep {
    pub label: String,
    pub dim: usize,
    pub matrices: Vec<DMatrix<f64>>,
    pub character: Vec<f64>,
}

impl Irrep {
    pub fn new(label: impl Into<String>, matrices: Vec<DMatrix<f64>>) -> Self {
        let dim = matrices.first().map_or(0, |m| m.nrows());
        let character = matrices.iter().map(|m| m.trace()).collect();
        Irrep {
            label: label.into(),
            dim,
            matrices,
            character,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.dim == 1 && self.matrices.iter().all(|m| m[(0, 0)] == 1.0)
    }
}

#[derive(Serialize, Deserialize)]
struct IrrepDoc {
    label: String,
    dim: usize,
    #[serde(with = "serde_rows_vec")]
    matrices: Vec<DMatrix<f64>>,
}

impl From<IrrepDoc> for Irrep {
    fn from(doc: IrrepDoc) -> Self {
        Irrep::new(doc.label, doc.matrices)
    }
}

impl From<Irrep> for IrrepDoc {
    fn from(irrep: Irrep) -> Self {
        IrrepDoc {
            label: irrep.label,
            dim: irrep.dim,
            matrices: irrep.matrices,
        }
    }
}

/// JSON document holding a group table and its irreducible representations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDocument {
    pub group: GroupTable,
    pub irreps: Vec<Irrep>,
}

/// Groups with a built-in irreducible table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupName {
    Trivial,
    Z2,
    D4,
    D6,
}

impl GroupName {
    pub fn build(self) -> (GroupTable, Vec<Irrep>) {
        match self {
            GroupName::Trivial => build_trivial(),
            GroupName::Z2 => build_z2(),
            GroupName::D4 => build_d4(),
            GroupName::D6 => build_d6(),
        }
    }

    /// Order of the rotation subgroup for the dihedral family.
    pub fn rotation_order(self) -> usize {
        match self {
            GroupName::Trivial | GroupName::Z2 => 1,
            GroupName::D4 => 4,
            GroupName::D6 => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GroupName::Trivial => "trivial",
            GroupName::Z2 => "z2",
            GroupName::D4 => "d4",
            GroupName::D6 => "d6",
        }
    }
}

impl fmt::Display for GroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trivial" | "c1" => Ok(GroupName::Trivial),
            "z2" => Ok(GroupName::Z2),
            "d4" => Ok(GroupName::D4),
            "d6" => Ok(GroupName::D6),
            other => Err(Error::Config(format!("unknown group '{other}'"))),
        }
    }
}

pub fn build_trivial() -> (GroupTable, Vec<Irrep>) {
    let g = GroupTable::trivial();
    let irreps = vec![Irrep::new("tau_1", vec![DMatrix::identity(1, 1)])];
    (g, irreps)
}

/// Z2 = {e, m}: identity and horizontal flip.
pub fn build_z2() -> (GroupTable, Vec<Irrep>) {
    let g = GroupTable::dihedral(1, "z2");
    let irreps = vec![
        one_dim(&g, 1, "tau_1", 1.0, 1.0),
        one_dim(&g, 1, "tau_{-1}", 1.0, -1.0),
    ];
    (g, irreps)
}

/// D4: pi/2 rotation `r` and flip `m`, with the five irreps of the square.
pub fn build_d4() -> (GroupTable, Vec<Irrep>) {
    let g = GroupTable::dihedral(4, "d4");
    let mut irreps = dihedral_one_dim(&g, 4);
    // tau_2(m) = diag(-1, 1)
    irreps.push(two_dim(&g, 4, "tau_2", 1, [-1.0, 1.0]));
    (g, irreps)
}

/// D6: pi/3 rotation `r` and flip `m`. The reflection of both 2-dim irreps is
/// diag(1, -1) so that `m ∘ m = e` holds.
pub fn build_d6() -> (GroupTable, Vec<Irrep>) {
    let g = GroupTable::dihedral(6, "d6");
    let mut irreps = dihedral_one_dim(&g, 6);
    irreps.push(two_dim(&g, 6, "tau_{2a}", 1, [1.0, -1.0]));
    irreps.push(two_dim(&g, 6, "tau_{2b}", 2, [1.0, -1.0]));
    (g, irreps)
}

/// The four 1-dim irreps `tau_{a,b}` with `tau(r) = a`, `tau(m) = b`.
fn dihedral_one_dim(g: &GroupTable, n: usize) -> Vec<Irrep> {
    [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .into_iter()
        .map(|(a, b)| {
            let label = format!("tau_{{{},{}}}", a as i32, b as i32);
            one_dim(g, n, &label, a, b)
        })
        .collect()
}

fn one_dim(g: &GroupTable, n: usize, label: &str, at_r: f64, at_m: f64) -> Irrep {
    let matrices = (0..g.order())
        .map(|i| {
            let k = i % n;
            let mut v = if k % 2 == 1 { at_r } else { 1.0 };
            if n == 1 {
                v = 1.0;
            }
            if i >= n {
                v *= at_m;
            }
            DMatrix::from_element(1, 1, v)
        })
        .collect();
    Irrep::new(label, matrices)
}

/// 2-dim irrep sending `r` to the rotation by `2 pi step / n` and `m` to
/// `diag(reflection)`.
fn two_dim(g: &GroupTable, n: usize, label: &str, step: usize, reflection: [f64; 2]) -> Irrep {
    let refl = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&reflection));
    let matrices = (0..g.order())
        .map(|i| {
            let rot = rotation(step * (i % n), n);
            if i >= n {
                &refl * rot
            } else {
                rot
            }
        })
        .collect();
    Irrep::new(label, matrices)
}

fn rotation(k: usize, n: usize) -> DMatrix<f64> {
    let theta = 2.0 * std::f64::consts::PI * (k % n) as f64 / n as f64;
    let (s, c) = (snap(theta.sin()), snap(theta.cos()));
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Snap values within rounding of 0, ±1/2, ±1 or ±sqrt(3)/2 to the canonical double.
fn snap(x: f64) -> f64 {
    let half_sqrt3 = 3f64.sqrt() / 2.0;
    for target in [0.0, 0.5, 1.0, half_sqrt3] {
        if (x.abs() - target).abs() < 1e-14 {
            return target.copysign(x) + 0.0;
        }
    }
    x
}

/// One named check inside a [`ValidationReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    /// Offending index tuples (element triples, element pairs, irrep pairs...).
    pub offenders: Vec<Vec<usize>>,
}

impl Check {
    fn from_offenders(name: impl Into<String>, max_error: f64, offenders: Vec<Vec<usize>>) -> Self {
        Check {
            name: name.into(),
            passed: offenders.is_empty(),
            max_error,
            offenders,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub subject: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            write!(
                f,
                "{status} {}: {} (max error {:.2e})",
                self.subject, c.name, c.max_error
            )?;
            if !c.passed {
                let shown: Vec<String> = c
                    .offenders
                    .iter()
                    .take(8)
                    .map(|o| format!("{o:?}"))
                    .collect();
                write!(f, " offenders {}", shown.join(" "))?;
                if c.offenders.len() > 8 {
                    write!(f, " (+{} more)", c.offenders.len() - 8)?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Check closure, associativity, identity and inverses of a Cayley table.
pub fn validate_group(table: &GroupTable) -> ValidationReport {
    let n = table.order();
    let mut checks = Vec::new();

    let shape_ok = table.cayley.len() == n && table.cayley.iter().all(|row| row.len() == n);
    let mut closure = Vec::new();
    if !shape_ok {
        closure.push(vec![table.cayley.len()]);
    } else {
        for (i, row) in table.cayley.iter().enumerate() {
            for (j, &k) in row.iter().enumerate() {
                if k >= n {
                    closure.push(vec![i, j]);
                }
            }
        }
    }
    let closed = closure.is_empty();
    checks.push(Check::from_offenders("closure", 0.0, closure));

    // The remaining axioms index through the table; only meaningful once closed.
    let mut assoc = Vec::new();
    let mut ident = Vec::new();
    let mut inv = Vec::new();
    if closed {
        let c = &table.cayley;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if c[c[i][j]][k] != c[i][c[j][k]] {
                        assoc.push(vec![i, j, k]);
                    }
                }
            }
        }
        let e = table.identity;
        if e >= n {
            ident.push(vec![e]);
        } else {
            for (i, row) in c.iter().enumerate() {
                if c[e][i] != i || row[e] != i {
                    ident.push(vec![i]);
                }
            }
        }
        if table.inverses.len() != n {
            inv.push(vec![table.inverses.len()]);
        } else {
            for (i, &j) in table.inverses.iter().enumerate() {
                if j >= n || c[i][j] != e || c[j][i] != e {
                    inv.push(vec![i]);
                }
            }
        }
    } else {
        assoc.push(vec![]);
    }
    checks.push(Check::from_offenders("associativity", 0.0, assoc));
    checks.push(Check::from_offenders("identity", 0.0, ident));
    checks.push(Check::from_offenders("inverse", 0.0, inv));

    ValidationReport {
        subject: table.name.clone(),
        checks,
    }
}

/// Check every irrep against the table: homomorphism, identity, orthogonality,
/// real type (character norm and Frobenius-Schur indicator equal to one),
/// pairwise character orthogonality, and completeness `Σ d_t² = |G|`.
pub fn validate_irreps(table: &GroupTable, irreps: &[Irrep]) -> ValidationReport {
    let n = table.order();
    let tol = TABLE_TOL;
    let mut checks = Vec::new();

    for (t, irrep) in irreps.iter().enumerate() {
        let d = irrep.dim;
        let shape_ok = irrep.matrices.len() == n
            && irrep
                .matrices
                .iter()
                .all(|m| m.nrows() == d && m.ncols() == d)
            && irrep
                .matrices
                .iter()
                .all(|m| m.iter().all(|x| x.is_finite()));
        checks.push(Check::from_offenders(
            format!("shape[{}]", irrep.label),
            0.0,
            if shape_ok { vec![] } else { vec![vec![t]] },
        ));
        if !shape_ok {
            continue;
        }
        let m = &irrep.matrices;
        let ident = DMatrix::<f64>::identity(d, d);

        let mut worst = 0.0_f64;
        let mut bad = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let ab = table.compose(a, b);
                if ab >= n {
                    bad.push(vec![a, b]);
                    continue;
                }
                let err = max_abs_diff(&(&m[a] * &m[b]), &m[ab]);
                worst = worst.max(err);
                if err > tol {
                    bad.push(vec![a, b]);
                }
            }
        }
        checks.push(Check::from_offenders(
            format!("homomorphism[{}]", irrep.label),
            worst,
            bad,
        ));

        let e = table.identity.min(n - 1);
        let err = max_abs_diff(&m[e], &ident);
        checks.push(Check::from_offenders(
            format!("identity[{}]", irrep.label),
            err,
            if err > tol { vec![vec![e]] } else { vec![] },
        ));

        let mut worst = 0.0_f64;
        let mut bad = Vec::new();
        for (g, mat) in m.iter().enumerate() {
            let err = max_abs_diff(&(mat.transpose() * mat), &ident);
            worst = worst.max(err);
            if err > tol {
                bad.push(vec![g]);
            }
        }
        checks.push(Check::from_offenders(
            format!("orthogonality[{}]", irrep.label),
            worst,
            bad,
        ));

        let chi = &irrep.character;
        let norm = chi.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let err = (norm - 1.0).abs();
        checks.push(Check::from_offenders(
            format!("character_norm[{}]", irrep.label),
            err,
            if err > tol { vec![vec![t]] } else { vec![] },
        ));

        // Frobenius-Schur indicator (1/|G|) Σ χ(g²) is 1 exactly for real-type irreps.
        let fs = (0..n)
            .map(|g| {
                let gg = table.compose(g, g);
                if gg < n {
                    chi[gg]
                } else {
                    f64::NAN
                }
            })
            .sum::<f64>()
            / n as f64;
        let err = (fs - 1.0).abs();
        checks.push(Check::from_offenders(
            format!("real_type[{}]", irrep.label),
            if err.is_nan() { f64::INFINITY } else { err },
            if err > tol || err.is_nan() {
                vec![vec![t]]
            } else {
                vec![]
            },
        ));
    }

    let mut worst = 0.0_f64;
    let mut bad = Vec::new();
    for a in 0..irreps.len() {
        for b in a + 1..irreps.len() {
            let (ca, cb) = (&irreps[a].character, &irreps[b].character);
            if ca.len() != n || cb.len() != n {
                continue;
            }
            let ip = ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>() / n as f64;
            worst = worst.max(ip.abs());
            if ip.abs() > tol {
                bad.push(vec![a, b]);
            }
        }
    }
    checks.push(Check::from_offenders("character_orthogonality", worst, bad));

    let total: usize = irreps.iter().map(|i| i.dim * i.dim).sum();
    checks.push(Check::from_offenders(
        "completeness",
        (total as f64 - n as f64).abs(),
        if total == n {
            vec![]
        } else {
            vec![vec![total, n]]
        },
    ));

    ValidationReport {
        subject: format!("{} irreps", table.name),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn z2_table_and_irreps() {
        let (g, irreps) = build_z2();
        assert_eq!(g.order(), 2);
        assert_eq!(g.elements, vec!["e", "m"]);
        let m = g.element_index("m").unwrap();
        assert_eq!(g.compose(m, m), g.identity);
        assert_eq!(irreps[1].matrices[m][(0, 0)], -1.0);
        assert!(validate_group(&g).passed());
        let report = validate_irreps(&g, &irreps);
        assert!(report.passed(), "{report}");
        let ortho = report.check("character_orthogonality").unwrap();
        assert_eq!(ortho.max_error, 0.0);
    }

    #[test]
    fn d4_matches_printed_table() {
        let (g, irreps) = build_d4();
        assert_eq!(
            g.elements,
            vec!["e", "r", "r2", "r3", "m", "mr", "mr2", "mr3"]
        );
        let tau2 = &irreps[4];
        assert_eq!(tau2.label, "tau_2");
        let r = g.element_index("r").unwrap();
        let m = g.element_index("m").unwrap();
        let mr = g.element_index("mr").unwrap();
        assert_eq!(tau2.matrices[r], mat(&[&[0.0, -1.0], &[1.0, 0.0]]));
        let prod = &tau2.matrices[m] * &tau2.matrices[r];
        assert_eq!(prod, mat(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert_eq!(prod, tau2.matrices[mr]);
        // remaining printed columns
        assert_eq!(
            tau2.matrices[g.element_index("r2").unwrap()],
            mat(&[&[-1.0, 0.0], &[0.0, -1.0]])
        );
        assert_eq!(
            tau2.matrices[g.element_index("r3").unwrap()],
            mat(&[&[0.0, 1.0], &[-1.0, 0.0]])
        );
        assert_eq!(tau2.matrices[m], mat(&[&[-1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(
            tau2.matrices[g.element_index("mr2").unwrap()],
            mat(&[&[1.0, 0.0], &[0.0, -1.0]])
        );
        assert_eq!(
            tau2.matrices[g.element_index("mr3").unwrap()],
            mat(&[&[0.0, -1.0], &[-1.0, 0.0]])
        );

        let at_r: Vec<f64> = irreps[..4].iter().map(|i| i.character[r]).collect();
        let at_m: Vec<f64> = irreps[..4].iter().map(|i| i.character[m]).collect();
        assert_eq!(at_r, vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(at_m, vec![1.0, -1.0, 1.0, -1.0]);
        let labels: Vec<&str> = irreps.iter().map(|i| i.label.as_str()).collect();
        assert_eq!(
            labels,
            [
                "tau_{1,1}",
                "tau_{1,-1}",
                "tau_{-1,1}",
                "tau_{-1,-1}",
                "tau_2"
            ]
        );
        assert_eq!(irreps.iter().map(|i| i.dim * i.dim).sum::<usize>(), 8);
        // mr column of the 1-dim rows: (1, -1, -1, 1)
        let at_mr: Vec<f64> = irreps[..4].iter().map(|i| i.character[mr]).collect();
        assert_eq!(at_mr, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn d6_rotation_and_reflection() {
        let (g, irreps) = build_d6();
        assert_eq!(g.order(), 12);
        let r = g.element_index("r").unwrap();
        let m = g.element_index("m").unwrap();
        let t2a = &irreps[4];
        let (c, s) = (
            (std::f64::consts::PI / 3.0).cos(),
            (std::f64::consts::PI / 3.0).sin(),
        );
        assert!(max_abs_diff(&t2a.matrices[r], &mat(&[&[c, -s], &[s, c]])) < 1e-15);
        let sq = &t2a.matrices[m] * &t2a.matrices[m];
        assert_eq!(sq, DMatrix::identity(2, 2));
        assert_eq!(irreps.iter().map(|i| i.dim * i.dim).sum::<usize>(), 12);
        let report = validate_irreps(&g, &irreps);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn character_at_identity_is_dimension() {
        for name in [
            GroupName::Trivial,
            GroupName::Z2,
            GroupName::D4,
            GroupName::D6,
        ] {
            let (g, irreps) = name.build();
            assert!(validate_group(&g).passed());
            assert!(validate_irreps(&g, &irreps).passed());
            for irrep in &irreps {
                assert_eq!(irrep.character[g.identity], irrep.dim as f64);
            }
        }
    }

    #[test]
    fn corrupted_cayley_reports_associativity() {
        let (mut g, _) = build_d4();
        g.cayley[1][1] = 3;
        let report = validate_group(&g);
        assert!(!report.passed());
        let assoc = report.check("associativity").unwrap();
        assert!(!assoc.passed);
        assert!(assoc.offenders.iter().any(|t| t.len() == 3));
        // (r∘r)∘m and r∘(r∘m) now disagree
        assert!(assoc.offenders.contains(&vec![1, 1, 4]));
    }

    #[test]
    fn order_one_group_is_valid() {
        assert!(validate_group(&GroupTable::trivial()).passed());
    }

    #[test]
    fn mutated_tau2_fails_homomorphism() {
        let (g, mut irreps) = build_d4();
        let r = g.element_index("r").unwrap();
        let mut matrices = irreps[4].matrices.clone();
        matrices[r] = DMatrix::identity(2, 2);
        irreps[4] = Irrep::new("tau_2", matrices);
        let report = validate_irreps(&g, &irreps);
        assert!(!report.check("homomorphism[tau_2]").unwrap().passed);
    }

    #[test]
    fn complex_type_group_is_rejected() {
        // Z3 with its 2-dim real rotation rep: irreducible over R, but it is the
        // realification of a complex pair, so it fails the real-type checks.
        let n = 3;
        let cayley = (0..n)
            .map(|i| (0..n).map(|j| (i + j) % n).collect())
            .collect();
        let g = GroupTable {
            name: "z3".into(),
            elements: vec!["e".into(), "r".into(), "r2".into()],
            cayley,
            identity: 0,
            inverses: vec![0, 2, 1],
        };
        assert!(validate_group(&g).passed());
        let trivial = Irrep::new("tau_1", vec![DMatrix::identity(1, 1); 3]);
        let rot = Irrep::new("rho", (0..3).map(|k| rotation(k, 3)).collect());
        let report = validate_irreps(&g, &[trivial, rot]);
        assert!(!report.passed());
        assert!(!report.check("character_norm[rho]").unwrap().passed);
        assert!(!report.check("real_type[rho]").unwrap().passed);
        assert!(!report.check("completeness").unwrap().passed);
    }

    #[test]
    fn json_round_trip_is_exact() {
        for name in [GroupName::Z2, GroupName::D4, GroupName::D6] {
            let (group, irreps) = name.build();
            let doc = GroupDocument { group, irreps };
            let text = serde_json::to_string(&doc).unwrap();
            let back: GroupDocument = serde_json::from_str(&text).unwrap();
            assert_eq!(back, doc);
        }
    }
}
