//! Single-band tight-binding model on the integer-indexed square lattice.
//!
//! Any simple Bravais lattice is mapped onto integer site labels `(m1, m2)`; only the
//! connectivity matters for the dynamics, so metric positions are never reconstructed.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::ops::Neg;

use crate::error::{Error, Result};

/// Integer lattice offset `m = (m1, m2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Offset {
    pub m1: i32,
    pub m2: i32,
}

impl Offset {
    pub const fn new(m1: i32, m2: i32) -> Self {
        Offset { m1, m2 }
    }

    pub fn is_origin(self) -> bool {
        self.m1 == 0 && self.m2 == 0
    }

    /// `k · m`.
    pub fn phase(self, k: WaveVector) -> f64 {
        k.k1 * f64::from(self.m1) + k.k2 * f64::from(self.m2)
    }

    pub fn norm(self) -> f64 {
        f64::from(self.m1).hypot(f64::from(self.m2))
    }

    pub fn as_f64(self) -> [f64; 2] {
        [f64::from(self.m1), f64::from(self.m2)]
    }

    /// Representative of the pair `{m, -m}`: the offset that compares greater.
    pub fn is_canonical(self) -> bool {
        self > -self
    }
}

impl Neg for Offset {
    type Output = Offset;
    fn neg(self) -> Offset {
        Offset::new(-self.m1, -self.m2)
    }
}

impl From<(i32, i32)> for Offset {
    fn from((m1, m2): (i32, i32)) -> Self {
        Offset::new(m1, m2)
    }
}

/// Wave vector in the Brillouin zone `[-π, π) x [-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaveVector {
    pub k1: f64,
    pub k2: f64,
}

impl WaveVector {
    pub const fn new(k1: f64, k2: f64) -> Self {
        WaveVector { k1, k2 }
    }

    /// Reduce both components into `[-π, π)`. Components already in range are returned
    /// untouched, which makes the operation idempotent bit-for-bit.
    pub fn canonical(self) -> Self {
        WaveVector::new(canonical_angle(self.k1), canonical_angle(self.k2))
    }

    pub fn shifted(self, force: &ForceSpec, t: f64) -> Self {
        WaveVector::new(self.k1 + force.f1 * t, self.k2 + force.f2 * t)
    }
}

fn canonical_angle(k: f64) -> f64 {
    if (-PI..PI).contains(&k) || !k.is_finite() {
        return k;
    }
    let r = k - TAU * ((k + PI) / TAU).floor();
    if r >= PI {
        r - TAU
    } else if r < -PI {
        r + TAU
    } else {
        r
    }
}

/// Hopping amplitudes `J_m` of `H = -Σ J_m |l><l+m|`.
///
/// Both `m` and `-m` are stored. Sets built with [`HoppingSet::symmetric`] satisfy
/// `J_m = J_{-m}` by construction; sets read from raw data should be checked with
/// [`validate_hopping_set`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HoppingSet {
    entries: BTreeMap<Offset, f64>,
}

impl HoppingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from `(m, J)` pairs, inserting `-m` alongside every `m`.
    pub fn symmetric<I, O>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (O, f64)>,
        O: Into<Offset>,
    {
        let mut set = HoppingSet::new();
        for (m, j) in pairs {
            set.insert_symmetric(m.into(), j)?;
        }
        Ok(set)
    }

    /// Build from raw entries without enforcing symmetry.
    pub fn from_raw<I, O>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (O, f64)>,
        O: Into<Offset>,
    {
        let mut map = BTreeMap::new();
        for (m, j) in entries {
            let m = m.into();
            if m.is_origin() {
                return Err(Error::OnSiteHopping);
            }
            if !j.is_finite() {
                return Err(Error::param("J", format!("non-finite hopping at {m:?}")));
            }
            map.insert(m, j);
        }
        Ok(HoppingSet { entries: map })
    }

    pub fn insert_symmetric(&mut self, m: Offset, j: f64) -> Result<()> {
        if m.is_origin() {
            return Err(Error::OnSiteHopping);
        }
        if !j.is_finite() {
            return Err(Error::param("J", format!("non-finite hopping at {m:?}")));
        }
        self.entries.insert(m, j);
        self.entries.insert(-m, j);
        Ok(())
    }

    /// Three-shell triangular-lattice model with nearest, second and third neighbour
    /// hoppings `j`.
    pub fn triangular(j: [f64; 3]) -> Self {
        let mut set = HoppingSet::new();
        for (shell, value) in triangular_shells().iter().zip(j) {
            for &m in &shell.offsets {
                set.entries.insert(m, value);
            }
        }
        set
    }

    pub fn get(&self, m: Offset) -> Option<f64> {
        self.entries.get(&m).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Offset, f64)> + '_ {
        self.entries.iter().map(|(&m, &j)| (m, j))
    }

    /// One representative per `{m, -m}` pair.
    pub fn pairs(&self) -> impl Iterator<Item = (Offset, f64)> + '_ {
        self.iter().filter(|(m, _)| m.is_canonical())
    }

    /// Largest `|m_i|` over the support.
    pub fn range(&self) -> i32 {
        self.entries
            .keys()
            .map(|m| m.m1.abs().max(m.m2.abs()))
            .max()
            .unwrap_or(0)
    }

    /// `Σ_m |J_m|`, an upper bound on `|E(k)|`.
    pub fn total_abs(&self) -> f64 {
        self.entries.values().map(|j| j.abs()).sum()
    }

    /// `E(k) = -Σ_m J_m cos(k·m)`.
    pub fn dispersion_energy(&self, k: WaveVector) -> f64 {
        -self.iter().map(|(m, j)| j * m.phase(k).cos()).sum::<f64>()
    }

    /// `∇E(k) = Σ_m m J_m sin(k·m)`.
    pub fn group_velocity(&self, k: WaveVector) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (m, j) in self.iter() {
            let s = j * m.phase(k).sin();
            v[0] += f64::from(m.m1) * s;
            v[1] += f64::from(m.m2) * s;
        }
        v
    }

    /// Plain-text `m1 m2 J` table, preceded by `# ` comment lines.
    pub fn to_table(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "# m1 m2 J");
        for (m, j) in self.iter() {
            let _ = writeln!(out, "{} {} {j:e}", m.m1, m.m2);
        }
        out
    }

    /// Parse an `m1 m2 J` table. Blank lines and `#` comments are skipped. Symmetry is not
    /// enforced here.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected `m1 m2 J`, got {line:?}")));
            }
            let m1: i32 = fields[0]
                .parse()
                .map_err(|e| parse_err(format!("m1: {e}")))?;
            let m2: i32 = fields[1]
                .parse()
                .map_err(|e| parse_err(format!("m2: {e}")))?;
            let j: f64 = fields[2]
                .parse()
                .map_err(|e| parse_err(format!("J: {e}")))?;
            if m1 == 0 && m2 == 0 {
                return Err(parse_err("offset (0,0) is not a hopping".into()));
            }
            entries.push((Offset::new(m1, m2), j));
        }
        HoppingSet::from_raw(entries)
    }
}

/// Group of symmetry-equivalent offsets expected to share one hopping value.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub offsets: Vec<Offset>,
}

impl Shell {
    fn from_pm(reps: &[(i32, i32)]) -> Self {
        let offsets = reps
            .iter()
            .flat_map(|&r| {
                let m = Offset::from(r);
                [m, -m]
            })
            .collect();
        Shell { offsets }
    }
}

/// First three distance shells of the triangular lattice when the primitive vectors are
/// 120° apart, so that `(1,1)` is a nearest neighbour.
pub fn triangular_shells() -> [Shell; 3] {
    [
        Shell::from_pm(&[(1, 0), (0, 1), (1, 1)]),
        Shell::from_pm(&[(2, 1), (1, 2), (-1, 1)]),
        Shell::from_pm(&[(2, 0), (0, 2), (2, 2)]),
    ]
}

/// Published three-shell hoppings of the triangular lattice at `V0 = -1.5 E_r`.
pub const QUOTED_TRIANGULAR_HOPPINGS: [f64; 3] = [0.0765, -0.0149, -0.0078];

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryViolation {
    pub offset: Offset,
    pub value: f64,
    /// `None` when `-m` is missing altogether.
    pub partner: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShellSpread {
    pub shell: usize,
    pub min: f64,
    pub max: f64,
    pub missing: Vec<Offset>,
}

impl ShellSpread {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HoppingReport {
    pub tolerance: f64,
    pub symmetry_violations: Vec<SymmetryViolation>,
    pub shells: Vec<ShellSpread>,
}

impl HoppingReport {
    pub fn is_ok(&self) -> bool {
        self.symmetry_violations.is_empty()
            && self
                .shells
                .iter()
                .all(|s| s.missing.is_empty() && s.spread() <= self.tolerance)
    }

    pub fn max_shell_spread(&self) -> f64 {
        self.shells
            .iter()
            .map(ShellSpread::spread)
            .fold(0.0, f64::max)
    }
}

/// Check `J_m = J_{-m}` within `tol` and, when shells are given, the spread of values
/// inside each shell. Never fails; everything found goes into the report.
pub fn validate_hopping_set(set: &HoppingSet, tol: f64, shells: Option<&[Shell]>) -> HoppingReport {
    let mut report = HoppingReport {
        tolerance: tol,
        ..Default::default()
    };
    for (m, j) in set.iter() {
        match set.get(-m) {
            Some(p) if (p - j).abs() <= tol => {}
            partner => report.symmetry_violations.push(SymmetryViolation {
                offset: m,
                value: j,
                partner,
            }),
        }
    }
    for (index, shell) in shells.unwrap_or(&[]).iter().enumerate() {
        let mut spread = ShellSpread {
            shell: index,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            missing: Vec::new(),
        };
        for &m in &shell.offsets {
            match set.get(m) {
                Some(j) => {
                    spread.min = spread.min.min(j);
                    spread.max = spread.max.max(j);
                }
                None => spread.missing.push(m),
            }
        }
        if spread.min > spread.max {
            spread.min = 0.0;
            spread.max = 0.0;
        }
        report.shells.push(spread);
    }
    report
}

/// Static force `F = (F1, F2)`, optionally with a declared commensurate direction `(q, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSpec {
    pub f1: f64,
    pub f2: f64,
    direction: Option<(i64, i64)>,
}

/// Relative tolerance on `F1 r = F2 q` for a declared direction.
pub const COMMENSURATE_TOL: f64 = 1e-12;

impl ForceSpec {
    /// A force without a declared direction.
    pub fn new(f1: f64, f2: f64) -> Self {
        ForceSpec {
            f1,
            f2,
            direction: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }

    /// A force along the reciprocal lattice vector `2π(q, r)`. The sign of `(q, r)` is
    /// flipped if needed so that `F · (q, r) > 0`.
    pub fn commensurate(f1: f64, f2: f64, q: i64, r: i64) -> Result<Self> {
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::InvalidForce("non-finite component".into()));
        }
        if f1 == 0.0 && f2 == 0.0 {
            return Err(Error::InvalidForce("zero force has no Bloch period".into()));
        }
        if gcd(q, r) != 1 {
            return Err(Error::InvalidForce(format!(
                "({q}, {r}) is not a coprime pair"
            )));
        }
        let scale = f1.hypot(f2) * (q as f64).hypot(r as f64);
        let mismatch = (f1 * r as f64 - f2 * q as f64).abs();
        if mismatch > COMMENSURATE_TOL * scale {
            return Err(Error::InvalidForce(format!(
                "F = ({f1}, {f2}) is not parallel to ({q}, {r})"
            )));
        }
        let (q, r) = if f1 * q as f64 + f2 * r as f64 > 0.0 {
            (q, r)
        } else {
            (-q, -r)
        };
        Ok(ForceSpec {
            f1,
            f2,
            direction: Some((q, r)),
        })
    }

    pub fn direction(&self) -> Option<(i64, i64)> {
        self.direction
    }

    pub fn magnitude(&self) -> f64 {
        self.f1.hypot(self.f2)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ForceSpec {
            f1: self.f1 * factor,
            f2: self.f2 * factor,
            direction: self
                .direction
                .map(|(q, r)| if factor < 0.0 { (-q, -r) } else { (q, r) }),
        }
    }

    /// `F · m`.
    pub fn dot(&self, m: Offset) -> f64 {
        self.f1 * f64::from(m.m1) + self.f2 * f64::from(m.m2)
    }

    /// Whether `F · m = 0`, decided on integers when a direction is declared.
    pub fn is_perpendicular(&self, m: Offset) -> bool {
        match self.direction {
            Some((q, r)) => q * i64::from(m.m1) + r * i64::from(m.m2) == 0,
            None => self.dot(m) == 0.0,
        }
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
