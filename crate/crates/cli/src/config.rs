//! Line-based run configuration.
//!
//! Each non-blank line is `section.key = value`; `#` starts a comment. Unknown or repeated
//! keys are rejected with their line number, and range errors name the offending field.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bloch_core::band::{DEFAULT_CUTOFF, DEFAULT_GRID};
use bloch_core::evolution::{DEFAULT_BOUNDARY_BAND, DEFAULT_BOUNDARY_TOL};
use bloch_core::lattice::{HoppingSet, WaveVector};

use crate::CliError;

pub const DEFAULT_SIDE: usize = 201;
pub const DEFAULT_SIGMA: f64 = 20.0;
pub const DEFAULT_K0: [f64; 2] = [0.05, 0.03];
pub const DEFAULT_FORCE_J1: [f64; 2] = [0.5, -0.5];
pub const DEFAULT_Q_MAX: i64 = 20;
pub const DEFAULT_T_END_J1: f64 = 200.0;
pub const DEFAULT_STRIDE_J1: f64 = 0.5;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// Keys accepted in a configuration file, with their defaults, as shown by `--help`.
pub const KEYS: &[(&str, &str)] = &[
    (
        "potential.V0",
        "lattice depth in E_r, must be <= 0 (selects the band-solver source)",
    ),
    ("potential.N_c", "plane-wave cutoff, default 7"),
    ("potential.M", "k-grid size per axis, default 32"),
    (
        "hoppings.file",
        "path to an `m1 m2 J` table (selects the table source)",
    ),
    ("hoppings.table", "inline `m1 m2 J` rows separated by `;`"),
    (
        "hoppings.shells",
        "J1 J2 J3 of the three-shell triangular model",
    ),
    ("packet.L", "odd grid side, default 201"),
    ("packet.sigma", "Gaussian width in sites, default 20"),
    ("packet.k0", "initial wave vector, default 0.05 0.03"),
    (
        "force.F",
        "force in units of J1; several cases separated by `;`, default 0.5 -0.5",
    ),
    (
        "force.qr",
        "integer direction per force case, separated by `;`",
    ),
    (
        "force.q_max",
        "largest denominator when rationalizing a force, default 20",
    ),
    (
        "evolution.dt",
        "time step in 1/E_r, default 0.2 over the spectral bound",
    ),
    ("evolution.t_end", "duration in units of 1/J1, default 200"),
    (
        "evolution.stride",
        "sampling interval in units of 1/J1, default 0.5",
    ),
    (
        "evolution.boundary_band",
        "width of the watched edge strip, default 2",
    ),
    (
        "evolution.boundary_tol",
        "largest tolerated edge probability, default 1e-4",
    ),
    ("output.dir", "output directory, default `out`"),
    ("output.plot", "write SVG plots, default true"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Potential {
        v0: f64,
        cutoff: usize,
        grid: usize,
    },
    Table {
        hoppings: HoppingSet,
        origin: TableOrigin,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableOrigin {
    File(PathBuf),
    Inline,
    Shells([f64; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketConfig {
    pub side: usize,
    pub sigma: f64,
    pub k0: WaveVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceCase {
    /// Force in units of J1.
    pub f_j1: [f64; 2],
    pub qr: Option<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSettings {
    pub dt: Option<f64>,
    pub t_end_j1: f64,
    pub stride_j1: f64,
    pub boundary_band: usize,
    pub boundary_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: ModelSource,
    pub packet: PacketConfig,
    pub forces: Vec<ForceCase>,
    pub q_max: i64,
    pub evolution: EvolutionSettings,
    pub output: OutputConfig,
}

struct Entry {
    line: usize,
    value: String,
}

fn config_err(line: Option<usize>, message: impl Into<String>) -> CliError {
    let message = message.into();
    CliError::Config(match line {
        Some(l) => format!("line {l}: {message}"),
        None => message,
    })
}

fn range_err(key: &str, line: Option<usize>, message: impl std::fmt::Display) -> CliError {
    config_err(line, format!("{key}: {message}"))
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn line(&self, key: &str) -> Option<usize> {
        self.0.get(key).map(|e| e.line)
    }

    fn has_section(&self, section: &str) -> bool {
        self.0.keys().any(|k| k.split('.').next() == Some(section))
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|e| e.value.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| {
                range_err(
                    key,
                    Some(e.line),
                    format!("cannot parse {:?}: {err}", e.value),
                )
            }),
        }
    }

    fn floats(&self, key: &str, text: &str, n: usize) -> Result<Vec<f64>, CliError> {
        let values: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
        match values {
            Ok(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v),
            _ => Err(range_err(
                key,
                self.line(key),
                format!("expected {n} finite numbers, got {text:?}"),
            )),
        }
    }
}

/// Read and parse a configuration file; relative table paths resolve against its directory.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(None, format!("cannot read {}: {e}", path.display())))?;
    parse_config_with(&text, path.parent().unwrap_or(Path::new(".")), &[])
}

/// Parse configuration text, resolving relative paths against the working directory.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    parse_config_with(text, Path::new("."), &[])
}

/// Parse `text` followed by `overrides` (each `section.key=value`), which replace file values.
pub fn parse_config_with(
    text: &str,
    base: &Path,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = split_line(line).ok_or_else(|| {
            config_err(
                Some(i + 1),
                format!("expected `section.key = value`, got {line:?}"),
            )
        })?;
        check_key(&key).map_err(|m| config_err(Some(i + 1), m))?;
        if entries.contains_key(&key) {
            return Err(config_err(Some(i + 1), format!("duplicate key `{key}`")));
        }
        entries.insert(key, Entry { line: i + 1, value });
    }
    for o in overrides {
        let (key, value) = split_line(o).ok_or_else(|| {
            config_err(None, format!("override {o:?} is not `section.key=value`"))
        })?;
        check_key(&key).map_err(|m| config_err(None, format!("override: {m}")))?;
        entries.insert(key, Entry { line: 0, value });
    }
    resolve(&Entries(entries), base)
}

fn split_line(line: &str) -> Option<(String, String)> {
    let (k, v) = line.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return None;
    }
    Some((k.to_string(), v.to_string()))
}

fn check_key(key: &str) -> Result<(), String> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(format!("unknown key `{key}`"))
    }
}

fn resolve(e: &Entries, base: &Path) -> Result<RunConfig, CliError> {
    let source = match (e.has_section("potential"), e.has_section("hoppings")) {
        (true, true) => {
            return Err(config_err(
                None,
                "give exactly one model source: `potential.*` or `hoppings.*`, not both",
            ))
        }
        (false, false) => {
            return Err(config_err(
                None,
                "no model source: set `potential.V0` or one of `hoppings.file`, `hoppings.table`, `hoppings.shells`",
            ))
        }
        (true, false) => resolve_potential(e)?,
        (false, true) => resolve_table(e, base)?,
    };

    let side: usize = e.parse("packet.L")?.unwrap_or(DEFAULT_SIDE);
    if side.is_multiple_of(2) || side < 5 {
        return Err(range_err(
            "packet.L",
            e.line("packet.L"),
            format!("must be odd and >= 5, got {side}"),
        ));
    }
    let sigma: f64 = e.parse("packet.sigma")?.unwrap_or(DEFAULT_SIGMA);
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(range_err(
            "packet.sigma",
            e.line("packet.sigma"),
            format!("must be positive, got {sigma}"),
        ));
    }
    let k0 = match e.raw("packet.k0") {
        Some(t) => {
            let v = e.floats("packet.k0", t, 2)?;
            WaveVector::new(v[0], v[1])
        }
        None => WaveVector::new(DEFAULT_K0[0], DEFAULT_K0[1]),
    };

    let forces = resolve_forces(e)?;
    let q_max: i64 = e.parse("force.q_max")?.unwrap_or(DEFAULT_Q_MAX);
    if q_max < 1 {
        return Err(range_err(
            "force.q_max",
            e.line("force.q_max"),
            "must be at least 1",
        ));
    }

    let dt: Option<f64> = e.parse("evolution.dt")?;
    if let Some(dt) = dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(range_err(
                "evolution.dt",
                e.line("evolution.dt"),
                format!("must be positive, got {dt}"),
            ));
        }
    }
    let t_end_j1: f64 = e.parse("evolution.t_end")?.unwrap_or(DEFAULT_T_END_J1);
    if !(t_end_j1 > 0.0) || !t_end_j1.is_finite() {
        return Err(range_err(
            "evolution.t_end",
            e.line("evolution.t_end"),
            format!("must be positive, got {t_end_j1}"),
        ));
    }
    let stride_j1: f64 = e.parse("evolution.stride")?.unwrap_or(DEFAULT_STRIDE_J1);
    if !(stride_j1 > 0.0) || !stride_j1.is_finite() {
        return Err(range_err(
            "evolution.stride",
            e.line("evolution.stride"),
            format!("must be positive, got {stride_j1}"),
        ));
    }
    let boundary_band: usize = e
        .parse("evolution.boundary_band")?
        .unwrap_or(DEFAULT_BOUNDARY_BAND);
    if boundary_band == 0 || 2 * boundary_band >= side {
        return Err(range_err(
            "evolution.boundary_band",
            e.line("evolution.boundary_band"),
            format!("must be between 1 and (L-1)/2, got {boundary_band}"),
        ));
    }
    let boundary_tol: f64 = e
        .parse("evolution.boundary_tol")?
        .unwrap_or(DEFAULT_BOUNDARY_TOL);
    if !(0.0..=1.0).contains(&boundary_tol) {
        return Err(range_err(
            "evolution.boundary_tol",
            e.line("evolution.boundary_tol"),
            format!("must lie in [0, 1], got {boundary_tol}"),
        ));
    }

    let dir = PathBuf::from(e.raw("output.dir").unwrap_or(DEFAULT_OUTPUT_DIR));
    let plot: bool = e.parse("output.plot")?.unwrap_or(true);

    Ok(RunConfig {
        source,
        packet: PacketConfig { side, sigma, k0 },
        forces,
        q_max,
        evolution: EvolutionSettings {
            dt,
            t_end_j1,
            stride_j1,
            boundary_band,
            boundary_tol,
        },
        output: OutputConfig { dir, plot },
    })
}

fn resolve_potential(e: &Entries) -> Result<ModelSource, CliError> {
    let v0: f64 = e
        .parse("potential.V0")?
        .ok_or_else(|| config_err(None, "potential.V0: required when a potential is given"))?;
    if !(v0 <= 0.0) || !v0.is_finite() {
        return Err(range_err(
            "potential.V0",
            e.line("potential.V0"),
            format!("must be finite and <= 0 (red detuning), got {v0}"),
        ));
    }
    let cutoff: usize = e.parse("potential.N_c")?.unwrap_or(DEFAULT_CUTOFF);
    if cutoff < 3 {
        return Err(range_err(
            "potential.N_c",
            e.line("potential.N_c"),
            format!("must be >= 3, got {cutoff}"),
        ));
    }
    let grid: usize = e.parse("potential.M")?.unwrap_or(DEFAULT_GRID);
    if grid < 8 {
        return Err(range_err(
            "potential.M",
            e.line("potential.M"),
            format!("must be >= 8, got {grid}"),
        ));
    }
    Ok(ModelSource::Potential { v0, cutoff, grid })
}

fn resolve_table(e: &Entries, base: &Path) -> Result<ModelSource, CliError> {
    let given: Vec<&str> = ["hoppings.file", "hoppings.table", "hoppings.shells"]
        .into_iter()
        .filter(|k| e.raw(k).is_some())
        .collect();
    if given.len() != 1 {
        return Err(config_err(
            None,
            format!(
                "give exactly one of hoppings.file, hoppings.table, hoppings.shells (got {})",
                given.len()
            ),
        ));
    }
    let key = given[0];
    let line = e.line(key);
    let text = e.raw(key).unwrap();
    let table_err = |err: bloch_core::Error| range_err(key, line, err);
    let (hoppings, origin) = match key {
        "hoppings.file" => {
            let path = base.join(text);
            let body = std::fs::read_to_string(&path).map_err(|err| {
                range_err(key, line, format!("cannot read {}: {err}", path.display()))
            })?;
            (
                HoppingSet::parse_table(&body).map_err(table_err)?,
                TableOrigin::File(path),
            )
        }
        "hoppings.table" => {
            let body = text.replace(';', "\n");
            (
                HoppingSet::parse_table(&body).map_err(table_err)?,
                TableOrigin::Inline,
            )
        }
        _ => {
            let v = e.floats(key, text, 3)?;
            let j = [v[0], v[1], v[2]];
            (HoppingSet::triangular(j), TableOrigin::Shells(j))
        }
    };
    if hoppings.is_empty() {
        return Err(range_err(key, line, "table has no hoppings"));
    }
    Ok(ModelSource::Table { hoppings, origin })
}

fn resolve_forces(e: &Entries) -> Result<Vec<ForceCase>, CliError> {
    let f_text = e.raw("force.F");
    let qr_text = e.raw("force.qr");
    let Some(f_text) = f_text else {
        if qr_text.is_some() {
            return Err(range_err(
                "force.qr",
                e.line("force.qr"),
                "given without force.F",
            ));
        }
        return Ok(vec![ForceCase {
            f_j1: DEFAULT_FORCE_J1,
            qr: None,
        }]);
    };
    let mut cases = Vec::new();
    for part in f_text.split(';') {
        let v = e.floats("force.F", part, 2)?;
        cases.push(ForceCase {
            f_j1: [v[0], v[1]],
            qr: None,
        });
    }
    if let Some(qr_text) = qr_text {
        let parts: Vec<&str> = qr_text.split(';').collect();
        if parts.len() != cases.len() {
            return Err(range_err(
                "force.qr",
                e.line("force.qr"),
                format!("{} directions for {} force cases", parts.len(), cases.len()),
            ));
        }
        for (case, part) in cases.iter_mut().zip(parts) {
            let v: Result<Vec<i64>, _> = part.split_whitespace().map(str::parse).collect();
            match v {
                Ok(v) if v.len() == 2 => case.qr = Some((v[0], v[1])),
                _ => {
                    return Err(range_err(
                        "force.qr",
                        e.line("force.qr"),
                        format!("expected two integers, got {part:?}"),
                    ))
                }
            }
        }
    }
    Ok(cases)
}

fn pair(v: [f64; 2]) -> String {
    format!("{} {}", v[0], v[1])
}

impl RunConfig {
    /// Canonical configuration text that reproduces this run.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.source {
            ModelSource::Potential { v0, cutoff, grid } => {
                let _ = writeln!(out, "potential.V0 = {v0}");
                let _ = writeln!(out, "potential.N_c = {cutoff}");
                let _ = writeln!(out, "potential.M = {grid}");
            }
            ModelSource::Table { hoppings, .. } => {
                let rows: Vec<String> = hoppings
                    .iter()
                    .map(|(m, j)| format!("{} {} {j:e}", m.m1, m.m2))
                    .collect();
                let _ = writeln!(out, "hoppings.table = {}", rows.join("; "));
            }
        }
        let _ = writeln!(out, "packet.L = {}", self.packet.side);
        let _ = writeln!(out, "packet.sigma = {}", self.packet.sigma);
        let _ = writeln!(
            out,
            "packet.k0 = {}",
            pair([self.packet.k0.k1, self.packet.k0.k2])
        );
        let forces: Vec<String> = self.forces.iter().map(|f| pair(f.f_j1)).collect();
        let _ = writeln!(out, "force.F = {}", forces.join("; "));
        if self.forces.iter().all(|f| f.qr.is_some()) {
            let qr: Vec<String> = self
                .forces
                .iter()
                .map(|f| {
                    let (q, r) = f.qr.unwrap();
                    format!("{q} {r}")
                })
                .collect();
            let _ = writeln!(out, "force.qr = {}", qr.join("; "));
        }
        let _ = writeln!(out, "force.q_max = {}", self.q_max);
        if let Some(dt) = self.evolution.dt {
            let _ = writeln!(out, "evolution.dt = {dt}");
        }
        let _ = writeln!(out, "evolution.t_end = {}", self.evolution.t_end_j1);
        let _ = writeln!(out, "evolution.stride = {}", self.evolution.stride_j1);
        let _ = writeln!(
            out,
            "evolution.boundary_band = {}",
            self.evolution.boundary_band
        );
        let _ = writeln!(
            out,
            "evolution.boundary_tol = {}",
            self.evolution.boundary_tol
        );
        let _ = writeln!(out, "output.plot = {}", self.output.plot);
        out
    }
}
