//! Case files (TOML) and solution files (JSON).
//!
//! A case file lists buses, branches and converters. With `units = "pu"` all
//! values are per unit on the `[base]` section; with `units = "si"` they are
//! volts, ohms, siemens, watts, vars and amperes and are converted on load:
//!
//! * AC voltages are line-to-line rms magnitudes, DC voltages pole voltages.
//! * Bus powers are per phase; converter setpoints are three-phase totals.
//! * Complex numbers are written as `[re, im]`.
//!
//! Converter powers are positive from the AC grid into the DC grid.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::converter::{LossError, LossParams, ResistanceTable};
use crate::grid::{
    AcBranch, AcBus, AcBusKind, BaseValues, BusId, CaseData, CaseError, Converter, ConverterMode, DcBranch, DcBus,
    DcBusKind, NetworkCase, PhaseMatrix, SequencePolicy,
};
use crate::solver::Solution;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("case file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("case file: {0}")]
    Case(#[from] CaseError),
    #[error("case file: {what}: {source}")]
    Losses { what: String, source: LossError },
    #[error("case file: {0}")]
    Invalid(String),
    #[error("{path}: {inner}")]
    InFile { path: String, inner: Box<IoError> },
    #[error("solution file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("could not serialise case: {0}")]
    Serialize(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Pu,
    Si,
}

type C = [f64; 2];

/// Case file layout understood by this version.
pub const SCHEMA_VERSION: u32 = 1;

fn current_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPhase {
    Same(f64),
    Each([f64; 3]),
}

impl PerPhase {
    fn values(&self) -> [f64; 3] {
        match self {
            PerPhase::Same(v) => [*v; 3],
            PerPhase::Each(v) => *v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    #[serde(default = "current_schema")]
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub base: Option<BaseValues>,
    #[serde(default, rename = "ac_bus")]
    pub ac_buses: Vec<AcBusRecord>,
    #[serde(default, rename = "dc_bus")]
    pub dc_buses: Vec<DcBusRecord>,
    #[serde(default, rename = "ac_branch")]
    pub ac_branches: Vec<AcBranchRecord>,
    #[serde(default, rename = "dc_branch")]
    pub dc_branches: Vec<DcBranchRecord>,
    #[serde(default, rename = "converter")]
    pub converters: Vec<ConverterRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum AcBusRecord {
    Slack {
        id: BusId,
        v: f64,
        #[serde(default)]
        angle_deg: f64,
    },
    Pq {
        id: BusId,
        p: PerPhase,
        q: PerPhase,
    },
    Pv {
        id: BusId,
        p: PerPhase,
        v: f64,
    },
    Converter {
        id: BusId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DcBusRecord {
    P { id: BusId, p: f64 },
    V { id: BusId, v: f64 },
    Converter { id: BusId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcBranchRecord {
    pub from: BusId,
    pub to: BusId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<C>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_mutual: Option<C>,
    /// Full 3×3 series impedance, row by row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_abc: Option<[[C; 3]; 3]>,
    /// Total shunt admittance per phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_shunt: Option<C>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_shunt_abc: Option<[[C; 3]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcBranchRecord {
    pub from: BusId,
    pub to: BusId,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    EdcQac,
    PacQac,
    PacVac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResistanceRecord {
    Constant(f64),
    /// `[current, resistance]` breakpoints.
    Table(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossRecord {
    pub r_eq: ResistanceRecord,
    pub t_on: f64,
    pub t_off: f64,
    pub t_rec: f64,
    pub t_s: f64,
    /// Switching to line frequency ratio; defaults to `1 / (t_s · f_line)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterRecord {
    pub id: BusId,
    pub ac_bus: BusId,
    pub dc_bus: BusId,
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_dc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_neg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_neg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ac: Option<f64>,
    #[serde(default)]
    pub sequence: SequencePolicy,
    #[serde(default)]
    pub z_filter: C,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses: Option<LossRecord>,
}

impl ConverterRecord {
    fn control_mode(&self, s: &Scale) -> Result<ConverterMode, IoError> {
        let fields = [
            ("e_dc", self.e_dc),
            ("p", self.p),
            ("q", self.q),
            ("p_neg", self.p_neg),
            ("q_neg", self.q_neg),
            ("v_ac", self.v_ac),
        ];
        let (required, optional): (&[&str], &[&str]) = match self.mode {
            ModeName::EdcQac => (&["e_dc", "q"], &[]),
            ModeName::PacQac => (&["p", "q"], &["p_neg", "q_neg"]),
            ModeName::PacVac => (&["p", "v_ac"], &[]),
        };
        for (name, value) in fields {
            let allowed = required.contains(&name) || optional.contains(&name);
            match (allowed, value) {
                (true, None) if required.contains(&name) => {
                    return Err(IoError::Invalid(format!("converter {}: mode {:?} needs `{name}`", self.id, self.mode)))
                }
                (false, Some(_)) => {
                    return Err(IoError::Invalid(format!(
                        "converter {}: `{name}` is not a setpoint of mode {:?}",
                        self.id, self.mode
                    )))
                }
                _ => {}
            }
        }
        let get = |v: Option<f64>| v.unwrap_or(0.0);
        Ok(match self.mode {
            ModeName::EdcQac => ConverterMode::EdcQac { e_dc: get(self.e_dc) * s.v_dc, q_ac: get(self.q) * s.power },
            ModeName::PacQac => ConverterMode::PacQac {
                p_pos: get(self.p) * s.power,
                q_pos: get(self.q) * s.power,
                p_neg: get(self.p_neg) * s.power,
                q_neg: get(self.q_neg) * s.power,
            },
            ModeName::PacVac => ConverterMode::PacVac { p_pos: get(self.p) * s.power, v_ac: get(self.v_ac) * s.v_ac },
        })
    }
}

fn cx(v: C) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn matrix(m: &[[C; 3]; 3]) -> PhaseMatrix {
    PhaseMatrix::from_fn(|r, c| cx(m[r][c]))
}

/// Unit conversion factors into per unit.
struct Scale {
    power: f64,
    v_ac: f64,
    v_dc: f64,
    z_ac: f64,
    z_dc: f64,
    i_ac: f64,
}

impl Scale {
    fn new(units: Units, base: &BaseValues) -> Self {
        match units {
            Units::Pu => Self { power: 1.0, v_ac: 1.0, v_dc: 1.0, z_ac: 1.0, z_dc: 1.0, i_ac: 1.0 },
            Units::Si => Self {
                power: 1.0 / base.s_base,
                v_ac: 1.0 / base.v_base_ac,
                v_dc: 1.0 / base.v_base_dc,
                z_ac: 1.0 / base.z_base_ac(),
                z_dc: 1.0 / base.z_base_dc(),
                i_ac: base.v_phase_ac() / base.s_base,
            },
        }
    }
}

impl CaseFile {
    pub fn into_case(self) -> Result<NetworkCase, IoError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(IoError::Invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let base = self.base.unwrap_or_default();
        for (name, v) in [("s_base", base.s_base), ("v_base_ac", base.v_base_ac), ("v_base_dc", base.v_base_dc), ("f_line", base.f_line)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(IoError::Invalid(format!("base value {name} must be positive, got {v}")));
            }
        }
        let s = Scale::new(self.units, &base);
        let scale3 = |v: &PerPhase, k: f64| v.values().map(|x| x * k);

        let ac_buses = self
            .ac_buses
            .iter()
            .map(|b| match b {
                AcBusRecord::Slack { id, v, angle_deg } => AcBus {
                    id: *id,
                    kind: AcBusKind::Slack { v_mag: v * s.v_ac, angle: angle_deg.to_radians() },
                },
                AcBusRecord::Pq { id, p, q } => AcBus {
                    id: *id,
                    kind: AcBusKind::Pq { p: scale3(p, s.power), q: scale3(q, s.power) },
                },
                AcBusRecord::Pv { id, p, v } => AcBus {
                    id: *id,
                    kind: AcBusKind::Pv { p: scale3(p, s.power), v_mag: v * s.v_ac },
                },
                AcBusRecord::Converter { id } => AcBus { id: *id, kind: AcBusKind::ConverterAc },
            })
            .collect();
        let dc_buses = self
            .dc_buses
            .iter()
            .map(|b| match b {
                DcBusRecord::P { id, p } => DcBus { id: *id, kind: DcBusKind::P { p: p * s.power } },
                DcBusRecord::V { id, v } => DcBus { id: *id, kind: DcBusKind::V { v: v * s.v_dc } },
                DcBusRecord::Converter { id } => DcBus { id: *id, kind: DcBusKind::ConverterDc },
            })
            .collect();

        let mut ac_branches = Vec::with_capacity(self.ac_branches.len());
        for b in &self.ac_branches {
            let what = format!("AC branch {}-{}", b.from, b.to);
            let series = match (&b.z, &b.z_mutual, &b.z_abc) {
                (Some(z), None, None) => PhaseMatrix::from_diagonal_element(cx(*z)),
                (Some(z), Some(zm), None) => {
                    let mut m = PhaseMatrix::from_element(cx(*zm));
                    m.fill_diagonal(cx(*z));
                    m
                }
                (None, None, Some(m)) => matrix(m),
                _ => return Err(IoError::Invalid(format!("{what}: give either z (with optional z_mutual) or z_abc"))),
            };
            let shunt = match (&b.y_shunt, &b.y_shunt_abc) {
                (None, None) => PhaseMatrix::zeros(),
                (Some(y), None) => PhaseMatrix::from_diagonal_element(cx(*y)),
                (None, Some(m)) => matrix(m),
                _ => return Err(IoError::Invalid(format!("{what}: give either y_shunt or y_shunt_abc"))),
            };
            ac_branches.push(AcBranch {
                from: b.from,
                to: b.to,
                series: series * Complex64::new(s.z_ac, 0.0),
                shunt: shunt / Complex64::new(s.z_ac, 0.0),
            });
        }
        let dc_branches = self
            .dc_branches
            .iter()
            .map(|b| DcBranch { from: b.from, to: b.to, resistance: b.r * s.z_dc })
            .collect();

        let mut converters = Vec::with_capacity(self.converters.len());
        for c in &self.converters {
            let what = format!("converter {}", c.id);
            let mode = c.control_mode(&s)?;
            let losses = match &c.losses {
                None => LossParams::lossless(),
                Some(l) => {
                    let table = match &l.r_eq {
                        ResistanceRecord::Constant(r) => ResistanceTable::new(vec![(0.0, r * s.z_ac)]),
                        ResistanceRecord::Table(points) => {
                            ResistanceTable::new(points.iter().map(|p| (p[0] * s.i_ac, p[1] * s.z_ac)).collect())
                        }
                    }
                    .map_err(|source| IoError::Losses { what: what.clone(), source })?;
                    let n = l.n.unwrap_or(1.0 / (l.t_s * base.f_line));
                    LossParams::new(table, l.t_on, l.t_off, l.t_rec, l.t_s, n)
                        .map_err(|source| IoError::Losses { what: what.clone(), source })?
                }
            };
            converters.push(Converter {
                id: c.id,
                ac_bus: c.ac_bus,
                dc_bus: c.dc_bus,
                mode,
                sequence: c.sequence,
                losses,
                z_filter: cx(c.z_filter) * s.z_ac,
            });
        }

        Ok(NetworkCase::new(CaseData {
            name: self.name,
            base,
            ac_buses,
            dc_buses,
            ac_branches,
            dc_branches,
            converters,
        })?)
    }

    /// Per-unit file description of `case`.
    pub fn from_case(case: &CaseData) -> Self {
        let c = |z: Complex64| [z.re, z.im];
        let m = |x: &PhaseMatrix| -> [[C; 3]; 3] { std::array::from_fn(|r| std::array::from_fn(|k| c(x[(r, k)]))) };
        let per_phase = |v: [f64; 3]| if v[0] == v[1] && v[1] == v[2] { PerPhase::Same(v[0]) } else { PerPhase::Each(v) };
        Self {
            schema_version: SCHEMA_VERSION,
            name: case.name.clone(),
            units: Units::Pu,
            base: Some(case.base),
            ac_buses: case
                .ac_buses
                .iter()
                .map(|b| match &b.kind {
                    AcBusKind::Slack { v_mag, angle } => AcBusRecord::Slack { id: b.id, v: *v_mag, angle_deg: angle.to_degrees() },
                    AcBusKind::Pq { p, q } => AcBusRecord::Pq { id: b.id, p: per_phase(*p), q: per_phase(*q) },
                    AcBusKind::Pv { p, v_mag } => AcBusRecord::Pv { id: b.id, p: per_phase(*p), v: *v_mag },
                    AcBusKind::ConverterAc => AcBusRecord::Converter { id: b.id },
                })
                .collect(),
            dc_buses: case
                .dc_buses
                .iter()
                .map(|b| match b.kind {
                    DcBusKind::P { p } => DcBusRecord::P { id: b.id, p },
                    DcBusKind::V { v } => DcBusRecord::V { id: b.id, v },
                    DcBusKind::ConverterDc => DcBusRecord::Converter { id: b.id },
                })
                .collect(),
            ac_branches: case
                .ac_branches
                .iter()
                .map(|b| AcBranchRecord {
                    from: b.from,
                    to: b.to,
                    z: None,
                    z_mutual: None,
                    z_abc: Some(m(&b.series)),
                    y_shunt: None,
                    y_shunt_abc: if b.shunt.iter().all(|z| *z == Complex64::default()) { None } else { Some(m(&b.shunt)) },
                })
                .collect(),
            dc_branches: case
                .dc_branches
                .iter()
                .map(|b| DcBranchRecord { from: b.from, to: b.to, r: b.resistance })
                .collect(),
            converters: case
                .converters
                .iter()
                .map(|k| ConverterRecord {
                    id: k.id,
                    ac_bus: k.ac_bus,
                    dc_bus: k.dc_bus,
                    mode: match k.mode {
                        ConverterMode::EdcQac { .. } => ModeName::EdcQac,
                        ConverterMode::PacQac { .. } => ModeName::PacQac,
                        ConverterMode::PacVac { .. } => ModeName::PacVac,
                    },
                    e_dc: match k.mode {
                        ConverterMode::EdcQac { e_dc, .. } => Some(e_dc),
                        _ => None,
                    },
                    p: match k.mode {
                        ConverterMode::PacQac { p_pos, .. } | ConverterMode::PacVac { p_pos, .. } => Some(p_pos),
                        _ => None,
                    },
                    q: match k.mode {
                        ConverterMode::EdcQac { q_ac, .. } => Some(q_ac),
                        ConverterMode::PacQac { q_pos, .. } => Some(q_pos),
                        _ => None,
                    },
                    p_neg: match k.mode {
                        ConverterMode::PacQac { p_neg, .. } if p_neg != 0.0 => Some(p_neg),
                        _ => None,
                    },
                    q_neg: match k.mode {
                        ConverterMode::PacQac { q_neg, .. } if q_neg != 0.0 => Some(q_neg),
                        _ => None,
                    },
                    v_ac: match k.mode {
                        ConverterMode::PacVac { v_ac, .. } => Some(v_ac),
                        _ => None,
                    },
                    sequence: k.sequence,
                    z_filter: c(k.z_filter),
                    losses: Some(LossRecord {
                        r_eq: ResistanceRecord::Table(k.losses.r_eq().points().iter().map(|p| [p.0, p.1]).collect()),
                        t_on: k.losses.t_on(),
                        t_off: k.losses.t_off(),
                        t_rec: k.losses.t_rec(),
                        t_s: k.losses.t_s(),
                        n: Some(k.losses.n_ratio()),
                    }),
                })
                .collect(),
        }
    }
}

pub fn parse_case(text: &str) -> Result<NetworkCase, IoError> {
    let file: CaseFile = toml::from_str(text)?;
    file.into_case()
}

pub fn load_case(path: impl AsRef<Path>) -> Result<NetworkCase, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    parse_case(&text).map_err(|e| IoError::InFile { path: path.display().to_string(), inner: Box::new(e) })
}

pub fn case_to_toml(case: &CaseData) -> Result<String, IoError> {
    Ok(toml::to_string(&CaseFile::from_case(case))?)
}

pub fn save_case(case: &CaseData, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, case_to_toml(case)?).map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

pub fn solution_to_json(solution: &Solution) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(solution)?)
}

pub fn parse_solution(text: &str) -> Result<Solution, IoError> {
    Ok(serde_json::from_str(text)?)
}

pub fn save_solution(solution: &Solution, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, solution_to_json(solution)?).map_err(|source| IoError::Read { path: path.display().to_string(), source })
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<Solution, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    parse_solution(&text)
}
