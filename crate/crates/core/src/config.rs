//! Run configuration: a line-based `[section]` / `key = value` format.
//!
//! ```text
//! # comments run to the end of the line
//! [system]
//! geometry = H
//! n = 7
//! spacing_angstrom = 5.0
//!
//! [cavity]
//! lambda_au = 0.005
//! ```
//!
//! Keys are case-sensitive. Unknown sections or keys, duplicates, malformed
//! values and values that break a domain invariant are rejected with the
//! offending line number. Lists are comma separated; integer and spacing
//! lists may also be written as inclusive ranges `a..b` or `a..b:step`.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::analysis::{LambdaRule, Resonance, ScanSpec, DEFAULT_WIDTH_EV};
use crate::disorder::{DisorderSpec, DEFAULT_SIGMA_EV};
use crate::geometry::Vec3;
use crate::model::{
    AggregateSpec, Arrangement, CavitySpec, ModelKind, DEFAULT_DIPOLE_AU, DEFAULT_OMEGA_BULK_EV,
    DEFAULT_OMEGA_IMPURITY_EV,
};
use crate::units::ev_to_hartree;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpurityPlacement {
    None,
    Center,
    Site(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub geometry: Arrangement,
    pub model: ModelKind,
    pub n: usize,
    pub spacing_angstrom: f64,
    pub omega_bulk_ev: f64,
    pub omega_impurity_ev: f64,
    pub dipole_au: f64,
    pub impurity_dipole_au: Option<f64>,
    pub dielectric: f64,
    pub impurity_index: ImpurityPlacement,
    pub n_rep: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResonanceConfig {
    OmegaEv(f64),
    Bulk,
    Impurity,
    E2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityConfig {
    pub resonance: ResonanceConfig,
    pub lambda_au: f64,
    pub lambda_rule: LambdaRule,
    pub polarization: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderConfig {
    pub sigma_ev: f64,
    pub angle_max: f64,
    pub seed: u64,
    pub samples: usize,
    /// `None` protects the impurity and its neighbors.
    pub protected: Option<BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub n_values: Vec<usize>,
    pub d_values_angstrom: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    pub width_ev: f64,
    pub step_ev: f64,
    pub margin_ev: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { width_ev: DEFAULT_WIDTH_EV, step_ev: 5e-4, margin_ev: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub cavity: CavityConfig,
    pub disorder: Option<DisorderConfig>,
    pub scan: Option<ScanConfig>,
    pub spectrum: Option<SpectrumConfig>,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn aggregate(&self) -> AggregateSpec {
        let s = &self.system;
        AggregateSpec {
            n_emitters: s.n,
            spacing: s.spacing_angstrom,
            arrangement: s.geometry,
            impurity_index: match s.impurity_index {
                ImpurityPlacement::None => None,
                ImpurityPlacement::Center => Some(AggregateSpec::center(s.n)),
                ImpurityPlacement::Site(i) => Some(i),
            },
            omega_bulk: ev_to_hartree(s.omega_bulk_ev),
            omega_impurity: ev_to_hartree(s.omega_impurity_ev),
            dipole_magnitude: s.dipole_au,
            impurity_dipole: s.impurity_dipole_au,
            dielectric: s.dielectric,
        }
    }

    pub fn resonance(&self) -> Resonance {
        match self.cavity.resonance {
            ResonanceConfig::OmegaEv(e) => Resonance::Energy(ev_to_hartree(e)),
            ResonanceConfig::Bulk => Resonance::Bulk,
            ResonanceConfig::Impurity => Resonance::Impurity,
            ResonanceConfig::E2 => Resonance::E2,
        }
    }

    /// Scan over the configured ranges, or the single configured point.
    pub fn scan_spec(&self) -> ScanSpec {
        let aggregate = self.aggregate();
        let mut spec = ScanSpec::new(aggregate, self.cavity.lambda_au, self.cavity.lambda_rule);
        spec.model = self.system.model;
        spec.polarization = self.cavity.polarization;
        spec.resonance = self.resonance();
        spec.n_rep = self.system.n_rep;
        if let Some(scan) = &self.scan {
            spec.n_values = scan.n_values.clone();
            spec.d_values = scan.d_values_angstrom.clone();
        }
        spec
    }

    /// Cavity for the configured system, with the λ rule applied.
    pub fn cavity_spec(&self) -> Result<CavitySpec> {
        self.scan_spec().cavity_for(&self.aggregate())
    }

    pub fn disorder_spec(&self) -> Option<DisorderSpec> {
        self.disorder.as_ref().map(|d| DisorderSpec {
            sigma_energy: ev_to_hartree(d.sigma_ev),
            angle_max: d.angle_max,
            protected_indices: d.protected.clone(),
            seed: d.seed,
            n_samples: d.samples,
        })
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn raw(&mut self, key: &str) -> Option<Entry> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        Some(self.entries.remove(i))
    }

    fn get<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<(T, usize)>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(|v| Some((v, e.line)))
                .map_err(|m| err(e.line, format!("{}.{key}: {m}", self.name))),
        }
    }

    fn value<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        Ok(self.get(key, parse)?.map(|(v, _)| v))
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        let line = self.line;
        let name = self.name.clone();
        self.value(key, parse)?.ok_or_else(|| err(line, format!("[{name}] is missing `{key}`")))
    }

    fn finish(self) -> Result<()> {
        match self.entries.first() {
            Some(e) => Err(err(e.line, format!("unknown key `{}` in [{}]", e.key, self.name))),
            None => Ok(()),
        }
    }
}

fn number<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("`{s}` is not a valid number"))
}

fn float(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = number(s)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn checked<T: Copy>(
    parse: impl Fn(&str) -> std::result::Result<T, String>,
    ok: impl Fn(T) -> bool,
    rule: &'static str,
) -> impl Fn(&str) -> std::result::Result<T, String> {
    move |s| {
        let v = parse(s)?;
        if ok(v) {
            Ok(v)
        } else {
            Err(format!("`{s}` violates {rule}"))
        }
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    checked(float, |x| x > 0.0, "value > 0")(s)
}

fn usize_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, step)) => (b, number::<usize>(step.trim())?),
            None => (rest, 1),
        };
        let (a, b) = (number::<usize>(a.trim())?, number::<usize>(b.trim())?);
        if step == 0 || b < a {
            return Err(format!("empty or invalid range `{s}`"));
        }
        return Ok((a..=b).step_by(step).collect());
    }
    let v: Vec<usize> = s.split(',').map(|x| number(x.trim())).collect::<std::result::Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

fn float_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = rest
            .split_once(':')
            .ok_or_else(|| format!("range `{s}` needs a step, `a..b:step`"))?;
        let (a, b, step) = (float(a.trim())?, float(b.trim())?, float(step.trim())?);
        if !(step > 0.0) || b < a {
            return Err(format!("empty or invalid range `{s}`"));
        }
        let count = ((b - a) / step * (1.0 + 1e-12)).floor() as usize + 1;
        return Ok((0..count).map(|i| a + step * i as f64).collect());
    }
    s.split(',').map(|x| float(x.trim())).collect()
}

fn geometry(s: &str) -> std::result::Result<Arrangement, String> {
    match s {
        "H" => Ok(Arrangement::HAggregate),
        "J" => Ok(Arrangement::JAggregate),
        _ => Err(format!("geometry must be H or J, got `{s}`")),
    }
}

fn polarization(s: &str) -> std::result::Result<Vec3, String> {
    let v = match s {
        "x" => Vec3::X,
        "y" => Vec3::Y,
        "z" => Vec3::Z,
        _ => {
            let c = float_list(s)?;
            if c.len() != 3 {
                return Err(format!("polarization needs x, y, z or three components, got `{s}`"));
            }
            Vec3::new(c[0], c[1], c[2])
        }
    };
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(format!("polarization `{s}` is not a unit vector"));
    }
    Ok(v)
}

fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
            let name = name.trim();
            if !["system", "cavity", "disorder", "scan", "spectrum", "output"].contains(&name) {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(err(line, format!("duplicate section [{name}]")));
            }
            sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(err(line, "empty key"));
        }
        let section = sections.last_mut().ok_or_else(|| err(line, "key outside of any section"))?;
        if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
            return Err(err(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        section.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
    }
    Ok(sections)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut by_name: HashMap<String, Section> =
        parse_sections(text)?.into_iter().map(|s| (s.name.clone(), s)).collect();

    let mut sys = by_name.remove("system").ok_or_else(|| err(1, "missing [system] section"))?;
    let system_line = sys.line;
    let model = sys
        .value("model", |s| ModelKind::from_name(s).ok_or_else(|| format!("unknown model `{s}`")))?
        .unwrap_or_default();
    let n = sys.required("n", checked(number::<usize>, |n| n >= 1, "n >= 1"))?;
    let impurity = sys.get("impurity_index", |s| match s {
        "none" => Ok(ImpurityPlacement::None),
        "center" => Ok(ImpurityPlacement::Center),
        _ => checked(number::<usize>, |i| i >= 1, "impurity_index >= 1")(s).map(ImpurityPlacement::Site),
    })?;
    if let Some((ImpurityPlacement::Site(i), line)) = impurity {
        if i > n {
            return Err(err(line, format!("impurity_index {i} exceeds n = {n}")));
        }
    }
    let system = SystemConfig {
        geometry: sys.value("geometry", geometry)?.unwrap_or(Arrangement::HAggregate),
        model,
        n,
        spacing_angstrom: sys.required("spacing_angstrom", checked(float, |x| x > 0.0, "spacing_angstrom > 0"))?,
        omega_bulk_ev: sys.value("omega_bulk_ev", positive)?.unwrap_or(DEFAULT_OMEGA_BULK_EV),
        omega_impurity_ev: sys.value("omega_impurity_ev", positive)?.unwrap_or(DEFAULT_OMEGA_IMPURITY_EV),
        dipole_au: sys.value("dipole_au", float)?.unwrap_or(DEFAULT_DIPOLE_AU),
        impurity_dipole_au: sys.value("impurity_dipole_au", float)?,
        dielectric: sys.value("dielectric", checked(float, |x| x >= 1.0, "dielectric >= 1"))?.unwrap_or(1.0),
        impurity_index: impurity.map_or(ImpurityPlacement::Center, |(p, _)| p),
        n_rep: sys.value("n_rep", checked(number::<usize>, |n| n >= 1, "n_rep >= 1"))?.unwrap_or(1),
    };
    sys.finish()?;
    if system.n_rep > 1 && system.model != ModelKind::TcKasha {
        return Err(err(system_line, "n_rep > 1 needs model = tc_kasha"));
    }
    if system.model == ModelKind::TcImpurity && system.impurity_index == ImpurityPlacement::None {
        return Err(err(system_line, "model tc_impurity needs an impurity"));
    }

    let mut cav = by_name.remove("cavity").ok_or_else(|| err(1, "missing [cavity] section"))?;
    let omega = cav.get("omega_ph_ev", positive)?;
    let resonance = cav.get("resonance", |s| match s {
        "bulk" => Ok(ResonanceConfig::Bulk),
        "impurity" => Ok(ResonanceConfig::Impurity),
        "E2" => Ok(ResonanceConfig::E2),
        _ => Err(format!("resonance must be bulk, impurity or E2, got `{s}`")),
    })?;
    let resonance = match (omega, resonance) {
        (Some(_), Some((_, line))) => {
            return Err(err(line, "set either omega_ph_ev or resonance, not both"))
        }
        (Some((e, _)), None) => ResonanceConfig::OmegaEv(e),
        (None, Some((r, _))) => r,
        (None, None) => ResonanceConfig::Bulk,
    };
    let cavity = CavityConfig {
        resonance,
        lambda_au: cav.required("lambda_au", float)?,
        lambda_rule: cav
            .value("lambda_rule", |s| LambdaRule::from_name(s).ok_or_else(|| format!("unknown lambda_rule `{s}`")))?
            .unwrap_or_default(),
        polarization: cav.value("polarization", polarization)?.unwrap_or(Vec3::X),
    };
    cav.finish()?;

    let disorder = match by_name.remove("disorder") {
        None => None,
        Some(mut d) => {
            let protected = d.get("protected", |s| match s {
                "default" => Ok(None),
                "none" => Ok(Some(BTreeSet::new())),
                _ => usize_list(s).map(|v| Some(v.into_iter().collect::<BTreeSet<_>>())),
            })?;
            if let Some((Some(set), line)) = &protected {
                if set.iter().any(|&i| i == 0 || i > n) {
                    return Err(err(*line, format!("protected sites must lie in 1..={n}")));
                }
            }
            let cfg = DisorderConfig {
                sigma_ev: d.value("sigma_ev", checked(float, |x| x >= 0.0, "sigma_ev >= 0"))?.unwrap_or(DEFAULT_SIGMA_EV),
                angle_max: d
                    .value("angle_max", checked(float, |x| (0.0..=FRAC_PI_2).contains(&x), "0 <= angle_max <= pi/2"))?
                    .unwrap_or(FRAC_PI_2),
                seed: d.value("seed", number::<u64>)?.unwrap_or(0),
                samples: d.value("samples", checked(number::<usize>, |n| n >= 1, "samples >= 1"))?.unwrap_or(1),
                protected: protected.and_then(|(p, _)| p),
            };
            d.finish()?;
            Some(cfg)
        }
    };

    let scan = match by_name.remove("scan") {
        None => None,
        Some(mut s) => {
            let n_values = s
                .value("n_range", checked_list(usize_list, |&n| n >= 1, "n >= 1"))?
                .unwrap_or_else(|| vec![n]);
            let d_values_angstrom = s
                .value("d_range_angstrom", checked_list(float_list, |&d| d > 0.0, "spacing > 0"))?
                .unwrap_or_else(|| vec![system.spacing_angstrom]);
            s.finish()?;
            Some(ScanConfig { n_values, d_values_angstrom })
        }
    };

    let spectrum = match by_name.remove("spectrum") {
        None => None,
        Some(mut s) => {
            let def = SpectrumConfig::default();
            let cfg = SpectrumConfig {
                width_ev: s.value("width_ev", positive)?.unwrap_or(def.width_ev),
                step_ev: s.value("step_ev", positive)?.unwrap_or(def.step_ev),
                margin_ev: s.value("margin_ev", checked(float, |x| x >= 0.0, "margin_ev >= 0"))?.unwrap_or(def.margin_ev),
            };
            s.finish()?;
            Some(cfg)
        }
    };

    let output = match by_name.remove("output") {
        None => OutputConfig { directory: PathBuf::from("."), formats: vec!["csv".into()] },
        Some(mut o) => {
            let cfg = OutputConfig {
                directory: o.value("directory", |s| Ok(PathBuf::from(s)))?.unwrap_or_else(|| PathBuf::from(".")),
                formats: o
                    .value("formats", |s| {
                        let v: Vec<String> = s.split(',').map(|x| x.trim().to_string()).collect();
                        match v.iter().find(|f| f.as_str() != "csv") {
                            Some(f) => Err(format!("unsupported format `{f}`")),
                            None => Ok(v),
                        }
                    })?
                    .unwrap_or_else(|| vec!["csv".into()]),
            };
            o.finish()?;
            cfg
        }
    };

    Ok(RunConfig { system, cavity, disorder, scan, spectrum, output })
}

fn checked_list<T>(
    parse: impl Fn(&str) -> std::result::Result<Vec<T>, String>,
    ok: impl Fn(&T) -> bool,
    rule: &'static str,
) -> impl Fn(&str) -> std::result::Result<Vec<T>, String> {
    move |s| {
        let v = parse(s)?;
        if v.iter().all(&ok) {
            Ok(v)
        } else {
            Err(format!("`{s}` violates {rule}"))
        }
    }
}

fn list<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Writes every field explicitly; `parse_config` reads it back unchanged.
pub fn serialize_config(c: &RunConfig) -> String {
    let mut out = String::new();
    let s = &c.system;
    let w = &mut out;
    let _ = writeln!(w, "[system]");
    let geometry = match s.geometry {
        Arrangement::HAggregate => "H",
        Arrangement::JAggregate => "J",
    };
    let _ = writeln!(w, "geometry = {geometry}");
    let _ = writeln!(w, "model = {}", s.model.name());
    let _ = writeln!(w, "n = {}", s.n);
    let _ = writeln!(w, "spacing_angstrom = {:?}", s.spacing_angstrom);
    let _ = writeln!(w, "omega_bulk_ev = {:?}", s.omega_bulk_ev);
    let _ = writeln!(w, "omega_impurity_ev = {:?}", s.omega_impurity_ev);
    let _ = writeln!(w, "dipole_au = {:?}", s.dipole_au);
    if let Some(d) = s.impurity_dipole_au {
        let _ = writeln!(w, "impurity_dipole_au = {d:?}");
    }
    let _ = writeln!(w, "dielectric = {:?}", s.dielectric);
    let placement = match s.impurity_index {
        ImpurityPlacement::None => "none".to_string(),
        ImpurityPlacement::Center => "center".to_string(),
        ImpurityPlacement::Site(i) => i.to_string(),
    };
    let _ = writeln!(w, "impurity_index = {placement}");
    let _ = writeln!(w, "n_rep = {}", s.n_rep);

    let cav = &c.cavity;
    let _ = writeln!(w, "\n[cavity]");
    match cav.resonance {
        ResonanceConfig::OmegaEv(e) => {
            let _ = writeln!(w, "omega_ph_ev = {e:?}");
        }
        ResonanceConfig::Bulk => {
            let _ = writeln!(w, "resonance = bulk");
        }
        ResonanceConfig::Impurity => {
            let _ = writeln!(w, "resonance = impurity");
        }
        ResonanceConfig::E2 => {
            let _ = writeln!(w, "resonance = E2");
        }
    }
    let _ = writeln!(w, "lambda_au = {:?}", cav.lambda_au);
    let _ = writeln!(w, "lambda_rule = {}", cav.lambda_rule.name());
    let _ = writeln!(w, "polarization = {}", list(&cav.polarization.0));

    if let Some(d) = &c.disorder {
        let _ = writeln!(w, "\n[disorder]");
        let _ = writeln!(w, "sigma_ev = {:?}", d.sigma_ev);
        let _ = writeln!(w, "angle_max = {:?}", d.angle_max);
        let _ = writeln!(w, "seed = {}", d.seed);
        let _ = writeln!(w, "samples = {}", d.samples);
        let protected = match &d.protected {
            None => "default".to_string(),
            Some(set) if set.is_empty() => "none".to_string(),
            Some(set) => list(&set.iter().collect::<Vec<_>>()),
        };
        let _ = writeln!(w, "protected = {protected}");
    }
    if let Some(sc) = &c.scan {
        let _ = writeln!(w, "\n[scan]");
        let _ = writeln!(w, "n_range = {}", list(&sc.n_values));
        let _ = writeln!(w, "d_range_angstrom = {}", list(&sc.d_values_angstrom));
    }
    if let Some(sp) = &c.spectrum {
        let _ = writeln!(w, "\n[spectrum]");
        let _ = writeln!(w, "width_ev = {:?}", sp.width_ev);
        let _ = writeln!(w, "step_ev = {:?}", sp.step_ev);
        let _ = writeln!(w, "margin_ev = {:?}", sp.margin_ev);
    }
    let _ = writeln!(w, "\n[output]");
    let _ = writeln!(w, "directory = {}", c.output.directory.display());
    let _ = writeln!(w, "formats = {}", c.output.formats.join(", "));
    out
}
