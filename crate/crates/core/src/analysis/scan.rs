//! Coefficient scans over chain length and spacing.

use rayon::prelude::*;

use super::{classify_states, dipole_table, oscillator_strengths, PolaritonReport, ShellSites};
use crate::eig::{diagonalize, DEFAULT_TOL};
use crate::geometry::{chain_geometry, Vec3};
use crate::model::{build_kasha_exciton, AggregateSpec, CavitySpec, CouplingMode, ModelKind, ModelMatrix};
use crate::{Error, Result};

/// Bits of [`ScanRow::n_star_flag`].
pub mod flags {
    /// First `N` at which `c_A1` of the LP has changed sign.
    pub const N_STAR: u32 = 1;
    /// A coefficient below `1e-12` was met before the flip.
    pub const AMBIGUOUS: u32 = 2;
    /// The LP photon coefficient vanished and the emitter gauge was used.
    pub const FALLBACK_GAUGE: u32 = 4;
    pub const SOLVER_FAILURE: u32 = 8;
}

const ZERO_COEFFICIENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaRule {
    #[default]
    Fixed,
    /// `λ₀/√N`
    InverseSqrtN,
    /// `λ₀/√(N·N_rep)`
    InverseSqrtNtot,
    /// `λ₀/√N_rep`
    InverseSqrtNrep,
}

impl LambdaRule {
    pub fn name(self) -> &'static str {
        match self {
            LambdaRule::Fixed => "fixed",
            LambdaRule::InverseSqrtN => "inverse_sqrt_n",
            LambdaRule::InverseSqrtNtot => "inverse_sqrt_ntot",
            LambdaRule::InverseSqrtNrep => "inverse_sqrt_nrep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::Fixed, Self::InverseSqrtN, Self::InverseSqrtNtot, Self::InverseSqrtNrep]
            .into_iter()
            .find(|r| r.name() == name)
    }

    pub fn apply(self, lambda0: f64, n: usize, n_rep: usize) -> f64 {
        match self {
            LambdaRule::Fixed => lambda0,
            LambdaRule::InverseSqrtN => lambda0 / (n as f64).sqrt(),
            LambdaRule::InverseSqrtNtot => lambda0 / ((n * n_rep) as f64).sqrt(),
            LambdaRule::InverseSqrtNrep => lambda0 / (n_rep as f64).sqrt(),
        }
    }
}

/// Cavity frequency choice.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Resonance {
    /// Explicit photon energy in Hartree.
    Energy(f64),
    #[default]
    Bulk,
    Impurity,
    /// Brightest state of the cavity-free nearest-neighbor exciton model.
    E2,
}

impl Resonance {
    pub fn resolve(self, spec: &AggregateSpec) -> Result<f64> {
        match self {
            Resonance::Energy(e) => Ok(e),
            Resonance::Bulk => Ok(spec.omega_bulk),
            Resonance::Impurity => Ok(spec.omega_impurity),
            Resonance::E2 => {
                if spec.n_emitters < 2 {
                    return Ok(spec.omega_of(1));
                }
                let m = build_kasha_exciton(spec, CouplingMode::NearestNeighbor)?;
                let eig = diagonalize(&m, DEFAULT_TOL)?;
                let f = oscillator_strengths(&eig, &dipole_table(m.labels(), &chain_geometry(spec))?)?;
                let best = (0..eig.dim())
                    .max_by(|&a, &b| f.stick_intensities[a].total_cmp(&f.stick_intensities[b]).then(b.cmp(&a)))
                    .expect("non-empty spectrum");
                Ok(eig.eigenvalues[best])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub model: ModelKind,
    /// Template; `n_emitters` and `spacing` are overridden per grid point.
    pub aggregate: AggregateSpec,
    pub lambda0: f64,
    pub rule: LambdaRule,
    pub polarization: Vec3,
    pub resonance: Resonance,
    pub n_rep: usize,
    pub n_values: Vec<usize>,
    /// Spacings in Å.
    pub d_values: Vec<f64>,
}

impl ScanSpec {
    pub fn new(aggregate: AggregateSpec, lambda0: f64, rule: LambdaRule) -> Self {
        ScanSpec {
            model: ModelKind::TcKasha,
            n_values: vec![aggregate.n_emitters],
            d_values: vec![aggregate.spacing],
            aggregate,
            lambda0,
            rule,
            polarization: Vec3::X,
            resonance: Resonance::Bulk,
            n_rep: 1,
        }
    }

    pub fn aggregate_at(&self, n: usize, d: f64) -> AggregateSpec {
        AggregateSpec { spacing: d, ..self.aggregate.with_len(n) }
    }

    pub fn cavity_for(&self, aggregate: &AggregateSpec) -> Result<CavitySpec> {
        let lambda = self.rule.apply(self.lambda0, aggregate.n_emitters, self.n_rep);
        Ok(CavitySpec { omega_ph: self.resonance.resolve(aggregate)?, lambda, polarization: self.polarization })
    }
}

/// One grid point. Branch quantities refer to the LP unless named
/// otherwise; missing branches or shells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub d_angstrom: f64,
    pub lambda: f64,
    pub e_lp: f64,
    pub e_mp: f64,
    pub e_up: f64,
    /// Energy gap from the LP to the next branch.
    pub gap: f64,
    pub c_p: f64,
    pub c_a1: f64,
    pub c_a2: f64,
    pub photon_char_lp: f64,
    pub photon_char_mp: f64,
    pub n_star_flag: u32,
    pub error: Option<String>,
}

impl ScanRow {
    pub(crate) fn failed(n: usize, d_angstrom: f64, lambda: f64, err: &Error) -> Self {
        ScanRow {
            n,
            d_angstrom,
            lambda,
            e_lp: f64::NAN,
            e_mp: f64::NAN,
            e_up: f64::NAN,
            gap: f64::NAN,
            c_p: f64::NAN,
            c_a1: f64::NAN,
            c_a2: f64::NAN,
            photon_char_lp: f64::NAN,
            photon_char_mp: f64::NAN,
            n_star_flag: flags::SOLVER_FAILURE,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Diagonalizes `model` and extracts the scan quantities for `aggregate`.
pub fn evaluate_point(
    model: &ModelMatrix,
    aggregate: &AggregateSpec,
    dipoles: &[Vec3],
    lambda: f64,
) -> Result<ScanRow> {
    evaluate_with_report(model, aggregate, dipoles, lambda).map(|(row, _)| row)
}

pub(crate) fn evaluate_with_report(
    model: &ModelMatrix,
    aggregate: &AggregateSpec,
    dipoles: &[Vec3],
    lambda: f64,
) -> Result<(ScanRow, PolaritonReport)> {
    let eig = diagonalize(model, DEFAULT_TOL)?;
    let report = classify_states(&eig, model.labels(), dipoles)?;
    let shells = match ShellSites::of(aggregate) {
        Some(sites) => Some(report.shell_coefficients(&report.lp, sites)?),
        None => None,
    };
    let mp = report.mp.as_ref();
    let next = mp.map_or(report.up.energy, |s| s.energy);
    let row = ScanRow {
        n: aggregate.n_emitters,
        d_angstrom: aggregate.spacing,
        lambda,
        e_lp: report.lp.energy,
        e_mp: mp.map_or(f64::NAN, |s| s.energy),
        e_up: report.up.energy,
        gap: next - report.lp.energy,
        c_p: shells.map_or(f64::NAN, |s| s.c_p),
        c_a1: shells.and_then(|s| s.c_a1).unwrap_or(f64::NAN),
        c_a2: shells.and_then(|s| s.c_a2).unwrap_or(f64::NAN),
        photon_char_lp: report.lp.photon_character,
        photon_char_mp: mp.map_or(f64::NAN, |s| s.photon_character),
        n_star_flag: if report.lp.fallback_gauge { flags::FALLBACK_GAUGE } else { 0 },
        error: None,
    };
    Ok((row, report))
}

/// Dipole table matching the basis of `model` built as `kind`.
pub fn model_dipoles(kind: ModelKind, aggregate: &AggregateSpec, model: &ModelMatrix) -> Result<Vec<Vec3>> {
    let mut geometry = chain_geometry(aggregate);
    if kind == ModelKind::Tc {
        geometry.dipole_vectors.iter_mut().for_each(|d| *d = Vec3::X * aggregate.dipole_magnitude);
    }
    dipole_table(model.labels(), &geometry)
}

/// The full pipeline at one `(N, d)`.
pub fn scan_point(spec: &ScanSpec, n: usize, d: f64) -> Result<ScanRow> {
    let aggregate = spec.aggregate_at(n, d);
    let cavity = spec.cavity_for(&aggregate)?;
    let model = spec.model.build(&aggregate, &cavity, spec.n_rep)?;
    let dipoles = model_dipoles(spec.model, &aggregate, &model)?;
    evaluate_point(&model, &aggregate, &dipoles, cavity.lambda)
}

/// Runs every `(N, d)` point in parallel. Rows come back ordered by `N`,
/// then `d`; failed points carry [`flags::SOLVER_FAILURE`] and NaNs. The
/// sign flip of each `d` column is marked in `n_star_flag`.
pub fn coefficient_scan(spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    if spec.n_values.is_empty() || spec.d_values.is_empty() {
        return Err(Error::invalid("scan ranges must be non-empty"));
    }
    let points: Vec<(usize, f64)> =
        spec.n_values.iter().flat_map(|&n| spec.d_values.iter().map(move |&d| (n, d))).collect();
    let mut rows: Vec<ScanRow> = points
        .par_iter()
        .map(|&(n, d)| {
            scan_point(spec, n, d).unwrap_or_else(|e| {
                ScanRow::failed(n, d, spec.rule.apply(spec.lambda0, n, spec.n_rep), &e)
            })
        })
        .collect();
    mark_sign_flips(&mut rows);
    Ok(rows)
}

/// Sets the N* bits per spacing column. Rows must be ordered by `N` within
/// each column.
pub(crate) fn mark_sign_flips(rows: &mut [ScanRow]) {
    let mut spacings: Vec<f64> = rows.iter().map(|r| r.d_angstrom).collect();
    spacings.sort_by(f64::total_cmp);
    spacings.dedup();
    for d in spacings {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].d_angstrom == d).collect();
        let column: Vec<ScanRow> = idx.iter().map(|&i| rows[i].clone()).collect();
        if let Some(flip) = detect_sign_flip(&column) {
            let i = idx[column.iter().position(|r| r.n == flip.n_star).expect("flip row exists")];
            rows[i].n_star_flag |= flags::N_STAR;
            if flip.ambiguous {
                rows[i].n_star_flag |= flags::AMBIGUOUS;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignFlip {
    pub n_star: usize,
    /// A near-zero coefficient was crossed on the way.
    pub ambiguous: bool,
}

/// First `N` at which the LP `c_A1` differs in sign from its value at the
/// smallest `N`. Rows must share one spacing and be sorted by `N`.
pub fn detect_sign_flip(rows: &[ScanRow]) -> Option<SignFlip> {
    detect_sign_flip_by(rows, |r| r.c_a1)
}

/// [`detect_sign_flip`] for an arbitrary row quantity. Failed rows and NaNs
/// are skipped; values below `1e-12` in magnitude count as zero and make the
/// result ambiguous.
pub fn detect_sign_flip_by(rows: &[ScanRow], key: impl Fn(&ScanRow) -> f64) -> Option<SignFlip> {
    let mut reference = None;
    let mut ambiguous = false;
    for row in rows.iter().filter(|r| r.is_ok()) {
        let c = key(row);
        if c.is_nan() {
            continue;
        }
        if c.abs() < ZERO_COEFFICIENT {
            ambiguous = true;
            continue;
        }
        match reference {
            None => reference = Some(c > 0.0),
            Some(positive) if positive != (c > 0.0) => {
                return Some(SignFlip { n_star: row.n, ambiguous })
            }
            Some(_) => {}
        }
    }
    None
}

/// `(N, gap)` at the smallest LP gap.
pub fn avoided_crossing_gap(rows: &[ScanRow]) -> Result<(usize, f64)> {
    let valid: Vec<&ScanRow> = rows.iter().filter(|r| r.is_ok() && r.gap.is_finite()).collect();
    if valid.len() < 2 {
        return Err(Error::invalid("avoided crossing needs at least two rows"));
    }
    let best = valid
        .iter()
        .min_by(|a, b| a.gap.total_cmp(&b.gap).then(a.n.cmp(&b.n)))
        .expect("non-empty");
    Ok((best.n, best.gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::ev_to_hartree;

    fn row(n: usize, c_a1: f64) -> ScanRow {
        let mut r = ScanRow::failed(n, 5.0, 0.01, &Error::DegenerateCoupling);
        r.error = None;
        r.n_star_flag = 0;
        r.c_a1 = c_a1;
        r
    }

    #[test]
    fn sign_flip_definition() {
        let rows: Vec<_> = [(4, -1.0), (5, -0.5), (6, 0.2), (7, 0.4)].iter().map(|&(n, c)| row(n, c)).collect();
        assert_eq!(detect_sign_flip(&rows), Some(SignFlip { n_star: 6, ambiguous: false }));
        let rows: Vec<_> = (4..10).map(|n| row(n, n as f64)).collect();
        assert_eq!(detect_sign_flip(&rows), None);
        let rows: Vec<_> = [(4, -1.0), (5, 0.0), (6, 0.2)].iter().map(|&(n, c)| row(n, c)).collect();
        assert_eq!(detect_sign_flip(&rows), Some(SignFlip { n_star: 6, ambiguous: true }));
    }

    #[test]
    fn single_point_matches_direct_pipeline() {
        let spec = ScanSpec::new(AggregateSpec::h_chain(9, 5.0), 0.004, LambdaRule::Fixed);
        let rows = coefficient_scan(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        let agg = AggregateSpec::h_chain(9, 5.0);
        let cav = CavitySpec::new(agg.omega_bulk, 0.004);
        let m = ModelKind::TcKasha.build(&agg, &cav, 1).unwrap();
        let direct = evaluate_point(&m, &agg, &dipole_table(m.labels(), &chain_geometry(&agg)).unwrap(), 0.004)
            .unwrap();
        assert_eq!(rows[0], direct);
    }

    #[test]
    fn scan_rows_are_ordered_and_flagged() {
        let mut spec = ScanSpec::new(AggregateSpec::h_chain(4, 5.0), 0.004, LambdaRule::Fixed);
        spec.n_values = (4..=30).collect();
        spec.d_values = vec![5.0, 6.0];
        let rows = coefficient_scan(&spec).unwrap();
        assert_eq!(rows.len(), 54);
        assert!(rows.windows(2).all(|w| (w[0].n, w[0].d_angstrom) < (w[1].n, w[1].d_angstrom)));
        let five: Vec<ScanRow> = rows.iter().filter(|r| r.d_angstrom == 5.0).cloned().collect();
        let flip = detect_sign_flip(&five).expect("flip within 4..30 at 5 Å");
        let flagged: Vec<usize> =
            five.iter().filter(|r| r.n_star_flag & flags::N_STAR != 0).map(|r| r.n).collect();
        assert_eq!(flagged, vec![flip.n_star]);
        assert_eq!(detect_sign_flip_by(&five, |r| r.c_p), None);
    }

    #[test]
    fn failures_are_recorded() {
        let mut spec = ScanSpec::new(AggregateSpec::h_chain(4, 5.0), 0.004, LambdaRule::Fixed);
        spec.n_values = vec![1, 4];
        let rows = coefficient_scan(&spec).unwrap();
        assert_eq!(rows[0].n_star_flag, flags::SOLVER_FAILURE);
        assert!(rows[0].error.is_some());
        assert!(rows[1].is_ok());
        spec.n_values.clear();
        assert!(coefficient_scan(&spec).is_err());
    }

    #[test]
    fn plain_tc_gap_is_monotone() {
        let mut agg = AggregateSpec::h_chain(2, 5.0);
        agg.impurity_index = None;
        let mut spec = ScanSpec::new(agg, 0.005, LambdaRule::Fixed);
        spec.model = ModelKind::Tc;
        spec.n_values = (2..=20).collect();
        let rows = coefficient_scan(&spec).unwrap();
        assert!(rows.windows(2).all(|w| w[1].gap > w[0].gap));
        assert_eq!(avoided_crossing_gap(&rows).unwrap().0, 2);
    }

    #[test]
    fn impurity_tc_gap_has_interior_minimum() {
        let mut spec = ScanSpec::new(AggregateSpec::h_chain(4, 5.0), 0.005, LambdaRule::Fixed);
        spec.model = ModelKind::TcImpurity;
        spec.n_values = (4..=11).collect();
        let rows = coefficient_scan(&spec).unwrap();
        let (n, _) = avoided_crossing_gap(&rows).unwrap();
        assert!(n > 4 && n < 11, "minimum at {n}");
    }

    #[test]
    fn detuned_cavity_leaves_lp_material() {
        let mut spec = ScanSpec::new(AggregateSpec::h_chain(4, 5.0), 0.004, LambdaRule::Fixed);
        spec.resonance = Resonance::Energy(ev_to_hartree(20.0));
        spec.n_values = (4..=12).collect();
        let rows = coefficient_scan(&spec).unwrap();
        for r in &rows {
            assert!(r.photon_char_lp < 1e-3);
        }
    }

    #[test]
    fn lambda_rules() {
        assert_eq!(LambdaRule::Fixed.apply(0.01, 4, 9), 0.01);
        assert_eq!(LambdaRule::InverseSqrtN.apply(0.01, 4, 9), 0.005);
        assert_eq!(LambdaRule::InverseSqrtNtot.apply(0.01, 4, 9), 0.01 / 6.0);
        assert_eq!(LambdaRule::InverseSqrtNrep.apply(0.01, 4, 9), 0.01 / 3.0);
        for r in [LambdaRule::Fixed, LambdaRule::InverseSqrtN, LambdaRule::InverseSqrtNtot, LambdaRule::InverseSqrtNrep] {
            assert_eq!(LambdaRule::from_name(r.name()), Some(r));
        }
    }

    #[test]
    fn e2_resonance_is_blue_of_bulk_for_h_chains() {
        let agg = AggregateSpec::h_chain(6, 5.0);
        assert!(Resonance::E2.resolve(&agg).unwrap() > agg.omega_bulk);
    }
}
