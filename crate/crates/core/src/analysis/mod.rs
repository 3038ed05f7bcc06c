//! Polariton branch classification and observables.
//!
//! A state is bright when its photon character exceeds
//! [`BRIGHT_THRESHOLD`]. The lower polariton is the lowest bright state; the
//! two most photonic of the remaining bright states, ordered by energy, are
//! the middle and upper polaritons. With a single remaining bright state the
//! report has no middle branch. Ties in photon character go to the lower
//! energy.
//!
//! Every coefficient vector is gauge fixed: the photon coefficient is made
//! non-negative, or, when its magnitude is below [`BRIGHT_THRESHOLD`], the
//! largest emitter coefficient is made positive and the state is marked with
//! `fallback_gauge`.

mod scan;
mod spectrum;

pub use scan::{
    avoided_crossing_gap, coefficient_scan, detect_sign_flip, detect_sign_flip_by, evaluate_point, flags, model_dipoles,
    scan_point, LambdaRule, Resonance, ScanRow, ScanSpec, SignFlip,
};
pub(crate) use scan::{evaluate_with_report, mark_sign_flips};
pub use spectrum::{
    broadened_spectrum, oscillator_strengths, EnergyGrid, SpectrumData, DEFAULT_WIDTH_EV,
};

use ndarray::ArrayView1;

use crate::eig::EigenDecomposition;
use crate::geometry::{ChainGeometry, Vec3};
use crate::model::{AggregateSpec, BasisLabel};
use crate::{Error, Result};

pub const BRIGHT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub energy: f64,
    /// Gauge-fixed coefficients in basis order.
    pub coefficients: Vec<f64>,
    pub photon_character: f64,
    pub oscillator_strength: f64,
    pub fallback_gauge: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolaritonReport {
    pub labels: Vec<BasisLabel>,
    pub lp: State,
    pub mp: Option<State>,
    pub up: State,
    /// All other states in ascending energy.
    pub dark_states: Vec<State>,
}

/// Chain positions of the impurity and its first and second shells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShellSites {
    pub p: usize,
    pub a1: Option<usize>,
    pub a2: Option<usize>,
}

impl ShellSites {
    pub fn of(spec: &AggregateSpec) -> Option<Self> {
        let p = spec.impurity_index?;
        let (a1, a2) = spec.shells();
        Some(ShellSites { p, a1, a2 })
    }
}

/// Signed coefficients of the impurity and its shells in one state (first
/// replica).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellCoefficients {
    pub c_p: f64,
    pub c_a1: Option<f64>,
    pub c_a2: Option<f64>,
}

impl PolaritonReport {
    /// LP, MP (when present) and UP.
    pub fn branches(&self) -> Vec<&State> {
        let mut out = vec![&self.lp];
        out.extend(self.mp.as_ref());
        out.push(&self.up);
        out
    }

    pub fn coefficient(&self, state: &State, label: BasisLabel) -> Option<f64> {
        self.labels.iter().position(|&l| l == label).map(|i| state.coefficients[i])
    }

    pub fn shell_coefficients(&self, state: &State, sites: ShellSites) -> Result<ShellCoefficients> {
        let get = |site: usize| {
            self.coefficient(state, BasisLabel::emitter(site))
                .ok_or_else(|| Error::Classification(format!("no emitter at site {site}")))
        };
        Ok(ShellCoefficients {
            c_p: get(sites.p)?,
            c_a1: sites.a1.map(get).transpose()?,
            c_a2: sites.a2.map(get).transpose()?,
        })
    }

    /// States in ascending energy.
    pub fn all_states(&self) -> Vec<&State> {
        let mut out: Vec<&State> = self.branches();
        out.extend(&self.dark_states);
        out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        out
    }

    pub fn photon_character_sum(&self) -> f64 {
        self.all_states().iter().map(|s| s.photon_character).sum()
    }
}

/// Transition dipole of each basis state; the photon carries none.
pub fn dipole_table(labels: &[BasisLabel], geometry: &ChainGeometry) -> Result<Vec<Vec3>> {
    labels
        .iter()
        .map(|l| match *l {
            BasisLabel::Photon => Ok(Vec3::ZERO),
            BasisLabel::Emitter { site, .. } => geometry
                .dipole_vectors
                .get(site.wrapping_sub(1))
                .copied()
                .ok_or_else(|| Error::invalid(format!("no dipole for site {site}"))),
        })
        .collect()
}

/// Applies the photon-positive gauge; returns the coefficients and whether
/// the emitter fallback was used.
pub fn gauge_fix(v: ArrayView1<'_, f64>, photon: Option<usize>) -> (Vec<f64>, bool) {
    let mut c = v.to_vec();
    let (pivot, fallback) = match photon {
        Some(p) if c[p].abs() >= BRIGHT_THRESHOLD => (p, false),
        _ => {
            let mut best = None;
            for (i, x) in c.iter().enumerate() {
                if Some(i) == photon {
                    continue;
                }
                if best.is_none_or(|b: usize| x.abs() > c[b].abs()) {
                    best = Some(i);
                }
            }
            (best.unwrap_or(0), photon.is_some())
        }
    };
    if c[pivot] < 0.0 {
        c.iter_mut().for_each(|x| *x = -*x);
    }
    (c, fallback)
}

fn transition_strength(energy: f64, c: &[f64], dipoles: &[Vec3]) -> f64 {
    let mu = c.iter().zip(dipoles).fold(Vec3::ZERO, |acc, (&x, &d)| acc + d * x);
    2.0 / 3.0 * energy * mu.dot(&mu)
}

/// Splits the spectrum into polariton branches and (quasi-)dark states.
pub fn classify_states(
    eig: &EigenDecomposition,
    labels: &[BasisLabel],
    dipoles: &[Vec3],
) -> Result<PolaritonReport> {
    let n = eig.dim();
    if labels.len() != n || dipoles.len() != n {
        return Err(Error::invalid(format!(
            "dimension {n} with {} labels and {} dipoles",
            labels.len(),
            dipoles.len()
        )));
    }
    let photons: Vec<usize> =
        labels.iter().enumerate().filter(|(_, l)| **l == BasisLabel::Photon).map(|(i, _)| i).collect();
    if photons.len() != 1 {
        return Err(Error::Classification(format!("{} photon states in basis", photons.len())));
    }
    let photon = photons[0];

    let mut states: Vec<Option<State>> = (0..n)
        .map(|i| {
            let (coefficients, fallback_gauge) = gauge_fix(eig.vector(i), Some(photon));
            let energy = eig.eigenvalues[i];
            Some(State {
                energy,
                photon_character: (coefficients[photon] * coefficients[photon]).clamp(0.0, 1.0),
                oscillator_strength: transition_strength(energy, &coefficients, dipoles),
                coefficients,
                fallback_gauge,
            })
        })
        .collect();

    let pc = |i: usize| eig.eigenvectors[[photon, i]].powi(2);
    let bright: Vec<usize> = (0..n).filter(|&i| pc(i) > BRIGHT_THRESHOLD).collect();
    if bright.len() < 2 {
        return Err(Error::Classification(format!(
            "{} bright state(s), need at least 2",
            bright.len()
        )));
    }
    let lp = bright[0];
    let mut rest = bright[1..].to_vec();
    // eigenvalues ascend, so a stable sort keeps the lower energy first on ties
    rest.sort_by(|&a, &b| pc(b).total_cmp(&pc(a)));
    rest.truncate(2);
    rest.sort_unstable();

    let lp_state = states[lp].take().expect("distinct index");
    let (mp_state, up_state) = match rest[..] {
        [up] => (None, states[up].take().expect("distinct index")),
        [mp, up] => (states[mp].take(), states[up].take().expect("distinct index")),
        _ => unreachable!("one or two remaining branches"),
    };
    Ok(PolaritonReport {
        labels: labels.to_vec(),
        lp: lp_state,
        mp: mp_state,
        up: up_state,
        dark_states: states.into_iter().flatten().collect(),
    })
}

/// `E_UP − E_LP`.
pub fn rabi_splitting(report: &PolaritonReport) -> f64 {
    report.up.energy - report.lp.energy
}
