//! Reproducible energetic and orientational disorder.
//!
//! Each realization draws from its own ChaCha8 stream selected by
//! `(seed, stream_index)`, so any realization can be regenerated on its own
//! and ensembles do not depend on scheduling. For every site, in chain
//! order, three uniforms are consumed: two for a Box–Muller normal and one
//! for the tilt angle. Protected sites consume their draws too, so the
//! protected set does not shift the other sites' values.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{dipole_table, evaluate_with_report, mark_sign_flips, ScanRow, ScanSpec};
use crate::geometry::chain_geometry_with_angles;
use crate::model::{build_tc_kasha_disordered, AggregateSpec, CavitySpec, DisorderRealization};
use crate::units::ev_to_hartree;
use crate::{Error, Result};

pub const DEFAULT_SIGMA_EV: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSpec {
    /// Standard deviation of the site energies in Hartree.
    pub sigma_energy: f64,
    /// Tilt angles are drawn from `[0, angle_max]`.
    pub angle_max: f64,
    /// 1-based sites kept at their ordered energy and angle. `None` protects
    /// the impurity and both of its neighbors.
    pub protected_indices: Option<BTreeSet<usize>>,
    pub seed: u64,
    pub n_samples: usize,
}

impl DisorderSpec {
    pub fn new(seed: u64) -> Self {
        DisorderSpec {
            sigma_energy: ev_to_hartree(DEFAULT_SIGMA_EV),
            angle_max: FRAC_PI_2,
            protected_indices: None,
            seed,
            n_samples: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_energy >= 0.0) || !self.sigma_energy.is_finite() {
            return Err(Error::invalid("sigma_energy must be >= 0"));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.angle_max) {
            return Err(Error::invalid(format!("angle_max {} outside [0, pi/2]", self.angle_max)));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be >= 1"));
        }
        Ok(())
    }

    /// Protected sites for `spec`.
    pub fn protected_sites(&self, spec: &AggregateSpec) -> BTreeSet<usize> {
        match &self.protected_indices {
            Some(set) => set.clone(),
            None => spec.impurity_index.into_iter().chain(spec.impurity_neighbors()).collect(),
        }
    }
}

/// Uniform in `[0, 1)` with 53 random bits.
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn stream(seed: u64, stream_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_index);
    rng
}

/// Draws one realization: `ω_k ~ N(ω_k⁰, σ²)` and `θ_k ~ U[0, angle_max]`
/// for unprotected sites, with couplings `g̃₀ cos θ_k` from `cavity`.
pub fn sample_realization(
    spec: &AggregateSpec,
    cavity: &CavitySpec,
    d: &DisorderSpec,
    stream_index: u64,
) -> Result<DisorderRealization> {
    d.validate()?;
    spec.validate()?;
    let protected = d.protected_sites(spec);
    let mut rng = stream(d.seed, stream_index);
    let n = spec.n_emitters;
    let mut omegas = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for site in 1..=n {
        let z = standard_normal(&mut rng);
        let u = uniform(&mut rng);
        if protected.contains(&site) {
            omegas.push(spec.omega_of(site));
            thetas.push(0.0);
        } else {
            omegas.push(spec.omega_of(site) + d.sigma_energy * z);
            thetas.push(u * d.angle_max);
        }
    }
    DisorderRealization::from_angles(spec, cavity, omegas, thetas)
}

/// Results of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub stream_index: u64,
    pub row: ScanRow,
    /// Gauge-fixed LP and MP emitter coefficients, first replica, site order.
    pub lp_coefficients: Vec<f64>,
    pub mp_coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], bins: usize) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        let lower = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; bins.max(1)];
        if finite.is_empty() {
            return Histogram { lower: 0.0, upper: 0.0, counts };
        }
        let last = counts.len() - 1;
        let width = (upper - lower) / counts.len() as f64;
        for x in finite {
            let b = if width > 0.0 { ((x - lower) / width) as usize } else { 0 };
            counts[b.min(last)] += 1;
        }
        Histogram { lower, upper, counts }
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let k = self.counts.len();
        (0..=k).map(|i| self.lower + (self.upper - self.lower) * i as f64 / k as f64).collect()
    }
}

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// One entry per stream `0..n_samples`.
    pub samples: Vec<SampleResult>,
    pub lp_mean: Vec<f64>,
    pub lp_std: Vec<f64>,
    pub mp_mean: Vec<f64>,
    pub mp_std: Vec<f64>,
    pub e_lp: Histogram,
    pub e_mp: Histogram,
    pub e_up: Histogram,
}

fn mean_std(columns: &[&Vec<f64>], n: usize) -> (Vec<f64>, Vec<f64>) {
    let k = columns.len() as f64;
    let mean: Vec<f64> = (0..n).map(|i| columns.iter().map(|c| c[i]).sum::<f64>() / k).collect();
    let std = (0..n)
        .map(|i| {
            if columns.len() < 2 {
                return 0.0;
            }
            let var = columns.iter().map(|c| (c[i] - mean[i]).powi(2)).sum::<f64>() / (k - 1.0);
            var.sqrt()
        })
        .collect();
    (mean, std)
}

/// Solves one disordered TC–Kasha realization.
pub fn solve_sample(
    spec: &AggregateSpec,
    cavity: &CavitySpec,
    d: &DisorderSpec,
    stream_index: u64,
) -> Result<SampleResult> {
    let wrap = |e: Error| Error::Stream { stream: stream_index, source: Box::new(e) };
    let real = sample_realization(spec, cavity, d, stream_index).map_err(wrap)?;
    let model = build_tc_kasha_disordered(spec, cavity, &real).map_err(wrap)?;
    let geometry = chain_geometry_with_angles(spec, &real.thetas).map_err(wrap)?;
    let dipoles = dipole_table(model.labels(), &geometry).map_err(wrap)?;
    let (row, report) = evaluate_with_report(&model, spec, &dipoles, cavity.lambda).map_err(wrap)?;
    let emitters = |c: &[f64]| c[1..=spec.n_emitters].to_vec();
    Ok(SampleResult {
        stream_index,
        row,
        lp_coefficients: emitters(&report.lp.coefficients),
        mp_coefficients: report.mp.as_ref().map_or(vec![f64::NAN; spec.n_emitters], |s| emitters(&s.coefficients)),
    })
}

/// Runs `n_samples` realizations on streams `0..n_samples` in parallel and
/// aggregates them in stream order. The first failing stream is reported.
pub fn ensemble_polariton_stats(
    spec: &AggregateSpec,
    cavity: &CavitySpec,
    d: &DisorderSpec,
) -> Result<EnsembleStats> {
    d.validate()?;
    let samples = (0..d.n_samples as u64)
        .into_par_iter()
        .map(|s| solve_sample(spec, cavity, d, s))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let n = spec.n_emitters;
    let (lp_mean, lp_std) = mean_std(&samples.iter().map(|s| &s.lp_coefficients).collect::<Vec<_>>(), n);
    let (mp_mean, mp_std) = mean_std(&samples.iter().map(|s| &s.mp_coefficients).collect::<Vec<_>>(), n);
    let energies = |f: fn(&ScanRow) -> f64| samples.iter().map(|s| f(&s.row)).collect::<Vec<_>>();
    Ok(EnsembleStats {
        e_lp: Histogram::build(&energies(|r| r.e_lp), HISTOGRAM_BINS),
        e_mp: Histogram::build(&energies(|r| r.e_mp), HISTOGRAM_BINS),
        e_up: Histogram::build(&energies(|r| r.e_up), HISTOGRAM_BINS),
        samples,
        lp_mean,
        lp_std,
        mp_mean,
        mp_std,
    })
}

/// Disordered counterpart of a coefficient scan. Every chain length uses
/// the same stream, and sites draw in chain order, so the chain of length
/// `N + 1` extends the chain of length `N` by one site. With `stop_at_flip`
/// the scan of each spacing ends at its first LP `c_A1` sign flip.
pub fn disordered_scan(
    scan: &ScanSpec,
    d: &DisorderSpec,
    stream_index: u64,
    stop_at_flip: bool,
) -> Result<Vec<ScanRow>> {
    if scan.n_values.is_empty() || scan.d_values.is_empty() {
        return Err(Error::invalid("scan ranges must be non-empty"));
    }
    if scan.n_rep != 1 {
        return Err(Error::invalid("disordered scans use a single replica"));
    }
    let columns: Vec<Vec<ScanRow>> = scan
        .d_values
        .par_iter()
        .map(|&spacing| {
            let mut rows: Vec<ScanRow> = Vec::new();
            for &n in &scan.n_values {
                let aggregate = scan.aggregate_at(n, spacing);
                let row = scan
                    .cavity_for(&aggregate)
                    .and_then(|cavity| solve_sample(&aggregate, &cavity, d, stream_index).map(|s| s.row))
                    .unwrap_or_else(|e| ScanRow::failed(n, spacing, scan.rule.apply(scan.lambda0, n, 1), &e));
                rows.push(row);
                if stop_at_flip && crate::analysis::detect_sign_flip(&rows).is_some() {
                    break;
                }
            }
            rows
        })
        .collect();
    let mut rows: Vec<ScanRow> = columns.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.d_angstrom.total_cmp(&b.d_angstrom)));
    mark_sign_flips(&mut rows);
    Ok(rows)
}
