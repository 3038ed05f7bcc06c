//! Stick and Lorentzian-broadened absorption spectra.

use std::f64::consts::PI;

use crate::eig::EigenDecomposition;
use crate::geometry::Vec3;
use crate::{Error, Result};

/// Default full width at half maximum in eV.
pub const DEFAULT_WIDTH_EV: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumData {
    pub stick_energies: Vec<f64>,
    /// Dimensionless oscillator strengths.
    pub stick_intensities: Vec<f64>,
    /// `(energy, intensity)` samples of the broadened spectrum.
    pub grid: Vec<(f64, f64)>,
}

/// Inclusive energy grid `start, start + step, …, ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl EnergyGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::invalid(format!("bad energy grid {self:?}")));
        }
        let count = ((self.stop - self.start) / self.step * (1.0 + 1e-12)).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + self.step * i as f64).collect())
    }

    /// Grid covering all sticks with `margin` on both sides.
    pub fn around(energies: &[f64], margin: f64, step: f64) -> Self {
        let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        EnergyGrid { start: lo - margin, stop: hi + margin, step }
    }
}

/// `f_i = (2/3) E_i |Σ_k c_ik μ_k|²` for every eigenstate, with `dipoles`
/// aligned with the basis.
pub fn oscillator_strengths(eig: &EigenDecomposition, dipoles: &[Vec3]) -> Result<SpectrumData> {
    if dipoles.len() != eig.dim() {
        return Err(Error::invalid(format!(
            "{} dipoles for dimension {}",
            dipoles.len(),
            eig.dim()
        )));
    }
    let stick_intensities = (0..eig.dim())
        .map(|i| {
            let mu = eig.vector(i).iter().zip(dipoles).fold(Vec3::ZERO, |acc, (&c, &d)| acc + d * c);
            2.0 / 3.0 * eig.eigenvalues[i] * mu.dot(&mu)
        })
        .collect();
    Ok(SpectrumData { stick_energies: eig.eigenvalues.clone(), stick_intensities, grid: Vec::new() })
}

/// Sum of area-normalized Lorentzians of full width `width` centered at the
/// sticks.
pub fn broadened_spectrum(sticks: &SpectrumData, width: f64, grid: EnergyGrid) -> Result<SpectrumData> {
    if !(width > 0.0) {
        return Err(Error::invalid("broadening width must be > 0"));
    }
    let gamma = 0.5 * width;
    let points = grid
        .points()?
        .into_iter()
        .map(|e| {
            let y = sticks
                .stick_energies
                .iter()
                .zip(&sticks.stick_intensities)
                .map(|(&e0, &f)| f * gamma / PI / ((e - e0).powi(2) + gamma * gamma))
                .sum();
            (e, y)
        })
        .collect();
    Ok(SpectrumData { grid: points, ..sticks.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::diagonalize;
    use crate::geometry::chain_geometry;
    use crate::model::{build_kasha_exciton, AggregateSpec, CouplingMode};
    use crate::analysis::dipole_table;

    fn sticks(e: &[f64], f: &[f64]) -> SpectrumData {
        SpectrumData { stick_energies: e.to_vec(), stick_intensities: f.to_vec(), grid: vec![] }
    }

    fn local_maxima(s: &SpectrumData) -> Vec<f64> {
        s.grid.windows(3).filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1).map(|w| w[1].0).collect()
    }

    #[test]
    fn single_stick_is_one_peak() {
        let s = broadened_spectrum(&sticks(&[0.5], &[1.0]), 0.01, EnergyGrid { start: 0.4, stop: 0.6, step: 1e-4 })
            .unwrap();
        let peaks = local_maxima(&s);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0] - 0.5).abs() < 1e-4);
        let peak = s.grid.iter().map(|p| p.1).fold(0.0, f64::max);
        assert!((peak - 2.0 / (PI * 0.01)).abs() < 1e-6 * peak);
    }

    #[test]
    fn separated_sticks_resolve() {
        let s = broadened_spectrum(&sticks(&[0.45, 0.55], &[1.0, 0.5]), 0.01, EnergyGrid { start: 0.3, stop: 0.7, step: 1e-4 })
            .unwrap();
        assert_eq!(local_maxima(&s).len(), 2);
    }

    #[test]
    fn area_matches_stick_sum() {
        let s = sticks(&[0.45, 0.5, 0.52], &[0.3, 1.0, 0.2]);
        let width = 0.001;
        let b = broadened_spectrum(&s, width, EnergyGrid::around(&s.stick_energies, 200.0 * width, width / 50.0))
            .unwrap();
        let step = b.grid[1].0 - b.grid[0].0;
        let area: f64 = b.grid.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * step).sum();
        assert!((area - 1.5).abs() < 0.01 * 1.5, "area {area}");
        assert!(b.grid.iter().all(|p| p.1 >= 0.0));
    }

    #[test]
    fn bad_width_and_grid() {
        let s = sticks(&[0.5], &[1.0]);
        let g = EnergyGrid { start: 0.4, stop: 0.6, step: 0.01 };
        assert!(broadened_spectrum(&s, 0.0, g).is_err());
        assert!(broadened_spectrum(&s, 0.01, EnergyGrid { step: 0.0, ..g }).is_err());
        assert_eq!(g.points().unwrap().len(), 21);
    }

    fn exciton_sticks(spec: &AggregateSpec) -> SpectrumData {
        let m = build_kasha_exciton(spec, CouplingMode::NearestNeighbor).unwrap();
        let eig = diagonalize(&m, 1e-12).unwrap();
        oscillator_strengths(&eig, &dipole_table(m.labels(), &chain_geometry(spec)).unwrap()).unwrap()
    }

    #[test]
    fn h_dimer_symmetric_state_takes_all_intensity() {
        let mut spec = AggregateSpec::h_chain(2, 5.0);
        spec.impurity_index = None;
        let s = exciton_sticks(&spec);
        assert!(s.stick_intensities[0] < 1e-14);
        assert!(s.stick_intensities[1] > 0.0);
        assert!(s.stick_energies[1] > spec.omega_bulk);
    }

    #[test]
    fn j_aggregate_lowest_state_brightens() {
        let mut last = 0.0;
        for n in 4..=7 {
            let mut spec = AggregateSpec::j_chain(n, 5.0);
            spec.impurity_index = None;
            let f = exciton_sticks(&spec).stick_intensities[0];
            assert!(f > last);
            last = f;
        }
    }
}
