//! Chain geometries and point transition dipole–dipole couplings.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Neg, Sub};

use crate::model::{AggregateSpec, Arrangement};
use crate::units::angstrom_to_bohr;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const X: Vec3 = Vec3([1.0, 0.0, 0.0]);
    pub const Y: Vec3 = Vec3([0.0, 1.0, 0.0]);
    pub const Z: Vec3 = Vec3([0.0, 0.0, 1.0]);
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

/// Point-dipole interaction
/// `V = [(μA·μB) R² − 3 (μA·R)(μB·R)] / (ε R⁵)` in atomic units.
pub fn dipole_dipole_coupling(mu_a: Vec3, mu_b: Vec3, r_ab: Vec3, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 1.0) {
        return Err(Error::invalid(format!("dielectric constant {epsilon} must be >= 1")));
    }
    let r2 = r_ab.dot(&r_ab);
    if r2 == 0.0 {
        return Err(Error::ZeroSeparation);
    }
    let r5 = r2 * r2 * r2.sqrt();
    Ok((mu_a.dot(&mu_b) * r2 - 3.0 * mu_a.dot(&r_ab) * mu_b.dot(&r_ab)) / (epsilon * r5))
}

/// Dipole of magnitude `magnitude` tilted by `theta` from X inside the XZ
/// plane, so it stays orthogonal to the Y axis.
pub fn rotate_dipole(magnitude: f64, theta: f64) -> Result<Vec3> {
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::invalid(format!("dipole angle {theta} outside [0, pi/2]")));
    }
    Ok(Vec3::new(magnitude * theta.cos(), 0.0, magnitude * theta.sin()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainGeometry {
    /// Emitter centers in bohr, in chain order.
    pub positions: Vec<Vec3>,
    /// Transition dipoles in a.u., aligned with `positions`.
    pub dipole_vectors: Vec<Vec3>,
}

impl ChainGeometry {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Coupling between emitters `m` and `n` (0-based).
    pub fn coupling(&self, m: usize, n: usize, epsilon: f64) -> Result<f64> {
        dipole_dipole_coupling(
            self.dipole_vectors[m],
            self.dipole_vectors[n],
            self.positions[n] - self.positions[m],
            epsilon,
        )
    }

    /// Couplings between consecutive emitters: entry `k` couples `k` and `k+1`.
    pub fn nearest_neighbor_couplings(&self, epsilon: f64) -> Result<Vec<f64>> {
        (1..self.len()).map(|k| self.coupling(k - 1, k, epsilon)).collect()
    }
}

/// Chain axis for the arrangement: Y for H-aggregates, X for J-aggregates.
pub fn chain_axis(arrangement: Arrangement) -> Vec3 {
    match arrangement {
        Arrangement::HAggregate => Vec3::Y,
        Arrangement::JAggregate => Vec3::X,
    }
}

/// Equidistant chain with every dipole along X.
pub fn chain_geometry(spec: &AggregateSpec) -> ChainGeometry {
    let thetas = vec![0.0; spec.n_emitters];
    // theta = 0 is always in range
    chain_geometry_with_angles(spec, &thetas).expect("zero angles are valid")
}

/// Chain geometry with each dipole tilted by `thetas[k]` in the XZ plane.
pub fn chain_geometry_with_angles(spec: &AggregateSpec, thetas: &[f64]) -> Result<ChainGeometry> {
    if thetas.len() != spec.n_emitters {
        return Err(Error::invalid(format!(
            "{} angles for {} emitters",
            thetas.len(),
            spec.n_emitters
        )));
    }
    let step = chain_axis(spec.arrangement) * angstrom_to_bohr(spec.spacing);
    let positions = (0..spec.n_emitters).map(|k| step * k as f64).collect();
    let dipole_vectors = thetas
        .iter()
        .enumerate()
        .map(|(k, &theta)| rotate_dipole(spec.dipole_of(k + 1), theta))
        .collect::<Result<_>>()?;
    Ok(ChainGeometry { positions, dipole_vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FIVE_ANGSTROM: f64 = 5.0 * crate::units::ANGSTROM_BOHR;

    #[test]
    fn side_by_side_is_positive() {
        let v = dipole_dipole_coupling(Vec3::X, Vec3::X, Vec3::new(0.0, FIVE_ANGSTROM, 0.0), 1.0)
            .unwrap();
        assert_relative_eq!(v, FIVE_ANGSTROM.powi(-3), max_relative = 1e-14);
        assert_relative_eq!(v, 1.1855e-3, max_relative = 1e-4);
    }

    #[test]
    fn head_tail_is_negative() {
        let v = dipole_dipole_coupling(Vec3::X, Vec3::X, Vec3::new(FIVE_ANGSTROM, 0.0, 0.0), 1.0)
            .unwrap();
        assert_relative_eq!(v, -2.0 * FIVE_ANGSTROM.powi(-3), max_relative = 1e-14);
        assert_relative_eq!(v, -2.3710e-3, max_relative = 1e-4);
    }

    #[test]
    fn orthogonal_dipoles_do_not_couple() {
        let v = dipole_dipole_coupling(Vec3::X, Vec3::Z, Vec3::Y * 3.0, 1.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn zero_separation_is_an_error() {
        assert!(matches!(
            dipole_dipole_coupling(Vec3::X, Vec3::X, Vec3::ZERO, 1.0),
            Err(Error::ZeroSeparation)
        ));
    }

    #[test]
    fn rotation() {
        assert_eq!(rotate_dipole(2.0, 0.0).unwrap(), Vec3::new(2.0, 0.0, 0.0));
        let up = rotate_dipole(1.0, FRAC_PI_2).unwrap();
        assert!(up.dot(&Vec3::X).abs() < 1e-16);
        assert_relative_eq!(up.0[2], 1.0);
        let tilted = rotate_dipole(1.0, std::f64::consts::FRAC_PI_3).unwrap();
        assert_relative_eq!(tilted.dot(&Vec3::X), 0.5, max_relative = 1e-15);
        assert!(rotate_dipole(1.0, -0.1).is_err());
        assert!(rotate_dipole(1.0, 1.6).is_err());
    }

    #[test]
    fn h_chain_layout() {
        let spec = AggregateSpec::h_chain(3, 5.0);
        let geo = chain_geometry(&spec);
        assert_eq!(geo.positions[0], Vec3::ZERO);
        assert_relative_eq!(geo.positions[1].0[1], 9.4486, max_relative = 1e-5);
        assert_relative_eq!(geo.positions[2].0[1], 18.897, max_relative = 1e-4);
        for (p, mu) in geo.positions.iter().zip(&geo.dipole_vectors) {
            assert_eq!(p.0[0], 0.0);
            assert_eq!(*mu, Vec3::new(spec.dipole_magnitude, 0.0, 0.0));
        }
        for w in geo.positions.windows(2) {
            assert!(((w[1] - w[0]).norm() - FIVE_ANGSTROM).abs() < 1e-10);
        }
        assert!(geo.nearest_neighbor_couplings(1.0).unwrap().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn j_chain_couples_negatively() {
        let mut spec = AggregateSpec::h_chain(2, 5.0);
        spec.arrangement = Arrangement::JAggregate;
        let geo = chain_geometry(&spec);
        let v = geo.nearest_neighbor_couplings(1.0).unwrap();
        assert_eq!(v.len(), 1);
        assert!(v[0] < 0.0);
    }

    #[test]
    fn single_site_has_no_couplings() {
        let geo = chain_geometry(&AggregateSpec::h_chain(1, 5.0));
        assert_eq!(geo.len(), 1);
        assert!(geo.nearest_neighbor_couplings(1.0).unwrap().is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3() -> impl Strategy<Value = Vec3> {
            prop::array::uniform3(-3.0f64..3.0).prop_map(Vec3)
        }

        proptest! {
            #[test]
            fn exchange_symmetry(a in vec3(), b in vec3(), r in vec3()) {
                prop_assume!(r.norm() > 0.1);
                let ab = dipole_dipole_coupling(a, b, r, 1.0).unwrap();
                let ba = dipole_dipole_coupling(b, a, -r, 1.0).unwrap();
                prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
            }

            #[test]
            fn inverse_cube_scaling(a in vec3(), r in vec3(), c in 0.5f64..4.0) {
                prop_assume!(r.norm() > 0.1);
                let v1 = dipole_dipole_coupling(a, a, r, 1.0).unwrap();
                let vc = dipole_dipole_coupling(a, a, r * c, 1.0).unwrap();
                prop_assert!((vc - v1 / c.powi(3)).abs() <= 1e-12 * (1.0 + v1.abs()));
            }

            #[test]
            fn dielectric_screening(a in vec3(), b in vec3(), r in vec3(), eps in 1.0f64..80.0) {
                prop_assume!(r.norm() > 0.1);
                let v1 = dipole_dipole_coupling(a, b, r, 1.0).unwrap();
                let ve = dipole_dipole_coupling(a, b, r, eps).unwrap();
                prop_assert!((ve - v1 / eps).abs() <= 1e-12 * (1.0 + v1.abs()));
            }
        }
    }
}
