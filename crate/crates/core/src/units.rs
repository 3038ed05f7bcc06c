//! Unit conversions.

/// Hartree in electronvolts.
pub const HARTREE_EV: f64 = 27.211386;

/// Ångström in bohr.
pub const ANGSTROM_BOHR: f64 = 1.8897259886;

pub fn ev_to_hartree(ev: f64) -> f64 {
    ev / HARTREE_EV
}

pub fn hartree_to_ev(ha: f64) -> f64 {
    ha * HARTREE_EV
}

pub fn angstrom_to_bohr(a: f64) -> f64 {
    a * ANGSTROM_BOHR
}
