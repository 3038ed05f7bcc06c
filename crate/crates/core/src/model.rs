//! Domain types and Hamiltonian builders for the one-excitation manifold.
//!
//! Every builder places the photon `|G,1⟩` at index 0 and the emitters
//! `|e_k,0⟩` after it in chain order (replica by replica).

use std::fmt;

use ndarray::Array2;

use crate::geometry::{chain_geometry_with_angles, Vec3};
use crate::units::ev_to_hartree;
use crate::{Error, Result};

/// Bulk H₂ excitation energy in eV.
pub const DEFAULT_OMEGA_BULK_EV: f64 = 12.498;
/// Stretched-dimer (impurity) excitation energy in eV.
pub const DEFAULT_OMEGA_IMPURITY_EV: f64 = 12.337;
/// Transition dipole magnitude in a.u. when none is configured.
pub const DEFAULT_DIPOLE_AU: f64 = 1.0;

const SYMMETRY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arrangement {
    /// Side by side: chain along Y, dipoles along X.
    HAggregate,
    /// Head to tail: chain and dipoles along X.
    JAggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    #[default]
    NearestNeighbor,
    AllPairs,
}

/// Geometry and energetics of a chain of identical emitters with an optional
/// spectrally shifted impurity.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSpec {
    pub n_emitters: usize,
    /// Intermolecular separation in Å.
    pub spacing: f64,
    pub arrangement: Arrangement,
    /// 1-based chain position of the impurity, `None` for a clean chain.
    pub impurity_index: Option<usize>,
    pub omega_bulk: f64,
    pub omega_impurity: f64,
    pub dipole_magnitude: f64,
    /// Impurity dipole magnitude; falls back to `dipole_magnitude`.
    pub impurity_dipole: Option<f64>,
    pub dielectric: f64,
}

impl AggregateSpec {
    /// H-aggregate with the default energies, unit dipoles and the impurity
    /// at the chain center.
    pub fn h_chain(n_emitters: usize, spacing: f64) -> Self {
        AggregateSpec {
            n_emitters,
            spacing,
            arrangement: Arrangement::HAggregate,
            impurity_index: Some(Self::center(n_emitters)),
            omega_bulk: ev_to_hartree(DEFAULT_OMEGA_BULK_EV),
            omega_impurity: ev_to_hartree(DEFAULT_OMEGA_IMPURITY_EV),
            dipole_magnitude: DEFAULT_DIPOLE_AU,
            impurity_dipole: None,
            dielectric: 1.0,
        }
    }

    pub fn j_chain(n_emitters: usize, spacing: f64) -> Self {
        AggregateSpec { arrangement: Arrangement::JAggregate, ..Self::h_chain(n_emitters, spacing) }
    }

    /// `⌈n/2⌉`, the default impurity position.
    pub fn center(n_emitters: usize) -> usize {
        n_emitters.div_ceil(2).max(1)
    }

    /// Same chain with `n` emitters; a centered impurity stays centered.
    pub fn with_len(&self, n: usize) -> Self {
        let impurity_index = match self.impurity_index {
            Some(i) if i == Self::center(self.n_emitters) => Some(Self::center(n)),
            other => other,
        };
        AggregateSpec { n_emitters: n, impurity_index, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_emitters == 0 {
            return Err(Error::invalid("n_emitters must be >= 1"));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::invalid(format!("spacing must be > 0, got {}", self.spacing)));
        }
        if !(self.omega_bulk > 0.0) {
            return Err(Error::invalid("omega_bulk must be > 0"));
        }
        if !(self.omega_impurity > 0.0) {
            return Err(Error::invalid("omega_impurity must be > 0"));
        }
        if !(self.dielectric >= 1.0) {
            return Err(Error::invalid(format!("dielectric must be >= 1, got {}", self.dielectric)));
        }
        if !self.dipole_magnitude.is_finite() || self.impurity_dipole.is_some_and(|d| !d.is_finite()) {
            return Err(Error::invalid("dipole magnitudes must be finite"));
        }
        if let Some(i) = self.impurity_index {
            if i == 0 || i > self.n_emitters {
                return Err(Error::invalid(format!(
                    "impurity_index {i} outside [1, {}]",
                    self.n_emitters
                )));
            }
        }
        Ok(())
    }

    pub fn is_impurity(&self, site: usize) -> bool {
        self.impurity_index == Some(site)
    }

    /// Excitation energy of 1-based `site`.
    pub fn omega_of(&self, site: usize) -> f64 {
        if self.is_impurity(site) {
            self.omega_impurity
        } else {
            self.omega_bulk
        }
    }

    /// Dipole magnitude of 1-based `site`.
    pub fn dipole_of(&self, site: usize) -> f64 {
        if self.is_impurity(site) {
            self.impurity_dipole.unwrap_or(self.dipole_magnitude)
        } else {
            self.dipole_magnitude
        }
    }

    /// First and second solvation shells (A1, A2) of the impurity: the next
    /// sites toward the chain end with more room, the right side on ties.
    pub fn shells(&self) -> (Option<usize>, Option<usize>) {
        let Some(p) = self.impurity_index else {
            return (None, None);
        };
        let n = self.n_emitters;
        let right = n - p;
        let left = p - 1;
        let step = |k: usize| -> Option<usize> {
            if right >= left {
                (p + k <= n).then_some(p + k)
            } else {
                (k < p).then(|| p - k)
            }
        };
        (step(1), step(2))
    }

    /// Both nearest neighbors of the impurity.
    pub fn impurity_neighbors(&self) -> Vec<usize> {
        match self.impurity_index {
            Some(p) => [p.checked_sub(1), Some(p + 1)]
                .into_iter()
                .flatten()
                .filter(|&s| s >= 1 && s <= self.n_emitters)
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Single cavity mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CavitySpec {
    pub omega_ph: f64,
    /// Fundamental coupling `λ = sqrt(1/(ε₀ V))` in a.u.
    pub lambda: f64,
    pub polarization: Vec3,
}

impl CavitySpec {
    /// X-polarized mode.
    pub fn new(omega_ph: f64, lambda: f64) -> Self {
        CavitySpec { omega_ph, lambda, polarization: Vec3::X }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        CavitySpec { lambda, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_ph > 0.0) {
            return Err(Error::invalid("omega_ph must be > 0"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        check_unit(self.polarization)
    }
}

fn check_unit(v: Vec3) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("polarization {:?} is not a unit vector", v.0)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisLabel {
    Photon,
    /// 1-based chain site and 1-based replica.
    Emitter { site: usize, replica: usize },
}

impl BasisLabel {
    pub fn emitter(site: usize) -> Self {
        BasisLabel::Emitter { site, replica: 1 }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Photon => write!(f, "photon"),
            BasisLabel::Emitter { site, replica } => write!(f, "e{site}r{replica}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureHint {
    /// Nonzero off-diagonals only in the photon row and column.
    Arrowhead,
    /// Arrowhead plus couplings between consecutive sites of a replica.
    ArrowheadPlusTridiagonal,
    Dense,
}

/// Real symmetric Hamiltonian with a labeled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    entries: Array2<f64>,
    labels: Vec<BasisLabel>,
    structure_hint: StructureHint,
    impurity_site: Option<usize>,
}

impl ModelMatrix {
    pub fn new(
        entries: Array2<f64>,
        labels: Vec<BasisLabel>,
        structure_hint: StructureHint,
        impurity_site: Option<usize>,
    ) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::invalid(format!("matrix is {r}x{c}, not square")));
        }
        if r != labels.len() {
            return Err(Error::invalid(format!("{} labels for dimension {r}", labels.len())));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let asym = max_asymmetry(&entries);
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!("matrix is not symmetric (max deviation {asym:e})")));
        }
        if labels.iter().filter(|l| **l == BasisLabel::Photon).count() > 1 {
            return Err(Error::invalid("more than one photon label"));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate basis labels"));
        }
        let m = ModelMatrix { entries, labels, structure_hint, impurity_site };
        if !m.sparsity_matches_hint() {
            return Err(Error::invalid(format!(
                "sparsity pattern inconsistent with {structure_hint:?}"
            )));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn structure_hint(&self) -> StructureHint {
        self.structure_hint
    }

    pub fn impurity_site(&self) -> Option<usize> {
        self.impurity_site
    }

    pub fn photon_index(&self) -> Option<usize> {
        self.labels.iter().position(|l| *l == BasisLabel::Photon)
    }

    pub fn index_of(&self, label: BasisLabel) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }

    /// `(photon energy, emitter energies, couplings)` when the matrix is an
    /// arrowhead with the photon first.
    pub fn arrowhead_parts(&self) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        if self.structure_hint != StructureHint::Arrowhead || self.photon_index() != Some(0) {
            return None;
        }
        let n = self.dim();
        let diag = (1..n).map(|k| self.entries[[k, k]]).collect();
        let arrow = (1..n).map(|k| self.entries[[0, k]]).collect();
        Some((self.entries[[0, 0]], diag, arrow))
    }

    /// `D A D` with `D = diag(±1)` negating basis state `index`.
    pub fn with_flipped_sign(&self, index: usize) -> Self {
        let mut entries = self.entries.clone();
        entries.row_mut(index).mapv_inplace(|x| -x);
        entries.column_mut(index).mapv_inplace(|x| -x);
        ModelMatrix { entries, ..self.clone() }
    }

    /// `P A Pᵀ` where new position `i` holds old basis state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the basis"));
        }
        let entries = Array2::from_shape_fn((n, n), |(i, j)| self.entries[[perm[i], perm[j]]]);
        let labels = perm.iter().map(|&p| self.labels[p]).collect();
        ModelMatrix::new(entries, labels, StructureHint::Dense, self.impurity_site)
    }

    fn sparsity_matches_hint(&self) -> bool {
        let n = self.dim();
        let allowed = |i: usize, j: usize| -> bool {
            let (a, b) = (self.labels[i], self.labels[j]);
            if a == BasisLabel::Photon || b == BasisLabel::Photon {
                return true;
            }
            match self.structure_hint {
                StructureHint::Dense => true,
                StructureHint::Arrowhead => false,
                StructureHint::ArrowheadPlusTridiagonal => match (a, b) {
                    (
                        BasisLabel::Emitter { site: s1, replica: r1 },
                        BasisLabel::Emitter { site: s2, replica: r2 },
                    ) => r1 == r2 && s1.abs_diff(s2) == 1,
                    _ => unreachable!(),
                },
            }
        };
        (0..n).all(|i| (0..n).all(|j| i == j || self.entries[[i, j]] == 0.0 || allowed(i, j)))
    }
}

pub(crate) fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// Per-emitter disorder: energies, tilt angles and the resulting couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    pub omegas: Vec<f64>,
    /// Tilt from X in the XZ plane, in `[0, π/2]`.
    pub thetas: Vec<f64>,
    pub derived_couplings: Vec<f64>,
}

impl DisorderRealization {
    /// Realization for a plain disordered Tavis–Cummings model, with the
    /// couplings given directly and no tilt.
    pub fn from_couplings(omegas: Vec<f64>, couplings: Vec<f64>) -> Self {
        let thetas = vec![0.0; omegas.len()];
        DisorderRealization { omegas, thetas, derived_couplings: couplings }
    }

    /// Ordered (zero-disorder) realization of `spec` in `cavity`.
    pub fn ordered(spec: &AggregateSpec, cavity: &CavitySpec) -> Result<Self> {
        let n = spec.n_emitters;
        let omegas = (1..=n).map(|s| spec.omega_of(s)).collect();
        Self::from_angles(spec, cavity, omegas, vec![0.0; n])
    }

    /// Couplings `g̃_k = g̃₀ cos θ_k` are derived from the tilted dipoles.
    pub fn from_angles(
        spec: &AggregateSpec,
        cavity: &CavitySpec,
        omegas: Vec<f64>,
        thetas: Vec<f64>,
    ) -> Result<Self> {
        let geo = chain_geometry_with_angles(spec, &thetas)?;
        let derived_couplings = geo
            .dipole_vectors
            .iter()
            .map(|&mu| coupling_strength(cavity.omega_ph, cavity.lambda, mu, cavity.polarization))
            .collect::<Result<_>>()?;
        Ok(DisorderRealization { omegas, thetas, derived_couplings })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

/// Light–matter coupling `g̃₀ = sqrt(ω_ph/2) λ (d·ε̂)`; the sign is kept.
pub fn coupling_strength(omega_ph: f64, lambda: f64, dipole: Vec3, polarization: Vec3) -> Result<f64> {
    if !(omega_ph > 0.0) {
        return Err(Error::invalid("omega_ph must be > 0"));
    }
    check_unit(polarization)?;
    Ok((omega_ph / 2.0).sqrt() * lambda * dipole.dot(&polarization))
}

/// Generic arrowhead: photon energy first, then `diag[k]` coupled by `arrow[k]`.
pub fn build_arrowhead(omega_ph: f64, diag: &[f64], arrow: &[f64]) -> Result<ModelMatrix> {
    if diag.len() != arrow.len() {
        return Err(Error::invalid(format!(
            "{} emitter energies but {} couplings",
            diag.len(),
            arrow.len()
        )));
    }
    let n = diag.len() + 1;
    let mut a = Array2::zeros((n, n));
    a[[0, 0]] = omega_ph;
    for (k, (&w, &g)) in diag.iter().zip(arrow).enumerate() {
        a[[k + 1, k + 1]] = w;
        a[[0, k + 1]] = g;
        a[[k + 1, 0]] = g;
    }
    let labels = std::iter::once(BasisLabel::Photon)
        .chain((1..n).map(BasisLabel::emitter))
        .collect();
    ModelMatrix::new(a, labels, StructureHint::Arrowhead, None)
}

/// Jaynes–Cummings block in the basis `{photon, emitter 1}`.
pub fn build_jc(omega_mol: f64, omega_ph: f64, g: f64) -> ModelMatrix {
    build_arrowhead(omega_ph, &[omega_mol], &[g]).expect("2x2 arrowhead is always valid")
}

/// Tavis–Cummings: `n` identical emitters, each coupled by `g`.
pub fn build_tc(n: usize, omega: f64, omega_ph: f64, g: f64) -> Result<ModelMatrix> {
    if n == 0 {
        return Err(Error::invalid("Tavis-Cummings needs n >= 1"));
    }
    build_arrowhead(omega_ph, &vec![omega; n], &vec![g; n])
}

/// Tavis–Cummings with one impurity (energy `ω′`, coupling `g_impurity`) at
/// its chain position.
pub fn build_tc_impurity(
    spec: &AggregateSpec,
    cavity: &CavitySpec,
    g_bulk: f64,
    g_impurity: f64,
) -> Result<ModelMatrix> {
    spec.validate()?;
    cavity.validate()?;
    if spec.impurity_index.is_none() {
        return Err(Error::invalid("build_tc_impurity needs an impurity"));
    }
    let n = spec.n_emitters;
    let diag: Vec<f64> = (1..=n).map(|s| spec.omega_of(s)).collect();
    let arrow: Vec<f64> =
        (1..=n).map(|s| if spec.is_impurity(s) { g_impurity } else { g_bulk }).collect();
    let m = build_arrowhead(cavity.omega_ph, &diag, &arrow)?;
    Ok(ModelMatrix { impurity_site: spec.impurity_index, ..m })
}

/// Disordered Tavis–Cummings from per-emitter energies and couplings.
pub fn build_disordered_tc(realization: &DisorderRealization, omega_ph: f64) -> Result<ModelMatrix> {
    build_arrowhead(omega_ph, &realization.omegas, &realization.derived_couplings)
}

/// Cavity-free Frenkel exciton matrix of the chain.
pub fn build_kasha_exciton(spec: &AggregateSpec, mode: CouplingMode) -> Result<ModelMatrix> {
    spec.validate()?;
    if spec.n_emitters < 2 {
        return Err(Error::invalid("exciton model needs n >= 2"));
    }
    let n = spec.n_emitters;
    let geo = chain_geometry_with_angles(spec, &vec![0.0; n])?;
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        a[[i, i]] = spec.omega_of(i + 1);
        let partners = match mode {
            CouplingMode::NearestNeighbor => (i + 1)..(i + 2).min(n),
            CouplingMode::AllPairs => (i + 1)..n,
        };
        for j in partners {
            let v = geo.coupling(i, j, spec.dielectric)?;
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    let labels = (1..=n).map(BasisLabel::emitter).collect();
    let hint = match mode {
        CouplingMode::NearestNeighbor => StructureHint::ArrowheadPlusTridiagonal,
        CouplingMode::AllPairs => StructureHint::Dense,
    };
    ModelMatrix::new(a, labels, hint, spec.impurity_index)
}

/// Tavis–Cummings plus nearest-neighbor dipole–dipole couplings.
pub fn build_tc_kasha(spec: &AggregateSpec, cavity: &CavitySpec) -> Result<ModelMatrix> {
    build_replicated(spec, cavity, 1)
}

/// TC–Kasha with energy and orientational disorder: diagonal `ω(k)`, photon
/// coupling from the tilted dipoles and neighbor couplings recomputed for the
/// tilted dipoles.
pub fn build_tc_kasha_disordered(
    spec: &AggregateSpec,
    cavity: &CavitySpec,
    realization: &DisorderRealization,
) -> Result<ModelMatrix> {
    if realization.omegas.len() != spec.n_emitters || realization.thetas.len() != spec.n_emitters {
        return Err(Error::invalid(format!(
            "realization has {} energies and {} angles for {} emitters",
            realization.omegas.len(),
            realization.thetas.len(),
            spec.n_emitters
        )));
    }
    assemble_chain(spec, cavity, &realization.omegas, &realization.thetas, 1)
}

/// `n_rep` independent copies of the chain sharing one cavity mode.
pub fn build_replicated(spec: &AggregateSpec, cavity: &CavitySpec, n_rep: usize) -> Result<ModelMatrix> {
    if n_rep == 0 {
        return Err(Error::invalid("n_rep must be >= 1"));
    }
    let omegas: Vec<f64> = (1..=spec.n_emitters).map(|s| spec.omega_of(s)).collect();
    assemble_chain(spec, cavity, &omegas, &vec![0.0; spec.n_emitters], n_rep)
}

fn assemble_chain(
    spec: &AggregateSpec,
    cavity: &CavitySpec,
    omegas: &[f64],
    thetas: &[f64],
    n_rep: usize,
) -> Result<ModelMatrix> {
    spec.validate()?;
    cavity.validate()?;
    if spec.n_emitters < 2 {
        return Err(Error::invalid("TC-Kasha model needs n >= 2"));
    }
    let n = spec.n_emitters;
    let geo = chain_geometry_with_angles(spec, thetas)?;
    let arrow = geo
        .dipole_vectors
        .iter()
        .map(|&mu| coupling_strength(cavity.omega_ph, cavity.lambda, mu, cavity.polarization))
        .collect::<Result<Vec<_>>>()?;
    let hopping = geo.nearest_neighbor_couplings(spec.dielectric)?;

    let dim = n * n_rep + 1;
    let mut a = Array2::zeros((dim, dim));
    let mut labels = Vec::with_capacity(dim);
    a[[0, 0]] = cavity.omega_ph;
    labels.push(BasisLabel::Photon);
    for rep in 0..n_rep {
        let offset = 1 + rep * n;
        for k in 0..n {
            let i = offset + k;
            a[[i, i]] = omegas[k];
            a[[0, i]] = arrow[k];
            a[[i, 0]] = arrow[k];
            if k + 1 < n {
                a[[i, i + 1]] = hopping[k];
                a[[i + 1, i]] = hopping[k];
            }
            labels.push(BasisLabel::Emitter { site: k + 1, replica: rep + 1 });
        }
    }
    ModelMatrix::new(a, labels, StructureHint::ArrowheadPlusTridiagonal, spec.impurity_index)
}

/// Model family selected by name in configurations and scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelKind {
    /// One emitter (the first site of the spec) and the photon.
    Jc,
    /// Identical bulk emitters, no impurity, no dipole–dipole coupling.
    Tc,
    /// Bulk emitters plus the impurity, no dipole–dipole coupling.
    TcImpurity,
    #[default]
    TcKasha,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Jc => "jc",
            ModelKind::Tc => "tc",
            ModelKind::TcImpurity => "tc_impurity",
            ModelKind::TcKasha => "tc_kasha",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [ModelKind::Jc, ModelKind::Tc, ModelKind::TcImpurity, ModelKind::TcKasha]
            .into_iter()
            .find(|k| k.name() == name)
    }

    /// Builds the model. Only [`ModelKind::TcKasha`] supports `n_rep > 1`.
    pub fn build(self, spec: &AggregateSpec, cavity: &CavitySpec, n_rep: usize) -> Result<ModelMatrix> {
        if n_rep != 1 && self != ModelKind::TcKasha {
            return Err(Error::invalid(format!("model {} has no replicas", self.name())));
        }
        spec.validate()?;
        cavity.validate()?;
        let g = |mu: f64| coupling_strength(cavity.omega_ph, cavity.lambda, Vec3::X * mu, cavity.polarization);
        match self {
            ModelKind::Jc => Ok(build_jc(spec.omega_of(1), cavity.omega_ph, g(spec.dipole_of(1))?)),
            ModelKind::Tc => build_tc(spec.n_emitters, spec.omega_bulk, cavity.omega_ph, g(spec.dipole_magnitude)?),
            ModelKind::TcImpurity => {
                let p = spec
                    .impurity_index
                    .ok_or_else(|| Error::invalid("tc_impurity needs an impurity"))?;
                build_tc_impurity(spec, cavity, g(spec.dipole_magnitude)?, g(spec.dipole_of(p))?)
            }
            ModelKind::TcKasha => build_replicated(spec, cavity, n_rep),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::dense_symmetric_eig;
    use approx::assert_relative_eq;

    fn spectrum(m: &ModelMatrix) -> Vec<f64> {
        dense_symmetric_eig(m, 1e-12).unwrap().eigenvalues
    }

    fn assert_same_spectrum(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn coupling_strength_examples() {
        let w = 0.45929;
        let g = coupling_strength(w, 0.005, Vec3::X, Vec3::X).unwrap();
        assert_relative_eq!(g, 0.00239607, max_relative = 1e-5);
        assert_eq!(coupling_strength(w, 0.005, Vec3::Y, Vec3::X).unwrap(), 0.0);
        assert_eq!(coupling_strength(w, 0.005, -Vec3::X, Vec3::X).unwrap(), -g);
        assert!(coupling_strength(w, 0.005, Vec3::X, Vec3::new(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn default_energies() {
        let spec = AggregateSpec::h_chain(7, 5.0);
        assert_relative_eq!(spec.omega_bulk, 0.45929, max_relative = 1e-5);
        assert_relative_eq!(spec.omega_impurity, 0.45337, max_relative = 5e-5);
        assert_eq!(spec.impurity_index, Some(4));
        assert_eq!(spec.shells(), (Some(5), Some(6)));
        assert_eq!(AggregateSpec::h_chain(8, 5.0).shells(), (Some(5), Some(6)));
        assert_eq!(spec.impurity_neighbors(), vec![3, 5]);
    }

    #[test]
    fn shells_at_chain_end() {
        let mut spec = AggregateSpec::h_chain(5, 5.0);
        spec.impurity_index = Some(5);
        assert_eq!(spec.shells(), (Some(4), Some(3)));
        spec.impurity_index = Some(1);
        assert_eq!(spec.shells(), (Some(2), Some(3)));
        assert_eq!(spec.impurity_neighbors(), vec![2]);
    }

    #[test]
    fn spec_validation() {
        let mut spec = AggregateSpec::h_chain(4, 5.0);
        spec.spacing = -1.0;
        assert!(spec.validate().is_err());
        let mut spec = AggregateSpec::h_chain(4, 5.0);
        spec.impurity_index = Some(5);
        assert!(spec.validate().is_err());
        let mut cav = CavitySpec::new(0.5, 0.01);
        cav.polarization = Vec3::new(0.6, 0.8, 1e-13);
        assert!(cav.validate().is_ok());
        cav.polarization = Vec3::new(0.6, 0.8, 1e-3);
        assert!(cav.validate().is_err());
    }

    #[test]
    fn jc_matrix() {
        let m = build_jc(0.4, 0.5, 0.01);
        assert_eq!(m.entries()[[0, 0]], 0.5);
        assert_eq!(m.entries()[[1, 1]], 0.4);
        assert_eq!(m.entries()[[0, 1]], 0.01);
        assert_eq!(m.labels(), &[BasisLabel::Photon, BasisLabel::emitter(1)]);
        let e = spectrum(&build_jc(0.45929, 0.45929, 0.00239607));
        assert_relative_eq!(e[1] - e[0], 0.00479214, max_relative = 1e-6);
        let e = spectrum(&build_jc(0.5, 0.5, 0.0));
        assert_eq!(e, vec![0.5, 0.5]);
    }

    #[test]
    fn tc_reduces_to_jc() {
        assert_eq!(build_tc(1, 0.4, 0.5, 0.02).unwrap(), build_jc(0.4, 0.5, 0.02));
        assert!(build_tc(0, 0.4, 0.5, 0.02).is_err());
        let m = build_tc(3, 0.5, 0.5, 0.01).unwrap();
        assert_eq!(m.structure_hint(), StructureHint::Arrowhead);
        let s = 3f64.sqrt() * 0.01;
        assert_same_spectrum(&spectrum(&m), &[0.5 - s, 0.5, 0.5, 0.5 + s], 1e-14);
        let e = spectrum(&build_tc(2, 0.5, 0.5, 0.01).unwrap());
        assert_relative_eq!(e[2] - e[0], 0.0282843, epsilon = 1e-7);
    }

    #[test]
    fn impurity_tc() {
        let spec = AggregateSpec::h_chain(7, 5.0);
        let cav = CavitySpec::new(spec.omega_bulk, 0.005);
        let g = coupling_strength(cav.omega_ph, cav.lambda, Vec3::X, Vec3::X).unwrap();
        let m = build_tc_impurity(&spec, &cav, g, g).unwrap();
        assert_eq!(m.dim(), 8);
        assert_eq!(m.entries()[[4, 4]], spec.omega_impurity);
        assert_eq!(m.entries()[[1, 1]], spec.omega_bulk);

        let e = spectrum(&m);
        let at_bulk = e.iter().filter(|&&x| (x - spec.omega_bulk).abs() < 1e-12).count();
        assert_eq!(at_bulk, 5);
        let bright: Vec<f64> =
            e.iter().copied().filter(|&x| (x - spec.omega_bulk).abs() >= 1e-12).collect();
        assert_eq!(bright.len(), 3);
        assert!(bright[1] - bright[0] > 1e-6 && bright[2] - bright[1] > 1e-6);

        // a degenerate impurity reproduces plain TC
        let mut clean = spec.clone();
        clean.omega_impurity = clean.omega_bulk;
        let tc = build_tc(7, spec.omega_bulk, cav.omega_ph, g).unwrap();
        assert_same_spectrum(&spectrum(&build_tc_impurity(&clean, &cav, g, g).unwrap()), &spectrum(&tc), 1e-14);

        // a decoupled impurity keeps its bare energy
        let m = build_tc_impurity(&spec, &cav, g, 0.0).unwrap();
        let eig = dense_symmetric_eig(&m, 1e-12).unwrap();
        let k = eig
            .eigenvalues
            .iter()
            .position(|&x| (x - spec.omega_impurity).abs() < 1e-14)
            .unwrap();
        assert!((eig.eigenvectors[[4, k]].abs() - 1.0).abs() < 1e-12);

        let mut none = spec;
        none.impurity_index = None;
        assert!(build_tc_impurity(&none, &cav, g, g).is_err());
    }

    #[test]
    fn disordered_tc_examples() {
        let r = DisorderRealization::from_couplings(vec![0.5, 0.5], vec![0.01, 0.02]);
        let e = spectrum(&build_disordered_tc(&r, 0.5).unwrap());
        assert_same_spectrum(&e, &[0.5 - 0.0223607, 0.5, 0.5 + 0.0223607], 1e-7);

        let plus = DisorderRealization::from_couplings(vec![0.5, 0.5], vec![0.01, 0.01]);
        let minus = DisorderRealization::from_couplings(vec![0.5, 0.5], vec![0.01, -0.01]);
        assert_same_spectrum(
            &spectrum(&build_disordered_tc(&plus, 0.5).unwrap()),
            &spectrum(&build_disordered_tc(&minus, 0.5).unwrap()),
            1e-15,
        );

        let spread = DisorderRealization::from_couplings(vec![0.49, 0.51], vec![0.01, 0.01]);
        let e = spectrum(&build_disordered_tc(&spread, 0.5).unwrap());
        assert!(e[1] - e[0] > 1e-4 && e[2] - e[1] > 1e-4);
        assert!((0.49..=0.51).contains(&e[1]));

        let bad = DisorderRealization::from_couplings(vec![0.5, 0.5], vec![0.01]);
        assert!(build_disordered_tc(&bad, 0.5).is_err());
    }

    #[test]
    fn kasha_dimers() {
        let h = build_kasha_exciton(&AggregateSpec::h_chain(2, 5.0), CouplingMode::NearestNeighbor).unwrap();
        assert!(h.entries()[[0, 1]] > 0.0);
        assert!(h.photon_index().is_none());
        let j = build_kasha_exciton(&AggregateSpec::j_chain(2, 5.0), CouplingMode::NearestNeighbor).unwrap();
        assert!(j.entries()[[0, 1]] < 0.0);
        assert!(build_kasha_exciton(&AggregateSpec::h_chain(1, 5.0), CouplingMode::NearestNeighbor).is_err());

        // far apart: the site energies come back
        let far = AggregateSpec::h_chain(3, 1e7);
        let e = spectrum(&build_kasha_exciton(&far, CouplingMode::AllPairs).unwrap());
        assert_same_spectrum(&e, &[far.omega_impurity, far.omega_bulk, far.omega_bulk], 1e-15);
    }

    #[test]
    fn kasha_all_pairs_is_dense() {
        let spec = AggregateSpec::h_chain(5, 5.0);
        let m = build_kasha_exciton(&spec, CouplingMode::AllPairs).unwrap();
        assert_eq!(m.structure_hint(), StructureHint::Dense);
        assert!(m.entries()[[0, 4]] > 0.0);
        let nn = build_kasha_exciton(&spec, CouplingMode::NearestNeighbor).unwrap();
        assert_eq!(nn.entries()[[0, 2]], 0.0);
    }

    #[test]
    fn tc_kasha_without_coupling_splits_into_blocks() {
        let spec = AggregateSpec::h_chain(6, 5.0);
        let cav = CavitySpec::new(spec.omega_bulk, 0.0);
        let m = build_tc_kasha(&spec, &cav).unwrap();
        let exciton = build_kasha_exciton(&spec, CouplingMode::NearestNeighbor).unwrap();
        let block = m.entries().slice(ndarray::s![1.., 1..]).to_owned();
        assert_eq!(&block, exciton.entries());
        let mut expected = spectrum(&exciton);
        expected.push(cav.omega_ph);
        expected.sort_by(f64::total_cmp);
        assert_same_spectrum(&spectrum(&m), &expected, 1e-14);
    }

    #[test]
    fn tc_kasha_without_coulomb_is_impurity_tc() {
        let spec = AggregateSpec::h_chain(6, 5.0);
        let cav = CavitySpec::new(spec.omega_bulk, 0.005);
        let g = coupling_strength(cav.omega_ph, cav.lambda, Vec3::X, Vec3::X).unwrap();
        let mut m = build_tc_kasha(&spec, &cav).unwrap().entries().clone();
        for k in 1..m.nrows() - 1 {
            m[[k, k + 1]] = 0.0;
            m[[k + 1, k]] = 0.0;
        }
        assert_eq!(&m, build_tc_impurity(&spec, &cav, g, g).unwrap().entries());

        let far = AggregateSpec { spacing: 1e7, ..spec };
        let a = spectrum(&build_tc_kasha(&far, &cav).unwrap());
        let b = spectrum(&build_tc_impurity(&far, &cav, g, g).unwrap());
        assert_same_spectrum(&a, &b, 1e-15);
    }

    #[test]
    fn tc_kasha_layout() {
        let spec = AggregateSpec::h_chain(7, 5.0);
        let cav = CavitySpec::new(spec.omega_bulk, 0.005);
        let m = build_tc_kasha(&spec, &cav).unwrap();
        assert_eq!(m.structure_hint(), StructureHint::ArrowheadPlusTridiagonal);
        assert_eq!(m.impurity_site(), Some(4));
        assert_eq!(m.index_of(BasisLabel::emitter(4)), Some(4));
        assert_eq!(m.entries()[[4, 4]], spec.omega_impurity);
        let v = m.entries()[[1, 2]];
        assert_relative_eq!(v, (5.0 * crate::units::ANGSTROM_BOHR).powi(-3), max_relative = 1e-14);
        assert!(build_tc_kasha(&AggregateSpec::h_chain(1, 5.0), &cav).is_err());
    }

    #[test]
    fn impurity_dipole_override() {
        let mut spec = AggregateSpec::h_chain(5, 5.0);
        spec.impurity_dipole = Some(2.0);
        let cav = CavitySpec::new(spec.omega_bulk, 0.005);
        let m = build_tc_kasha(&spec, &cav).unwrap();
        assert_relative_eq!(m.entries()[[0, 3]], 2.0 * m.entries()[[0, 1]], max_relative = 1e-15);
        assert_relative_eq!(m.entries()[[2, 3]], 2.0 * m.entries()[[1, 2]], max_relative = 1e-15);
    }

    #[test]
    fn disordered_tc_kasha() {
        let spec = AggregateSpec::h_chain(6, 5.0);
        let cav = CavitySpec::new(spec.omega_bulk, 0.005);
        let ordered = DisorderRealization::ordered(&spec, &cav).unwrap();
        assert_eq!(
            build_tc_kasha_disordered(&spec, &cav, &ordered).unwrap(),
            build_tc_kasha(&spec, &cav).unwrap()
        );

        let mut thetas = vec![0.0; 6];
        thetas[0] = std::f64::consts::FRAC_PI_2;
        thetas[5] = std::f64::consts::FRAC_PI_2;
        let r = DisorderRealization::from_angles(&spec, &cav, ordered.omegas.clone(), thetas).unwrap();
        let m = build_tc_kasha_disordered(&spec, &cav, &r).unwrap();
        assert!(m.entries()[[0, 1]].abs() < 1e-18);
        assert!(m.entries()[[0, 6]].abs() < 1e-18);
        assert!(r.derived_couplings[0].abs() < 1e-18);
        // tilted by 90 degrees relative to its neighbor: no Coulomb coupling
        assert!(m.entries()[[1, 2]].abs() < 1e-18);

        let short = DisorderRealization::from_couplings(vec![0.5; 5], vec![0.0; 5]);
        assert!(build_tc_kasha_disordered(&spec, &cav, &short).is_err());
    }

    #[test]
    fn replicas() {
        let spec = AggregateSpec::h_chain(5, 5.0);
        let cav = CavitySpec::new(spec.omega_bulk, 0.005);
        assert_eq!(build_replicated(&spec, &cav, 1).unwrap(), build_tc_kasha(&spec, &cav).unwrap());
        let m = build_replicated(&spec, &cav, 3).unwrap();
        assert_eq!(m.dim(), 16);
        assert_eq!(m.labels()[6], BasisLabel::Emitter { site: 1, replica: 2 });
        assert_eq!(m.entries()[[5, 6]], 0.0);
        assert!(build_replicated(&spec, &cav, 0).is_err());

        let dark = build_replicated(&spec, &cav.with_lambda(0.0), 4).unwrap();
        let single = spectrum(&build_kasha_exciton(&spec, CouplingMode::NearestNeighbor).unwrap());
        let mut expected: Vec<f64> = single.iter().flat_map(|&e| [e; 4]).collect();
        expected.push(cav.omega_ph);
        expected.sort_by(f64::total_cmp);
        assert_same_spectrum(&spectrum(&dark), &expected, 1e-14);
    }

    #[test]
    fn rejects_bad_matrices() {
        let a = ndarray::arr2(&[[1.0, 2.0], [2.0 + 1e-10, 1.0]]);
        let labels = vec![BasisLabel::Photon, BasisLabel::emitter(1)];
        assert!(ModelMatrix::new(a, labels.clone(), StructureHint::Dense, None).is_err());
        let a = ndarray::arr2(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.1], [0.0, 0.1, 1.0]]);
        let labels3 = vec![BasisLabel::Photon, BasisLabel::emitter(1), BasisLabel::emitter(2)];
        assert!(ModelMatrix::new(a.clone(), labels3.clone(), StructureHint::Arrowhead, None).is_err());
        assert!(ModelMatrix::new(a.clone(), labels3, StructureHint::ArrowheadPlusTridiagonal, None).is_ok());
        let dup = vec![BasisLabel::Photon, BasisLabel::emitter(1), BasisLabel::emitter(1)];
        assert!(ModelMatrix::new(a, dup, StructureHint::Dense, None).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arrowhead() -> impl Strategy<Value = ModelMatrix> {
            (1usize..8).prop_flat_map(|n| {
                (
                    0.3f64..0.7,
                    prop::collection::vec(0.3f64..0.7, n),
                    prop::collection::vec(-0.05f64..0.05, n),
                )
                    .prop_map(|(w, d, g)| build_arrowhead(w, &d, &g).unwrap())
            })
        }

        proptest! {
            #[test]
            fn builders_are_symmetric(n in 2usize..12, d in 3.0f64..9.0, lam in 0.0f64..0.02, j in any::<bool>()) {
                let spec = if j { AggregateSpec::j_chain(n, d) } else { AggregateSpec::h_chain(n, d) };
                let cav = CavitySpec::new(spec.omega_bulk, lam);
                for m in [
                    build_tc_kasha(&spec, &cav).unwrap(),
                    build_replicated(&spec, &cav, 2).unwrap(),
                    build_kasha_exciton(&spec, CouplingMode::AllPairs).unwrap(),
                ] {
                    prop_assert!(max_asymmetry(m.entries()) <= 1e-14);
                }
            }

            #[test]
            fn sign_flip_keeps_spectrum(m in arrowhead(), k in 1usize..8) {
                let k = k % m.dim();
                let flipped = m.with_flipped_sign(k);
                let a = spectrum(&m);
                let b = spectrum(&flipped);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }

            #[test]
            fn permutation_keeps_spectrum(n in 2usize..9, seed in any::<u64>()) {
                let spec = AggregateSpec::h_chain(n, 5.0);
                let m = build_tc_kasha(&spec, &CavitySpec::new(spec.omega_bulk, 0.01)).unwrap();
                let mut perm: Vec<usize> = (0..m.dim()).collect();
                // Fisher-Yates driven by an LCG, deterministic in the seed
                let mut s = seed;
                for i in (1..perm.len()).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    perm.swap(i, (s >> 33) as usize % (i + 1));
                }
                let p = m.permuted(&perm).unwrap();
                for (i, &pi) in perm.iter().enumerate() {
                    prop_assert_eq!(p.labels()[i], m.labels()[pi]);
                }
                let a = spectrum(&m);
                let b = spectrum(&p);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() <= 1e-13);
                }
            }
        }
    }
}
