//! Arrowhead (Tavis–Cummings family) eigensolver.
//!
//! The matrix has the photon energy `diag[0]` in the corner, the emitter
//! energies `diag[1..]` on the diagonal and the couplings `arrow` in the
//! border. Emitters with vanishing coupling are split off as localized
//! eigenvectors. Emitters with equal energies are rotated into one bright
//! combination with coupling `sqrt(Σ g²)` plus dark states that sit exactly
//! at the group energy. The remaining eigenvalues are the roots of
//! `f(E) = Σ g_k²/(ω_k − E) − (ω_ph − E)`, one per pole-separated interval,
//! bracketed relative to the nearer pole and bisected to full precision.
//! Eigenvectors follow from `c_k ∝ g_k/(E − ω_k)` with the couplings
//! recomputed from the computed roots (Löwner's formula), which keeps the
//! vectors orthogonal when a root sits close to a pole.

use ndarray::Array2;

use super::{finalize, EigenDecomposition};
use crate::model::DisorderRealization;
use crate::{Error, Result};

/// Emitters whose energies agree to this relative tolerance share a pole.
pub const GROUPING_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 4096;

fn check_shapes(diag: &[f64], arrow: &[f64]) -> Result<()> {
    if diag.is_empty() || diag.len() != arrow.len() + 1 {
        return Err(Error::invalid(format!(
            "arrowhead needs len(diag) = len(arrow) + 1, got {} and {}",
            diag.len(),
            arrow.len()
        )));
    }
    if diag.iter().chain(arrow).any(|x| !x.is_finite()) {
        return Err(Error::invalid("arrowhead has non-finite entries"));
    }
    Ok(())
}

/// `Σ g_k²/(ω_k − e) − (ω_ph − e)` with `diag = (ω_ph, ω_1, …)`.
pub fn secular_eval(e: f64, diag: &[f64], arrow: &[f64]) -> Result<f64> {
    check_shapes(diag, arrow)?;
    let mut sum = 0.0;
    for (&w, &g) in diag[1..].iter().zip(arrow) {
        if g == 0.0 {
            continue;
        }
        if w == e {
            return Err(Error::Pole { pole: w });
        }
        sum += g * g / (w - e);
    }
    Ok(sum - (diag[0] - e))
}

/// First-order polariton energies `(ω₋, ω₊)` for emitters detuned by
/// `ε_k = ω_k − ω_ph` from a resonant cavity:
/// `ω± = ω_ph ± sqrt(Σ g²) + ½ Σ ε_k g_k² / Σ g_k²`.
pub fn perturbative_polariton_energies(
    realization: &DisorderRealization,
    omega_ph: f64,
) -> Result<(f64, f64)> {
    let g = &realization.derived_couplings;
    if g.len() != realization.omegas.len() {
        return Err(Error::invalid("realization energies and couplings differ in length"));
    }
    let g2: f64 = g.iter().map(|x| x * x).sum();
    if g2 == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    let weighted: f64 =
        realization.omegas.iter().zip(g).map(|(w, x)| (w - omega_ph) * x * x).sum::<f64>() / g2;
    let split = g2.sqrt();
    Ok((omega_ph - split + 0.5 * weighted, omega_ph + split + 0.5 * weighted))
}

struct Pole {
    energy: f64,
    coupling: f64,
    members: Vec<usize>,
    /// Unit weights of the members in the bright combination.
    weights: Vec<f64>,
}

/// Eigen-decomposition of the arrowhead matrix `diag = (ω_ph, ω_1, …, ω_N)`,
/// `arrow = (g_1, …, g_N)`. Never fails for valid finite input unless the
/// residual exceeds `tol · ‖A‖_F`.
pub fn arrowhead_eig(diag: &[f64], arrow: &[f64], tol: f64) -> Result<EigenDecomposition> {
    check_shapes(diag, arrow)?;
    let n = diag.len();
    let alpha = diag[0];
    let omegas = &diag[1..];
    let scale = (diag.iter().map(|x| x * x).sum::<f64>()
        + 2.0 * arrow.iter().map(|x| x * x).sum::<f64>())
    .sqrt();

    let mut values = Vec::with_capacity(n);
    let mut vectors = Array2::zeros((n, n));
    let mut col = 0;

    let zero_coupling = f64::EPSILON * scale;
    let mut active = Vec::new();
    for (k, &g) in arrow.iter().enumerate() {
        if g.abs() <= zero_coupling {
            values.push(omegas[k]);
            vectors[[k + 1, col]] = 1.0;
            col += 1;
        } else {
            active.push(k);
        }
    }
    active.sort_by(|&i, &j| omegas[i].total_cmp(&omegas[j]).then(i.cmp(&j)));

    let mut poles: Vec<Pole> = Vec::new();
    for &k in &active {
        match poles.last_mut() {
            Some(p) if (omegas[k] - p.energy).abs() <= GROUPING_TOL * p.energy.abs() => {
                p.members.push(k)
            }
            _ => poles.push(Pole { energy: omegas[k], coupling: 0.0, members: vec![k], weights: vec![] }),
        }
    }
    for pole in &mut poles {
        let g: Vec<f64> = pole.members.iter().map(|&k| arrow[k]).collect();
        let big = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let norm = big * g.iter().map(|x| (x / big).powi(2)).sum::<f64>().sqrt();
        pole.coupling = norm;
        pole.weights = g.iter().map(|x| x / norm).collect();

        // Householder reflector mapping the weights onto ±e₀; its remaining
        // columns span the dark states of the group.
        let m = pole.members.len();
        if m > 1 {
            let mut v = pole.weights.clone();
            v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
            let vv: f64 = v.iter().map(|x| x * x).sum();
            for j in 1..m {
                for (i, &k) in pole.members.iter().enumerate() {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    vectors[[k + 1, col]] = delta - 2.0 * v[i] * v[j] / vv;
                }
                values.push(pole.energy);
                col += 1;
            }
        }
    }

    if poles.is_empty() {
        values.push(alpha);
        vectors[[0, col]] = 1.0;
    } else {
        let roots = secular_roots(alpha, &poles);
        let refined = lowner_couplings(&poles, &roots);
        for &(origin, tau) in &roots {
            let o = poles[origin].energy;
            let mut x = vec![0.0; poles.len()];
            let mut norm2 = 1.0;
            for (i, pole) in poles.iter().enumerate() {
                // E − ω_i, computed relative to the bracketing pole
                let gap = (o - pole.energy) + tau;
                x[i] = refined[i] / gap;
                norm2 += x[i] * x[i];
            }
            let norm = norm2.sqrt();
            vectors[[0, col]] = 1.0 / norm;
            for (pole, xi) in poles.iter().zip(&x) {
                for (&k, w) in pole.members.iter().zip(&pole.weights) {
                    vectors[[k + 1, col]] = xi * w / norm;
                }
            }
            values.push(o + tau);
            col += 1;
        }
    }
    debug_assert_eq!(col + usize::from(poles.is_empty()), n);

    finalize(values, vectors, scale, tol, |v| {
        let mut av = Array2::zeros(v.raw_dim());
        for c in 0..v.ncols() {
            let mut top = alpha * v[[0, c]];
            for k in 0..omegas.len() {
                top += arrow[k] * v[[k + 1, c]];
                av[[k + 1, c]] = arrow[k] * v[[0, c]] + omegas[k] * v[[k + 1, c]];
            }
            av[[0, c]] = top;
        }
        av
    })
}

/// Roots of the reduced secular equation as `(pole index, offset)` pairs,
/// `E = poles[index].energy + offset`, in ascending order.
fn secular_roots(alpha: f64, poles: &[Pole]) -> Vec<(usize, f64)> {
    let p = poles.len();
    let g2: Vec<f64> = poles.iter().map(|q| q.coupling * q.coupling).collect();
    let gnorm = g2.iter().sum::<f64>().sqrt();
    let slack = gnorm * (1.0 + 1e-8) + f64::EPSILON * alpha.abs().max(poles[p - 1].energy.abs());
    let lo_bound = alpha.min(poles[0].energy) - slack;
    let hi_bound = alpha.max(poles[p - 1].energy) + slack;

    let f = |origin: usize, tau: f64| -> f64 {
        let o = poles[origin].energy;
        let mut sum = 0.0;
        for (q, w2) in poles.iter().zip(&g2) {
            sum += w2 / ((q.energy - o) - tau);
        }
        sum - ((alpha - o) - tau)
    };

    let mut roots = Vec::with_capacity(p + 1);
    roots.push((0, bisect(|t| f(0, t), lo_bound - poles[0].energy, 0.0)));
    for j in 1..p {
        let (left, right) = (poles[j - 1].energy, poles[j].energy);
        let mid = 0.5 * (left + right);
        if f(j - 1, mid - left) >= 0.0 {
            roots.push((j - 1, bisect(|t| f(j - 1, t), 0.0, mid - left)));
        } else {
            roots.push((j, bisect(|t| f(j, t), mid - right, 0.0)));
        }
    }
    roots.push((p - 1, bisect(|t| f(p - 1, t), 0.0, hi_bound - poles[p - 1].energy)));
    roots
}

/// Root of an increasing function on the open interval `(lo, hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Couplings for which the computed roots are exact eigenvalues:
/// `ĝ_i² = Π_j |λ_j − ω_i| / Π_{k≠i} |ω_k − ω_i|`, with the sign of `g_i`.
fn lowner_couplings(poles: &[Pole], roots: &[(usize, f64)]) -> Vec<f64> {
    let diff = |j: usize, i: usize| -> f64 {
        let (origin, tau) = roots[j];
        ((poles[origin].energy - poles[i].energy) + tau).abs()
    };
    (0..poles.len())
        .map(|i| {
            let wi = poles[i].energy;
            let mut prod = diff(i, i) * diff(i + 1, i);
            for k in 0..i {
                prod *= diff(k, i) / (poles[k].energy - wi).abs();
            }
            for k in (i + 1)..poles.len() {
                prod *= diff(k + 1, i) / (poles[k].energy - wi).abs();
            }
            let refined = prod.sqrt();
            if refined.is_finite() && refined > 0.0 {
                refined
            } else {
                poles[i].coupling
            }
        })
        .collect()
}
