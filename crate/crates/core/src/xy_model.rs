//! Periodic quantum XY chain
//!
//! `H = -J sum_i [(1+g)/2 X_i X_{i+1} + (1-g)/2 Y_i Y_{i+1} + (h/J) Z_i]`, site `n` identified
//! with site 0, solved three ways: dense diagonalization inside the two parity sectors of
//! `prod_i Z_i`, the Jordan-Wigner free-fermion spectrum, and the thermodynamic-limit
//! `<S^x_0 S^x_r>` correlator from a Toeplitz determinant.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quantum::{
    c, sigma_x, sigma_y, sigma_z, CMatrix, DensityMatrix, LocalTerm, Observable, MAX_QUBITS,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XYParams {
    pub n: usize,
    pub j: f64,
    pub gamma: f64,
    pub h_over_j: f64,
}

impl XYParams {
    pub fn new(n: usize, j: f64, gamma: f64, h_over_j: f64) -> Result<Self> {
        let p = XYParams {
            n,
            j,
            gamma,
            h_over_j,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!(
                "chain needs at least 2 sites, got {}",
                self.n
            )));
        }
        if !(self.j.is_finite() && self.j > 0.0) {
            return Err(invalid(format!(
                "coupling J must be positive, got {}",
                self.j
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid(format!(
                "anisotropy must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !self.h_over_j.is_finite() {
            return Err(invalid("field must be finite"));
        }
        Ok(())
    }

    pub fn with_field(&self, h_over_j: f64) -> Self {
        XYParams { h_over_j, ..*self }
    }

    fn dense_check(&self) -> Result<()> {
        self.check()?;
        if self.n > MAX_QUBITS {
            return Err(invalid(format!(
                "{} sites exceed the dense limit of {MAX_QUBITS}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Nonzero entries of `H` in row `i` (excluding the diagonal), plus the diagonal.
fn row_entries(p: &XYParams, i: usize, mut off: impl FnMut(usize, f64)) -> f64 {
    let n = p.n;
    let bit = |q: usize| 1usize << (n - 1 - q);
    let bonds = if n == 2 { 2 } else { n };
    for s in 0..bonds {
        let (a, b) = (bit(s), bit((s + 1) % n));
        let same = (i & a != 0) == (i & b != 0);
        off(i ^ a ^ b, -p.j * if same { p.gamma } else { 1.0 });
    }
    let down = (i.count_ones()) as f64;
    -p.h_over_j * p.j * (n as f64 - 2.0 * down)
}

/// Full `2^n` Hamiltonian. Its entries are real.
pub fn build_hamiltonian(p: &XYParams) -> Result<CMatrix> {
    p.dense_check()?;
    let dim = 1usize << p.n;
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let d = row_entries(p, i, |k, v| h[(i, k)] += c(v));
        h[(i, i)] += c(d);
    }
    Ok(h)
}

/// The Hamiltonian as a sum of two-site bond terms and one-site field terms.
pub fn hamiltonian_observable(p: &XYParams) -> Result<Observable> {
    p.dense_check()?;
    let bond = (sigma_x().kronecker(&sigma_x()) * c((1.0 + p.gamma) / 2.0)
        + sigma_y().kronecker(&sigma_y()) * c((1.0 - p.gamma) / 2.0))
        * c(-p.j);
    let mut terms = Vec::with_capacity(2 * p.n);
    let bonds = if p.n == 2 { 2 } else { p.n };
    for s in 0..bonds {
        terms.push(LocalTerm::new(vec![s, (s + 1) % p.n], bond.clone())?);
    }
    if p.h_over_j != 0.0 {
        for s in 0..p.n {
            terms.push(LocalTerm::new(vec![s], sigma_z() * c(-p.h_over_j * p.j))?);
        }
    }
    Observable::new(p.n, terms)
}

/// Basis indices and real Hamiltonian block of the sector with `popcount % 2 == parity`.
fn parity_block(p: &XYParams, parity: u32) -> (Vec<usize>, DMatrix<f64>) {
    let dim = 1usize << p.n;
    let states: Vec<usize> = (0..dim).filter(|i| i.count_ones() % 2 == parity).collect();
    let mut position = vec![usize::MAX; dim];
    for (k, &s) in states.iter().enumerate() {
        position[s] = k;
    }
    let mut block = DMatrix::zeros(states.len(), states.len());
    for (r, &s) in states.iter().enumerate() {
        let d = row_entries(p, s, |t, v| block[(r, position[t])] += v);
        block[(r, r)] += d;
    }
    (states, block)
}

/// Lowest eigenvalue by dense diagonalization of both parity blocks.
pub fn ground_energy_ed(p: &XYParams) -> Result<f64> {
    p.dense_check()?;
    let mut best = f64::INFINITY;
    for parity in 0..2 {
        let (_, block) = parity_block(p, parity);
        let ev = block.symmetric_eigenvalues();
        best = best.min(ev.iter().copied().fold(f64::INFINITY, f64::min));
    }
    if !best.is_finite() {
        return Err(Error::Eigensolver("no finite eigenvalue".into()));
    }
    Ok(best)
}

/// Eigenvalues closer than this (relative to `1 + |E_0|`) count as one degenerate level.
const DEGENERACY_TOL: f64 = 1e-9;

/// Ground energy and ground-state density matrix. A degenerate ground space gives the
/// equal-weight mixture of an orthonormal basis of it.
pub fn ground_state_ed(p: &XYParams) -> Result<(f64, DensityMatrix)> {
    p.dense_check()?;
    let dim = 1usize << p.n;
    let mut pairs: Vec<(f64, DVector<f64>, Vec<usize>)> = Vec::new();
    for parity in 0..2 {
        let (states, block) = parity_block(p, parity);
        let eig = block.symmetric_eigen();
        for (k, &e) in eig.eigenvalues.iter().enumerate() {
            pairs.push((e, eig.eigenvectors.column(k).into_owned(), states.clone()));
        }
    }
    let e0 = pairs.iter().map(|t| t.0).fold(f64::INFINITY, f64::min);
    if !e0.is_finite() {
        return Err(Error::Eigensolver("no finite eigenvalue".into()));
    }
    let ground: Vec<_> = pairs
        .iter()
        .filter(|t| t.0 - e0 <= DEGENERACY_TOL * (1.0 + e0.abs()))
        .collect();
    let weight = 1.0 / ground.len() as f64;
    let mut rho = CMatrix::zeros(dim, dim);
    for (_, v, states) in &ground {
        for (a, &sa) in states.iter().enumerate() {
            if v[a] == 0.0 {
                continue;
            }
            for (b, &sb) in states.iter().enumerate() {
                rho[(sa, sb)] += Complex64::new(weight * v[a] * v[b], 0.0);
            }
        }
    }
    Ok((e0, DensityMatrix::from_matrix_unchecked(rho)?))
}

/// Vacuum energies of the even and odd fermion-parity sectors, each with its parity
/// constraint enforced.
pub fn sector_energies(p: &XYParams) -> (f64, f64) {
    (sector_energy(p, false), sector_energy(p, true))
}

/// `odd` selects periodic momenta `2 pi m / n` and odd parity; otherwise antiperiodic
/// momenta `2 pi (m + 1/2) / n` and even parity.
fn sector_energy(p: &XYParams, odd: bool) -> f64 {
    let n = p.n;
    let (j, g, gamma) = (p.j, p.h_over_j, p.gamma);
    let mut energy = -(n as f64) * g * j;
    let mut vacuum_odd = false;
    let mut gap = f64::INFINITY;
    // k = pi * q / n with q even (periodic) or odd (antiperiodic), 0 <= q < 2n.
    for q in (usize::from(!odd)..2 * n).step_by(2) {
        let k = PI * q as f64 / n as f64;
        let a = 2.0 * j * (g - k.cos());
        if q == 0 || q == n {
            if a < 0.0 {
                energy += a;
                vacuum_odd = !vacuum_odd;
            }
            gap = gap.min(a.abs());
        } else if q < n {
            let s = k.sin();
            let e = 2.0 * j * ((g - k.cos()).powi(2) + gamma * gamma * s * s).sqrt();
            energy += a - e;
            gap = gap.min(e);
        }
    }
    if vacuum_odd != odd {
        energy += gap;
    }
    energy
}

/// Ground energy from the free-fermion solution; any chain length.
pub fn ground_energy_ff(p: &XYParams) -> f64 {
    let (even, odd) = sector_energies(p);
    even.min(odd)
}

/// Fields where the even and odd sector vacua exchange roles, for fixed `n`, `J`, `gamma`.
///
/// The field range is scanned at `resolution` intervals and every sign change of
/// `E_even - E_odd` is bisected; scan points with `|E_even - E_odd| <= 1e-12` count as roots.
pub fn sector_crossings(p: &XYParams, h_range: (f64, f64), resolution: usize) -> Result<Vec<f64>> {
    p.check()?;
    let (lo, hi) = h_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("bad field range ({lo}, {hi})")));
    }
    if resolution < 100 {
        return Err(invalid(format!(
            "resolution must be at least 100, got {resolution}"
        )));
    }
    let diff = |h: f64| {
        let (e, o) = sector_energies(&p.with_field(h));
        e - o
    };
    let hs: Vec<f64> = (0..=resolution)
        .map(|i| lo + (hi - lo) * i as f64 / resolution as f64)
        .collect();
    let ds: Vec<f64> = hs.iter().map(|&h| diff(h)).collect();
    let mut roots = Vec::new();
    for i in 0..hs.len() {
        if ds[i].abs() <= 1e-12 {
            roots.push(hs[i]);
            continue;
        }
        if i + 1 < hs.len() && ds[i + 1].abs() > 1e-12 && ds[i].signum() != ds[i + 1].signum() {
            let (mut a, mut b, mut da) = (hs[i], hs[i + 1], ds[i]);
            for _ in 0..200 {
                if b - a <= 1e-13 {
                    break;
                }
                let mid = 0.5 * (a + b);
                let dm = diff(mid);
                if dm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if dm.signum() == da.signum() {
                    a = mid;
                    da = dm;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    roots.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::new();
    for r in roots {
        match merged.last() {
            Some(&last) if r - last <= 1e-6 => {}
            _ => merged.push(r),
        }
    }
    Ok(merged)
}

/// Result of the Toeplitz evaluation of the long-range correlator.
#[derive(Clone, Debug, Serialize)]
pub struct LongRange {
    /// Best estimate of `lim_r <S^x_0 S^x_r>`.
    pub value: f64,
    /// Whether the r = 64 and r = 128 values agree within 1e-6.
    pub converged: bool,
    /// `(r, <S^x_0 S^x_r>)` at the evaluated separations.
    pub finite_r: Vec<(usize, f64)>,
}

const TOEPLITZ_R: [usize; 3] = [32, 64, 128];
const SYMBOL_POINTS: usize = 8192;

fn check_correlator_args(gamma: f64, h_over_j: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!(
            "anisotropy must lie in (0, 1], got {gamma}"
        )));
    }
    if !h_over_j.is_finite() {
        return Err(invalid("field must be finite"));
    }
    Ok(())
}

/// Fourier coefficients `G_l`, `l = -r_max + 1 ..= r_max + 1`, of the symbol
/// `(cos k - g + i gamma sin k) / |cos k - g + i gamma sin k|` on a midpoint k-grid.
fn symbol_coefficients(gamma: f64, g: f64, r_max: usize) -> Vec<f64> {
    let ks: Vec<(f64, f64)> = (0..SYMBOL_POINTS)
        .map(|t| {
            let k = -PI + 2.0 * PI * (t as f64 + 0.5) / SYMBOL_POINTS as f64;
            let z = Complex64::new(k.cos() - g, gamma * k.sin());
            (k, z.im.atan2(z.re))
        })
        .collect();
    let lo = -(r_max as i64) + 1;
    let hi = r_max as i64 + 1;
    (lo..=hi)
        .map(|l| {
            // phi = exp(i theta), so Re(e^{-ikl} phi) = cos(theta - k l).
            let s: f64 = ks
                .iter()
                .map(|&(k, theta)| (theta - k * l as f64).cos())
                .sum();
            s / SYMBOL_POINTS as f64
        })
        .collect()
}

fn toeplitz_value(coeffs: &[f64], r_max: usize, r: usize) -> f64 {
    let offset = r_max as i64 - 1;
    let t = DMatrix::from_fn(r, r, |i, j| {
        coeffs[(i as i64 - j as i64 + 1 + offset) as usize]
    });
    t.lu().determinant() / 4.0
}

/// Thermodynamic-limit `lim_r <S^x_0 S^x_r>` in the ground state, with the sign fixed so
/// that the fully polarized Ising point gives `+1/4`.
///
/// Evaluated as `det T_r / 4` at r = 32, 64, 128. When the last two differ by more than
/// 1e-6, the result is flagged unconverged and Aitken's extrapolation of the three values
/// is returned.
pub fn longrange_xx(gamma: f64, h_over_j: f64) -> Result<LongRange> {
    check_correlator_args(gamma, h_over_j)?;
    let r_max = TOEPLITZ_R[TOEPLITZ_R.len() - 1];
    let coeffs = symbol_coefficients(gamma, h_over_j, r_max);
    let finite_r: Vec<(usize, f64)> = TOEPLITZ_R
        .iter()
        .map(|&r| (r, toeplitz_value(&coeffs, r_max, r)))
        .collect();
    let (v0, v1, v2) = (finite_r[0].1, finite_r[1].1, finite_r[2].1);
    let converged = (v2 - v1).abs() <= 1e-6;
    let value = if converged {
        v2
    } else {
        let denom = (v2 - v1) - (v1 - v0);
        let aitken = if denom.abs() > 1e-300 {
            v2 - (v2 - v1).powi(2) / denom
        } else {
            v2
        };
        if aitken.is_finite() {
            aitken.clamp(0.0, 0.25)
        } else {
            v2
        }
    };
    Ok(LongRange {
        value,
        converged,
        finite_r,
    })
}

/// Closed form of the same limit:
/// `(1/4) * 2 sqrt(gamma) / (1 + gamma) * (1 - g^2)^(1/4)` for `|g| < 1`, zero otherwise.
/// Also defined at `gamma = 0`, where it vanishes.
pub fn longrange_xx_closed_form(gamma: f64, h_over_j: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!(
            "anisotropy must lie in [0, 1], got {gamma}"
        )));
    }
    if !h_over_j.is_finite() {
        return Err(invalid("field must be finite"));
    }
    let g = h_over_j;
    if g.abs() >= 1.0 {
        return Ok(0.0);
    }
    Ok(0.25 * 2.0 * gamma.sqrt() / (1.0 + gamma) * (1.0 - g * g).powf(0.25))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{expectation, hermiticity_residual};

    fn xy(n: usize, gamma: f64, h: f64) -> XYParams {
        XYParams::new(n, 1.0, gamma, h).unwrap()
    }

    #[test]
    fn two_site_ising() {
        let p = xy(2, 1.0, 0.0);
        assert!((ground_energy_ed(&p).unwrap() + 2.0).abs() < 1e-12);
        assert!((ground_energy_ff(&p) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_is_hermitian_and_traceless() {
        let h = build_hamiltonian(&xy(5, 1.0 / 3.0, 0.5)).unwrap();
        assert_eq!(hermiticity_residual(&h), 0.0);
        assert!(h.trace().norm() < 1e-12);
        assert!(h.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn observable_matches_dense_builder() {
        for n in [2, 3, 4] {
            let p = XYParams::new(n, 1.3, 0.4, -0.7).unwrap();
            let a = hamiltonian_observable(&p).unwrap().to_matrix().unwrap();
            let b = build_hamiltonian(&p).unwrap();
            assert!(
                crate::quantum::linf_entry_norm(&a, &b).unwrap() < 1e-14,
                "n = {n}"
            );
        }
    }

    #[test]
    fn ising_point_energy() {
        for n in 2..=8 {
            let (e, rho) = ground_state_ed(&xy(n, 1.0, 0.0)).unwrap();
            assert!((e / n as f64 + 1.0).abs() < 1e-12);
            assert!(rho.validate(&Default::default()).passed);
        }
    }

    #[test]
    fn strong_field_asymptote() {
        let e = ground_energy_ed(&xy(5, 0.6, 10.0)).unwrap() / 5.0;
        assert!((e + 10.0).abs() < 0.2);
    }

    #[test]
    fn ground_state_expectation_matches_energy() {
        let p = xy(5, 1.0 / 3.0, 0.0);
        let (e, rho) = ground_state_ed(&p).unwrap();
        let h = hamiltonian_observable(&p).unwrap();
        assert!((expectation(&h, &rho).unwrap() - e).abs() < 1e-10);
    }

    #[test]
    fn ff_matches_ed_spot_checks() {
        for (n, g, h) in [
            (5, 1.0 / 3.0, 0.5),
            (8, 0.7, 0.3),
            (3, 0.0, 0.2),
            (6, 0.25, -1.0),
            (7, 1.0, 1.7),
        ] {
            let p = xy(n, g, h);
            let ed = ground_energy_ed(&p).unwrap();
            let ff = ground_energy_ff(&p);
            assert!(
                (ed - ff).abs() < 1e-10,
                "n={n} gamma={g} h={h}: {ed} vs {ff}"
            );
        }
    }

    #[test]
    fn crossings_for_five_sites() {
        let p = xy(5, 1.0 / 3.0, 0.0);
        let roots = sector_crossings(&p, (-1.5, 1.5), 3000).unwrap();
        assert!(roots.len() >= 2);
        for &r in &roots {
            assert!(r.abs() <= 1.0 + 1e-6);
            let (e, o) = sector_energies(&p.with_field(r));
            assert!((e - o).abs() <= 1e-8);
            assert!(roots.iter().any(|&s| (s + r).abs() < 1e-6));
        }
        assert!(sector_crossings(&p, (-1.5, 1.5), 99).is_err());
    }

    #[test]
    fn longrange_limits() {
        let ising = longrange_xx(1.0, 0.0).unwrap();
        assert!(ising.converged);
        assert!((ising.value - 0.25).abs() < 1e-10);
        let disordered = longrange_xx(1.0 / 3.0, 1.4).unwrap();
        assert!(disordered.value.abs() < 1e-4);
        let mid = longrange_xx(1.0 / 3.0, 0.5).unwrap();
        assert!(mid.converged && mid.value > 0.0 && mid.value < 0.25);
    }

    #[test]
    fn toeplitz_matches_closed_form() {
        for (g, h) in [(1.0 / 3.0, 0.0), (1.0 / 3.0, -0.5), (0.8, 0.7), (0.5, 1.2)] {
            let t = longrange_xx(g, h).unwrap();
            let cf = longrange_xx_closed_form(g, h).unwrap();
            assert!(t.converged);
            assert!(
                (t.value - cf).abs() < 1e-6,
                "gamma={g} h={h}: {} vs {cf}",
                t.value
            );
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(XYParams::new(1, 1.0, 0.5, 0.0).is_err());
        assert!(XYParams::new(4, 0.0, 0.5, 0.0).is_err());
        assert!(XYParams::new(4, 1.0, 1.5, 0.0).is_err());
        assert!(build_hamiltonian(&XYParams {
            n: 13,
            j: 1.0,
            gamma: 0.5,
            h_over_j: 0.0
        })
        .is_err());
        assert!(longrange_xx(0.0, 0.5).is_err());
    }
}
