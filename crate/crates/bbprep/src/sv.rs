//! Exact statevector executor for small lattices.
//!
//! Serves two roles: the cross-check oracle for the MPS engines at small
//! sizes, and the execution engine for the 2D boundary-optimization runs
//! (open squares and tori up to the site cap).
//!
//! Basis convention: amplitude index `k` encodes site `i` in bit `i`, with
//! bit value 0 meaning `Z = +1`. ZZ gates are diagonal and applied as
//! phase masks; a whole ZZ layer accumulates the phase angle of every bond
//! in canonical bond order per amplitude, so permuting a layer's bonds
//! yields bit-identical results. X gates mix amplitude pairs over one bit
//! stride.

use num_complex::Complex64 as C64;

use crate::linalg::lanczos_ground;
use crate::model::{x_angle, Lattice, SiteResolvedSchedule};
use crate::{Error, Result};

/// Hard cap on simulated sites: 2^24 complex doubles is 256 MiB.
pub const DEFAULT_SITE_CAP: usize = 24;

#[derive(Debug, Clone)]
pub struct StateVector {
    amps: Vec<C64>,
    lattice: Lattice,
}

/// Per-site and per-bond expectation values plus the total energy.
#[derive(Debug, Clone)]
pub struct SvObservables {
    pub x: Vec<f64>,
    pub zz: Vec<f64>,
    pub energy: f64,
}

impl StateVector {
    /// Product state with every spin along +x.
    pub fn plus_state(lat: &Lattice) -> Result<Self> {
        Self::plus_state_with_cap(lat, DEFAULT_SITE_CAP)
    }

    pub fn plus_state_with_cap(lat: &Lattice, cap: usize) -> Result<Self> {
        let n = checked_sites(lat, cap)?;
        let dim = 1usize << n;
        let a = C64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(Self { amps: vec![a; dim], lattice: lat.clone() })
    }

    /// Wrap an existing amplitude vector (must be normalized and sized
    /// `2^sites` for the lattice).
    pub fn from_amplitudes(lat: &Lattice, amps: Vec<C64>) -> Result<Self> {
        let n = checked_sites(lat, DEFAULT_SITE_CAP)?;
        if amps.len() != 1 << n {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector has {} entries, lattice needs {}",
                amps.len(),
                1usize << n
            )));
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amps, lattice: lat.clone() })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.sites()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// One ZZ layer: `exp(+i β_b Z_i Z_j)` on every bond.
    ///
    /// The per-amplitude phase angle sums the bonds in canonical order
    /// regardless of how the caller ordered `betas`, so within-layer gate
    /// order cannot change the result even at the bit level.
    pub fn apply_zz_layer(&mut self, betas: &[f64]) {
        let bonds = self.lattice.bonds();
        assert_eq!(betas.len(), bonds.len(), "one beta per bond");
        for (k, amp) in self.amps.iter_mut().enumerate() {
            let mut phi = 0.0;
            for (b, &(i, j)) in bonds.iter().enumerate() {
                // z_i z_j = +1 when bits agree
                if (k >> i ^ k >> j) & 1 == 0 {
                    phi += betas[b];
                } else {
                    phi -= betas[b];
                }
            }
            *amp *= C64::from_polar(1.0, phi);
        }
    }

    /// `exp(+i β Z_i Z_j)` on a single bond (by canonical bond index).
    pub fn apply_zz_bond(&mut self, bond: usize, beta: f64) {
        let (i, j) = self.lattice.bonds()[bond];
        let plus = C64::from_polar(1.0, beta);
        let minus = C64::from_polar(1.0, -beta);
        for (k, amp) in self.amps.iter_mut().enumerate() {
            *amp *= if (k >> i ^ k >> j) & 1 == 0 { plus } else { minus };
        }
    }

    /// `exp(+i θ X_i)` on a single site.
    pub fn apply_x_site(&mut self, site: usize, theta: f64) {
        let m = 1usize << site;
        let c = theta.cos();
        let is = C64::new(0.0, theta.sin());
        for k in 0..self.amps.len() {
            if k & m == 0 {
                let a0 = self.amps[k];
                let a1 = self.amps[k | m];
                self.amps[k] = c * a0 + is * a1;
                self.amps[k | m] = c * a1 + is * a0;
            }
        }
    }

    /// One X layer with per-site angles.
    pub fn apply_x_layer(&mut self, thetas: &[f64]) {
        assert_eq!(thetas.len(), self.n_sites(), "one theta per site");
        for (i, &t) in thetas.iter().enumerate() {
            if t != 0.0 {
                self.apply_x_site(i, t);
            }
        }
    }

    /// Expectation values of every `X_i` and every bond `Z_i Z_j`, plus
    /// the energy `-Σ g_i <X_i> - Σ <Z_i Z_j>`.
    pub fn observables(&self) -> SvObservables {
        let n = self.n_sites();
        let mut x = vec![0.0; n];
        for i in 0..n {
            let m = 1usize << i;
            let mut acc = 0.0;
            for k in 0..self.amps.len() {
                acc += (self.amps[k].conj() * self.amps[k ^ m]).re;
            }
            x[i] = acc;
        }
        let bonds = self.lattice.bonds();
        let mut zz = vec![0.0; bonds.len()];
        for (k, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            for (b, &(i, j)) in bonds.iter().enumerate() {
                if (k >> i ^ k >> j) & 1 == 0 {
                    zz[b] += p;
                } else {
                    zz[b] -= p;
                }
            }
        }
        let mut energy = 0.0;
        for (i, xi) in x.iter().enumerate() {
            energy -= self.lattice.g_at(i) * xi;
        }
        energy -= zz.iter().sum::<f64>();
        SvObservables { x, zz, energy }
    }

    pub fn energy(&self) -> f64 {
        self.observables().energy
    }

    pub fn overlap(&self, other: &Self) -> C64 {
        assert_eq!(self.amps.len(), other.amps.len());
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.overlap(other).norm_sqr()
    }

    /// Direct `<psi|H|psi>` without going through per-term observables.
    pub fn energy_direct(&self) -> f64 {
        let n = self.n_sites();
        let dim = self.amps.len();
        let bonds = self.lattice.bonds();
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..dim {
            let mut hz = 0.0;
            for &(i, j) in &bonds {
                hz -= if (k >> i ^ k >> j) & 1 == 0 { 1.0 } else { -1.0 };
            }
            let mut hk = hz * self.amps[k];
            for i in 0..n {
                hk -= self.lattice.g_at(i) * self.amps[k ^ (1 << i)];
            }
            acc += self.amps[k].conj() * hk;
        }
        acc.re
    }
}

/// Run the full bang-bang sequence exactly on a small lattice.
pub fn run_bb_sv(lat: &Lattice, sched: &SiteResolvedSchedule) -> Result<StateVector> {
    run_bb_sv_with_cap(lat, sched, DEFAULT_SITE_CAP)
}

pub fn run_bb_sv_with_cap(
    lat: &Lattice,
    sched: &SiteResolvedSchedule,
    cap: usize,
) -> Result<StateVector> {
    sched.validate_for(lat)?;
    let mut psi = StateVector::plus_state_with_cap(lat, cap)?;
    let n_layers = sched.n();
    let n_sites = lat.sites();
    for layer in 0..n_layers {
        psi.apply_zz_layer(sched.beta_layer(layer));
        let thetas: Vec<f64> = (0..n_sites)
            .map(|i| x_angle(sched.alpha(layer, i), lat.g_at(i), layer, n_layers))
            .collect();
        psi.apply_x_layer(&thetas);
    }
    Ok(psi)
}

/// Lowest eigenpair of `H` on a small lattice by restarted Lanczos.
///
/// The returned energy is converged to a relative residual of 1e-11.
pub fn exact_gs_sv(lat: &Lattice) -> Result<(f64, StateVector)> {
    exact_gs_sv_with_cap(lat, DEFAULT_SITE_CAP)
}

pub fn exact_gs_sv_with_cap(lat: &Lattice, cap: usize) -> Result<(f64, StateVector)> {
    let n = checked_sites(lat, cap)?;
    let dim = 1usize << n;
    let bonds = lat.bonds();
    let gs: Vec<f64> = (0..n).map(|i| lat.g_at(i)).collect();

    // classical ZZ part is diagonal
    let mut diag = vec![0.0; dim];
    for (k, d) in diag.iter_mut().enumerate() {
        let mut hz = 0.0;
        for &(i, j) in &bonds {
            hz -= if (k >> i ^ k >> j) & 1 == 0 { 1.0 } else { -1.0 };
        }
        *d = hz;
    }

    let pair = lanczos_ground(
        |v, out| {
            for k in 0..dim {
                let mut acc = diag[k] * v[k];
                for (i, gi) in gs.iter().enumerate() {
                    acc -= gi * v[k ^ (1 << i)];
                }
                out[k] = acc;
            }
        },
        dim,
        1e-11,
    )?;

    let amps = pair.vector.iter().map(|&x| C64::new(x, 0.0)).collect();
    Ok((pair.value, StateVector { amps, lattice: lat.clone() }))
}

fn checked_sites(lat: &Lattice, cap: usize) -> Result<usize> {
    if !lat.is_finite() {
        return Err(Error::InvalidLattice("statevector needs a finite lattice".into()));
    }
    let n = lat.sites();
    if n > cap {
        return Err(Error::LatticeTooLarge { n, cap });
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{expand_uniform, AngleSchedule};
    use approx::assert_abs_diff_eq;

    fn uniform_sched(lat: &Lattice, betas: &[f64], alphas: &[f64]) -> SiteResolvedSchedule {
        let s = AngleSchedule::new(betas.to_vec(), alphas.to_vec()).unwrap();
        expand_uniform(&s, lat).unwrap()
    }

    #[test]
    fn plus_state_observables() {
        let lat = Lattice::ring(8, 1.3).unwrap();
        let psi = StateVector::plus_state(&lat).unwrap();
        let obs = psi.observables();
        assert!(obs.x.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(obs.zz.iter().all(|&z| z.abs() < 1e-12));
        assert_abs_diff_eq!(obs.energy, -1.3 * 8.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_schedule_is_identity() {
        let lat = Lattice::ring(8, 1.1).unwrap();
        let sched = uniform_sched(&lat, &[0.0, 0.0], &[0.0, 0.0]);
        let psi = run_bb_sv(&lat, &sched).unwrap();
        let obs = psi.observables();
        assert_abs_diff_eq!(obs.energy / 8.0, -1.1, epsilon = 1e-12);
    }

    #[test]
    fn norm_preserved_by_gates() {
        let lat = Lattice::open_square(3, 3, 1.1).unwrap();
        let sched = uniform_sched(&lat, &[0.3, 0.7], &[0.2, 0.9]);
        let psi = run_bb_sv(&lat, &sched).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zz_layer_is_exactly_permutation_invariant() {
        // the layer accumulates phases in canonical bond order, so the
        // result does not depend on any caller-side gate ordering at all;
        // compare against one-bond-at-a-time application as well
        let lat = Lattice::ring(6, 1.1).unwrap();
        let mut a = StateVector::plus_state(&lat).unwrap();
        let betas = [0.3, 0.5, 0.7, 0.11, 0.13, 0.17];
        a.apply_zz_layer(&betas);

        let mut b = StateVector::plus_state(&lat).unwrap();
        for idx in [5usize, 2, 0, 3, 1, 4] {
            b.apply_zz_bond(idx, betas[idx]);
        }
        for (x, y) in a.amps().iter().zip(b.amps()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn x_on_plus_state_is_phase_only() {
        let lat = Lattice::open_chain(6, 1.1).unwrap();
        let mut psi = StateVector::plus_state(&lat).unwrap();
        psi.apply_x_layer(&vec![std::f64::consts::FRAC_PI_2; 6]);
        let obs = psi.observables();
        assert!(obs.x.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(obs.zz.iter().all(|&z| z.abs() < 1e-12));
    }

    #[test]
    fn beta_half_pi_zz_layer() {
        // exp(i pi/2 ZZ) acts as i ZZ. A single bond flips X on both of
        // its sites (Z X Z = -X) ...
        let lat = Lattice::open_chain(2, 1.0).unwrap();
        let mut psi = StateVector::plus_state(&lat).unwrap();
        psi.apply_zz_bond(0, std::f64::consts::FRAC_PI_2);
        let obs = psi.observables();
        assert!(obs.x.iter().all(|&x| (x + 1.0).abs() < 1e-12), "{:?}", obs.x);

        // ... but a full layer on a ring hits every site with two Z's,
        // which cancel: the layer is the identity up to phase. This is
        // exactly why the energy is pi/2-periodic in each beta.
        let lat = Lattice::ring(4, 1.0).unwrap();
        let mut psi = StateVector::plus_state(&lat).unwrap();
        psi.apply_zz_layer(&vec![std::f64::consts::FRAC_PI_2; 4]);
        let obs = psi.observables();
        assert!(obs.x.iter().all(|&x| (x - 1.0).abs() < 1e-12), "{:?}", obs.x);
        assert!(obs.zz.iter().all(|&z| z.abs() < 1e-12));
    }

    #[test]
    fn energy_from_observables_matches_direct() {
        let lat = Lattice::torus(3, 3, 3.1).unwrap();
        let sched = uniform_sched(&lat, &[0.2, 0.4], &[0.15, 0.3]);
        let psi = run_bb_sv(&lat, &sched).unwrap();
        assert_abs_diff_eq!(psi.observables().energy, psi.energy_direct(), epsilon = 1e-12);
    }

    #[test]
    fn two_site_ground_state_closed_form() {
        let g = 1.1;
        let lat = Lattice::open_chain(2, g).unwrap();
        let (e, psi) = exact_gs_sv(&lat).unwrap();
        assert_abs_diff_eq!(e, -(1.0 + 4.0 * g * g).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(psi.energy_direct(), e, epsilon = 1e-10);
    }

    #[test]
    fn classical_limit_square_ground_state() {
        let lat = Lattice::open_square(3, 3, 1e-3).unwrap();
        let (e, _) = exact_gs_sv(&lat).unwrap();
        // 12 bonds; transverse corrections are O(g^2)
        assert_abs_diff_eq!(e, -12.0, epsilon = 1e-4);
    }

    #[test]
    fn rotation_symmetry_on_square() {
        let lat = Lattice::open_square(4, 4, 3.1).unwrap();
        let sched = uniform_sched(&lat, &[0.21, 0.37], &[0.11, 0.29]);
        let psi = run_bb_sv(&lat, &sched).unwrap();
        let obs = psi.observables();
        // 90-degree rotation: (x, y) -> (y, Lx-1-x)
        let rot = |s: usize| -> usize {
            let (x, y) = (s % 4, s / 4);
            (4 - 1 - x) * 4 + y
        };
        for s in 0..16 {
            assert_abs_diff_eq!(obs.x[s], obs.x[rot(s)], epsilon = 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let lat = Lattice::open_chain(12, 1.0).unwrap();
        assert!(StateVector::plus_state_with_cap(&lat, 10).is_err());
        assert!(exact_gs_sv_with_cap(&lat, 10).is_err());
    }
}
