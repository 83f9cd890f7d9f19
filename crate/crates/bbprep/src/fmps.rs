//! Open-boundary finite MPS engine for site-resolved schedules.
//!
//! The state is held in mixed canonical form with an explicit
//! orthogonality center. Bond gates are swept left to right with the
//! center moved along, so every truncation happens in centered canonical
//! form; ZZ gates commute, which makes the sweep order a free choice.

use ndarray::{s, Array2, Array3};
use ndarray_linalg::QR;
use num_complex::Complex64 as C64;

use crate::linalg::truncated_svd;
use crate::model::{x_angle, Lattice, LatticeKind, SiteResolvedSchedule};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct FiniteMps {
    tensors: Vec<Array3<C64>>,
    center: usize,
}

/// Per-site observable profile, optionally with errors against a
/// reference (ground-state) profile.
#[derive(Debug, Clone)]
pub struct SiteProfile {
    pub x: Vec<f64>,
    pub zz: Vec<f64>,
    pub x_err: Option<Vec<f64>>,
    pub zz_err: Option<Vec<f64>>,
}

impl FiniteMps {
    /// Product state with every spin along +x.
    pub fn plus_state(l: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidLattice(format!("L = {l} < 2")));
        }
        let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let site = Array3::from_shape_vec((1, 2, 1), vec![r, r]).unwrap();
        Ok(Self { tensors: vec![site; l], center: 0 })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn max_bond_dim(&self) -> usize {
        self.tensors.iter().map(|t| t.dim().2).max().unwrap_or(1)
    }

    pub fn norm(&self) -> f64 {
        let c = &self.tensors[self.center];
        c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Move the orthogonality center by QR sweeps. Gauge only.
    pub fn move_center_to(&mut self, pos: usize) -> Result<()> {
        assert!(pos < self.len());
        while self.center < pos {
            let i = self.center;
            let t = &self.tensors[i];
            let (dl, _, dr) = t.dim();
            let mat = t.to_shape((dl * 2, dr)).expect("contiguous").to_owned();
            let (q, r) = mat
                .qr()
                .map_err(|e| Error::NoConvergence(format!("QR failed: {e}")))?;
            let k = q.dim().1;
            self.tensors[i] = q.into_shape_with_order((dl, 2, k)).expect("reshape");
            let next = &self.tensors[i + 1];
            let (dn, _, drn) = next.dim();
            debug_assert_eq!(dn, dr);
            let nmat = next.to_shape((dn, 2 * drn)).expect("contiguous").to_owned();
            let prod = r.dot(&nmat);
            self.tensors[i + 1] = prod.into_shape_with_order((k, 2, drn)).expect("reshape");
            self.center += 1;
        }
        while self.center > pos {
            let i = self.center;
            let t = &self.tensors[i];
            let (dl, _, dr) = t.dim();
            // LQ via QR of the conjugate transpose
            let mat = t.to_shape((dl, 2 * dr)).expect("contiguous").to_owned();
            let mat_h = mat.t().mapv(|z| z.conj());
            let (q, r) = mat_h
                .qr()
                .map_err(|e| Error::NoConvergence(format!("QR failed: {e}")))?;
            let k = q.dim().1;
            let qh = q.t().mapv(|z| z.conj()).as_standard_layout().into_owned(); // (k, 2·dr)
            let l_mat = r.t().mapv(|z| z.conj()); // (dl, k)
            self.tensors[i] = qh.into_shape_with_order((k, 2, dr)).expect("reshape");
            let prev = &self.tensors[i - 1];
            let (dp, _, drp) = prev.dim();
            debug_assert_eq!(drp, dl);
            let pmat = prev.to_shape((dp * 2, drp)).expect("contiguous").to_owned();
            let prod = pmat.dot(&l_mat);
            self.tensors[i - 1] = prod.into_shape_with_order((dp, 2, k)).expect("reshape");
            self.center -= 1;
        }
        Ok(())
    }

    /// Apply a two-site gate on bond `(b, b+1)` with truncation; the
    /// center ends at `b + 1`. Returns the discarded weight.
    pub fn apply_bond_gate(
        &mut self,
        b: usize,
        gate: &Array2<C64>,
        dmax: usize,
        tol: f64,
    ) -> Result<f64> {
        assert_eq!(gate.dim(), (4, 4));
        assert!(b + 1 < self.len());
        if self.center < b {
            self.move_center_to(b)?;
        } else if self.center > b + 1 {
            self.move_center_to(b + 1)?;
        }
        let tl = &self.tensors[b];
        let tr = &self.tensors[b + 1];
        let (dl, _, dm) = tl.dim();
        let (_, _, dr) = tr.dim();
        let lmat = tl.to_shape((dl * 2, dm)).expect("contiguous").to_owned();
        let rmat = tr.to_shape((dm, 2 * dr)).expect("contiguous").to_owned();
        let theta = lmat.dot(&rmat); // (l·s1, s2·r)

        let mut new = Array2::<C64>::zeros((dl * 2, 2 * dr));
        for a in 0..2 {
            for bb in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let coeff = gate[[a * 2 + bb, c * 2 + d]];
                        if coeff != C64::new(0.0, 0.0) {
                            for l in 0..dl {
                                for rr in 0..dr {
                                    new[[l * 2 + a, bb * dr + rr]] +=
                                        coeff * theta[[l * 2 + c, d * dr + rr]];
                                }
                            }
                        }
                    }
                }
            }
        }
        let svd = truncated_svd(new, dmax, tol)?;
        let k = svd.s.len();
        let snorm = svd.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.tensors[b] = svd
            .u
            .into_shape_with_order((dl, 2, k))
            .expect("reshape");
        let mut right = svd.vt;
        for (m, row) in right.outer_iter_mut().enumerate() {
            let w = svd.s[m] / snorm;
            for z in row {
                *z *= w;
            }
        }
        self.tensors[b + 1] = right.into_shape_with_order((k, 2, dr)).expect("reshape");
        self.center = b + 1;
        Ok(svd.discarded_weight)
    }

    /// `exp(+i θ X)` on one site; exact and gauge-preserving.
    pub fn apply_x_site(&mut self, i: usize, theta: f64) {
        let gate = crate::itebd::x_gate(theta);
        let t = &self.tensors[i];
        let (dl, _, dr) = t.dim();
        let mut out = Array3::<C64>::zeros((dl, 2, dr));
        for sp in 0..2 {
            for sx in 0..2 {
                let coeff = gate[[sp, sx]];
                let src = t.slice(s![.., sx, ..]);
                let mut dst = out.slice_mut(s![.., sp, ..]);
                dst.scaled_add(coeff, &src);
            }
        }
        self.tensors[i] = out;
    }

    /// Largest deviation from the mixed-canonical isometry conditions.
    pub fn canonical_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, t) in self.tensors.iter().enumerate() {
            if i == self.center {
                continue;
            }
            let (dl, _, dr) = t.dim();
            if i < self.center {
                let mut m = Array2::<C64>::zeros((dr, dr));
                for sx in 0..2 {
                    for l in 0..dl {
                        for a in 0..dr {
                            let c = t[[l, sx, a]].conj();
                            for b in 0..dr {
                                m[[a, b]] += c * t[[l, sx, b]];
                            }
                        }
                    }
                }
                worst = worst.max(max_dev_from_identity(&m));
            } else {
                let mut m = Array2::<C64>::zeros((dl, dl));
                for sx in 0..2 {
                    for r in 0..dr {
                        for a in 0..dl {
                            let c = t[[a, sx, r]];
                            for b in 0..dl {
                                m[[a, b]] += c * t[[b, sx, r]].conj();
                            }
                        }
                    }
                }
                worst = worst.max(max_dev_from_identity(&m));
            }
        }
        worst
    }

    /// `<X_i>` and `<Z_i Z_{i+1}>` for all sites/bonds in one sweep.
    pub fn site_profile(&mut self) -> Result<SiteProfile> {
        let l = self.len();
        let mut x = vec![0.0; l];
        let mut zz = vec![0.0; l - 1];
        self.move_center_to(0)?;
        for i in 0..l {
            let t = &self.tensors[i];
            let (dl, _, dr) = t.dim();
            let mut num = C64::new(0.0, 0.0);
            for ll in 0..dl {
                for r in 0..dr {
                    num += t[[ll, 0, r]].conj() * t[[ll, 1, r]]
                        + t[[ll, 1, r]].conj() * t[[ll, 0, r]];
                }
            }
            let nrm: f64 = t.iter().map(|z| z.norm_sqr()).sum();
            x[i] = num.re / nrm;
            if i + 1 < l {
                // two-site (diagonal) expectation with right-isometric T_{i+1}
                let tr = &self.tensors[i + 1];
                let (dm, _, drr) = tr.dim();
                let lmat = t.to_shape((dl * 2, dm)).expect("contiguous").to_owned();
                let rmat = tr.to_shape((dm, 2 * drr)).expect("contiguous").to_owned();
                let theta = lmat.dot(&rmat); // (l·s1, s2·r)
                let mut num = 0.0;
                let mut den = 0.0;
                for ll in 0..dl {
                    for s1 in 0..2 {
                        for s2 in 0..2 {
                            let zfac = if s1 == s2 { 1.0 } else { -1.0 };
                            for r in 0..drr {
                                let p = theta[[ll * 2 + s1, s2 * drr + r]].norm_sqr();
                                num += zfac * p;
                                den += p;
                            }
                        }
                    }
                }
                zz[i] = num / den;
                self.move_center_to(i + 1)?;
            }
        }
        Ok(SiteProfile { x, zz, x_err: None, zz_err: None })
    }

    /// Profile plus error columns against a ground-state reference.
    pub fn site_profile_with_reference(
        &mut self,
        ref_x: &[f64],
        ref_zz: &[f64],
    ) -> Result<SiteProfile> {
        let mut p = self.site_profile()?;
        if ref_x.len() != p.x.len() || ref_zz.len() != p.zz.len() {
            return Err(Error::InvalidArgument(
                "reference profile sized differently from the state".into(),
            ));
        }
        p.x_err = Some(p.x.iter().zip(ref_x).map(|(a, b)| a - b).collect());
        p.zz_err = Some(p.zz.iter().zip(ref_zz).map(|(a, b)| a - b).collect());
        Ok(p)
    }

    /// Contract into a full statevector (sites in low-to-high bit order);
    /// only sensible for small L.
    pub fn to_statevector(&self, lat: &Lattice) -> Result<crate::sv::StateVector> {
        let l = self.len();
        if l > 24 {
            return Err(Error::LatticeTooLarge { n: l, cap: 24 });
        }
        let mut m = Array2::<C64>::ones((1, 1));
        for t in &self.tensors {
            let (dl, _, dr) = t.dim();
            let states = m.dim().0;
            let mut next = Array2::<C64>::zeros((states * 2, dr));
            for sx in 0..2 {
                let ts: Array2<C64> = t.slice(s![.., sx, ..]).to_owned();
                debug_assert_eq!(ts.dim(), (dl, dr));
                let prod = m.dot(&ts);
                next.slice_mut(s![sx * states..(sx + 1) * states, ..]).assign(&prod);
            }
            m = next;
        }
        let amps: Vec<C64> = m.column(0).to_vec();
        crate::sv::StateVector::from_amplitudes(lat, amps)
    }
}

fn max_dev_from_identity(m: &Array2<C64>) -> f64 {
    let d = m.dim().0;
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((m[[a, b]] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Statistics of one schedule application.
pub struct ScheduleRun {
    pub discarded_weight: f64,
}

/// Apply a full site-resolved schedule to the state.
///
/// Per layer: all bond gates `exp(+i β Z⊗Z)` swept left to right, then all
/// site gates `exp(+i θ X)` with `θ = g_i α` (halved on the final layer).
pub fn apply_schedule(
    state: &mut FiniteMps,
    lat: &Lattice,
    sched: &SiteResolvedSchedule,
    dmax: usize,
    tol: f64,
) -> Result<ScheduleRun> {
    match lat.kind() {
        LatticeKind::OpenChain(l) if l == state.len() => {}
        LatticeKind::OpenChain(l) => {
            return Err(Error::InvalidLattice(format!(
                "state has {} sites, lattice {l}",
                state.len()
            )));
        }
        _ => {
            return Err(Error::InvalidLattice(
                "the finite MPS engine handles open chains only".into(),
            ));
        }
    }
    sched.validate_for(lat)?;
    let n = sched.n();
    let l = state.len();
    let mut discarded = 0.0;
    for layer in 0..n {
        state.move_center_to(0)?;
        for b in 0..l - 1 {
            let gate = crate::itebd::zz_gate(sched.beta(layer, b));
            discarded += state.apply_bond_gate(b, &gate, dmax, tol)?;
        }
        for i in 0..l {
            let theta = x_angle(sched.alpha(layer, i), lat.g_at(i), layer, n);
            if theta != 0.0 {
                state.apply_x_site(i, theta);
            }
        }
    }
    Ok(ScheduleRun { discarded_weight: discarded })
}

/// Total and per-site energy `-Σ g_i <X_i> - Σ <Z_i Z_{i+1}>`.
pub fn total_energy(state: &mut FiniteMps, lat: &Lattice) -> Result<(f64, f64)> {
    if lat.sites() != state.len() {
        return Err(Error::InvalidArgument("profile sized differently from state".into()));
    }
    let p = state.site_profile()?;
    let mut e = 0.0;
    for (i, xi) in p.x.iter().enumerate() {
        e -= lat.g_at(i) * xi;
    }
    e -= p.zz.iter().sum::<f64>();
    Ok((e, e / state.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{expand_uniform, AngleSchedule};
    use crate::sv::run_bb_sv;
    use approx::assert_abs_diff_eq;

    const DMAX: usize = 40;
    const TOL: f64 = 1e-12;

    #[test]
    fn plus_state_is_uniform_superposition() {
        let lat = Lattice::open_chain(2, 1.1).unwrap();
        let st = FiniteMps::plus_state(2).unwrap();
        let psi = st.to_statevector(&lat).unwrap();
        for a in psi.amps() {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(st.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn plus_state_energy_l100() {
        let lat = Lattice::open_chain(100, 1.1).unwrap();
        let mut st = FiniteMps::plus_state(100).unwrap();
        let (total, per_site) = total_energy(&mut st, &lat).unwrap();
        assert_abs_diff_eq!(total, -110.0, epsilon = 1e-9);
        assert_abs_diff_eq!(per_site, -1.1, epsilon = 1e-11);
    }

    #[test]
    fn schedule_matches_statevector_on_l10() {
        let lat = Lattice::open_chain(10, 1.1).unwrap();
        // arbitrary site-resolved schedule: perturb a uniform one
        let uni = AngleSchedule::new(vec![0.35, 0.21], vec![0.44, 0.3]).unwrap();
        let mut sched = expand_uniform(&uni, &lat).unwrap();
        for (k, (layer, b)) in [(0usize, 3usize), (1, 7)].into_iter().enumerate() {
            *sched.beta_mut(layer, b) += 0.1 + 0.05 * k as f64;
        }
        *sched.alpha_mut(0, 0) -= 0.2;
        *sched.alpha_mut(1, 9) += 0.15;

        let mut mps = FiniteMps::plus_state(10).unwrap();
        apply_schedule(&mut mps, &lat, &sched, 32, TOL).unwrap();
        let from_mps = mps.to_statevector(&lat).unwrap();
        let exact = run_bb_sv(&lat, &sched).unwrap();
        let fid = from_mps.fidelity(&exact);
        assert!(fid >= 1.0 - 1e-10, "fidelity {fid}");
        assert!(mps.canonical_residual() < 1e-10);
        assert_abs_diff_eq!(mps.norm(), 1.0, epsilon = 1e-12);

        // energies agree too
        let (total, _) = total_energy(&mut mps, &lat).unwrap();
        assert_abs_diff_eq!(total, exact.observables().energy, epsilon = 1e-10);
    }

    #[test]
    fn identity_schedule_and_recanonicalization_fix_nothing() {
        let lat = Lattice::open_chain(12, 1.1).unwrap();
        let uni = AngleSchedule::new(vec![0.3, 0.2], vec![0.25, 0.4]).unwrap();
        let sched = expand_uniform(&uni, &lat).unwrap();
        let mut mps = FiniteMps::plus_state(12).unwrap();
        apply_schedule(&mut mps, &lat, &sched, DMAX, TOL).unwrap();
        let before = mps.site_profile().unwrap();

        let zero = expand_uniform(&AngleSchedule::zero(2), &lat).unwrap();
        apply_schedule(&mut mps, &lat, &zero, DMAX, TOL).unwrap();
        mps.move_center_to(11).unwrap();
        mps.move_center_to(0).unwrap();
        let after = mps.site_profile().unwrap();
        for i in 0..12 {
            assert_abs_diff_eq!(before.x[i], after.x[i], epsilon = 1e-13);
        }
        for i in 0..11 {
            assert_abs_diff_eq!(before.zz[i], after.zz[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn bond_gate_order_within_layer_is_free() {
        let lat = Lattice::open_chain(9, 1.1).unwrap();
        let uni = AngleSchedule::new(vec![0.4], vec![0.3]).unwrap();
        let sched = expand_uniform(&uni, &lat).unwrap();
        let mut natural = FiniteMps::plus_state(9).unwrap();
        apply_schedule(&mut natural, &lat, &sched, DMAX, TOL).unwrap();
        let p1 = natural.site_profile().unwrap();

        let mut permuted = FiniteMps::plus_state(9).unwrap();
        let gate = crate::itebd::zz_gate(0.4);
        for b in [5usize, 1, 7, 3, 0, 6, 2, 4] {
            permuted.apply_bond_gate(b, &gate, DMAX, TOL).unwrap();
        }
        for i in 0..9 {
            permuted.apply_x_site(i, crate::model::x_angle(0.3, 1.1, 0, 1));
        }
        let p2 = permuted.site_profile().unwrap();
        for i in 0..9 {
            assert_abs_diff_eq!(p1.x[i], p2.x[i], epsilon = 1e-10);
        }
        for i in 0..8 {
            assert_abs_diff_eq!(p1.zz[i], p2.zz[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn mirror_symmetric_schedule_gives_mirror_profile() {
        let lat = Lattice::open_chain(40, 1.1).unwrap();
        let uni = AngleSchedule::new(vec![0.35, 0.21, 0.1], vec![0.44, 0.3, 0.2]).unwrap();
        let sched = expand_uniform(&uni, &lat).unwrap();
        let mut mps = FiniteMps::plus_state(40).unwrap();
        apply_schedule(&mut mps, &lat, &sched, DMAX, TOL).unwrap();
        let p = mps.site_profile().unwrap();
        for i in 0..40 {
            assert_abs_diff_eq!(p.x[i], p.x[39 - i], epsilon = 1e-10);
        }
        for i in 0..39 {
            assert_abs_diff_eq!(p.zz[i], p.zz[38 - i], epsilon = 1e-10);
        }
    }

    #[test]
    fn bulk_profile_matches_infinite_chain() {
        let g = 1.1;
        let uni = AngleSchedule::new(vec![0.35, 0.21], vec![0.44, 0.3]).unwrap();
        let lat = Lattice::open_chain(100, g).unwrap();
        let sched = expand_uniform(&uni, &lat).unwrap();
        let mut mps = FiniteMps::plus_state(100).unwrap();
        apply_schedule(&mut mps, &lat, &sched, DMAX, TOL).unwrap();
        let p = mps.site_profile().unwrap();

        let run = crate::itebd::run_bb(&uni, g, DMAX, TOL).unwrap();
        let x_inf = run.state.x_expect();
        let zz_inf = run.state.zz_expect();
        for i in 40..60 {
            assert_abs_diff_eq!(p.x[i], x_inf, epsilon = 1e-8);
            assert_abs_diff_eq!(p.zz[i], zz_inf, epsilon = 1e-8);
        }
    }

    #[test]
    fn profile_with_reference_errors() {
        let g = 1.1;
        let sol = crate::oracle::finite_gs_energy(20, g).unwrap();
        let mut mps = FiniteMps::plus_state(20).unwrap();
        let p = mps.site_profile_with_reference(&sol.x, &sol.zz).unwrap();
        let xe = p.x_err.unwrap();
        for i in 0..20 {
            assert_abs_diff_eq!(xe[i], 1.0 - sol.x[i], epsilon = 1e-12);
        }
        assert!(mps
            .site_profile_with_reference(&sol.x[..5], &sol.zz)
            .is_err());
    }

    #[test]
    fn rejects_non_open_lattices() {
        let ring = Lattice::ring(8, 1.1).unwrap();
        let uni = AngleSchedule::new(vec![0.3], vec![0.2]).unwrap();
        let sched = expand_uniform(&uni, &ring).unwrap();
        let mut mps = FiniteMps::plus_state(8).unwrap();
        assert!(apply_schedule(&mut mps, &ring, &sched, DMAX, TOL).is_err());
    }
}
