//! Objective construction and minimization: the scalar AP time-step
//! search, full 2N-angle global optimization with local descent plus
//! random jumps, and masked boundary-cone optimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::{ConeRegion, GateKind};
use crate::fmps::{apply_schedule, total_energy, FiniteMps};
use crate::itebd;
use crate::minimize::{
    bracket_on_grid, golden_section, lbfgs_numgrad, nelder_mead, LbfgsOptions, MinResult,
    NmOptions,
};
use crate::model::{
    alpha_period, ap_schedule, beta_period, expand_uniform, fold_angles, AngleSchedule, ApConfig,
    Lattice, LatticeKind, SiteResolvedSchedule,
};
use crate::sv::run_bb_sv;
use crate::{Error, Result};

/// Engine selector with its truncation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    Itebd { dmax: usize, tol: f64 },
    Fmps { dmax: usize, tol: f64 },
    Sv,
}

impl Engine {
    pub fn itebd_default() -> Self {
        Engine::Itebd { dmax: itebd::DEFAULT_DMAX, tol: itebd::DEFAULT_TOL }
    }

    pub fn fmps_default() -> Self {
        Engine::Fmps { dmax: itebd::DEFAULT_DMAX, tol: itebd::DEFAULT_TOL }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Itebd { .. } => "itebd",
            Engine::Fmps { .. } => "fmps",
            Engine::Sv => "sv",
        }
    }
}

/// Per-site energy of a uniform schedule on a lattice, by the matching
/// engine.
pub fn uniform_energy(lat: &Lattice, engine: Engine, s: &AngleSchedule) -> Result<f64> {
    match engine {
        Engine::Itebd { dmax, tol } => {
            let g = lat.uniform_g().ok_or_else(|| {
                Error::InvalidArgument("the infinite engine needs a uniform field".into())
            })?;
            if lat.kind() != LatticeKind::InfiniteChain {
                return Err(Error::InvalidLattice("itebd runs on the infinite chain".into()));
            }
            let run = itebd::run_bb(s, g, dmax, tol)?;
            Ok(run.state.energy_per_site(g))
        }
        _ => resolved_energy(lat, engine, &expand_uniform(s, lat)?),
    }
}

/// Per-site energy of a site-resolved schedule on a finite lattice.
pub fn resolved_energy(
    lat: &Lattice,
    engine: Engine,
    sched: &SiteResolvedSchedule,
) -> Result<f64> {
    match engine {
        Engine::Itebd { .. } => {
            Err(Error::InvalidArgument("site-resolved schedules need a finite engine".into()))
        }
        Engine::Fmps { dmax, tol } => {
            let mut st = FiniteMps::plus_state(lat.sites())?;
            apply_schedule(&mut st, lat, sched, dmax, tol)?;
            let (_, per_site) = total_energy(&mut st, lat)?;
            Ok(per_site)
        }
        Engine::Sv => {
            let psi = run_bb_sv(lat, sched)?;
            Ok(psi.observables().energy / lat.sites() as f64)
        }
    }
}

#[derive(Debug, Clone)]
enum ObjectiveKind {
    /// Variables are the 2N angles themselves (betas then alphas).
    Uniform,
    /// Variables are offsets on the tie groups of a frozen base schedule.
    Masked { base: SiteResolvedSchedule, region: ConeRegion },
}

/// A pure, deterministic energy objective over a variable vector.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    lattice: Lattice,
    n: usize,
    engine: Engine,
    kind: ObjectiveKind,
}

impl ObjectiveSpec {
    /// Uniform 2N-angle objective on the infinite chain (iTEBD).
    pub fn uniform_infinite(g: f64, n: usize, engine: Engine) -> Result<Self> {
        if !matches!(engine, Engine::Itebd { .. }) {
            return Err(Error::InvalidArgument(
                "infinite-lattice objectives use the itebd engine".into(),
            ));
        }
        Ok(Self { lattice: Lattice::infinite_chain(g)?, n, engine, kind: ObjectiveKind::Uniform })
    }

    /// Uniform 2N-angle objective on a finite lattice (statevector or
    /// finite MPS); used for the 2D stage-one proxy on a torus.
    pub fn uniform_finite(lat: Lattice, n: usize, engine: Engine) -> Result<Self> {
        if matches!(engine, Engine::Itebd { .. }) {
            return Err(Error::InvalidArgument("finite lattices need a finite engine".into()));
        }
        if !lat.is_finite() {
            return Err(Error::InvalidLattice("uniform_finite needs a finite lattice".into()));
        }
        Ok(Self { lattice: lat, n, engine, kind: ObjectiveKind::Uniform })
    }

    /// Masked objective: offsets on `region`'s tie groups added to a
    /// frozen base schedule.
    pub fn masked(
        lat: Lattice,
        base: SiteResolvedSchedule,
        region: ConeRegion,
        engine: Engine,
    ) -> Result<Self> {
        base.validate_for(&lat)?;
        if region.n_layers() != base.n() {
            return Err(Error::InvalidSchedule(format!(
                "region has {} layers, base {}",
                region.n_layers(),
                base.n()
            )));
        }
        let n = base.n();
        Ok(Self { lattice: lat, n, engine, kind: ObjectiveKind::Masked { base, region } })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_layers(&self) -> usize {
        self.n
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    /// Number of independent optimization variables.
    pub fn n_vars(&self) -> usize {
        match &self.kind {
            ObjectiveKind::Uniform => 2 * self.n,
            ObjectiveKind::Masked { region, .. } => region.n_vars(),
        }
    }

    /// Short descriptor of the variable mask for result records.
    pub fn mask_descriptor(&self) -> String {
        match &self.kind {
            ObjectiveKind::Uniform => format!("uniform-2n({})", self.n),
            ObjectiveKind::Masked { region, .. } => {
                format!("masked({} groups, clamped {})", region.n_vars(), region.clamped())
            }
        }
    }

    /// Exact period of the energy in each variable direction (used for
    /// hop scales and folding). Boundary offsets on an open lattice have
    /// no exact period; the uniform-lattice period is still the right
    /// length scale for jumps.
    pub fn periods(&self) -> Vec<f64> {
        let g_ref = |site_g: f64| site_g.max(1e-12);
        match &self.kind {
            ObjectiveKind::Uniform => {
                let g = self.lattice.uniform_g().unwrap_or(1.0);
                let mut p = vec![beta_period(); self.n];
                p.extend((0..self.n).map(|j| alpha_period(j, self.n, g_ref(g))));
                p
            }
            ObjectiveKind::Masked { region, .. } => region
                .groups()
                .iter()
                .map(|grp| match grp.kind {
                    GateKind::Bond => beta_period(),
                    GateKind::Site => {
                        let gmax = grp
                            .slots
                            .iter()
                            .map(|&i| self.lattice.g_at(i))
                            .fold(f64::MIN, f64::max);
                        alpha_period(grp.layer, self.n, g_ref(gmax))
                    }
                })
                .collect(),
        }
    }

    /// Build the full schedule a variable vector describes.
    pub fn schedule_for(&self, x: &[f64]) -> Result<ScheduleView> {
        if x.len() != self.n_vars() {
            return Err(Error::InvalidArgument(format!(
                "variable vector has {} entries, objective needs {}",
                x.len(),
                self.n_vars()
            )));
        }
        match &self.kind {
            ObjectiveKind::Uniform => Ok(ScheduleView::Uniform(AngleSchedule::from_vec(x)?)),
            ObjectiveKind::Masked { base, region } => {
                Ok(ScheduleView::Resolved(region.apply_offsets(base, x)?))
            }
        }
    }

    /// Per-site energy at `x`. Pure and deterministic.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        match self.schedule_for(x)? {
            ScheduleView::Uniform(s) => uniform_energy(&self.lattice, self.engine, &s),
            ScheduleView::Resolved(s) => resolved_energy(&self.lattice, self.engine, &s),
        }
    }

    /// Fold a uniform variable vector into the fundamental angle domain;
    /// masked objectives have no exact folding and return `None`.
    pub fn fold(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            ObjectiveKind::Uniform => {
                let g = self.lattice.uniform_g()?;
                let s = AngleSchedule::from_vec(x).ok()?;
                Some(fold_angles(&s, g).to_vec())
            }
            ObjectiveKind::Masked { .. } => None,
        }
    }
}

pub enum ScheduleView {
    Uniform(AngleSchedule),
    Resolved(SiteResolvedSchedule),
}

/// Local minimization kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalMethod {
    /// Derivative-free simplex with adaptive restarts (default).
    Simplex,
    /// L-BFGS on central-difference gradients; scales to wide masks.
    QuasiNewton,
}

/// Basin-hopping configuration. The seed is recorded in every result.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub method: LocalMethod,
    /// Energy tolerance of the local kernel.
    pub local_tol: f64,
    /// Number of random jumps after the initial descent.
    pub hops: usize,
    /// Jump half-width per variable; `None` means a quarter period.
    pub hop_scale: Option<f64>,
    /// Metropolis temperature in energy units.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: LocalMethod::Simplex,
            local_tol: 1e-10,
            hops: 50,
            hop_scale: None,
            temperature: 1e-3,
            seed: 7,
        }
    }
}

/// One basin-hopping step in the trace.
#[derive(Debug, Clone)]
pub struct HopRecord {
    pub hop: usize,
    pub local_minimum: f64,
    pub accepted: bool,
    pub best_so_far: f64,
}

/// Outcome of a basin-hopping run.
#[derive(Debug, Clone)]
pub struct BbOptimum {
    pub x: Vec<f64>,
    /// Folded into the fundamental domain when the objective is uniform.
    pub x_folded: Option<Vec<f64>>,
    pub energy: f64,
    pub trace: Vec<HopRecord>,
    pub evaluations: usize,
    pub seed: u64,
    pub wall_seconds: f64,
}

/// Outcome of the scalar AP time-step search.
#[derive(Debug, Clone)]
pub struct ApOptimum {
    pub dt: f64,
    pub energy: f64,
    pub evaluations: usize,
}

/// Minimize the AP energy over the time step on `(0, dt_max]` by a grid
/// bracket plus golden-section refinement.
pub fn optimize_ap(lat: &Lattice, n: usize, engine: Engine, dt_max: f64) -> Result<ApOptimum> {
    use std::cell::Cell;
    let evals = Cell::new(0usize);
    let energy_of = |dt: f64| -> Result<f64> {
        evals.set(evals.get() + 1);
        let s = ap_schedule(ApConfig::new(n, dt)?);
        uniform_energy(lat, engine, &s)
    };
    // closure for the minimizers: propagate engine failures as +inf and
    // re-check at the end
    let f = |dt: f64| energy_of(dt).unwrap_or(f64::INFINITY);

    let mut hi = dt_max;
    for _ in 0..3 {
        let grid: Vec<f64> = (1..=60).map(|i| hi * i as f64 / 60.0).collect();
        match bracket_on_grid(f, &grid) {
            Some((a, b, c)) => {
                let r = golden_section(f, a, b, c, 1e-10);
                let energy = energy_of(r.x[0])?;
                return Ok(ApOptimum { dt: r.x[0], energy, evaluations: evals.get() });
            }
            None => {
                // minimum on the right edge: widen; on the left edge the
                // grid is already fine enough to resolve dt -> 0
                hi *= 2.0;
            }
        }
    }
    Err(Error::NoBracket(hi))
}

/// Basin hopping: local descent from `x0`, then `hops` random jumps with
/// Metropolis acceptance on the local minima. Never returns a point worse
/// than the best evaluated one.
pub fn optimize_bb(obj: &ObjectiveSpec, cfg: &OptimizerConfig, x0: &[f64]) -> Result<BbOptimum> {
    if x0.len() != obj.n_vars() {
        return Err(Error::InvalidArgument(format!(
            "x0 has {} entries, objective needs {}",
            x0.len(),
            obj.n_vars()
        )));
    }
    let started = std::time::Instant::now();
    let evals = std::sync::atomic::AtomicUsize::new(0);
    let f = |x: &[f64]| -> f64 {
        evals.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        obj.evaluate(x).unwrap_or(f64::INFINITY)
    };
    let periods = obj.periods();
    let local = |start: &[f64]| -> MinResult {
        match cfg.method {
            LocalMethod::Simplex => {
                let scales: Vec<f64> = periods.iter().map(|p| p / 10.0).collect();
                nelder_mead(
                    f,
                    start,
                    &scales,
                    &NmOptions { f_tol: cfg.local_tol, ..Default::default() },
                )
            }
            LocalMethod::QuasiNewton => lbfgs_numgrad(
                f,
                start,
                &LbfgsOptions { f_tol: cfg.local_tol, ..Default::default() },
            ),
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let first = local(x0);
    let mut current_x = first.x.clone();
    let mut current_f = first.value;
    let mut best_x = first.x;
    let mut best_f = first.value;
    let mut trace = Vec::with_capacity(cfg.hops + 1);
    trace.push(HopRecord { hop: 0, local_minimum: current_f, accepted: true, best_so_far: best_f });

    for hop in 1..=cfg.hops {
        let proposal: Vec<f64> = current_x
            .iter()
            .zip(&periods)
            .map(|(x, p)| {
                let s = cfg.hop_scale.unwrap_or(p / 4.0);
                x + rng.gen_range(-s..=s)
            })
            .collect();
        let r = local(&proposal);
        let delta = r.value - current_f;
        let accepted = delta < 0.0 || {
            let u: f64 = rng.gen_range(0.0..1.0);
            u < (-delta / cfg.temperature).exp()
        };
        if r.value < best_f {
            best_f = r.value;
            best_x = r.x.clone();
        }
        if accepted {
            current_x = r.x;
            current_f = r.value;
        }
        trace.push(HopRecord { hop, local_minimum: r.value, accepted, best_so_far: best_f });
    }

    // re-evaluate the folded representative; folding is exact on uniform
    // objectives, so prefer it when it does not lose energy
    let x_folded = obj.fold(&best_x);
    if let Some(ref xf) = x_folded {
        let ef = obj.evaluate(xf)?;
        if (ef - best_f).abs() > 1e-9 {
            return Err(Error::NoConvergence(format!(
                "folding changed the energy by {:.3e}",
                ef - best_f
            )));
        }
    }
    Ok(BbOptimum {
        x: best_x,
        x_folded,
        energy: best_f,
        trace,
        evaluations: evals.load(std::sync::atomic::Ordering::Relaxed),
        seed: cfg.seed,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Boundary-cone optimization: freeze the infinite-lattice schedule in
/// the bulk, free only the gates in `region`, and descend from the
/// unperturbed point. The result never exceeds the starting energy.
pub fn optimize_boundary(
    lat: &Lattice,
    infinite: &AngleSchedule,
    region: &ConeRegion,
    engine: Engine,
    cfg: &OptimizerConfig,
) -> Result<(SiteResolvedSchedule, f64, BbOptimum)> {
    let base = expand_uniform(infinite, lat)?;
    if region.is_empty() {
        let energy = resolved_energy(lat, engine, &base)?;
        let opt = BbOptimum {
            x: Vec::new(),
            x_folded: None,
            energy,
            trace: Vec::new(),
            evaluations: 1,
            seed: cfg.seed,
            wall_seconds: 0.0,
        };
        return Ok((base, energy, opt));
    }
    let obj = ObjectiveSpec::masked(lat.clone(), base.clone(), region.clone(), engine)?;
    let x0 = vec![0.0; obj.n_vars()];
    let opt = optimize_bb(&obj, cfg, &x0)?;
    let sched = region.apply_offsets(&base, &opt.x)?;
    Ok((sched, opt.energy, opt))
}

/// Schedules optimized on the infinite chain for a grid of field values;
/// the source for position-dependent angles.
#[derive(Debug, Clone)]
pub struct AngleLibrary {
    entries: Vec<(f64, AngleSchedule)>,
}

impl AngleLibrary {
    pub fn new(mut entries: Vec<(f64, AngleSchedule)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("empty angle library".into()));
        }
        let n = entries[0].1.n();
        if entries.iter().any(|(_, s)| s.n() != n) {
            return Err(Error::InvalidArgument("library entries must share N".into()));
        }
        if entries.iter().any(|(g, _)| !g.is_finite() || *g <= 0.0) {
            return Err(Error::InvalidArgument("library fields must be positive".into()));
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(Self { entries })
    }

    pub fn n_layers(&self) -> usize {
        self.entries[0].1.n()
    }

    pub fn g_range(&self) -> (f64, f64) {
        (self.entries[0].0, self.entries.last().unwrap().0)
    }

    pub fn entries(&self) -> &[(f64, AngleSchedule)] {
        &self.entries
    }

    /// Piecewise-linear interpolation of the whole angle vector at `g`.
    pub fn interpolate(&self, g: f64) -> Result<AngleSchedule> {
        let (lo, hi) = self.g_range();
        if g < lo - 1e-12 || g > hi + 1e-12 {
            return Err(Error::LibraryRange { g, lo, hi });
        }
        let e = &self.entries;
        if e.len() == 1 {
            return Ok(e[0].1.clone());
        }
        let mut k = 0;
        while k + 2 < e.len() && g > e[k + 1].0 {
            k += 1;
        }
        let (g0, s0) = (&e[k].0, &e[k].1);
        let (g1, s1) = (&e[k + 1].0, &e[k + 1].1);
        let t = if (g1 - g0).abs() < 1e-15 { 0.0 } else { ((g - g0) / (g1 - g0)).clamp(0.0, 1.0) };
        let betas = s0
            .betas()
            .iter()
            .zip(s1.betas())
            .map(|(a, b)| a + t * (b - a))
            .collect();
        let alphas = s0
            .alphas()
            .iter()
            .zip(s1.alphas())
            .map(|(a, b)| a + t * (b - a))
            .collect();
        AngleSchedule::new(betas, alphas)
    }
}

/// Position-dependent angles: each site takes the angles optimal for an
/// infinite chain at its local field; bonds use the mean of their
/// endpoint fields.
pub fn assign_local_angles(lat: &Lattice, library: &AngleLibrary) -> Result<SiteResolvedSchedule> {
    if !lat.is_finite() {
        return Err(Error::InvalidLattice("assign_local_angles needs a finite lattice".into()));
    }
    let n = library.n_layers();
    let bonds = lat.bonds();
    let sites = lat.sites();
    let mut beta_layers = vec![Vec::with_capacity(bonds.len()); n];
    let mut alpha_layers = vec![Vec::with_capacity(sites); n];
    for &(a, b) in &bonds {
        let s = library.interpolate(0.5 * (lat.g_at(a) + lat.g_at(b)))?;
        for (layer, row) in beta_layers.iter_mut().enumerate() {
            row.push(s.betas()[layer]);
        }
    }
    for i in 0..sites {
        let s = library.interpolate(lat.g_at(i))?;
        for (layer, row) in alpha_layers.iter_mut().enumerate() {
            row.push(s.alphas()[layer]);
        }
    }
    SiteResolvedSchedule::new(beta_layers, alpha_layers)
}

/// Resample an optimal N-layer schedule onto N' layers by interpolating
/// the smooth angle sequences at bang midpoints; a warm start for the
/// next table row.
pub fn interpolate_schedule(prev: &AngleSchedule, new_n: usize) -> AngleSchedule {
    let n = prev.n();
    if new_n == n {
        return prev.clone();
    }
    let sample = |vals: &[f64], t: f64| -> f64 {
        // nodes at (j + 1/2)/n, flat extrapolation outside
        let pos = t * n as f64 - 0.5;
        if pos <= 0.0 {
            return vals[0];
        }
        if pos >= (n - 1) as f64 {
            return vals[n - 1];
        }
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        vals[k] + frac * (vals[k + 1] - vals[k])
    };
    let betas = (0..new_n)
        .map(|j| sample(prev.betas(), (j as f64 + 0.5) / new_n as f64))
        .collect();
    let alphas = (0..new_n)
        .map(|j| sample(prev.alphas(), (j as f64 + 0.5) / new_n as f64))
        .collect();
    AngleSchedule::new(betas, alphas).expect("interpolation preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_offsets_reproduce_base_energy() {
        let lat = Lattice::open_chain(12, 1.1).unwrap();
        let uni = AngleSchedule::new(vec![0.35, 0.21], vec![0.44, 0.3]).unwrap();
        let base = expand_uniform(&uni, &lat).unwrap();
        let region = crate::cone::cone_for_depth(&lat, 2, 3, true).unwrap();
        let e_base = resolved_energy(&lat, Engine::Sv, &base).unwrap();
        let obj =
            ObjectiveSpec::masked(lat, base, region, Engine::Sv).unwrap();
        let e = obj.evaluate(&vec![0.0; obj.n_vars()]).unwrap();
        assert_eq!(e, e_base);
    }

    #[test]
    fn uniform_objective_engines_agree() {
        // ring(12) statevector vs infinite-chain itebd for N=2
        let g = 1.1;
        let x = [0.35, 0.21, 0.44, 0.3];
        let inf = ObjectiveSpec::uniform_infinite(g, 2, Engine::itebd_default()).unwrap();
        let ring = ObjectiveSpec::uniform_finite(
            Lattice::ring(12, g).unwrap(),
            2,
            Engine::Sv,
        )
        .unwrap();
        let e1 = inf.evaluate(&x).unwrap();
        let e2 = ring.evaluate(&x).unwrap();
        assert_abs_diff_eq!(e1, e2, epsilon = 1e-10);
    }

    #[test]
    fn sign_flip_symmetry_at_zero_base() {
        let obj = ObjectiveSpec::uniform_finite(
            Lattice::ring(10, 1.1).unwrap(),
            2,
            Engine::Sv,
        )
        .unwrap();
        let x = [0.3, -0.7, 0.2, 0.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(
            obj.evaluate(&x).unwrap(),
            obj.evaluate(&neg).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn folding_preserves_energy() {
        let g = 1.1;
        let obj = ObjectiveSpec::uniform_infinite(g, 2, Engine::itebd_default()).unwrap();
        let x = [0.35 + beta_period() * 3.0, 0.21, 0.44 - alpha_period(0, 2, g), 0.3];
        let folded = obj.fold(&x).unwrap();
        assert_abs_diff_eq!(
            obj.evaluate(&x).unwrap(),
            obj.evaluate(&folded).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn evaluate_is_deterministic() {
        let obj = ObjectiveSpec::uniform_infinite(1.1, 3, Engine::itebd_default()).unwrap();
        let x = [0.3, 0.25, 0.2, 0.4, 0.35, 0.35];
        let a = obj.evaluate(&x).unwrap();
        let b = obj.evaluate(&x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn ap_energy_approaches_minus_g_for_tiny_dt() {
        let lat = Lattice::infinite_chain(1.1).unwrap();
        let s = ap_schedule(ApConfig::new(4, 1e-8).unwrap());
        let e = uniform_energy(&lat, Engine::itebd_default(), &s).unwrap();
        assert_abs_diff_eq!(e, -1.1, epsilon = 1e-16 + 1e-10);
    }

    #[test]
    fn ap_table_value_n2() {
        let lat = Lattice::infinite_chain(1.1).unwrap();
        let r = optimize_ap(&lat, 2, Engine::itebd_default(), 1.2).unwrap();
        assert_abs_diff_eq!(r.energy, -1.145280, epsilon = 1e-5);
    }

    #[test]
    fn basin_hopping_finds_global_minimum_n1() {
        let g = 1.1;
        let obj = ObjectiveSpec::uniform_infinite(g, 1, Engine::itebd_default()).unwrap();
        // dense scan of the two-variable fundamental domain as the oracle
        let mut best = f64::INFINITY;
        for i in 0..40 {
            for j in 0..40 {
                let b = beta_period() * (i as f64 + 0.5) / 40.0;
                let a = alpha_period(0, 1, g) * (j as f64 + 0.5) / 40.0;
                best = best.min(obj.evaluate(&[b, a]).unwrap());
            }
        }
        let cfg = OptimizerConfig { hops: 8, seed: 1, ..Default::default() };
        let r = optimize_bb(&obj, &cfg, &[0.1, 0.1]).unwrap();
        assert!(r.energy <= best + 1e-6, "bb {} vs scan {best}", r.energy);
        // trace bookkeeping
        assert_eq!(r.trace.len(), 9);
        assert!(r.trace.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
        let folded = r.x_folded.unwrap();
        assert!(folded[0] >= 0.0 && folded[0] < beta_period());
    }

    #[test]
    fn boundary_optimization_never_worsens() {
        let g = 1.1;
        let lat = Lattice::open_chain(24, g).unwrap();
        let uni = AngleSchedule::new(vec![0.5, 0.3], vec![0.55, 0.35]).unwrap();
        let base_e =
            resolved_energy(&lat, Engine::fmps_default(), &expand_uniform(&uni, &lat).unwrap())
                .unwrap();
        let region = crate::cone::ends_region(&lat, 2, true).unwrap();
        let cfg = OptimizerConfig { hops: 2, seed: 3, ..Default::default() };
        let (sched, e, record) =
            optimize_boundary(&lat, &uni, &region, Engine::fmps_default(), &cfg).unwrap();
        assert!(e <= base_e + 1e-14, "optimized {e} vs base {base_e}");
        assert_eq!(record.trace.len(), 3);
        // bulk gates untouched
        assert_eq!(sched.beta(0, 10), 0.5);
        assert_eq!(sched.alpha(1, 12), 0.35);

        // empty region short-circuits to the base energy
        let empty = crate::cone::cone_for_depth(&lat, 2, 0, true).unwrap();
        let (_, e0, _) =
            optimize_boundary(&lat, &uni, &empty, Engine::fmps_default(), &cfg).unwrap();
        assert_abs_diff_eq!(e0, base_e, epsilon = 1e-14);
    }

    #[test]
    fn library_interpolation() {
        let s1 = AngleSchedule::new(vec![0.2, 0.4], vec![0.3, 0.5]).unwrap();
        let s2 = AngleSchedule::new(vec![0.4, 0.8], vec![0.5, 0.7]).unwrap();
        let lib = AngleLibrary::new(vec![(1.0, s1.clone()), (1.2, s2)]).unwrap();
        let mid = lib.interpolate(1.1).unwrap();
        assert_abs_diff_eq!(mid.betas()[0], 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(mid.alphas()[1], 0.6, epsilon = 1e-14);
        assert!(lib.interpolate(0.9).is_err());
        assert!(lib.interpolate(1.3).is_err());

        // duplicate grid values interpolate to a constant
        let dup = AngleLibrary::new(vec![(1.0, s1.clone()), (1.0, s1.clone())]).unwrap();
        let c = dup.interpolate(1.0).unwrap();
        assert_eq!(c.betas(), s1.betas());
    }

    #[test]
    fn local_angles_reduce_to_uniform_on_flat_profile() {
        let g = 1.1;
        let lat = Lattice::open_chain_profile(vec![g; 10]).unwrap();
        let s = AngleSchedule::new(vec![0.2, 0.4], vec![0.3, 0.5]).unwrap();
        let lib = AngleLibrary::new(vec![(1.0, s.clone()), (1.2, s.clone())]).unwrap();
        let sched = assign_local_angles(&lat, &lib).unwrap();
        let direct = expand_uniform(&s, &lat).unwrap();
        for layer in 0..2 {
            for b in 0..9 {
                assert_abs_diff_eq!(sched.beta(layer, b), direct.beta(layer, b), epsilon = 1e-14);
            }
            for i in 0..10 {
                assert_abs_diff_eq!(
                    sched.alpha(layer, i),
                    direct.alpha(layer, i),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn schedule_interpolation_endpoints() {
        let s = AngleSchedule::new(vec![0.1, 0.2, 0.3], vec![0.4, 0.4, 0.4]).unwrap();
        let same = interpolate_schedule(&s, 3);
        assert_eq!(same.betas(), s.betas());
        let up = interpolate_schedule(&s, 5);
        assert_eq!(up.n(), 5);
        // monotone input stays monotone, constant stays constant
        assert!(up.betas().windows(2).all(|w| w[0] <= w[1]));
        assert!(up.alphas().iter().all(|&a| (a - 0.4).abs() < 1e-14));
    }
}
