//! Lattices, Hamiltonian field profiles, and the two schedule families.
//!
//! The target Hamiltonian is the transverse-field Ising model
//! `H = -g Σ_i X_i - Σ_<ij> Z_i Z_j` on a chain or square lattice. A
//! bang-bang circuit alternates `N` layers of two-site ZZ rotations and
//! single-site X rotations applied to the product state with all spins
//! along +x:
//!
//! ```text
//! U = exp(+i α_N g/2 ΣX) · exp(+i β_N ΣZZ) · ... · exp(+i α_1 g ΣX) · exp(+i β_1 ΣZZ)
//! ```
//!
//! ZZ layers come first within a bang and the final X layer carries an
//! explicit 1/2 on its angle; [`x_angle`] is the single source of that
//! convention for every engine.

use crate::{Error, Result};

/// Lattice geometry plus the transverse-field profile living on it.
///
/// Site indices are row-major for 2D kinds (`site = y*lx + x`).
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    kind: LatticeKind,
    field: FieldProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    InfiniteChain,
    OpenChain(usize),
    Ring(usize),
    OpenSquare(usize, usize),
    Torus(usize, usize),
}

/// Transverse field: one uniform `g` or one `g_i` per site.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldProfile {
    Uniform(f64),
    PerSite(Vec<f64>),
}

impl Lattice {
    pub fn new(kind: LatticeKind, field: FieldProfile) -> Result<Self> {
        match kind {
            LatticeKind::OpenChain(l) | LatticeKind::Ring(l) if l < 2 => {
                return Err(Error::InvalidLattice(format!("L = {l} < 2")));
            }
            LatticeKind::OpenSquare(lx, ly) if lx < 2 || ly < 2 => {
                return Err(Error::InvalidLattice(format!("{lx}x{ly} lattice; need Lx, Ly >= 2")));
            }
            // a 2-wide torus would double every wrap bond
            LatticeKind::Torus(lx, ly) if lx < 3 || ly < 3 => {
                return Err(Error::InvalidLattice(format!("{lx}x{ly} torus; need Lx, Ly >= 3")));
            }
            _ => {}
        }
        match &field {
            FieldProfile::Uniform(g) => {
                if !g.is_finite() || *g <= 0.0 {
                    return Err(Error::InvalidLattice(format!("field g = {g} must be > 0")));
                }
            }
            FieldProfile::PerSite(gs) => {
                if kind == LatticeKind::InfiniteChain {
                    return Err(Error::InvalidLattice(
                        "per-site field profile on an infinite chain".into(),
                    ));
                }
                let n = site_count_of(kind).expect("finite kind");
                if gs.len() != n {
                    return Err(Error::InvalidLattice(format!(
                        "field profile has {} entries, lattice has {n} sites",
                        gs.len()
                    )));
                }
                if gs.iter().any(|g| !g.is_finite() || *g <= 0.0) {
                    return Err(Error::InvalidLattice("all g_i must be finite and > 0".into()));
                }
            }
        }
        Ok(Self { kind, field })
    }

    /// Infinite chain with uniform field.
    pub fn infinite_chain(g: f64) -> Result<Self> {
        Self::new(LatticeKind::InfiniteChain, FieldProfile::Uniform(g))
    }

    pub fn open_chain(l: usize, g: f64) -> Result<Self> {
        Self::new(LatticeKind::OpenChain(l), FieldProfile::Uniform(g))
    }

    pub fn ring(l: usize, g: f64) -> Result<Self> {
        Self::new(LatticeKind::Ring(l), FieldProfile::Uniform(g))
    }

    pub fn open_square(lx: usize, ly: usize, g: f64) -> Result<Self> {
        Self::new(LatticeKind::OpenSquare(lx, ly), FieldProfile::Uniform(g))
    }

    pub fn torus(lx: usize, ly: usize, g: f64) -> Result<Self> {
        Self::new(LatticeKind::Torus(lx, ly), FieldProfile::Uniform(g))
    }

    /// Open chain with a per-site field profile.
    pub fn open_chain_profile(gs: Vec<f64>) -> Result<Self> {
        let l = gs.len();
        Self::new(LatticeKind::OpenChain(l), FieldProfile::PerSite(gs))
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn field(&self) -> &FieldProfile {
        &self.field
    }

    pub fn is_finite(&self) -> bool {
        self.kind != LatticeKind::InfiniteChain
    }

    /// Number of sites. Finite kinds only.
    pub fn sites(&self) -> usize {
        site_count_of(self.kind).expect("site count of an infinite lattice")
    }

    /// Transverse field at a site. For the uniform profile any index is valid.
    pub fn g_at(&self, site: usize) -> f64 {
        match &self.field {
            FieldProfile::Uniform(g) => *g,
            FieldProfile::PerSite(gs) => gs[site],
        }
    }

    /// The uniform field value, or `None` for genuinely per-site profiles.
    pub fn uniform_g(&self) -> Option<f64> {
        match &self.field {
            FieldProfile::Uniform(g) => Some(*g),
            FieldProfile::PerSite(gs) => {
                let g0 = gs[0];
                gs.iter().all(|g| *g == g0).then_some(g0)
            }
        }
    }

    /// Nearest-neighbour bonds in the canonical enumeration order.
    ///
    /// Chains list `(i, i+1)` left to right, a ring appends the wrap bond
    /// `(L-1, 0)` last. 2D kinds list horizontal bonds before vertical
    /// bonds, each group sorted lexicographically by the row-major
    /// `(min, max)` site pair. Finite kinds only.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        match self.kind {
            LatticeKind::InfiniteChain => panic!("bond list of an infinite lattice"),
            LatticeKind::OpenChain(l) => (0..l - 1).map(|i| (i, i + 1)).collect(),
            LatticeKind::Ring(l) => (0..l).map(|i| (i, (i + 1) % l)).collect(),
            LatticeKind::OpenSquare(lx, ly) => square_bonds(lx, ly, false),
            LatticeKind::Torus(lx, ly) => square_bonds(lx, ly, true),
        }
    }

    pub fn n_bonds(&self) -> usize {
        match self.kind {
            LatticeKind::InfiniteChain => panic!("bond count of an infinite lattice"),
            LatticeKind::OpenChain(l) => l - 1,
            LatticeKind::Ring(l) => l,
            LatticeKind::OpenSquare(lx, ly) => 2 * lx * ly - lx - ly,
            LatticeKind::Torus(lx, ly) => 2 * lx * ly,
        }
    }

    /// Adjacency lists built from [`Lattice::bonds`].
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.sites()];
        for (a, b) in self.bonds() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

fn site_count_of(kind: LatticeKind) -> Option<usize> {
    match kind {
        LatticeKind::InfiniteChain => None,
        LatticeKind::OpenChain(l) | LatticeKind::Ring(l) => Some(l),
        LatticeKind::OpenSquare(lx, ly) | LatticeKind::Torus(lx, ly) => Some(lx * ly),
    }
}

fn square_bonds(lx: usize, ly: usize, wrap: bool) -> Vec<(usize, usize)> {
    let site = |x: usize, y: usize| y * lx + x;
    let mut horizontal = Vec::new();
    let mut vertical = Vec::new();
    for y in 0..ly {
        for x in 0..lx {
            if x + 1 < lx {
                horizontal.push((site(x, y), site(x + 1, y)));
            } else if wrap {
                horizontal.push((site(0, y), site(x, y)));
            }
            if y + 1 < ly {
                vertical.push((site(x, y), site(x, y + 1)));
            } else if wrap {
                vertical.push((site(x, 0), site(x, y)));
            }
        }
    }
    horizontal.sort_unstable();
    vertical.sort_unstable();
    horizontal.extend(vertical);
    horizontal
}

/// The 2N uniform variational angles of a bang-bang circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
}

impl AngleSchedule {
    pub fn new(betas: Vec<f64>, alphas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || betas.len() != alphas.len() {
            return Err(Error::InvalidSchedule(format!(
                "need N >= 1 with matching angle counts, got {} betas / {} alphas",
                betas.len(),
                alphas.len()
            )));
        }
        if betas.iter().chain(alphas.iter()).any(|a| !a.is_finite()) {
            return Err(Error::InvalidSchedule("angles must be finite".into()));
        }
        Ok(Self { betas, alphas })
    }

    /// The all-zero schedule (identity circuit).
    pub fn zero(n: usize) -> Self {
        Self { betas: vec![0.0; n], alphas: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Flat `[β_1..β_N, α_1..α_N]` parameter vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.betas.clone();
        v.extend_from_slice(&self.alphas);
        v
    }

    /// Inverse of [`AngleSchedule::to_vec`].
    pub fn from_vec(x: &[f64]) -> Result<Self> {
        if x.len() < 2 || x.len() % 2 != 0 {
            return Err(Error::InvalidSchedule(format!(
                "flat angle vector must have even length >= 2, got {}",
                x.len()
            )));
        }
        let n = x.len() / 2;
        Self::new(x[..n].to_vec(), x[n..].to_vec())
    }
}

/// Adiabatic-preparation configuration: the Trotterized smooth ramp with a
/// single time step `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApConfig {
    pub n: usize,
    pub dt: f64,
}

impl ApConfig {
    pub fn new(n: usize, dt: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidSchedule("AP needs N >= 1".into()));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidSchedule(format!("AP time step dt = {dt} must be > 0")));
        }
        Ok(Self { n, dt })
    }

    /// Total ramp time `tau = N * dt`.
    pub fn tau(&self) -> f64 {
        self.n as f64 * self.dt
    }
}

/// Smooth coupling ramp `J(s) = 1/2 + 1/2 sin(pi (s - 1/2))` from 0 to 1.
pub fn ramp(s: f64) -> f64 {
    0.5 + 0.5 * (std::f64::consts::PI * (s - 0.5)).sin()
}

/// Bang-bang angles of the Trotterized adiabatic ramp: the ZZ angle at bang
/// `j` samples the ramp midpoint, the X angle is the bare time step.
pub fn ap_schedule(cfg: ApConfig) -> AngleSchedule {
    let n = cfg.n;
    let betas = (1..=n)
        .map(|j| cfg.dt * ramp((2 * j - 1) as f64 / (2 * n) as f64))
        .collect();
    let alphas = vec![cfg.dt; n];
    AngleSchedule { betas, alphas }
}

/// Period of the energy in any `β_j` direction.
pub fn beta_period() -> f64 {
    std::f64::consts::FRAC_PI_2
}

/// Period of the energy in the `α_j` direction of an `n`-layer circuit
/// (`layer` is 0-based). The final layer carries the 1/2 factor, doubling
/// its period.
pub fn alpha_period(layer: usize, n: usize, g: f64) -> f64 {
    if layer + 1 == n {
        std::f64::consts::PI / g
    } else {
        std::f64::consts::FRAC_PI_2 / g
    }
}

/// Fold every angle into its fundamental domain `[0, T)`.
///
/// On a translationally invariant lattice the folded schedule reproduces
/// the energy of the input exactly; the state may differ by gauge.
pub fn fold_angles(s: &AngleSchedule, g: f64) -> AngleSchedule {
    let n = s.n();
    let betas = s.betas.iter().map(|b| b.rem_euclid(beta_period())).collect();
    let alphas = s
        .alphas
        .iter()
        .enumerate()
        .map(|(j, a)| a.rem_euclid(alpha_period(j, n, g)))
        .collect();
    AngleSchedule { betas, alphas }
}

/// The X-gate rotation angle for layer `layer` (0-based) of an `n`-layer
/// circuit at local field `g`: `θ = g·α`, halved on the final layer.
pub fn x_angle(alpha: f64, g: f64, layer: usize, n: usize) -> f64 {
    let scale = if layer + 1 == n { 0.5 } else { 1.0 };
    scale * g * alpha
}

/// Per-gate angles on a finite lattice: one β per bond and one α per site,
/// for each of the N layers. Bond and site indices follow the lattice's
/// canonical enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteResolvedSchedule {
    beta_layers: Vec<Vec<f64>>,
    alpha_layers: Vec<Vec<f64>>,
}

impl SiteResolvedSchedule {
    pub fn new(beta_layers: Vec<Vec<f64>>, alpha_layers: Vec<Vec<f64>>) -> Result<Self> {
        if beta_layers.is_empty() || beta_layers.len() != alpha_layers.len() {
            return Err(Error::InvalidSchedule(
                "need N >= 1 with matching beta/alpha layer counts".into(),
            ));
        }
        let nb = beta_layers[0].len();
        let ns = alpha_layers[0].len();
        if beta_layers.iter().any(|l| l.len() != nb) || alpha_layers.iter().any(|l| l.len() != ns)
        {
            return Err(Error::InvalidSchedule("ragged schedule layers".into()));
        }
        Ok(Self { beta_layers, alpha_layers })
    }

    pub fn n(&self) -> usize {
        self.beta_layers.len()
    }

    pub fn n_bonds(&self) -> usize {
        self.beta_layers[0].len()
    }

    pub fn n_sites(&self) -> usize {
        self.alpha_layers[0].len()
    }

    pub fn beta(&self, layer: usize, bond: usize) -> f64 {
        self.beta_layers[layer][bond]
    }

    pub fn alpha(&self, layer: usize, site: usize) -> f64 {
        self.alpha_layers[layer][site]
    }

    pub fn beta_layer(&self, layer: usize) -> &[f64] {
        &self.beta_layers[layer]
    }

    pub fn alpha_layer(&self, layer: usize) -> &[f64] {
        &self.alpha_layers[layer]
    }

    pub fn beta_mut(&mut self, layer: usize, bond: usize) -> &mut f64 {
        &mut self.beta_layers[layer][bond]
    }

    pub fn alpha_mut(&mut self, layer: usize, site: usize) -> &mut f64 {
        &mut self.alpha_layers[layer][site]
    }

    /// Check the layer shapes against a lattice.
    pub fn validate_for(&self, lat: &Lattice) -> Result<()> {
        if !lat.is_finite() {
            return Err(Error::InvalidLattice(
                "site-resolved schedules need a finite lattice".into(),
            ));
        }
        if self.n_bonds() != lat.n_bonds() || self.n_sites() != lat.sites() {
            return Err(Error::InvalidSchedule(format!(
                "schedule sized {}x{} (bonds x sites) but lattice has {}x{}",
                self.n_bonds(),
                self.n_sites(),
                lat.n_bonds(),
                lat.sites()
            )));
        }
        Ok(())
    }
}

/// Spread a uniform schedule over every bond and site of a finite lattice.
pub fn expand_uniform(s: &AngleSchedule, lat: &Lattice) -> Result<SiteResolvedSchedule> {
    if !lat.is_finite() {
        return Err(Error::InvalidLattice("cannot expand onto an infinite lattice".into()));
    }
    let nb = lat.n_bonds();
    let ns = lat.sites();
    let beta_layers = s.betas.iter().map(|&b| vec![b; nb]).collect();
    let alpha_layers = s.alphas.iter().map(|&a| vec![a; ns]).collect();
    SiteResolvedSchedule::new(beta_layers, alpha_layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ap_single_layer_samples_ramp_midpoint() {
        let s = ap_schedule(ApConfig::new(1, 0.2).unwrap());
        assert_abs_diff_eq!(s.betas()[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.alphas()[0], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn ap_two_layers_direct_evaluation() {
        let s = ap_schedule(ApConfig::new(2, 1.0).unwrap());
        let r = 0.5 * std::f64::consts::SQRT_2;
        assert_abs_diff_eq!(s.betas()[0], 0.5 * (1.0 - r), epsilon = 1e-15);
        assert_abs_diff_eq!(s.betas()[1], 0.5 * (1.0 + r), epsilon = 1e-15);
        assert_eq!(s.alphas(), &[1.0, 1.0]);
    }

    #[test]
    fn ap_angles_vanish_with_dt() {
        let s = ap_schedule(ApConfig::new(10, 1e-12).unwrap());
        assert!(s.betas().iter().all(|b| b.abs() <= 1e-12));
        assert!(s.alphas().iter().all(|a| a.abs() <= 1e-12));
    }

    #[test]
    fn fold_subtracts_one_alpha_period() {
        let s = AngleSchedule::new(vec![0.3, 0.3], vec![1.5, 0.2]).unwrap();
        let f = fold_angles(&s, 1.1);
        // alpha_1 is not the final layer: period pi/(2g)
        assert_abs_diff_eq!(f.alphas()[0], 1.5 - std::f64::consts::PI / 2.2, epsilon = 1e-12);
        assert_abs_diff_eq!(f.alphas()[0], 0.0720037, epsilon = 1e-6);
        assert_abs_diff_eq!(f.alphas()[1], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn fold_is_identity_inside_domain() {
        let s = AngleSchedule::new(vec![0.3, 1.5], vec![0.2, 1.4]).unwrap();
        let f = fold_angles(&s, 1.1);
        assert_eq!(s, f);
    }

    #[test]
    fn fold_beta_at_period_boundary() {
        let s = AngleSchedule::new(vec![beta_period()], vec![0.1]).unwrap();
        let f = fold_angles(&s, 1.1);
        assert_abs_diff_eq!(f.betas()[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn final_alpha_has_doubled_period() {
        assert_abs_diff_eq!(alpha_period(2, 3, 1.1), std::f64::consts::PI / 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(
            alpha_period(1, 3, 1.1),
            std::f64::consts::PI / 2.2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn expand_uniform_shapes_open_chain() {
        let lat = Lattice::open_chain(5, 1.1).unwrap();
        let s = AngleSchedule::new(vec![0.1, 0.2], vec![0.3, 0.4]).unwrap();
        let e = expand_uniform(&s, &lat).unwrap();
        assert_eq!(e.n(), 2);
        assert_eq!(e.n_bonds(), 4);
        assert_eq!(e.n_sites(), 5);
        assert!(e.beta_layer(0).iter().all(|&b| b == 0.1));
        assert!(e.beta_layer(1).iter().all(|&b| b == 0.2));
        assert!(e.alpha_layer(1).iter().all(|&a| a == 0.4));
    }

    #[test]
    fn expand_uniform_shapes_open_square() {
        let lat = Lattice::open_square(3, 3, 1.1).unwrap();
        assert_eq!(lat.n_bonds(), 12);
        assert_eq!(lat.bonds().len(), 12);
        let s = AngleSchedule::new(vec![0.1], vec![0.3]).unwrap();
        let e = expand_uniform(&s, &lat).unwrap();
        assert_eq!(e.n_bonds(), 12);
        assert_eq!(e.n_sites(), 9);
    }

    #[test]
    fn expand_uniform_rejects_infinite() {
        let lat = Lattice::infinite_chain(1.1).unwrap();
        let s = AngleSchedule::new(vec![0.1], vec![0.3]).unwrap();
        assert!(expand_uniform(&s, &lat).is_err());
    }

    #[test]
    fn square_bond_enumeration_is_stable() {
        let lat = Lattice::open_square(3, 2, 1.0).unwrap();
        // sites: 0 1 2 / 3 4 5; horizontal bonds first, then vertical.
        assert_eq!(
            lat.bonds(),
            vec![(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)]
        );
        assert_eq!(lat.n_bonds(), 7);
    }

    #[test]
    fn torus_bond_count() {
        let lat = Lattice::torus(4, 4, 3.1).unwrap();
        assert_eq!(lat.bonds().len(), 32);
        assert_eq!(lat.n_bonds(), 32);
        // every site has coordination 4
        let adj = lat.neighbors();
        assert!(adj.iter().all(|a| a.len() == 4));
    }

    #[test]
    fn lattice_validation() {
        assert!(Lattice::open_chain(1, 1.0).is_err());
        assert!(Lattice::open_square(1, 4, 1.0).is_err());
        assert!(Lattice::open_chain(4, -1.0).is_err());
        assert!(Lattice::open_chain_profile(vec![1.0, 1.0, 0.0]).is_err());
        assert!(Lattice::new(
            LatticeKind::OpenChain(3),
            FieldProfile::PerSite(vec![1.0, 2.0])
        )
        .is_err());
        assert!(Lattice::new(LatticeKind::InfiniteChain, FieldProfile::PerSite(vec![1.0])).is_err());
    }

    #[test]
    fn uniform_g_detects_constant_profiles() {
        let lat = Lattice::open_chain_profile(vec![1.1; 4]).unwrap();
        assert_eq!(lat.uniform_g(), Some(1.1));
        let lat = Lattice::open_chain_profile(vec![1.1, 1.2, 1.2, 1.1]).unwrap();
        assert_eq!(lat.uniform_g(), None);
    }
}
