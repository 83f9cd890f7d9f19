//! Causal cones of the brickwork bang-bang circuit.
//!
//! A ZZ layer spreads influence one site per application; X layers are
//! strictly local. Working backward from the measured sites, a gate at
//! layer `j` (0-based, of `n`) can reach them iff its support lies within
//! graph distance `n - 1 - j` of the target set. [`cone_for_depth`] frees
//! exactly those gates for the target "all sites within depth `d` of the
//! lattice boundary"; [`ends_region`], [`corner_region`] and
//! [`edge_region`] free the hand-picked boundary sets used in the tables.
//!
//! Free slots are partitioned into tying groups (mirror pairs in 1D,
//! symmetry orbits of the square in 2D); each group is one optimization
//! variable, applied as a common offset on all of its slots.

use std::collections::{BTreeSet, HashMap};

use crate::model::{Lattice, LatticeKind, SiteResolvedSchedule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GateKind {
    Bond,
    Site,
}

/// One tying group: all slots share a single offset variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieGroup {
    pub kind: GateKind,
    pub layer: usize,
    pub slots: Vec<usize>,
}

/// A set of free gate slots of an `n`-layer circuit on a finite lattice,
/// partitioned into tying groups.
#[derive(Debug, Clone)]
pub struct ConeRegion {
    lattice: Lattice,
    n_layers: usize,
    groups: Vec<TieGroup>,
    clamped: bool,
}

impl ConeRegion {
    fn from_free_slots(
        lattice: Lattice,
        n_layers: usize,
        free_bonds: &[BTreeSet<usize>],
        free_sites: &[BTreeSet<usize>],
        ops: &[SitePermutation],
        clamped: bool,
    ) -> Self {
        let bond_index = bond_lookup(&lattice);
        let bonds = lattice.bonds();
        let mut groups = Vec::new();
        for layer in 0..n_layers {
            for (kind, free) in
                [(GateKind::Bond, &free_bonds[layer]), (GateKind::Site, &free_sites[layer])]
            {
                let mut seen = BTreeSet::new();
                for &slot in free {
                    if seen.contains(&slot) {
                        continue;
                    }
                    let mut orbit = BTreeSet::new();
                    orbit.insert(slot);
                    for op in ops {
                        let image = match kind {
                            GateKind::Site => op.site(slot),
                            GateKind::Bond => {
                                let (a, b) = bonds[slot];
                                let (ia, ib) = (op.site(a), op.site(b));
                                let key = (ia.min(ib), ia.max(ib));
                                *bond_index.get(&key).expect("symmetry maps bonds to bonds")
                            }
                        };
                        debug_assert!(
                            free.contains(&image),
                            "tying symmetry must preserve the free set"
                        );
                        orbit.insert(image);
                    }
                    seen.extend(orbit.iter().copied());
                    groups.push(TieGroup { kind, layer, slots: orbit.into_iter().collect() });
                }
            }
        }
        Self { lattice, n_layers, groups, clamped }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    /// Number of independent optimization variables.
    pub fn n_vars(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[TieGroup] {
        &self.groups
    }

    /// Whether the requested depth exceeded the lattice extent.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn free_bonds(&self, layer: usize) -> BTreeSet<usize> {
        self.slots_of(GateKind::Bond, layer)
    }

    pub fn free_sites(&self, layer: usize) -> BTreeSet<usize> {
        self.slots_of(GateKind::Site, layer)
    }

    fn slots_of(&self, kind: GateKind, layer: usize) -> BTreeSet<usize> {
        self.groups
            .iter()
            .filter(|g| g.kind == kind && g.layer == layer)
            .flat_map(|g| g.slots.iter().copied())
            .collect()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        (0..self.n_layers).all(|l| {
            self.free_bonds(l).is_subset(&other.free_bonds(l))
                && self.free_sites(l).is_subset(&other.free_sites(l))
        })
    }

    /// Forward light cone of the free gates: every site they can affect.
    pub fn affected_sites(&self) -> BTreeSet<usize> {
        let adj = self.lattice.neighbors();
        let bonds = self.lattice.bonds();
        let mut affected = BTreeSet::new();
        for layer in 0..self.n_layers {
            let mut support: BTreeSet<usize> = self.free_sites(layer);
            for b in self.free_bonds(layer) {
                support.insert(bonds[b].0);
                support.insert(bonds[b].1);
            }
            let spread = self.n_layers - 1 - layer;
            let mut frontier = support.clone();
            for _ in 0..spread {
                let mut next = BTreeSet::new();
                for &s in &frontier {
                    for &t in &adj[s] {
                        if support.insert(t) {
                            next.insert(t);
                        }
                    }
                }
                if next.is_empty() {
                    break;
                }
                frontier = next;
            }
            affected.extend(support);
        }
        affected
    }

    /// Add the group offsets `x` onto a base schedule.
    pub fn apply_offsets(
        &self,
        base: &SiteResolvedSchedule,
        x: &[f64],
    ) -> Result<SiteResolvedSchedule> {
        if x.len() != self.groups.len() {
            return Err(Error::InvalidArgument(format!(
                "offset vector has {} entries, region has {} groups",
                x.len(),
                self.groups.len()
            )));
        }
        if base.n() != self.n_layers {
            return Err(Error::InvalidSchedule(format!(
                "base schedule has {} layers, region {}",
                base.n(),
                self.n_layers
            )));
        }
        base.validate_for(&self.lattice)?;
        let mut out = base.clone();
        for (g, &dx) in self.groups.iter().zip(x) {
            for &slot in &g.slots {
                match g.kind {
                    GateKind::Bond => *out.beta_mut(g.layer, slot) += dx,
                    GateKind::Site => *out.alpha_mut(g.layer, slot) += dx,
                }
            }
        }
        Ok(out)
    }

    /// Explicit slot lists, one group per line (audit format).
    pub fn slot_list(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "region: layers = {}, vars = {}, clamped = {}",
            self.n_layers,
            self.groups.len(),
            self.clamped
        );
        for (k, g) in self.groups.iter().enumerate() {
            let kind = match g.kind {
                GateKind::Bond => "bond",
                GateKind::Site => "site",
            };
            let slots: Vec<String> = g.slots.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "var {k}: layer {} {kind} slots {}", g.layer, slots.join(","));
        }
        s
    }

    /// Layered text diagram for chains (time runs upward, `*` = free).
    pub fn diagram(&self) -> String {
        use std::fmt::Write;
        let l = match self.lattice.kind() {
            LatticeKind::OpenChain(l) => l,
            _ => return self.slot_list(),
        };
        let mut s = String::new();
        for layer in (0..self.n_layers).rev() {
            let sites = self.free_sites(layer);
            let bonds = self.free_bonds(layer);
            let mut xrow = String::new();
            for i in 0..l {
                xrow.push(if sites.contains(&i) { '*' } else { '.' });
                xrow.push(' ');
            }
            let mut zrow = String::new();
            zrow.push(' ');
            for b in 0..l - 1 {
                zrow.push(if bonds.contains(&b) { '*' } else { '.' });
                zrow.push(' ');
            }
            let _ = writeln!(s, "layer {:>2}  X : {}", layer + 1, xrow.trim_end());
            let _ = writeln!(s, "          ZZ: {}", zrow.trim_end());
        }
        s
    }
}

/// Site permutation representing one lattice symmetry.
struct SitePermutation {
    map: Vec<usize>,
}

impl SitePermutation {
    fn site(&self, i: usize) -> usize {
        self.map[i]
    }
}

fn bond_lookup(lat: &Lattice) -> HashMap<(usize, usize), usize> {
    lat.bonds()
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| ((a.min(b), a.max(b)), k))
        .collect()
}

/// Mirror of an open chain.
fn chain_mirror(l: usize) -> SitePermutation {
    SitePermutation { map: (0..l).map(|i| l - 1 - i).collect() }
}

/// Symmetry group of an open rectangle: the dihedral group of the square
/// when `lx == ly`, otherwise the two axis reflections.
fn square_symmetries(lx: usize, ly: usize) -> Vec<SitePermutation> {
    let site = |x: usize, y: usize| y * lx + x;
    let mut ops: Vec<Box<dyn Fn(usize, usize) -> (usize, usize)>> = vec![
        Box::new(move |x, y| (lx - 1 - x, y)),
        Box::new(move |x, y| (x, ly - 1 - y)),
        Box::new(move |x, y| (lx - 1 - x, ly - 1 - y)),
    ];
    if lx == ly {
        let n = lx;
        ops.push(Box::new(move |x, y| (y, n - 1 - x))); // rotation
        ops.push(Box::new(move |x, y| (n - 1 - y, x))); // inverse rotation
        ops.push(Box::new(move |x, y| (y, x))); // transpose
        ops.push(Box::new(move |x, y| (n - 1 - y, n - 1 - x)));
    }
    ops.into_iter()
        .map(|f| {
            let mut map = vec![0; lx * ly];
            for y in 0..ly {
                for x in 0..lx {
                    let (xx, yy) = f(x, y);
                    map[site(x, y)] = site(xx, yy);
                }
            }
            SitePermutation { map }
        })
        .collect()
}

/// Sites within graph depth `d` of the open boundary (depth 1 = the
/// boundary itself).
fn boundary_shell(lat: &Lattice, d: usize) -> Result<BTreeSet<usize>> {
    let target: BTreeSet<usize> = match lat.kind() {
        LatticeKind::OpenChain(l) => {
            (0..d.min(l)).chain((l.saturating_sub(d))..l).collect()
        }
        LatticeKind::OpenSquare(lx, ly) => {
            let mut t = BTreeSet::new();
            for y in 0..ly {
                for x in 0..lx {
                    let depth = 1 + x.min(y).min(lx - 1 - x).min(ly - 1 - y);
                    if depth <= d {
                        t.insert(y * lx + x);
                    }
                }
            }
            t
        }
        _ => {
            return Err(Error::InvalidLattice(
                "causal cones of the boundary need an open lattice".into(),
            ))
        }
    };
    Ok(target)
}

fn symmetries_for(lat: &Lattice, mirror: bool) -> Vec<SitePermutation> {
    if !mirror {
        return Vec::new();
    }
    match lat.kind() {
        LatticeKind::OpenChain(l) => vec![chain_mirror(l)],
        LatticeKind::OpenSquare(lx, ly) => square_symmetries(lx, ly),
        _ => Vec::new(),
    }
}

/// Free every gate whose forward light cone can reach a site within depth
/// `d` of the boundary (both ends in 1D, the full frame in 2D).
///
/// With `mirror` set, symmetric slots share one variable. A depth beyond
/// the lattice extent clamps to the full lattice and flags the region.
pub fn cone_for_depth(lat: &Lattice, n: usize, d: usize, mirror: bool) -> Result<ConeRegion> {
    if n < 1 {
        return Err(Error::InvalidArgument("need n >= 1 layers".into()));
    }
    let max_depth = match lat.kind() {
        LatticeKind::OpenChain(l) => l.div_ceil(2),
        LatticeKind::OpenSquare(lx, ly) => lx.min(ly).div_ceil(2),
        _ => 0,
    };
    let target = boundary_shell(lat, d)?;
    let clamped = d > max_depth;

    let adj = lat.neighbors();
    let bonds = lat.bonds();
    let sites = lat.sites();
    // multi-source BFS distance to the target set
    let mut dist = vec![usize::MAX; sites];
    let mut frontier: Vec<usize> = target.iter().copied().collect();
    for &t in &frontier {
        dist[t] = 0;
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &s in &frontier {
            for &t in &adj[s] {
                if dist[t] == usize::MAX {
                    dist[t] = dist[s] + 1;
                    next.push(t);
                }
            }
        }
        frontier = next;
    }

    let mut free_bonds = Vec::with_capacity(n);
    let mut free_sites = Vec::with_capacity(n);
    for layer in 0..n {
        let spread = n - 1 - layer;
        let fb: BTreeSet<usize> = bonds
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| dist[a].min(dist[b]) <= spread)
            .map(|(k, _)| k)
            .collect();
        let fs: BTreeSet<usize> =
            (0..sites).filter(|&i| dist[i] <= spread).collect();
        free_bonds.push(fb);
        free_sites.push(fs);
    }
    let ops = symmetries_for(lat, mirror);
    Ok(ConeRegion::from_free_slots(lat.clone(), n, &free_bonds, &free_sites, &ops, clamped))
}

/// The minimal end optimization of a chain: the outermost site gate and
/// bond gate of every layer (mirrored by default).
pub fn ends_region(lat: &Lattice, n: usize, mirror: bool) -> Result<ConeRegion> {
    let l = match lat.kind() {
        LatticeKind::OpenChain(l) => l,
        _ => return Err(Error::InvalidLattice("ends regions are chain-only".into())),
    };
    let mut free_bonds = Vec::with_capacity(n);
    let mut free_sites = Vec::with_capacity(n);
    for _ in 0..n {
        let mut fb = BTreeSet::from([0usize]);
        let mut fs = BTreeSet::from([0usize]);
        if mirror {
            fb.insert(l - 2);
            fs.insert(l - 1);
        }
        free_bonds.push(fb);
        free_sites.push(fs);
    }
    let ops = if mirror { vec![chain_mirror(l)] } else { Vec::new() };
    Ok(ConeRegion::from_free_slots(lat.clone(), n, &free_bonds, &free_sites, &ops, false))
}

/// Corner gates of an open square: the 4 corner site gates (one tied
/// variable per layer) and the 8 corner-adjacent bond gates (one tied
/// variable per layer on squares; split by axis on rectangles).
pub fn corner_region(lat: &Lattice, n: usize) -> Result<ConeRegion> {
    let (lx, ly) = match lat.kind() {
        LatticeKind::OpenSquare(lx, ly) => (lx, ly),
        _ => return Err(Error::InvalidLattice("corner regions need an open square".into())),
    };
    let site = |x: usize, y: usize| y * lx + x;
    let corners = [site(0, 0), site(lx - 1, 0), site(0, ly - 1), site(lx - 1, ly - 1)];
    let corner_set: BTreeSet<usize> = corners.into_iter().collect();
    let lookup = bond_lookup(lat);
    let bonds = lat.bonds();
    let corner_bonds: BTreeSet<usize> = bonds
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| corner_set.contains(&a) || corner_set.contains(&b))
        .map(|(k, _)| k)
        .collect();
    debug_assert!(lookup.len() == bonds.len());

    let free_bonds = vec![corner_bonds; n];
    let free_sites = vec![corner_set; n];
    let ops = square_symmetries(lx, ly);
    Ok(ConeRegion::from_free_slots(lat.clone(), n, &free_bonds, &free_sites, &ops, false))
}

/// Edge gates of an open square: every boundary site gate and every bond
/// lying along the boundary, tied by the lattice symmetry group.
pub fn edge_region(lat: &Lattice, n: usize) -> Result<ConeRegion> {
    let (lx, ly) = match lat.kind() {
        LatticeKind::OpenSquare(lx, ly) => (lx, ly),
        _ => return Err(Error::InvalidLattice("edge regions need an open square".into())),
    };
    let boundary: BTreeSet<usize> = boundary_shell(lat, 1)?;
    let bonds = lat.bonds();
    let edge_bonds: BTreeSet<usize> = bonds
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| boundary.contains(&a) && boundary.contains(&b))
        .map(|(k, _)| k)
        .collect();
    let free_bonds = vec![edge_bonds; n];
    let free_sites = vec![boundary; n];
    let ops = square_symmetries(lx, ly);
    Ok(ConeRegion::from_free_slots(lat.clone(), n, &free_bonds, &free_sites, &ops, false))
}
