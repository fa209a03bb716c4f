//! One time step of the particle system on a finite window, built by sweeping
//! the horizontal line across the sites and multiplying vertex weights.
//!
//! Forward steps sweep left to right and the line enters empty. Reversed steps
//! sweep right to left and the line enters carrying color 0, or color `n` when
//! the right edge injects. A particle still on the line after the last site
//! exits (forward), is absorbed (reversed), or, at a closed edge, the outcome
//! is dropped and the matrix is flagged substochastic.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::params::ParamSampler;
use crate::qarith::Rational;
use crate::report::CheckReport;
use crate::state::{Composition, Configuration, FactorizationWitness, LatticeWindow, StateSpace};
use crate::vertex::{ModelParams, VertexTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Reversed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeftBoundary {
    Closed,
    Absorb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RightBoundary {
    Closed,
    Exit,
    InjectTop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub left: LeftBoundary,
    pub right: RightBoundary,
}

impl BoundarySpec {
    pub const FORWARD_EXIT: BoundarySpec = BoundarySpec {
        left: LeftBoundary::Closed,
        right: RightBoundary::Exit,
    };
    pub const REVERSED_ABSORB: BoundarySpec = BoundarySpec {
        left: LeftBoundary::Absorb,
        right: RightBoundary::Closed,
    };
    pub const REVERSED_INJECT: BoundarySpec = BoundarySpec {
        left: LeftBoundary::Absorb,
        right: RightBoundary::InjectTop,
    };

    pub fn validate(&self, direction: Direction) -> Result<()> {
        let ok = match direction {
            Direction::Forward => self.left == LeftBoundary::Closed && self.right != RightBoundary::InjectTop,
            Direction::Reversed => self.right != RightBoundary::Exit,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("boundary {self:?} does not fit a {direction:?} step")))
        }
    }

    fn entering_color(&self, n: usize) -> usize {
        if self.right == RightBoundary::InjectTop {
            n
        } else {
            0
        }
    }

    pub fn terminal_open(&self, direction: Direction) -> bool {
        match direction {
            Direction::Forward => self.right == RightBoundary::Exit,
            Direction::Reversed => self.left == LeftBoundary::Absorb,
        }
    }
}

/// Everything needed to build one step matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub n: usize,
    pub q: Rational,
    pub window: LatticeWindow,
    pub zvec: Vec<Rational>,
    pub direction: Direction,
    pub boundary: BoundarySpec,
}

impl StepSpec {
    pub fn new(
        n: usize,
        q: Rational,
        window: LatticeWindow,
        zvec: Vec<Rational>,
        direction: Direction,
        boundary: BoundarySpec,
    ) -> Self {
        StepSpec {
            n,
            q,
            window,
            zvec,
            direction,
            boundary,
        }
    }

    /// The same step at `(1/q, 1/z)`.
    pub fn inverted(&self) -> Result<Self> {
        let mut s = self.clone();
        s.q = self.q.recip();
        s.zvec = self.zvec.iter().map(Rational::checked_recip).collect::<Result<_>>()?;
        Ok(s)
    }

    pub fn with(&self, direction: Direction, boundary: BoundarySpec) -> Self {
        let mut s = self.clone();
        s.direction = direction;
        s.boundary = boundary;
        s
    }

    /// Grows the window, giving new sites the spectral parameters at the ends.
    pub fn extended(&self, left: usize, right: usize, z_left: &Rational, z_right: &Rational) -> Self {
        let mut s = self.clone();
        s.window = self.window.extended(left, right);
        let mut zs = vec![z_left.clone(); left];
        zs.extend(self.zvec.iter().cloned());
        zs.extend(std::iter::repeat(z_right.clone()).take(right));
        s.zvec = zs;
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub target: usize,
    /// Color that left the window (exited or absorbed); 0 when none did.
    pub boundary_color: usize,
    pub weight: Rational,
}

/// Per-site vertex tables for one step specification; produces outcomes on demand.
#[derive(Clone, Debug)]
pub struct StepKernel {
    pub spec: StepSpec,
    pub space: Arc<StateSpace>,
    tables: Vec<Arc<VertexTable>>,
}

impl StepKernel {
    pub fn new(spec: &StepSpec) -> Result<Self> {
        let space = Arc::new(StateSpace::new(spec.n, &spec.window)?);
        Self::with_space(spec, space)
    }

    pub fn with_space(spec: &StepSpec, space: Arc<StateSpace>) -> Result<Self> {
        spec.boundary.validate(spec.direction)?;
        if spec.zvec.len() != spec.window.len() {
            return Err(Error::Config(format!(
                "{} spectral parameters for {} sites",
                spec.zvec.len(),
                spec.window.len()
            )));
        }
        let mut cache: HashMap<(u32, &Rational), Arc<VertexTable>> = HashMap::new();
        let mut tables = Vec::with_capacity(spec.window.len());
        for (site, (&m, z)) in spec.window.capacities.iter().zip(&spec.zvec).enumerate() {
            if let Some(t) = cache.get(&(m, z)) {
                tables.push(t.clone());
                continue;
            }
            let p = ModelParams::new(spec.n, spec.q.clone(), z.clone())?;
            let t = match VertexTable::new(&p, m) {
                Ok(t) => Arc::new(t),
                Err(Error::Pole { capacity, .. }) => return Err(Error::Pole { site, capacity }),
                Err(e) => return Err(e),
            };
            cache.insert((m, z), t.clone());
            tables.push(t);
        }
        Ok(StepKernel {
            spec: spec.clone(),
            space,
            tables,
        })
    }

    pub fn table(&self, site: usize) -> &VertexTable {
        &self.tables[site]
    }

    /// Order in which the line visits the sites.
    pub fn sweep_order(&self) -> Vec<usize> {
        let len = self.spec.window.len();
        match self.spec.direction {
            Direction::Forward => (0..len).collect(),
            Direction::Reversed => (0..len).rev().collect(),
        }
    }

    pub fn entering_color(&self) -> usize {
        self.spec.boundary.entering_color(self.spec.n)
    }

    /// All nonzero outcomes from `source`, and whether any mass was dropped at a closed edge.
    pub fn outcomes(&self, source: usize) -> (Vec<Outcome>, bool) {
        let digits = self.space.digits(source);
        // path weights stay unreduced until the end; one gcd per outcome
        let mut partial: Vec<(usize, usize, BigInt, BigInt)> = vec![(0, self.entering_color(), BigInt::one(), BigInt::one())];
        for x in self.sweep_order() {
            let radix = self.space.radix(x);
            let table = &self.tables[x];
            let mut next = Vec::with_capacity(partial.len() * 2);
            for (acc, h, num, den) in &partial {
                for (k, di, vw) in &table.outs[*h][digits[x]] {
                    next.push((acc + di * radix, *k, num * vw.numer(), den * vw.denom()));
                }
            }
            partial = next;
        }
        let open = self.spec.boundary.terminal_open(self.spec.direction);
        let mut dropped = false;
        let mut out = Vec::with_capacity(partial.len());
        for (target, h, num, den) in partial {
            if h != 0 && !open {
                dropped = true;
                continue;
            }
            out.push(Outcome {
                target,
                boundary_color: h,
                weight: Rational::from_big(num, den),
            });
        }
        (out, dropped)
    }
}

/// Sparse exact one-step matrix in `[target, source]` convention, grouped by source.
#[derive(Clone, Debug)]
pub struct StepMatrix {
    pub spec: StepSpec,
    pub space: Arc<StateSpace>,
    pub outcomes: Vec<Vec<Outcome>>,
    pub substochastic: bool,
}

impl StepMatrix {
    pub fn size(&self) -> usize {
        self.space.size()
    }

    /// Weight of `source -> target` with the given boundary color.
    pub fn entry(&self, target: usize, source: usize, boundary_color: usize) -> Rational {
        self.outcomes[source]
            .iter()
            .find(|o| o.target == target && o.boundary_color == boundary_color)
            .map(|o| o.weight.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn column(&self, source: usize) -> &[Outcome] {
        &self.outcomes[source]
    }

    /// Every source's outcomes sum to one, unless the matrix is flagged substochastic.
    pub fn validate_stochastic(&self) -> Result<()> {
        for (s, outs) in self.outcomes.iter().enumerate() {
            let total: Rational = outs.iter().map(|o| &o.weight).sum();
            if total.is_one() {
                continue;
            }
            if !(self.substochastic && total < Rational::one()) {
                return Err(Error::Defect(format!("column {s} sums to {total}")));
            }
        }
        Ok(())
    }

    /// Species balance `target = source - exited + injected - absorbed` for every entry.
    pub fn validate_conservation(&self) -> Result<()> {
        let n = self.spec.n;
        let injected = self.spec.boundary.entering_color(n);
        for (s, outs) in self.outcomes.iter().enumerate() {
            let src = self.space.config(s).species_counts();
            for o in outs {
                let tgt = self.space.config(o.target).species_counts();
                for c in 1..=n {
                    let expect = src[c] as i64 + i64::from(c == injected) - i64::from(c == o.boundary_color);
                    if tgt[c] as i64 != expect {
                        return Err(Error::Defect(format!(
                            "species {c} unbalanced from state {s} to {}",
                            o.target
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// CSV with columns `source,target,absorbed,exited,weight,boundary_color`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "absorbed", "exited", "weight", "boundary_color"])?;
        let reversed = self.spec.direction == Direction::Reversed;
        for (s, outs) in self.outcomes.iter().enumerate() {
            for o in outs {
                let ev = u8::from(o.boundary_color != 0);
                let (absorbed, exited) = if reversed { (ev, 0) } else { (0, ev) };
                w.write_record([
                    s.to_string(),
                    o.target.to_string(),
                    absorbed.to_string(),
                    exited.to_string(),
                    o.weight.to_string(),
                    o.boundary_color.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn build_step_matrix(spec: &StepSpec, exec: Exec) -> Result<StepMatrix> {
    let kernel = StepKernel::new(spec)?;
    build_from_kernel(&kernel, exec)
}

pub fn build_from_kernel(kernel: &StepKernel, exec: Exec) -> Result<StepMatrix> {
    let cols = exec.map(kernel.space.size(), |s| kernel.outcomes(s));
    let substochastic = cols.iter().any(|(_, d)| *d);
    let m = StepMatrix {
        spec: kernel.spec.clone(),
        space: kernel.space.clone(),
        outcomes: cols.into_iter().map(|(o, _)| o).collect(),
        substochastic,
    };
    m.validate_stochastic()?;
    Ok(m)
}

fn outcome_map(outs: &[Outcome]) -> HashMap<(usize, usize), Rational> {
    let mut map = HashMap::with_capacity(outs.len());
    for o in outs {
        *map.entry((o.target, o.boundary_color)).or_insert_with(Rational::zero) += &o.weight;
    }
    map
}

/// Index permutation induced by a map on configurations.
fn state_permutation(space: &StateSpace, f: impl Fn(&Configuration) -> Configuration) -> Vec<usize> {
    (0..space.size())
        .map(|i| space.index(&f(&space.config(i))).expect("map stays in the state space"))
        .collect()
}

/// Reversed step at `(q, z)` against the injected reversed step at `(1/q, 1/z)`
/// conjugated by color reversal, outcome by outcome. A boundary color `c` on
/// one side corresponds to `n - c` on the other.
pub fn check_l3(n: usize, q: &Rational, window: &LatticeWindow, zvec: &[Rational], exec: Exec) -> Result<CheckReport> {
    let plain = StepSpec::new(n, q.clone(), window.clone(), zvec.to_vec(), Direction::Reversed, BoundarySpec::REVERSED_ABSORB);
    let injected = plain.inverted()?.with(Direction::Reversed, BoundarySpec::REVERSED_INJECT);
    let a = build_step_matrix(&plain, exec)?;
    let b = build_step_matrix(&injected, exec)?;
    let pi = state_permutation(&a.space, Configuration::color_reverse);
    let mut report = CheckReport::new("L3")
        .param("n", n)
        .param("window", window)
        .param("q", q)
        .param("zvec", zvec);
    for s in 0..a.size() {
        let lhs = outcome_map(a.column(s));
        let rhs = outcome_map(b.column(pi[s]));
        let mut keys: Vec<(usize, usize)> = lhs.keys().copied().collect();
        for &(t, c) in rhs.keys() {
            let back = (pi[t], n - c);
            if !lhs.contains_key(&back) {
                keys.push(back);
            }
        }
        for (t, c) in keys {
            let l = lhs.get(&(t, c)).cloned().unwrap_or_else(Rational::zero);
            let r = rhs.get(&(pi[t], n - c)).cloned().unwrap_or_else(Rational::zero);
            report.compare(
                || format!("{:?}", a.space.config(s)),
                || format!("{:?} color {c}", a.space.config(t)),
                &l,
                &r,
            );
        }
    }
    Ok(report)
}

/// Reverses colors `1..n`, leaving holes in place.
pub fn species_reverse(c: &Configuration) -> Configuration {
    let sites = c
        .sites
        .iter()
        .map(|s| {
            let mut v = s.counts().to_vec();
            v[1..].reverse();
            Composition::new(v).expect("same length")
        })
        .collect();
    Configuration {
        window: c.window.clone(),
        sites,
    }
}

fn g_exponent(c: &Configuration, m: u32) -> i64 {
    c.sites
        .iter()
        .enumerate()
        .map(|(i, s)| -2 * i64::from(m) * c.window.site(i) * i64::from(s.particles()))
        .sum()
}

/// `P(1/q, 1/z)[t, s] = P(q, z)[t, s] G(s+) / G(t)` over interior sources and
/// targets (first and last site empty), where `s+` is `s` moved one site right.
/// The note records the species-reversed variant
/// `P(1/q, 1/z)[t, s] = P(q, z)[rt, rs] G(s+) / G(t)`.
pub fn check_lf(n: usize, q: &Rational, z: &Rational, window: &LatticeWindow, exec: Exec) -> Result<CheckReport> {
    let (plain, twisted) = lf_reports(n, q, z, window, exec)?;
    let mut plain = plain;
    plain.note(format!(
        "species-reversed form: {} ({} of {} entries differ)",
        twisted.status, twisted.failures, twisted.entries_checked
    ));
    Ok(plain)
}

/// The species-reversed form of the gauge identity on its own.
pub fn check_lf_twisted(n: usize, q: &Rational, z: &Rational, window: &LatticeWindow, exec: Exec) -> Result<CheckReport> {
    Ok(lf_reports(n, q, z, window, exec)?.1)
}

fn lf_reports(n: usize, q: &Rational, z: &Rational, window: &LatticeWindow, exec: Exec) -> Result<(CheckReport, CheckReport)> {
    let m = window
        .uniform_capacity()
        .filter(|&m| m == 1)
        .ok_or_else(|| Error::Precondition("the gauge identity needs capacity 1 everywhere".into()))?;
    let spec = StepSpec::new(n, q.clone(), window.clone(), vec![z.clone(); window.len()], Direction::Forward, BoundarySpec::FORWARD_EXIT);
    let a = build_step_matrix(&spec, exec)?;
    let b = build_step_matrix(&spec.inverted()?, exec)?;
    let space = &a.space;
    let sigma = state_permutation(space, species_reverse);
    let interior: Vec<usize> = (0..space.size()).filter(|&i| space.config(i).is_interior(1)).collect();
    let mut plain = CheckReport::new("LF")
        .param("n", n)
        .param("window", window)
        .param("q", q)
        .param("z", z);
    let mut twisted = CheckReport::new("LF-species-reversed")
        .param("n", n)
        .param("window", window)
        .param("q", q)
        .param("z", z);
    for &s in &interior {
        let sc = space.config(s);
        let g_plus = g_exponent(&crate::state::shift(&sc, -1)?, m);
        for &t in &interior {
            let tc = space.config(t);
            let gauge = q.pow(g_plus - g_exponent(&tc, m));
            let lhs = b.entry(t, s, 0);
            let rhs = a.entry(t, s, 0) * &gauge;
            plain.compare(|| format!("{sc:?}"), || format!("{tc:?}"), &lhs, &rhs);
            let rhs_t = a.entry(sigma[t], sigma[s], 0) * &gauge;
            twisted.compare(|| format!("{sc:?}"), || format!("{tc:?}"), &lhs, &rhs_t);
        }
    }
    Ok((plain, twisted))
}

/// `(b1, b2) = (q^2 (1 - z)/(q^2 - z), (1 - z)/(q^2 - z))`.
pub fn b_pair(q: &Rational, z: &Rational) -> (Rational, Rational) {
    let q2 = q.pow(2);
    let den = &q2 - z;
    let one_minus = Rational::one() - z;
    (&q2 * &one_minus / &den, one_minus / den)
}

pub fn witness_value(w: &FactorizationWitness, q: &Rational, z: &Rational) -> Rational {
    let (b1, b2) = b_pair(q, z);
    let mixed = (Rational::one() - &b1) * (Rational::one() - &b2);
    b1.pow(i64::from(w.a1)) * b2.pow(i64::from(w.a2)) * mixed.pow(i64::from(w.a3))
}

/// Particles at the same position in source and target under the
/// order-preserving matching of particles.
pub fn stayed_particles(source: &Configuration, target: &Configuration) -> u32 {
    let pos = |c: &Configuration| -> Vec<usize> {
        c.sites
            .iter()
            .enumerate()
            .flat_map(|(i, s)| std::iter::repeat(i).take(s.particles() as usize))
            .collect()
    };
    let (a, b) = (pos(source), pos(target));
    a.iter().zip(&b).filter(|(x, y)| x == y).count() as u32
}

/// Reads `(A1, A2, A3)` off the unique trajectory from `source` to `target`:
/// stays, passes over empty sites, and runs picked up (each later set down).
/// The witness is then checked against the engine's entry at the given
/// parameters and at three more seeded draws.
pub fn factorize_entry(q: &Rational, z: &Rational, source: &Configuration, target: &Configuration) -> Result<FactorizationWitness> {
    let window = &source.window;
    if source.n() != 1 || window.capacities.iter().any(|&m| m != 1) || target.window != *window {
        return Err(Error::Precondition("factorization needs n = 1, capacity 1 and a shared window".into()));
    }
    let (mut a1, mut a2, mut pick, mut drop) = (0u32, 0u32, 0u32, 0u32);
    let mut h = 0u32;
    for (b, d) in source.sites.iter().zip(&target.sites) {
        let (b, d) = (b.get(1), d.get(1));
        // e_h + beta = e_k + delta
        let k = (h + b) as i64 - d as i64;
        if !(0..=1).contains(&k) {
            return Err(Error::Precondition("zero entry: no trajectory joins source and target".into()));
        }
        let k = k as u32;
        match (h, b, k) {
            (0, 1, 0) => a1 += 1,
            (1, 0, 1) => a2 += 1,
            (0, 1, 1) => pick += 1,
            (1, 0, 0) => drop += 1,
            _ => {}
        }
        h = k;
    }
    if h != 0 || pick != drop {
        return Err(Error::Precondition("entry involves a particle leaving the window".into()));
    }
    let w = FactorizationWitness { a1, a2, a3: pick };
    let mut points = vec![(q.clone(), z.clone())];
    let mut sampler = ParamSampler::new(0x5eed_fac7);
    for _ in 0..3 {
        points.push(sampler.q_and_z(&[1]));
    }
    for (q, z) in &points {
        let spec = StepSpec::new(1, q.clone(), window.clone(), vec![z.clone(); window.len()], Direction::Forward, BoundarySpec::FORWARD_EXIT);
        let kernel = StepKernel::new(&spec)?;
        let s = kernel.space.index(source).expect("source in space");
        let t = kernel.space.index(target).expect("target in space");
        let entry: Rational = kernel.outcomes(s).0.iter().filter(|o| o.target == t && o.boundary_color == 0).map(|o| o.weight.clone()).sum();
        if entry != witness_value(&w, q, z) {
            return Err(Error::Defect(format!(
                "entry {entry} at q={q}, z={z} is not b1^{a1} b2^{a2} ((1-b1)(1-b2))^{}",
                w.a3
            )));
        }
    }
    if w.a2 == 0 && w.a1 != stayed_particles(source, target) {
        return Err(Error::Defect(format!(
            "A2 = 0 but A1 = {} differs from the {} particles that stayed",
            w.a1,
            stayed_particles(source, target)
        )));
    }
    Ok(w)
}

/// Outcomes of a grown window projected back onto the original one: content
/// of new right sites (forward) or new left sites (reversed) counts as the
/// corresponding boundary event. Returns `None` for outcomes that do not
/// project (content in a new site on the entering side).
fn project_outcome(small: &StateSpace, big_cfg: &Configuration, color: usize, left: usize, right: usize, direction: Direction) -> Option<(usize, usize)> {
    let len = big_cfg.sites.len();
    let inner = &big_cfg.sites[left..len - right];
    let (entering, terminal) = match direction {
        Direction::Forward => (&big_cfg.sites[..left], &big_cfg.sites[len - right..]),
        Direction::Reversed => (&big_cfg.sites[len - right..], &big_cfg.sites[..left]),
    };
    if entering.iter().any(|s| !s.is_empty()) {
        return None;
    }
    let mut projected = color;
    for s in terminal {
        for c in 1..=s.n() {
            for _ in 0..s.get(c) {
                if projected != 0 {
                    return None;
                }
                projected = c;
            }
        }
    }
    let cfg = Configuration {
        window: small.window.clone(),
        sites: inner.to_vec(),
    };
    Some((small.index(&cfg)?, projected))
}

/// Entries of the step on `spec.window` against the step on the window grown
/// by `left`/`right` sites, for every source whose first and last `margin`
/// sites are empty. Boundary events of the small window are matched with
/// particles landing in the new sites plus boundary events of the big one.
pub fn check_step_window_extension(
    spec: &StepSpec,
    left: usize,
    right: usize,
    margin: usize,
    exec: Exec,
) -> Result<CheckReport> {
    if spec.direction == Direction::Reversed && spec.boundary.right == RightBoundary::InjectTop && right > 0 {
        return Err(Error::Precondition("an injecting right edge cannot move".into()));
    }
    let z_left = spec.zvec.first().cloned().unwrap_or_else(Rational::zero);
    let z_right = spec.zvec.last().cloned().unwrap_or_else(Rational::zero);
    let big_spec = spec.extended(left, right, &z_left, &z_right);
    let small = StepKernel::new(spec)?;
    let big = StepKernel::new(&big_spec)?;
    let sources: Vec<usize> = (0..small.space.size())
        .filter(|&s| margin == 0 || small.space.config(s).is_interior(margin))
        .collect();
    let per_source = exec.map(sources.len(), |i| -> Result<Vec<(String, (usize, usize), Rational, Rational)>> {
        let s = sources[i];
        let sc = small.space.config(s);
        let lhs = outcome_map(&small.outcomes(s).0);
        let bs = big.space.index(&sc.embed(&big_spec.window)?).expect("embedded source");
        let mut rhs: HashMap<(usize, usize), Rational> = HashMap::new();
        let mut stray = Rational::zero();
        for o in big.outcomes(bs).0 {
            let cfg = big.space.config(o.target);
            match project_outcome(&small.space, &cfg, o.boundary_color, left, right, spec.direction) {
                Some(key) => *rhs.entry(key).or_insert_with(Rational::zero) += &o.weight,
                None => stray += &o.weight,
            }
        }
        let mut rows = Vec::new();
        let mut keys: Vec<(usize, usize)> = lhs.keys().chain(rhs.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        for key in keys {
            let l = lhs.get(&key).cloned().unwrap_or_else(Rational::zero);
            let r = rhs.get(&key).cloned().unwrap_or_else(Rational::zero);
            rows.push((format!("{sc:?}"), key, l, r));
        }
        if !stray.is_zero() {
            rows.push((format!("{sc:?}"), (usize::MAX, 0), Rational::zero(), stray));
        }
        Ok(rows)
    });
    let mut report = CheckReport::new("step-window-extension")
        .param("spec", spec)
        .param("grow_left", left)
        .param("grow_right", right);
    for rows in per_source {
        for (src, (t, c), l, r) in rows? {
            report.compare(
                || src.clone(),
                || {
                    if t == usize::MAX {
                        "unprojectable outcomes".to_string()
                    } else {
                        format!("{:?} color {c}", small.space.config(t))
                    }
                },
                &l,
                &r,
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::enum_compositions;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn one_site(q: &str, z: &str, direction: Direction, boundary: BoundarySpec) -> StepMatrix {
        let w = LatticeWindow::uniform(0, 0, 1).unwrap();
        let spec = StepSpec::new(1, r(q), w, vec![r(z)], direction, boundary);
        build_step_matrix(&spec, Exec::Sequential).unwrap()
    }

    #[test]
    fn single_site_forward() {
        let p = one_site("3/2", "1/3", Direction::Forward, BoundarySpec::FORWARD_EXIT);
        let (q, z) = (r("3/2"), r("1/3"));
        // state 0 is empty, state 1 holds the particle
        assert_eq!(p.column(0), &[Outcome { target: 0, boundary_color: 0, weight: Rational::one() }]);
        let q2 = q.pow(2);
        assert_eq!(p.entry(1, 1, 0), &q2 * (Rational::one() - &z) / (&q2 - &z));
        assert_eq!(p.entry(0, 1, 1), &z * (&q2 - Rational::one()) / (&q2 - &z));
        p.validate_conservation().unwrap();
    }

    #[test]
    fn single_site_injected_reversed_at_inverse() {
        let (q, z) = (r("3/2"), r("1/3"));
        let p = one_site("2/3", "3", Direction::Reversed, BoundarySpec::REVERSED_INJECT);
        let q2 = q.pow(2);
        assert_eq!(p.entry(1, 0, 0), &z * (&q2 - Rational::one()) / (&q2 - &z));
        assert_eq!(p.entry(0, 0, 1), &q2 * (Rational::one() - &z) / (&q2 - &z));
        p.validate_conservation().unwrap();
    }

    #[test]
    fn closed_edge_flags_substochastic() {
        let w = LatticeWindow::uniform(0, 1, 1).unwrap();
        let closed = BoundarySpec {
            left: LeftBoundary::Closed,
            right: RightBoundary::Closed,
        };
        let spec = StepSpec::new(1, r("2"), w, vec![r("1/3"); 2], Direction::Forward, closed);
        let p = build_step_matrix(&spec, Exec::Sequential).unwrap();
        assert!(p.substochastic);
        let spec = spec.with(Direction::Forward, BoundarySpec::FORWARD_EXIT);
        assert!(!build_step_matrix(&spec, Exec::Sequential).unwrap().substochastic);
    }

    #[test]
    fn boundary_validation() {
        assert!(BoundarySpec::REVERSED_INJECT.validate(Direction::Forward).is_err());
        assert!(BoundarySpec::FORWARD_EXIT.validate(Direction::Reversed).is_err());
        assert!(BoundarySpec::FORWARD_EXIT.validate(Direction::Forward).is_ok());
    }

    #[test]
    fn stochastic_and_conserving_small_grid() {
        let mut sampler = ParamSampler::new(3);
        for n in 1..=2 {
            for m in 1..=2u32 {
                for len in 1..=3i64 {
                    let w = LatticeWindow::uniform(-len, -1, m).unwrap();
                    let (q, zs) = sampler.q_and_zvec(&w.capacities);
                    for (d, b) in [
                        (Direction::Forward, BoundarySpec::FORWARD_EXIT),
                        (Direction::Reversed, BoundarySpec::REVERSED_ABSORB),
                        (Direction::Reversed, BoundarySpec::REVERSED_INJECT),
                    ] {
                        let spec = StepSpec::new(n, q.clone(), w.clone(), zs.clone(), d, b);
                        let p = build_step_matrix(&spec, Exec::Parallel).unwrap();
                        assert!(!p.substochastic);
                        p.validate_conservation().unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn l3_examples() {
        let w = LatticeWindow::uniform(0, 1, 1).unwrap();
        let rep = check_l3(1, &r("3/2"), &w, &[r("1/3"), r("1/5")], Exec::Sequential).unwrap();
        assert!(rep.passed(), "{rep}");
        let rep = check_l3(2, &r("3/2"), &w, &[r("1/3"), r("1/5")], Exec::Sequential).unwrap();
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn lf_single_species() {
        let w = LatticeWindow::uniform(-3, 2, 1).unwrap();
        let rep = check_lf(1, &r("2"), &r("1/3"), &w, Exec::Sequential).unwrap();
        assert!(rep.passed(), "{rep}");
        assert!(rep.entries_checked > 0);
    }

    #[test]
    fn lf_two_species_needs_species_reversal() {
        let w = LatticeWindow::uniform(-2, 2, 1).unwrap();
        let (q, z) = (r("3/2"), r("1/5"));
        let plain = check_lf(2, &q, &z, &w, Exec::Sequential).unwrap();
        assert!(!plain.passed());
        assert!(check_lf_twisted(2, &q, &z, &w, Exec::Sequential).unwrap().passed());
    }

    #[test]
    fn factorization_examples() {
        let w = LatticeWindow::uniform(0, 5, 1).unwrap();
        let (q, z) = (r("2"), r("1/3"));
        let at = |xs: &[i64]| {
            Configuration::with_particles(1, &w, &xs.iter().map(|&x| (x, 1, 1)).collect::<Vec<_>>()).unwrap()
        };
        let stay = factorize_entry(&q, &z, &at(&[2]), &at(&[2])).unwrap();
        assert_eq!(stay, FactorizationWitness { a1: 1, a2: 0, a3: 0 });
        let empty = factorize_entry(&q, &z, &at(&[]), &at(&[])).unwrap();
        assert_eq!(empty, FactorizationWitness { a1: 0, a2: 0, a3: 0 });
        let jump = factorize_entry(&q, &z, &at(&[2]), &at(&[3])).unwrap();
        assert_eq!(jump, FactorizationWitness { a1: 0, a2: 0, a3: 1 });
        let q2 = q.pow(2);
        let turns = &z * (&q2 - Rational::one()) / (&q2 - &z) * ((&q2 - Rational::one()) / (&q2 - &z));
        assert_eq!(witness_value(&jump, &q, &z), turns);
        let block = factorize_entry(&q, &z, &at(&[1, 2]), &at(&[2, 3])).unwrap();
        assert_eq!(block, FactorizationWitness { a1: 0, a2: 0, a3: 1 });
        let far = factorize_entry(&q, &z, &at(&[1]), &at(&[4])).unwrap();
        assert_eq!(far, FactorizationWitness { a1: 0, a2: 2, a3: 1 });
        assert!(factorize_entry(&q, &z, &at(&[2]), &at(&[1])).is_err());
    }

    /// Brute-force exponent search as an independent oracle for the witness.
    #[test]
    fn witness_agrees_with_exponent_search() {
        let w = LatticeWindow::uniform(0, 3, 1).unwrap();
        let mut sampler = ParamSampler::new(11);
        let pts: Vec<(Rational, Rational)> = (0..3).map(|_| sampler.q_and_z(&[1])).collect();
        let kernels: Vec<StepKernel> = pts
            .iter()
            .map(|(q, z)| {
                StepKernel::new(&StepSpec::new(1, q.clone(), w.clone(), vec![z.clone(); 4], Direction::Forward, BoundarySpec::FORWARD_EXIT)).unwrap()
            })
            .collect();
        let space = kernels[0].space.clone();
        for s in 0..space.size() {
            let cols: Vec<Vec<Outcome>> = kernels.iter().map(|k| k.outcomes(s).0).collect();
            for o in cols[0].iter().filter(|o| o.boundary_color == 0) {
                let mut found = Vec::new();
                for a1 in 0..=4 {
                    for a2 in 0..=4 {
                        for a3 in 0..=4 {
                            let cand = FactorizationWitness { a1, a2, a3 };
                            let ok = pts.iter().zip(&cols).all(|((q, z), col)| {
                                let e = col.iter().find(|x| x.target == o.target && x.boundary_color == 0).unwrap();
                                witness_value(&cand, q, z) == e.weight
                            });
                            if ok {
                                found.push(cand);
                            }
                        }
                    }
                }
                let wit = factorize_entry(&pts[0].0, &pts[0].1, &space.config(s), &space.config(o.target)).unwrap();
                assert_eq!(found, vec![wit]);
            }
        }
    }

    #[test]
    fn b_pair_swaps_under_inversion() {
        let mut sampler = ParamSampler::new(5);
        for _ in 0..20 {
            let (q, z) = sampler.q_and_z(&[1]);
            let (b1, b2) = b_pair(&q, &z);
            let (c1, c2) = b_pair(&q.recip(), &z.recip());
            assert_eq!((c1, c2), (b2.clone(), b1.clone()));
            assert_eq!(b1 / b2, q.pow(2));
        }
    }

    #[test]
    fn window_extension_of_steps() {
        let w = LatticeWindow::new(-3, -1, vec![1, 2, 1], 2).unwrap();
        let zs = vec![r("1/3"), r("2/7"), r("5/4")];
        let q = r("3/2");
        for (d, b, left, right) in [
            (Direction::Forward, BoundarySpec::FORWARD_EXIT, 1, 1),
            (Direction::Reversed, BoundarySpec::REVERSED_ABSORB, 1, 1),
            (Direction::Reversed, BoundarySpec::REVERSED_INJECT, 1, 0),
        ] {
            let spec = StepSpec::new(2, q.clone(), w.clone(), zs.clone(), d, b);
            let rep = check_step_window_extension(&spec, left, right, 0, Exec::Sequential).unwrap();
            assert!(rep.passed(), "{rep}");
        }
    }

    #[test]
    fn csv_columns() {
        let p = one_site("2", "1/2", Direction::Forward, BoundarySpec::FORWARD_EXIT);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "source,target,absorbed,exited,weight,boundary_color\n0,0,0,0,1,0\n1,1,0,0,4/7,0\n1,0,0,1,3/7,1\n"
        );
        assert_eq!(enum_compositions(1, 1).len(), 2);
    }
}
