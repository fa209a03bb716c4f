//! Site compositions, lattice windows and configurations, plus the
//! structural operators used by the duality checks: color reversal, shift,
//! the diagonal weights `G` and `d`, and block decomposition.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qarith::Rational;

/// Occupation vector `(a_0, ..., a_n)`; color 0 counts holes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition {
    counts: Vec<u32>,
}

impl Composition {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::Config(format!(
                "a composition needs at least two colors, got {counts:?}"
            )));
        }
        Ok(Composition { counts })
    }

    /// All holes: `(capacity, 0, ..., 0)`.
    pub fn empty(n: usize, capacity: u32) -> Self {
        let mut counts = vec![0; n + 1];
        counts[0] = capacity;
        Composition { counts }
    }

    /// A single unit of color `j` (the horizontal basis vector `e_j` when capacity is 1).
    pub fn unit(n: usize, j: usize) -> Self {
        let mut counts = vec![0; n + 1];
        counts[j] = 1;
        Composition { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn capacity(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn get(&self, color: usize) -> u32 {
        self.counts[color]
    }

    /// `a_[i,j] = a_i + ... + a_j`, zero for an empty range.
    pub fn range(&self, i: usize, j: usize) -> u32 {
        if i > j || i > self.n() {
            return 0;
        }
        self.counts[i..=j.min(self.n())].iter().sum()
    }

    /// Number of particles (colors 1..n).
    pub fn particles(&self) -> u32 {
        self.range(1, self.n())
    }

    pub fn is_empty(&self) -> bool {
        self.particles() == 0
    }

    pub fn color_reverse(&self) -> Self {
        let mut counts = self.counts.clone();
        counts.reverse();
        Composition { counts }
    }

    /// `self + e_add - e_remove`, or `None` if a count would go negative.
    pub fn exchange(&self, add: usize, remove: usize) -> Option<Self> {
        let mut counts = self.counts.clone();
        counts[add] += 1;
        if counts[remove] == 0 {
            return None;
        }
        counts[remove] -= 1;
        Some(Composition { counts })
    }
}

impl fmt::Debug for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Composition {
    /// Semicolon separated, so it can sit in a CSV cell unquoted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(u32::to_string).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// Every composition of `capacity` into `n + 1` colors, in descending
/// lexicographic order of the count vectors. This order is the canonical
/// index used by all matrices.
pub fn enum_compositions(n: usize, capacity: u32) -> Vec<Composition> {
    fn rec(i: usize, n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Composition>) {
        if i == n {
            cur.push(left);
            out.push(Composition { counts: cur.clone() });
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v);
            rec(i + 1, n, left - v, cur, out);
            cur.pop();
        }
    }
    assert!(n >= 1, "at least one species");
    let mut out = Vec::new();
    rec(0, n, capacity, &mut Vec::with_capacity(n + 1), &mut out);
    out
}

/// A finite stretch `lo..=hi` of the lattice with per-site capacities.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub lo: i64,
    pub hi: i64,
    pub capacities: Vec<u32>,
    pub exterior_capacity: u32,
}

impl LatticeWindow {
    pub fn new(lo: i64, hi: i64, capacities: Vec<u32>, exterior_capacity: u32) -> Result<Self> {
        let w = LatticeWindow {
            lo,
            hi,
            capacities,
            exterior_capacity,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform(lo: i64, hi: i64, m: u32) -> Result<Self> {
        if hi < lo {
            return Err(Error::Config(format!("empty window {lo}..{hi}")));
        }
        Self::new(lo, hi, vec![m; (hi - lo + 1) as usize], m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hi < self.lo {
            return Err(Error::Config(format!("empty window {}..{}", self.lo, self.hi)));
        }
        if self.capacities.len() as i64 != self.hi - self.lo + 1 {
            return Err(Error::Config(format!(
                "window {}..{} needs {} capacities, got {}",
                self.lo,
                self.hi,
                self.hi - self.lo + 1,
                self.capacities.len()
            )));
        }
        if self.exterior_capacity == 0 || self.capacities.contains(&0) {
            return Err(Error::Config("capacities must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.capacities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacities.is_empty()
    }

    pub fn site(&self, idx: usize) -> i64 {
        self.lo + idx as i64
    }

    /// Common capacity if every site (and the exterior) shares it.
    pub fn uniform_capacity(&self) -> Option<u32> {
        let m = self.exterior_capacity;
        self.capacities.iter().all(|&c| c == m).then_some(m)
    }

    pub fn max_capacity(&self) -> u32 {
        self.capacities
            .iter()
            .copied()
            .chain(std::iter::once(self.exterior_capacity))
            .max()
            .unwrap_or(1)
    }

    /// The window grown by `left` sites on the left and `right` on the right,
    /// new sites taking the exterior capacity.
    pub fn extended(&self, left: usize, right: usize) -> Self {
        let mut caps = vec![self.exterior_capacity; left];
        caps.extend_from_slice(&self.capacities);
        caps.extend(std::iter::repeat(self.exterior_capacity).take(right));
        LatticeWindow {
            lo: self.lo - left as i64,
            hi: self.hi + right as i64,
            capacities: caps,
            exterior_capacity: self.exterior_capacity,
        }
    }
}

/// One composition per window site.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub window: LatticeWindow,
    pub sites: Vec<Composition>,
}

impl Configuration {
    pub fn new(window: LatticeWindow, sites: Vec<Composition>) -> Result<Self> {
        window.validate()?;
        if sites.len() != window.len() {
            return Err(Error::Config(format!(
                "{} sites given for a window of {}",
                sites.len(),
                window.len()
            )));
        }
        let n = sites[0].n();
        for (i, (s, &m)) in sites.iter().zip(&window.capacities).enumerate() {
            if s.n() != n {
                return Err(Error::Config("sites disagree on the number of colors".into()));
            }
            if s.capacity() != m {
                return Err(Error::Config(format!(
                    "site {} holds {} but has capacity {}",
                    window.site(i),
                    s.capacity(),
                    m
                )));
            }
        }
        Ok(Configuration { window, sites })
    }

    pub fn empty(n: usize, window: &LatticeWindow) -> Self {
        let sites = window
            .capacities
            .iter()
            .map(|&m| Composition::empty(n, m))
            .collect();
        Configuration {
            window: window.clone(),
            sites,
        }
    }

    /// Places `count` particles of `color` at lattice site `x` of an otherwise empty configuration.
    pub fn with_particles(n: usize, window: &LatticeWindow, placements: &[(i64, usize, u32)]) -> Result<Self> {
        let mut c = Configuration::empty(n, window);
        for &(x, color, count) in placements {
            let idx = c.index_of(x)?;
            let s = &mut c.sites[idx].counts;
            if color == 0 || color > n || s[0] < count {
                return Err(Error::Config(format!("cannot place {count} of color {color} at {x}")));
            }
            s[0] -= count;
            s[color] += count;
        }
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.sites[0].n()
    }

    pub fn index_of(&self, x: i64) -> Result<usize> {
        if x < self.window.lo || x > self.window.hi {
            return Err(Error::Config(format!("site {x} outside the window")));
        }
        Ok((x - self.window.lo) as usize)
    }

    pub fn at(&self, x: i64) -> Option<&Composition> {
        if x < self.window.lo || x > self.window.hi {
            None
        } else {
            Some(&self.sites[(x - self.window.lo) as usize])
        }
    }

    /// `|xi|`, the number of particles of any nonzero color.
    pub fn particle_count(&self) -> u64 {
        self.sites.iter().map(|s| u64::from(s.particles())).sum()
    }

    /// Per-species totals, index 0 unused.
    pub fn species_counts(&self) -> Vec<u64> {
        let mut out = vec![0; self.n() + 1];
        for s in &self.sites {
            for (i, &c) in s.counts.iter().enumerate().skip(1) {
                out[i] += u64::from(c);
            }
        }
        out
    }

    pub fn color_reverse(&self) -> Self {
        Configuration {
            window: self.window.clone(),
            sites: self.sites.iter().map(Composition::color_reverse).collect(),
        }
    }

    /// True if the first `margin` and last `margin` sites are empty.
    pub fn is_interior(&self, margin: usize) -> bool {
        let len = self.sites.len();
        if 2 * margin > len {
            return false;
        }
        self.sites[..margin].iter().all(Composition::is_empty)
            && self.sites[len - margin..].iter().all(Composition::is_empty)
    }

    /// The same content padded with empty sites on the larger window.
    pub fn embed(&self, window: &LatticeWindow) -> Result<Self> {
        let n = self.n();
        let mut out = Configuration::empty(n, window);
        for (i, s) in self.sites.iter().enumerate() {
            let x = self.window.site(i);
            match out.index_of(x) {
                Ok(j) if window.capacities[j] == s.capacity() => out.sites[j] = s.clone(),
                Ok(_) => return Err(Error::Config(format!("capacity mismatch at {x}"))),
                Err(_) if s.is_empty() => {}
                Err(_) => return Err(Error::Config(format!("site {x} does not fit the target window"))),
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}..{}:", self.window.lo, self.window.hi)?;
        for s in &self.sites {
            write!(f, " {s:?}")?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigurationJson {
    lo: i64,
    hi: i64,
    capacities: Vec<u32>,
    exterior_capacity: u32,
    sites: Vec<Vec<u32>>,
}

impl Serialize for Configuration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigurationJson {
            lo: self.window.lo,
            hi: self.window.hi,
            capacities: self.window.capacities.clone(),
            exterior_capacity: self.window.exterior_capacity,
            sites: self.sites.iter().map(|c| c.counts.clone()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ConfigurationJson::deserialize(d)?;
        let window = LatticeWindow {
            lo: j.lo,
            hi: j.hi,
            capacities: j.capacities,
            exterior_capacity: j.exterior_capacity,
        };
        let sites = j
            .sites
            .into_iter()
            .map(Composition::new)
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Configuration::new(window, sites).map_err(serde::de::Error::custom)
    }
}

/// Content at `x` of the result is the input's content at `x + by`.
pub fn shift(c: &Configuration, by: i64) -> Result<Configuration> {
    let m = c
        .window
        .uniform_capacity()
        .ok_or_else(|| Error::Precondition("shift needs uniform capacities".into()))?;
    let n = c.n();
    let mut out = Configuration::empty(n, &c.window);
    for (i, s) in c.sites.iter().enumerate() {
        if s.is_empty() {
            continue;
        }
        let x = c.window.site(i) - by;
        match out.index_of(x) {
            Ok(j) => out.sites[j] = s.clone(),
            Err(_) => {
                return Err(Error::Precondition(format!(
                    "shift by {by} pushes site {} out of the window",
                    c.window.site(i)
                )))
            }
        }
    }
    debug_assert!(out.sites.iter().all(|s| s.capacity() == m));
    Ok(out)
}

/// `(|xi|, G(xi, xi), d(xi, xi))` with `G = prod q^{-2 m x xi_i}` and `d = q^{2|xi|}`.
/// `G` is only defined for uniform capacity; it is `None` otherwise.
pub fn conserved_weights(c: &Configuration, q: &Rational) -> Result<(u64, Option<Rational>, Rational)> {
    if q.is_zero() {
        return Err(Error::Domain("q must be nonzero".into()));
    }
    let count = c.particle_count();
    let g = c.window.uniform_capacity().map(|m| {
        let e: i64 = c
            .sites
            .iter()
            .enumerate()
            .map(|(i, s)| -2 * i64::from(m) * c.window.site(i) * i64::from(s.particles()))
            .sum();
        q.pow(e)
    });
    let dfrak = q.pow(2 * count as i64);
    Ok((count, g, dfrak))
}

/// Maximal runs of equal site content, as inclusive `(x, y)` lattice ranges.
pub fn blocks(c: &Configuration) -> Result<Vec<(i64, i64)>> {
    if c.n() != 1 || c.window.capacities.iter().any(|&m| m != 1) {
        return Err(Error::Precondition("blocks need n = 1 and capacity 1".into()));
    }
    let mut out = Vec::new();
    let mut start = 0usize;
    for i in 1..=c.sites.len() {
        if i == c.sites.len() || c.sites[i] != c.sites[start] {
            out.push((c.window.site(start), c.window.site(i - 1)));
            start = i;
        }
    }
    Ok(out)
}

/// Exponents `(A1, A2, A3)` with entry `= b1^A1 b2^A2 ((1-b1)(1-b2))^A3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorizationWitness {
    pub a1: u32,
    pub a2: u32,
    pub a3: u32,
}

/// Enumerates every configuration on a window and indexes them in mixed-radix
/// order (leftmost site most significant, each site in canonical composition order).
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub n: usize,
    pub window: LatticeWindow,
    site_comps: Vec<Vec<Composition>>,
    lookup: Vec<HashMap<Composition, usize>>,
    radix: Vec<usize>,
    size: usize,
}

impl StateSpace {
    pub fn new(n: usize, window: &LatticeWindow) -> Result<Self> {
        window.validate()?;
        if n == 0 {
            return Err(Error::Config("need at least one species".into()));
        }
        let site_comps: Vec<Vec<Composition>> =
            window.capacities.iter().map(|&m| enum_compositions(n, m)).collect();
        let lookup = site_comps
            .iter()
            .map(|v| v.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect())
            .collect();
        let mut radix = vec![1usize; site_comps.len()];
        let mut size = 1usize;
        for i in (0..site_comps.len()).rev() {
            radix[i] = size;
            size = size
                .checked_mul(site_comps[i].len())
                .ok_or_else(|| Error::Config("state space too large".into()))?;
        }
        Ok(StateSpace {
            n,
            window: window.clone(),
            site_comps,
            lookup,
            radix,
            size,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn config(&self, mut idx: usize) -> Configuration {
        let mut sites = Vec::with_capacity(self.site_comps.len());
        for (i, comps) in self.site_comps.iter().enumerate() {
            let d = idx / self.radix[i];
            idx %= self.radix[i];
            sites.push(comps[d].clone());
        }
        Configuration {
            window: self.window.clone(),
            sites,
        }
    }

    pub fn index(&self, c: &Configuration) -> Option<usize> {
        if c.sites.len() != self.site_comps.len() {
            return None;
        }
        let mut idx = 0;
        for (i, s) in c.sites.iter().enumerate() {
            idx += self.lookup[i].get(s)? * self.radix[i];
        }
        Some(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.size).map(|i| self.config(i))
    }

    /// Per-site composition indices of state `idx`.
    pub fn digits(&self, mut idx: usize) -> Vec<usize> {
        self.radix
            .iter()
            .map(|&r| {
                let d = idx / r;
                idx %= r;
                d
            })
            .collect()
    }

    /// Inverse of [`StateSpace::digits`].
    pub fn from_digits(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.radix).map(|(d, r)| d * r).sum()
    }

    /// Place value of a site's digit in the state index.
    pub fn radix(&self, site: usize) -> usize {
        self.radix[site]
    }

    /// Compositions available at a site, in index order.
    pub fn site_compositions(&self, site: usize) -> &[Composition] {
        &self.site_comps[site]
    }
}
