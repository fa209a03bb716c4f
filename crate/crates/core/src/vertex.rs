//! The stochastic S-matrix with horizontal capacity one.
//!
//! Entries are indexed `S_{e_j, beta}^{e_k, delta}`: `j` is the color entering
//! the vertex along the horizontal line, `beta` the vertical input, `k` the
//! color leaving along the horizontal line and `delta` the vertical output.
//! For fixed inputs the outputs sum to one.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qarith::Rational;
use crate::report::CheckReport;
use crate::state::{enum_compositions, Composition};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub q: Rational,
    pub z: Rational,
}

impl ModelParams {
    pub fn new(n: usize, q: Rational, z: Rational) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("need at least one species".into()));
        }
        if q.is_zero() {
            return Err(Error::Domain("q must be nonzero".into()));
        }
        Ok(ModelParams { n, q, z })
    }

    /// `(1/q, 1/z)`.
    pub fn inverted(&self) -> Result<Self> {
        Ok(ModelParams {
            n: self.n,
            q: self.q.recip(),
            z: self.z.checked_recip()?,
        })
    }

    pub fn check_pole(&self, m: u32) -> Result<()> {
        if self.q.pow(i64::from(m) + 1) == self.z {
            return Err(Error::Pole { site: 0, capacity: m });
        }
        Ok(())
    }
}

/// One weight of the S-matrix.
pub fn s_entry(
    p: &ModelParams,
    m: u32,
    j: usize,
    beta: &Composition,
    k: usize,
    delta: &Composition,
) -> Result<Rational> {
    let n = p.n;
    if j > n || k > n || beta.n() != n || delta.n() != n {
        return Err(Error::Precondition("color index or composition length does not match n".into()));
    }
    if beta.capacity() != m || delta.capacity() != m {
        return Err(Error::Precondition(format!("compositions must have capacity {m}")));
    }
    p.check_pole(m)?;
    let conserved = (0..=n).all(|i| {
        beta.get(i) + u32::from(i == j) == delta.get(i) + u32::from(i == k)
    });
    if !conserved {
        return Ok(Rational::zero());
    }
    let q = &p.q;
    let z = &p.z;
    let m = i64::from(m);
    let bk = i64::from(beta.get(k));
    let num = if k == j {
        let s = i64::from(beta.range(k, n));
        q.pow(2 * s - m + 1) * (Rational::one() - q.pow(-2 * bk + m - 1) * z)
    } else {
        let s = i64::from(beta.range(k + 1, n));
        let turn = Rational::one() - q.pow(2 * bk);
        if k < j {
            -(q.pow(2 * s - m + 1) * turn)
        } else {
            -(q.pow(2 * s) * z * turn)
        }
    };
    Ok(num / (q.pow(m + 1) - z))
}

/// Nonzero outputs for every input of one vertex, indexed by composition
/// position in the canonical order.
#[derive(Clone, Debug)]
pub struct VertexTable {
    pub n: usize,
    pub m: u32,
    pub comps: Vec<Composition>,
    /// `outs[j][beta]` lists `(k, delta, weight)`.
    pub outs: Vec<Vec<Vec<(usize, usize, Rational)>>>,
}

impl VertexTable {
    pub fn new(p: &ModelParams, m: u32) -> Result<Self> {
        p.check_pole(m)?;
        let comps = enum_compositions(p.n, m);
        let lookup: HashMap<&Composition, usize> = comps.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut outs = vec![vec![Vec::new(); comps.len()]; p.n + 1];
        for (j, row) in outs.iter_mut().enumerate() {
            for (bi, beta) in comps.iter().enumerate() {
                let mut total = Rational::zero();
                for k in 0..=p.n {
                    let Some(delta) = beta.exchange(j, k) else { continue };
                    let w = s_entry(p, m, j, beta, k, &delta)?;
                    total += &w;
                    if !w.is_zero() {
                        row[bi].push((k, lookup[&delta], w));
                    }
                }
                if !total.is_one() {
                    return Err(Error::Defect(format!(
                        "outputs of (j={j}, beta={beta:?}) sum to {total}"
                    )));
                }
            }
        }
        Ok(VertexTable {
            n: p.n,
            m,
            comps,
            outs,
        })
    }

    /// First negative weight, if any, as `(j, beta, k, delta, weight)`.
    pub fn first_negative(&self) -> Option<(usize, &Composition, usize, &Composition, &Rational)> {
        for (j, row) in self.outs.iter().enumerate() {
            for (bi, list) in row.iter().enumerate() {
                for (k, di, w) in list {
                    if w.is_negative() {
                        return Some((j, &self.comps[bi], *k, &self.comps[*di], w));
                    }
                }
            }
        }
        None
    }
}

/// The full matrix over `H x V_m` in canonical order: input `(j, beta)` sits
/// at `j * |V_m| + index(beta)`, and likewise for outputs.
#[derive(Clone, Debug)]
pub struct SMatrix {
    pub n: usize,
    pub m: u32,
    pub comps: Vec<Composition>,
    /// `entries[input][output]`.
    pub entries: Vec<Vec<Rational>>,
}

impl SMatrix {
    pub fn index(&self, j: usize, beta: usize) -> usize {
        j * self.comps.len() + beta
    }

    pub fn get(&self, j: usize, beta: usize, k: usize, delta: usize) -> &Rational {
        &self.entries[self.index(j, beta)][self.index(k, delta)]
    }
}

/// Builds every entry and validates conservation and stochasticity.
pub fn s_matrix(p: &ModelParams, m: u32) -> Result<SMatrix> {
    let comps = enum_compositions(p.n, m);
    let nb = comps.len();
    let size = (p.n + 1) * nb;
    let mut entries = vec![vec![Rational::zero(); size]; size];
    for j in 0..=p.n {
        for (bi, beta) in comps.iter().enumerate() {
            let row = &mut entries[j * nb + bi];
            let mut total = Rational::zero();
            for k in 0..=p.n {
                for (di, delta) in comps.iter().enumerate() {
                    let w = s_entry(p, m, j, beta, k, delta)?;
                    let balanced = (0..=p.n).all(|i| {
                        beta.get(i) + u32::from(i == j) == delta.get(i) + u32::from(i == k)
                    });
                    if !balanced && !w.is_zero() {
                        return Err(Error::Defect(format!(
                            "nonzero weight {w} violates conservation at j={j} beta={beta:?} k={k} delta={delta:?}"
                        )));
                    }
                    total += &w;
                    row[k * nb + di] = w;
                }
            }
            if !total.is_one() {
                return Err(Error::Defect(format!(
                    "outputs of (j={j}, beta={beta:?}) sum to {total}, not 1"
                )));
            }
        }
    }
    Ok(SMatrix {
        n: p.n,
        m,
        comps,
        entries,
    })
}

/// Checks that reversing colors on every index of `S(q, z)` gives `S(1/q, 1/z)`.
pub fn check_charge_reversal(p: &ModelParams, m: u32) -> Result<CheckReport> {
    let inv = p.inverted()?;
    let a = s_matrix(p, m)?;
    let b = s_matrix(&inv, m)?;
    let rev: Vec<usize> = a
        .comps
        .iter()
        .map(|c| {
            let r = c.color_reverse();
            a.comps.iter().position(|d| *d == r).expect("reversal stays in V_m")
        })
        .collect();
    let n = p.n;
    let mut report = CheckReport::new("charge-reversal")
        .param("n", n)
        .param("m", m)
        .param("q", &p.q)
        .param("z", &p.z);
    for j in 0..=n {
        for bi in 0..a.comps.len() {
            for k in 0..=n {
                for di in 0..a.comps.len() {
                    let lhs = a.get(n - j, rev[bi], n - k, rev[di]);
                    let rhs = b.get(j, bi, k, di);
                    report.compare(
                        || format!("in e{j},{:?}", a.comps[bi]),
                        || format!("out e{k},{:?}", a.comps[di]),
                        lhs,
                        rhs,
                    );
                }
            }
        }
    }
    Ok(report)
}

/// Whether every weight of the vertex is nonnegative; the error names the first offender.
pub fn probe_nonnegative(p: &ModelParams, m: u32) -> Result<()> {
    let t = VertexTable::new(p, m)?;
    if let Some((j, beta, k, delta, w)) = t.first_negative() {
        return Err(Error::NegativeWeight {
            site: 0,
            weight: format!("{w} at (j={j}, beta={beta:?}, k={k}, delta={delta:?}) with q={}, z={}, m={m}", p.q, p.z),
        });
    }
    Ok(())
}

/// CSV with columns `j,beta,k,delta,weight` covering every conserving output.
pub fn write_weights_csv<W: Write>(p: &ModelParams, m: u32, out: W) -> Result<()> {
    let comps = enum_compositions(p.n, m);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "beta", "k", "delta", "weight"])?;
    for j in 0..=p.n {
        for beta in &comps {
            for k in 0..=p.n {
                let Some(delta) = beta.exchange(j, k) else { continue };
                let v = s_entry(p, m, j, beta, k, &delta)?;
                w.write_record([
                    j.to_string(),
                    beta.to_string(),
                    k.to_string(),
                    delta.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn comp(v: &[u32]) -> Composition {
        Composition::new(v.to_vec()).unwrap()
    }

    fn params(n: usize, q: &str, z: &str) -> ModelParams {
        ModelParams::new(n, r(q), r(z)).unwrap()
    }

    #[test]
    fn empty_vertex_is_certain() {
        for m in 1..=3 {
            let p = params(2, "7/3", "2/5");
            let e = Composition::empty(2, m);
            assert_eq!(s_entry(&p, m, 0, &e, 0, &e).unwrap(), Rational::one());
        }
    }

    #[test]
    fn displayed_m2_entry() {
        let p = params(1, "2", "1/2");
        let v = s_entry(&p, 2, 1, &comp(&[1, 1]), 0, &comp(&[0, 2])).unwrap();
        assert_eq!(v, r("4/5"));
        // q (q^2 - 1) / (q^3 - z) evaluated by hand at q = 5/3, z = 2/7
        let p = params(1, "5/3", "2/7");
        let q = r("5/3");
        let z = r("2/7");
        let expect = &q * (q.pow(2) - Rational::one()) / (q.pow(3) - z);
        assert_eq!(s_entry(&p, 2, 1, &comp(&[1, 1]), 0, &comp(&[0, 2])).unwrap(), expect);
    }

    #[test]
    fn m1_table_at_two_half() {
        let p = params(1, "2", "1/2");
        let (e, f) = (comp(&[1, 0]), comp(&[0, 1]));
        assert_eq!(s_entry(&p, 1, 0, &f, 1, &e).unwrap(), r("3/7"));
        assert_eq!(s_entry(&p, 1, 0, &f, 0, &f).unwrap(), r("4/7"));
        assert_eq!(s_entry(&p, 1, 1, &e, 0, &f).unwrap(), r("6/7"));
        assert_eq!(s_entry(&p, 1, 1, &e, 1, &e).unwrap(), r("1/7"));
    }

    #[test]
    fn m2_pair_at_two_half() {
        let p = params(1, "2", "1/2");
        assert_eq!(s_entry(&p, 2, 0, &comp(&[0, 2]), 1, &comp(&[1, 1])).unwrap(), Rational::one());
        assert_eq!(s_entry(&p, 2, 0, &comp(&[0, 2]), 0, &comp(&[0, 2])).unwrap(), Rational::zero());
    }

    #[test]
    fn inverted_weight_matches_reversed_slot() {
        // (q^-2 - 1)/(q^-2 - 1/z) = z (q^2 - 1)/(q^2 - z)
        let p = params(1, "3/2", "1/3");
        let inv = p.inverted().unwrap();
        let (e, f) = (comp(&[1, 0]), comp(&[0, 1]));
        let a = s_entry(&inv, 1, 1, &e, 0, &f).unwrap();
        let b = s_entry(&p, 1, 0, &f, 1, &e).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn charge_reversal_examples() {
        for (n, m, q, z) in [(1, 1, "3/2", "1/3"), (2, 2, "5/3", "2/7"), (3, 2, "-4/9", "11/5")] {
            let rep = check_charge_reversal(&params(n, q, z), m).unwrap();
            assert!(rep.passed(), "{rep}");
        }
    }

    #[test]
    fn n2_m1_has_nine_stochastic_inputs() {
        let s = s_matrix(&params(2, "2", "1/2"), 1).unwrap();
        assert_eq!(s.entries.len(), 9);
        for row in &s.entries {
            assert_eq!(row.iter().sum::<Rational>(), Rational::one());
        }
    }

    #[test]
    fn pole_is_reported() {
        let p = params(1, "2", "4");
        assert!(matches!(s_matrix(&p, 1), Err(Error::Pole { capacity: 1, .. })));
        assert!(s_matrix(&p, 2).is_ok());
    }

    #[test]
    fn nonnegativity_probe() {
        assert!(probe_nonnegative(&params(1, "2", "1/2"), 1).is_ok());
        assert!(probe_nonnegative(&params(1, "2", "1/2").inverted().unwrap(), 1).is_ok());
        assert!(matches!(
            probe_nonnegative(&params(1, "1/2", "1/3"), 1),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn weights_csv_has_displayed_rows() {
        let mut buf = Vec::new();
        write_weights_csv(&params(1, "2", "1/2"), 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("j,beta,k,delta,weight\n"));
        assert!(text.contains("1,1;1,0,0;2,4/5\n"));
        assert!(text.contains("0,0;2,1,1;1,1\n"));
        assert_eq!(text.lines().count(), 11);
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (1i64..=60, 1i64..=60, any::<bool>())
            .prop_map(|(a, b, neg)| Rational::new(if neg { -a } else { a }, b))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn zero_pattern_and_stochasticity(n in 1usize..=3, m in 1u32..=3, q in small_rational(), z in small_rational()) {
            let p = ModelParams::new(n, q.clone(), z.clone()).unwrap();
            prop_assume!(q.pow(i64::from(m) + 1) != z && q.abs() != Rational::one());
            let s = s_matrix(&p, m).unwrap();
            for j in 0..=n {
                for (bi, beta) in s.comps.iter().enumerate() {
                    for k in 0..=n {
                        for (di, delta) in s.comps.iter().enumerate() {
                            let w = s.get(j, bi, k, di);
                            let balanced = beta.exchange(j, k).as_ref() == Some(delta);
                            if !balanced {
                                prop_assert!(w.is_zero());
                            } else if k != j && beta.get(k) == 0 {
                                prop_assert!(w.is_zero());
                            } else if k != j {
                                prop_assert!(!w.is_zero());
                            }
                        }
                    }
                }
            }
            prop_assert!(check_charge_reversal(&p, m).unwrap().passed());
        }
    }
}
