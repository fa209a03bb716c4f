//! The acceptance battery: thirteen criteria, each reduced to one report.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::duality::{DualityVariant, IdentityChecker, IdentityKind};
use crate::error::Result;
use crate::evolve::{
    build_step_matrix, check_l3, check_lf, check_step_window_extension, factorize_entry, stayed_particles, witness_value,
    BoundarySpec, Direction, StepKernel, StepSpec,
};
use crate::examples::{check_asep_limit, example1, example1_closed_form, example2};
use crate::exec::Exec;
use crate::montecarlo::{chi_square_column, estimate_duality_gap};
use crate::params::ParamSampler;
use crate::qarith::Rational;
use crate::report::{CheckReport, Status};
use crate::state::{Composition, Configuration, LatticeWindow};
use crate::vertex::{check_charge_reversal, s_entry, s_matrix, ModelParams};

pub const CRITERIA: [(u8, &str); 13] = [
    (1, "golden vertex weights"),
    (2, "stochasticity and conservation"),
    (3, "charge reversal"),
    (4, "boundary intertwining"),
    (5, "gauge intertwining"),
    (6, "entry factorization"),
    (7, "half-line duality"),
    (8, "first worked example"),
    (9, "second worked example"),
    (10, "line dualities"),
    (11, "window-extension invariance"),
    (12, "ASEP degeneration"),
    (13, "Monte Carlo"),
];

/// Number of random parameter points per configuration.
pub const DRAWS: usize = 5;
pub const MC_SAMPLES: u64 = 200_000;
pub const MC_P_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    /// Wall time; left out of JSON so reports are reproducible.
    #[serde(skip_serializing, default)]
    pub seconds: f64,
    pub report: CheckReport,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {} ({} checks, {} failures, {:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.report.entries_checked,
            self.report.failures,
            self.seconds
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Suite {
    pub seed: u64,
    pub exec: Exec,
}

fn r(s: &str) -> Rational {
    s.parse().expect("literal rational")
}

fn comp1(m: u32, p: u32) -> Composition {
    Composition::new(vec![m - p, p]).expect("one species")
}

/// Folds `sub` into `report`; notes survive only from sub-reports that did not pass.
fn fold(report: &mut CheckReport, sub: &CheckReport, what: impl FnOnce() -> String) {
    let kept = report.notes.len();
    report.absorb(sub);
    if sub.passed() {
        report.notes.truncate(kept);
    } else {
        report.notes.insert(kept, format!("{} ({}): {}", what(), sub.identity, sub.status));
    }
}

type Golden = fn(&Rational, &Rational) -> Rational;

/// `(m, j, beta, k, delta, weight)` in particle counts, as displayed.
fn golden_table() -> Vec<(u32, usize, u32, usize, u32, Golden)> {
    fn den(q: &Rational, z: &Rational, m: i64) -> Rational {
        q.pow(m + 1) - z
    }
    vec![
        (1, 0, 1, 1, 0, |q, z| z * (q.pow(2) - Rational::one()) / den(q, z, 1)),
        (1, 0, 1, 0, 1, |q, z| q.pow(2) * (Rational::one() - z) / den(q, z, 1)),
        (1, 1, 0, 0, 1, |q, z| (q.pow(2) - Rational::one()) / den(q, z, 1)),
        (1, 1, 0, 1, 0, |q, z| (Rational::one() - z) / den(q, z, 1)),
        (2, 0, 2, 1, 1, |q, z| z * (q.pow(4) - Rational::one()) / den(q, z, 2)),
        (2, 0, 2, 0, 2, |q, z| q.pow(3) * (Rational::one() - q * z) / den(q, z, 2)),
        (2, 0, 1, 1, 0, |q, z| z * (q.pow(2) - Rational::one()) / den(q, z, 2)),
        (2, 0, 1, 0, 1, |q, z| q.pow(3) * (Rational::one() - q.recip() * z) / den(q, z, 2)),
        (2, 1, 0, 1, 0, |q, z| q.recip() * (Rational::one() - q * z) / den(q, z, 2)),
        (2, 1, 0, 0, 1, |q, z| q.recip() * (q.pow(4) - Rational::one()) / den(q, z, 2)),
        (2, 1, 1, 1, 1, |q, z| q * (Rational::one() - q.recip() * z) / den(q, z, 2)),
        (2, 1, 1, 0, 2, |q, z| q * (q.pow(2) - Rational::one()) / den(q, z, 2)),
    ]
}

/// Reports whether at least one variant passed each instance, and stores the full matrix.
struct VariantMatrix {
    rows: Vec<serde_json::Value>,
    instances: u64,
    covered: u64,
}

impl VariantMatrix {
    fn new() -> Self {
        VariantMatrix {
            rows: Vec::new(),
            instances: 0,
            covered: 0,
        }
    }

    /// Runs every variant on one instance; returns whether any passed.
    fn instance(
        &mut self,
        report: &mut CheckReport,
        label: serde_json::Value,
        run: impl Fn(DualityVariant) -> Result<CheckReport>,
    ) -> Result<bool> {
        let mut statuses = serde_json::Map::new();
        let mut any = false;
        for v in DualityVariant::ALL {
            let sub = match run(v) {
                Ok(s) => s,
                Err(e) => {
                    statuses.insert(v.tag().into(), serde_json::json!(format!("error: {e}")));
                    continue;
                }
            };
            report.entries_checked += sub.entries_checked;
            report.sampled |= sub.sampled;
            statuses.insert(v.tag().into(), serde_json::json!(sub.status));
            any |= sub.status == Status::ExactPass;
        }
        self.instances += 1;
        self.covered += u64::from(any);
        self.rows.push(serde_json::json!({ "instance": label, "variants": statuses }));
        if !any {
            report.fail(format!("no variant passes at {label}"));
        }
        Ok(any)
    }
}

impl Suite {
    pub fn new(seed: u64, exec: Exec) -> Self {
        Suite { seed, exec }
    }

    fn sampler(&self, id: u8) -> ParamSampler {
        ParamSampler::new(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(u64::from(id)))
    }

    pub fn run(&self, id: u8) -> Result<CriterionOutcome> {
        let start = Instant::now();
        let report = match id {
            1 => self.golden_weights()?,
            2 => self.stochasticity()?,
            3 => self.charge_reversal()?,
            4 => self.boundary_intertwining()?,
            5 => self.gauge_intertwining()?,
            6 => self.factorization()?,
            7 => self.theorem1()?,
            8 => self.example_one()?,
            9 => self.example_two()?,
            10 => self.line_dualities()?,
            11 => self.window_extension()?,
            12 => self.asep()?,
            13 => self.monte_carlo()?,
            _ => return Err(crate::Error::Config(format!("no criterion {id}"))),
        };
        let title = CRITERIA[usize::from(id) - 1].1.to_string();
        Ok(CriterionOutcome {
            id,
            title,
            passed: report.passed(),
            seconds: start.elapsed().as_secs_f64(),
            report,
        })
    }

    pub fn run_all(&self, mut progress: impl FnMut(&CriterionOutcome)) -> Result<SuiteReport> {
        let mut criteria = Vec::new();
        for (id, _) in CRITERIA {
            let c = self.run(id)?;
            progress(&c);
            criteria.push(c);
        }
        Ok(SuiteReport { seed: self.seed, criteria })
    }

    pub fn golden_weights(&self) -> Result<CheckReport> {
        let mut s = self.sampler(1);
        let mut report = CheckReport::new("golden-weights").param("draws", 25);
        let table = golden_table();
        for _ in 0..25 {
            let (q, z) = s.q_and_z(&[1, 2]);
            for &(m, j, b, k, d, f) in &table {
                let p = ModelParams::new(1, q.clone(), z.clone())?;
                let w = s_entry(&p, m, j, &comp1(m, b), k, &comp1(m, d))?;
                report.compare(|| format!("m={m} j={j} beta={b} k={k} delta={d} q={q} z={z}"), || "displayed".into(), &w, &f(&q, &z));
            }
        }
        Ok(report)
    }

    pub fn stochasticity(&self) -> Result<CheckReport> {
        let mut s = self.sampler(2);
        let mut report = CheckReport::new("stochasticity");
        for n in 1..=3 {
            for m in 1..=3u32 {
                for _ in 0..10 {
                    let (q, z) = s.q_and_z(&[m]);
                    let p = ModelParams::new(n, q.clone(), z.clone())?;
                    let sm = match s_matrix(&p, m) {
                        Ok(sm) => sm,
                        Err(e) => {
                            report.fail(format!("n={n} m={m} q={q} z={z}: {e}"));
                            continue;
                        }
                    };
                    let nb = sm.comps.len();
                    for j in 0..=n {
                        for (bi, beta) in sm.comps.iter().enumerate() {
                            let mut total = Rational::zero();
                            for k in 0..=n {
                                for (di, delta) in sm.comps.iter().enumerate() {
                                    let w = sm.get(j, bi, k, di);
                                    total += w;
                                    let conserved = (0..=n).all(|i| beta.get(i) + u32::from(i == j) == delta.get(i) + u32::from(i == k));
                                    if !conserved {
                                        report.compare(|| format!("n={n} m={m} ({j},{beta}) -> ({k},{delta})"), || "0".into(), w, &Rational::zero());
                                    }
                                }
                            }
                            report.compare(|| format!("n={n} m={m} column ({j},{beta}) q={q} z={z}"), || "1".into(), &total, &Rational::one());
                        }
                    }
                    debug_assert_eq!(sm.entries.len(), (n + 1) * nb);
                }
            }
        }
        Ok(report)
    }

    pub fn charge_reversal(&self) -> Result<CheckReport> {
        let mut s = self.sampler(3);
        let mut report = CheckReport::new("charge-reversal");
        for n in 1..=3 {
            for m in 1..=3u32 {
                for _ in 0..10 {
                    let (q, z) = s.q_and_z(&[m]);
                    let sub = check_charge_reversal(&ModelParams::new(n, q.clone(), z.clone())?, m)?;
                    fold(&mut report, &sub, || format!("n={n} m={m} q={q} z={z}"));
                }
            }
        }
        Ok(report)
    }

    pub fn boundary_intertwining(&self) -> Result<CheckReport> {
        let mut s = self.sampler(4);
        let mut report = CheckReport::new("L3");
        for len in 1..=3i64 {
            for n in 1..=2 {
                for m in 1..=2u32 {
                    let w = LatticeWindow::uniform(0, len - 1, m)?;
                    for _ in 0..DRAWS {
                        let (q, zs) = s.q_and_zvec(&w.capacities);
                        let sub = check_l3(n, &q, &w, &zs, self.exec)?;
                        fold(&mut report, &sub, || format!("L={len} n={n} m={m} q={q}"));
                    }
                }
            }
        }
        Ok(report)
    }

    pub fn gauge_intertwining(&self) -> Result<CheckReport> {
        let mut s = self.sampler(5);
        let mut report = CheckReport::new("LF");
        for len in 3..=6i64 {
            for n in 1..=2 {
                let w = LatticeWindow::uniform(0, len - 1, 1)?;
                for _ in 0..DRAWS {
                    let (q, z) = s.q_and_z(&[1]);
                    let sub = check_lf(n, &q, &z, &w, self.exec)?;
                    fold(&mut report, &sub, || format!("L={len} n={n} q={q} z={z}"));
                }
            }
        }
        Ok(report)
    }

    pub fn factorization(&self) -> Result<CheckReport> {
        let mut s = self.sampler(6);
        let mut report = CheckReport::new("factorization");
        for len in 1..=6i64 {
            let w = LatticeWindow::uniform(0, len - 1, 1)?;
            let (q, z) = s.q_and_z(&[1]);
            let spec = StepSpec::new(1, q.clone(), w.clone(), vec![z.clone(); w.len()], Direction::Forward, BoundarySpec::FORWARD_EXIT);
            let kernel = StepKernel::new(&spec)?;
            let space = kernel.space.clone();
            let rows = self.exec.map(space.size(), |src| {
                let sc = space.config(src);
                let mut out = Vec::new();
                if !sc.is_interior(1) {
                    return out;
                }
                for o in kernel.outcomes(src).0 {
                    if o.boundary_color != 0 || o.weight.is_zero() {
                        continue;
                    }
                    let tc = space.config(o.target);
                    let wit = factorize_entry(&q, &z, &sc, &tc);
                    out.push((sc.clone(), tc, o.weight, wit));
                }
                out
            });
            for (sc, tc, weight, wit) in rows.into_iter().flatten() {
                match wit {
                    Ok(wit) => {
                        report.compare(|| format!("{sc:?} -> {tc:?}"), || format!("{wit:?}"), &weight, &witness_value(&wit, &q, &z));
                        if wit.a2 == 0 && wit.a1 != stayed_particles(&sc, &tc) {
                            report.fail(format!("{sc:?} -> {tc:?}: A2 = 0 but A1 differs from the stayed count"));
                        }
                    }
                    Err(e) => report.fail(format!("{sc:?} -> {tc:?}: {e}")),
                }
            }
        }
        Ok(report)
    }

    fn theorem1_grid(&self, id: u8) -> Vec<(usize, u32, Rational, Vec<Rational>)> {
        let mut s = self.sampler(id);
        let mut out = Vec::new();
        for (n, m) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            for _ in 0..DRAWS {
                let (q, zs) = s.q_and_zvec(&[m; 4]);
                out.push((n, m, q, zs));
            }
        }
        out
    }

    pub fn theorem1(&self) -> Result<CheckReport> {
        let mut report = CheckReport::new("theorem1");
        let mut matrix = VariantMatrix::new();
        for (i, (n, m, q, zs)) in self.theorem1_grid(7).into_iter().enumerate() {
            let w = LatticeWindow::uniform(-4, -1, m)?;
            let label = serde_json::json!({ "n": n, "m": m, "q": q, "zvec": zs });
            let seed = self.seed.wrapping_add(i as u64);
            matrix.instance(&mut report, label, |v| {
                IdentityChecker::new(IdentityKind::Theorem1, v, n, &q, &w, &zs)?.check(self.exec, seed)
            })?;
        }
        report.set_param("variant_matrix", &matrix.rows);
        report.set_param("instances_with_a_passing_variant", format!("{}/{}", matrix.covered, matrix.instances));
        Ok(report)
    }

    pub fn example_one(&self) -> Result<CheckReport> {
        let mut s = self.sampler(8);
        let mut report = CheckReport::new("example-1");
        for m in 1..=3u32 {
            for k in 1..=m {
                for _ in 0..DRAWS {
                    let (q, z) = s.q_and_z(&[m]);
                    let sub = example1(m, k, &q, &z, DualityVariant::ExampleConsistent)?;
                    fold(&mut report, &sub, || format!("m={m} k={k} q={q} z={z}"));
                    let closed = example1_closed_form(m, k, &q, &z)?;
                    report.absorb(&closed);
                }
            }
        }
        let spot = example1_closed_form(2, 1, &r("2"), &r("1/2"))?;
        report.set_param("spot_check_m2_k1_q2_z1/2", &spot.parameters);
        report.absorb(&spot);
        report.notes.dedup();
        Ok(report)
    }

    pub fn example_two(&self) -> Result<CheckReport> {
        let mut s = self.sampler(9);
        let mut report = CheckReport::new("example-2");
        let caps = [1, 2, 2];
        for r in 1..=3 {
            for _ in 0..DRAWS {
                let (q, z) = s.q_and_z(&caps);
                let sub = example2(&caps, r, &q, &z)?;
                fold(&mut report, &sub, || format!("r={r} q={q} z={z}"));
            }
        }
        Ok(report)
    }

    pub fn line_dualities(&self) -> Result<CheckReport> {
        let mut report = CheckReport::new("line-dualities");
        let mut s = self.sampler(10);
        // the literal corollary, with the proof's form alongside for the record
        let w6 = LatticeWindow::uniform(-3, 2, 1)?;
        let mut proof_form = Vec::new();
        for n in 1..=2 {
            for i in 0..DRAWS {
                let (q, z) = s.q_and_z(&[1]);
                let zs = vec![z.clone(); w6.len()];
                let seed = self.seed.wrapping_add(i as u64);
                let sub = IdentityChecker::new(IdentityKind::Corollary, DualityVariant::Tilde, n, &q, &w6, &zs)?.check(self.exec, seed)?;
                fold(&mut report, &sub, || format!("corollary n={n} q={q} z={z}"));
                let alt = IdentityChecker::new(IdentityKind::CorollaryProof, DualityVariant::Tilde, n, &q, &w6, &zs)?.check(self.exec, seed)?;
                proof_form.push(serde_json::json!({ "n": n, "q": q, "z": z, "status": alt.status, "failures": alt.failures }));
            }
        }
        report.set_param("corollary_proof_form", &proof_form);

        let mut eq = VariantMatrix::new();
        for (i, (n, m, q, zs)) in self.theorem1_grid(7).into_iter().enumerate() {
            let w = LatticeWindow::uniform(-4, -1, m)?;
            let label = serde_json::json!({ "identity": "eq-4-10", "n": n, "m": m, "q": q, "zvec": zs });
            let seed = self.seed.wrapping_add(i as u64);
            eq.instance(&mut report, label, |v| IdentityChecker::new(IdentityKind::Eq410, v, n, &q, &w, &zs)?.check(self.exec, seed))?;
        }
        report.set_param("eq_4_10_matrix", &eq.rows);

        let mut df = VariantMatrix::new();
        for n in 1..=2 {
            for m in 1..=2u32 {
                let w5 = LatticeWindow::uniform(-2, 2, m)?;
                for i in 0..DRAWS {
                    let (q, zs) = s.q_and_zvec(&w5.capacities);
                    let label = serde_json::json!({ "identity": "remark-dfrak", "n": n, "m": m, "q": q, "zvec": zs });
                    let seed = self.seed.wrapping_add(i as u64);
                    df.instance(&mut report, label, |v| {
                        IdentityChecker::new(IdentityKind::RemarkDfrak, v, n, &q, &w5, &zs)?.check(self.exec, seed)
                    })?;
                }
            }
        }
        report.set_param("remark_dfrak_matrix", &df.rows);
        Ok(report)
    }

    pub fn window_extension(&self) -> Result<CheckReport> {
        let mut report = CheckReport::new("window-extension");
        let mut checkers: Vec<IdentityChecker> = Vec::new();
        // one parameter point per configuration of the duality criteria
        for (n, m, q, zs) in self.theorem1_grid(7).into_iter().step_by(DRAWS) {
            let w = LatticeWindow::uniform(-4, -1, m)?;
            for kind in [IdentityKind::Theorem1, IdentityKind::Eq410] {
                for v in DualityVariant::ALL {
                    checkers.push(IdentityChecker::new(kind, v, n, &q, &w, &zs)?);
                }
            }
        }
        let mut s = self.sampler(11);
        for n in 1..=2 {
            let (q, z) = s.q_and_z(&[1]);
            let w6 = LatticeWindow::uniform(-3, 2, 1)?;
            for kind in [IdentityKind::Corollary, IdentityKind::CorollaryProof] {
                checkers.push(IdentityChecker::new(kind, DualityVariant::Tilde, n, &q, &w6, &vec![z.clone(); 6])?);
            }
            for m in 1..=2u32 {
                let w5 = LatticeWindow::uniform(-2, 2, m)?;
                let (q, zs) = s.q_and_zvec(&w5.capacities);
                for v in DualityVariant::ALL {
                    checkers.push(IdentityChecker::new(IdentityKind::RemarkDfrak, v, n, &q, &w5, &zs)?);
                }
            }
        }
        for m in 1..=3u32 {
            let (q, z) = s.q_and_z(&[m]);
            let w = LatticeWindow::uniform(-1, 1, m)?;
            checkers.push(IdentityChecker::new(IdentityKind::RemarkDfrak, DualityVariant::ExampleConsistent, 1, &q, &w, &vec![z; 3])?);
        }
        let (q, z) = s.q_and_z(&[1, 2]);
        let w2 = LatticeWindow::new(-3, -1, vec![2, 2, 1], 2)?;
        checkers.push(IdentityChecker::new(IdentityKind::Theorem1, DualityVariant::Normalized, 1, &q, &w2, &vec![z; 3])?);

        let mut steps_done: Vec<(IdentityKind, usize, LatticeWindow, Rational)> = Vec::new();
        for (i, ch) in checkers.iter().enumerate() {
            let (pairs, sampled) = ch.pairs(self.seed.wrapping_add(i as u64));
            let sub = ch.extension_report(&pairs, self.exec)?;
            report.sampled |= sampled;
            fold(&mut report, &sub, || format!("{} {} n={} window {}..{}", ch.kind, ch.variant, ch.n, ch.window.lo, ch.window.hi));
            let key = (ch.kind, ch.n, ch.window.clone(), ch.q.clone());
            if steps_done.contains(&key) {
                continue;
            }
            steps_done.push(key);
            let (left, right) = ch.kind.growth();
            let margin = ch.kind.margin();
            for spec in [&ch.lhs_kernel().spec, &ch.rhs_kernel().spec] {
                let sub = check_step_window_extension(spec, left, right, margin, self.exec)?;
                fold(&mut report, &sub, || format!("step matrix for {} n={} window {}..{}", ch.kind, ch.n, ch.window.lo, ch.window.hi));
            }
        }
        report.set_param("configurations", checkers.len());
        Ok(report)
    }

    pub fn asep(&self) -> Result<CheckReport> {
        let mut report = CheckReport::new("asep-limit");
        let w = LatticeWindow::uniform(0, 5, 1)?;
        let mut conventions = Vec::new();
        for q in ["2", "3/2"] {
            let sub = check_asep_limit(&r(q), &w, &r("1/1000"))?;
            conventions.push(serde_json::json!({ "q": q, "parameters": sub.parameters }));
            fold(&mut report, &sub, || format!("q={q}"));
        }
        report.set_param("runs", &conventions);
        Ok(report)
    }

    pub fn monte_carlo(&self) -> Result<CheckReport> {
        let (q, z) = (r("2"), r("1/2"));
        let mut report = CheckReport::new("monte-carlo").param("q", &q).param("z", &z).param("samples", MC_SAMPLES);
        let mut s = self.sampler(13);
        let mut chis = Vec::new();
        let mut specs = Vec::new();
        for n in 1..=2 {
            for m in 1..=2u32 {
                let w = LatticeWindow::uniform(0, 2, m)?;
                let fwd = StepSpec::new(n, q.clone(), w.clone(), vec![z.clone(); 3], Direction::Forward, BoundarySpec::FORWARD_EXIT);
                specs.push(fwd.clone());
                if m == 1 {
                    specs.push(fwd.inverted()?.with(Direction::Reversed, BoundarySpec::REVERSED_INJECT));
                }
            }
        }
        for spec in &specs {
            let matrix = build_step_matrix(spec, self.exec)?;
            let full = matrix.size() - 1;
            for src in [s.index(matrix.size()), full] {
                let seed = self.seed.wrapping_add(chis.len() as u64);
                let res = chi_square_column(&matrix, src, MC_SAMPLES, seed, self.exec)?;
                report.entries_checked += 1;
                if !res.passes(MC_P_THRESHOLD) {
                    report.fail(format!("chi-square from {:?}: p = {:.3e}", matrix.space.config(src), res.p_value));
                }
                chis.push(serde_json::json!({
                    "n": spec.n, "window": spec.window, "direction": spec.direction,
                    "source": matrix.space.config(src).sites.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                    "dof": res.dof, "statistic": res.statistic, "p_value": res.p_value,
                }));
            }
        }
        report.set_param("chi_square", &chis);

        let mut gaps = Vec::new();
        let ex1 = LatticeWindow::uniform(-1, 1, 1)?;
        let ch = IdentityChecker::new(IdentityKind::RemarkDfrak, DualityVariant::ExampleConsistent, 1, &q, &ex1, &vec![z.clone(); 3])?;
        let one = Configuration::with_particles(1, &ex1, &[(0, 1, 1)])?;
        let mut cases = vec![(ch, one.clone(), one)];
        let hl = LatticeWindow::uniform(-3, -1, 1)?;
        let t1 = IdentityChecker::new(IdentityKind::Theorem1, DualityVariant::Normalized, 1, &q, &hl, &vec![z.clone(); 3])?;
        for (xs, es) in [(vec![-2], vec![-1]), (vec![-3, -1], vec![-2, -1]), (vec![-2], vec![-3, -2])] {
            let mk = |v: &[i64]| Configuration::with_particles(1, &hl, &v.iter().map(|&x| (x, 1, 1)).collect::<Vec<_>>());
            cases.push((t1.clone(), mk(&xs)?, mk(&es)?));
        }
        for (i, (ch, xi, eta)) in cases.iter().enumerate() {
            let g = estimate_duality_gap(ch, xi, eta, 100_000, self.seed.wrapping_add(1000 + i as u64), self.exec)?;
            report.entries_checked += 1;
            if !g.brackets(4.0) {
                report.fail(format!("{} at {xi:?}, {eta:?}: estimates miss the exact values by more than 4 sigma", ch.kind));
            }
            gaps.push(serde_json::json!({
                "identity": ch.kind, "variant": ch.variant,
                "exact_lhs": g.exact_lhs, "lhs": g.lhs.mean.to_f64(), "lhs_stderr": g.lhs.stderr,
                "exact_rhs": g.exact_rhs, "rhs": g.rhs.mean.to_f64(), "rhs_stderr": g.rhs.stderr,
            }));
        }
        let (ch, xi, eta) = &cases[0];
        let small = estimate_duality_gap(ch, xi, eta, 1000, self.seed.wrapping_add(2000), self.exec)?;
        let big = estimate_duality_gap(ch, xi, eta, 100_000, self.seed.wrapping_add(2001), self.exec)?;
        let ratio = small.lhs.stderr / big.lhs.stderr;
        report.entries_checked += 1;
        report.set_param("stderr_ratio_100x", ratio);
        if !(7.0..=14.0).contains(&ratio) {
            report.fail(format!("stderr shrank by {ratio:.2} for 100 times the samples"));
        }
        report.set_param("duality_gaps", &gaps);
        Ok(report)
    }
}
