//! Trajectory sampling of the vertex dynamics with exact integer thresholds,
//! and statistical cross-checks against the exact step matrix and duality.

use std::collections::HashMap;
use std::io::Write;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::duality::IdentityChecker;
use crate::error::{Error, Result};
use crate::evolve::{Direction, Outcome, StepKernel, StepMatrix, StepSpec};
use crate::exec::Exec;
use crate::qarith::Rational;
use crate::state::Configuration;
use crate::vertex::VertexTable;

/// A simulation run: the dynamics plus step, trial and seed counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(flatten)]
    pub step: StepSpec,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Precondition("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Generator for one trial: stream `trial` of the base seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Outputs of one vertex input with cumulative integer thresholds over a common denominator.
#[derive(Clone, Debug)]
enum Draw {
    Certain(usize, usize),
    Small { outs: Vec<(usize, usize)>, cum: Vec<u64>, total: u64 },
    Big { outs: Vec<(usize, usize)>, cum: Vec<BigUint>, total: BigUint },
}

impl Draw {
    fn new(site: usize, outs: &[(usize, usize, Rational)]) -> Result<Self> {
        let live: Vec<&(usize, usize, Rational)> = outs.iter().filter(|o| !o.2.is_zero()).collect();
        if let Some(o) = live.iter().find(|o| o.2.is_negative()) {
            return Err(Error::NegativeWeight {
                site,
                weight: o.2.to_string(),
            });
        }
        if live.len() == 1 {
            return Ok(Draw::Certain(live[0].0, live[0].1));
        }
        let lcm = live.iter().fold(BigInt::one(), |acc, o| acc.lcm(o.2.denom()));
        let mut acc = BigUint::zero();
        let mut cum = Vec::with_capacity(live.len());
        for o in &live {
            let num = o.2.numer() * (&lcm / o.2.denom());
            let (_, mag) = num.into_parts();
            acc += mag;
            cum.push(acc.clone());
        }
        if BigInt::from_biguint(Sign::Plus, acc.clone()) != lcm {
            return Err(Error::Defect(format!("vertex outputs at site {site} do not sum to 1")));
        }
        let pairs = live.iter().map(|o| (o.0, o.1)).collect();
        Ok(match acc.to_u64() {
            Some(total) => Draw::Small {
                outs: pairs,
                cum: cum.iter().map(|c| c.to_u64().expect("below total")).collect(),
                total,
            },
            None => Draw::Big { outs: pairs, cum, total: acc },
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        match self {
            Draw::Certain(k, d) => (*k, *d),
            Draw::Small { outs, cum, total } => {
                let u = rng.gen_range(0..*total);
                outs[cum.partition_point(|c| *c <= u)]
            }
            Draw::Big { outs, cum, total } => {
                let u = rng.gen_biguint_below(total);
                outs[cum.partition_point(|c| *c <= u)]
            }
        }
    }
}

/// One sampled step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledStep {
    pub config: Configuration,
    /// Color absorbed at the left edge, if any.
    pub absorbed: Option<usize>,
    /// Color that left through the right edge, if any.
    pub exited: Option<usize>,
}

/// Samples the step dynamics site by site, exactly as the transfer product composes.
#[derive(Clone, Debug)]
pub struct StepSampler {
    kernel: StepKernel,
    /// `draws[site][j][beta_idx]`
    draws: Vec<Vec<Vec<Draw>>>,
}

impl StepSampler {
    /// Fails unless every vertex weight the dynamics can use is nonnegative.
    pub fn new(spec: &StepSpec) -> Result<Self> {
        Self::from_kernel(StepKernel::new(spec)?)
    }

    pub fn from_kernel(kernel: StepKernel) -> Result<Self> {
        if !kernel.spec.boundary.terminal_open(kernel.spec.direction) {
            return Err(Error::Precondition("a closed terminal edge loses mass; sampling needs an open one".into()));
        }
        let mut cache: HashMap<*const VertexTable, Vec<Vec<Draw>>> = HashMap::new();
        let mut draws = Vec::with_capacity(kernel.spec.window.len());
        for site in 0..kernel.spec.window.len() {
            let t = kernel.table(site);
            let key = t as *const VertexTable;
            if let Some(d) = cache.get(&key) {
                draws.push(d.clone());
                continue;
            }
            let per_j = t
                .outs
                .iter()
                .map(|by_beta| by_beta.iter().map(|o| Draw::new(site, o)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            cache.insert(key, per_j.clone());
            draws.push(per_j);
        }
        Ok(StepSampler { kernel, draws })
    }

    pub fn kernel(&self) -> &StepKernel {
        &self.kernel
    }

    /// One step on mixed-radix digits in place; returns the color leaving the terminal edge.
    pub fn step_digits<R: Rng>(&self, digits: &mut [usize], rng: &mut R) -> usize {
        let mut h = self.kernel.entering_color();
        for x in self.kernel.sweep_order() {
            let (k, d) = self.draws[x][h][digits[x]].sample(rng);
            digits[x] = d;
            h = k;
        }
        h
    }

    /// One step from `config`.
    pub fn sample_step<R: Rng>(&self, config: &Configuration, rng: &mut R) -> Result<SampledStep> {
        let space = &self.kernel.space;
        let idx = space
            .index(config)
            .ok_or_else(|| Error::Config(format!("{config:?} is not a state of the window")))?;
        let mut digits = space.digits(idx);
        let h = self.step_digits(&mut digits, rng);
        let out = (h != 0).then_some(h);
        let (absorbed, exited) = match self.kernel.spec.direction {
            Direction::Forward => (None, out),
            Direction::Reversed => (out, None),
        };
        Ok(SampledStep {
            config: space.config(space.from_digits(&digits)),
            absorbed,
            exited,
        })
    }

    /// Target index and terminal color of one step from state `source`.
    pub fn sample_index<R: Rng>(&self, source: usize, rng: &mut R) -> (usize, usize) {
        let space = &self.kernel.space;
        let mut digits = space.digits(source);
        let h = self.step_digits(&mut digits, rng);
        (space.from_digits(&digits), h)
    }
}

/// Exact sample mean and variance of the mean, plus the standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: Rational,
    pub var_of_mean: Rational,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    /// From `(value, count)` pairs.
    pub fn from_counts<'a>(values: impl IntoIterator<Item = (&'a Rational, u64)> + Clone) -> Self {
        let mut n = 0u64;
        let mut sum = Rational::zero();
        let mut sq = Rational::zero();
        for (v, c) in values {
            let c = Rational::from_integer(c as i64);
            sum += v * &c;
            sq += v * v * &c;
            n += c.to_f64() as u64;
        }
        if n == 0 {
            return Estimate {
                mean: Rational::zero(),
                var_of_mean: Rational::zero(),
                stderr: 0.0,
                samples: 0,
            };
        }
        let nr = Rational::from_integer(n as i64);
        let mean = &sum / &nr;
        let var_of_mean = if n < 2 {
            Rational::zero()
        } else {
            (sq - &mean * &sum) / (&nr * (&nr - Rational::one()))
        };
        let stderr = var_of_mean.to_f64().max(0.0).sqrt();
        Estimate {
            mean,
            var_of_mean,
            stderr,
            samples: n,
        }
    }

    /// `|mean - exact| <= k * stderr`, exact equality required when the stderr vanishes.
    pub fn within(&self, exact: &Rational, k: f64) -> bool {
        if self.var_of_mean.is_zero() {
            return &self.mean == exact;
        }
        (&self.mean - exact).abs().to_f64() <= k * self.stderr
    }
}

/// `N` one-step samples from state `source`, split over independent trial streams.
pub fn sample_counts(sampler: &StepSampler, source: usize, trials: u64, seed: u64, exec: Exec) -> HashMap<(usize, usize), u64> {
    const CHUNK: u64 = 4096;
    let chunks = trials.div_ceil(CHUNK) as usize;
    let parts = exec.map(chunks, |c| {
        let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
        let start = c as u64 * CHUNK;
        for trial in start..(start + CHUNK).min(trials) {
            let mut rng = trial_rng(seed, trial);
            *counts.entry(sampler.sample_index(source, &mut rng)).or_insert(0) += 1;
        }
        counts
    });
    let mut total: HashMap<(usize, usize), u64> = HashMap::new();
    for p in parts {
        for (k, v) in p {
            *total.entry(k).or_insert(0) += v;
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub source: usize,
    pub samples: u64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Outcomes sampled with zero exact probability.
    pub impossible: u64,
}

impl ChiSquareResult {
    pub fn passes(&self, threshold: f64) -> bool {
        self.impossible == 0 && self.p_value > threshold
    }
}

/// Pearson chi-square of the empirical one-step distribution from `source`
/// against the exact column, pooling outcomes with expected count below 5.
pub fn chi_square_column(matrix: &StepMatrix, source: usize, samples: u64, seed: u64, exec: Exec) -> Result<ChiSquareResult> {
    let sampler = StepSampler::new(&matrix.spec)?;
    chi_square_against(&sampler, matrix.column(source), source, samples, seed, exec)
}

/// As [`chi_square_column`], taking the exact column from the sampler's own kernel.
pub fn chi_square_source(sampler: &StepSampler, source: usize, samples: u64, seed: u64, exec: Exec) -> Result<ChiSquareResult> {
    let column = sampler.kernel().outcomes(source).0;
    chi_square_against(sampler, &column, source, samples, seed, exec)
}

fn chi_square_against(sampler: &StepSampler, column: &[Outcome], source: usize, samples: u64, seed: u64, exec: Exec) -> Result<ChiSquareResult> {
    let counts = sample_counts(sampler, source, samples, seed, exec);
    let n = samples as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    let mut seen = 0u64;
    for o in column {
        let p = o.weight.to_f64();
        if p < 0.0 {
            return Err(Error::NegativeWeight {
                site: 0,
                weight: o.weight.to_string(),
            });
        }
        let obs = counts.get(&(o.target, o.boundary_color)).copied().unwrap_or(0);
        seen += obs;
        let exp = n * p;
        if exp < 5.0 {
            pooled_obs += obs as f64;
            pooled_exp += exp;
        } else {
            stat += (obs as f64 - exp).powi(2) / exp;
            bins += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    }
    let dof = bins.saturating_sub(1);
    let p_value = if dof == 0 {
        if stat == 0.0 { 1.0 } else { 0.0 }
    } else {
        ChiSquared::new(dof as f64).map_err(|e| Error::Domain(e.to_string()))?.sf(stat)
    };
    Ok(ChiSquareResult {
        source,
        samples,
        statistic: stat,
        dof,
        p_value,
        impossible: samples - seen,
    })
}

/// Monte Carlo estimates of both sides of a duality identity at one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityGap {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub exact_lhs: Rational,
    pub exact_rhs: Rational,
}

impl DualityGap {
    pub fn brackets(&self, k: f64) -> bool {
        self.lhs.within(&self.exact_lhs, k) && self.rhs.within(&self.exact_rhs, k)
    }
}

/// `E_xi[D(xi_1, eta)]` and `E_eta[D(xi, eta_1)]` (with boundary factors)
/// from `trials` one-step samples of each side; both dynamics must be nonnegative.
pub fn estimate_duality_gap(
    checker: &IdentityChecker,
    xi: &Configuration,
    eta: &Configuration,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<DualityGap> {
    let space = checker.space().clone();
    let find = |c: &Configuration| space.index(c).ok_or_else(|| Error::Config(format!("{c:?} is not a state of the window")));
    let (xi_i, eta_i) = (find(xi)?, find(eta)?);
    let lhs_sampler = StepSampler::from_kernel(checker.lhs_kernel().clone())?;
    let rhs_sampler = StepSampler::from_kernel(checker.rhs_kernel().clone())?;
    let (xi_d, eta_d) = (space.digits(xi_i), space.digits(eta_i));

    let lc = sample_counts(&lhs_sampler, xi_i, trials, seed, exec);
    let lv: Vec<(Rational, u64)> = lc.iter().map(|(&(t, h), &c)| (checker.lhs_observable(t, h, &eta_d), c)).collect();
    let rc = sample_counts(&rhs_sampler, eta_i, trials, seed ^ 0x5151_5151, exec);
    let rv: Vec<(Rational, u64)> = rc.iter().map(|(&(t, h), &c)| (checker.rhs_observable(&xi_d, t, h), c)).collect();
    let (exact_lhs, exact_rhs) = checker.pair_values(xi_i, eta_i);
    Ok(DualityGap {
        lhs: Estimate::from_counts(lv.iter().map(|(v, c)| (v, *c))),
        rhs: Estimate::from_counts(rv.iter().map(|(v, c)| (v, *c))),
        exact_lhs,
        exact_rhs,
    })
}

/// Trajectories and per-step observables of a run.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub spec: SimSpec,
    /// `trajectories[trial][step]`, present when recorded.
    pub trajectories: Option<Vec<Vec<Configuration>>>,
    /// `(step, observable, estimate)` rows.
    pub summary: Vec<(usize, String, Estimate)>,
}

struct TrialRecord {
    states: Vec<Configuration>,
    /// Per step: particles of each species in the window, then cumulative boundary events.
    observables: Vec<Vec<i64>>,
}

/// Runs `spec.trials` independent trajectories from `initial`.
pub fn simulate(spec: &SimSpec, initial: &Configuration, record: bool, exec: Exec) -> Result<Simulation> {
    spec.validate()?;
    let sampler = StepSampler::new(&spec.step)?;
    sampler
        .kernel()
        .space
        .index(initial)
        .ok_or_else(|| Error::Config(format!("{initial:?} is not a state of the window")))?;
    let n = spec.step.n;
    let observe = |c: &Configuration, events: i64| {
        let mut v: Vec<i64> = c.species_counts().iter().skip(1).map(|&x| x as i64).collect();
        v.push(events);
        v
    };
    let runs = exec.map(spec.trials, |trial| -> Result<TrialRecord> {
        let mut rng = trial_rng(spec.seed, trial as u64);
        let mut cur = initial.clone();
        let mut events = 0i64;
        let mut states = vec![cur.clone()];
        let mut observables = vec![observe(&cur, 0)];
        for _ in 0..spec.steps {
            let s = sampler.sample_step(&cur, &mut rng)?;
            events += i64::from(s.absorbed.is_some() || s.exited.is_some());
            cur = s.config;
            observables.push(observe(&cur, events));
            if record {
                states.push(cur.clone());
            }
        }
        Ok(TrialRecord { states, observables })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut names: Vec<String> = (1..=n).map(|c| format!("species_{c}")).collect();
    names.push(match spec.step.direction {
        Direction::Forward => "exited".into(),
        Direction::Reversed => "absorbed".into(),
    });
    let mut summary = Vec::new();
    for step in 0..=spec.steps {
        for (o, name) in names.iter().enumerate() {
            let mut counts: HashMap<i64, u64> = HashMap::new();
            for r in &runs {
                *counts.entry(r.observables[step][o]).or_insert(0) += 1;
            }
            let vals: Vec<(Rational, u64)> = counts.into_iter().map(|(v, c)| (Rational::from_integer(v), c)).collect();
            summary.push((step, name.clone(), Estimate::from_counts(vals.iter().map(|(v, c)| (v, *c)))));
        }
    }
    let trajectories = record.then(|| runs.into_iter().map(|r| r.states).collect());
    Ok(Simulation {
        spec: spec.clone(),
        trajectories,
        summary,
    })
}

impl Simulation {
    /// Columns `trial,step,site,composition`.
    pub fn write_trajectories_csv<W: Write>(&self, out: W) -> Result<()> {
        let Some(trajs) = &self.trajectories else {
            return Err(Error::Precondition("trajectories were not recorded".into()));
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "step", "site", "composition"])?;
        for (trial, states) in trajs.iter().enumerate() {
            for (step, c) in states.iter().enumerate() {
                for (i, comp) in c.sites.iter().enumerate() {
                    w.write_record([trial.to_string(), step.to_string(), c.window.site(i).to_string(), comp.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `step,observable,mean,var_of_mean,stderr`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "observable", "mean", "var_of_mean", "stderr"])?;
        for (step, name, e) in &self.summary {
            w.write_record([step.to_string(), name.clone(), e.mean.to_string(), e.var_of_mean.to_string(), format!("{:.6e}", e.stderr)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::{DualityVariant, IdentityKind};
    use crate::evolve::{build_step_matrix, BoundarySpec};
    use crate::state::LatticeWindow;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn spec(n: usize, w: &LatticeWindow, q: &str, z: &str, dir: Direction, b: BoundarySpec) -> StepSpec {
        StepSpec::new(n, r(q), w.clone(), vec![r(z); w.len()], dir, b)
    }

    #[test]
    fn empty_forward_stays_empty() {
        let w = LatticeWindow::uniform(0, 2, 2).unwrap();
        let s = StepSampler::new(&spec(2, &w, "2", "1/2", Direction::Forward, BoundarySpec::FORWARD_EXIT)).unwrap();
        let empty = Configuration::empty(2, &w);
        for t in 0..50 {
            let out = s.sample_step(&empty, &mut trial_rng(1, t)).unwrap();
            assert_eq!(out.config, empty);
            assert_eq!((out.absorbed, out.exited), (None, None));
        }
    }

    #[test]
    fn negative_regime_is_rejected() {
        let w = LatticeWindow::uniform(0, 0, 1).unwrap();
        let err = StepSampler::new(&spec(1, &w, "1/2", "1/3", Direction::Forward, BoundarySpec::FORWARD_EXIT)).unwrap_err();
        assert!(matches!(err, Error::NegativeWeight { .. }), "{err}");
        let closed = BoundarySpec {
            left: crate::evolve::LeftBoundary::Closed,
            right: crate::evolve::RightBoundary::Closed,
        };
        assert!(StepSampler::new(&spec(1, &w, "2", "1/2", Direction::Forward, closed)).is_err());
    }

    #[test]
    fn stay_frequency_matches_exact_weight() {
        let w = LatticeWindow::uniform(0, 0, 1).unwrap();
        let st = spec(1, &w, "2", "1/2", Direction::Forward, BoundarySpec::FORWARD_EXIT);
        let sampler = StepSampler::new(&st).unwrap();
        let one = Configuration::with_particles(1, &w, &[(0, 1, 1)]).unwrap();
        let src = sampler.kernel().space.index(&one).unwrap();
        let counts = sample_counts(&sampler, src, 200_000, 7, Exec::default());
        let stay = counts.get(&(src, 0)).copied().unwrap_or(0);
        let exact = r("4/7");
        let vals = [(Rational::one(), stay), (Rational::zero(), 200_000 - stay)];
        let est = Estimate::from_counts(vals.iter().map(|(v, c)| (v, *c)));
        assert!(est.within(&exact, 4.0), "{} vs {exact}", est.mean.to_f64());
    }

    #[test]
    fn inject_adds_one_particle_or_absorbs() {
        let w = LatticeWindow::uniform(-3, -1, 1).unwrap();
        let st = spec(2, &w, "2", "1/2", Direction::Forward, BoundarySpec::FORWARD_EXIT)
            .inverted()
            .unwrap()
            .with(Direction::Reversed, BoundarySpec::REVERSED_INJECT);
        let s = StepSampler::new(&st).unwrap();
        let mut c = Configuration::empty(2, &w);
        let mut rng = trial_rng(3, 0);
        for _ in 0..40 {
            let before = c.species_counts();
            let out = s.sample_step(&c, &mut rng).unwrap();
            let after = out.config.species_counts();
            let added = u64::from(out.absorbed.is_none());
            assert_eq!(out.config.particle_count(), c.particle_count() + added);
            assert_eq!(after[2] + u64::from(out.absorbed == Some(2)), before[2] + 1);
            c = out.config;
        }
    }

    #[test]
    fn chi_square_small_windows() {
        let w = LatticeWindow::uniform(0, 2, 2).unwrap();
        let st = spec(2, &w, "2", "1/2", Direction::Forward, BoundarySpec::FORWARD_EXIT);
        let m = build_step_matrix(&st, Exec::default()).unwrap();
        let c = Configuration::with_particles(2, &w, &[(0, 1, 1), (0, 2, 1), (1, 2, 1)]).unwrap();
        let src = m.space.index(&c).unwrap();
        let res = chi_square_column(&m, src, 200_000, 11, Exec::default()).unwrap();
        assert!(res.passes(1e-4), "{res:?}");
        assert!(res.dof >= 3, "{res:?}");
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let w = LatticeWindow::uniform(0, 3, 1).unwrap();
        let sim = SimSpec {
            step: spec(1, &w, "2", "1/2", Direction::Forward, BoundarySpec::FORWARD_EXIT),
            steps: 5,
            trials: 20,
            seed: 42,
        };
        let init = Configuration::with_particles(1, &w, &[(0, 1, 1), (1, 1, 1)]).unwrap();
        let a = simulate(&sim, &init, true, Exec::Parallel).unwrap();
        let b = simulate(&sim, &init, true, Exec::Sequential).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.summary, b.summary);
        let mut buf = Vec::new();
        a.write_trajectories_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("trial,step,site,composition"));
        assert_eq!(text.lines().count(), 1 + 20 * 6 * 4);
    }

    #[test]
    fn duality_gap_empty_and_example() {
        let w = LatticeWindow::uniform(-1, 1, 1).unwrap();
        let zs = vec![r("1/2"); 3];
        let ch = IdentityChecker::new(IdentityKind::RemarkDfrak, DualityVariant::ExampleConsistent, 1, &r("2"), &w, &zs).unwrap();
        let empty = Configuration::empty(1, &w);
        let g = estimate_duality_gap(&ch, &empty, &empty, 100, 1, Exec::default()).unwrap();
        assert_eq!(g.lhs.mean, g.exact_lhs);
        assert_eq!(g.rhs.mean, g.exact_rhs);
        assert_eq!((g.lhs.stderr, g.rhs.stderr), (0.0, 0.0));

        let one = Configuration::with_particles(1, &w, &[(0, 1, 1)]).unwrap();
        let g = estimate_duality_gap(&ch, &one, &one, 100_000, 2, Exec::default()).unwrap();
        assert_eq!(g.exact_lhs, g.exact_rhs);
        assert!(g.brackets(4.0), "{g:?}");
        let small = estimate_duality_gap(&ch, &one, &one, 1000, 3, Exec::default()).unwrap();
        let ratio = small.lhs.stderr / g.lhs.stderr;
        assert!((7.0..=14.0).contains(&ratio), "{ratio}");
    }
}
