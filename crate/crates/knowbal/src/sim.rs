//! Ontic-level Monte Carlo engine and the exact epistemic branch evaluator.
//!
//! A *program* is a prepare step followed by transforms and measurements.
//! The epistemic evaluator branches over measurement outcomes with exact
//! rational probabilities (`|s ∩ o| / |s|`, uniformity over the ontic
//! base); the Monte Carlo evaluator samples a hidden ontic state per trial,
//! produces outcomes deterministically from it, and applies the sampled
//! measurement disturbance. Each trial draws from its own counter-derived
//! random stream, so runs are reproducible bit for bit and trials could be
//! executed in any order or in parallel.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::measurements::{Measurement, MeasurementAction, MeasureError};
use crate::ontic::{CellSet, EpistemicState, OnticError, OnticIndex, SystemShape};
use crate::transforms::{Permutation, TransformError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error(transparent)]
    Ontic(#[from] OnticError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Deterministic run parameters. The same config always yields the same
/// trial records.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub n_trials: usize,
    pub shape: SystemShape,
}

impl RunConfig {
    pub fn new(seed: u64, n_trials: usize, shape: SystemShape) -> Self {
        RunConfig {
            seed,
            n_trials,
            shape,
        }
    }

    /// Per-trial stream: the seed selects the generator, the trial index
    /// selects the stream.
    pub fn rng_for_trial(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// A transformation step; the relation-inverse form resolves per branch or
/// per trial against the outcome of an earlier relation measurement.
#[derive(Clone, Debug)]
pub enum TransformSpec {
    Fixed(Permutation),
    /// Apply the inverse of the relation permutation revealed by the named
    /// measurement, embedded at one subsystem.
    RelationInverse { measurement: String, system: usize },
}

/// One step of a program.
#[derive(Clone, Debug)]
pub enum Step {
    Prepare(EpistemicState),
    Transform(TransformSpec),
    Measure {
        m: Measurement,
        name: String,
        /// Relation permutations keyed by outcome index, when the
        /// measurement reveals a relation (enables `RelationInverse`).
        perms: Option<Vec<Permutation>>,
    },
}

/// A validated sequence of steps over a fixed shape.
#[derive(Clone, Debug)]
pub struct Program {
    pub shape: SystemShape,
    pub steps: Vec<Step>,
}

impl Program {
    pub fn validate(&self) -> Result<(), SimError> {
        let mut names: HashSet<&str> = HashSet::new();
        let mut relation_names: HashSet<&str> = HashSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Prepare(s) => {
                    if i != 0 {
                        return Err(SimError::InvalidProgram(
                            "prepare must be the first and only preparation".into(),
                        ));
                    }
                    if s.shape() != self.shape {
                        return Err(SimError::InvalidProgram(
                            "prepared state has the wrong shape".into(),
                        ));
                    }
                }
                Step::Transform(TransformSpec::Fixed(p)) => {
                    if p.shape() != self.shape {
                        return Err(SimError::InvalidProgram(
                            "transform has the wrong shape".into(),
                        ));
                    }
                }
                Step::Transform(TransformSpec::RelationInverse { measurement, system }) => {
                    if !relation_names.contains(measurement.as_str()) {
                        return Err(SimError::InvalidProgram(format!(
                            "relation inverse refers to '{measurement}', which is not an \
                             earlier relation measurement"
                        )));
                    }
                    if *system == 0 || *system > self.shape.n_systems() {
                        return Err(SimError::InvalidProgram(format!(
                            "system {system} out of range"
                        )));
                    }
                }
                Step::Measure { m, name, perms } => {
                    if m.shape() != self.shape {
                        return Err(SimError::InvalidProgram(
                            "measurement has the wrong shape".into(),
                        ));
                    }
                    if matches!(m.action(), MeasurementAction::Coarse) {
                        return Err(SimError::InvalidProgram(
                            "coarse measurements are not supported in programs".into(),
                        ));
                    }
                    if !names.insert(name) {
                        return Err(SimError::InvalidProgram(format!(
                            "duplicate measurement name '{name}'"
                        )));
                    }
                    if let Some(ps) = perms {
                        if ps.len() != m.outcomes().len() {
                            return Err(SimError::InvalidProgram(
                                "relation permutation list length mismatch".into(),
                            ));
                        }
                        relation_names.insert(name);
                    }
                }
            }
        }
        if !matches!(self.steps.first(), Some(Step::Prepare(_))) {
            return Err(SimError::InvalidProgram(
                "program must start with a preparation".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Exact rational arithmetic for branch probabilities.
// ---------------------------------------------------------------------------

/// A nonnegative rational, kept reduced. Sizes here never exceed the ontic
/// space cardinality, so `u64` never overflows.
#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Fraction {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den);
        Fraction {
            num: num / g,
            den: den / g,
        }
    }

    pub fn mul(self, other: Fraction) -> Fraction {
        Fraction::new(self.num * other.num, self.den * other.den)
    }

    pub fn add(self, other: Fraction) -> Fraction {
        Fraction::new(self.num * other.den + other.num * self.den, self.den * other.den)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn parts(self) -> (u64, u64) {
        (self.num, self.den)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl fmt::Debug for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

// ---------------------------------------------------------------------------
// Epistemic branch evaluation.
// ---------------------------------------------------------------------------

/// One leaf of the outcome tree: the tracked state, the exact probability
/// of reaching it, and the outcome bindings along the way.
#[derive(Clone, Debug)]
pub struct Branch {
    pub state: EpistemicState,
    pub prob: Fraction,
    pub outcomes: Vec<(String, usize)>,
}

impl Branch {
    pub fn outcome_of(&self, name: &str) -> Option<usize> {
        self.outcomes
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, k)| k)
    }
}

/// Evaluate a program exactly, branching over all measurement outcomes.
/// Branch probabilities sum to one.
pub fn epistemic_branches(program: &Program) -> Result<Vec<Branch>, SimError> {
    program.validate()?;
    let relations = relation_map(program);
    let mut branches: Vec<Branch> = Vec::new();
    for step in &program.steps {
        match step {
            Step::Prepare(s) => {
                branches = vec![Branch {
                    state: *s,
                    prob: Fraction::ONE,
                    outcomes: Vec::new(),
                }];
            }
            Step::Transform(spec) => {
                for b in &mut branches {
                    let p = resolve_transform(spec, b, program.shape, &relations)?;
                    b.state = p.apply_state(&b.state)?;
                }
            }
            Step::Measure { m, name, .. } => {
                let mut next = Vec::new();
                for b in &branches {
                    let total = b.state.size() as u64;
                    for (k, o) in m.outcomes().iter().enumerate() {
                        let common =
                            b.state.members().intersection(o.members()).len() as u64;
                        if common == 0 {
                            continue;
                        }
                        let mut nb = b.clone();
                        nb.prob = b.prob.mul(Fraction::new(common, total));
                        nb.state = m.epistemic_update(&b.state, k)?;
                        nb.outcomes.push((name.clone(), k));
                        next.push(nb);
                    }
                }
                branches = next;
            }
        }
    }
    debug_assert_eq!(
        branches
            .iter()
            .fold(Fraction::ZERO, |acc, b| acc.add(b.prob)),
        Fraction::ONE
    );
    Ok(branches)
}

/// Relation permutations of every relation measurement in a program,
/// keyed by name.
fn relation_map(program: &Program) -> std::collections::HashMap<String, Vec<Permutation>> {
    let mut map = std::collections::HashMap::new();
    for step in &program.steps {
        if let Step::Measure {
            name,
            perms: Some(ps),
            ..
        } = step
        {
            map.insert(name.clone(), ps.clone());
        }
    }
    map
}

fn resolve_transform(
    spec: &TransformSpec,
    branch: &Branch,
    shape: SystemShape,
    relations: &std::collections::HashMap<String, Vec<Permutation>>,
) -> Result<Permutation, SimError> {
    match spec {
        TransformSpec::Fixed(p) => Ok(p.clone()),
        TransformSpec::RelationInverse { measurement, system } => {
            let k = branch.outcome_of(measurement).ok_or_else(|| {
                SimError::InvalidProgram(format!("no outcome bound for '{measurement}'"))
            })?;
            let perm = relations
                .get(measurement)
                .and_then(|ps| ps.get(k))
                .ok_or_else(|| {
                    SimError::InvalidProgram(format!(
                        "'{measurement}' carries no relation permutations"
                    ))
                })?;
            Ok(perm.invert().embed_at(&[*system], shape)?)
        }
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo execution.
// ---------------------------------------------------------------------------

/// Per-measurement step of one trial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialStep {
    pub measurement: String,
    pub outcome: usize,
    pub post_ontic: u16,
}

/// The ontic trajectory and outcome log of one trial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial: u64,
    pub initial_ontic: u16,
    pub steps: Vec<TrialStep>,
}

/// Counts and exact expectations for one named measurement.
#[derive(Clone, Debug)]
pub struct MeasurementStats {
    pub name: String,
    pub counts: Vec<u64>,
    /// Exact probability of each outcome from epistemic tracking.
    pub expected: Vec<Fraction>,
    pub chi_square: f64,
}

/// Aggregated result of a Monte Carlo run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub n_trials: usize,
    pub stats: Vec<MeasurementStats>,
    pub records: Vec<TrialRecord>,
}

impl RunReport {
    pub fn stats_for(&self, name: &str) -> Option<&MeasurementStats> {
        self.stats.iter().find(|s| s.name == name)
    }
}

/// Sample uniformly from the ontic base of a state.
pub fn sample_ontic(s: &EpistemicState, rng: &mut impl Rng) -> OnticIndex {
    let k = rng.gen_range(0..s.size());
    OnticIndex(
        s.members()
            .iter()
            .nth(k)
            .expect("index within base size"),
    )
}

fn sample_cell(set: &CellSet, rng: &mut impl Rng) -> u16 {
    let k = rng.gen_range(0..set.len());
    set.iter().nth(k).expect("index within set size")
}

/// The measurement disturbance at the ontic level. For a two-block
/// measurement of a single subsystem, the unknown permutation is identity
/// or the outcome-pair swap with equal odds; for any other maximal
/// measurement the measured coordinates are redrawn uniformly from the
/// outcome block (a lawful randomizing set). Unmeasured coordinates never
/// change.
pub fn disturb(
    x: OnticIndex,
    m: &Measurement,
    outcome: usize,
    rng: &mut impl Rng,
) -> Result<OnticIndex, SimError> {
    let o = &m.outcomes()[outcome];
    if !o.members().contains(x.0) {
        return Err(SimError::InvalidProgram(
            "ontic state outside the outcome base".into(),
        ));
    }
    let shape = m.shape();
    match m.action() {
        MeasurementAction::FullMaximal => Ok(OnticIndex(sample_cell(o.members(), rng))),
        MeasurementAction::SubsystemMaximal { systems, blocks } => {
            let block = &blocks[outcome];
            if systems.len() == 1 && block.len() == 2 {
                // identity or the transposition of the outcome pair
                let pair: Vec<u16> = block.indices();
                let sys = systems[0];
                if rng.gen_bool(0.5) {
                    let mut coords = x.coords(shape);
                    let c = coords[sys - 1] - 1;
                    coords[sys - 1] = if c == pair[0] { pair[1] } else { pair[0] } + 1;
                    Ok(OnticIndex::from_coords(shape, &coords)?)
                } else {
                    Ok(x)
                }
            } else {
                let sub = sample_cell(block, rng);
                let small = SystemShape::new(systems.len()).unwrap();
                let sub_coords = OnticIndex(sub).coords(small);
                let mut coords = x.coords(shape);
                for (j, &s) in systems.iter().enumerate() {
                    coords[s - 1] = sub_coords[j];
                }
                Ok(OnticIndex::from_coords(shape, &coords)?)
            }
        }
        MeasurementAction::Coarse => Err(SimError::InvalidProgram(
            "coarse measurements are not supported in programs".into(),
        )),
    }
}

/// Run the program for `cfg.n_trials` trials. The frequency table carries
/// exact expected probabilities from epistemic tracking and a chi-square
/// statistic per measurement.
pub fn run_trials(program: &Program, cfg: &RunConfig) -> Result<RunReport, SimError> {
    program.validate()?;
    if program.shape != cfg.shape {
        return Err(SimError::InvalidProgram(
            "config shape disagrees with program shape".into(),
        ));
    }

    // exact expectations per (measurement, outcome)
    let branches = epistemic_branches(program)?;
    let mut names: Vec<(String, usize)> = Vec::new(); // (name, n_outcomes)
    for step in &program.steps {
        if let Step::Measure { m, name, .. } = step {
            names.push((name.clone(), m.outcomes().len()));
        }
    }
    let expected: Vec<Vec<Fraction>> = names
        .iter()
        .map(|(name, n_out)| {
            (0..*n_out)
                .map(|k| {
                    branches
                        .iter()
                        .filter(|b| b.outcome_of(name) == Some(k))
                        .fold(Fraction::ZERO, |acc, b| acc.add(b.prob))
                })
                .collect()
        })
        .collect();

    let relations = relation_map(program);
    let mut counts: Vec<Vec<u64>> = names.iter().map(|(_, n)| vec![0u64; *n]).collect();
    let mut records = Vec::with_capacity(cfg.n_trials);

    for trial in 0..cfg.n_trials as u64 {
        let mut rng = cfg.rng_for_trial(trial);
        let mut record = TrialRecord {
            trial,
            initial_ontic: 0,
            steps: Vec::new(),
        };
        let mut ontic = OnticIndex(0);
        let mut tracked: Option<EpistemicState> = None;
        let mut bound: Vec<(String, usize)> = Vec::new();
        let mut measure_idx = 0usize;

        for step in &program.steps {
            match step {
                Step::Prepare(s) => {
                    ontic = sample_ontic(s, &mut rng);
                    record.initial_ontic = ontic.0;
                    tracked = Some(*s);
                }
                Step::Transform(spec) => {
                    let branch = Branch {
                        state: tracked.expect("prepare precedes transforms"),
                        prob: Fraction::ONE,
                        outcomes: bound.clone(),
                    };
                    let p = resolve_transform(spec, &branch, program.shape, &relations)?;
                    ontic = OnticIndex(p.apply_index(ontic.0));
                    tracked = Some(p.apply_state(&branch.state)?);
                }
                Step::Measure { m, name, .. } => {
                    let state = tracked.expect("prepare precedes measurements");
                    let k = m.outcome_of(ontic.0);
                    ontic = disturb(ontic, m, k, &mut rng)?;
                    let updated = m.epistemic_update(&state, k)?;
                    debug_assert!(
                        updated.members().contains(ontic.0),
                        "ontic state must stay within the tracked epistemic state"
                    );
                    tracked = Some(updated);
                    bound.push((name.clone(), k));
                    counts[measure_idx][k] += 1;
                    measure_idx += 1;
                    record.steps.push(TrialStep {
                        measurement: name.clone(),
                        outcome: k,
                        post_ontic: ontic.0,
                    });
                }
            }
        }
        records.push(record);
    }

    let n = cfg.n_trials as f64;
    let stats = names
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let mut chi = 0.0;
            for (k, &c) in counts[i].iter().enumerate() {
                let p = expected[i][k].as_f64();
                if p > 0.0 {
                    let e = n * p;
                    chi += (c as f64 - e).powi(2) / e;
                }
            }
            MeasurementStats {
                name: name.clone(),
                counts: counts[i].clone(),
                expected: expected[i].clone(),
                chi_square: chi,
            }
        })
        .collect();

    Ok(RunReport {
        n_trials: cfg.n_trials,
        stats,
        records,
    })
}

/// Binomial three-sigma acceptance band around `n * p`; exact when the
/// probability is degenerate.
pub fn within_three_sigma(count: u64, n: usize, p: f64) -> bool {
    let n = n as f64;
    let mean = n * p;
    if p == 0.0 || p == 1.0 {
        return (count as f64 - mean).abs() < 0.5;
    }
    let sigma = (n * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::{bell_analogue, bell_permutations, Axis};
    use crate::validity::Catalog;

    fn shape(n: usize) -> SystemShape {
        SystemShape::new(n).unwrap()
    }

    fn st(n: usize, m: &[u16]) -> EpistemicState {
        EpistemicState::new(shape(n), m).unwrap()
    }

    fn cat(n: usize) -> Catalog {
        Catalog::enumerate(shape(n), true).unwrap()
    }

    #[test]
    fn sampling_is_uniform_and_supported() {
        let cfg = RunConfig::new(11, 10_000, shape(1));
        let s = st(1, &[0, 1]);
        let mut counts = [0u64; 4];
        for t in 0..cfg.n_trials as u64 {
            let mut rng = cfg.rng_for_trial(t);
            counts[sample_ontic(&s, &mut rng).0 as usize] += 1;
        }
        assert_eq!(counts[2] + counts[3], 0);
        assert!(within_three_sigma(counts[0], cfg.n_trials, 0.5));
        let single = st(1, &[2]);
        let mut rng = cfg.rng_for_trial(0);
        assert_eq!(sample_ontic(&single, &mut rng).0, 2);
    }

    #[test]
    fn interference_program_distributions() {
        let c1 = cat(1);
        let x = Axis::X.partition(&c1);
        let program = |prep: EpistemicState| Program {
            shape: shape(1),
            steps: vec![
                Step::Prepare(prep),
                Step::Measure {
                    m: x.clone(),
                    name: "r".into(),
                    perms: None,
                },
            ],
        };
        // prepare 1v3: outcome distribution exactly (1, 0)
        let branches = epistemic_branches(&program(st(1, &[0, 2]))).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].prob, Fraction::ONE);
        assert_eq!(branches[0].outcomes[0].1, 0);
        // prepare 1v2: (1/2, 1/2)
        let branches = epistemic_branches(&program(st(1, &[0, 1]))).unwrap();
        assert_eq!(branches.len(), 2);
        for b in branches {
            assert_eq!(b.prob, Fraction::new(1, 2));
        }

        // Monte Carlo agrees within three sigma
        let cfg = RunConfig::new(7, 10_000, shape(1));
        let report = run_trials(&program(st(1, &[0, 1])), &cfg).unwrap();
        let stats = report.stats_for("r").unwrap();
        assert!(within_three_sigma(stats.counts[0], cfg.n_trials, 0.5));
        let report = run_trials(&program(st(1, &[0, 2])), &cfg).unwrap();
        let stats = report.stats_for("r").unwrap();
        assert_eq!(stats.counts, vec![10_000, 0]);
    }

    #[test]
    fn repeat_measurement_is_reproducible() {
        let c1 = cat(1);
        let x = Axis::X.partition(&c1);
        let program = Program {
            shape: shape(1),
            steps: vec![
                Step::Prepare(st(1, &[0, 1])),
                Step::Measure {
                    m: x.clone(),
                    name: "first".into(),
                    perms: None,
                },
                Step::Measure {
                    m: x,
                    name: "second".into(),
                    perms: None,
                },
            ],
        };
        let cfg = RunConfig::new(3, 2_000, shape(1));
        let report = run_trials(&program, &cfg).unwrap();
        for rec in &report.records {
            assert_eq!(rec.steps[0].outcome, rec.steps[1].outcome);
        }
    }

    #[test]
    fn local_measurement_never_touches_the_other_system() {
        let c1 = cat(1);
        let sh2 = shape(2);
        let z_on_a = Axis::Z.partition(&c1).on_subsystems(&[1], sh2).unwrap();
        let x_on_a = Axis::X.partition(&c1).on_subsystems(&[1], sh2).unwrap();
        let program = Program {
            shape: sh2,
            steps: vec![
                Step::Prepare(st(2, &[0, 5, 10, 15])),
                Step::Measure {
                    m: z_on_a,
                    name: "za".into(),
                    perms: None,
                },
                Step::Measure {
                    m: x_on_a,
                    name: "xa".into(),
                    perms: None,
                },
            ],
        };
        let cfg = RunConfig::new(5, 3_000, sh2);
        let report = run_trials(&program, &cfg).unwrap();
        for rec in &report.records {
            let b0 = rec.initial_ontic & 0b11;
            for step in &rec.steps {
                assert_eq!(step.post_ontic & 0b11, b0);
            }
        }
    }

    #[test]
    fn identical_config_reproduces_records() {
        let c2 = cat(2);
        let bell = bell_analogue(&c2);
        let program = Program {
            shape: shape(2),
            steps: vec![
                Step::Prepare(EpistemicState::fully_mixed(shape(2))),
                Step::Measure {
                    m: bell,
                    name: "rel".into(),
                    perms: Some(bell_permutations().to_vec()),
                },
            ],
        };
        let cfg = RunConfig::new(42, 500, shape(2));
        let a = run_trials(&program, &cfg).unwrap();
        let b = run_trials(&program, &cfg).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn program_validation_errors() {
        let c1 = cat(1);
        let z = Axis::Z.partition(&c1);
        let no_prepare = Program {
            shape: shape(1),
            steps: vec![Step::Measure {
                m: z.clone(),
                name: "r".into(),
                perms: None,
            }],
        };
        assert!(no_prepare.validate().is_err());
        let dup = Program {
            shape: shape(1),
            steps: vec![
                Step::Prepare(st(1, &[0, 1])),
                Step::Measure {
                    m: z.clone(),
                    name: "r".into(),
                    perms: None,
                },
                Step::Measure {
                    m: z,
                    name: "r".into(),
                    perms: None,
                },
            ],
        };
        assert!(dup.validate().is_err());
    }

    #[test]
    fn fraction_arithmetic() {
        let half = Fraction::new(2, 4);
        assert_eq!(half, Fraction::new(1, 2));
        assert_eq!(half.add(half), Fraction::ONE);
        assert_eq!(half.mul(half), Fraction::new(1, 4));
        assert_eq!(half.to_string(), "1/2");
    }
}
