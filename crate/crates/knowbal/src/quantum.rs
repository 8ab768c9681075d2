//! Minimal complex state-vector reference for at most three qubits.
//!
//! This is deliberately not a general simulator: it carries exactly the
//! states and bases needed to audit the correspondence between the toy
//! theory and qubit quantum mechanics — the six single-qubit states
//! `|0>, |1>, |+>, |->, |+i>, |-i>`, the maximally mixed qubit, the Bell
//! states, and a GHZ state. All quantities here are exact algebraic
//! numbers; double precision with a `1e-12` tolerance is far beyond
//! sufficient.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::ontic::{CoherentOp, EpistemicState};

pub const TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("amplitude vector length {0} is not a power of two in 2..=8")]
    BadDimension(usize),
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("dimension mismatch: {0} vs {1} qubits")]
    DimensionMismatch(usize, usize),
    #[error("superposition requires orthogonal states (|<a|b>| = {0})")]
    NotOrthogonal(f64),
    #[error("the analogy map covers single elementary systems only")]
    NotSingleSystem,
    #[error("state {0} has no quantum analogue (not a valid epistemic state)")]
    NoAnalogue(String),
}

/// A pure state of `n <= 3` qubits.
#[derive(Clone)]
pub struct QuantumState {
    amps: Vec<Complex64>,
}

impl QuantumState {
    pub fn new(amps: Vec<Complex64>) -> Result<Self, QuantumError> {
        let len = amps.len();
        if !(2..=8).contains(&len) || !len.is_power_of_two() {
            return Err(QuantumError::BadDimension(len));
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > TOL {
            return Err(QuantumError::NotNormalized(norm_sq));
        }
        Ok(QuantumState { amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn inner(&self, other: &QuantumState) -> Result<Complex64, QuantumError> {
        if self.amps.len() != other.amps.len() {
            return Err(QuantumError::DimensionMismatch(
                self.n_qubits(),
                other.n_qubits(),
            ));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64, QuantumError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn tensor(&self, other: &QuantumState) -> QuantumState {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        QuantumState { amps }
    }

    /// Equality modulo a global phase, by normalizing the phase of the
    /// first nonzero amplitude.
    pub fn eq_up_to_phase(&self, other: &QuantumState) -> bool {
        if self.amps.len() != other.amps.len() {
            return false;
        }
        let lead = |s: &QuantumState| s.amps.iter().find(|a| a.norm() > TOL).copied();
        let (Some(a), Some(b)) = (lead(self), lead(other)) else {
            return false;
        };
        let phase = (a / a.norm()) / (b / b.norm());
        self.amps
            .iter()
            .zip(&other.amps)
            .all(|(x, y)| (x - y * phase).norm() <= TOL)
    }
}

impl fmt::Debug for QuantumState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QuantumState[")?;
        for (i, a) in self.amps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.3}{:+.3}i", a.re, a.im)?;
        }
        write!(f, "]")
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn ket0() -> QuantumState {
    QuantumState::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap()
}

pub fn ket1() -> QuantumState {
    QuantumState::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap()
}

pub fn ket_plus() -> QuantumState {
    let r = 0.5f64.sqrt();
    QuantumState::new(vec![c(r, 0.0), c(r, 0.0)]).unwrap()
}

pub fn ket_minus() -> QuantumState {
    let r = 0.5f64.sqrt();
    QuantumState::new(vec![c(r, 0.0), c(-r, 0.0)]).unwrap()
}

pub fn ket_plus_i() -> QuantumState {
    let r = 0.5f64.sqrt();
    QuantumState::new(vec![c(r, 0.0), c(0.0, r)]).unwrap()
}

pub fn ket_minus_i() -> QuantumState {
    let r = 0.5f64.sqrt();
    QuantumState::new(vec![c(r, 0.0), c(0.0, -r)]).unwrap()
}

/// The four Bell states in the order `Phi+, Phi-, Psi+, Psi-`.
pub fn bell_states() -> [QuantumState; 4] {
    let r = 0.5f64.sqrt();
    let z = c(0.0, 0.0);
    [
        QuantumState::new(vec![c(r, 0.0), z, z, c(r, 0.0)]).unwrap(),
        QuantumState::new(vec![c(r, 0.0), z, z, c(-r, 0.0)]).unwrap(),
        QuantumState::new(vec![z, c(r, 0.0), c(r, 0.0), z]).unwrap(),
        QuantumState::new(vec![z, c(r, 0.0), c(-r, 0.0), z]).unwrap(),
    ]
}

pub fn ghz() -> QuantumState {
    let r = 0.5f64.sqrt();
    let mut amps = vec![c(0.0, 0.0); 8];
    amps[0] = c(r, 0.0);
    amps[7] = c(r, 0.0);
    QuantumState::new(amps).unwrap()
}

/// A single-system analogue: a pure ket or the maximally mixed qubit.
#[derive(Clone, Debug)]
pub enum AnalogState {
    Pure(QuantumState),
    MaximallyMixed,
}

/// The toy pure states in analogy order, paired with their kets:
/// `1v2 <-> |0>`, `3v4 <-> |1>`, `1v3 <-> |+>`, `2v4 <-> |->`,
/// `2v3 <-> |+i>`, `1v4 <-> |-i>`. The choice is a convention, fixed here
/// once for the whole crate.
pub fn analogy_pairs() -> Vec<(EpistemicState, QuantumState)> {
    let shape = crate::ontic::SystemShape::new(1).unwrap();
    let st = |m: &[u16]| EpistemicState::new(shape, m).unwrap();
    vec![
        (st(&[0, 1]), ket0()),
        (st(&[2, 3]), ket1()),
        (st(&[0, 2]), ket_plus()),
        (st(&[1, 3]), ket_minus()),
        (st(&[1, 2]), ket_plus_i()),
        (st(&[0, 3]), ket_minus_i()),
    ]
}

/// Map a valid single-system epistemic state through the analogy.
pub fn analog_state(s: &EpistemicState) -> Result<AnalogState, QuantumError> {
    if s.shape().n_systems() != 1 {
        return Err(QuantumError::NotSingleSystem);
    }
    if s.size() == 4 {
        return Ok(AnalogState::MaximallyMixed);
    }
    analogy_pairs()
        .into_iter()
        .find(|(toy, _)| toy == s)
        .map(|(_, ket)| AnalogState::Pure(ket))
        .ok_or_else(|| QuantumError::NoAnalogue(s.to_string()))
}

/// Quantum fidelity `(Tr sqrt(rho) sqrt(sigma))` specialised to the cases
/// the analogy needs: two pure states, a pure state against `I/2`, or `I/2`
/// against itself.
pub fn quantum_fidelity(a: &AnalogState, b: &AnalogState) -> Result<f64, QuantumError> {
    match (a, b) {
        (AnalogState::Pure(x), AnalogState::Pure(y)) => x.fidelity(y),
        (AnalogState::Pure(_), AnalogState::MaximallyMixed)
        | (AnalogState::MaximallyMixed, AnalogState::Pure(_)) => Ok(0.5f64.sqrt()),
        (AnalogState::MaximallyMixed, AnalogState::MaximallyMixed) => Ok(1.0),
    }
}

/// Relative phase carried by each coherent operation:
/// `+1 -> 0`, `+2 -> pi`, `+3 -> pi/2`, `+4 -> 3pi/2`.
pub fn analog_phase(op: CoherentOp) -> f64 {
    use std::f64::consts::PI;
    match op {
        CoherentOp::LowLow => 0.0,
        CoherentOp::HighHigh => PI,
        CoherentOp::HighLow => PI / 2.0,
        CoherentOp::LowHigh => 3.0 * PI / 2.0,
    }
}

/// Equal-weight superposition `(a + e^{i phase} b) / sqrt(2)` of two
/// orthogonal pure states.
pub fn superpose(
    a: &QuantumState,
    b: &QuantumState,
    phase: f64,
) -> Result<QuantumState, QuantumError> {
    let overlap = a.inner(b)?.norm();
    if overlap > TOL {
        return Err(QuantumError::NotOrthogonal(overlap));
    }
    let w = c(0.0, phase).exp() * 0.5f64.sqrt();
    let amps = a
        .amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| x * 0.5f64.sqrt() + y * w)
        .collect();
    QuantumState::new(amps)
}

/// One row of the coherent-operation audit.
#[derive(Clone, Debug)]
pub struct AuditRow {
    pub lhs: (EpistemicState, EpistemicState),
    pub op: CoherentOp,
    pub toy_result: EpistemicState,
    pub quantum_result: QuantumState,
    pub expected_ket: QuantumState,
    pub matches: bool,
}

/// Check all twelve coherent-operation identities against the quantum
/// superpositions they are meant to mirror. The toy identities on the pair
/// `{1v3, 2v4}` with the quarter-turn phases come out swapped relative to
/// quantum mechanics, and no relabeling of the analogy can repair this; the
/// audit records exactly which rows disagree.
pub fn analogy_audit() -> Vec<AuditRow> {
    let shape = crate::ontic::SystemShape::new(1).unwrap();
    let st = |m: &[u16]| EpistemicState::new(shape, m).unwrap();
    let pairs = [
        (st(&[0, 1]), st(&[2, 3])),
        (st(&[0, 2]), st(&[1, 3])),
        (st(&[1, 2]), st(&[0, 3])),
    ];
    let ket_of = |s: &EpistemicState| match analog_state(s).unwrap() {
        AnalogState::Pure(k) => k,
        AnalogState::MaximallyMixed => unreachable!("audit uses pure states"),
    };
    let mut rows = Vec::new();
    for (a, b) in pairs {
        for op in CoherentOp::ALL {
            let toy_result = a.coherent_combine(&b, op).unwrap();
            let quantum_result =
                superpose(&ket_of(&a), &ket_of(&b), analog_phase(op)).unwrap();
            let expected_ket = ket_of(&toy_result);
            let matches = quantum_result.eq_up_to_phase(&expected_ket);
            rows.push(AuditRow {
                lhs: (a, b),
                op,
                toy_result,
                quantum_result,
                expected_ket,
                matches,
            });
        }
    }
    rows
}

/// Fixed Bloch-axis convention for the six pure single-system states:
/// `1v2 -> +z`, `3v4 -> -z`, `1v3 -> +x`, `2v4 -> -x`, `2v3 -> +y`,
/// `1v4 -> -y`. Returns `None` for anything else.
pub fn bloch_of_pure(s: &EpistemicState) -> Option<[i32; 3]> {
    if s.shape().n_systems() != 1 {
        return None;
    }
    match s.members().indices().as_slice() {
        [0, 1] => Some([0, 0, 1]),
        [2, 3] => Some([0, 0, -1]),
        [0, 2] => Some([1, 0, 0]),
        [1, 3] => Some([-1, 0, 0]),
        [1, 2] => Some([0, 1, 0]),
        [0, 3] => Some([0, -1, 0]),
        _ => None,
    }
}

/// A correlation/anti-correlation table: rows of preparations against
/// columns of same-on-both-sides measurements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelationTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// `'C'` for correlated, `'A'` for anti-correlated.
    pub cells: Vec<Vec<char>>,
}

impl CorrelationTable {
    /// Number of `'A'` entries per row.
    pub fn row_anti_counts(&self) -> Vec<usize> {
        self.cells
            .iter()
            .map(|r| r.iter().filter(|&&c| c == 'A').count())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("state");
        for c in &self.col_labels {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",anti_parity\n");
        for (label, row) in self.row_labels.iter().zip(&self.cells) {
            out.push_str(label);
            for &c in row {
                out.push(',');
                out.push(c);
            }
            let anti = row.iter().filter(|&&c| c == 'A').count();
            out.push(',');
            out.push_str(if anti % 2 == 0 { "even" } else { "odd" });
            out.push('\n');
        }
        out
    }
}

/// Correlations of the four Bell states under the three same-basis local
/// measurements (`z`, `x`, `y` on both qubits). Each entry is exact: the
/// cross-outcome probability is 0 or 1 up to `1e-12`.
pub fn bell_table() -> CorrelationTable {
    let bases: [(&str, [QuantumState; 2]); 3] = [
        ("z", [ket0(), ket1()]),
        ("x", [ket_plus(), ket_minus()]),
        ("y", [ket_plus_i(), ket_minus_i()]),
    ];
    let bells = bell_states();
    let bell_names = ["Phi+", "Phi-", "Psi+", "Psi-"];
    let mut cells = Vec::new();
    for bell in &bells {
        let mut row = Vec::new();
        for (_, basis) in &bases {
            let mut same = 0.0;
            let mut diff = 0.0;
            for (i, u) in basis.iter().enumerate() {
                for (j, v) in basis.iter().enumerate() {
                    let p = u.tensor(v).fidelity(bell).unwrap();
                    if i == j {
                        same += p;
                    } else {
                        diff += p;
                    }
                }
            }
            let entry = if (same - 1.0).abs() <= TOL && diff.abs() <= TOL {
                'C'
            } else if (diff - 1.0).abs() <= TOL && same.abs() <= TOL {
                'A'
            } else {
                panic!("Bell correlations must be sharp, got same={same} diff={diff}");
            };
            row.push(entry);
        }
        cells.push(row);
    }
    CorrelationTable {
        row_labels: bell_names.iter().map(|s| s.to_string()).collect(),
        col_labels: bases.iter().map(|(n, _)| n.to_string()).collect(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontic::SystemShape;

    fn st(m: &[u16]) -> EpistemicState {
        EpistemicState::new(SystemShape::new(1).unwrap(), m).unwrap()
    }

    #[test]
    fn analog_state_examples() {
        assert!(matches!(
            analog_state(&st(&[0, 1])).unwrap(),
            AnalogState::Pure(k) if k.eq_up_to_phase(&ket0())
        ));
        assert!(matches!(
            analog_state(&st(&[1, 2])).unwrap(),
            AnalogState::Pure(k) if k.eq_up_to_phase(&ket_plus_i())
        ));
        assert!(matches!(
            analog_state(&EpistemicState::fully_mixed(SystemShape::new(1).unwrap())).unwrap(),
            AnalogState::MaximallyMixed
        ));
        assert!(analog_state(&st(&[0, 1, 2])).is_err());
    }

    #[test]
    fn fidelity_examples() {
        assert!((ket0().fidelity(&ket_plus()).unwrap() - 0.5).abs() < TOL);
        assert!((ket0().fidelity(&ket1()).unwrap()).abs() < TOL);
        assert!((ket0().fidelity(&ket0()).unwrap() - 1.0).abs() < TOL);
        let mixed = AnalogState::MaximallyMixed;
        let pure = AnalogState::Pure(ket0());
        assert!((quantum_fidelity(&pure, &mixed).unwrap() - 0.5f64.sqrt()).abs() < TOL);
        assert!((quantum_fidelity(&mixed, &mixed).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn superpose_identities() {
        // (|0> + |1>)/sqrt2 = |+>
        let s = superpose(&ket0(), &ket1(), 0.0).unwrap();
        assert!(s.eq_up_to_phase(&ket_plus()));
        // (|+> + i|->)/sqrt2 = e^{i pi/4}|-i>
        let s = superpose(&ket_plus(), &ket_minus(), std::f64::consts::PI / 2.0).unwrap();
        assert!(s.eq_up_to_phase(&ket_minus_i()));
        // (|+i> - i|-i>)/sqrt2 = e^{-i pi/4}|->
        let s = superpose(
            &ket_plus_i(),
            &ket_minus_i(),
            3.0 * std::f64::consts::PI / 2.0,
        )
        .unwrap();
        assert!(s.eq_up_to_phase(&ket_minus()));
        assert!(superpose(&ket0(), &ket_plus(), 0.0).is_err());
    }

    #[test]
    fn audit_finds_exactly_the_quarter_turn_mismatches() {
        let rows = analogy_audit();
        assert_eq!(rows.len(), 12);
        let mismatches: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.matches)
            .map(|(i, _)| i)
            .collect();
        // rows 6 and 7 are the +3/+4 operations on {1v3, 2v4}
        assert_eq!(mismatches, vec![6, 7]);
        assert_eq!(rows[6].op, CoherentOp::HighLow);
        assert_eq!(rows[6].lhs.0, st(&[0, 2]));
    }

    #[test]
    fn bell_table_is_odd_parity() {
        let t = bell_table();
        let want = [
            ['C', 'C', 'A'],
            ['C', 'A', 'C'],
            ['A', 'C', 'C'],
            ['A', 'A', 'A'],
        ];
        for (row, w) in t.cells.iter().zip(want.iter()) {
            assert_eq!(row.as_slice(), w.as_slice());
        }
        assert!(t.row_anti_counts().iter().all(|c| c % 2 == 1));
    }

    #[test]
    fn bloch_convention_matches_expectation_values() {
        // cross-check the integer table against <sigma> computed from amplitudes
        for (toy, ket) in analogy_pairs() {
            let [x, y, z] = bloch_of_pure(&toy).unwrap();
            let a = ket.amplitudes();
            let ex = 2.0 * (a[0].conj() * a[1]).re;
            let ey = 2.0 * (a[0].conj() * a[1]).im;
            let ez = a[0].norm_sqr() - a[1].norm_sqr();
            assert!((ex - x as f64).abs() < TOL, "{toy}");
            assert!((ey - y as f64).abs() < TOL, "{toy}");
            assert!((ez - z as f64).abs() < TOL, "{toy}");
        }
    }

    #[test]
    fn classical_equals_quantum_fidelity_under_analogy() {
        // all 21 unordered pairs of the 7 valid single-system states
        let mut states: Vec<EpistemicState> =
            analogy_pairs().into_iter().map(|(s, _)| s).collect();
        states.push(EpistemicState::fully_mixed(SystemShape::new(1).unwrap()));
        for i in 0..states.len() {
            for j in i..states.len() {
                let classical = states[i].fidelity(&states[j]).unwrap();
                let qa = analog_state(&states[i]).unwrap();
                let qb = analog_state(&states[j]).unwrap();
                let quantum = quantum_fidelity(&qa, &qb).unwrap();
                assert!(
                    (classical - quantum).abs() < TOL,
                    "{} vs {}: {classical} != {quantum}",
                    states[i],
                    states[j]
                );
            }
        }
    }
}
