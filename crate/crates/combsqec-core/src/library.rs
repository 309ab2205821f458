//! Built-in instances.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::conditions::{compose_all, Verdict};
use crate::exec::Executor;
use crate::error::Result;
use crate::model::{CheckInstrument, Limits, CodeSpace, ErrorModel, ErrorRound, Interrogator, Round, StrategicCode};
use crate::random::{ginibre, orthonormalize_columns, random_channel, random_subchannel, random_unitary, rng, SeededRng};
use crate::tensor::{eye, kron, CMat, C64, ONE, ZERO};

/// Separator between per-round outcome labels in stored memory strings.
pub const MEMORY_SEP: &str = ";";

#[derive(Clone, Debug, PartialEq)]
pub struct NamedInstance {
    pub name: String,
    pub code: StrategicCode,
    pub errors: ErrorModel,
    /// `None` for random instances, whose verdict is whatever the checkers say.
    pub expected: Option<Verdict>,
    pub provenance: String,
}

pub fn pauli(c: char) -> CMat {
    let i = C64::new(0.0, 1.0);
    match c {
        'X' => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        'Y' => CMat::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        'Z' => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => eye(2),
    }
}

/// Tensor product of single-qubit Paulis, qubit 1 leftmost (most significant).
pub fn pauli_string(s: &str) -> CMat {
    s.chars().fold(CMat::identity(1, 1), |acc, c| kron(&acc, &pauli(c)))
}

/// Pauli string with `p` on the listed 1-based qubits and I elsewhere.
pub fn pauli_on(n: usize, p: char, qubits: &[usize]) -> CMat {
    let s: String = (1..=n).map(|q| if qubits.contains(&q) { p } else { 'I' }).collect();
    pauli_string(&s)
}

fn sign_label(signs: &[i8]) -> String {
    let parts: Vec<String> = signs.iter().map(|s| if *s > 0 { "+1".into() } else { "-1".into() }).collect();
    format!("({})", parts.join(","))
}

/// Projective instrument measuring commuting two-qubit parities; outcomes
/// in lexicographic order with +1 before −1.
pub fn parity_instrument(n: usize, p: char, pairs: &[(usize, usize)]) -> Result<CheckInstrument> {
    let d = 1usize << n;
    let count = 1usize << pairs.len();
    let mut outcomes = Vec::with_capacity(count);
    for bits in 0..count {
        let signs: Vec<i8> = (0..pairs.len())
            .map(|k| if (bits >> (pairs.len() - 1 - k)) & 1 == 0 { 1 } else { -1 })
            .collect();
        let mut proj = eye(d);
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let s = pauli_on(n, p, &[a, b]);
            let half = (eye(d) + s.map(|z| z * f64::from(signs[k]))).map(|z| z * 0.5);
            proj = proj * half;
        }
        outcomes.push((sign_label(&signs), proj));
    }
    CheckInstrument::new(outcomes)
}

/// Interrogator whose every round stores its outcome, joined by [`MEMORY_SEP`].
pub fn storing_interrogator(instruments: Vec<CheckInstrument>) -> Interrogator {
    let mut states = vec![String::new()];
    let mut rounds = Vec::with_capacity(instruments.len());
    for inst in instruments {
        let round = Round::storing(&states, inst, MEMORY_SEP);
        let mut next: Vec<String> = round.update.values().cloned().collect();
        next.sort();
        next.dedup();
        states = next;
        rounds.push(round);
    }
    Interrogator { initial_memory: String::new(), rounds }
}

fn basis_state(d: usize, x: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    v[x] = ONE;
    v
}

fn repetition_codespace() -> Result<CodeSpace> {
    CodeSpace::from_vectors(&[basis_state(8, 0), basis_state(8, 7)])
}

/// Three-qubit repetition code against single bit flips, with no checks.
pub fn bitflip_code() -> Result<NamedInstance> {
    let kraus = ["III", "XII", "IXI", "IIX"].iter().map(|s| pauli_string(s).map(|z| z * 0.5)).collect();
    Ok(NamedInstance {
        name: "bitflip".into(),
        code: StrategicCode::new(repetition_codespace()?, Interrogator::trivial())?,
        errors: ErrorModel::new(vec![ErrorRound::simple(kraus)?])?,
        expected: Some(Verdict::Correctable),
        provenance: "codespace span{|000>, |111>}, no check rounds, errors {I, X1, X2, X3} with weight 1/4 each".into(),
    })
}

/// The repetition code against a phase flip on qubit 1.
pub fn bitflip_z_variant() -> Result<NamedInstance> {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let kraus = ["III", "ZII"].iter().map(|s| pauli_string(s).map(|z| z * h)).collect();
    Ok(NamedInstance {
        name: "bitflip-z".into(),
        code: StrategicCode::new(repetition_codespace()?, Interrogator::trivial())?,
        errors: ErrorModel::new(vec![ErrorRound::simple(kraus)?])?,
        expected: Some(Verdict::NotCorrectable),
        provenance: "codespace span{|000>, |111>}, no check rounds, errors {I, Z1} with weight 1/2 each".into(),
    })
}

pub const HEXAGON_XX: [(usize, usize); 3] = [(1, 2), (3, 4), (5, 6)];
pub const HEXAGON_YY: [(usize, usize); 3] = [(2, 3), (4, 5), (6, 1)];

/// Orthonormal basis of the joint +1 eigenspace of X1X2, X3X4, X5X6 and
/// Z⊗6, truncated to its first `k` vectors, by Gram–Schmidt over projected
/// computational basis states in index order.
pub fn hexagon_codespace(k: usize) -> Result<CodeSpace> {
    let d = 64;
    let mut proj = eye(d);
    let mut stabilizers: Vec<CMat> = HEXAGON_XX.iter().map(|&(a, b)| pauli_on(6, 'X', &[a, b])).collect();
    stabilizers.push(pauli_string("ZZZZZZ"));
    for s in &stabilizers {
        proj = proj * (eye(d) + s).map(|z| z * 0.5);
    }
    let mut chosen: Vec<Vec<C64>> = Vec::new();
    for x in 0..d {
        if chosen.len() == k {
            break;
        }
        let mut v: Vec<C64> = proj.column(x).iter().copied().collect();
        for _ in 0..2 {
            for c in &chosen {
                let ov: C64 = c.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(c.iter()).for_each(|(y, a)| *y -= ov * a);
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|z| *z /= n);
            chosen.push(v);
        }
    }
    CodeSpace::from_vectors(&chosen)
}

/// One hexagon plaquette measured in an XX round then a YY round, memory
/// storing both outcomes, against Z errors on qubit 1 or qubit 2 before the
/// first round.
pub fn hexagon_honeycomb() -> Result<NamedInstance> {
    let r1 = parity_instrument(6, 'X', &HEXAGON_XX)?;
    let r2 = parity_instrument(6, 'Y', &HEXAGON_YY)?;
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let errors = ErrorModel::new(vec![
        ErrorRound::simple(vec![pauli_on(6, 'Z', &[1]).map(|z| z * h), pauli_on(6, 'Z', &[2]).map(|z| z * h)])?,
        ErrorRound::simple(vec![eye(64)])?,
        ErrorRound::simple(vec![eye(64)])?,
    ])?;
    Ok(NamedInstance {
        name: "hexagon".into(),
        code: StrategicCode::new(hexagon_codespace(2)?, storing_interrogator(vec![r1, r2]))?,
        errors,
        expected: Some(Verdict::Correctable),
        provenance: "qubits 1..6 around the plaquette; round 1 measures X1X2, X3X4, X5X6, round 2 measures Y2Y3, Y4Y5, Y6Y1; \
codespace = first two Gram-Schmidt vectors of the projected computational basis inside the +1 space of X1X2, X3X4, X5X6, Z^6; \
round-0 errors Z1/sqrt2 and Z2/sqrt2, identity afterwards"
            .into(),
    })
}

/// Outcome-sign flips caused by one error, relative to the error-free run.
#[derive(Clone, Debug, PartialEq)]
pub struct FlipRow {
    pub error: String,
    /// Outcome sequences with nonzero weight under this error.
    pub support: Vec<Vec<String>>,
    /// Per-round sign pattern f with K_{e, f⊙o} = E_e K_{0,o} for every
    /// error-free branch o, when one exists.
    pub flip: Option<Vec<Vec<i8>>>,
    /// max over o of ‖K_{e, f⊙o} − E_e K_{0,o}‖ for the reported flip.
    pub residual: f64,
}

/// Branch operators below this norm count as outside the support.
pub const SUPPORT_TOL: f64 = 1e-9;

pub fn parse_signs(label: &str) -> Option<Vec<i8>> {
    let inner = label.strip_prefix('(')?.strip_suffix(')')?;
    inner
        .split(',')
        .map(|t| match t {
            "+1" => Some(1),
            "-1" => Some(-1),
            _ => None,
        })
        .collect()
}

fn apply_flip(seq: &[Vec<i8>], f: &[Vec<i8>]) -> Vec<String> {
    seq.iter().zip(f).map(|(x, y)| sign_label(&x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>())).collect()
}

/// Flip table of the hexagon instance for each round-0 error.
pub fn hexagon_flip_table<X: Executor>(limits: &Limits, exec: &X) -> Result<Vec<FlipRow>> {
    let inst = hexagon_honeycomb()?;
    let mut clean = inst.errors.clone();
    clean.rounds[0] = ErrorRound::simple(vec![eye(64)])?;
    let noisy = compose_all(&inst.code, &inst.errors, limits, exec)?;
    let reference = compose_all(&inst.code, &clean, limits, exec)?;
    let branches = |c: &crate::conditions::Composed, e: usize| -> Vec<(Vec<String>, CMat)> {
        let mut v: Vec<(Vec<String>, CMat)> = c
            .blocks
            .iter()
            .flat_map(|b| b.branches.iter())
            .map(|br| (br.trajectory.labels.clone(), br.kraus[e].clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    let clean_branches: Vec<(Vec<Vec<i8>>, CMat)> = branches(&reference, 0)
        .into_iter()
        .filter(|(_, k)| k.norm() > SUPPORT_TOL)
        .filter_map(|(l, k)| l.iter().map(|x| parse_signs(x)).collect::<Option<Vec<_>>>().map(|s| (s, k)))
        .collect();
    let width: Vec<usize> = clean_branches.first().map(|(s, _)| s.iter().map(Vec::len).collect()).unwrap_or_default();
    let bits: usize = width.iter().sum();
    let mut rows = Vec::new();
    for (e, name) in ["Z1", "Z2"].iter().enumerate() {
        let all = branches(&noisy, e);
        let support: Vec<Vec<String>> =
            all.iter().filter(|(_, k)| k.norm() > SUPPORT_TOL).map(|(l, _)| l.clone()).collect();
        let err = &inst.errors.rounds[0].kraus[e];
        let mut found: Option<(Vec<Vec<i8>>, f64)> = None;
        for mask in 0..(1usize << bits) {
            let mut f = Vec::with_capacity(width.len());
            let mut pos = 0;
            for &w in &width {
                f.push((0..w).map(|b| if (mask >> (bits - 1 - pos - b)) & 1 == 1 { -1 } else { 1 }).collect::<Vec<i8>>());
                pos += w;
            }
            let mut worst: f64 = 0.0;
            for (s, k0) in &clean_branches {
                let target = apply_flip(s, &f);
                let ke = all.iter().find(|(l, _)| *l == target).map(|(_, k)| k.clone());
                let want = err * k0;
                worst = worst.max(match ke {
                    Some(k) => (k - want).norm(),
                    None => want.norm(),
                });
            }
            if worst <= SUPPORT_TOL {
                found = Some((f, worst));
                break;
            }
        }
        let (flip, residual) = match found {
            Some((f, r)) => (Some(f), r),
            None => (None, f64::INFINITY),
        };
        rows.push(FlipRow { error: (*name).into(), support, flip, residual });
    }
    Ok(rows)
}

pub fn format_signs(signs: &[i8]) -> String {
    sign_label(signs)
}

/// Two-qubit, two-layer circuit: CNOT (qubit 1 controls qubit 2), then a Z
/// measurement of qubit 2. Encodes span{|00>, |11>} against an X flip of
/// qubit 1 before the first layer.
pub fn spacetime_toy_circuit() -> Result<NamedInstance> {
    let mut cnot = CMat::zeros(4, 4);
    for (x, y) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[(y, x)] = ONE;
    }
    let layer1 = CheckInstrument::new(vec![("u".into(), cnot)])?;
    let p0 = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
    let p1 = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
    let layer2 = CheckInstrument::new(vec![("0".into(), kron(&eye(2), &p0)), ("1".into(), kron(&eye(2), &p1))])?;
    let errors = ErrorModel::new(vec![
        ErrorRound::simple(vec![eye(4).map(|z| z * 0.9f64.sqrt()), pauli_string("XI").map(|z| z * 0.1f64.sqrt())])?,
        ErrorRound::simple(vec![eye(4)])?,
        ErrorRound::simple(vec![eye(4)])?,
    ])?;
    let codespace = CodeSpace::from_vectors(&[basis_state(4, 0), basis_state(4, 3)])?;
    Ok(NamedInstance {
        name: "spacetime".into(),
        code: StrategicCode::new(codespace, storing_interrogator(vec![layer1, layer2]))?,
        errors,
        expected: Some(Verdict::Correctable),
        provenance: "layer 1 CNOT(1->2) with constant outcome u, layer 2 Z measurement on qubit 2; \
error slots per layer: {sqrt(0.9) I, sqrt(0.1) X1} at the input, identity after each layer"
            .into(),
    })
}

/// Seeded random instance for cross-validating the checkers.
///
/// Per seed: codespace dimension 1 or 2 inside `qubits` qubits, 1 or 2
/// outcomes per instrument, at most 4 error sequences, and per error round
/// either a mixed-unitary channel, a random channel, or a trace-decreasing
/// random operation. Adaptive instances use random update tables over the
/// memory alphabet {a, b} with independent instruments per state; others
/// store every outcome.
pub fn random_instance(seed: u64, qubits: usize, rounds: usize, adaptive: bool) -> Result<NamedInstance> {
    let mut r = rng(seed);
    let d = 1usize << qubits;
    let k = r.random_range(1..=2usize).min(d);
    let basis = orthonormalize_columns(&ginibre(&mut r, d, k));
    let codespace = CodeSpace::new(basis)?;

    let outcome_counts: Vec<usize> = (0..rounds).map(|_| r.random_range(1..=2)).collect();
    let inst = |r: &mut SeededRng, n: usize| -> Result<CheckInstrument> {
        let ks = if n == 1 { vec![random_unitary(r, d)] } else { random_channel(r, d, d, n) };
        CheckInstrument::new(ks.into_iter().enumerate().map(|(k, c)| (k.to_string(), c)).collect())
    };
    let interrogator = if adaptive {
        let states = ["a", "b"];
        let mut rs = Vec::with_capacity(rounds);
        for (idx, &n) in outcome_counts.iter().enumerate() {
            let from: &[&str] = if idx == 0 { &["a"] } else { &states };
            let mut instruments = alloc::collections::BTreeMap::new();
            let mut update = alloc::collections::BTreeMap::new();
            for m in from {
                let this = inst(&mut r, n)?;
                for (o, _) in &this.outcomes {
                    let next = states[r.random_range(0..2usize)];
                    update.insert(((*m).to_string(), o.clone()), next.to_string());
                }
                instruments.insert((*m).to_string(), this);
            }
            rs.push(Round { instruments, update });
        }
        Interrogator { initial_memory: "a".into(), rounds: rs }
    } else {
        let mut insts = Vec::with_capacity(rounds);
        for &n in &outcome_counts {
            insts.push(inst(&mut r, n)?);
        }
        storing_interrogator(insts)
    };

    let mut counts: Vec<usize> = (0..=rounds).map(|_| r.random_range(1..=2)).collect();
    while counts.iter().product::<usize>() > 4 {
        if let Some(c) = counts.iter_mut().rev().find(|c| **c > 1) {
            *c = 1;
        }
    }
    let mut error_rounds = Vec::with_capacity(rounds + 1);
    let mut kinds = Vec::with_capacity(rounds + 1);
    for &c in &counts {
        let kind = r.random_range(0..3u8);
        let ks = match kind {
            0 => {
                let us: Vec<CMat> = (0..c).map(|_| random_unitary(&mut r, d)).collect();
                let ws: Vec<f64> = (0..c).map(|_| r.random_range(0.2..1.0)).collect();
                let total: f64 = ws.iter().sum();
                us.into_iter().zip(ws).map(|(u, w)| u.map(|z| z * (w / total).sqrt())).collect()
            }
            1 => random_channel(&mut r, d, d, c),
            _ => random_subchannel(&mut r, d, d, c),
        };
        kinds.push(["mixed-unitary", "channel", "subchannel"][kind as usize]);
        error_rounds.push(ErrorRound::simple(ks)?);
    }
    let errors = ErrorModel::new(error_rounds)?;
    let name = format!("random-{seed}-q{qubits}-l{rounds}-{}", if adaptive { "adaptive" } else { "stored" });
    Ok(NamedInstance {
        name,
        code: StrategicCode::new(codespace, interrogator)?,
        errors,
        expected: None,
        provenance: format!(
            "seed {seed}: codespace dim {k}, outcomes per round {outcome_counts:?}, error Kraus counts {counts:?}, error kinds {kinds:?}"
        ),
    })
}

/// Library instances with a fixed expected verdict.
pub fn library() -> Result<Vec<NamedInstance>> {
    Ok(vec![bitflip_code()?, bitflip_z_variant()?, hexagon_honeycomb()?, spacetime_toy_circuit()?])
}

pub fn library_names() -> &'static [&'static str] {
    &["bitflip", "bitflip-z", "hexagon", "spacetime"]
}

pub fn by_name(name: &str) -> Option<Result<NamedInstance>> {
    match name {
        "bitflip" => Some(bitflip_code()),
        "bitflip-z" => Some(bitflip_z_variant()),
        "hexagon" => Some(hexagon_honeycomb()),
        "spacetime" => Some(spacetime_toy_circuit()),
        _ => None,
    }
}
