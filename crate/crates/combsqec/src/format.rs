//! JSON instance files: a codespace, an interrogator, an error model and an
//! optional optimization block.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. Loading validates every model invariant and names the offending
//! path through the document on failure.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use combsqec_core::conditions::Verdict;
use combsqec_core::library::NamedInstance;
use combsqec_core::model::{
    CheckInstrument, CodeSpace, ErrorModel, ErrorRound, Interrogator, Round, StrategicCode, COMPLETENESS_TOL,
};
use combsqec_core::optimize::{Factor, OptConfig};
use combsqec_core::tensor::{CMat, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

pub type Complex = [f64; 2];
pub type Matrix = Vec<Vec<Complex>>;

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    pub dims: DimsSection,
    pub codespace: CodespaceSection,
    pub interrogator: InterrogatorSection,
    pub error_model: ErrorModelSection,
    /// "CORRECTABLE" or "NOT CORRECTABLE".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationSection>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct DimsSection {
    pub ambient: usize,
    pub code: usize,
    pub rounds: usize,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CodespaceSection {
    /// Orthonormal basis vectors of the initial codespace.
    pub basis: Vec<Vec<Complex>>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InterrogatorSection {
    #[serde(default)]
    pub initial_memory: String,
    pub rounds: Vec<RoundSection>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RoundSection {
    pub instruments: Vec<InstrumentSection>,
    pub update: Vec<UpdateEntry>,
}

/// One instrument shared by every memory state listed in `memory`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSection {
    pub memory: Vec<String>,
    pub outcomes: Vec<OutcomeSection>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSection {
    pub label: String,
    pub kraus: Matrix,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct UpdateEntry {
    pub memory: String,
    pub outcome: String,
    pub next: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ErrorModelSection {
    pub rounds: Vec<ErrorRoundSection>,
}

fn one() -> usize {
    1
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ErrorRoundSection {
    #[serde(default = "one")]
    pub env_in: usize,
    #[serde(default = "one")]
    pub env_out: usize,
    pub kraus: Vec<Matrix>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSection {
    /// Dimension of L and L'; defaults to the codespace dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logical: Option<usize>,
    /// Number of memory values per round; defaults to one per round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<Vec<usize>>,
    /// "code" starts from the file's codespace and instruments, "identity"
    /// from perturbed identity embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_conv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
    /// Input state on L; maximally mixed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biconvex: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    Code,
    Identity,
}

impl Start {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "code" => Some(Start::Code),
            "identity" => Some(Start::Identity),
            _ => None,
        }
    }
}

/// Validated contents of an optimization block.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationSpec {
    pub logical: usize,
    pub memory: Vec<usize>,
    pub start: Start,
    pub config: OptConfig,
    pub rho: Option<CMat>,
    pub biconvex: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("{path} (line {line}, column {column}): {msg}")]
    Field { path: String, line: usize, column: usize, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("schema_version: unsupported version {found}; this build reads version {SCHEMA_VERSION}")]
    Version { found: u32 },
}

impl FormatError {
    /// Document path of the diagnostic, when it has one.
    pub fn path(&self) -> Option<&str> {
        match self {
            FormatError::Field { path, .. } | FormatError::Invalid { path, .. } => Some(path),
            FormatError::Version { .. } => Some("schema_version"),
            _ => None,
        }
    }
}

fn invalid(path: impl Into<String>, msg: impl fmt::Display) -> FormatError {
    FormatError::Invalid { path: path.into(), msg: msg.to_string() }
}

/// Residuals measured while loading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadResiduals {
    pub orthonormality: f64,
    /// (document path, ‖Σ C†C − I‖_F) per instrument.
    pub completeness: Vec<(String, f64)>,
    /// ‖Σ E†E − I‖_F per error round.
    pub error_tp: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedInstance {
    pub name: String,
    pub provenance: Option<String>,
    pub code: StrategicCode,
    pub errors: ErrorModel,
    pub expected: Option<Verdict>,
    pub optimization: Option<OptimizationSpec>,
    pub residuals: LoadResiduals,
    /// "sha256:<hex>" of the input bytes.
    pub digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

fn complex(z: Complex) -> C64 {
    C64::new(z[0], z[1])
}

fn pair(z: C64) -> Complex {
    [z.re, z.im]
}

pub fn matrix_from(m: &Matrix, path: &str) -> Result<CMat, FormatError> {
    let rows = m.len();
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(invalid(path, "matrix must be non-empty"));
    }
    if let Some(r) = m.iter().position(|row| row.len() != cols) {
        return Err(invalid(format!("{path}[{r}]"), format!("row has {} entries, expected {cols}", m[r].len())));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| complex(m[i][j])))
}

pub fn matrix_to(m: &CMat) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect()).collect()
}

fn verdict_from(s: &str) -> Option<Verdict> {
    match s {
        "CORRECTABLE" => Some(Verdict::Correctable),
        "NOT CORRECTABLE" => Some(Verdict::NotCorrectable),
        _ => None,
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

fn json_error(e: &serde_json::Error) -> FormatError {
    FormatError::Syntax { line: e.line(), column: e.column(), msg: e.to_string() }
}

/// Parses and validates an instance document.
pub fn parse_instance_str(text: &str) -> Result<LoadedInstance, FormatError> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => FormatError::Field {
            path: "schema_version".into(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        },
        _ => json_error(&e),
    })?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(FormatError::Version { found: probe.schema_version });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let file: InstanceFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        FormatError::Field { path, line: inner.line(), column: inner.column(), msg: inner.to_string() }
    })?;
    from_file(&file, digest(text.as_bytes()))
}

pub fn parse_instance(path: &Path) -> Result<LoadedInstance, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })?;
    parse_instance_str(&text)
}

/// Builds and validates the model described by `file`.
pub fn from_file(file: &InstanceFile, digest: String) -> Result<LoadedInstance, FormatError> {
    let dims = &file.dims;
    let basis = &file.codespace.basis;
    if basis.len() != dims.code {
        return Err(invalid("codespace.basis", format!("{} vectors given but dims.code = {}", basis.len(), dims.code)));
    }
    if let Some(i) = basis.iter().position(|v| v.len() != dims.ambient) {
        return Err(invalid(
            format!("codespace.basis[{i}]"),
            format!("vector has {} entries but dims.ambient = {}", basis[i].len(), dims.ambient),
        ));
    }
    let vectors: Vec<Vec<C64>> = basis.iter().map(|v| v.iter().copied().map(complex).collect()).collect();
    let codespace = CodeSpace::from_vectors(&vectors).map_err(|e| invalid("codespace.basis", e))?;
    let orthonormality = codespace.orthonormality_residual();

    let (interrogator, completeness) = interrogator_from(&file.interrogator)?;
    if interrogator.num_rounds() != dims.rounds {
        return Err(invalid(
            "interrogator.rounds",
            format!("{} rounds given but dims.rounds = {}", interrogator.num_rounds(), dims.rounds),
        ));
    }
    let errors = error_model_from(&file.error_model)?;
    let error_tp = errors.rounds.iter().map(|r| r.tp_residual()).collect();
    let code = StrategicCode::new(codespace, interrogator).map_err(|e| invalid("interrogator", e))?;
    code.check_compatible(&errors).map_err(|e| invalid("error_model", e))?;

    let expected = match &file.expected {
        None => None,
        Some(s) => Some(verdict_from(s).ok_or_else(|| invalid("expected", format!("`{s}` is neither CORRECTABLE nor NOT CORRECTABLE")))?),
    };
    let optimization = match &file.optimization {
        None => None,
        Some(o) => Some(optimization_from(o, &code)?),
    };
    Ok(LoadedInstance {
        name: file.name.clone().unwrap_or_else(|| "unnamed".into()),
        provenance: file.provenance.clone(),
        code,
        errors,
        expected,
        optimization,
        residuals: LoadResiduals { orthonormality, completeness, error_tp },
        digest,
    })
}

fn interrogator_from(sec: &InterrogatorSection) -> Result<(Interrogator, Vec<(String, f64)>), FormatError> {
    let mut rounds = Vec::with_capacity(sec.rounds.len());
    let mut residuals = Vec::new();
    for (k, round) in sec.rounds.iter().enumerate() {
        let base = format!("interrogator.rounds[{k}]");
        let mut instruments = BTreeMap::new();
        for (i, inst) in round.instruments.iter().enumerate() {
            let ipath = format!("{base}.instruments[{i}]");
            if inst.memory.is_empty() {
                return Err(invalid(format!("{ipath}.memory"), "instrument is not assigned to any memory state"));
            }
            let mut outcomes = Vec::with_capacity(inst.outcomes.len());
            for (o, out) in inst.outcomes.iter().enumerate() {
                outcomes.push((out.label.clone(), matrix_from(&out.kraus, &format!("{ipath}.outcomes[{o}].kraus"))?));
            }
            let ci = CheckInstrument::new(outcomes).map_err(|e| invalid(format!("{ipath}.outcomes"), e))?;
            let res = ci.completeness_residual();
            if res > COMPLETENESS_TOL {
                return Err(invalid(format!("{ipath}.outcomes"), format!("instrument is incomplete: |Σ C†C - I|_F = {res:e}")));
            }
            residuals.push((ipath.clone(), res));
            for (j, m) in inst.memory.iter().enumerate() {
                if instruments.insert(m.clone(), ci.clone()).is_some() {
                    return Err(invalid(format!("{ipath}.memory[{j}]"), format!("memory state `{m}` already has an instrument")));
                }
            }
        }
        let mut update = BTreeMap::new();
        for (u, entry) in round.update.iter().enumerate() {
            let upath = format!("{base}.update[{u}]");
            let inst = instruments
                .get(&entry.memory)
                .ok_or_else(|| invalid(format!("{upath}.memory"), format!("no instrument for memory state `{}`", entry.memory)))?;
            if !inst.outcomes.iter().any(|(l, _)| *l == entry.outcome) {
                return Err(invalid(format!("{upath}.outcome"), format!("instrument has no outcome `{}`", entry.outcome)));
            }
            if update.insert((entry.memory.clone(), entry.outcome.clone()), entry.next.clone()).is_some() {
                return Err(invalid(upath, "duplicate (memory, outcome) entry"));
            }
        }
        rounds.push(Round { instruments, update });
    }
    Ok((Interrogator { initial_memory: sec.initial_memory.clone(), rounds }, residuals))
}

fn error_model_from(sec: &ErrorModelSection) -> Result<ErrorModel, FormatError> {
    let mut rounds = Vec::with_capacity(sec.rounds.len());
    for (r, round) in sec.rounds.iter().enumerate() {
        let rpath = format!("error_model.rounds[{r}]");
        let kraus = round
            .kraus
            .iter()
            .enumerate()
            .map(|(k, m)| matrix_from(m, &format!("{rpath}.kraus[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let er = ErrorRound::new(round.env_in, round.env_out, kraus).map_err(|e| invalid(&rpath, e))?;
        let w = er.max_weight();
        if w > 1.0 + COMPLETENESS_TOL {
            return Err(invalid(format!("{rpath}.kraus"), format!("round is trace increasing: max eig Σ E†E = {w}")));
        }
        rounds.push(er);
    }
    ErrorModel::new(rounds).map_err(|e| invalid("error_model.rounds", e))
}

fn optimization_from(o: &OptimizationSection, code: &StrategicCode) -> Result<OptimizationSpec, FormatError> {
    let l = code.rounds();
    let logical = o.logical.unwrap_or(code.codespace.dim());
    if logical == 0 {
        return Err(invalid("optimization.logical", "must be positive"));
    }
    let memory = o.memory.clone().unwrap_or_else(|| vec![1; l]);
    if memory.len() != l {
        return Err(invalid("optimization.memory", format!("{} entries given for {l} rounds", memory.len())));
    }
    if let Some(i) = memory.iter().position(|&n| n == 0) {
        return Err(invalid(format!("optimization.memory[{i}]"), "every round needs at least one memory value"));
    }
    let start = match &o.start {
        None => Start::Code,
        Some(s) => Start::parse(s).ok_or_else(|| invalid("optimization.start", format!("`{s}` is neither `code` nor `identity`")))?,
    };
    let mut config = OptConfig::default();
    if let Some(v) = o.seed {
        config.seed = v;
    }
    if let Some(v) = o.max_iters {
        config.max_iters = v;
    }
    if let Some(v) = o.tol_conv {
        if !(v > 0.0) {
            return Err(invalid("optimization.tol_conv", "must be positive"));
        }
        config.tol_conv = v;
    }
    if let Some(v) = o.perturbation {
        if !(v >= 0.0) {
            return Err(invalid("optimization.perturbation", "must be nonnegative"));
        }
        config.perturbation = v;
    }
    if let Some(v) = o.inner_steps {
        config.inner_steps = v;
    }
    if let Some(order) = &o.order {
        let mut fs = Vec::with_capacity(order.len());
        for (i, s) in order.iter().enumerate() {
            let f = Factor::parse(s).ok_or_else(|| invalid(format!("optimization.order[{i}]"), format!("unknown factor `{s}`")))?;
            if matches!(f, Factor::Round(r) if r > l) {
                return Err(invalid(format!("optimization.order[{i}]"), format!("the model has {l} rounds")));
            }
            fs.push(f);
        }
        config.order = Some(fs);
    }
    let rho = match &o.rho {
        None => None,
        Some(m) => {
            let r = matrix_from(m, "optimization.rho")?;
            if r.nrows() != logical || r.ncols() != logical {
                return Err(invalid("optimization.rho", format!("expected a {logical}x{logical} matrix")));
            }
            Some(r)
        }
    };
    Ok(OptimizationSpec { logical, memory, start, config, rho, biconvex: o.biconvex.unwrap_or(false) })
}

/// Document for a model; memory states sharing an identical instrument are
/// grouped into one entry.
pub fn to_file(
    name: &str,
    provenance: Option<&str>,
    code: &StrategicCode,
    errors: &ErrorModel,
    expected: Option<Verdict>,
) -> InstanceFile {
    let basis = code.codespace.basis();
    let rounds = code
        .interrogator
        .rounds
        .iter()
        .map(|round| {
            let mut groups: Vec<(Vec<String>, &CheckInstrument)> = Vec::new();
            for (m, inst) in &round.instruments {
                match groups.iter_mut().find(|(_, g)| *g == inst) {
                    Some((ms, _)) => ms.push(m.clone()),
                    None => groups.push((vec![m.clone()], inst)),
                }
            }
            RoundSection {
                instruments: groups
                    .into_iter()
                    .map(|(memory, inst)| InstrumentSection {
                        memory,
                        outcomes: inst
                            .outcomes
                            .iter()
                            .map(|(label, k)| OutcomeSection { label: label.clone(), kraus: matrix_to(k) })
                            .collect(),
                    })
                    .collect(),
                update: round
                    .update
                    .iter()
                    .map(|((memory, outcome), next)| UpdateEntry {
                        memory: memory.clone(),
                        outcome: outcome.clone(),
                        next: next.clone(),
                    })
                    .collect(),
            }
        })
        .collect();
    InstanceFile {
        schema_version: SCHEMA_VERSION,
        name: Some(name.into()),
        provenance: provenance.map(str::to_owned),
        dims: DimsSection { ambient: basis.nrows(), code: basis.ncols(), rounds: code.rounds() },
        codespace: CodespaceSection {
            basis: (0..basis.ncols()).map(|j| (0..basis.nrows()).map(|i| pair(basis[(i, j)])).collect()).collect(),
        },
        interrogator: InterrogatorSection { initial_memory: code.interrogator.initial_memory.clone(), rounds },
        error_model: ErrorModelSection {
            rounds: errors
                .rounds
                .iter()
                .map(|r| ErrorRoundSection { env_in: r.env_in, env_out: r.env_out, kraus: r.kraus.iter().map(matrix_to).collect() })
                .collect(),
        },
        expected: expected.map(|v| v.as_str().to_owned()),
        optimization: None,
    }
}

pub fn instance_file(inst: &NamedInstance) -> InstanceFile {
    to_file(&inst.name, Some(&inst.provenance), &inst.code, &inst.errors, inst.expected)
}

pub fn to_json(file: &InstanceFile) -> String {
    let mut s = serde_json::to_string(file).expect("instance documents serialize");
    s.push('\n');
    s
}

pub fn write_instance(path: &Path, file: &InstanceFile) -> Result<(), FormatError> {
    std::fs::write(path, to_json(file)).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use combsqec_core::library;

    fn bitflip_json() -> serde_json::Value {
        serde_json::to_value(instance_file(&library::bitflip_code().unwrap())).unwrap()
    }

    fn parse_value(v: &serde_json::Value) -> Result<LoadedInstance, FormatError> {
        parse_instance_str(&v.to_string())
    }

    #[test]
    fn library_instances_round_trip() {
        for inst in library::library().unwrap() {
            let text = to_json(&instance_file(&inst));
            let back = parse_instance_str(&text).unwrap();
            assert_eq!(back.code, inst.code, "{}", inst.name);
            assert_eq!(back.errors, inst.errors, "{}", inst.name);
            assert_eq!(back.expected, inst.expected);
            assert_eq!(back.name, inst.name);
            assert!(back.digest.starts_with("sha256:") && back.digest.len() == 7 + 64);
        }
    }

    #[test]
    fn shared_instruments_are_grouped() {
        let file = instance_file(&library::hexagon_honeycomb().unwrap());
        assert_eq!(file.interrogator.rounds[0].instruments.len(), 1);
        assert_eq!(file.interrogator.rounds[1].instruments.len(), 1);
        assert_eq!(file.interrogator.rounds[1].instruments[0].memory.len(), 8);
        assert_eq!(file.interrogator.rounds[1].update.len(), 64);
    }

    #[test]
    fn non_orthonormal_basis_names_its_path() {
        let mut v = bitflip_json();
        v["codespace"]["basis"][1][0] = serde_json::json!([1.0, 0.0]);
        let e = parse_value(&v).unwrap_err();
        assert_eq!(e.path(), Some("codespace.basis"), "{e}");
        assert!(e.to_string().contains("orthonormal"));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let mut v = bitflip_json();
        v["schema_version"] = serde_json::json!(7);
        assert!(matches!(parse_value(&v), Err(FormatError::Version { found: 7 })));
    }

    #[test]
    fn malformed_fields_report_paths() {
        let mut v = bitflip_json();
        v["error_model"]["rounds"][0]["kraus"][2][1][0] = serde_json::json!([1.0]);
        let e = parse_value(&v).unwrap_err();
        assert!(e.path().unwrap().starts_with("error_model.rounds[0].kraus[2][1][0]"), "{e}");

        let mut v = bitflip_json();
        v["error_model"]["rounds"][0]["kraus"][1].as_array_mut().unwrap().pop();
        let e = parse_value(&v).unwrap_err();
        assert_eq!(e.path(), Some("error_model.rounds[0]"), "{e}");

        let mut v = bitflip_json();
        v["colour"] = serde_json::json!(1);
        assert!(matches!(parse_value(&v), Err(FormatError::Field { .. })));

        let e = parse_instance_str("{\"schema_version\": 1,").unwrap_err();
        assert!(matches!(e, FormatError::Syntax { line: 1, .. }), "{e}");
    }

    #[test]
    fn invalid_models_are_rejected_with_residuals() {
        let mut v = serde_json::to_value(instance_file(&library::spacetime_toy_circuit().unwrap())).unwrap();
        v["interrogator"]["rounds"][1]["instruments"][0]["outcomes"][0]["kraus"][0][0] = serde_json::json!([0.5, 0.0]);
        let e = parse_value(&v).unwrap_err();
        assert_eq!(e.path(), Some("interrogator.rounds[1].instruments[0].outcomes"), "{e}");
        assert!(e.to_string().contains("incomplete"));

        let mut v = bitflip_json();
        v["error_model"]["rounds"][0]["kraus"][0][0][0] = serde_json::json!([3.0, 0.0]);
        assert_eq!(parse_value(&v).unwrap_err().path(), Some("error_model.rounds[0].kraus"));

        let mut v = bitflip_json();
        v["dims"]["code"] = serde_json::json!(3);
        assert_eq!(parse_value(&v).unwrap_err().path(), Some("codespace.basis"));

        let mut v = bitflip_json();
        v["expected"] = serde_json::json!("MAYBE");
        assert_eq!(parse_value(&v).unwrap_err().path(), Some("expected"));
    }

    #[test]
    fn loads_report_residuals() {
        let inst = library::spacetime_toy_circuit().unwrap();
        let back = parse_instance_str(&to_json(&instance_file(&inst))).unwrap();
        assert!(back.residuals.orthonormality < 1e-12);
        assert_eq!(back.residuals.completeness.len(), 2);
        assert!(back.residuals.completeness.iter().all(|(_, r)| *r < 1e-12));
        assert_eq!(back.residuals.error_tp.len(), 3);
    }

    #[test]
    fn optimization_block_is_validated() {
        let mut v = serde_json::to_value(instance_file(&library::spacetime_toy_circuit().unwrap())).unwrap();
        v["optimization"] = serde_json::json!({"memory": [2, 1], "order": ["decoder", "round2", "encoder"], "seed": 5, "start": "identity"});
        let spec = parse_value(&v).unwrap().optimization.unwrap();
        assert_eq!(spec.memory, vec![2, 1]);
        assert_eq!(spec.start, Start::Identity);
        assert_eq!(spec.config.seed, 5);
        assert_eq!(spec.config.order, Some(vec![Factor::Decoder, Factor::Round(2), Factor::Encoder]));
        v["optimization"]["order"] = serde_json::json!(["round3"]);
        assert_eq!(parse_value(&v).unwrap_err().path(), Some("optimization.order[0]"));
        v["optimization"] = serde_json::json!({"memory": [2]});
        assert_eq!(parse_value(&v).unwrap_err().path(), Some("optimization.memory"));
    }

    #[test]
    fn digest_depends_on_bytes() {
        assert_eq!(digest(b"abc"), "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
