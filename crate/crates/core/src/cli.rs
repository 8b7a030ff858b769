//! The `posmap` command line: one analysis per invocation, reported as JSON
//! (or CSV where a table makes sense).
//!
//! Exit codes: 0 affirmative verdict, 1 negative or inconclusive verdict,
//! 2 input error, 3 budget or search failure.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::catalog::{CatalogError, Generator};
use crate::coherence::{from_coherence, to_coherence, CoherenceVector, Hermitian3, MapMatrix};
use crate::extremality::{self, CandidateGroup, CandidateTag, ExtremalityError, ExtremalityReport, ExtremalityVerdict};
use crate::positivity::{self, PositivityError, PositivityReport};
use crate::semigroup::{self, Decomposition, IdempotentRecord, QIndex, SemigroupError};

pub const EXIT_AFFIRMATIVE: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SEARCH: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Convert between matrix, Hermitian and coherence-vector forms.
    Convert,
    /// Decide positivity.
    Check,
    /// Sort into the extremal candidate groups.
    Classify,
    /// Idempotent, h + y decomposition and unit singular value count.
    Decompose,
    /// Canonical reduction x = g1 z g2.
    Reduce,
    /// Extreme-point test in Λ.
    Extreme,
    /// List the named generators, or print one.
    Catalog,
    /// Everything above, as one classification record.
    Pipeline,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.to_possible_value().expect("no skipped variants");
        f.write_str(name.get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Analyses of positive bistochastic maps on 3x3 matrices.
#[derive(Debug, Clone, Parser)]
#[command(name = "posmap", version)]
pub struct AnalysisRequest {
    #[arg(value_enum)]
    pub command: Command,
    /// Generator name (e.g. `choi:t=0.25`, `s0`) or JSON file. Generators
    /// win: write `./s0` for a file called `s0`.
    #[arg(long)]
    pub input: Option<String>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl AnalysisRequest {
    pub fn new(command: Command, input: &str) -> Self {
        Self {
            command,
            input: Some(input.to_string()),
            output: None,
            tol: None,
            budget: None,
            seed: 0,
            format: Format::Json,
        }
    }

    fn tol(&self) -> f64 {
        self.tol.unwrap_or(match self.command {
            Command::Extreme => extremality::ACTIVE_TOL,
            Command::Decompose | Command::Reduce => semigroup::Q_TOL,
            _ => positivity::DEFAULT_TOL,
        })
    }

    fn budget(&self) -> usize {
        self.budget.unwrap_or(match self.command {
            Command::Reduce => semigroup::DEFAULT_ORBIT_BUDGET,
            _ => positivity::DEFAULT_BUDGET,
        })
    }
}

/// What `run` produced: the exit code and the report text.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: String,
}

/// A parsed input.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Map(MapMatrix),
    Hermitian(Hermitian3),
    Coherence(CoherenceVector),
}

#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            kind: "input",
            message: message.into(),
        }
    }
}

impl From<PositivityError> for Failure {
    fn from(e: PositivityError) -> Self {
        match e {
            PositivityError::BudgetExhausted { .. } => Self {
                code: EXIT_SEARCH,
                kind: "budget",
                message: e.to_string(),
            },
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<SemigroupError> for Failure {
    fn from(e: SemigroupError) -> Self {
        match e {
            SemigroupError::OrbitSearchFailed { .. } => Self {
                code: EXIT_SEARCH,
                kind: "search",
                message: e.to_string(),
            },
            _ => Self {
                code: EXIT_NEGATIVE,
                kind: "analysis",
                message: e.to_string(),
            },
        }
    }
}

impl From<ExtremalityError> for Failure {
    fn from(e: ExtremalityError) -> Self {
        match e {
            ExtremalityError::Positivity(p) => p.into(),
            ExtremalityError::InvalidTolerance(_) => Self::input(e.to_string()),
            ExtremalityError::NotPositive { .. } => Self {
                code: EXIT_NEGATIVE,
                kind: "analysis",
                message: e.to_string(),
            },
        }
    }
}

/// Resolves `input` as a generator name, or failing that as a JSON file.
pub fn load_input(input: &str) -> Result<Input, String> {
    match Generator::from_str(input) {
        Ok(g) => return Ok(Input::Map(g.matrix())),
        Err(CatalogError::UnknownGenerator(_)) => {}
        Err(e) => return Err(e.to_string()),
    }
    let text = std::fs::read_to_string(Path::new(input)).map_err(|e| format!("cannot read `{input}`: {e}"))?;
    parse_input(&text)
}

/// Recognises an 8x8 real array, a 3x3 array of `[re, im]`, or `{a0, avec}`.
pub fn parse_input(text: &str) -> Result<Input, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    match &value {
        Value::Object(_) => serde_json::from_value(value)
            .map(Input::Coherence)
            .map_err(|e| format!("malformed coherence vector: {e}")),
        Value::Array(rows) if rows.len() == 8 => serde_json::from_value(value)
            .map(Input::Map)
            .map_err(|e| format!("malformed map matrix: {e}")),
        Value::Array(rows) if rows.len() == 3 => serde_json::from_value(value)
            .map(Input::Hermitian)
            .map_err(|e| format!("malformed Hermitian matrix: {e}")),
        _ => Err("expected an 8x8 matrix, a 3x3 Hermitian matrix or a coherence vector".into()),
    }
}

fn require_map(input: Input) -> Result<MapMatrix, Failure> {
    match input {
        Input::Map(x) => Ok(x),
        _ => Err(Failure::input("this command needs an 8x8 map matrix")),
    }
}

/// Everything known about one element of Λ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationRecord {
    pub operator_norm: f64,
    pub positivity: PositivityReport,
    pub idempotent: Option<IdempotentRecord>,
    pub decomposition: Option<Decomposition>,
    pub q_index: Option<QIndex>,
    pub candidate: Option<CandidateGroup>,
    pub extremality: Option<ExtremalityReport>,
    /// Stages that could not run, with the reason.
    pub errors: Vec<String>,
}

/// Runs every analysis on `x`, stopping after positivity if it fails.
pub fn classification_record(
    x: &MapMatrix,
    tol: f64,
    budget: usize,
    seed: u64,
) -> Result<ClassificationRecord, PositivityError> {
    let pos = positivity::is_positive(x, tol, budget, seed)?;
    let mut record = ClassificationRecord {
        operator_norm: x.operator_norm(),
        positivity: pos,
        idempotent: None,
        decomposition: None,
        q_index: None,
        candidate: None,
        extremality: None,
        errors: Vec::new(),
    };
    if !record.positivity.is_positive() {
        record.errors.push("not positive: later stages skipped".into());
        return Ok(record);
    }
    match semigroup::idempotent_of(x, semigroup::PERIPHERAL_TOL) {
        Ok(e) => {
            let e = e.with_positivity(true);
            match semigroup::decompose(x, &e, semigroup::DECOMPOSE_TOL) {
                Ok(d) => {
                    match semigroup::q_index_of(&d, semigroup::Q_TOL) {
                        Ok(q) => record.q_index = Some(q),
                        Err(err) => record.errors.push(format!("q_index: {err}")),
                    }
                    record.decomposition = Some(d);
                }
                Err(err) => record.errors.push(format!("decompose: {err}")),
            }
            record.idempotent = Some(e);
        }
        Err(err) => record.errors.push(format!("idempotent: {err}")),
    }
    match extremality::classify_candidate(x, budget, seed) {
        Ok(c) => record.candidate = Some(c),
        Err(err) => record.errors.push(format!("classify: {err}")),
    }
    match extremality::extreme_in_lambda(x, extremality::ACTIVE_TOL, budget, seed) {
        Ok(r) => record.extremality = Some(r),
        Err(err) => record.errors.push(format!("extreme: {err}")),
    }
    Ok(record)
}

fn matrix_csv(rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    rows.into_iter()
        .map(|r| r.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",") + "\n")
        .collect()
}

enum Body {
    Json(i32, Value),
    Csv(i32, String),
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn dispatch(req: &AnalysisRequest) -> Result<Body, Failure> {
    if let Some(t) = req.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::input(format!("tolerance must be positive (got {t})")));
        }
    }
    let csv_ok = matches!(req.command, Command::Convert | Command::Extreme);
    if req.format == Format::Csv && !csv_ok {
        return Err(Failure::input(format!("--format csv is not available for `{}`", req.command)));
    }
    if req.command == Command::Catalog && req.input.is_none() {
        let entries: Vec<Value> = ["choi:t=0", "s0", "transpose", "identity", "adunitary:seed=0"]
            .iter()
            .map(|name| {
                let g = Generator::from_str(name).expect("built-in names parse");
                json!({ "name": name, "matrix": to_value(&g.matrix()) })
            })
            .collect();
        return Ok(Body::Json(
            EXIT_AFFIRMATIVE,
            json!({ "syntax": Generator::NAMES, "generators": entries }),
        ));
    }
    let Some(name) = req.input.as_deref() else {
        return Err(Failure::input(format!("`{}` needs --input", req.command)));
    };
    let input = load_input(name).map_err(Failure::input)?;
    let (tol, budget, seed) = (req.tol(), req.budget(), req.seed);

    match req.command {
        Command::Convert | Command::Catalog => {
            let value = match &input {
                Input::Map(x) => to_value(x),
                Input::Hermitian(h) => to_value(&to_coherence(h)),
                Input::Coherence(v) => to_value(&from_coherence(v)),
            };
            if req.format == Format::Csv {
                let csv = match &input {
                    Input::Map(x) => matrix_csv(x.to_rows().iter().map(|r| r.to_vec())),
                    Input::Hermitian(h) => {
                        let v = to_coherence(h);
                        matrix_csv([std::iter::once(v.a0).chain(v.avec.iter().copied()).collect()])
                    }
                    Input::Coherence(v) => {
                        let h = from_coherence(v);
                        matrix_csv((0..3).map(|i| (0..3).flat_map(|j| [h.matrix()[(i, j)].re, h.matrix()[(i, j)].im]).collect()))
                    }
                };
                return Ok(Body::Csv(EXIT_AFFIRMATIVE, csv));
            }
            Ok(Body::Json(EXIT_AFFIRMATIVE, value))
        }
        Command::Check => {
            let x = require_map(input)?;
            let r = positivity::is_positive(&x, tol, budget, seed)?;
            let code = if r.is_positive() { EXIT_AFFIRMATIVE } else { EXIT_NEGATIVE };
            Ok(Body::Json(code, to_value(&r)))
        }
        Command::Classify => {
            let x = require_map(input)?;
            let c = extremality::classify_candidate(&x, budget, seed)?;
            let code = if c.tag == CandidateTag::Other { EXIT_NEGATIVE } else { EXIT_AFFIRMATIVE };
            Ok(Body::Json(code, to_value(&c)))
        }
        Command::Decompose => {
            let x = require_map(input)?;
            let e = semigroup::idempotent_of(&x, semigroup::PERIPHERAL_TOL)?;
            let d = semigroup::decompose(&x, &e, semigroup::DECOMPOSE_TOL)?;
            let q = semigroup::q_index_of(&d, tol)?;
            let code = if q.emptiness_consistent { EXIT_AFFIRMATIVE } else { EXIT_NEGATIVE };
            Ok(Body::Json(
                code,
                json!({ "idempotent": to_value(&e), "decomposition": to_value(&d), "q_index": to_value(&q) }),
            ))
        }
        Command::Reduce => {
            let x = require_map(input)?;
            let r = semigroup::reduce_canonical(&x, budget, seed)?;
            Ok(Body::Json(EXIT_AFFIRMATIVE, to_value(&r)))
        }
        Command::Extreme => {
            let x = require_map(input)?;
            if req.format == Format::Csv {
                let a = extremality::active_pairs(&x, tol, budget, seed)?;
                return Ok(Body::Csv(EXIT_AFFIRMATIVE, a.to_csv()));
            }
            let r = extremality::extreme_in_lambda(&x, tol, budget, seed)?;
            let code = if r.verdict == ExtremalityVerdict::CertifiedExtreme {
                EXIT_AFFIRMATIVE
            } else {
                EXIT_NEGATIVE
            };
            Ok(Body::Json(code, to_value(&r)))
        }
        Command::Pipeline => {
            let x = require_map(input)?;
            let r = classification_record(&x, tol, budget, seed)?;
            let code = if r.positivity.is_positive() && r.errors.is_empty() {
                EXIT_AFFIRMATIVE
            } else {
                EXIT_NEGATIVE
            };
            Ok(Body::Json(code, to_value(&r)))
        }
    }
}

/// Runs the request without touching the output path.
pub fn run(req: &AnalysisRequest) -> Outcome {
    let provenance = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": req.seed,
        "budget": req.budget(),
        "tol": req.tol(),
    });
    let envelope = |code: i32, result: Value| Outcome {
        exit_code: code,
        report: serde_json::to_string_pretty(&json!({
            "command": req.command,
            "input": req.input,
            "provenance": provenance,
            "result": result,
        }))
        .expect("reports serialize")
            + "\n",
    };
    match dispatch(req) {
        Ok(Body::Json(code, value)) => envelope(code, value),
        Ok(Body::Csv(code, text)) => Outcome {
            exit_code: code,
            report: text,
        },
        Err(f) => envelope(f.code, json!({ "error": { "kind": f.kind, "message": f.message } })),
    }
}

/// Runs the request and writes the report to `--output` or standard output.
pub fn execute(req: &AnalysisRequest) -> i32 {
    let outcome = run(req);
    match &req.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.report) {
                eprintln!("posmap: cannot write {}: {e}", path.display());
                return EXIT_INPUT;
            }
        }
        None => print!("{}", outcome.report),
    }
    outcome.exit_code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_schema() {
        let x = serde_json::to_string(&MapMatrix::identity()).unwrap();
        assert!(matches!(parse_input(&x), Ok(Input::Map(_))));
        let h = serde_json::to_string(&Hermitian3::diag([1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(parse_input(&h), Ok(Input::Hermitian(_))));
        assert!(matches!(
            parse_input(r#"{"a0": 1.0, "avec": [0,0,0,0,0,0,0,0]}"#),
            Ok(Input::Coherence(_))
        ));
        assert!(parse_input("[[1,2],[3,4]]").is_err());
        assert!(parse_input("not json").is_err());
    }

    #[test]
    fn generator_errors_are_input_errors() {
        let out = run(&AnalysisRequest::new(Command::Convert, "choi:t=2"));
        assert_eq!(out.exit_code, EXIT_INPUT);
        let out = run(&AnalysisRequest::new(Command::Convert, "no-such-file.json"));
        assert_eq!(out.exit_code, EXIT_INPUT);
    }

    #[test]
    fn convert_identity() {
        let out = run(&AnalysisRequest::new(Command::Convert, "identity"));
        assert_eq!(out.exit_code, 0);
        let v: Value = serde_json::from_str(&out.report).unwrap();
        let back: MapMatrix = serde_json::from_value(v["result"].clone()).unwrap();
        assert_eq!(back, MapMatrix::identity());
    }

    #[test]
    fn csv_only_where_tabular() {
        let mut req = AnalysisRequest::new(Command::Check, "s0");
        req.format = Format::Csv;
        assert_eq!(run(&req).exit_code, EXIT_INPUT);
        req.command = Command::Convert;
        let out = run(&req);
        assert_eq!(out.exit_code, 0);
        assert_eq!(out.report.lines().count(), 8);
    }
}
