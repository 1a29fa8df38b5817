//! JSON problem documents referencing Matrix Market files.
//!
//! ```json
//! {
//!   "A": "a.mtx", "B": "b.mtx", "C": "c.mtx", "D": "d.mtx",
//!   "functional": { "type": "trace" },
//!   "options": { "tol": 1e-7, "max_iter": 500, "mode": "diag" }
//! }
//! ```
//!
//! The reduced form gives `"M"` and `"N"` instead of `A`, `B`, `C`, `D`.
//! Several terms list `"C"` (or `"N"`) and `"functional"` as arrays of equal
//! length. Paths are relative to the document.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use quasilin_core::fixpoint::{IterationMode, PsiKind};
use quasilin_core::matcore::{FunctionalSpec, LinearFunctional};
use quasilin_core::scalarnl::{ScalarFn, ScalarMethod};
use quasilin_core::{Mat, QuasiLinearProblem, ReducedProblem, Term};

use crate::{mmio, CliError};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(t) => vec![t],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    #[serde(rename = "A")]
    pub a: Option<PathBuf>,
    #[serde(rename = "B")]
    pub b: Option<PathBuf>,
    #[serde(rename = "C")]
    pub c: Option<OneOrMany<PathBuf>>,
    #[serde(rename = "D")]
    pub d: Option<PathBuf>,
    #[serde(rename = "M")]
    pub m: Option<PathBuf>,
    #[serde(rename = "N")]
    pub n: Option<OneOrMany<PathBuf>>,
    pub functional: OneOrMany<FunctionalDoc>,
    #[serde(default)]
    pub options: OptionsDoc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalDoc {
    Trace,
    /// `vᵀXu`.
    RankOne { u: Vec<f64>, v: Vec<f64> },
    /// `trace(HX)` with `H` from a file.
    Dense { h: PathBuf },
    TracePower { p: u32 },
    FrobeniusSq,
    TraceInverse,
    TraceExpNeg,
    TraceSqrt,
    /// `g(h(X))`.
    GOfLinear { g: GDoc, h: Box<FunctionalDoc> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GDoc {
    ExpNeg,
    Log,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeDoc {
    Diag,
    Direct,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MethodDoc {
    Newton,
    FixedPoint,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsDoc {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub mode: Option<ModeDoc>,
    /// Starting value of the scalar solvers.
    pub y0: Option<f64>,
    pub method: Option<MethodDoc>,
}

/// Solver settings after merging the document with command-line flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub mode: IterationMode,
    pub y0: f64,
    pub method: ScalarMethod,
}

#[derive(Debug, Clone)]
pub enum ProblemForm {
    Full(QuasiLinearProblem),
    Reduced(ReducedProblem),
}

impl ProblemForm {
    pub fn terms(&self) -> &[Term] {
        match self {
            ProblemForm::Full(p) => &p.terms,
            ProblemForm::Reduced(r) => &r.terms,
        }
    }

    pub fn relative_residual(&self, x: &Mat) -> quasilin_core::Result<f64> {
        match self {
            ProblemForm::Full(p) => p.relative_residual(x),
            ProblemForm::Reduced(r) => r.relative_residual(x),
        }
    }

    pub fn reduced(&self) -> quasilin_core::Result<ReducedProblem> {
        match self {
            ProblemForm::Full(p) => p.reduce(),
            ProblemForm::Reduced(r) => Ok(r.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub form: ProblemForm,
    pub settings: SolveSettings,
}

pub fn parse_doc(text: &str) -> Result<ProblemDoc, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("problem file: {e}")))
}

/// Reads, validates and loads a problem document with every referenced
/// matrix.
pub fn load(path: &Path) -> Result<LoadedProblem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let doc = parse_doc(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    build(doc, base)
}

fn build(doc: ProblemDoc, base: &Path) -> Result<LoadedProblem, CliError> {
    let read = |p: &Path| mmio::read(&base.join(p));
    let functionals = doc.functional.into_vec();
    let full = doc.a.is_some() || doc.b.is_some() || doc.c.is_some() || doc.d.is_some();
    let reduced = doc.m.is_some() || doc.n.is_some();
    let form = match (full, reduced) {
        (true, false) => {
            let (Some(a), Some(b), Some(c), Some(d)) = (doc.a, doc.b, doc.c, doc.d) else {
                return Err(CliError::Input("the full form needs A, B, C and D".into()));
            };
            let cs = c.into_vec();
            let terms = terms(&cs, &functionals, base)?;
            ProblemForm::Full(QuasiLinearProblem::new(read(&a)?, read(&b)?, terms, read(&d)?)?)
        }
        (false, true) => {
            let (Some(m), Some(n)) = (doc.m, doc.n) else {
                return Err(CliError::Input("the reduced form needs M and N".into()));
            };
            let ns = n.into_vec();
            let terms = terms(&ns, &functionals, base)?;
            ProblemForm::Reduced(ReducedProblem::new(read(&m)?, terms)?)
        }
        (true, true) => return Err(CliError::Input("give either A, B, C, D or M, N, not both".into())),
        (false, false) => return Err(CliError::Input("no matrices given".into())),
    };
    let o = doc.options;
    if let Some(t) = o.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Input("options.tol must be positive".into()));
        }
    }
    let settings = SolveSettings {
        tol: o.tol,
        max_iter: o.max_iter,
        mode: match o.mode {
            Some(ModeDoc::Direct) => IterationMode::Direct,
            _ => IterationMode::Diagonalized,
        },
        y0: o.y0.unwrap_or(1.0),
        method: match o.method {
            Some(MethodDoc::FixedPoint) => ScalarMethod::FixedPoint,
            _ => ScalarMethod::Newton,
        },
    };
    Ok(LoadedProblem { form, settings })
}

fn terms(cs: &[PathBuf], fs: &[FunctionalDoc], base: &Path) -> Result<Vec<Term>, CliError> {
    if cs.len() != fs.len() || cs.is_empty() {
        return Err(CliError::Input(format!(
            "{} coefficient matrices but {} functionals",
            cs.len(),
            fs.len()
        )));
    }
    if cs.len() > 1 && fs.iter().any(|f| linear(f, base).is_err()) {
        return Err(CliError::Input("several terms are supported for linear functionals only".into()));
    }
    cs.iter()
        .zip(fs)
        .map(|(c, f)| Ok(Term::new(mmio::read(&base.join(c))?, spec(f, base)?)))
        .collect()
}

fn linear(f: &FunctionalDoc, base: &Path) -> Result<LinearFunctional, CliError> {
    match f {
        FunctionalDoc::Trace => Ok(LinearFunctional::Identity),
        FunctionalDoc::RankOne { u, v } => Ok(LinearFunctional::RankOne { u: u.clone(), v: v.clone() }),
        FunctionalDoc::Dense { h } => Ok(LinearFunctional::Dense(mmio::read(&base.join(h))?)),
        _ => Err(CliError::Input("expected a linear functional".into())),
    }
}

fn spec(f: &FunctionalDoc, base: &Path) -> Result<FunctionalSpec, CliError> {
    Ok(match f {
        FunctionalDoc::Trace | FunctionalDoc::RankOne { .. } | FunctionalDoc::Dense { .. } => {
            FunctionalSpec::Linear(linear(f, base)?)
        }
        FunctionalDoc::TracePower { p } => {
            if !(2..=12).contains(p) {
                return Err(CliError::Input(format!("trace_power needs 2 ≤ p ≤ 12, got {p}")));
            }
            FunctionalSpec::PowerTrace(*p)
        }
        FunctionalDoc::FrobeniusSq => FunctionalSpec::FrobeniusSq,
        FunctionalDoc::TraceInverse => FunctionalSpec::InverseTrace,
        FunctionalDoc::TraceExpNeg => FunctionalSpec::TracePsi(PsiKind::ExpNeg),
        FunctionalDoc::TraceSqrt => FunctionalSpec::TracePsi(PsiKind::Sqrt),
        FunctionalDoc::GOfLinear { g, h } => FunctionalSpec::GOfLinear {
            g: match g {
                GDoc::ExpNeg => ScalarFn::ExpNeg,
                GDoc::Log => ScalarFn::Log,
            },
            h: linear(h, base)?,
        },
    })
}
