//! The misconception rubric: records describing typical mistakes and the
//! declarative rule instances that detect them.
//!
//! A library is loaded from a versioned JSON document:
//!
//! ```json
//! {"version": 1,
//!  "records": [{"code": "E-GLI-BOUNDS", "production": "Gli", "nature": "Syntactic",
//!               "gravity": 2, "message": "...", "feedforward": "Chapter 3"}],
//!  "rules": [{"code": "E-GLI-BOUNDS", "predicate": "BoundsOrdered", "params": {}}]}
//! ```

mod checker;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::expr::{parse_expression, Expr};
use crate::model::ProductionKind;
use crate::Coded;

pub use checker::{instantiate_checker, Checker, Outcome};

pub const LIBRARY_VERSION: u32 = 1;

/// Reported when a checker cannot evaluate its own inputs.
pub const E_EVAL: &str = "E-EVAL";
/// Reported when a consistency check lacks an input (no program, no trace...).
pub const E_UNCHECKABLE: &str = "E-CONSISTENCY-UNCHECKABLE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Nature {
    Syntactic,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisconceptionRecord {
    pub code: String,
    pub production: ProductionKind,
    pub nature: Nature,
    /// Points deducted from the production when detected.
    pub gravity: i64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedforward: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredicateKind {
    BoxEquals,
    BoxParses,
    BoxBlank,
    LabelIs,
    BoundsOrdered,
    GuardEquivalent,
    StopConditionMatches,
    VarDeclared,
    VarInitializedTo,
    VariantValid,
    OutputMatchesTests,
    TemplateRespected,
}

impl PredicateKind {
    /// Production kinds a rule of this kind can be attached to.
    pub fn compatible_with(self, kind: ProductionKind) -> bool {
        use PredicateKind::*;
        use ProductionKind as P;
        match self {
            BoxEquals => matches!(kind, P::Gli | P::InitialRepresentation | P::FinalRepresentation),
            BoxParses | BoxBlank | LabelIs | BoundsOrdered => kind == P::Gli,
            StopConditionMatches => kind == P::FinalRepresentation,
            VariantValid => kind == P::VariantFunction,
            GuardEquivalent | VarDeclared | VarInitializedTo | OutputMatchesTests | TemplateRespected => {
                kind == P::Code
            }
        }
    }
}

impl fmt::Display for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDocument {
    pub code: String,
    pub predicate: PredicateKind,
    #[serde(default)]
    pub params: Map<String, Json>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryDocument {
    pub version: u32,
    pub records: Vec<MisconceptionRecord>,
    #[serde(default)]
    pub rules: Vec<RuleDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LibError {
    #[error("duplicate misconception code {0}")]
    DuplicateCode(String),
    #[error("record {code} has negative gravity {gravity}")]
    BadGravity { code: String, gravity: i64 },
    #[error("rule {predicate} cannot check {code}, a {production:?} misconception")]
    IncompatibleRule {
        code: String,
        predicate: PredicateKind,
        production: ProductionKind,
    },
    #[error("unknown misconception code {0}")]
    UnknownCode(String),
    #[error("rule {predicate} for {code}: {message}")]
    BadParams {
        code: String,
        predicate: PredicateKind,
        message: String,
    },
    #[error("unsupported library version {0}")]
    UnsupportedVersion(u32),
    #[error("library document is not valid: {0}")]
    Parse(String),
}

impl Coded for LibError {
    fn code(&self) -> &'static str {
        match self {
            LibError::DuplicateCode(_) => "LIB_DUPLICATE_CODE",
            LibError::BadGravity { .. } => "LIB_BAD_GRAVITY",
            LibError::IncompatibleRule { .. } => "LIB_INCOMPATIBLE_RULE",
            LibError::UnknownCode(_) => "LIB_UNKNOWN_CODE",
            LibError::BadParams { .. } => "LIB_BAD_PARAMS",
            LibError::UnsupportedVersion(_) => "LIB_UNSUPPORTED_VERSION",
            LibError::Parse(_) => "LIB_PARSE",
        }
    }
}

/// Where a `BoxEquals` rule reads its expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Box(u32),
    Bar(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantViolation {
    NotDecreasing,
    Negative,
    NonzeroAtExit,
}

/// Expected initial value of a variable at the first guard test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitExpectation {
    Expr {
        var: String,
        expected: Expr,
    },
    /// Every bar whose position is a plain variable must start where the
    /// initial representation puts it.
    FromInitialRepresentation,
}

/// A typed, validated rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    BoxEquals {
        target: Target,
        expected: Expr,
    },
    BoxParses {
        number: Option<u32>,
    },
    BoxBlank {
        number: Option<u32>,
    },
    LabelIs {
        number: u32,
        expected: Option<String>,
    },
    BoundsOrdered,
    GuardEquivalent {
        loop_id: u32,
        reference: Option<Expr>,
    },
    StopConditionMatches {
        expected: Expr,
    },
    VarDeclared,
    VarInitializedTo {
        loop_id: u32,
        expectation: InitExpectation,
    },
    VariantValid {
        loop_id: u32,
        violation: Option<VariantViolation>,
    },
    OutputMatchesTests {
        cases: Option<Vec<usize>>,
    },
    TemplateRespected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleInstance {
    pub code: String,
    pub rule: Rule,
    /// The document the rule was read from, kept for serialization.
    pub source: RuleDocument,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Library {
    pub version: u32,
    /// In declaration order, built-in records last.
    pub records: Vec<MisconceptionRecord>,
    pub rules: Vec<RuleInstance>,
    index: BTreeMap<String, usize>,
}

fn builtin_records() -> [MisconceptionRecord; 2] {
    [
        MisconceptionRecord {
            code: E_EVAL.to_string(),
            production: ProductionKind::Generic,
            nature: Nature::Semantic,
            gravity: 0,
            message: "This answer could not be evaluated.".to_string(),
            feedforward: None,
        },
        MisconceptionRecord {
            code: E_UNCHECKABLE.to_string(),
            production: ProductionKind::Generic,
            nature: Nature::Semantic,
            gravity: 0,
            message: "Consistency between the drawing and the code could not be checked.".to_string(),
            feedforward: None,
        },
    ]
}

/// Validates a library document. Codes must be unique, gravities
/// non-negative and each rule compatible with its record's production kind.
pub fn load_library(doc: &LibraryDocument) -> Result<Library, LibError> {
    if doc.version != LIBRARY_VERSION {
        return Err(LibError::UnsupportedVersion(doc.version));
    }
    let mut records = Vec::new();
    let mut index = BTreeMap::new();
    for r in &doc.records {
        if index.insert(r.code.clone(), records.len()).is_some() {
            return Err(LibError::DuplicateCode(r.code.clone()));
        }
        if r.gravity < 0 {
            return Err(LibError::BadGravity {
                code: r.code.clone(),
                gravity: r.gravity,
            });
        }
        records.push(r.clone());
    }
    for b in builtin_records() {
        if !index.contains_key(&b.code) {
            index.insert(b.code.clone(), records.len());
            records.push(b);
        }
    }
    let mut rules = Vec::new();
    for doc in &doc.rules {
        let record = index
            .get(&doc.code)
            .map(|&i| &records[i])
            .ok_or_else(|| LibError::UnknownCode(doc.code.clone()))?;
        if !doc.predicate.compatible_with(record.production) {
            return Err(LibError::IncompatibleRule {
                code: doc.code.clone(),
                predicate: doc.predicate,
                production: record.production,
            });
        }
        let rule = parse_rule(doc, record.production)?;
        rules.push(RuleInstance {
            code: doc.code.clone(),
            rule,
            source: doc.clone(),
        });
    }
    Ok(Library {
        version: doc.version,
        records,
        rules,
        index,
    })
}

/// Parses and loads a JSON library document.
pub fn load_library_json(text: &str) -> Result<Library, LibError> {
    let doc: LibraryDocument = serde_json::from_str(text).map_err(|e| LibError::Parse(e.to_string()))?;
    load_library(&doc)
}

impl Library {
    pub fn lookup(&self, code: &str) -> Result<&MisconceptionRecord, LibError> {
        self.index
            .get(code)
            .map(|&i| &self.records[i])
            .ok_or_else(|| LibError::UnknownCode(code.to_string()))
    }

    pub fn serialize(&self) -> LibraryDocument {
        LibraryDocument {
            version: self.version,
            records: self.records.clone(),
            rules: self.rules.iter().map(|r| r.source.clone()).collect(),
        }
    }
}

mod params {
    use serde::Deserialize;

    use super::VariantViolation;

    fn one() -> u32 {
        1
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct BoxEquals {
        #[serde(rename = "box")]
        pub number: Option<u32>,
        pub bar: Option<String>,
        pub expected: String,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct OptionalBox {
        #[serde(rename = "box")]
        pub number: Option<u32>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct LabelIs {
        #[serde(rename = "box")]
        pub number: u32,
        pub expected: Option<String>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Nothing {}

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct GuardEquivalent {
        #[serde(rename = "loop", default = "one")]
        pub loop_id: u32,
        pub reference: Option<String>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Expected {
        pub expected: String,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct VarInitializedTo {
        #[serde(rename = "loop", default = "one")]
        pub loop_id: u32,
        pub var: Option<String>,
        pub expected: Option<String>,
        pub from: Option<String>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct VariantValid {
        #[serde(rename = "loop", default = "one")]
        pub loop_id: u32,
        pub violation: Option<VariantViolation>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct OutputMatchesTests {
        pub cases: Option<Vec<usize>>,
    }
}

fn parse_rule(doc: &RuleDocument, production: ProductionKind) -> Result<Rule, LibError> {
    let bad = |message: String| LibError::BadParams {
        code: doc.code.clone(),
        predicate: doc.predicate,
        message,
    };
    fn read<T: serde::de::DeserializeOwned>(doc: &RuleDocument) -> Result<T, String> {
        serde_json::from_value(Json::Object(doc.params.clone())).map_err(|e| e.to_string())
    }
    let expr = |text: &str| parse_expression(text).map_err(|e| bad(format!("`{text}`: {e}")));
    let nonzero_loop = |id: u32| {
        if id == 0 {
            Err(bad("loops are numbered from 1".to_string()))
        } else {
            Ok(id)
        }
    };

    let rule = match doc.predicate {
        PredicateKind::BoxEquals => {
            let p: params::BoxEquals = read(doc).map_err(bad)?;
            let target = match (p.number, p.bar) {
                (Some(n), None) if production == ProductionKind::Gli => Target::Box(n),
                (Some(_), None) => return Err(bad("box targets only exist on a Gli production".into())),
                (None, Some(bar)) => Target::Bar(bar),
                _ => return Err(bad("exactly one of `box` and `bar` is required".into())),
            };
            Rule::BoxEquals {
                target,
                expected: expr(&p.expected)?,
            }
        }
        PredicateKind::BoxParses => Rule::BoxParses {
            number: read::<params::OptionalBox>(doc).map_err(bad)?.number,
        },
        PredicateKind::BoxBlank => Rule::BoxBlank {
            number: read::<params::OptionalBox>(doc).map_err(bad)?.number,
        },
        PredicateKind::LabelIs => {
            let p: params::LabelIs = read(doc).map_err(bad)?;
            Rule::LabelIs {
                number: p.number,
                expected: p.expected,
            }
        }
        PredicateKind::BoundsOrdered => {
            read::<params::Nothing>(doc).map_err(bad)?;
            Rule::BoundsOrdered
        }
        PredicateKind::GuardEquivalent => {
            let p: params::GuardEquivalent = read(doc).map_err(bad)?;
            Rule::GuardEquivalent {
                loop_id: nonzero_loop(p.loop_id)?,
                reference: p.reference.as_deref().map(expr).transpose()?,
            }
        }
        PredicateKind::StopConditionMatches => Rule::StopConditionMatches {
            expected: expr(&read::<params::Expected>(doc).map_err(bad)?.expected)?,
        },
        PredicateKind::VarDeclared => {
            read::<params::Nothing>(doc).map_err(bad)?;
            Rule::VarDeclared
        }
        PredicateKind::VarInitializedTo => {
            let p: params::VarInitializedTo = read(doc).map_err(bad)?;
            let expectation = match (p.var, p.expected, p.from.as_deref()) {
                (Some(var), Some(e), None) => InitExpectation::Expr {
                    var,
                    expected: expr(&e)?,
                },
                (None, None, Some("initial")) => InitExpectation::FromInitialRepresentation,
                _ => {
                    return Err(bad(
                        "expected either `var` with `expected`, or `from: \"initial\"`".into()
                    ))
                }
            };
            Rule::VarInitializedTo {
                loop_id: nonzero_loop(p.loop_id)?,
                expectation,
            }
        }
        PredicateKind::VariantValid => {
            let p: params::VariantValid = read(doc).map_err(bad)?;
            Rule::VariantValid {
                loop_id: nonzero_loop(p.loop_id)?,
                violation: p.violation,
            }
        }
        PredicateKind::OutputMatchesTests => Rule::OutputMatchesTests {
            cases: read::<params::OutputMatchesTests>(doc).map_err(bad)?.cases,
        },
        PredicateKind::TemplateRespected => {
            read::<params::Nothing>(doc).map_err(bad)?;
            Rule::TemplateRespected
        }
    };
    Ok(rule)
}
