//! Shared domain types and their canonical JSON encoding.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::library::LibraryDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProductionKind {
    Gli,
    InitialRepresentation,
    FinalRepresentation,
    VariantFunction,
    Code,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Abstraction,
    Concrete,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Production {
    pub id: String,
    pub kind: ProductionKind,
    pub phase: Phase,
    pub order: u32,
    pub weight: u32,
}

/// `blocked` stays locked until `prerequisite` has been edited.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lock {
    pub blocked: String,
    pub prerequisite: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionFlow {
    pub productions: Vec<Production>,
    #[serde(default)]
    pub locks: Vec<Lock>,
}

impl ResolutionFlow {
    /// Productions sorted by their order index.
    pub fn ordered(&self) -> Vec<&Production> {
        let mut out: Vec<_> = self.productions.iter().collect();
        out.sort_by_key(|p| p.order);
        out
    }

    pub fn production(&self, id: &str) -> Option<&Production> {
        self.productions.iter().find(|p| p.id == id)
    }

    /// First production (in order) of the given kind.
    pub fn first_of_kind(&self, kind: ProductionKind) -> Option<&Production> {
        self.ordered().into_iter().find(|p| p.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxColor {
    Red,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Range,
    Array,
    Region,
    Scalar,
    Bar,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GliElement {
    pub id: String,
    pub kind: ElementKind,
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A numbered placeholder. Red boxes host expressions, green boxes host a
/// label picked from the statement's option list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GliBox {
    pub number: u32,
    pub color: BoxColor,
    /// Id of the element the box is attached to.
    pub anchor: String,
    /// A required red box must not be left blank.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub required: bool,
    /// Marks the green box describing what has been achieved so far.
    #[serde(default, skip_serializing_if = "is_false")]
    pub achieved: bool,
}

/// A movable bar. Its symbolic position is the content of the red box
/// `slot`, unless the filled drawing overrides it in `bar_positions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bar {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<u32>,
}

/// Lower/upper bound bars of a range structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: String,
    pub upper: String,
}

/// Structural ordering of bars valid at every iteration:
/// `position(lower) <= position(upper) + offset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarRelation {
    pub lower: String,
    pub upper: String,
    #[serde(default)]
    pub offset: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlankGliDescriptor {
    pub elements: Vec<GliElement>,
    pub boxes: Vec<GliBox>,
    pub bars: Vec<Bar>,
    #[serde(default)]
    pub bounds: Vec<BoundPair>,
    #[serde(default)]
    pub constraints: Vec<BarRelation>,
}

impl BlankGliDescriptor {
    pub fn find_box(&self, number: u32) -> Option<&GliBox> {
        self.boxes.iter().find(|b| b.number == number)
    }

    pub fn find_bar(&self, id: &str) -> Option<&Bar> {
        self.bars.iter().find(|b| b.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelOption {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub distractor: bool,
}

/// A student's instantiation of a blank drawing. Red-box contents and bar
/// positions are kept as typed text; they are parsed when checked.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilledGli {
    pub descriptor_ref: String,
    #[serde(default)]
    pub red_assignments: BTreeMap<u32, String>,
    #[serde(default)]
    pub green_assignments: BTreeMap<u32, String>,
    #[serde(default)]
    pub bar_positions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub stdin: String,
    pub expected_stdout: String,
}

/// Certificative window `[opens_at, closes_at)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub opens_at: DateTime<Utc>,
    pub closes_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub id: String,
    pub title: String,
    pub prose: String,
    pub flow: ResolutionFlow,
    pub gli: BlankGliDescriptor,
    pub label_options: Vec<LabelOption>,
    pub code_template: String,
    pub test_cases: Vec<TestCase>,
    pub rubric_bindings: LibraryDocument,
    pub window: Window,
    pub weight_percent: f64,
    pub formative_only: bool,
}

/// Content submitted for one production.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Gli(FilledGli),
    /// Bar id to position expression, for initial/final representations.
    Bars(BTreeMap<String, String>),
    Expression(String),
    Source(String),
}

impl Payload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Payload::Gli(_) => "gli",
            Payload::Bars(_) => "bars",
            Payload::Expression(_) => "expression",
            Payload::Source(_) => "source",
        }
    }

    pub fn fits(&self, kind: ProductionKind) -> bool {
        matches!(
            (kind, self),
            (ProductionKind::Gli, Payload::Gli(_))
                | (ProductionKind::InitialRepresentation, Payload::Bars(_))
                | (ProductionKind::FinalRepresentation, Payload::Bars(_))
                | (ProductionKind::VariantFunction, Payload::Expression(_))
                | (ProductionKind::Code, Payload::Source(_))
                | (ProductionKind::Generic, _)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub student_id: String,
    pub statement_id: String,
    pub at: DateTime<Utc>,
    pub payloads: BTreeMap<String, Payload>,
    pub seq: u32,
}
