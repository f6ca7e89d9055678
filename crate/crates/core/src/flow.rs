//! Structural validation of resolution flows, blank drawings and whole
//! statements. Violations are returned as values.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::code::template::parse_template;
use crate::library::load_library;
use crate::model::{BoxColor, ElementKind, Phase, ProductionKind, ResolutionFlow, Statement};
use crate::Coded;

/// One broken invariant, with a machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub detail: String,
}

impl Violation {
    fn new(code: &str, detail: impl Into<String>) -> Self {
        Violation {
            code: code.to_string(),
            detail: detail.into(),
        }
    }
}

pub fn validate_resolution_flow(flow: &ResolutionFlow) -> Vec<Violation> {
    let mut out = Vec::new();
    if flow.productions.is_empty() {
        out.push(Violation::new("FLOW_EMPTY", "the flow has no production"));
        return out;
    }

    let mut seen = BTreeSet::new();
    for p in &flow.productions {
        if !seen.insert(p.id.as_str()) {
            out.push(Violation::new("FLOW_DUPLICATE_ID", &p.id));
        }
    }

    let mut orders: Vec<u32> = flow.productions.iter().map(|p| p.order).collect();
    orders.sort_unstable();
    let expected: Vec<u32> = (1..=flow.productions.len() as u32).collect();
    if orders != expected {
        out.push(Violation::new(
            "FLOW_ORDER_GAP",
            format!("order indices {orders:?} are not 1..{}", flow.productions.len()),
        ));
    }

    for p in &flow.productions {
        let bad = match p.kind {
            ProductionKind::Code => p.phase != Phase::Concrete,
            ProductionKind::Gli => p.phase != Phase::Abstraction,
            _ => false,
        };
        if bad {
            out.push(Violation::new(
                "FLOW_KIND_PHASE",
                format!("{} of kind {:?} cannot sit in phase {:?}", p.id, p.kind, p.phase),
            ));
        }
    }

    let ordered = flow.ordered();
    let first_concrete = ordered.iter().find(|p| p.phase == Phase::Concrete).map(|p| p.order);
    if let Some(first) = first_concrete {
        for p in ordered
            .iter()
            .filter(|p| p.phase == Phase::Abstraction && p.order > first)
        {
            out.push(Violation::new(
                "FLOW_PHASE_ORDER",
                format!("abstraction production {} follows a concrete one", p.id),
            ));
        }
    }
    let has = |phase| flow.productions.iter().any(|p| p.phase == phase);
    if !has(Phase::Abstraction) && !has(Phase::Bridge) {
        out.push(Violation::new("FLOW_MISSING_PHASE", "no abstraction phase"));
    }
    if !has(Phase::Concrete) {
        out.push(Violation::new("FLOW_MISSING_PHASE", "no concrete phase"));
    }

    let order_of: HashMap<&str, u32> = flow.productions.iter().map(|p| (p.id.as_str(), p.order)).collect();
    for lock in &flow.locks {
        match (
            order_of.get(lock.blocked.as_str()),
            order_of.get(lock.prerequisite.as_str()),
        ) {
            (Some(b), Some(pre)) if pre < b => {}
            (Some(_), Some(_)) => out.push(Violation::new(
                "FLOW_LOCK_ORDER",
                format!("{} cannot wait for later {}", lock.blocked, lock.prerequisite),
            )),
            _ => out.push(Violation::new(
                "FLOW_LOCK_UNKNOWN",
                format!("{} <- {}", lock.blocked, lock.prerequisite),
            )),
        }
    }
    out
}

pub fn validate_descriptor(d: &crate::model::BlankGliDescriptor) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut numbers: Vec<u32> = d.boxes.iter().map(|b| b.number).collect();
    numbers.sort_unstable();
    let expected: Vec<u32> = (1..=d.boxes.len() as u32).collect();
    if numbers != expected {
        out.push(Violation::new(
            "GLI_BOX_NUMBERING",
            format!("box numbers {numbers:?} are not unique and contiguous from 1"),
        ));
    }
    if d.bars.is_empty() {
        out.push(Violation::new("GLI_NO_BAR", "at least one movable bar is required"));
    }
    let elements: HashMap<&str, ElementKind> = d.elements.iter().map(|e| (e.id.as_str(), e.kind)).collect();
    for b in &d.boxes {
        if !elements.contains_key(b.anchor.as_str()) {
            out.push(Violation::new(
                "GLI_BAD_ANCHOR",
                format!("box {} anchored to unknown element {}", b.number, b.anchor),
            ));
        }
        if b.achieved && b.color != BoxColor::Green {
            out.push(Violation::new(
                "GLI_BAD_ANCHOR",
                format!("box {} marks achieved work but is not green", b.number),
            ));
        }
    }
    let mut bar_ids = BTreeSet::new();
    for bar in &d.bars {
        if !bar_ids.insert(bar.id.as_str()) {
            out.push(Violation::new("GLI_DUPLICATE_BAR", &bar.id));
        }
        if let Some(slot) = bar.slot {
            if d.find_box(slot).map(|b| b.color) != Some(BoxColor::Red) {
                out.push(Violation::new(
                    "GLI_BAD_SLOT",
                    format!("bar {} slot {slot} is not a red box", bar.id),
                ));
            }
        }
    }
    let pairs = d
        .bounds
        .iter()
        .map(|p| (&p.lower, &p.upper))
        .chain(d.constraints.iter().map(|c| (&c.lower, &c.upper)));
    for (lower, upper) in pairs {
        for id in [lower, upper] {
            if !bar_ids.contains(id.as_str()) {
                out.push(Violation::new("GLI_UNKNOWN_BAR", id));
            }
        }
    }
    out
}

/// Every invariant a statement must satisfy before it can be published.
pub fn validate_statement(st: &Statement) -> Vec<Violation> {
    let mut out = validate_resolution_flow(&st.flow);
    out.extend(validate_descriptor(&st.gli));

    let mut ids = BTreeSet::new();
    for o in &st.label_options {
        if !ids.insert(o.id.as_str()) {
            out.push(Violation::new("LABEL_DUPLICATE_ID", &o.id));
        }
    }
    if st.window.opens_at >= st.window.closes_at {
        out.push(Violation::new("WINDOW_INVERTED", "opens_at must precede closes_at"));
    }
    if !(st.weight_percent >= 0.0 && st.weight_percent.is_finite()) {
        out.push(Violation::new("WEIGHT_INVALID", st.weight_percent.to_string()));
    } else if (st.weight_percent == 0.0) != st.formative_only {
        out.push(Violation::new(
            "WEIGHT_FORMATIVE_MISMATCH",
            "weight_percent is 0 exactly when the statement is formative-only",
        ));
    }
    if let Err(e) = parse_template(&st.code_template) {
        out.push(Violation::new(e.code(), e.to_string()));
    }
    if let Err(e) = load_library(&st.rubric_bindings) {
        out.push(Violation::new(e.code(), e.to_string()));
    }
    out
}
