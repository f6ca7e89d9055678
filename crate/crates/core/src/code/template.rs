//! Frozen/editable discipline for code templates. Editable regions are
//! delimited by `/*<editable>*/` and `/*</editable>*/`, either on lines of
//! their own or both on one line (an inline hole).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Coded;

pub const OPEN_MARKER: &str = "/*<editable>*/";
pub const CLOSE_MARKER: &str = "/*</editable>*/";

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum TemplateError {
    /// `line` is 1-based in the student's source.
    #[error("frozen line {line} was edited")]
    FrozenEdited { line: usize },
    /// `line` is 1-based in the template.
    #[error("malformed template at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl Coded for TemplateError {
    fn code(&self) -> &'static str {
        match self {
            TemplateError::FrozenEdited { .. } => "TEMPLATE_FROZEN_EDITED",
            TemplateError::Malformed { .. } => "TEMPLATE_MALFORMED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece {
    Frozen(String),
    /// Marker line opening a multi-line region.
    Open(String),
    /// Marker line closing a multi-line region.
    Close(String),
    /// One line whose text between the markers is free.
    Inline {
        prefix: String,
        suffix: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub pieces: Vec<Piece>,
}

pub fn parse_template(text: &str) -> Result<Template, TemplateError> {
    let mut pieces = Vec::new();
    let mut open = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        let malformed = |message: &str| TemplateError::Malformed {
            line: idx + 1,
            message: message.to_string(),
        };
        let (o, c) = (line.matches(OPEN_MARKER).count(), line.matches(CLOSE_MARKER).count());
        let piece = match (o, c) {
            (0, 0) => Piece::Frozen(line.to_string()),
            (1, 0) if line.trim() == OPEN_MARKER => {
                if open {
                    return Err(malformed("nested editable region"));
                }
                open = true;
                Piece::Open(line.to_string())
            }
            (0, 1) if line.trim() == CLOSE_MARKER => {
                if !open {
                    return Err(malformed("closing marker without an open region"));
                }
                open = false;
                Piece::Close(line.to_string())
            }
            (1, 1) => {
                let start = line.find(OPEN_MARKER).unwrap();
                let end = line.find(CLOSE_MARKER).unwrap();
                if end < start || open {
                    return Err(malformed("misplaced inline markers"));
                }
                Piece::Inline {
                    prefix: line[..start + OPEN_MARKER.len()].to_string(),
                    suffix: line[end..].to_string(),
                }
            }
            _ => return Err(malformed("marker must stand alone on its line")),
        };
        if open && !matches!(piece, Piece::Open(_)) {
            // region interior: template content there is only a suggestion
            if let Piece::Frozen(_) = piece {
                continue;
            }
        }
        pieces.push(piece);
    }
    if open {
        return Err(TemplateError::Malformed {
            line: text.lines().count(),
            message: "unclosed editable region".to_string(),
        });
    }
    Ok(Template { pieces })
}

/// Lists every frozen source line that differs from the template. Lines are
/// compared without trailing whitespace.
pub fn check_template_respect(source: &str, template: &str) -> Result<Vec<TemplateError>, TemplateError> {
    let template = parse_template(template)?;
    let lines: Vec<&str> = source.lines().map(str::trim_end).collect();
    let mut out: Vec<TemplateError> = Vec::new();
    let report = |line: usize, out: &mut Vec<TemplateError>| {
        let e = TemplateError::FrozenEdited { line };
        if !out.contains(&e) {
            out.push(e);
        }
    };
    let mut cur = 0usize;
    for piece in &template.pieces {
        match piece {
            Piece::Frozen(t) | Piece::Open(t) => {
                if lines.get(cur) != Some(&t.as_str()) {
                    report(cur + 1, &mut out);
                }
                cur += 1;
            }
            Piece::Close(t) => {
                // the region absorbs everything up to the closing marker
                match lines[cur.min(lines.len())..].iter().position(|l| l == t) {
                    Some(k) => cur += k + 1,
                    None => {
                        report(cur + 1, &mut out);
                        cur += 1;
                    }
                }
            }
            Piece::Inline { prefix, suffix } => {
                let ok = lines.get(cur).is_some_and(|l| {
                    l.len() >= prefix.len() + suffix.len()
                        && l.starts_with(prefix.as_str())
                        && l.ends_with(suffix.as_str())
                });
                if !ok {
                    report(cur + 1, &mut out);
                }
                cur += 1;
            }
        }
    }
    for extra in cur..lines.len() {
        report(extra + 1, &mut out);
    }
    Ok(out)
}
