#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use cafe_core::code::{parse_program, Program};
use cafe_core::model::Payload;
use cafe_core::{Statement, Submission};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn statement() -> Statement {
    let text = fs::read_to_string(fixtures().join("product_range/statement.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn submission(name: &str) -> Submission {
    let path = fixtures()
        .join("product_range/submissions")
        .join(format!("{name}.json"));
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn source_of(s: &Submission) -> &str {
    match &s.payloads["code"] {
        Payload::Source(src) => src,
        other => panic!("code payload is {}", other.kind_name()),
    }
}

pub fn golden_program() -> Program {
    parse_program(source_of(&submission("00-golden"))).unwrap()
}
