//! Flat `key=value` evaluation reports.
//!
//! One entry per line, `#` starts a comment line. Keys:
//!
//! - `images`, `pixels`, `classes`, `include_background`
//! - `class.<name>.iou`, `class.<name>.f1`
//! - `mean.iou`, `mean.f1`
//! - `group.<name>.iou`, `group.<name>.f1`
//!
//! Scores are printed with Rust's shortest round-trip float formatting;
//! classes absent from both masks read `undefined`.

use std::collections::BTreeMap;
use std::fmt::Write;

use tanhpolar::metrics::{ClassScore, Scores};

pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub images: usize,
    pub pixels: u64,
    pub class_names: Vec<String>,
    pub scores: Scores,
    pub groups: Vec<(String, Option<ClassScore>)>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v}"))
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = String::from("# tanhpolar evaluation report\n");
        let _ = writeln!(out, "images={}", self.images);
        let _ = writeln!(out, "pixels={}", self.pixels);
        let _ = writeln!(out, "classes={}", self.class_names.len());
        let _ = writeln!(out, "include_background={}", self.scores.includes_background);
        for (name, s) in self.class_names.iter().zip(&self.scores.per_class) {
            let _ = writeln!(out, "class.{name}.iou={}", fmt_opt(s.map(|s| s.iou)));
            let _ = writeln!(out, "class.{name}.f1={}", fmt_opt(s.map(|s| s.f1)));
        }
        let _ = writeln!(out, "mean.iou={}", fmt_opt(self.scores.mean_iou));
        let _ = writeln!(out, "mean.f1={}", fmt_opt(self.scores.mean_f1));
        for (name, s) in &self.groups {
            let _ = writeln!(out, "group.{name}.iou={}", fmt_opt(s.map(|s| s.iou)));
            let _ = writeln!(out, "group.{name}.f1={}", fmt_opt(s.map(|s| s.f1)));
        }
        out
    }
}

/// Parses any `key=value` document into a sorted map.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got {line:?}", n + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Reads a score entry; `None` for `undefined`.
pub fn score(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, String> {
    match map.get(key).map(String::as_str) {
        None => Err(format!("missing key {key}")),
        Some(UNDEFINED) => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| format!("{key}: bad number {v:?}")),
    }
}
