//! Line-oriented text format for trees, and CSV for profiles.
//!
//! ```text
//! # tree x=1 alpha=-0.5 omega_minus=2 x_min=0.01 horizon=inf max_generation=4294967295 max_cells=10000000
//! cell <label> <birth_time> <birth_size> <age> killed:<x_min>|capped|horizon
//! atom <first_generation> killed|diffuse|horizon|capped <time> <size> <mass> <height>
//! ```

use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use super::{AreaProfile, AtomKind, CellRecord, CellTree, MassAtom, Truncation, TruncationPolicy};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn kind_name(k: AtomKind) -> &'static str {
    match k {
        AtomKind::Killed => "killed",
        AtomKind::Diffuse => "diffuse",
        AtomKind::Horizon => "horizon",
        AtomKind::Capped => "capped",
    }
}

pub fn tree_text(tree: &CellTree) -> String {
    let p = &tree.policy;
    let mut s = String::new();
    writeln!(
        s,
        "# tree x={} alpha={} omega_minus={} x_min={} horizon={} max_generation={} max_cells={}",
        tree.x, tree.alpha, tree.omega_minus, p.x_min, p.horizon, p.max_generation, p.max_cells
    )
    .unwrap();
    for r in &tree.records {
        let flag = match r.truncation {
            Truncation::KilledBelow(x) => format!("killed:{x}"),
            Truncation::GenerationCapped => "capped".into(),
            Truncation::Horizon => "horizon".into(),
        };
        writeln!(s, "cell {} {} {} {} {}", r.label, r.birth_time, r.birth_size, r.age, flag).unwrap();
    }
    for a in &tree.atoms {
        writeln!(s, "atom {} {} {} {} {} {}", a.first_generation, kind_name(a.kind), a.time, a.size, a.mass, a.height)
            .unwrap();
    }
    s
}

pub fn parse_tree_text(text: &str) -> Result<CellTree, FormatError> {
    let mut header: Option<HashMap<String, String>> = None;
    let mut records = Vec::new();
    let mut atoms = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |m: String| FormatError { line, message: m };
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix("# tree") {
            let mut kv = HashMap::new();
            for item in rest.split_whitespace() {
                let (k, v) = item.split_once('=').ok_or_else(|| err(format!("bad header field {item:?}")))?;
                kv.insert(k.to_string(), v.to_string());
            }
            header = Some(kv);
            continue;
        }
        if l.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = l.split_whitespace().collect();
        let num = |k: usize| -> Result<f64, FormatError> {
            f.get(k).ok_or_else(|| err("missing field".into()))?.parse::<f64>().map_err(|e| err(e.to_string()))
        };
        match f[0] {
            "cell" if f.len() == 6 => {
                let label = f[1].parse().map_err(err)?;
                let truncation = match f[5] {
                    "capped" => Truncation::GenerationCapped,
                    "horizon" => Truncation::Horizon,
                    other => match other.strip_prefix("killed:").map(str::parse::<f64>) {
                        Some(Ok(x)) => Truncation::KilledBelow(x),
                        _ => return Err(err(format!("bad flag {other:?}"))),
                    },
                };
                records.push(CellRecord { label, birth_time: num(2)?, birth_size: num(3)?, age: num(4)?, truncation });
            }
            "atom" if f.len() == 7 => {
                let kind = match f[2] {
                    "killed" => AtomKind::Killed,
                    "diffuse" => AtomKind::Diffuse,
                    "horizon" => AtomKind::Horizon,
                    "capped" => AtomKind::Capped,
                    other => return Err(err(format!("bad atom kind {other:?}"))),
                };
                let first_generation = f[1].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
                atoms.push(MassAtom {
                    first_generation,
                    kind,
                    time: num(3)?,
                    size: num(4)?,
                    mass: num(5)?,
                    height: num(6)?,
                });
            }
            _ => return Err(err(format!("unrecognised record {l:?}"))),
        }
    }
    let h = header.ok_or(FormatError { line: 1, message: "missing '# tree' header".into() })?;
    let get = |k: &str| -> Result<f64, FormatError> {
        h.get(k)
            .ok_or_else(|| FormatError { line: 1, message: format!("header lacks {k}") })?
            .parse::<f64>()
            .map_err(|e| FormatError { line: 1, message: format!("{k}: {e}") })
    };
    Ok(CellTree {
        x: get("x")?,
        alpha: get("alpha")?,
        omega_minus: get("omega_minus")?,
        policy: TruncationPolicy {
            x_min: get("x_min")?,
            horizon: get("horizon")?,
            max_generation: get("max_generation")? as u32,
            max_cells: get("max_cells")? as usize,
        },
        records,
        atoms,
        stream_key: None,
    })
}

/// `t,A` rows, one per breakpoint.
pub fn profile_csv(profile: &AreaProfile) -> String {
    let mut s = String::from("t,A\n");
    for (t, a) in profile.breakpoints.iter().zip(&profile.cumulative) {
        writeln!(s, "{t},{a}").unwrap();
    }
    s
}
