//! Line-based text formats for circuits.
//!
//! ```text
//! putput-pc v1
//! <id> L <var> <0|1>
//! <id> P <child> <child> ...
//! <id> S <child>:<weight> ...
//! root <id>
//! ```
//!
//! Logical circuits use the header `putput-lc v1` with `A`/`O` in place of `P`/`S`
//! and no weights. The empty circuit is written as `root none`.

use std::fmt::Write as _;
use std::path::Path;

use super::{Literal, LogicCircuit, Node, NodeId, ProbCircuit, Unit};
use crate::error::{Error, Result};

const PC_HEADER: &str = "putput-pc v1";
const LC_HEADER: &str = "putput-lc v1";

pub fn write_pc(pc: &ProbCircuit) -> String {
    let mut s = String::new();
    writeln!(s, "{}", PC_HEADER).unwrap();
    for (id, node) in pc.nodes().iter().enumerate() {
        write!(s, "{}", id).unwrap();
        match node {
            Node::Input(lit) => write!(s, " L {} {}", lit.var, lit.positive as u8).unwrap(),
            Node::Product { children } => {
                s.push_str(" P");
                for c in children {
                    write!(s, " {}", c).unwrap();
                }
            }
            Node::Sum { children, weights } => {
                s.push_str(" S");
                for (c, w) in children.iter().zip(weights) {
                    write!(s, " {}:{}", c, w).unwrap();
                }
            }
        }
        s.push('\n');
    }
    write_root(&mut s, pc.root());
    s
}

pub fn write_lc(lc: &LogicCircuit) -> String {
    let mut s = String::new();
    writeln!(s, "{}", LC_HEADER).unwrap();
    for (id, unit) in lc.units().iter().enumerate() {
        write!(s, "{}", id).unwrap();
        match unit {
            Unit::Input(lit) => write!(s, " L {} {}", lit.var, lit.positive as u8).unwrap(),
            Unit::And(c) | Unit::Or(c) => {
                s.push_str(if matches!(unit, Unit::And(_)) { " A" } else { " O" });
                for c in c {
                    write!(s, " {}", c).unwrap();
                }
            }
        }
        s.push('\n');
    }
    write_root(&mut s, lc.root());
    s
}

fn write_root(s: &mut String, root: Option<NodeId>) {
    match root {
        Some(r) => writeln!(s, "root {}", r).unwrap(),
        None => writeln!(s, "root none").unwrap(),
    }
}

pub fn read_pc(path: &Path) -> Result<ProbCircuit> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pc(&text, &path.display().to_string())
}

pub fn read_lc(path: &Path) -> Result<LogicCircuit> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lc(&text, &path.display().to_string())
}

enum Line<T> {
    Item(T),
    Root(Option<NodeId>),
}

/// Shared line walker: header check, dense ids, children-before-parents, final root line.
fn parse_lines<T>(
    text: &str,
    origin: &str,
    header: &str,
    mut item: impl FnMut(&str, &[&str], usize) -> std::result::Result<(T, Vec<NodeId>), String>,
) -> Result<(Vec<T>, Option<NodeId>)> {
    let mut items = Vec::new();
    let mut root = None;
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != header {
                return Err(Error::parse(origin, lineno, format!("expected header `{}`", header)));
            }
            saw_header = true;
            continue;
        }
        if root.is_some() {
            return Err(Error::parse(origin, lineno, "content after the root line"));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = if fields[0] == "root" {
            match fields.get(1..) {
                Some(["none"]) => Line::Root(None),
                Some([id]) => {
                    let id: NodeId = id
                        .parse()
                        .map_err(|_| Error::parse(origin, lineno, format!("bad root id `{}`", id)))?;
                    if id >= items.len() {
                        return Err(Error::parse(origin, lineno, format!("root {} is not declared", id)));
                    }
                    Line::Root(Some(id))
                }
                _ => return Err(Error::parse(origin, lineno, "expected `root <id>`")),
            }
        } else {
            let id: NodeId = fields[0]
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad node id `{}`", fields[0])))?;
            if id != items.len() {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("node ids must be dense; expected {}, found {}", items.len(), id),
                ));
            }
            let kind = fields.get(1).copied().unwrap_or("");
            let (t, children) = item(kind, &fields[2.min(fields.len())..], id)
                .map_err(|m| Error::parse(origin, lineno, m))?;
            if let Some(c) = children.iter().find(|&&c| c >= id) {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("dangling child reference {} (children must be declared first)", c),
                ));
            }
            Line::Item(t)
        };
        match parsed {
            Line::Item(t) => items.push(t),
            Line::Root(r) => root = Some(r),
        }
    }
    if !saw_header {
        return Err(Error::parse(origin, 1, format!("expected header `{}`", header)));
    }
    match root {
        Some(r) => Ok((items, r)),
        None => Err(Error::parse(origin, text.lines().count().max(1), "missing root line")),
    }
}

fn parse_literal(args: &[&str]) -> std::result::Result<Literal, String> {
    match args {
        [var, pol] => {
            let var = var.parse().map_err(|_| format!("bad variable `{}`", var))?;
            let positive = match *pol {
                "1" => true,
                "0" => false,
                p => return Err(format!("polarity must be 0 or 1, found `{}`", p)),
            };
            Ok(Literal { var, positive })
        }
        _ => Err("input line needs `<var> <0|1>`".into()),
    }
}

fn parse_ids(args: &[&str]) -> std::result::Result<Vec<NodeId>, String> {
    args.iter()
        .map(|a| a.parse().map_err(|_| format!("bad child id `{}`", a)))
        .collect()
}

pub fn parse_pc(text: &str, origin: &str) -> Result<ProbCircuit> {
    let (nodes, root) = parse_lines(text, origin, PC_HEADER, |kind, args, _| match kind {
        "L" => Ok((Node::Input(parse_literal(args)?), vec![])),
        "P" => {
            let children = parse_ids(args)?;
            Ok((Node::Product { children: children.clone() }, children))
        }
        "S" => {
            let mut children = Vec::with_capacity(args.len());
            let mut weights = Vec::with_capacity(args.len());
            for a in args {
                let (c, w) = a
                    .split_once(':')
                    .ok_or_else(|| format!("sum edge `{}` is not `<child>:<weight>`", a))?;
                children.push(c.parse().map_err(|_| format!("bad child id `{}`", c))?);
                let w: f64 = w.parse().map_err(|_| format!("malformed weight `{}`", w))?;
                if !w.is_finite() {
                    return Err(format!("malformed weight `{}`", w));
                }
                weights.push(w);
            }
            Ok((
                Node::Sum {
                    children: children.clone(),
                    weights,
                },
                children,
            ))
        }
        k => Err(format!("unknown node kind `{}`", k)),
    })?;
    match root {
        Some(r) => ProbCircuit::new(nodes, r),
        None => Ok(ProbCircuit::empty()),
    }
}

pub fn parse_lc(text: &str, origin: &str) -> Result<LogicCircuit> {
    let (units, root) = parse_lines(text, origin, LC_HEADER, |kind, args, _| match kind {
        "L" => Ok((Unit::Input(parse_literal(args)?), vec![])),
        "A" => {
            let c = parse_ids(args)?;
            Ok((Unit::And(c.clone()), c))
        }
        "O" => {
            let c = parse_ids(args)?;
            Ok((Unit::Or(c.clone()), c))
        }
        k => Err(format!("unknown unit kind `{}`", k)),
    })?;
    match root {
        Some(r) => LogicCircuit::new(units, r),
        None => Ok(LogicCircuit::falsum()),
    }
}
