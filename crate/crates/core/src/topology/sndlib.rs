//! Reader and writer for the plain-text SNDlib "native" network format.
//!
//! Only the `NODES` and `LINKS` sections are interpreted; any other section
//! (`META`, `DEMANDS`, `ADMISSIBLE_PATHS`, ...) is skipped. Lines starting with
//! `#` or `?` are comments. Every record sits on its own line:
//!
//! ```text
//! NODES (
//!   <name> ( <longitude> <latitude> )
//! )
//! LINKS (
//!   <name> ( <src> <dst> ) [<n1> <n2> <n3> <n4>] [( <module list> )] [<length km>]
//! )
//! ```
//!
//! The four standard numeric link fields and the module list are accepted
//! and ignored. A number following the module list is taken as the link
//! length in kilometres; links without it get the great-circle distance
//! between their endpoints.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{great_circle_km, Link, LinkId, Node, NodeId, Topology, TopologyError};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseErrorKind {
    #[error("malformed {0} section: {1}")]
    Malformed(&'static str, String),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("unterminated section {0}")]
    Unterminated(String),
    #[error("missing NODES section")]
    MissingNodes,
    #[error("{0}")]
    Topology(#[from] TopologyError),
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Outside,
    Nodes,
    Links,
    Skipped,
}

fn tokens(line: &str) -> Vec<String> {
    line.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(str::to_owned).collect()
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn number(tok: &str, line: usize, section: &'static str) -> Result<f64, ParseError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(line, ParseErrorKind::Malformed(section, format!("expected number, got {tok:?}"))))
}

pub fn parse_sndlib(text: &str) -> Result<Topology, ParseError> {
    let mut section = Section::Outside;
    let mut section_name = String::new();
    let mut section_start = 0;
    let mut seen_nodes = false;
    let mut seen_links = false;
    let mut nodes: Vec<Node> = Vec::new();
    let mut by_name: HashMap<String, NodeId> = HashMap::new();
    // (name, a, b, explicit length, line)
    let mut raw_links: Vec<(String, NodeId, NodeId, Option<f64>, usize)> = Vec::new();
    let mut link_names: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('?') {
            continue;
        }
        let toks = tokens(trimmed);
        if toks.len() == 1 && toks[0] == ")" && section != Section::Outside {
            section = Section::Outside;
            continue;
        }
        match section {
            Section::Outside => {
                if toks.len() != 2 || toks[1] != "(" {
                    return Err(err(lineno, ParseErrorKind::Malformed("top-level", format!("unexpected {trimmed:?}"))));
                }
                section_name = toks[0].clone();
                section_start = lineno;
                section = match toks[0].as_str() {
                    "NODES" if !seen_nodes => {
                        seen_nodes = true;
                        Section::Nodes
                    }
                    "LINKS" if !seen_links => {
                        seen_links = true;
                        Section::Links
                    }
                    "NODES" | "LINKS" => return Err(err(lineno, ParseErrorKind::DuplicateId(toks[0].clone()))),
                    _ => Section::Skipped,
                };
            }
            Section::Skipped => {}
            Section::Nodes => {
                let ok = toks.len() == 5 && toks[1] == "(" && toks[4] == ")";
                if !ok {
                    return Err(err(lineno, ParseErrorKind::Malformed("NODES", format!("bad record {trimmed:?}"))));
                }
                let lon = number(&toks[2], lineno, "NODES")?;
                let lat = number(&toks[3], lineno, "NODES")?;
                if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                    return Err(err(lineno, ParseErrorKind::Malformed("NODES", "coordinates out of range".into())));
                }
                let id = NodeId(nodes.len() as u32);
                if by_name.insert(toks[0].clone(), id).is_some() {
                    return Err(err(lineno, ParseErrorKind::DuplicateId(toks[0].clone())));
                }
                nodes.push(Node { id, name: toks[0].clone(), latitude: lat, longitude: lon });
            }
            Section::Links => {
                let ok = toks.len() >= 5 && toks[1] == "(" && toks[4] == ")";
                if !ok {
                    return Err(err(lineno, ParseErrorKind::Malformed("LINKS", format!("bad record {trimmed:?}"))));
                }
                let endpoint = |name: &str| {
                    by_name.get(name).copied().ok_or_else(|| err(lineno, ParseErrorKind::UnknownEndpoint(name.to_owned())))
                };
                let a = endpoint(&toks[2])?;
                let b = endpoint(&toks[3])?;
                let mut rest = toks[5..].iter().peekable();
                let mut standard = 0;
                while let Some(t) = rest.peek() {
                    if *t == "(" {
                        break;
                    }
                    number(t, lineno, "LINKS")?;
                    standard += 1;
                    rest.next();
                }
                if standard > 4 {
                    return Err(err(lineno, ParseErrorKind::Malformed("LINKS", "too many numeric fields".into())));
                }
                let mut length = None;
                if rest.next().is_some() {
                    let mut closed = false;
                    for t in rest.by_ref() {
                        if t == ")" {
                            closed = true;
                            break;
                        }
                        if t == "(" {
                            return Err(err(lineno, ParseErrorKind::Malformed("LINKS", "nested module list".into())));
                        }
                        number(t, lineno, "LINKS")?;
                    }
                    if !closed {
                        return Err(err(lineno, ParseErrorKind::Malformed("LINKS", "unclosed module list".into())));
                    }
                    match (rest.next(), rest.next()) {
                        (None, _) => {}
                        (Some(t), None) => length = Some(number(t, lineno, "LINKS")?),
                        (Some(_), Some(_)) => {
                            return Err(err(lineno, ParseErrorKind::Malformed("LINKS", "trailing tokens".into())))
                        }
                    }
                }
                if link_names.insert(toks[0].clone(), raw_links.len()).is_some() {
                    return Err(err(lineno, ParseErrorKind::DuplicateId(toks[0].clone())));
                }
                raw_links.push((toks[0].clone(), a, b, length, lineno));
            }
        }
    }
    if section != Section::Outside {
        return Err(err(section_start, ParseErrorKind::Unterminated(section_name)));
    }
    if !seen_nodes {
        return Err(err(1, ParseErrorKind::MissingNodes));
    }

    let mut links = Vec::with_capacity(raw_links.len());
    let mut lines = Vec::with_capacity(raw_links.len());
    for (i, (name, a, b, length, lineno)) in raw_links.into_iter().enumerate() {
        let length_km = length.unwrap_or_else(|| {
            let (na, nb) = (&nodes[a.index()], &nodes[b.index()]);
            great_circle_km((na.latitude, na.longitude), (nb.latitude, nb.longitude))
        });
        links.push(Link { id: LinkId(i as u32), name, a, b, length_km });
        lines.push(lineno);
    }
    Topology::new(nodes, links).map_err(|e| {
        let line = match &e {
            TopologyError::SelfLoop(n) | TopologyError::BadLength(n) | TopologyError::UnknownEndpoint(n) => {
                link_names.get(n).map_or(1, |&i| lines[i])
            }
            _ => 1,
        };
        err(line, ParseErrorKind::Topology(e))
    })
}

/// Writes the topology in the subset understood by [`parse_sndlib`], always
/// emitting explicit link lengths so that parsing the output reproduces the
/// model exactly.
pub fn to_sndlib(topology: &Topology) -> String {
    let mut out = String::from("?SNDlib native format; type: network; version: 1.0\n\nNODES (\n");
    for n in topology.nodes() {
        let _ = writeln!(out, "  {} ( {} {} )", n.name, n.longitude, n.latitude);
    }
    out.push_str(")\n\nLINKS (\n");
    for l in topology.links() {
        let _ = writeln!(
            out,
            "  {} ( {} {} ) 0.00 0.00 0.00 0.00 ( ) {}",
            l.name,
            topology.node_name(l.a),
            topology.node_name(l.b),
            l.length_km
        );
    }
    out.push_str(")\n");
    out
}
