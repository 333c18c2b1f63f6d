//! Line-oriented dataset text format.
//!
//! ```text
//! dataset <name> <num_graphs> <num_node_labels> <num_graph_classes>
//! graph <id> <n> <class>
//! labels <l_0> ... <l_{n-1}>
//! edge <u> <v>
//! end
//! ```
//!
//! `#` starts a comment. Edges are written with `u < v`; the reader accepts
//! either endpoint order.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{GraphError, LabeledGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDataset {
    pub name: String,
    pub num_node_labels: usize,
    pub num_graph_classes: usize,
    pub graphs: Vec<LabeledGraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected `{expected}`, found `{found}`")]
    Unexpected {
        expected: &'static str,
        found: String,
    },
    #[error("`{directive}` expects {expected} fields, found {found}")]
    FieldCount {
        directive: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid number `{0}`")]
    Number(String),
    #[error("dataset name must not be empty")]
    EmptyName,
    #[error("header declares {declared} graphs but file contains {found}")]
    GraphCount { declared: usize, found: usize },
    #[error("graph block is missing its `labels` line")]
    MissingLabels,
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl GraphDataset {
    pub fn new(name: impl Into<String>, num_node_labels: usize, num_graph_classes: usize) -> Self {
        Self {
            name: name.into(),
            num_node_labels,
            num_graph_classes,
            graphs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn validate(&self) -> Result<(), (usize, GraphError)> {
        self.graphs.iter().enumerate().try_for_each(|(i, g)| {
            g.validate(self.num_node_labels, self.num_graph_classes)
                .map_err(|e| (i, e))
        })
    }

    pub fn max_nodes(&self) -> usize {
        self.graphs.iter().map(LabeledGraph::n).max().unwrap_or(0)
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        Parser::new(text).dataset()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "dataset {} {} {} {}",
            self.name,
            self.graphs.len(),
            self.num_node_labels,
            self.num_graph_classes
        );
        for (id, g) in self.graphs.iter().enumerate() {
            let _ = writeln!(out, "graph {id} {} {}", g.n(), g.graph_class());
            out.push_str("labels");
            for l in g.node_labels() {
                let _ = write!(out, " {l}");
            }
            out.push('\n');
            for (u, v) in g.edges() {
                let _ = writeln!(out, "edge {u} {v}");
            }
            out.push_str("end\n");
        }
        out
    }

    pub fn read(path: &Path) -> io::Result<Result<Self, ParseError>> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    /// Writes to a sibling temporary file and renames it over `path`.
    pub fn write(&self, path: &Path) -> io::Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}

/// Write-then-rename so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

struct Parser<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>>,
    last_line: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, Vec<&'a str>)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| {
                    (
                        i + 1,
                        l.split('#')
                            .next()
                            .unwrap_or("")
                            .split_whitespace()
                            .collect::<Vec<_>>(),
                    )
                })
                .filter(|(_, f)| !f.is_empty()),
        );
        Self {
            lines: it.peekable(),
            last_line: 0,
        }
    }

    fn next_line(&mut self) -> Result<(usize, Vec<&'a str>), ParseError> {
        match self.lines.next() {
            Some((n, f)) => {
                self.last_line = n;
                Ok((n, f))
            }
            None => Err(ParseError {
                line: self.last_line + 1,
                kind: ParseErrorKind::UnexpectedEof,
            }),
        }
    }

    fn dataset(mut self) -> Result<GraphDataset, ParseError> {
        let (line, fields) = self.next_line()?;
        let err = |kind| ParseError { line, kind };
        expect_directive(&fields, "dataset", 5).map_err(err)?;
        let name = fields[1].to_string();
        let declared = number(fields[2]).map_err(err)?;
        let num_node_labels = number(fields[3]).map_err(err)?;
        let num_graph_classes = number(fields[4]).map_err(err)?;
        let mut ds = GraphDataset::new(name, num_node_labels, num_graph_classes);
        while self.lines.peek().is_some() {
            let g = self.graph(num_node_labels, num_graph_classes)?;
            ds.graphs.push(g);
        }
        if ds.graphs.len() != declared {
            return Err(ParseError {
                line: self.last_line,
                kind: ParseErrorKind::GraphCount {
                    declared,
                    found: ds.graphs.len(),
                },
            });
        }
        Ok(ds)
    }

    fn graph(&mut self, num_labels: usize, num_classes: usize) -> Result<LabeledGraph, ParseError> {
        let (header_line, fields) = self.next_line()?;
        let err = |kind| ParseError {
            line: header_line,
            kind,
        };
        expect_directive(&fields, "graph", 4).map_err(err)?;
        number(fields[1]).map_err(err)?;
        let n = number(fields[2]).map_err(err)?;
        let class = number(fields[3]).map_err(err)?;
        if class >= num_classes {
            return Err(err(GraphError::ClassOutOfRange {
                class,
                bound: num_classes,
            }
            .into()));
        }

        let (line, fields) = self.next_line()?;
        let err = |kind| ParseError { line, kind };
        if fields[0] != "labels" {
            return Err(err(ParseErrorKind::MissingLabels));
        }
        if fields.len() - 1 != n {
            return Err(err(GraphError::LabelCount {
                expected: n,
                found: fields.len() - 1,
            }
            .into()));
        }
        let mut labels = Vec::with_capacity(n);
        for (node, f) in fields[1..].iter().enumerate() {
            let label = number(f).map_err(err)?;
            if label >= num_labels {
                return Err(err(GraphError::LabelOutOfRange {
                    node,
                    label,
                    bound: num_labels,
                }
                .into()));
            }
            labels.push(label);
        }

        // Edges are checked one at a time so errors carry their own line.
        let mut seen = std::collections::HashSet::new();
        let mut edges = Vec::new();
        loop {
            let (line, fields) = self.next_line()?;
            let err = |kind| ParseError { line, kind };
            match fields[0] {
                "end" => {
                    expect_directive(&fields, "end", 1).map_err(err)?;
                    break;
                }
                "edge" => {
                    expect_directive(&fields, "edge", 3).map_err(err)?;
                    let u = number(fields[1]).map_err(err)?;
                    let v = number(fields[2]).map_err(err)?;
                    if u >= n || v >= n {
                        return Err(err(GraphError::EdgeOutOfRange { u, v, n }.into()));
                    }
                    if u == v {
                        return Err(err(GraphError::SelfLoop { node: u }.into()));
                    }
                    let key = (u.min(v), u.max(v));
                    if !seen.insert(key) {
                        return Err(err(GraphError::DuplicateEdge { u: key.0, v: key.1 }.into()));
                    }
                    edges.push(key);
                }
                other => {
                    return Err(err(ParseErrorKind::Unexpected {
                        expected: "edge or end",
                        found: other.to_string(),
                    }))
                }
            }
        }
        LabeledGraph::new(n, edges, labels, class).map_err(|e| ParseError {
            line: header_line,
            kind: e.into(),
        })
    }
}

fn expect_directive(
    fields: &[&str],
    directive: &'static str,
    count: usize,
) -> Result<(), ParseErrorKind> {
    if fields[0] != directive {
        return Err(ParseErrorKind::Unexpected {
            expected: directive,
            found: fields[0].to_string(),
        });
    }
    if fields.len() != count {
        return Err(ParseErrorKind::FieldCount {
            directive,
            expected: count - 1,
            found: fields.len() - 1,
        });
    }
    Ok(())
}

fn number(field: &str) -> Result<usize, ParseErrorKind> {
    field
        .parse()
        .map_err(|_| ParseErrorKind::Number(field.to_string()))
}
