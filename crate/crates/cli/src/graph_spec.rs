//! Graph sources: edge-list files, generators, and randomised copies.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use attestree_core::graph::{
    erdos_renyi, preferential_attachment, randomize_degree_preserving, EdgeListParser, Graph,
    LoadStats,
};

/// Number of swap attempts per edge when randomising a graph.
pub const SWAP_FACTOR: u64 = 10;

/// Reads a whitespace-separated edge list.
pub fn load_edge_list<R: BufRead>(
    reader: R,
    largest_component: bool,
) -> Result<(Graph, LoadStats)> {
    let mut parser = EdgeListParser::new();
    for line in reader.lines() {
        parser.push_line(&line?)?;
    }
    Ok(parser.finish(largest_component)?)
}

pub fn load_edge_file(path: &Path, largest_component: bool) -> Result<(Graph, LoadStats)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    load_edge_list(BufReader::new(file), largest_component)
        .with_context(|| format!("reading {}", path.display()))
}

/// `path`, `er(n, m)`, `pa(n, k)` or `randomized(path)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphSpec {
    File(PathBuf),
    ErdosRenyi { n: usize, m: u64 },
    PreferentialAttachment { n: usize, k: usize },
    Randomized(PathBuf),
}

impl FromStr for GraphSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let call = s
            .split_once('(')
            .and_then(|(name, rest)| Some((name.trim(), rest.strip_suffix(')')?)));
        let Some((name, args)) = call else {
            return if s.is_empty() {
                Err("empty graph spec".into())
            } else {
                Ok(GraphSpec::File(s.into()))
            };
        };
        let nums = || -> Result<(u64, u64), String> {
            let parts: Vec<&str> = args.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [a, b] => Ok((
                    a.parse().map_err(|_| format!("bad number {a:?}"))?,
                    b.parse().map_err(|_| format!("bad number {b:?}"))?,
                )),
                _ => Err(format!("{name}() takes two numbers")),
            }
        };
        match name {
            "er" => nums().map(|(n, m)| GraphSpec::ErdosRenyi { n: n as usize, m }),
            "pa" => nums().map(|(n, k)| GraphSpec::PreferentialAttachment {
                n: n as usize,
                k: k as usize,
            }),
            "randomized" => Ok(GraphSpec::Randomized(args.trim().into())),
            _ => Err(format!("unknown graph generator {name:?}")),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::File(p) => write!(f, "{}", p.display()),
            GraphSpec::ErdosRenyi { n, m } => write!(f, "er({n}, {m})"),
            GraphSpec::PreferentialAttachment { n, k } => write!(f, "pa({n}, {k})"),
            GraphSpec::Randomized(p) => write!(f, "randomized({})", p.display()),
        }
    }
}

/// A materialised graph and how it was obtained.
#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// Present for file-based sources.
    pub load: Option<LoadStats>,
    /// Nodes removed to keep only the largest component of a generated graph.
    pub dropped_nodes: usize,
}

impl GraphSpec {
    /// Builds the graph. Generators use `seed`; `largest_component` applies
    /// to every source.
    pub fn build(&self, seed: u64, largest_component: bool) -> Result<LoadedGraph> {
        let generated = |g: Graph| {
            if largest_component {
                let (lcc, _) = g.largest_component();
                let dropped = g.node_count() - lcc.node_count();
                LoadedGraph {
                    graph: lcc,
                    load: None,
                    dropped_nodes: dropped,
                }
            } else {
                LoadedGraph {
                    graph: g,
                    load: None,
                    dropped_nodes: 0,
                }
            }
        };
        Ok(match self {
            GraphSpec::File(p) => {
                let (graph, stats) = load_edge_file(p, largest_component)?;
                LoadedGraph {
                    graph,
                    load: Some(stats),
                    dropped_nodes: stats.dropped_nodes,
                }
            }
            GraphSpec::ErdosRenyi { n, m } => generated(erdos_renyi(*n, *m, seed)?),
            GraphSpec::PreferentialAttachment { n, k } => {
                if *k == 0 {
                    bail!("pa() needs at least one edge per node");
                }
                generated(preferential_attachment(*n, *k, seed)?)
            }
            GraphSpec::Randomized(p) => {
                let (g, stats) = load_edge_file(p, false)?;
                let (r, _) = randomize_degree_preserving(&g, seed, SWAP_FACTOR)?;
                let mut out = generated(r);
                out.load = Some(stats);
                out
            }
        })
    }
}
