use alloc::string::ToString;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::{BuildStats, Graph};
use crate::{Error, Result};

/// Incremental edge-list reader. Feed it lines, then call [`finish`].
///
/// Each data line holds two integer node ids separated by whitespace; further
/// columns (weights, timestamps) are ignored. Lines starting with `#` or `%`
/// and blank lines are skipped. Ids are re-indexed densely by first
/// appearance.
///
/// [`finish`]: EdgeListParser::finish
#[derive(Debug, Default)]
pub struct EdgeListParser {
    ids: HashMap<u64, usize>,
    edges: Vec<(usize, usize)>,
    lines: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub input_nodes: usize,
    pub input_edges: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    /// Nodes dropped when keeping only the largest component.
    pub dropped_nodes: usize,
    pub nodes: usize,
    pub edges: usize,
}

impl EdgeListParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_line(&mut self, line: &str) -> Result<()> {
        self.lines += 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with('%') {
            return Ok(());
        }
        let mut fields = text.split_whitespace();
        let malformed = || Error::MalformedEdge {
            line: self.lines,
            text: text.to_string(),
        };
        let u: u64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(malformed)?;
        let v: u64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(malformed)?;
        let u = self.intern(u);
        let v = self.intern(v);
        self.edges.push((u, v));
        Ok(())
    }

    fn intern(&mut self, raw: u64) -> usize {
        let next = self.ids.len();
        *self.ids.entry(raw).or_insert(next)
    }

    pub fn finish(self, largest_component: bool) -> Result<(Graph, LoadStats)> {
        if self.edges.is_empty() {
            return Err(Error::EmptyEdgeList);
        }
        let input_nodes = self.ids.len();
        let input_edges = self.edges.len();
        let (
            graph,
            BuildStats {
                self_loops,
                duplicates,
            },
        ) = Graph::from_edges(input_nodes, self.edges)?;
        let graph = if largest_component {
            graph.largest_component().0
        } else {
            graph
        };
        let stats = LoadStats {
            input_nodes,
            input_edges,
            self_loops,
            duplicates,
            dropped_nodes: input_nodes - graph.node_count(),
            nodes: graph.node_count(),
            edges: graph.edge_count(),
        };
        Ok((graph, stats))
    }

    /// Parses a whole in-memory edge list.
    pub fn parse_str(text: &str, largest_component: bool) -> Result<(Graph, LoadStats)> {
        let mut parser = Self::new();
        for line in text.lines() {
            parser.push_line(line)?;
        }
        parser.finish(largest_component)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_extra_columns() {
        let text = "# header\n10 20 1234\n\n% other\n20 30\n30 10\n10 10\n20 10\n";
        let (g, stats) = EdgeListParser::parse_str(text, false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(stats.self_loops, 1);
        assert_eq!(stats.duplicates, 1);
        assert_eq!(stats.input_edges, 5);
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = EdgeListParser::parse_str("1 2\n3 x\n", false).unwrap_err();
        assert!(matches!(err, Error::MalformedEdge { line: 2, .. }));
        let err = EdgeListParser::parse_str("1 2\n-3 4\n", false).unwrap_err();
        assert!(matches!(err, Error::MalformedEdge { line: 2, .. }));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(
            EdgeListParser::parse_str("# nothing\n", false).unwrap_err(),
            Error::EmptyEdgeList
        );
    }

    #[test]
    fn largest_component_flag() {
        let (g, stats) = EdgeListParser::parse_str("1 2\n2 3\n7 8\n", true).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(stats.dropped_nodes, 2);
    }
}
