use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("edge list is empty")]
    EmptyEdgeList,
    #[error("line {line}: expected two non-negative integer node ids, got {text:?}")]
    MalformedEdge { line: usize, text: String },
    #[error("cannot place {edges} edges among {nodes} nodes")]
    TooManyEdges { nodes: usize, edges: u64 },
    #[error("node {node} out of range for a graph with {nodes} nodes")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("source node {0} is forbidden")]
    ForbiddenSource(usize),
    #[error("no source nodes given")]
    NoSources,
    #[error("order relation is irreflexive: {0} cannot precede itself")]
    Irreflexive(usize),
    #[error("hash chain length must be positive")]
    EmptyChain,
    #[error("requested {requested} attack edges but only {available} honest nodes exist")]
    NotEnoughNodes { requested: usize, available: usize },
    #[error("root {0} is not an honest node")]
    InvalidRoot(usize),
    #[error("honest node {0} cannot reach the root")]
    Unreachable(usize),
    #[error("there are no honest nodes")]
    NoHonestNodes,
    #[error("trace has {available} rounds after round {from}, need {needed}")]
    TraceTooShort {
        from: usize,
        needed: usize,
        available: usize,
    },
    #[error("max_rounds {max_rounds} is below the root eccentricity {eccentricity} plus one")]
    TooFewRounds { max_rounds: u32, eccentricity: u32 },
    #[error("the adversary must be the last node of the graph")]
    AdversaryNotLast,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
