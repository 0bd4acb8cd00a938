//! Graphs, graph states and the witness-connected resource state.
//!
//! Qubits `0..N` hold the graph part, `N..N+m` the witness register.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densesim::{apply_cz, plus_state, QuantumState};
use crate::error::{Error, Result};
use crate::pauli::{PauliString, StabilizerGroup};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            for v in [a, b] {
                if v >= vertices {
                    return Err(Error::VertexOutOfRange { vertex: v, count: vertices });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::DuplicateEdge(a.min(b), a.max(b)));
            }
        }
        Ok(Self { vertices, edges: set })
    }

    pub fn empty(vertices: usize) -> Self {
        Self { vertices, edges: BTreeSet::new() }
    }

    pub fn path(vertices: usize) -> Self {
        let edges: Vec<_> = (1..vertices).map(|v| (v - 1, v)).collect();
        Self::new(vertices, &edges).expect("path edges are valid")
    }

    pub fn cycle(vertices: usize) -> Self {
        if vertices < 3 {
            return Self::path(vertices);
        }
        let mut edges: Vec<_> = (1..vertices).map(|v| (v - 1, v)).collect();
        edges.push((vertices - 1, 0));
        Self::new(vertices, &edges).expect("cycle edges are valid")
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::new(rows * cols, &edges).expect("grid edges are valid")
    }

    /// Erdős–Rényi graph with edge probability `p`.
    pub fn random<R: Rng + ?Sized>(vertices: usize, p: f64, rng: &mut R) -> Self {
        let mut edges = BTreeSet::new();
        for a in 0..vertices {
            for b in (a + 1)..vertices {
                if rng.random::<f64>() < p {
                    edges.insert((a, b));
                }
            }
        }
        Self { vertices, edges }
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None })
            .collect()
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile { n: self.vertices, edges: self.edges.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

/// `{ "n": int, "edges": [[int, int], ...] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<Graph> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::new(self.n, &edges)
    }
}

pub fn load_graph(text: &str) -> Result<Graph> {
    serde_json::from_str::<GraphFile>(text)?.into_graph()
}

pub fn load_graph_file(path: &std::path::Path) -> Result<Graph> {
    load_graph(&std::fs::read_to_string(path)?)
}

/// `prod_{(i,j) in E} CZ_ij |+>^N`
pub fn graph_state(g: &Graph) -> Result<QuantumState> {
    let mut s = plus_state(g.vertices)?;
    for (a, b) in g.edges() {
        s = apply_cz(&s, a, b)?;
    }
    Ok(s)
}

/// `g_j = X_j ⊗_{i in S_j} Z_i` for every vertex `j`.
pub fn graph_stabilizers(g: &Graph) -> Result<StabilizerGroup> {
    let n = g.vertices;
    let gens = (0..n)
        .map(|j| {
            let mut x = vec![false; n];
            let mut z = vec![false; n];
            x[j] = true;
            for i in g.neighbors(j) {
                z[i] = true;
            }
            PauliString::from_bits(x, z, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    StabilizerGroup::new(gens)
}

/// Graph part on `V1`, an `m`-qubit witness register on `V2`, and the
/// connecting edges `(v1, w)` with `w` indexing witness qubits `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectedSystem {
    graph: Graph,
    witness_size: usize,
    connect: BTreeSet<(usize, usize)>,
}

impl ConnectedSystem {
    pub fn new(graph: Graph, witness_size: usize, connect: &[(usize, usize)]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(v, w) in connect {
            if v >= graph.vertices {
                return Err(Error::VertexOutOfRange { vertex: v, count: graph.vertices });
            }
            if w >= witness_size {
                return Err(Error::VertexOutOfRange { vertex: w, count: witness_size });
            }
            if !set.insert((v, w)) {
                return Err(Error::DuplicateEdge(v, graph.vertices + w));
            }
        }
        Ok(Self { graph, witness_size, connect: set })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn graph_size(&self) -> usize {
        self.graph.vertices
    }

    pub fn witness_size(&self) -> usize {
        self.witness_size
    }

    pub fn total_qubits(&self) -> usize {
        self.graph.vertices + self.witness_size
    }

    /// Witness register qubit indices in the combined system.
    pub fn witness_qubits(&self) -> Vec<usize> {
        (self.graph.vertices..self.total_qubits()).collect()
    }

    /// Connect edges as pairs of combined-system qubit indices.
    pub fn connect_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.graph.vertices;
        self.connect.iter().map(move |&(v, w)| (v, n + w))
    }

    /// Applies the connecting CZ layer (an involution).
    pub fn apply_connect_layer(&self, s: &QuantumState) -> Result<QuantumState> {
        let mut out = s.clone();
        for (a, b) in self.connect_edges() {
            out = apply_cz(&out, a, b)?;
        }
        Ok(out)
    }

    pub fn to_file(&self) -> ConnectedSystemFile {
        ConnectedSystemFile {
            graph: self.graph.to_file(),
            m: self.witness_size,
            connect: self.connect.iter().map(|&(v, w)| [v, w]).collect(),
        }
    }
}

/// `{ "graph": <graph>, "m": int, "connect": [[v1, v2], ...] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectedSystemFile {
    pub graph: GraphFile,
    pub m: usize,
    #[serde(default)]
    pub connect: Vec<[usize; 2]>,
}

impl ConnectedSystemFile {
    pub fn into_system(self) -> Result<ConnectedSystem> {
        let graph = self.graph.into_graph()?;
        let connect: Vec<_> = self.connect.iter().map(|e| (e[0], e[1])).collect();
        ConnectedSystem::new(graph, self.m, &connect)
    }
}

/// `(⊗_{e in E_connect} CZ_e)(|G> ⊗ |witness>)` in the fixed `V1, V2` order.
pub fn connect_witness(witness: &QuantumState, sys: &ConnectedSystem) -> Result<QuantumState> {
    if witness.num_qubits() != sys.witness_size {
        return Err(Error::DimensionMismatch { expected: sys.witness_size, found: witness.num_qubits() });
    }
    let g = graph_state(&sys.graph)?;
    sys.apply_connect_layer(&g.tensor(witness)?)
}

/// One generator per graph vertex, with `Z` support reaching the witness
/// qubits it is connected to.
pub fn extended_test_stabilizers(sys: &ConnectedSystem) -> Result<StabilizerGroup> {
    let n = sys.graph.vertices;
    let total = sys.total_qubits();
    let gens = (0..n)
        .map(|j| {
            let mut x = vec![false; total];
            let mut z = vec![false; total];
            x[j] = true;
            for i in sys.graph.neighbors(j) {
                z[i] = true;
            }
            for &(v, w) in &sys.connect {
                if v == j {
                    z[n + w] = true;
                }
            }
            PauliString::from_bits(x, z, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    StabilizerGroup::new(gens)
}
