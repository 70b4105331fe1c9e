//! Inputs shared by the benchmarks.

use dswig_core::{CausalGraph, EdgeLabel, GraphBuilder, Node};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random DAG on `n` nodes in topological order `V0..V{n-1}`; each forward
/// pair is an edge with probability `p`.
pub fn random_dag(n: usize, p: f64, seed: u64) -> CausalGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_node(Node::endogenous(format!("V{i}"))).expect("fresh id");
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                b.add_edge(&format!("V{i}"), &format!("V{j}"), EdgeLabel::Plain);
            }
        }
    }
    b.build().expect("forward edges are acyclic")
}

/// Disjoint node id sets (x, y, z) drawn at random from `g`.
pub fn random_query(g: &CausalGraph, seed: u64) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.len();
    let x = rng.gen_range(0..n);
    let mut y = rng.gen_range(0..n);
    while y == x {
        y = rng.gen_range(0..n);
    }
    let z = (0..n).filter(|&v| v != x && v != y && rng.gen_bool(0.2)).map(|v| g.node(v).id.clone()).collect();
    (vec![g.node(x).id.clone()], vec![g.node(y).id.clone()], z)
}
