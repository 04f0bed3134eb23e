use std::rc::Rc;

use rand::Rng;

use super::mlp::Mlp;
use super::tape::{ParamStore, Tape, Var};
use crate::error::NnError;

/// Directed connectivity shared by every block of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphIndex {
    pub receivers: Rc<Vec<usize>>,
    pub senders: Rc<Vec<usize>>,
    pub num_nodes: usize,
}

impl GraphIndex {
    /// From `[receiver, sender]` pairs.
    pub fn new(edges: &[[usize; 2]], num_nodes: usize) -> Result<GraphIndex, NnError> {
        if let Some(&bad) = edges.iter().flatten().find(|&&i| i >= num_nodes) {
            return Err(NnError::IndexOutOfRange {
                index: bad,
                len: num_nodes,
            });
        }
        Ok(GraphIndex {
            receivers: Rc::new(edges.iter().map(|e| e[0]).collect()),
            senders: Rc::new(edges.iter().map(|e| e[1]).collect()),
            num_nodes,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.receivers.len()
    }
}

/// Sum of edge rows into their receivers.
pub fn scatter_sum(tape: &mut Tape<'_>, edges: Var, graph: &GraphIndex) -> Result<Var, NnError> {
    tape.scatter_sum(edges, &graph.receivers, graph.num_nodes)
}

/// Residual edge-then-node update:
/// `e′ = e + P_e([e ‖ n_recv ‖ n_send])`, `n′ = n + P_n([Σ_recv e′ ‖ n])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageBlock {
    pub edge: Mlp,
    pub node: Mlp,
}

impl MessageBlock {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        latent: usize,
        hidden: &[usize],
        layer_norm: bool,
        rng: &mut R,
    ) -> MessageBlock {
        let dims = |input: usize| {
            let mut d = vec![input];
            d.extend_from_slice(hidden);
            d.push(latent);
            d
        };
        MessageBlock {
            edge: Mlp::new(
                store,
                &format!("{name}.edge"),
                &dims(3 * latent),
                layer_norm,
                rng,
            ),
            node: Mlp::new(
                store,
                &format!("{name}.node"),
                &dims(2 * latent),
                layer_norm,
                rng,
            ),
        }
    }

    pub fn apply(
        &self,
        tape: &mut Tape<'_>,
        nodes: Var,
        edges: Var,
        graph: &GraphIndex,
    ) -> Result<(Var, Var), NnError> {
        let de = self.edge.apply_blocks(
            tape,
            &[
                (edges, None),
                (nodes, Some(&graph.receivers)),
                (nodes, Some(&graph.senders)),
            ],
        )?;
        let e2 = tape.add(edges, de)?;
        let agg = scatter_sum(tape, e2, graph)?;
        let dn = self
            .node
            .apply_blocks(tape, &[(agg, None), (nodes, None)])?;
        let n2 = tape.add(nodes, dn)?;
        Ok((n2, e2))
    }
}
