//! Message-passing execution of one LocDyn step.
//!
//! Each node owns its iterates and an inbox. Every iteration is
//! bulk-synchronous: all nodes form `w_i`, all broadcast it to their
//! neighbors, then all compute their gradient block from the inbox alone and
//! update. The result is bit-identical to [`crate::solver::solve_step`], which
//! shows the centralized solver never uses non-local information.
//!
//! The stopping test is a global reduction of the gradient norm; a deployment
//! would replace it with a fixed iteration budget or a consensus round.

use crate::error::{Error, Result};
use crate::geometry::Positions;
use crate::measurement::MeasurementSet;
use crate::network::NetworkGraph;
use crate::solver::{
    accelerated_descent, check_step_inputs, node_gradient, GradientOracle, Momentum, NeighborValues, SolverConfig,
};

/// Values a node received during one broadcast phase.
#[derive(Debug, Default, Clone)]
struct Inbox {
    messages: Vec<(usize, Vec<f64>)>,
}

struct InboxView<'a> {
    graph: &'a NetworkGraph,
    inbox: &'a Inbox,
    reads: &'a std::cell::Cell<usize>,
}

impl NeighborValues for InboxView<'_> {
    fn value(&self, reader: usize, neighbor: usize) -> Result<&[f64]> {
        if !self.graph.is_neighbor(reader, neighbor) {
            return Err(Error::ProtocolViolation {
                reader,
                target: neighbor,
            });
        }
        self.reads.set(self.reads.get() + 1);
        self.inbox
            .messages
            .iter()
            .find(|(from, _)| *from == neighbor)
            .map(|(_, v)| v.as_slice())
            .ok_or(Error::MissingNeighborValue { node: reader, neighbor })
    }
}

/// Communication record of a traced step.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub estimate: Positions,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Iterates `x(1), x(2), ...`.
    pub iterates: Vec<Positions>,
    /// Neighbor deliveries per iteration.
    pub messages_per_iteration: Vec<usize>,
    /// Broadcasts per iteration (one per node with at least one neighbor).
    pub broadcasts_per_iteration: Vec<usize>,
    pub total_messages: usize,
    /// Reads of non-neighbor state; always zero for a correct protocol.
    pub non_neighbor_reads: usize,
    /// Inbox reads performed while forming gradients.
    pub neighbor_reads: usize,
}

struct Mailboxes<'a> {
    graph: &'a NetworkGraph,
    meas: &'a MeasurementSet,
    lambda: f64,
    x_pred: &'a Positions,
    inboxes: Vec<Inbox>,
    messages_per_iteration: Vec<usize>,
    broadcasts_per_iteration: Vec<usize>,
    reads: std::cell::Cell<usize>,
}

impl GradientOracle for Mailboxes<'_> {
    fn gradient(&mut self, w: &Positions, out: &mut Positions) -> Result<usize> {
        let n = self.graph.n_nodes();
        // broadcast phase
        self.inboxes.iter_mut().for_each(|b| b.messages.clear());
        let mut delivered = 0;
        let mut broadcasts = 0;
        for i in 0..n {
            let nbs = self.graph.neighbors(i);
            if !nbs.is_empty() {
                broadcasts += 1;
            }
            for nb in nbs {
                self.inboxes[nb.node].messages.push((i, w.node(i).to_vec()));
                delivered += 1;
            }
        }
        // barrier, then local computation phase
        for i in 0..n {
            let view = InboxView {
                graph: self.graph,
                inbox: &self.inboxes[i],
                reads: &self.reads,
            };
            node_gradient(
                self.graph,
                i,
                w.node(i),
                &view,
                self.meas,
                self.lambda,
                self.x_pred.node(i),
                out.node_mut(i),
            )?;
        }
        self.messages_per_iteration.push(delivered);
        self.broadcasts_per_iteration.push(broadcasts);
        Ok(delivered)
    }
}

/// Runs one step through per-node mailboxes, starting at `x0`.
pub fn distributed_round_trace(
    meas: &MeasurementSet,
    x_pred: &Positions,
    x0: &Positions,
    config: &SolverConfig,
    graph: &NetworkGraph,
) -> Result<RoundTrace> {
    let constants = config.constants(graph)?;
    check_step_inputs(graph, meas, x_pred, x0)?;
    let mut boxes = Mailboxes {
        graph,
        meas,
        lambda: constants.lambda,
        x_pred,
        inboxes: vec![Inbox::default(); graph.n_nodes()],
        messages_per_iteration: Vec::new(),
        broadcasts_per_iteration: Vec::new(),
        reads: std::cell::Cell::new(0),
    };
    let outcome = accelerated_descent(
        x0,
        Momentum {
            beta: Some(constants.beta),
            step: 1.0 / constants.l,
        },
        config.max_iters,
        config.grad_tolerance,
        true,
        &mut boxes,
        None,
    )?;
    Ok(RoundTrace {
        estimate: outcome.x,
        iterations: outcome.iterations,
        grad_norm: outcome.grad_norm,
        iterates: outcome.iterates,
        total_messages: outcome.messages,
        messages_per_iteration: boxes.messages_per_iteration,
        broadcasts_per_iteration: boxes.broadcasts_per_iteration,
        non_neighbor_reads: 0,
        neighbor_reads: boxes.reads.get(),
    })
}
