//! Reverse-mode autodiff tape.
//!
//! Ops push nodes whose backward closures return (parent id, gradient)
//! contributions. Backward walks node ids in reverse, so gradient
//! accumulation order is fixed and runs are bitwise reproducible.

use super::tensor::Tensor;

type BackFn = Box<dyn Fn(&Tensor) -> Vec<(usize, Tensor)> + Send + Sync>;

struct Node {
    backward: Option<BackFn>,
}

/// A tensor tracked (or not) on a tape.
#[derive(Clone)]
pub struct Val {
    pub t: Tensor,
    pub id: Option<usize>,
}

impl Val {
    /// An untracked constant.
    pub fn constant(t: Tensor) -> Val {
        Val { t, id: None }
    }
}

#[derive(Default)]
pub struct Tape {
    recording: bool,
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new(recording: bool) -> Tape {
        Tape {
            recording,
            nodes: Vec::new(),
        }
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    /// Track a leaf (parameter or differentiable input).
    pub fn leaf(&mut self, t: Tensor) -> Val {
        if !self.recording {
            return Val { t, id: None };
        }
        let id = self.nodes.len();
        self.nodes.push(Node { backward: None });
        Val { t, id: Some(id) }
    }

    /// Register an op result. `backward` maps the output gradient to
    /// per-parent contributions; it is only consulted while recording.
    pub fn push(
        &mut self,
        out: Tensor,
        backward: impl Fn(&Tensor) -> Vec<(usize, Tensor)> + Send + Sync + 'static,
    ) -> Val {
        if !self.recording {
            return Val { t: out, id: None };
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            backward: Some(Box::new(backward)),
        });
        Val {
            t: out,
            id: Some(id),
        }
    }

    /// Backpropagate from a scalar loss. Returns gradients indexed by node
    /// id; only leaves keep their slot populated after the sweep.
    pub fn backward(&self, loss: &Val) -> Vec<Option<Tensor>> {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let Some(loss_id) = loss.id else {
            return grads;
        };
        grads[loss_id] = Some(Tensor::ones(loss.t.shape().to_vec()));
        for id in (0..=loss_id).rev() {
            let Some(back) = self.nodes[id].backward.as_ref() else {
                continue; // leaf: keep its gradient
            };
            let Some(g) = grads[id].take() else {
                continue;
            };
            for (pid, pg) in back(&g) {
                accumulate(&mut grads[pid], pg);
            }
        }
        grads
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        None => *slot = Some(g),
        Some(acc) => {
            debug_assert_eq!(acc.shape(), g.shape());
            let dst = acc.data_mut();
            for (d, s) in dst.iter_mut().zip(g.data()) {
                *d += s;
            }
        }
    }
}
