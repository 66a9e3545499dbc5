use std::collections::VecDeque;

use super::{Bank, Phase, ProtocolError, QubitRegister};
use crate::engine::SimTime;

/// Left and right queues of registers awaiting a partner, each ordered by
/// storage (success) time; ties keep arrival order.
#[derive(Clone, Debug, Default)]
pub struct PairingQueue {
    left: VecDeque<(SimTime, usize)>,
    right: VecDeque<(SimTime, usize)>,
}

impl PairingQueue {
    pub fn new() -> Self {
        Self::default()
    }

    fn queue_mut(&mut self, bank: Bank) -> &mut VecDeque<(SimTime, usize)> {
        match bank {
            Bank::Left => &mut self.left,
            Bank::Right => &mut self.right,
            Bank::Unassigned => panic!("routerless registers never queue for pairing"),
        }
    }

    pub fn push(&mut self, reg: &QubitRegister) {
        let q = self.queue_mut(reg.bank);
        debug_assert!(!q.iter().any(|e| e.1 == reg.id), "register queued twice");
        let key = reg.success_time;
        let pos = q.partition_point(|e| e.0 <= key);
        q.insert(pos, (key, reg.id));
    }

    pub fn len(&self, bank: Bank) -> usize {
        match bank {
            Bank::Left => self.left.len(),
            Bank::Right => self.right.len(),
            Bank::Unassigned => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty() && self.right.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.left.iter().chain(&self.right).any(|e| e.1 == id)
    }
}

/// Pairs the heads of both queues until one runs dry. Paired registers move
/// to `AttemptingLocal`; the rest keep waiting.
pub fn pair_fifo(
    queue: &mut PairingQueue,
    regs: &mut [QubitRegister],
) -> Result<Vec<(usize, usize)>, ProtocolError> {
    let mut pairs = Vec::new();
    while !queue.left.is_empty() && !queue.right.is_empty() {
        let (_, l) = queue.left.pop_front().expect("checked non-empty");
        let (_, r) = queue.right.pop_front().expect("checked non-empty");
        for (me, other) in [(l, r), (r, l)] {
            let reg = &mut regs[me];
            if reg.phase() != Phase::AwaitingPair {
                return Err(ProtocolError::InvalidTransition {
                    id: me,
                    action: "pair",
                    phase: reg.phase(),
                });
            }
            reg.begin_local(other);
        }
        pairs.push((l, r));
    }
    Ok(pairs)
}
