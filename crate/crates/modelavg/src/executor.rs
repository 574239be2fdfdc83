//! Scoped-thread executor for the per-node work of a round.

use std::num::NonZeroUsize;
use std::thread;

use modelavg_core::simulator::{LocalOutcome, NodeExecutor};
use modelavg_core::Result;

/// Runs node tasks on up to `threads` scoped threads. Node `i` goes to
/// worker `i mod threads`; results come back in node order.
#[derive(Debug, Clone, Copy)]
pub struct ThreadedExecutor {
    threads: NonZeroUsize,
}

impl ThreadedExecutor {
    pub fn new(threads: NonZeroUsize) -> Self {
        ThreadedExecutor { threads }
    }

    pub fn threads(&self) -> usize {
        self.threads.get()
    }
}

impl NodeExecutor for ThreadedExecutor {
    fn execute(
        &self,
        count: usize,
        task: &(dyn Fn(usize) -> Result<LocalOutcome> + Sync),
    ) -> Vec<Result<LocalOutcome>> {
        let workers = self.threads.get().min(count);
        if workers <= 1 {
            return (0..count).map(task).collect();
        }
        let mut slots: Vec<Option<Result<LocalOutcome>>> = (0..count).map(|_| None).collect();
        thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    s.spawn(move || {
                        (w..count)
                            .step_by(workers)
                            .map(|i| (i, task(i)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("node worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|r| r.expect("every node index is assigned to a worker"))
            .collect()
    }
}
