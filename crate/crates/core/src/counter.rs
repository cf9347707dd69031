//! Unit-cost work counters.
//!
//! Every adaptive and exact solver reports its cost through a
//! [`SampleCounter`]: distance evaluations for k-medoids, histogram
//! insertions for node splitting, coordinate multiplications for MIPS.
//! The tally is monotone and the optional budget is a hard ceiling: a charge
//! that would cross it is refused and leaves the counter untouched.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct SampleCounter {
    used: AtomicU64,
    budget: Option<u64>,
}

impl SampleCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_budget(budget: u64) -> Self {
        Self {
            used: AtomicU64::new(0),
            budget: Some(budget),
        }
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn get(&self) -> u64 {
        self.used.load(Ordering::Relaxed)
    }

    /// Units left before the budget is hit, `u64::MAX` when unbounded.
    pub fn remaining(&self) -> u64 {
        match self.budget {
            Some(b) => b.saturating_sub(self.get()),
            None => u64::MAX,
        }
    }

    /// Unconditionally record `units` of work.
    #[inline]
    pub fn add(&self, units: u64) {
        self.used.fetch_add(units, Ordering::Relaxed);
    }

    /// Record `units` of work only if it fits in the budget.
    pub fn try_charge(&self, units: u64) -> Result<()> {
        let Some(budget) = self.budget else {
            self.add(units);
            return Ok(());
        };
        self.used
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |cur| {
                cur.checked_add(units).filter(|&next| next <= budget)
            })
            .map(|_| ())
            .map_err(|_| Error::BudgetExhausted { budget })
    }

    pub fn would_fit(&self, units: u64) -> bool {
        units <= self.remaining()
    }

    pub fn reset(&self) {
        self.used.store(0, Ordering::Relaxed);
    }
}

impl Clone for SampleCounter {
    fn clone(&self) -> Self {
        Self {
            used: AtomicU64::new(self.get()),
            budget: self.budget,
        }
    }
}
