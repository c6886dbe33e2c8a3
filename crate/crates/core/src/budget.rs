use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Resource limits shared by every enumeration.
///
/// Exceeding a limit is always an error; nothing is ever truncated silently.
#[derive(Clone, Debug)]
pub struct Budget {
    pub max_elements: usize,
    deadline: Option<Instant>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_elements: 8_000_000,
            deadline: None,
        }
    }
}

impl Budget {
    pub fn new(max_elements: usize, time: Option<Duration>) -> Self {
        Budget {
            max_elements,
            deadline: time.map(|t| Instant::now() + t),
        }
    }

    pub fn unlimited() -> Self {
        Budget {
            max_elements: usize::MAX,
            deadline: None,
        }
    }

    pub fn with_max_elements(mut self, max_elements: usize) -> Self {
        self.max_elements = max_elements;
        self
    }

    pub fn check(&self, count: usize, what: &str) -> Result<()> {
        if count > self.max_elements {
            return Err(Error::BudgetExceeded(format!(
                "{what}: {count} elements exceeds the limit of {}",
                self.max_elements
            )));
        }
        if let Some(deadline) = self.deadline {
            if Instant::now() > deadline {
                return Err(Error::BudgetExceeded(format!("{what}: time budget exhausted")));
            }
        }
        Ok(())
    }
}
