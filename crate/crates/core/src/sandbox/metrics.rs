use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Serialize, Serializer};
use thiserror::Error;

use super::ExecOutcome;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no tasks to score")]
    NoTasks,
    #[error("task {task} has {have} attempt(s), fewer than k = {k}")]
    InsufficientAttempts { task: String, have: usize, k: usize },
}

/// A fraction of tasks, kept exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rate {
    pub exact: Ratio<u64>,
    pub hits: u64,
    pub total: u64,
}

impl Rate {
    pub fn value(&self) -> f64 {
        *self.exact.numer() as f64 / *self.exact.denom() as f64
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Rate", 4)?;
        st.serialize_field("hits", &self.hits)?;
        st.serialize_field("total", &self.total)?;
        st.serialize_field("exact", &format!("{}/{}", self.exact.numer(), self.exact.denom()))?;
        st.serialize_field("value", &self.value())?;
        st.end()
    }
}

/// Fraction of rows with a success among their first `k` entries.
pub fn rate_at_k<T: AsRef<[bool]>>(rows: &[(String, T)], k: usize) -> Result<Rate, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if rows.is_empty() {
        return Err(MetricError::NoTasks);
    }
    let mut hits = 0u64;
    for (task, row) in rows {
        let row = row.as_ref();
        if row.len() < k {
            return Err(MetricError::InsufficientAttempts { task: task.clone(), have: row.len(), k });
        }
        hits += u64::from(row[..k].iter().any(|&b| b));
    }
    let total = rows.len() as u64;
    Ok(Rate { exact: Ratio::new(hits, total), hits, total })
}

/// Outcomes per task, ordered by attempt index.
pub fn group_by_task(outcomes: &[ExecOutcome]) -> BTreeMap<&str, Vec<&ExecOutcome>> {
    let mut groups: BTreeMap<&str, Vec<&ExecOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups.entry(o.task_id.as_str()).or_default().push(o);
    }
    for g in groups.values_mut() {
        g.sort_by_key(|o| o.attempt_index);
    }
    groups
}

fn at_k(outcomes: &[ExecOutcome], k: usize, hit: fn(&ExecOutcome) -> bool) -> Result<Rate, MetricError> {
    let rows: Vec<(String, Vec<bool>)> = group_by_task(outcomes)
        .into_iter()
        .map(|(task, attempts)| (task.to_string(), attempts.into_iter().map(hit).collect()))
        .collect();
    rate_at_k(&rows, k)
}

/// Tasks with a compiling attempt among their first `k`.
pub fn compilation_at_k(outcomes: &[ExecOutcome], k: usize) -> Result<Rate, MetricError> {
    at_k(outcomes, k, |o| o.compiled)
}

/// Tasks with a fully passing attempt among their first `k`.
pub fn pass_at_k(outcomes: &[ExecOutcome], k: usize) -> Result<Rate, MetricError> {
    at_k(outcomes, k, |o| o.tests_passed)
}
