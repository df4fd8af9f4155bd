//! Attribute task declarations.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Unordered categories `0..classes`.
    Nominal { classes: usize },
    /// Ordered ranks `1..=ranks`.
    Ordinal { ranks: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
}

impl TaskSpec {
    pub fn nominal(name: impl Into<String>, classes: usize) -> Self {
        TaskSpec {
            name: name.into(),
            kind: TaskKind::Nominal { classes },
        }
    }

    pub fn ordinal(name: impl Into<String>, ranks: usize) -> Self {
        TaskSpec {
            name: name.into(),
            kind: TaskKind::Ordinal { ranks },
        }
    }

    pub fn is_ordinal(&self) -> bool {
        matches!(self.kind, TaskKind::Ordinal { .. })
    }

    /// Number of distinct label values (C or K).
    pub fn cardinality(&self) -> usize {
        match self.kind {
            TaskKind::Nominal { classes } => classes,
            TaskKind::Ordinal { ranks } => ranks,
        }
    }

    /// Smallest valid label: 0 for nominal, 1 for ordinal.
    pub fn min_label(&self) -> usize {
        match self.kind {
            TaskKind::Nominal { .. } => 0,
            TaskKind::Ordinal { .. } => 1,
        }
    }

    pub fn max_label(&self) -> usize {
        match self.kind {
            TaskKind::Nominal { classes } => classes - 1,
            TaskKind::Ordinal { ranks } => ranks,
        }
    }

    pub fn label_in_range(&self, label: i64) -> bool {
        label >= self.min_label() as i64 && label <= self.max_label() as i64
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(Error::Config(format!(
                "task name {:?} must be a non-empty identifier",
                self.name
            )));
        }
        if self.cardinality() < 2 {
            return Err(Error::Config(format!(
                "task {} needs at least 2 {}",
                self.name,
                if self.is_ordinal() {
                    "ranks"
                } else {
                    "classes"
                }
            )));
        }
        Ok(())
    }
}

/// Checks each spec and name uniqueness.
pub fn validate_tasks(tasks: &[TaskSpec]) -> Result<()> {
    if tasks.is_empty() {
        return Err(Error::Config("at least one task is required".into()));
    }
    for (i, t) in tasks.iter().enumerate() {
        t.validate()?;
        if tasks[..i].iter().any(|o| o.name == t.name) {
            return Err(Error::Config(format!("duplicate task name {}", t.name)));
        }
    }
    Ok(())
}

/// Text form `name:nominal:C` / `name:ordinal:K`.
impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TaskKind::Nominal { classes } => write!(f, "{}:nominal:{}", self.name, classes),
            TaskKind::Ordinal { ranks } => write!(f, "{}:ordinal:{}", self.name, ranks),
        }
    }
}

impl FromStr for TaskSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let [name, kind, n] = parts[..] else {
            return Err(Error::Config(format!(
                "task {s:?} must look like name:nominal:C or name:ordinal:K"
            )));
        };
        let n: usize = n
            .parse()
            .map_err(|_| Error::Config(format!("task {name}: bad count {n:?}")))?;
        let spec = match kind {
            "nominal" => TaskSpec::nominal(name, n),
            "ordinal" => TaskSpec::ordinal(name, n),
            other => {
                return Err(Error::Config(format!(
                    "task {name}: unknown kind {other:?}"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}
