//! Structured results for verification checks.
//!
//! Every check in the battery produces a [`CheckReport`]: a machine-readable
//! record of how many instances were exercised, the worst signed margin
//! observed, and the tolerance the margin was held against. The pass rule is
//! uniform across the battery:
//!
//! ```text
//! passed  <=>  worst_margin >= -tolerance
//! ```
//!
//! Margins are oriented so that positive means "comfortably inside the
//! inequality being checked" and negative means "violated by this much".
//! Exact symbolic checks use a tolerance of zero: any nonzero residual is a
//! failure, with no wiggle room.

use std::fmt;

/// Outcome of a single instance inside a check (one random polynomial, one
/// pair of potentials, one radius in a schedule, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    /// Short label identifying the instance, e.g. `"seed-17/pair-3"` or
    /// `"r=0.25"`.
    pub label: String,
    /// Signed margin for this instance. Positive is good.
    pub margin: f64,
    /// Free-form context: the quantity measured, intermediate values, the
    /// resolution used.
    pub note: String,
}

/// Aggregated result of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Stable identifier, e.g. `"exterior-identities"` or `"comparison"`.
    pub check_id: String,
    /// Number of instances exercised.
    pub instances: usize,
    /// Minimum margin over all instances. For a check with no instances this
    /// is `f64::INFINITY` and the report is flagged as vacuous.
    pub worst_margin: f64,
    /// Tolerance the margin is compared against. Zero for exact checks.
    pub tolerance: f64,
    /// `worst_margin >= -tolerance`.
    pub passed: bool,
    /// Per-instance records, in execution order.
    pub details: Vec<InstanceRecord>,
}

impl CheckReport {
    /// Assemble a report from instance records, applying the uniform pass
    /// rule. A check that ran zero instances passes vacuously but is flagged
    /// in its display line so it can never be mistaken for a real pass.
    pub fn from_instances(
        check_id: impl Into<String>,
        tolerance: f64,
        details: Vec<InstanceRecord>,
    ) -> Self {
        let worst_margin = details
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min);
        let passed = worst_margin >= -tolerance;
        CheckReport {
            check_id: check_id.into(),
            instances: details.len(),
            worst_margin,
            tolerance,
            passed,
            details,
        }
    }

    /// True when the check passed without exercising a single instance.
    pub fn is_vacuous(&self) -> bool {
        self.instances == 0
    }

    /// The worst (most negative) instance, if any instance was recorded.
    pub fn worst_instance(&self) -> Option<&InstanceRecord> {
        self.details
            .iter()
            .min_by(|a, b| a.margin.partial_cmp(&b.margin).unwrap_or(std::cmp::Ordering::Equal))
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "pass" } else { "FAIL" };
        write!(
            f,
            "[{verdict}] {id}: {n} instances, worst margin {m:.3e}, tolerance {t:.3e}",
            id = self.check_id,
            n = self.instances,
            m = self.worst_margin,
            t = self.tolerance,
        )?;
        if self.is_vacuous() {
            write!(f, " (no instances; vacuous)")?;
        }
        Ok(())
    }
}
