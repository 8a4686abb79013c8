use serde::{Deserialize, Serialize};

/// One verified inequality or property.
///
/// `lhs` and `rhs` are the two sides as measured; for plain properties they are `1` and `1`
/// (or `0` and `1` on failure). `reference` names the result being checked in words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub reference: String,
    pub lhs: f64,
    pub rhs: f64,
    pub empirical_c: Option<f64>,
    pub pass: bool,
}

impl CheckRecord {
    /// Passes when `lhs <= rhs`.
    pub fn at_most(name: impl Into<String>, reference: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, reference, lhs, rhs, lhs <= rhs)
    }

    /// Passes when `lhs >= rhs`.
    pub fn at_least(name: impl Into<String>, reference: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, reference, lhs, rhs, lhs >= rhs)
    }

    pub fn holds(name: impl Into<String>, reference: &str, ok: bool) -> Self {
        Self::new(name, reference, if ok { 1.0 } else { 0.0 }, 1.0, ok)
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.empirical_c = Some(c);
        self
    }

    fn new(name: impl Into<String>, reference: &str, lhs: f64, rhs: f64, pass: bool) -> Self {
        Self { name: name.into(), reference: reference.to_string(), lhs, rhs, empirical_c: None, pass }
    }
}

/// Every check of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub checks: Vec<CheckRecord>,
}

impl CriterionOutcome {
    pub fn new(id: u32, title: &str) -> Self {
        Self { id, title: title.to_string(), checks: Vec::new() }
    }

    pub fn push(&mut self, check: CheckRecord) {
        self.checks.push(check);
    }

    /// True when there is at least one check and all of them pass.
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// `checks.csv` body: `criterion,name,reference,lhs,rhs,empirical_c,pass`.
pub fn checks_csv(outcomes: &[CriterionOutcome]) -> String {
    let mut out = String::from("criterion,name,reference,lhs,rhs,empirical_c,pass\n");
    for o in outcomes {
        for c in &o.checks {
            let constant = c.empirical_c.map(|v| format!("{v:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:e},{:e},{},{}\n",
                o.id,
                c.name,
                c.reference.replace(',', ";"),
                c.lhs,
                c.rhs,
                constant,
                c.pass
            ));
        }
    }
    out
}
