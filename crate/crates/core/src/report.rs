use std::fmt;

/// Outcome of one named invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Indices of the entities violating the check (tets, facets, rows...).
    pub offending: Vec<usize>,
    pub detail: String,
}

/// Diagnostic report listing every invariant with its verdict.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub(crate) fn push(
        &mut self,
        name: &'static str,
        offending: Vec<usize>,
        detail: impl Into<String>,
    ) {
        self.checks.push(CheckResult {
            name,
            passed: offending.is_empty(),
            offending,
            detail: detail.into(),
        });
    }

    pub(crate) fn push_flag(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name,
            passed,
            offending: Vec::new(),
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "FAIL" };
            write!(f, "{:<32} {}", c.name, verdict)?;
            if !c.offending.is_empty() {
                let shown: Vec<String> = c.offending.iter().take(8).map(|i| i.to_string()).collect();
                write!(f, " [{}{}]", shown.join(","), if c.offending.len() > 8 { ",..." } else { "" })?;
            }
            if !c.detail.is_empty() {
                write!(f, " ({})", c.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
