use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lang::{Expr, SourceUnit, Stmt, StmtKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCount {
    pub true_taken: u64,
    pub false_taken: u64,
}

/// Line and branch coverage. Branch sites are `if` conditions and loop
/// conditions, keyed by source line. Fractions are taken over the lines
/// and sites of methods reachable from the tested entry points.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub line_hits: BTreeMap<u32, u64>,
    pub branch_outcomes: BTreeMap<u32, BranchCount>,
    pub reachable_lines: BTreeSet<u32>,
    pub branch_sites: BTreeSet<u32>,
}

impl CoverageReport {
    /// Empty report whose denominators cover everything reachable from
    /// `entry`.
    pub fn for_entry(unit: &SourceUnit, entry: &str) -> Self {
        let mut report = CoverageReport::default();
        for m in reachable_methods(unit, entry) {
            if let Some(method) = unit.method(&m) {
                method.walk(&mut |s| {
                    if matches!(s.kind, StmtKind::Block(_)) || s.line.0 == 0 {
                        return;
                    }
                    report.reachable_lines.insert(s.line.0);
                    if matches!(
                        s.kind,
                        StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::For { .. }
                    ) {
                        report.branch_sites.insert(s.line.0);
                    }
                });
            }
        }
        report
    }

    pub(crate) fn hit_line(&mut self, line: u32) {
        if line > 0 {
            *self.line_hits.entry(line).or_default() += 1;
        }
    }

    pub(crate) fn hit_branch(&mut self, line: u32, taken: bool) {
        if line == 0 {
            return;
        }
        let c = self.branch_outcomes.entry(line).or_default();
        if taken {
            c.true_taken += 1;
        } else {
            c.false_taken += 1;
        }
    }

    /// Union of two reports. Associative and commutative.
    pub fn merge(&mut self, other: &CoverageReport) {
        for (l, n) in &other.line_hits {
            *self.line_hits.entry(*l).or_default() += n;
        }
        for (l, c) in &other.branch_outcomes {
            let e = self.branch_outcomes.entry(*l).or_default();
            e.true_taken += c.true_taken;
            e.false_taken += c.false_taken;
        }
        self.reachable_lines
            .extend(other.reachable_lines.iter().copied());
        self.branch_sites.extend(other.branch_sites.iter().copied());
    }

    pub fn line_coverage(&self) -> f64 {
        if self.reachable_lines.is_empty() {
            return 1.0;
        }
        let hit = self
            .reachable_lines
            .iter()
            .filter(|l| self.line_hits.get(l).copied().unwrap_or(0) > 0)
            .count();
        hit as f64 / self.reachable_lines.len() as f64
    }

    /// Fraction of (site, outcome) pairs observed; vacuously 1 with no
    /// branch sites.
    pub fn branch_coverage(&self) -> f64 {
        if self.branch_sites.is_empty() {
            return 1.0;
        }
        let taken: usize = self
            .branch_sites
            .iter()
            .map(|l| {
                let c = self.branch_outcomes.get(l).copied().unwrap_or_default();
                usize::from(c.true_taken > 0) + usize::from(c.false_taken > 0)
            })
            .sum();
        taken as f64 / (2 * self.branch_sites.len()) as f64
    }
}

fn calls_in(stmt: &Stmt, out: &mut BTreeSet<String>) {
    stmt.walk(&mut |s| {
        if let StmtKind::Call(name, _) = &s.kind {
            out.insert(name.clone());
        }
        for e in s.own_exprs() {
            e.walk(&mut |e| {
                if let Expr::Call(name, _) = e {
                    out.insert(name.clone());
                }
            });
        }
    });
}

/// Methods reachable through the call graph from `entry`, including it.
pub fn reachable_methods(unit: &SourceUnit, entry: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![entry.to_string()];
    while let Some(m) = stack.pop() {
        if !seen.insert(m.clone()) {
            continue;
        }
        if let Some(method) = unit.method(&m) {
            let mut callees = BTreeSet::new();
            for s in &method.body {
                calls_in(s, &mut callees);
            }
            stack.extend(callees.into_iter().filter(|c| !seen.contains(c)));
        }
    }
    seen
}
