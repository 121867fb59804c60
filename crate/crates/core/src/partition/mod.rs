//! N-way distribution of protection units across program variants.
//!
//! Every unit lands in exactly one variant, so the union of the variants is
//! the full protection set and variant loads sum to the distributable
//! total. [`plan_partition`] is the production planner (longest processing
//! time first); [`oracle_partition`] is an exhaustive search used to check
//! it on small instances.

mod oracle;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use num_rational::Ratio;
use thiserror::Error;

use crate::profile::ConflictSet;
use crate::text::{expect_header, read_uint, significant_lines, UintToken};
use crate::Ticks;

pub use oracle::{oracle_partition, oracle_partition_with, OracleLimits};

/// A protection unit reduced to what the planner needs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightedUnit {
    pub id: String,
    pub cost: Ticks,
}

impl WeightedUnit {
    pub fn new(id: impl Into<String>, cost: Ticks) -> Self {
        Self { id: id.into(), cost }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("variant count must be at least 1")]
    NoVariants,
    #[error("unit `{0}` listed more than once")]
    DuplicateUnit(String),
    #[error("conflict references unknown unit `{0}`")]
    UnknownConflictUnit(String),
    #[error("no conflict-feasible variant for unit `{0}`")]
    Infeasible(String),
    #[error("{count} units exceed the exhaustive search limit of {limit}")]
    TooLarge { count: usize, limit: usize },
    #[error("exhaustive search exceeded its time budget")]
    Timeout,
    #[error("plan does not cover the same units as the input")]
    PlanMismatch,
    #[error("variant index {index} out of range for {n} variants")]
    VariantOutOfRange { index: usize, n: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Assignment of units to `n` variants with the resulting loads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    n: usize,
    assignment: IndexMap<String, usize>,
    loads: Vec<Ticks>,
}

impl PartitionPlan {
    /// Builds a plan from an explicit assignment, computing loads from
    /// `units`. Every assigned id must be a listed unit.
    pub fn from_assignment(
        units: &[WeightedUnit],
        n: usize,
        assignment: impl IntoIterator<Item = (String, usize)>,
    ) -> Result<Self, PartitionError> {
        if n == 0 {
            return Err(PartitionError::NoVariants);
        }
        let costs: HashMap<&str, Ticks> = units.iter().map(|u| (u.id.as_str(), u.cost)).collect();
        let mut map = IndexMap::new();
        let mut loads = vec![0; n];
        for (id, variant) in assignment {
            if variant >= n {
                return Err(PartitionError::VariantOutOfRange { index: variant, n });
            }
            let cost = *costs.get(id.as_str()).ok_or(PartitionError::PlanMismatch)?;
            if map.insert(id.clone(), variant).is_some() {
                return Err(PartitionError::DuplicateUnit(id));
            }
            loads[variant] += cost;
        }
        Ok(Self { n, assignment: map, loads })
    }

    /// Builds a plan from raw parts without checking consistency. Use
    /// [`validate_plan`] to audit the result.
    pub fn from_parts(n: usize, assignment: IndexMap<String, usize>, loads: Vec<Ticks>) -> Self {
        Self { n, assignment, loads }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn assignment(&self) -> &IndexMap<String, usize> {
        &self.assignment
    }

    pub fn variant_of(&self, unit: &str) -> Option<usize> {
        self.assignment.get(unit).copied()
    }

    pub fn loads(&self) -> &[Ticks] {
        &self.loads
    }

    pub fn makespan(&self) -> Ticks {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    /// Units assigned to `variant`, in plan order.
    pub fn units_of(&self, variant: usize) -> impl Iterator<Item = &str> {
        self.assignment.iter().filter(move |(_, v)| **v == variant).map(|(id, _)| id.as_str())
    }

    /// Variants that received no unit at all. Allowed, but such a replica
    /// carries no protection.
    pub fn empty_variants(&self) -> Vec<usize> {
        let used: HashSet<usize> = self.assignment.values().copied().collect();
        (0..self.n).filter(|v| !used.contains(v)).collect()
    }

    pub fn has_empty_variant(&self) -> bool {
        !self.empty_variants().is_empty()
    }

    /// Parses the plan file format.
    pub fn parse(text: &str) -> Result<Self, PartitionError> {
        let syntax = |line: usize, message: String| PartitionError::Syntax { line, message };
        let uint = |line: usize, tok: &str| match read_uint(tok) {
            UintToken::Value(v) => Ok(v),
            _ => Err(syntax(line, format!("invalid number `{tok}`"))),
        };

        let mut lines = significant_lines(text);
        let header = lines.next();
        expect_header(header.as_ref(), "plan-version").map_err(|(l, m)| syntax(l, m))?;

        let mut n = None;
        let mut assignment = IndexMap::new();
        let mut loads = BTreeMap::new();
        for line in lines {
            let at = line.number;
            match line.tokens.as_slice() {
                ["n", value] => {
                    if n.is_some() {
                        return Err(syntax(at, "duplicate `n` line".into()));
                    }
                    n = Some(uint(at, value)? as usize);
                }
                ["assign", id, variant] => {
                    let variant = uint(at, variant)? as usize;
                    if assignment.insert(id.to_string(), variant).is_some() {
                        return Err(PartitionError::DuplicateUnit(id.to_string()));
                    }
                }
                ["load", variant, value] => {
                    let variant = uint(at, variant)? as usize;
                    if loads.insert(variant, uint(at, value)?).is_some() {
                        return Err(syntax(at, format!("duplicate load for variant {variant}")));
                    }
                }
                _ => return Err(syntax(at, format!("unexpected `{}`", line.tokens[0]))),
            }
        }
        let n = n.ok_or_else(|| syntax(0, "missing `n` line".into()))?;
        if n == 0 {
            return Err(PartitionError::NoVariants);
        }
        if let Some(&index) = assignment.values().find(|v| **v >= n) {
            return Err(PartitionError::VariantOutOfRange { index, n });
        }
        if loads.len() != n || loads.keys().copied().ne(0..n) {
            return Err(syntax(0, format!("expected exactly one `load` line per variant 0..{n}")));
        }
        Ok(Self { n, assignment, loads: loads.into_values().collect() })
    }
}

impl fmt::Display for PartitionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "plan-version 1")?;
        writeln!(f, "n {}", self.n)?;
        for (id, variant) in &self.assignment {
            writeln!(f, "assign {id} {variant}")?;
        }
        for (variant, load) in self.loads.iter().enumerate() {
            writeln!(f, "load {variant} {load}")?;
        }
        Ok(())
    }
}

/// Fairness and makespan of a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanScore {
    /// Σ |load_i − total/n|, exact.
    pub objective: Ratio<u128>,
    pub makespan: Ticks,
    /// total/n, exact.
    pub target: Ratio<u128>,
}

impl fmt::Display for PlanScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "objective {} makespan {} target {}", self.objective, self.makespan, self.target)
    }
}

/// n · Σ |load_i − total/n| = Σ |n·load_i − total|, kept integral.
pub(crate) fn scaled_objective(loads: &[Ticks]) -> u128 {
    let n = loads.len() as u128;
    let total: u128 = loads.iter().map(|&l| l as u128).sum();
    loads.iter().map(|&l| (n * l as u128).abs_diff(total)).sum()
}

pub(crate) fn score_loads(loads: &[Ticks]) -> PlanScore {
    let n = loads.len().max(1) as u128;
    let total: u128 = loads.iter().map(|&l| l as u128).sum();
    PlanScore {
        objective: Ratio::new(scaled_objective(loads), n),
        makespan: loads.iter().copied().max().unwrap_or(0),
        target: Ratio::new(total, n),
    }
}

fn check_units(units: &[WeightedUnit]) -> Result<(), PartitionError> {
    let mut seen = HashSet::new();
    for unit in units {
        if !seen.insert(unit.id.as_str()) {
            return Err(PartitionError::DuplicateUnit(unit.id.clone()));
        }
    }
    Ok(())
}

/// Conflict adjacency by unit index. Fails on ids that are not listed.
pub(crate) fn conflict_adjacency(
    units: &[WeightedUnit],
    conflicts: Option<&ConflictSet>,
) -> Result<Vec<Vec<usize>>, PartitionError> {
    let index: HashMap<&str, usize> =
        units.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();
    let mut adjacency = vec![Vec::new(); units.len()];
    for (a, b) in conflicts.into_iter().flat_map(|c| c.iter()) {
        let ia = *index.get(a).ok_or_else(|| PartitionError::UnknownConflictUnit(a.into()))?;
        let ib = *index.get(b).ok_or_else(|| PartitionError::UnknownConflictUnit(b.into()))?;
        adjacency[ia].push(ib);
        adjacency[ib].push(ia);
    }
    Ok(adjacency)
}

/// Greedy longest-processing-time-first planner.
///
/// Units are taken by descending cost (ties by ascending id) and each goes
/// to the least-loaded variant that holds none of its conflict partners,
/// lowest index first on ties. Conflict handling is greedy: the planner
/// fails with [`PartitionError::Infeasible`] as soon as a unit has no
/// feasible variant, even if a different earlier placement would have
/// left room for it.
pub fn plan_partition(
    units: &[WeightedUnit],
    n: usize,
    conflicts: Option<&ConflictSet>,
) -> Result<PartitionPlan, PartitionError> {
    if n == 0 {
        return Err(PartitionError::NoVariants);
    }
    check_units(units)?;
    let adjacency = conflict_adjacency(units, conflicts)?;

    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| units[b].cost.cmp(&units[a].cost).then_with(|| units[a].id.cmp(&units[b].id)));

    let mut loads = vec![0; n];
    let mut placed: Vec<Option<usize>> = vec![None; units.len()];
    for idx in order {
        let blocked: HashSet<usize> = adjacency[idx].iter().filter_map(|&j| placed[j]).collect();
        let target = (0..n)
            .filter(|v| !blocked.contains(v))
            .min_by_key(|&v| (loads[v], v))
            .ok_or_else(|| PartitionError::Infeasible(units[idx].id.clone()))?;
        loads[target] += units[idx].cost;
        placed[idx] = Some(target);
    }

    let assignment = units
        .iter()
        .zip(placed)
        .map(|(u, v)| (u.id.clone(), v.expect("every unit placed")))
        .collect();
    Ok(PartitionPlan { n, assignment, loads })
}

/// Scores a plan against the units it should cover. Loads are recomputed
/// from `units`, not taken from the plan.
pub fn evaluate_plan(plan: &PartitionPlan, units: &[WeightedUnit]) -> Result<PlanScore, PartitionError> {
    if plan.assignment.len() != units.len() {
        return Err(PartitionError::PlanMismatch);
    }
    let mut loads = vec![0; plan.n.max(1)];
    for unit in units {
        let variant = plan.variant_of(&unit.id).ok_or(PartitionError::PlanMismatch)?;
        if variant >= plan.n {
            return Err(PartitionError::VariantOutOfRange { index: variant, n: plan.n });
        }
        loads[variant] += unit.cost;
    }
    Ok(score_loads(&loads))
}

/// A single way in which a plan fails to be a valid distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Unit from the input that no variant carries.
    Coverage(String),
    /// Assigned id that is not part of the input.
    UnknownUnit(String),
    VariantOutOfRange { unit: String, variant: usize },
    LoadCount { expected: usize, found: usize },
    LoadMismatch { variant: usize, recorded: Ticks, actual: Ticks },
    /// Σ loads differs from the input's distributable total.
    Conservation { loads: u128, total: u128 },
    /// Two conflicting units share a variant.
    Conflict(String, String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Coverage(u) => write!(f, "COVERAGE{{{u}}}"),
            Violation::UnknownUnit(u) => write!(f, "UNKNOWN{{{u}}}"),
            Violation::VariantOutOfRange { unit, variant } => write!(f, "RANGE{{{unit}->{variant}}}"),
            Violation::LoadCount { expected, found } => write!(f, "LOAD_COUNT{{{expected},{found}}}"),
            Violation::LoadMismatch { variant, recorded, actual } => {
                write!(f, "LOAD{{{variant}: recorded {recorded}, actual {actual}}}")
            }
            Violation::Conservation { loads, total } => write!(f, "CONSERVATION{{{loads}!={total}}}"),
            Violation::Conflict(a, b) => write!(f, "CONFLICT{{{a},{b}}}"),
        }
    }
}

/// Audits coverage, disjointness, load conservation and conflict
/// feasibility. An empty result means the plan is valid.
pub fn validate_plan(
    plan: &PartitionPlan,
    units: &[WeightedUnit],
    conflicts: Option<&ConflictSet>,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    let costs: HashMap<&str, Ticks> = units.iter().map(|u| (u.id.as_str(), u.cost)).collect();

    for unit in units {
        if !plan.assignment.contains_key(&unit.id) {
            violations.push(Violation::Coverage(unit.id.clone()));
        }
    }
    let mut actual = vec![0u64; plan.n];
    for (id, &variant) in &plan.assignment {
        let Some(&cost) = costs.get(id.as_str()) else {
            violations.push(Violation::UnknownUnit(id.clone()));
            continue;
        };
        if variant >= plan.n {
            violations.push(Violation::VariantOutOfRange { unit: id.clone(), variant });
            continue;
        }
        actual[variant] += cost;
    }

    if plan.loads.len() != plan.n {
        violations.push(Violation::LoadCount { expected: plan.n, found: plan.loads.len() });
    } else {
        for (variant, (&recorded, &actual)) in plan.loads.iter().zip(&actual).enumerate() {
            if recorded != actual {
                violations.push(Violation::LoadMismatch { variant, recorded, actual });
            }
        }
    }
    let load_sum: u128 = plan.loads.iter().map(|&l| l as u128).sum();
    let total: u128 = units.iter().map(|u| u.cost as u128).sum();
    if load_sum != total {
        violations.push(Violation::Conservation { loads: load_sum, total });
    }

    for (a, b) in conflicts.into_iter().flat_map(|c| c.iter()) {
        if let (Some(va), Some(vb)) = (plan.variant_of(a), plan.variant_of(b)) {
            if va == vb {
                violations.push(Violation::Conflict(a.into(), b.into()));
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn units(spec: &[(&str, Ticks)]) -> Vec<WeightedUnit> {
        spec.iter().map(|(id, c)| WeightedUnit::new(*id, *c)).collect()
    }

    fn five() -> Vec<WeightedUnit> {
        units(&[("a", 5), ("b", 4), ("c", 3), ("d", 2), ("e", 1)])
    }

    #[test]
    fn lpt_five_units_two_variants() {
        let plan = plan_partition(&five(), 2, None).unwrap();
        let got: Vec<(&str, usize)> = plan.assignment().iter().map(|(k, v)| (k.as_str(), *v)).collect();
        assert_eq!(got, vec![("a", 0), ("b", 1), ("c", 1), ("d", 0), ("e", 0)]);
        assert_eq!(plan.loads(), &[8, 7]);
        assert_eq!(plan.loads().iter().sum::<u64>(), 15);
    }

    #[test]
    fn lpt_respects_conflicts() {
        let us = units(&[("s1", 100), ("s2", 80), ("s3", 60)]);
        let conflicts: ConflictSet = [("s1", "s2")].into_iter().collect();
        let plan = plan_partition(&us, 2, Some(&conflicts)).unwrap();
        assert_eq!(plan.variant_of("s1"), Some(0));
        assert_eq!(plan.variant_of("s2"), Some(1));
        assert_eq!(plan.variant_of("s3"), Some(1));
        assert_eq!(plan.loads(), &[100, 140]);
    }

    #[test]
    fn single_variant_is_perfectly_fair() {
        let plan = plan_partition(&five(), 1, None).unwrap();
        assert!(plan.assignment().values().all(|v| *v == 0));
        assert_eq!(evaluate_plan(&plan, &five()).unwrap().objective, Ratio::from_integer(0));
    }

    #[test]
    fn three_clique_is_infeasible_in_two() {
        let us = units(&[("x", 1), ("y", 1), ("z", 1)]);
        let conflicts: ConflictSet = [("x", "y"), ("y", "z"), ("x", "z")].into_iter().collect();
        assert!(matches!(plan_partition(&us, 2, Some(&conflicts)), Err(PartitionError::Infeasible(_))));
    }

    #[test]
    fn empty_input_yields_empty_variants() {
        let plan = plan_partition(&[], 3, None).unwrap();
        assert_eq!(plan.loads(), &[0, 0, 0]);
        assert_eq!(plan.empty_variants(), vec![0, 1, 2]);
    }

    #[test]
    fn unknown_conflict_unit() {
        let conflicts: ConflictSet = [("a", "zz")].into_iter().collect();
        assert_eq!(
            plan_partition(&five(), 2, Some(&conflicts)).unwrap_err(),
            PartitionError::UnknownConflictUnit("zz".into())
        );
    }

    #[test]
    fn evaluate_examples() {
        let score = score_loads(&[8, 7]);
        assert_eq!(score.target, Ratio::new(15, 2));
        assert_eq!(score.objective, Ratio::from_integer(1));
        assert_eq!(score.makespan, 8);
        assert_eq!(score_loads(&[5, 5, 5]).objective, Ratio::from_integer(0));
        let score = score_loads(&[15, 0]);
        assert_eq!(score.objective, Ratio::from_integer(15));
        assert_eq!(score.makespan, 15);
    }

    #[test]
    fn evaluate_rejects_mismatched_units() {
        let plan = plan_partition(&five(), 2, None).unwrap();
        let fewer = units(&[("a", 5), ("b", 4)]);
        assert_eq!(evaluate_plan(&plan, &fewer).unwrap_err(), PartitionError::PlanMismatch);
        let renamed = units(&[("a", 5), ("b", 4), ("c", 3), ("d", 2), ("q", 1)]);
        assert_eq!(evaluate_plan(&plan, &renamed).unwrap_err(), PartitionError::PlanMismatch);
    }

    #[test]
    fn validate_reports_missing_unit() {
        let plan = plan_partition(&five(), 2, None).unwrap();
        let mut assignment = plan.assignment().clone();
        assignment.shift_remove("e");
        let broken = PartitionPlan::from_parts(2, assignment, vec![7, 7]);
        let violations = validate_plan(&broken, &five(), None);
        assert!(violations.contains(&Violation::Coverage("e".into())));
        assert!(violations.iter().any(|v| matches!(v, Violation::Conservation { .. })));
    }

    #[test]
    fn validate_reports_conflict() {
        let us = units(&[("s1", 100), ("s2", 80), ("s3", 60)]);
        let conflicts: ConflictSet = [("s1", "s2")].into_iter().collect();
        let plan = PartitionPlan::from_assignment(
            &us,
            2,
            [("s1".to_string(), 0), ("s2".to_string(), 0), ("s3".to_string(), 1)],
        )
        .unwrap();
        assert_eq!(validate_plan(&plan, &us, Some(&conflicts)), vec![Violation::Conflict("s1".into(), "s2".into())]);
    }

    #[test]
    fn plan_text_round_trip() {
        let plan = plan_partition(&five(), 2, None).unwrap();
        let text = plan.to_string();
        assert_eq!(text, "plan-version 1\nn 2\nassign a 0\nassign b 1\nassign c 1\nassign d 0\nassign e 0\nload 0 8\nload 1 7\n");
        let parsed = PartitionPlan::parse(&text).unwrap();
        assert_eq!(parsed, plan);
        assert_eq!(parsed.to_string(), text);
    }

    #[test]
    fn plan_parse_errors() {
        assert!(matches!(PartitionPlan::parse("plan-version 1\nassign a 0\n"), Err(PartitionError::Syntax { .. })));
        assert!(matches!(
            PartitionPlan::parse("plan-version 1\nn 2\nassign a 2\nload 0 0\nload 1 0\n"),
            Err(PartitionError::VariantOutOfRange { index: 2, n: 2 })
        ));
        assert!(matches!(
            PartitionPlan::parse("plan-version 1\nn 2\nassign a 0\nload 0 1\n"),
            Err(PartitionError::Syntax { .. })
        ));
    }
}
