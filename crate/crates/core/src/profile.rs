//! Overhead profiles and sanitizer catalogs.
//!
//! A profile lists the slowdown each protection unit adds, plus a residual
//! that no distribution can remove (metadata setup, reporting). A catalog
//! lists whole sanitizers, which pairs of them cannot share a variant, and
//! an informational synergy adjustment.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::partition::WeightedUnit;
use crate::text::{expect_header, read_uint, significant_lines, Line, UintToken};
use crate::Ticks;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate unit `{id}`")]
    DuplicateUnit { line: usize, id: String },
    #[error("line {line}: negative cost")]
    NegativeCost { line: usize },
    #[error("baseline unit `{0}` is missing from the instrumented run")]
    MissingUnit(String),
    #[error("line {line}: conflict references unknown sanitizer `{id}`")]
    UnknownIdInConflict { line: usize, id: String },
    #[error("line {line}: sanitizer `{id}` conflicts with itself")]
    SelfConflict { line: usize, id: String },
    #[error("run total {total} is below the sum of its entries ({sum})")]
    TotalBelowSum { total: Ticks, sum: Ticks },
}

fn syntax(line: usize, message: impl Into<String>) -> ProfileError {
    ProfileError::Syntax { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitKind {
    /// A function-granularity program unit (check distribution).
    CodeUnit,
    /// A whole sanitizer mechanism (sanitizer distribution).
    Sanitizer,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProtectionUnit {
    pub id: String,
    pub kind: UnitKind,
}

/// Raw costs from one profiling run. Entry order is preserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileRun {
    entries: IndexMap<String, Ticks>,
    total: Ticks,
}

impl ProfileRun {
    pub fn new(
        entries: impl IntoIterator<Item = (impl Into<String>, Ticks)>,
        total: Ticks,
    ) -> Result<Self, ProfileError> {
        let mut map = IndexMap::new();
        for (id, cost) in entries {
            let id = id.into();
            if map.insert(id.clone(), cost).is_some() {
                return Err(ProfileError::DuplicateUnit { line: 0, id });
            }
        }
        let sum = map.values().sum();
        if total < sum {
            return Err(ProfileError::TotalBelowSum { total, sum });
        }
        Ok(Self { entries: map, total })
    }

    pub fn entries(&self) -> &IndexMap<String, Ticks> {
        &self.entries
    }

    pub fn total(&self) -> Ticks {
        self.total
    }
}

/// Per-unit overheads plus the non-distributable residual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverheadProfile {
    units: Vec<(ProtectionUnit, Ticks)>,
    residual: Ticks,
}

impl OverheadProfile {
    pub fn new(
        units: impl IntoIterator<Item = (ProtectionUnit, Ticks)>,
        residual: Ticks,
    ) -> Result<Self, ProfileError> {
        let units: Vec<_> = units.into_iter().collect();
        let mut seen = HashSet::new();
        for (unit, _) in &units {
            if unit.id.is_empty() {
                return Err(syntax(0, "empty unit id"));
            }
            if !seen.insert(unit.id.as_str()) {
                return Err(ProfileError::DuplicateUnit { line: 0, id: unit.id.clone() });
            }
        }
        Ok(Self { units, residual })
    }

    pub fn units(&self) -> &[(ProtectionUnit, Ticks)] {
        &self.units
    }

    pub fn residual(&self) -> Ticks {
        self.residual
    }

    /// Sum of distributable unit overheads. The residual is not included.
    pub fn o_total(&self) -> Ticks {
        self.units.iter().map(|(_, o)| o).sum()
    }

    pub fn weighted_units(&self) -> Vec<WeightedUnit> {
        self.units.iter().map(|(u, o)| WeightedUnit::new(u.id.clone(), *o)).collect()
    }

    pub fn overhead_of(&self, id: &str) -> Option<Ticks> {
        self.units.iter().find(|(u, _)| u.id == id).map(|(_, o)| *o)
    }
}

impl fmt::Display for OverheadProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "profile-version 1")?;
        for (unit, cost) in &self.units {
            writeln!(f, "unit {} cost {}", unit.id, cost)?;
        }
        writeln!(f, "residual {}", self.residual)
    }
}

impl fmt::Display for ProfileRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "profile-version 1")?;
        for (id, cost) in &self.entries {
            writeln!(f, "unit {id} cost {cost}")?;
        }
        writeln!(f, "total {}", self.total)
    }
}

/// Unordered pairs of ids that must never share a variant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConflictSet {
    pairs: BTreeSet<(String, String)>,
}

impl ConflictSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the pair `{a, b}`. Returns false if it was already present.
    pub fn insert(&mut self, a: impl Into<String>, b: impl Into<String>) -> bool {
        let (a, b) = (a.into(), b.into());
        let pair = if a <= b { (a, b) } else { (b, a) };
        self.pairs.insert(pair)
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        let pair = if a <= b { (a, b) } else { (b, a) };
        self.pairs.iter().any(|(x, y)| x == pair.0 && y == pair.1)
    }

    /// Pairs in canonical `(smaller, larger)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl<A: Into<String>, B: Into<String>> FromIterator<(A, B)> for ConflictSet {
    fn from_iter<T: IntoIterator<Item = (A, B)>>(iter: T) -> Self {
        let mut set = ConflictSet::new();
        for (a, b) in iter {
            set.insert(a, b);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SanitizerCatalog {
    sanitizers: Vec<(ProtectionUnit, Ticks)>,
    conflicts: ConflictSet,
    synergy: i64,
}

impl SanitizerCatalog {
    pub fn sanitizers(&self) -> &[(ProtectionUnit, Ticks)] {
        &self.sanitizers
    }

    pub fn conflicts(&self) -> &ConflictSet {
        &self.conflicts
    }

    /// Combined-enforcement adjustment; informational, never partitioned.
    pub fn synergy(&self) -> i64 {
        self.synergy
    }

    pub fn o_total(&self) -> Ticks {
        self.sanitizers.iter().map(|(_, o)| o).sum()
    }

    pub fn weighted_units(&self) -> Vec<WeightedUnit> {
        self.sanitizers.iter().map(|(u, o)| WeightedUnit::new(u.id.clone(), *o)).collect()
    }
}

impl fmt::Display for SanitizerCatalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "catalog-version 1")?;
        for (unit, cost) in &self.sanitizers {
            writeln!(f, "san {} cost {}", unit.id, cost)?;
        }
        for (a, b) in self.conflicts.iter() {
            writeln!(f, "conflict {a} {b}")?;
        }
        writeln!(f, "synergy {}", self.synergy)
    }
}

fn cost_token(line: &Line<'_>, token: &str) -> Result<Ticks, ProfileError> {
    match read_uint(token) {
        UintToken::Value(v) => Ok(v),
        UintToken::Negative => Err(ProfileError::NegativeCost { line: line.number }),
        UintToken::Malformed => Err(syntax(line.number, format!("invalid cost `{token}`"))),
    }
}

/// Parses `unit <id> cost <uint>`; returns `None` for other keywords.
fn unit_line<'a>(line: &Line<'a>) -> Result<Option<(&'a str, Ticks)>, ProfileError> {
    if line.tokens[0] != "unit" {
        return Ok(None);
    }
    match line.tokens.as_slice() {
        ["unit", id, "cost", cost] => Ok(Some((id, cost_token(line, cost)?))),
        _ => Err(syntax(line.number, "expected `unit <id> cost <uint>`")),
    }
}

fn header_error((line, message): (usize, String)) -> ProfileError {
    syntax(line, message)
}

/// Parses an overhead profile (`unit` lines and an optional `residual`).
pub fn load_profile(text: &str) -> Result<OverheadProfile, ProfileError> {
    let mut lines = significant_lines(text);
    let header = lines.next();
    expect_header(header.as_ref(), "profile-version").map_err(header_error)?;

    let mut units: Vec<(ProtectionUnit, Ticks)> = Vec::new();
    let mut seen = HashSet::new();
    let mut residual = None;
    for line in lines {
        if let Some((id, cost)) = unit_line(&line)? {
            if !seen.insert(id.to_string()) {
                return Err(ProfileError::DuplicateUnit { line: line.number, id: id.into() });
            }
            units.push((ProtectionUnit { id: id.into(), kind: UnitKind::CodeUnit }, cost));
            continue;
        }
        match line.tokens.as_slice() {
            ["residual", value] => {
                if residual.is_some() {
                    return Err(syntax(line.number, "duplicate `residual` line"));
                }
                residual = Some(cost_token(&line, value)?);
            }
            _ => return Err(syntax(line.number, format!("unexpected `{}`", line.tokens[0]))),
        }
    }
    OverheadProfile::new(units, residual.unwrap_or(0))
}

/// Parses a profiling run (`unit` lines and a mandatory `total`).
pub fn load_profile_run(text: &str) -> Result<ProfileRun, ProfileError> {
    let mut lines = significant_lines(text);
    let header = lines.next();
    expect_header(header.as_ref(), "profile-version").map_err(header_error)?;

    let mut entries = IndexMap::new();
    let mut total = None;
    for line in lines {
        if let Some((id, cost)) = unit_line(&line)? {
            if entries.insert(id.to_string(), cost).is_some() {
                return Err(ProfileError::DuplicateUnit { line: line.number, id: id.into() });
            }
            continue;
        }
        match line.tokens.as_slice() {
            ["total", value] => {
                if total.is_some() {
                    return Err(syntax(line.number, "duplicate `total` line"));
                }
                total = Some(cost_token(&line, value)?);
            }
            _ => return Err(syntax(line.number, format!("unexpected `{}`", line.tokens[0]))),
        }
    }
    let total = total.ok_or_else(|| syntax(0, "missing `total` line"))?;
    ProfileRun::new(entries, total)
}

/// Parses a sanitizer catalog.
pub fn load_catalog(text: &str) -> Result<SanitizerCatalog, ProfileError> {
    let mut lines = significant_lines(text);
    let header = lines.next();
    expect_header(header.as_ref(), "catalog-version").map_err(header_error)?;

    let mut sanitizers: Vec<(ProtectionUnit, Ticks)> = Vec::new();
    let mut seen = HashSet::new();
    let mut pending_conflicts = Vec::new();
    let mut synergy = None;
    for line in lines {
        match line.tokens.as_slice() {
            ["san", id, "cost", cost] => {
                let cost = cost_token(&line, cost)?;
                if !seen.insert(id.to_string()) {
                    return Err(ProfileError::DuplicateUnit { line: line.number, id: (*id).into() });
                }
                sanitizers.push((ProtectionUnit { id: (*id).into(), kind: UnitKind::Sanitizer }, cost));
            }
            ["conflict", a, b] => {
                if a == b {
                    return Err(ProfileError::SelfConflict { line: line.number, id: (*a).into() });
                }
                pending_conflicts.push((line.number, a.to_string(), b.to_string()));
            }
            ["synergy", value] => {
                if synergy.is_some() {
                    return Err(syntax(line.number, "duplicate `synergy` line"));
                }
                let parsed = value
                    .parse::<i64>()
                    .map_err(|_| syntax(line.number, format!("invalid synergy `{value}`")))?;
                synergy = Some(parsed);
            }
            _ => return Err(syntax(line.number, format!("unexpected `{}`", line.tokens[0]))),
        }
    }

    // Conflicts may precede the sanitizers they name.
    let mut conflicts = ConflictSet::new();
    for (line, a, b) in pending_conflicts {
        for id in [&a, &b] {
            if !seen.contains(id) {
                return Err(ProfileError::UnknownIdInConflict { line, id: id.clone() });
            }
        }
        conflicts.insert(a, b);
    }
    Ok(SanitizerCatalog { sanitizers, conflicts, synergy: synergy.unwrap_or(0) })
}

/// Per-unit overhead = instrumented − baseline, clamped at zero. Units only
/// present in the instrumented run count at full cost. The residual is
/// whatever part of the total slowdown the units do not explain.
pub fn derive_overhead(
    baseline: &ProfileRun,
    instrumented: &ProfileRun,
) -> Result<OverheadProfile, ProfileError> {
    let mut units = Vec::with_capacity(instrumented.entries.len());
    for (id, base_cost) in &baseline.entries {
        let inst_cost = instrumented
            .entries
            .get(id)
            .ok_or_else(|| ProfileError::MissingUnit(id.clone()))?;
        units.push((
            ProtectionUnit { id: id.clone(), kind: UnitKind::CodeUnit },
            inst_cost.saturating_sub(*base_cost),
        ));
    }
    for (id, cost) in &instrumented.entries {
        if !baseline.entries.contains_key(id) {
            units.push((ProtectionUnit { id: id.clone(), kind: UnitKind::CodeUnit }, *cost));
        }
    }
    let attributed: i128 = units.iter().map(|(_, o)| *o as i128).sum();
    let slowdown = instrumented.total as i128 - baseline.total as i128;
    let residual = (slowdown - attributed).max(0) as Ticks;
    OverheadProfile::new(units, residual)
}
