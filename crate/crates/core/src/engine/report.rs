//! Simulation verdicts and the report file format.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use super::metrics::{GapStats, Metrics};
use crate::text::{expect_header, read_uint, significant_lines, UintToken};
use crate::Ticks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    /// Follower's next synchronized syscall differs (or is missing).
    Sequence,
    /// Same syscall, different argument digest.
    Argument,
}

impl DivergenceKind {
    fn token(self) -> &'static str {
        match self {
            DivergenceKind::Sequence => "sequence",
            DivergenceKind::Argument => "argument",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Alert {
        kind: DivergenceKind,
        /// The follower at which divergence was observed.
        variant: usize,
        /// 1-based position in the group's synchronized-syscall stream.
        ordinal: u64,
        /// Unit whose report write exposed the divergence, if any.
        unit: Option<String>,
    },
}

impl Verdict {
    pub fn is_clean(&self) -> bool {
        matches!(self, Verdict::Clean)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationReport {
    pub verdict: Verdict,
    pub finish: Vec<Ticks>,
    pub o_overall: Ticks,
    pub o_sync: Ticks,
    pub gaps: Vec<(usize, GapStats)>,
    pub locks_replayed: u64,
}

impl SimulationReport {
    pub fn from_metrics(verdict: Verdict, metrics: Metrics) -> Self {
        let report = Self {
            verdict,
            finish: metrics.finish,
            o_overall: metrics.o_overall,
            o_sync: metrics.o_sync,
            gaps: metrics.gaps,
            locks_replayed: metrics.locks_replayed,
        };
        assert!(report.identity_holds(), "o_overall decomposition broken");
        report
    }

    /// `o_overall = max(finish) + o_sync`.
    pub fn identity_holds(&self) -> bool {
        self.finish.iter().copied().max().unwrap_or(0).checked_add(self.o_sync) == Some(self.o_overall)
    }

    pub fn max_gap(&self) -> u64 {
        self.gaps.iter().map(|(_, g)| g.max).max().unwrap_or(0)
    }

    /// Human-oriented multi-line rendering.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        match &self.verdict {
            Verdict::Clean => out.push_str("verdict:    CLEAN (all variants reached end of trace)\n"),
            Verdict::Alert { kind, variant, ordinal, unit } => {
                out.push_str(&format!(
                    "verdict:    ALERT {} divergence at variant {variant}, synchronized syscall #{ordinal}\n",
                    kind.token()
                ));
                if let Some(unit) = unit {
                    out.push_str(&format!("detected by: {unit}\n"));
                }
            }
        }
        for (v, t) in self.finish.iter().enumerate() {
            let role = if v == 0 { "leader" } else { "follower" };
            out.push_str(&format!("variant {v} ({role}): finish {t} ticks\n"));
        }
        out.push_str(&format!("o_overall:  {}\no_sync:     {}\n", self.o_overall, self.o_sync));
        for (v, g) in &self.gaps {
            out.push_str(&format!("gap v{v}:     max {} mean {}\n", g.max, g.mean));
        }
        out.push_str(&format!("locks replayed: {}\n", self.locks_replayed));
        out
    }
}

impl fmt::Display for SimulationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "report-version 1")?;
        match &self.verdict {
            Verdict::Clean => writeln!(f, "verdict clean")?,
            Verdict::Alert { kind, variant, ordinal, unit } => {
                write!(f, "verdict alert kind={} variant={variant} ordinal={ordinal}", kind.token())?;
                if let Some(unit) = unit {
                    write!(f, " unit={unit}")?;
                }
                writeln!(f)?;
            }
        }
        for (v, t) in self.finish.iter().enumerate() {
            writeln!(f, "finish {v} {t}")?;
        }
        writeln!(f, "o-overall {}", self.o_overall)?;
        writeln!(f, "o-sync {}", self.o_sync)?;
        for (v, g) in &self.gaps {
            writeln!(f, "gap {v} max={} mean={}", g.max, g.mean)?;
        }
        writeln!(f, "locks-replayed {}", self.locks_replayed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ReportParseError {
    pub line: usize,
    pub message: String,
}

impl FromStr for SimulationReport {
    type Err = ReportParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |line: usize, message: String| ReportParseError { line, message };
        let uint = |line: usize, tok: &str| match read_uint(tok) {
            UintToken::Value(v) => Ok(v),
            _ => Err(err(line, format!("invalid number `{tok}`"))),
        };
        let keyed = |line: usize, tok: &str, key: &str| -> Result<String, ReportParseError> {
            tok.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| err(line, format!("expected `{key}=...`, got `{tok}`")))
        };

        let mut lines = significant_lines(text);
        let header = lines.next();
        expect_header(header.as_ref(), "report-version").map_err(|(l, m)| err(l, m))?;

        let mut verdict = None;
        let mut finish = Vec::new();
        let mut o_overall = None;
        let mut o_sync = None;
        let mut gaps = Vec::new();
        let mut locks_replayed = None;
        for line in lines {
            let at = line.number;
            match line.tokens.as_slice() {
                ["verdict", "clean"] => verdict = Some(Verdict::Clean),
                ["verdict", "alert", kind, variant, ordinal, rest @ ..] => {
                    let kind = match keyed(at, kind, "kind")?.as_str() {
                        "sequence" => DivergenceKind::Sequence,
                        "argument" => DivergenceKind::Argument,
                        other => return Err(err(at, format!("unknown divergence kind `{other}`"))),
                    };
                    let unit = match rest {
                        [] => None,
                        [unit] => Some(keyed(at, unit, "unit")?),
                        _ => return Err(err(at, "trailing tokens after verdict".into())),
                    };
                    verdict = Some(Verdict::Alert {
                        kind,
                        variant: uint(at, &keyed(at, variant, "variant")?)? as usize,
                        ordinal: uint(at, &keyed(at, ordinal, "ordinal")?)?,
                        unit,
                    });
                }
                ["finish", v, t] => {
                    if uint(at, v)? as usize != finish.len() {
                        return Err(err(at, "finish lines must be in variant order".into()));
                    }
                    finish.push(uint(at, t)?);
                }
                ["o-overall", t] => o_overall = Some(uint(at, t)?),
                ["o-sync", t] => o_sync = Some(uint(at, t)?),
                ["gap", v, max, mean] => {
                    let max = uint(at, &keyed(at, max, "max")?)?;
                    let mean_text = keyed(at, mean, "mean")?;
                    let mean = mean_text
                        .parse::<Ratio<u64>>()
                        .map_err(|_| err(at, format!("invalid rational `{mean_text}`")))?;
                    gaps.push((uint(at, v)? as usize, GapStats { max, mean }));
                }
                ["locks-replayed", n] => locks_replayed = Some(uint(at, n)?),
                _ => return Err(err(at, format!("unexpected `{}`", line.tokens[0]))),
            }
        }
        let missing = |what: &str| err(0, format!("missing `{what}` line"));
        Ok(SimulationReport {
            verdict: verdict.ok_or_else(|| missing("verdict"))?,
            finish,
            o_overall: o_overall.ok_or_else(|| missing("o-overall"))?,
            o_sync: o_sync.ok_or_else(|| missing("o-sync"))?,
            gaps,
            locks_replayed: locks_replayed.ok_or_else(|| missing("locks-replayed"))?,
        })
    }
}
