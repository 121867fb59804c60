//! Line grammar for traces.

use std::fmt;

use super::{BaseTrace, Digest, Event, LockOp, Section, SyscallClass, TraceError, VariantTrace};
use crate::text::{expect_header, read_uint, significant_lines, UintToken};

fn syntax(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Syntax { line, message: message.into() }
}

fn uint(line: usize, token: &str) -> Result<u64, TraceError> {
    match read_uint(token) {
        UintToken::Value(v) => Ok(v),
        UintToken::Negative => Err(syntax(line, format!("negative value `{token}`"))),
        UintToken::Malformed => Err(syntax(line, format!("invalid number `{token}`"))),
    }
}

fn digest(line: usize, token: &str) -> Result<Digest, TraceError> {
    let well_formed = token.len() == 16 && token.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
    if !well_formed {
        return Err(syntax(line, format!("digest must be 16 lowercase hex digits, got `{token}`")));
    }
    u64::from_str_radix(token, 16).map(Digest).map_err(|_| syntax(line, "bad digest"))
}

fn parse_event(line: usize, tokens: &[&str]) -> Result<Event, TraceError> {
    Ok(match tokens {
        ["compute", cost] => Event::Compute { cost: uint(line, cost)? },
        ["check", unit, cost] => Event::Check { unit: (*unit).into(), cost: uint(line, cost)? },
        ["syscall", number, class, args, result, cost] => Event::Syscall {
            number: uint(line, number)?,
            class: SyscallClass::from_token(class)
                .ok_or_else(|| syntax(line, format!("unknown syscall class `{class}`")))?,
            args: digest(line, args)?,
            result: digest(line, result)?,
            cost: uint(line, cost)?,
        },
        ["lock", lock, op, cost] => Event::Lock {
            lock: (*lock).into(),
            op: LockOp::from_token(op).ok_or_else(|| syntax(line, format!("unknown lock op `{op}`")))?,
            cost: uint(line, cost)?,
        },
        ["fork", child] => Event::Fork { child: (*child).into() },
        ["main-enter"] => Event::MainEnter,
        ["exit-begin"] => Event::ExitBegin,
        ["vuln", unit] => Event::Vuln { unit: (*unit).into() },
        _ => return Err(syntax(line, format!("malformed `{}` line", tokens[0]))),
    })
}

/// Parses and validates a trace document.
pub fn parse_trace(text: &str) -> Result<BaseTrace, TraceError> {
    let mut lines = significant_lines(text);
    let header = lines.next();
    expect_header(header.as_ref(), "trace-version").map_err(|(l, m)| syntax(l, m))?;

    let mut sections: Vec<Section> = Vec::new();
    for line in lines {
        if line.tokens[0] == "trace" {
            let [_, id] = line.tokens.as_slice() else {
                return Err(syntax(line.number, "expected `trace <id>`"));
            };
            if sections.iter().any(|s| s.id == *id) {
                return Err(syntax(line.number, format!("duplicate trace `{id}`")));
            }
            sections.push(Section { id: (*id).into(), events: Vec::new() });
            continue;
        }
        let event = parse_event(line.number, &line.tokens)?;
        let section = sections
            .last_mut()
            .ok_or_else(|| syntax(line.number, "event before the first `trace` header"))?;
        section.events.push(event);
    }
    BaseTrace::new(sections)
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Compute { cost } => write!(f, "compute {cost}"),
            Event::Check { unit, cost } => write!(f, "check {unit} {cost}"),
            Event::Syscall { number, class, args, result, cost } => {
                write!(f, "syscall {number} {} {args} {result} {cost}", class.token())
            }
            Event::Lock { lock, op, cost } => write!(f, "lock {lock} {} {cost}", op.token()),
            Event::Fork { child } => write!(f, "fork {child}"),
            Event::MainEnter => f.write_str("main-enter"),
            Event::ExitBegin => f.write_str("exit-begin"),
            Event::Vuln { unit } => write!(f, "vuln {unit}"),
        }
    }
}

impl fmt::Display for BaseTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trace-version 1")?;
        for section in &self.sections {
            writeln!(f, "trace {}", section.id)?;
            for event in &section.events {
                writeln!(f, "{event}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for VariantTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.trace.fmt(f)
    }
}
