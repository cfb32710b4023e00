//! Avalla-style validation scenarios: `set`, `step` and `check` commands.
//!
//! Monitored values persist across steps until set again. The clock, when
//! the machine has one, advances one second per step unless the scenario
//! sets it explicitly before the step.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dsl::{self, ast, ParseError};
use crate::engine::{self, EvalError, Evaluator, InputSource, MachineState, MonitoredEnv, StepError, Trace};
use crate::machine::{Expr, FunctionKind, LocId, MachineDefinition};
use crate::value::Value;
use crate::verify::Counterexample;

/// Clock advance per step when the scenario does not set the clock.
pub const TEST_CLOCK_STEP_MS: u64 = 1000;

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Set { location: String, value: String, line: usize },
    Step { line: usize },
    Check { proposition: String, line: usize },
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Scenario {
    pub name: Option<String>,
    /// Model named by a `load` header; informational.
    pub load: Option<String>,
    pub commands: Vec<Command>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: '{location}' is not monitored and cannot be set")]
    SetOnControlled { line: usize, location: String },
    #[error("line {line}: unknown location '{location}'")]
    UnknownLocation { line: usize, location: String },
    #[error("line {line}: '{value}' is not a value of {location}")]
    BadValue { line: usize, location: String, value: String },
    #[error("line {line}: {source}")]
    Check {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: StepError,
    },
    #[error("check failed to evaluate: {0}")]
    Eval(#[from] EvalError),
}

impl Scenario {
    /// Syntax-only parse; locations are not checked.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut sc = Scenario::default();
        // Commands may share a line or span lines; they end at `;` or `step`.
        let mut pending = String::new();
        let mut pending_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split("//").next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if pending.is_empty() {
                if let Some(rest) = line.strip_prefix("scenario ") {
                    sc.name = Some(rest.trim().trim_end_matches(';').to_string());
                    continue;
                }
                if let Some(rest) = line.strip_prefix("load ") {
                    sc.load = Some(rest.trim().trim_end_matches(';').to_string());
                    continue;
                }
                pending_line = line_no;
            }
            pending.push(' ');
            pending.push_str(line);
            loop {
                let t = pending.trim_start();
                if t == "step" || t == "step;" {
                    sc.commands.push(Command::Step { line: pending_line });
                    pending.clear();
                    break;
                }
                if let Some(rest) = t.strip_prefix("step") {
                    if rest.starts_with(char::is_whitespace) || rest.starts_with(';') {
                        sc.commands.push(Command::Step { line: pending_line });
                        pending = rest.trim_start_matches(';').to_string();
                        if pending.trim().is_empty() {
                            pending.clear();
                            break;
                        }
                        continue;
                    }
                }
                let Some(end) = t.find(';') else { break };
                let cmd = t[..end].trim().to_string();
                let rest = t[end + 1..].to_string();
                sc.commands.push(parse_command(&cmd, pending_line)?);
                pending = rest;
                if pending.trim().is_empty() {
                    pending.clear();
                    break;
                }
            }
        }
        if !pending.trim().is_empty() {
            return Err(ScenarioError::Syntax {
                line: pending_line,
                message: "missing ';'".into(),
            });
        }
        Ok(sc)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(n) = &self.name {
            let _ = writeln!(out, "scenario {n}");
        }
        if let Some(l) = &self.load {
            let _ = writeln!(out, "load {l}");
        }
        if self.name.is_some() || self.load.is_some() {
            out.push('\n');
        }
        for c in &self.commands {
            match c {
                Command::Set { location, value, .. } => {
                    let _ = writeln!(out, "set {location} := {value};");
                }
                Command::Step { .. } => out.push_str("step\n"),
                Command::Check { proposition, .. } => {
                    let _ = writeln!(out, "check {proposition};");
                }
            }
        }
        out
    }

    pub fn step_count(&self) -> usize {
        self.commands.iter().filter(|c| matches!(c, Command::Step { .. })).count()
    }
}

fn parse_command(cmd: &str, line: usize) -> Result<Command, ScenarioError> {
    if let Some(rest) = cmd.strip_prefix("set ") {
        let (loc, val) = rest.split_once(":=").ok_or_else(|| ScenarioError::Syntax {
            line,
            message: "expected 'set <location> := <value>'".into(),
        })?;
        return Ok(Command::Set {
            location: loc.trim().to_string(),
            value: val.trim().to_string(),
            line,
        });
    }
    if let Some(rest) = cmd.strip_prefix("check ") {
        let prop = rest.trim().to_string();
        dsl::parse_expr_syntax(&prop).map_err(|source| ScenarioError::Check { line, source })?;
        return Ok(Command::Check { proposition: prop, line });
    }
    Err(ScenarioError::Syntax {
        line,
        message: format!("unknown command '{cmd}'"),
    })
}

fn settable(m: &MachineDefinition, location: &str, line: usize) -> Result<LocId, ScenarioError> {
    let loc = m.loc_by_name(location).ok_or_else(|| ScenarioError::UnknownLocation {
        line,
        location: location.to_string(),
    })?;
    if m.loc_kind(loc) != FunctionKind::Monitored {
        return Err(ScenarioError::SetOnControlled {
            line,
            location: location.to_string(),
        });
    }
    Ok(loc)
}

/// Parses a scenario and checks it against a machine.
pub fn parse_scenario(m: &MachineDefinition, text: &str) -> Result<Scenario, ScenarioError> {
    let sc = Scenario::parse(text)?;
    validate(m, &sc)?;
    Ok(sc)
}

pub fn validate(m: &MachineDefinition, sc: &Scenario) -> Result<(), ScenarioError> {
    for c in &sc.commands {
        match c {
            Command::Set { location, value, line } => {
                let loc = settable(m, location, *line)?;
                m.parse_value(m.loc_type(loc), value).ok_or_else(|| ScenarioError::BadValue {
                    line: *line,
                    location: location.clone(),
                    value: value.clone(),
                })?;
            }
            Command::Check { proposition, line } => {
                compile_check(m, proposition, *line)?;
            }
            Command::Step { .. } => {}
        }
    }
    Ok(())
}

fn compile_check(m: &MachineDefinition, prop: &str, line: usize) -> Result<Expr, ScenarioError> {
    let (e, ty) = dsl::parse_expr(m, prop).map_err(|source| ScenarioError::Check { line, source })?;
    if ty != crate::Type::Bool {
        return Err(ScenarioError::Syntax {
            line,
            message: format!("check '{prop}' is not Boolean"),
        });
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioVerdict {
    Pass,
    FailedCheck {
        /// 0-based index into the command list.
        index: usize,
        /// Steps executed before the failing check.
        step: usize,
        expected: String,
        actual: String,
    },
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub verdict: ScenarioVerdict,
    pub trace: Trace,
    pub checks_passed: usize,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.verdict == ScenarioVerdict::Pass
    }
}

/// Reads monitored values back from the state.
struct StateSource<'a>(&'a MachineState);

impl InputSource for StateSource<'_> {
    fn monitored(&mut self, _m: &MachineDefinition, loc: LocId) -> Result<Value, EvalError> {
        Ok(self.0.get(loc))
    }
}

/// Expected and actual text of a check; `loc = value` checks report the
/// location's value, other propositions report their truth value.
fn describe(m: &MachineDefinition, prop: &str, state: &MachineState) -> (String, String) {
    if let Ok(ast::Expr::Binary {
        op: ast::BinOp::Eq,
        lhs,
        rhs,
        ..
    }) = dsl::parse_expr_syntax(prop)
    {
        if let ast::Expr::Ident { name, args, .. } = lhs.as_ref() {
            let loc_name = if args.is_empty() {
                name.clone()
            } else {
                dsl::printer::print_expr(lhs.as_ref())
            };
            if let Some(v) = state.show(m, &loc_name) {
                return (dsl::printer::print_expr(&rhs), v);
            }
        }
    }
    ("true".into(), "false".into())
}

/// Runs the commands in order and stops at the first failing check.
pub fn run_scenario(m: &MachineDefinition, sc: &Scenario) -> Result<ScenarioOutcome, ScenarioError> {
    let mut trace = Trace::new(MachineState::initial(m));
    let mut env: MonitoredEnv = m
        .input_locs()
        .into_iter()
        .map(|l| (l, m.default_value(m.loc_type(l))))
        .collect();
    let clock = m.clock_loc();
    let mut clock_set = false;
    let mut checks_passed = 0;
    for (index, c) in sc.commands.iter().enumerate() {
        match c {
            Command::Set { location, value, line } => {
                let loc = settable(m, location, *line)?;
                let v = m
                    .parse_value(m.loc_type(loc), value)
                    .ok_or_else(|| ScenarioError::BadValue {
                        line: *line,
                        location: location.clone(),
                        value: value.clone(),
                    })?;
                env.insert(loc, v);
                clock_set |= Some(loc) == clock;
            }
            Command::Step { .. } => {
                if let (Some(cl), false) = (clock, clock_set) {
                    let now = trace.last().clock(m);
                    env.insert(cl, Value::Instant(now + TEST_CLOCK_STEP_MS));
                }
                clock_set = false;
                let next = engine::step(m, trace.last(), &env).map_err(|source| ScenarioError::Step {
                    step: trace.len() + 1,
                    source,
                })?;
                trace.push(env.clone(), next);
            }
            Command::Check { proposition, line } => {
                let e = compile_check(m, proposition, *line)?;
                let state = trace.last();
                let mut ev = Evaluator::new(m, state.values(), StateSource(state));
                if ev.eval(&e, &[])? == Value::Bool(true) {
                    checks_passed += 1;
                    continue;
                }
                let (expected, actual) = describe(m, proposition, state);
                return Ok(ScenarioOutcome {
                    verdict: ScenarioVerdict::FailedCheck {
                        index,
                        step: trace.len(),
                        expected,
                        actual,
                    },
                    trace,
                    checks_passed,
                });
            }
        }
    }
    Ok(ScenarioOutcome {
        verdict: ScenarioVerdict::Pass,
        trace,
        checks_passed,
    })
}

/// A scenario replaying a counterexample: inputs before each step, and the
/// violated invariant checked after every step (and initially).
pub fn from_counterexample(m: &MachineDefinition, cex: &Counterexample) -> Scenario {
    let mut commands = Vec::new();
    let check = || Command::Check {
        proposition: cex.property.invariant_text.clone(),
        line: 0,
    };
    commands.push(check());
    let mut prev: Option<&MonitoredEnv> = None;
    for env in &cex.trace.inputs {
        for (l, v) in env {
            // The clock is always set so the scenario does not auto-advance it.
            if Some(*l) == m.clock_loc() || prev.and_then(|p| p.get(l)) != Some(v) {
                commands.push(Command::Set {
                    location: m.loc_name(*l).to_string(),
                    value: m.display_value(v),
                    line: 0,
                });
            }
        }
        commands.push(Command::Step { line: 0 });
        commands.push(check());
        prev = Some(env);
    }
    Scenario {
        name: Some(format!("cex_{}", m.name)),
        load: Some(format!("{}.asm", m.name)),
        commands,
    }
}
