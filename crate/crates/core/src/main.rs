use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ventasm::codegen::{generate_pin_config, generate_runtime, generate_source, PinConfig};
use ventasm::engine::{self, MachineState, MonitoredEnv, RandomInputs, Trace};
use ventasm::lung::{self, LungPatient};
use ventasm::models::{self, ControllerConfig};
use ventasm::refine::{check_refinement, GlueMap, RefinementVerdict};
use ventasm::scenario::{self, ScenarioVerdict};
use ventasm::service::{self, Mode, OperatorCommand, SessionCore, SessionSpec};
use ventasm::testgen::{self, TestSuiteSpec};
use ventasm::verify::{self, AbstractionConfig, CheckOutcome};
use ventasm::{dsl, MachineDefinition, Value};

#[derive(Parser)]
#[command(name = "ventasm", version, about = "Abstract-state-machine workbench for a lung ventilator controller")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Clone)]
struct ModelArgs {
    /// Bundled level (0-3) or a path to a model file.
    #[arg(long, short)]
    model: String,
    /// Controller timing: `default`, `test` (pinned test config) or a config file.
    #[arg(long)]
    config: Option<String>,
}

#[derive(clap::Args, Clone)]
struct BudgetArgs {
    /// Maximum number of abstract states.
    #[arg(long, env = "VENTASM_STATE_BUDGET", default_value_t = verify::DEFAULT_STATE_BUDGET)]
    budget: usize,
    /// Track the clock in steps of TICK ms up to HORIZON ms instead of
    /// treating timer expiry as a free input.
    #[arg(long, value_names = ["TICK", "HORIZON"], num_args = 2)]
    bounded_clock: Option<Vec<u64>>,
}

impl BudgetArgs {
    fn config(&self) -> AbstractionConfig {
        let base = match &self.bounded_clock {
            Some(v) => AbstractionConfig::bounded_clock(v[0], v[1]),
            None => AbstractionConfig::default(),
        };
        base.with_budget(self.budget)
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum CodegenKind {
    Source,
    Pinconfig,
    Runtime,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and resolve a model; optionally print it back.
    Parse {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        print: bool,
    },
    /// Declaration and rule counts.
    Stats {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        json: bool,
    },
    /// Unused declarations and shadowed names (exit 1 when any).
    Lint {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Control-state graph in DOT.
    Viz {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Simulate: random inputs, or interactive `name=value` lines on stdin.
    Sim {
        #[command(flatten)]
        model: ModelArgs,
        /// Random inputs instead of reading `name=value` lines from stdin
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = testgen::DEFAULT_SEED)]
        seed: u64,
        /// Clock advance per step, ms.
        #[arg(long, default_value_t = 1000)]
        clock_step: u64,
    },
    /// Tabular trace of a scenario or a random run.
    Animate {
        #[command(flatten)]
        model: ModelArgs,
        /// Animate this scenario instead of a random run
        #[arg(long, conflicts_with = "steps")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = testgen::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        clock_step: u64,
    },
    /// Check invariant properties (exit 1 when one is violated).
    Check {
        #[command(flatten)]
        model: ModelArgs,
        /// Property file, or a bundled set: safety, pauses, pauses-verbatim.
        #[arg(long)]
        props: String,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Write each counterexample as a scenario into this directory.
        #[arg(long)]
        export_cex: Option<PathBuf>,
    },
    /// Check that one level refines another (exit 1 when refuted).
    Refine {
        /// Abstract level
        #[arg(long)]
        from: u8,
        /// Refined level
        #[arg(long)]
        to: u8,
        /// `default` for the bundled glue, `all` for every shared controlled
        /// location, or a glue file.
        #[arg(long, default_value = "default")]
        glue: String,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Run a scenario (exit 1 when a check fails). Bundled levels use the
    /// pinned test config unless --config says otherwise.
    Scenario {
        #[command(flatten)]
        model: ModelArgs,
        file: PathBuf,
    },
    /// Random traces emitted as a C++ test file.
    Testgen {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 50)]
        tests: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = testgen::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        clock_step: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Print rule and branch coverage of the suite.
        #[arg(long)]
        coverage: bool,
    },
    /// Generate C++ source, a pin configuration or the board runtime.
    Codegen {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(value_enum)]
        kind: CodegenKind,
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
        /// Completed pin configuration, required for `runtime`.
        #[arg(long)]
        pins: Option<PathBuf>,
    },
    /// Offline closed-loop run against the lung model; writes the waveform CSV.
    Lung {
        /// Bundled controller level driving the valves
        #[arg(long, default_value_t = 3)]
        level: u8,
        /// Patient profile (`key = value`).
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pcv")]
        mode: CliMode,
        /// Simulated time
        #[arg(long, default_value_t = 20.0)]
        seconds: f64,
        /// Write the Paw/Palv/flow waveform here
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the session log (JSON lines) here; it is replayed as a check
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
        /// Persist each session log as `session-<id>.jsonl` here
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        max_sessions: usize,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum CliMode {
    Pcv,
    Psv,
}

/// Exit status: failures of the thing checked are 1, bad input is 2.
enum Failure {
    Check(String),
    Usage(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    // Behave like other filters when the reader goes away (`| head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn bundled_level(s: &str) -> Option<u8> {
    s.parse::<u8>().ok().filter(|l| models::LEVELS.contains(l))
}

fn load_config(name: &str) -> Result<ControllerConfig, Failure> {
    Ok(match name {
        "default" => models::default_config(),
        "test" => models::test_config(),
        path => ControllerConfig::parse(&read(Path::new(path))?)?,
    })
}

fn load_model(args: &ModelArgs, default_config: &str) -> Result<MachineDefinition, Failure> {
    match bundled_level(&args.model) {
        Some(level) => Ok(models::load_with(level, &load_config(args.config.as_deref().unwrap_or(default_config))?)?),
        None if args.model.parse::<u8>().is_ok() && !Path::new(&args.model).exists() => {
            Err(Failure::Usage(format!("no bundled model for level {} (expected 0-3)", args.model)))
        }
        None => {
            let text = read(Path::new(&args.model))?;
            let mut m = dsl::parse_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", args.model)))?;
            if let Some(c) = &args.config {
                load_config(c)?.apply(&mut m);
            }
            Ok(m)
        }
    }
}

fn run(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Parse { model, print } => {
            let m = load_model(&model, "default")?;
            if print {
                print!("{}", dsl::print_file(&m.syntax));
            } else {
                println!("{}: ok", m.name);
            }
            Ok(())
        }
        Cmd::Stats { model, json } => {
            let m = load_model(&model, "default")?;
            let s = dsl::stats(&m);
            if json {
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                println!("model                    {}", m.name);
                println!("monitored                {}", s.n_monitored);
                println!("controlled               {}", s.n_controlled);
                println!("derived                  {}", s.n_derived);
                println!("static                   {}", s.n_static);
                println!("rule declarations        {}", s.n_rule_declarations);
                println!("rules including nested   {}", s.n_rules_including_nested);
            }
            Ok(())
        }
        Cmd::Lint { model } => {
            let m = load_model(&model, "default")?;
            let r = dsl::lint(&m);
            for d in &r.unused_declarations {
                println!("unused: {d}");
            }
            for d in &r.shadowed_names {
                println!("shadowed: {d}");
            }
            if r.is_clean() {
                println!("{}: clean", m.name);
                Ok(())
            } else {
                Err(Failure::Check(String::new()))
            }
        }
        Cmd::Viz { model, out } => {
            let m = load_model(&model, "default")?;
            let dot = dsl::export_state_graph(&m)?.to_dot();
            match out {
                Some(p) => write_out(&p, &dot),
                None => {
                    print!("{dot}");
                    Ok(())
                }
            }
        }
        Cmd::Sim {
            model,
            random,
            steps,
            seed,
            clock_step,
        } => {
            let m = load_model(&model, "default")?;
            if random {
                let trace = engine::run(&m, &mut RandomInputs::new(seed, clock_step), steps)?;
                print_trace(&m, &trace);
                Ok(())
            } else {
                interactive(&m, clock_step)
            }
        }
        Cmd::Animate {
            model,
            scenario: sc,
            steps,
            seed,
            clock_step,
        } => {
            let trace = match sc {
                Some(path) => {
                    let m = load_model(&model, "test")?;
                    let sc = scenario::parse_scenario(&m, &read(&path)?)?;
                    let out = scenario::run_scenario(&m, &sc)?;
                    print!("{}", animate_table(&m, &out.trace));
                    return verdict_of(&out.verdict);
                }
                None => {
                    let m = load_model(&model, "default")?;
                    let t = engine::run(&m, &mut RandomInputs::new(seed, clock_step), steps.unwrap_or(20))?;
                    (m, t)
                }
            };
            print!("{}", animate_table(&trace.0, &trace.1));
            Ok(())
        }
        Cmd::Check {
            model,
            props,
            budget,
            export_cex,
        } => {
            let m = load_model(&model, "default")?;
            let text = match props.as_str() {
                "safety" => models::SAFETY_PROPERTIES.to_string(),
                "pauses" => models::PAUSE_PROPERTIES.to_string(),
                "pauses-verbatim" => models::PAUSE_PROPERTY_VERBATIM.to_string(),
                path => read(Path::new(path))?,
            };
            let props = verify::parse_property_file(&m, &text)?;
            let cfg = budget.config();
            let ts = verify::build_ts(&m, &cfg)?;
            println!("{}: {} abstract states, {} transitions", m.name, ts.len(), ts.edge_count());
            let mut failed = 0;
            for (i, p) in props.iter().enumerate() {
                match verify::check_on(&m, &ts, p)? {
                    CheckOutcome::Verified => println!("verified  {}", p.text),
                    CheckOutcome::Violated(cex) => {
                        failed += 1;
                        let note = if cex.abstract_only { " (abstract path only)" } else { "" };
                        println!("violated  {}  at step {}{note}", p.text, cex.violated_at);
                        print!("{}", animate_table(&m, &cex.trace));
                        if let Some(dir) = &export_cex {
                            std::fs::create_dir_all(dir)?;
                            let sc = scenario::from_counterexample(&m, &cex);
                            write_out(&dir.join(format!("cex_{}.avalla", i + 1)), &sc.to_text())?;
                        }
                    }
                }
            }
            if failed > 0 {
                Err(Failure::Check(format!("{failed} of {} properties violated", props.len())))
            } else {
                Ok(())
            }
        }
        Cmd::Refine { from, to, glue, budget } => {
            let a = models::load(from)?;
            let r = models::load(to)?;
            let g = match glue.as_str() {
                "default" => GlueMap::parse(
                    models::glue_source(from, to)
                        .ok_or_else(|| Failure::Usage(format!("no bundled glue for {from} -> {to}; pass --glue all or a file")))?,
                )?,
                "all" => GlueMap::all_controlled(&a),
                path => GlueMap::parse(&read(Path::new(path))?)?,
            };
            let res = check_refinement(&a, &r, &g, &budget.config())?;
            println!(
                "{} -> {}: {:?} (relation {} pairs, {} abstract / {} refined states)",
                a.name, r.name, res.verdict, res.relation_size, res.abstract_states, res.refined_states
            );
            match res.verdict {
                RefinementVerdict::Verified => Ok(()),
                RefinementVerdict::Refuted => {
                    if let Some(w) = res.witness {
                        println!("refined run with no abstract counterpart:");
                        print!("{}", animate_table(&r, &w.trace));
                    }
                    Err(Failure::Check(String::new()))
                }
            }
        }
        Cmd::Scenario { model, file } => {
            let m = load_model(&model, "test")?;
            let sc = scenario::parse_scenario(&m, &read(&file)?)?;
            let out = scenario::run_scenario(&m, &sc)?;
            println!("{}: {} checks passed over {} steps", sc.name.as_deref().unwrap_or("scenario"), out.checks_passed, out.trace.len());
            verdict_of(&out.verdict)
        }
        Cmd::Testgen {
            model,
            tests,
            steps,
            seed,
            clock_step,
            out,
            coverage,
        } => {
            let m = load_model(&model, "default")?;
            let spec = TestSuiteSpec {
                n_tests: tests,
                n_steps: steps,
                seed,
                clock_step,
            };
            let traces = testgen::generate_traces(&m, &spec)?;
            let text = testgen::emit_tests(&traces, &m)?;
            match out {
                Some(p) => write_out(&p, &text)?,
                None => print!("{text}"),
            }
            if coverage {
                let c = testgen::measure_coverage(&traces, &m)?;
                eprintln!(
                    "rule coverage {:.1}% ({}/{}), branch coverage {:.1}% ({}/{})",
                    c.rule_coverage * 100.0,
                    c.rules_fired,
                    c.rules_total,
                    c.branch_coverage * 100.0,
                    c.arms_taken,
                    c.arms_total
                );
                for r in &c.uncovered_rules {
                    eprintln!("uncovered: {r}");
                }
            }
            Ok(())
        }
        Cmd::Codegen { model, kind, out, pins } => {
            let m = load_model(&model, "default")?;
            std::fs::create_dir_all(&out)?;
            match kind {
                CodegenKind::Source => {
                    let b = generate_source(&m)?;
                    write_out(&out.join(&b.header_name), &b.header)?;
                    write_out(&out.join(&b.source_name), &b.source)
                }
                CodegenKind::Pinconfig => write_out(&out.join(format!("{}.a2c", m.name)), &generate_pin_config(&m).to_json()),
                CodegenKind::Runtime => {
                    let Some(pins) = pins else {
                        return Err(Failure::Usage(
                            "runtime needs --pins; fill in the file written by `codegen pinconfig`".into(),
                        ));
                    };
                    let cfg = PinConfig::from_json(&m, &read(&pins)?)?;
                    let b = generate_runtime(&m, &cfg)?;
                    write_out(&out.join(&b.hardware_name), &b.hardware)?;
                    write_out(&out.join(&b.loop_name), &b.loop_unit)
                }
            }
        }
        Cmd::Lung {
            level,
            profile,
            mode,
            seconds,
            csv,
            log,
        } => {
            let patient = match profile {
                Some(p) => LungPatient::parse_profile(&read(&p)?)?,
                None => LungPatient::default(),
            };
            let spec = SessionSpec {
                level,
                patient,
                ..SessionSpec::default()
            };
            let mut core = SessionCore::new(spec)?;
            let mode = match mode {
                CliMode::Pcv => Mode::Pcv,
                CliMode::Psv => Mode::Psv,
            };
            let script = [
                vec![OperatorCommand::RespirationMode(mode), OperatorCommand::StartupEnded],
                vec![OperatorCommand::SelfTestPassed],
                vec![OperatorCommand::StartVentilation],
            ];
            for cmds in script {
                for c in cmds {
                    core.apply_command(c)?;
                }
                core.step()?;
            }
            let total = (seconds * 1000.0 / core.spec().tick_ms as f64).ceil() as u64;
            while core.steps() < total {
                core.step()?;
            }
            let samples: Vec<lung::LungSample> = core.log().iter().map(|s| s.lung.clone()).collect();
            let text = lung::to_csv(&samples);
            match csv {
                Some(p) => write_out(&p, &text)?,
                None => print!("{text}"),
            }
            if let Some(p) = log {
                write_out(&p, &core.export_log())?;
                service::replay_log(core.spec(), core.log())?;
            }
            Ok(())
        }
        Cmd::Serve {
            addr,
            log_dir,
            max_sessions,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(service::http::serve(addr, service::http::ServiceConfig { log_dir, max_sessions }))?;
            Ok(())
        }
    }
}

fn verdict_of(v: &ScenarioVerdict) -> Outcome {
    match v {
        ScenarioVerdict::Pass => {
            println!("PASS");
            Ok(())
        }
        ScenarioVerdict::FailedCheck {
            index,
            step,
            expected,
            actual,
        } => Err(Failure::Check(format!(
            "FAIL: command {} after step {step}: expected {expected}, found {actual}",
            index + 1
        ))),
    }
}

const ANIMATE_COLUMNS: [&str; 6] = ["step", "state", "phase", "iValve", "oValve", "stopVentilation"];

/// Fixed-width table of the main controlled locations, one row per state.
fn animate_table(m: &MachineDefinition, trace: &Trace) -> String {
    let mut out = String::new();
    for c in ANIMATE_COLUMNS {
        out.push_str(&format!("{c:<16}"));
    }
    out = out.trim_end().to_string();
    out.push('\n');
    for (i, s) in trace.states.iter().enumerate() {
        let mut row = format!("{i:<16}");
        for c in &ANIMATE_COLUMNS[1..] {
            row.push_str(&format!("{:<16}", s.show(m, c).unwrap_or_else(|| "-".into())));
        }
        out.push_str(row.trim_end());
        out.push('\n');
    }
    out
}

fn print_trace(m: &MachineDefinition, trace: &Trace) {
    print_state(m, 0, &trace.states[0], None);
    for (i, env) in trace.inputs.iter().enumerate() {
        print_state(m, i + 1, &trace.states[i + 1], Some((env, &trace.states[i])));
    }
}

fn print_state(m: &MachineDefinition, i: usize, s: &MachineState, prev: Option<(&MonitoredEnv, &MachineState)>) {
    match prev {
        None => {
            println!("-- state 0");
            for (k, v) in s.named_controlled(m) {
                println!("   {k} = {v}");
            }
        }
        Some((env, before)) => {
            let inputs: Vec<String> = env
                .iter()
                .map(|(l, v)| format!("{}={}", m.loc_name(*l), m.display_value(v)))
                .collect();
            println!("-- step {i}: {}", inputs.join(" "));
            let old = before.named_controlled(m);
            for (k, v) in s.named_controlled(m) {
                if old.get(&k) != Some(&v) {
                    println!("   {k} = {v}");
                }
            }
        }
    }
}

/// Reads one line of `name=value` pairs per step; unset inputs keep their
/// previous value and the clock advances by `clock_step` unless given.
fn interactive(m: &MachineDefinition, clock_step: u64) -> Outcome {
    let mut state = MachineState::initial(m);
    let mut env = state.monitored_env(m);
    print_state(m, 0, &state, None);
    let inputs: Vec<String> = m
        .input_locs()
        .iter()
        .map(|l| format!("{}: {}", m.loc_name(*l), m.type_name(m.loc_type(*l))))
        .collect();
    eprintln!("inputs: {}", inputs.join(", "));
    eprintln!("enter name=value pairs per step; empty line steps, `quit` ends");
    let stdin = std::io::stdin();
    let mut step = 0;
    loop {
        eprint!("> ");
        std::io::stderr().flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 || line.trim() == "quit" {
            return Ok(());
        }
        let mut clock_set = false;
        let mut bad = false;
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let parsed = tok.split_once('=').and_then(|(k, v)| {
                let l = m.loc_by_name(k.trim()).filter(|l| m.input_locs().contains(l))?;
                Some((l, m.parse_value(m.loc_type(l), v)?))
            });
            match parsed {
                Some((l, v)) => {
                    clock_set |= Some(l) == m.clock_loc();
                    env.insert(l, v);
                }
                None => {
                    eprintln!("ignored '{tok}': expected input=value");
                    bad = true;
                }
            }
        }
        if bad {
            continue;
        }
        if let (Some(c), false) = (m.clock_loc(), clock_set) {
            env.insert(c, Value::Instant(state.clock(m) + clock_step));
        }
        step += 1;
        match engine::step(m, &state, &env) {
            Ok(next) => {
                print_state(m, step, &next, Some((&env, &state)));
                state = next;
            }
            Err(e) => {
                eprintln!("step rejected: {e}");
                step -= 1;
            }
        }
    }
}
