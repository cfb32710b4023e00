//! Random test generation for the generated controller, plus rule and
//! branch coverage measured by replaying the traces in the interpreter.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::instance_name;
use crate::engine::{self, Coverage, CoverageReport, MachineState, RandomInputs, RunError, StepError, Trace};
use crate::machine::MachineDefinition;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestSuiteSpec {
    pub n_tests: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Clock advance per step in milliseconds.
    pub clock_step: u64,
}

impl Default for TestSuiteSpec {
    fn default() -> Self {
        TestSuiteSpec {
            n_tests: 50,
            n_steps: 50,
            seed: DEFAULT_SEED,
            clock_step: 1000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestgenError {
    #[error("trace {trace} does not belong to machine {machine}")]
    TraceMachineMismatch { trace: usize, machine: String },
    #[error("trace {trace}: {source}")]
    Replay {
        trace: usize,
        #[source]
        source: RunError,
    },
}

/// Per-test seed, so each trace is independent of the suite size.
fn test_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// `n_tests` random runs of `n_steps` steps each, deterministic in the seed.
pub fn generate_traces(m: &MachineDefinition, spec: &TestSuiteSpec) -> Result<Vec<Trace>, TestgenError> {
    (0..spec.n_tests)
        .map(|i| {
            let mut inputs = RandomInputs::new(test_seed(spec.seed, i), spec.clock_step);
            engine::run(m, &mut inputs, spec.n_steps).map_err(|source| TestgenError::Replay { trace: i, source })
        })
        .collect()
}

fn check_shape(m: &MachineDefinition, traces: &[Trace]) -> Result<(), TestgenError> {
    for (i, t) in traces.iter().enumerate() {
        let ok = t.states.iter().all(|s| s.values().len() == m.locations.len())
            && t.inputs.iter().flat_map(|e| e.keys()).all(|l| (l.0 as usize) < m.locations.len())
            && t.states[0] == MachineState::initial(m);
        if !ok {
            return Err(TestgenError::TraceMachineMismatch {
                trace: i,
                machine: m.name.clone(),
            });
        }
    }
    Ok(())
}

const HARNESS: &str = r#"#ifdef ASM_USE_CATCH2
#include "catch_amalgamated.hpp"
#else
// Minimal stand-in for the Catch2 macros used below.
#include <cstdio>
#include <vector>
namespace asm_harness {
struct Case { const char* name; void (*fn)(); };
inline std::vector<Case>& cases() { static std::vector<Case> v; return v; }
inline int& failures() { static int f = 0; return f; }
struct Reg { Reg(const char* n, void (*fn)()) { cases().push_back(Case{n, fn}); } };
}
#define ASM_CAT2(a, b) a##b
#define ASM_CAT(a, b) ASM_CAT2(a, b)
#define TEST_CASE(name, tags) \
	static void ASM_CAT(asm_test_, __LINE__)(); \
	static asm_harness::Reg ASM_CAT(asm_reg_, __LINE__)(name, &ASM_CAT(asm_test_, __LINE__)); \
	static void ASM_CAT(asm_test_, __LINE__)()
#define REQUIRE(expr) do { if (!(expr)) { \
	std::printf("%s:%d: REQUIRE(%s) failed\n", __FILE__, __LINE__, #expr); \
	++asm_harness::failures(); return; } } while (0)
int main() {
	int failed = 0;
	for (const auto& c : asm_harness::cases()) {
		int before = asm_harness::failures();
		c.fn();
		if (asm_harness::failures() != before) { ++failed; std::printf("FAILED %s\n", c.name); }
	}
	std::printf("%d test cases, %d failed\n", (int)asm_harness::cases().size(), failed);
	return failed == 0 ? 0 : 1;
}
#endif
"#;

fn checks(out: &mut String, m: &MachineDefinition, inst: &str, s: &MachineState) {
    out.push_str("\t// check controlled variables\n");
    for l in m.controlled_locs() {
        let _ = writeln!(
            out,
            "\tREQUIRE({inst}.{}[0] == {});",
            crate::codegen::lvalue_of(m, l),
            crate::codegen::value_of(m, &s.get(l))
        );
    }
}

/// One test case per trace. Each step sets the monitored values that
/// changed, runs the main rule, fires the update set and checks every
/// controlled location.
pub fn emit_tests(traces: &[Trace], m: &MachineDefinition) -> Result<String, TestgenError> {
    check_shape(m, traces)?;
    let inst = instance_name(m);
    let mut out = String::new();
    let _ = writeln!(out, "// Generated tests for {}. Do not edit.", m.name);
    let _ = writeln!(out, "#include \"{}.h\"", m.name);
    out.push_str(HARNESS);
    for (i, t) in traces.iter().enumerate() {
        let _ = writeln!(out, "\nTEST_CASE(\"my_test_{i}\", \"[{inst}]\") {{");
        let _ = writeln!(out, "\t// instance of the SUT\n\t{} {inst};", m.name);
        let _ = writeln!(out, "\t// init controlled with monitored term\n\t{inst}.initControlledWithMonitored();");
        checks(&mut out, m, &inst, &t.states[0]);
        let mut prev = MachineState::initial(m);
        for (env, s) in t.inputs.iter().zip(&t.states[1..]) {
            out.push_str("\t// set monitored variables\n");
            for (l, v) in env {
                if prev.get(*l) != *v {
                    let _ = writeln!(
                        out,
                        "\t{inst}.{} = {};",
                        crate::codegen::lvalue_of(m, *l),
                        crate::codegen::value_of(m, v)
                    );
                }
            }
            let _ = writeln!(out, "\t// call main rule\n\t{inst}.r_Main();\n\t{inst}.fireUpdateSet();");
            checks(&mut out, m, &inst, s);
            prev = s.clone();
        }
        out.push_str("}\n");
    }
    Ok(out)
}

/// Replays the traces' inputs in the interpreter and reports what fired.
pub fn measure_coverage(traces: &[Trace], m: &MachineDefinition) -> Result<CoverageReport, TestgenError> {
    check_shape(m, traces)?;
    let mut cov = Coverage::new(m);
    for (i, t) in traces.iter().enumerate() {
        let mut s = t.states[0].clone();
        for (k, env) in t.inputs.iter().enumerate() {
            let out = engine::step_detailed(m, &s, env, Some(&mut cov)).map_err(|source: StepError| {
                TestgenError::Replay {
                    trace: i,
                    source: RunError { step: k + 1, source },
                }
            })?;
            s = out.state;
        }
    }
    Ok(cov.report(m))
}
