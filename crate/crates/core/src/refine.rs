//! Stuttering-simulation refinement checks between model levels.
//!
//! Both machines are explored under the same abstraction. A refined step
//! may be matched by the abstract machine staying put or taking one step;
//! either way the glued locations must agree afterwards. The relation is
//! computed as a greatest fixpoint over the candidate pairs reachable from
//! the initial pair.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::engine::Trace;
use crate::machine::{FunctionKind, LocId, MachineDefinition};
use crate::value::{Type, Value};
use crate::verify::concretize::{concretize, naive_replay};
use crate::verify::{build_ts, AbstractionConfig, Label, TransitionSystem, VerifyError};

/// Locations linked between an abstract and a refined machine.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GlueMap {
    /// Machine names from the header, if any.
    pub pair: Option<(String, String)>,
    pub linked: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("glue links no locations")]
    EmptyGlue,
    #[error("glue line {line}: {message}")]
    GlueSyntax { line: usize, message: String },
    #[error("'{name}' is not a controlled location of {machine}")]
    UnknownLocation { name: String, machine: String },
    #[error("'{name}' has different types in the two machines")]
    TypeMismatch { name: String },
    #[error("'{name}' has no literal common to both machines")]
    NoSharedLiterals { name: String },
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl GlueMap {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        GlueMap {
            pair: None,
            linked: names.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses `glue A -> B` followed by one location name per line.
    pub fn parse(text: &str) -> Result<Self, RefineError> {
        let mut g = GlueMap::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split("//").next().unwrap_or("").split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("glue ") {
                let (a, b) = rest.split_once("->").ok_or_else(|| RefineError::GlueSyntax {
                    line: i + 1,
                    message: "expected 'glue A -> B'".into(),
                })?;
                g.pair = Some((a.trim().to_string(), b.trim().to_string()));
            } else if line.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                g.linked.push(line.to_string());
            } else {
                return Err(RefineError::GlueSyntax {
                    line: i + 1,
                    message: format!("'{line}' is not a location name"),
                });
            }
        }
        if g.linked.is_empty() {
            return Err(RefineError::EmptyGlue);
        }
        Ok(g)
    }

    /// Every non-library controlled location of `m`.
    pub fn all_controlled(m: &MachineDefinition) -> Self {
        GlueMap::new(
            m.controlled_locs()
                .into_iter()
                .filter(|l| !m.is_library_loc(*l))
                .map(|l| m.loc_name(l).to_string()),
        )
    }
}

impl fmt::Display for GlueMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.linked.join(", "))
    }
}

/// Bundled glues for consecutive levels plus the 00→02 transitivity pair.
pub fn default_glues() -> Vec<((u8, u8), GlueMap)> {
    [(0, 1), (1, 2), (2, 3), (0, 2)]
        .into_iter()
        .map(|k| {
            let text = crate::models::glue_source(k.0, k.1).expect("bundled glue");
            (k, GlueMap::parse(text).expect("bundled glue parses"))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinementVerdict {
    Verified,
    Refuted,
}

/// A refined run whose glue projection no abstract run produces.
#[derive(Clone, Debug)]
pub struct RefinementWitness {
    pub trace: Trace,
    /// No clock assignment realizes the abstract path; inputs only.
    pub abstract_only: bool,
}

#[derive(Clone, Debug)]
pub struct RefinementResult {
    pub verdict: RefinementVerdict,
    pub witness: Option<RefinementWitness>,
    /// Pairs in the final simulation relation.
    pub relation_size: usize,
    pub abstract_states: usize,
    pub refined_states: usize,
}

/// How two enum values compare across machines: by literal name, with
/// literals missing on either side matching anything.
#[derive(Clone, Debug)]
struct Link {
    a: LocId,
    r: LocId,
    /// For enums: refined index → abstract index, `None` if not shared.
    enum_map: Option<Vec<Option<u32>>>,
}

fn links(a: &MachineDefinition, r: &MachineDefinition, glue: &GlueMap) -> Result<Vec<Link>, RefineError> {
    if glue.linked.is_empty() {
        return Err(RefineError::EmptyGlue);
    }
    let find = |m: &MachineDefinition, name: &str| {
        m.loc_by_name(name)
            .filter(|l| m.loc_kind(*l) == FunctionKind::Controlled && !m.is_library_loc(*l))
            .ok_or_else(|| RefineError::UnknownLocation {
                name: name.to_string(),
                machine: m.name.clone(),
            })
    };
    let mut out = Vec::new();
    for name in &glue.linked {
        let (la, lr) = (find(a, name)?, find(r, name)?);
        let enum_map = match (a.loc_type(la), r.loc_type(lr)) {
            (Type::Enum(da), Type::Enum(dr)) => {
                let ea = &a.domain(da).elements;
                let map: Vec<Option<u32>> = r
                    .domain(dr)
                    .elements
                    .iter()
                    .map(|lit| ea.iter().position(|x| x == lit).map(|i| i as u32))
                    .collect();
                if map.iter().all(Option::is_none) {
                    return Err(RefineError::NoSharedLiterals { name: name.clone() });
                }
                Some(map)
            }
            (ta, tr) if ta == tr => None,
            _ => return Err(RefineError::TypeMismatch { name: name.clone() }),
        };
        out.push(Link { a: la, r: lr, enum_map });
    }
    Ok(out)
}

struct Glue<'a> {
    links: Vec<Link>,
    ats: &'a TransitionSystem,
    rts: &'a TransitionSystem,
    /// Positions of each linked location in the tracked vectors.
    apos: Vec<usize>,
    rpos: Vec<usize>,
}

impl<'a> Glue<'a> {
    fn new(links: Vec<Link>, ats: &'a TransitionSystem, rts: &'a TransitionSystem) -> Self {
        let pos = |ts: &TransitionSystem, l: LocId| ts.tracked.iter().position(|x| *x == l).expect("tracked");
        let apos = links.iter().map(|k| pos(ats, k.a)).collect();
        let rpos = links.iter().map(|k| pos(rts, k.r)).collect();
        Glue {
            links,
            ats,
            rts,
            apos,
            rpos,
        }
    }

    fn matches(&self, a: usize, r: usize) -> bool {
        let (sa, sr) = (self.ats.state(a), self.rts.state(r));
        self.links.iter().enumerate().all(|(i, k)| {
            let (va, vr) = (sa[self.apos[i]], sr[self.rpos[i]]);
            match (&k.enum_map, va, vr) {
                (Some(map), Value::Enum(ea), Value::Enum(er)) => match map[er.index as usize] {
                    Some(idx) => {
                        // Abstract literals unknown to the refined side also match.
                        idx == ea.index || !self.shared_abstract(i, ea.index)
                    }
                    None => true,
                },
                _ => va == vr,
            }
        })
    }

    fn shared_abstract(&self, link: usize, idx: u32) -> bool {
        self.links[link]
            .enum_map
            .as_ref()
            .is_some_and(|m| m.contains(&Some(idx)))
    }
}

/// Checks that `refined` refines `abstract_m` under `glue`.
pub fn check_refinement(
    abstract_m: &MachineDefinition,
    refined: &MachineDefinition,
    glue: &GlueMap,
    cfg: &AbstractionConfig,
) -> Result<RefinementResult, RefineError> {
    let ls = links(abstract_m, refined, glue)?;
    let ats = build_ts(abstract_m, cfg)?;
    let rts = build_ts(refined, cfg)?;
    let g = Glue::new(ls, &ats, &rts);

    let asucc: Vec<Vec<usize>> = (0..ats.len()).map(|a| ats.successors(a)).collect();
    let rsucc: Vec<Vec<usize>> = (0..rts.len()).map(|r| rts.successors(r)).collect();
    let moves = |a: usize| std::iter::once(a).chain(asucc[a].iter().copied());

    let init = (ats.initial(), rts.initial());
    let mut result = RefinementResult {
        verdict: RefinementVerdict::Refuted,
        witness: None,
        relation_size: 0,
        abstract_states: ats.len(),
        refined_states: rts.len(),
    };
    if !g.matches(init.0, init.1) {
        result.witness = Some(witness_trace(refined, &rts, 0)?);
        return Ok(result);
    }

    // Candidate pairs reachable from the initial pair.
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = vec![init];
    index.insert(init, 0);
    let mut q = VecDeque::from([init]);
    while let Some((a, r)) = q.pop_front() {
        for &r2 in &rsucc[r] {
            for a2 in moves(a) {
                if g.matches(a2, r2) && !index.contains_key(&(a2, r2)) {
                    index.insert((a2, r2), pairs.len());
                    pairs.push((a2, r2));
                    if pairs.len() > cfg.state_budget {
                        return Err(VerifyError::StateSpaceBudgetExceeded {
                            budget: cfg.state_budget,
                        }
                        .into());
                    }
                    q.push_back((a2, r2));
                }
            }
        }
    }

    // Greatest fixpoint: drop pairs with an unmatched refined step until stable.
    let mut alive = vec![true; pairs.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for (i, &(a, r)) in pairs.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let ok = rsucc[r].iter().all(|&r2| {
                moves(a).any(|a2| index.get(&(a2, r2)).is_some_and(|&j| alive[j]))
            });
            if !ok {
                alive[i] = false;
                changed = true;
            }
        }
    }
    result.relation_size = alive.iter().filter(|x| **x).count();
    if alive[0] {
        result.verdict = RefinementVerdict::Verified;
        return Ok(result);
    }
    result.witness = find_witness(&g, &asucc, refined, &rts, cfg.state_budget)?;
    Ok(result)
}

/// Breadth-first search for a refined path whose projection leaves every
/// abstract run (subset construction over abstract states).
fn find_witness(
    g: &Glue,
    asucc: &[Vec<usize>],
    refined: &MachineDefinition,
    rts: &TransitionSystem,
    budget: usize,
) -> Result<Option<RefinementWitness>, RefineError> {
    type Node = (usize, Vec<usize>);
    let start: Node = (rts.initial(), vec![g.ats.initial()]);
    let mut seen: HashSet<Node> = HashSet::from([start.clone()]);
    let mut parent: Vec<(Option<usize>, usize)> = vec![(None, rts.initial())];
    let mut q = VecDeque::from([(start, 0usize)]);
    while let Some(((r, set), node)) = q.pop_front() {
        for &r2 in &rts.successors(r) {
            let mut next: Vec<usize> = set
                .iter()
                .flat_map(|&a| std::iter::once(a).chain(asucc[a].iter().copied()))
                .filter(|&a2| g.matches(a2, r2))
                .collect();
            next.sort_unstable();
            next.dedup();
            let id = parent.len();
            parent.push((Some(node), r2));
            if next.is_empty() {
                let mut states = vec![r2];
                let mut cur = node;
                loop {
                    let (p, s) = parent[cur];
                    states.push(s);
                    match p {
                        Some(p) => cur = p,
                        None => break,
                    }
                }
                states.reverse();
                return witness_from_states(refined, rts, &states).map(Some);
            }
            let n = (r2, next);
            if seen.len() > budget {
                return Ok(None);
            }
            if seen.insert(n.clone()) {
                q.push_back((n, id));
            }
        }
    }
    Ok(None)
}

/// Labelled path through `states` (consecutive refined state ids).
fn witness_from_states(
    m: &MachineDefinition,
    rts: &TransitionSystem,
    states: &[usize],
) -> Result<RefinementWitness, RefineError> {
    let mut path: Vec<(usize, Label)> = Vec::new();
    for w in states.windows(2) {
        let label = rts
            .edges(w[0])
            .iter()
            .find(|(t, _)| *t == w[1])
            .map(|(_, l)| l.clone())
            .expect("edge exists");
        path.push((w[1], label));
    }
    Ok(match concretize(m, rts, &path)? {
        Some(trace) => RefinementWitness {
            trace,
            abstract_only: false,
        },
        None => RefinementWitness {
            trace: naive_replay(m, rts, &path)?,
            abstract_only: true,
        },
    })
}

fn witness_trace(m: &MachineDefinition, rts: &TransitionSystem, state: usize) -> Result<RefinementWitness, RefineError> {
    witness_from_states(m, rts, &[state])
}
