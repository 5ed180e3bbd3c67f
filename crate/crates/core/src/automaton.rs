//! Limit-deterministic Büchi automata over letters `2^P`.
//!
//! Text format, one item per line (`#` starts a comment):
//!
//! ```text
//! states: q0, q1
//! init: q0
//! accepting: q1
//! props: a
//! q0 --a--> q1
//! q0 --~--> q0
//! q1 --a--> q1
//! q1 --~--> q0
//! ```
//!
//! A letter is a comma-separated set of proposition names, `~` being the
//! empty letter. `props:` fixes the proposition order (otherwise the order
//! of first use) and `deterministic:` may name the deterministic part
//! explicitly; without it the largest closed deterministic subset is used.
//! Missing `(state, letter)` moves go to a fresh non-accepting sink.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub type StateId = usize;

/// A letter of `2^P` as a bit set over the automaton's propositions.
pub type Letter = u32;

/// Largest proposition count accepted (2^8 letters).
pub const MAX_PROPS: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: epsilon transitions are not supported")]
    Epsilon { line: usize },
    #[error("missing `{0}:` header")]
    MissingHeader(&'static str),
    #[error("too many propositions: {0} (at most {MAX_PROPS})")]
    TooManyProps(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ldba {
    pub states: Vec<String>,
    pub initial: StateId,
    pub accepting: BTreeSet<StateId>,
    pub props: Vec<String>,
    /// `delta[q][letter]` is the successor set.
    pub delta: Vec<Vec<BTreeSet<StateId>>>,
    /// The deterministic part `Q_d`; its complement is `Q_n`.
    pub deterministic: BTreeSet<StateId>,
    /// Sink added to make the transition relation total, if any.
    pub sink: Option<StateId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Condition (i): a deterministic state with several successors.
    Nondeterministic {
        state: String,
        letter: String,
        successors: Vec<String>,
    },
    /// Condition (ii): a deterministic state leaving the deterministic part.
    LeavesDeterministicPart {
        state: String,
        letter: String,
        successor: String,
    },
    /// A move with no successor.
    Incomplete { state: String, letter: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Nondeterministic {
                state,
                letter,
                successors,
            } => write!(
                f,
                "condition (i): {state} has {} successors on {letter}: {}",
                successors.len(),
                successors.join(", ")
            ),
            Violation::LeavesDeterministicPart {
                state,
                letter,
                successor,
            } => write!(
                f,
                "condition (ii): {state} moves on {letter} to {successor} outside the deterministic part"
            ),
            Violation::Incomplete { state, letter } => {
                write!(f, "{state} has no successor on {letter}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub nondeterministic: Vec<String>,
    pub deterministic: Vec<String>,
    pub rejecting: Vec<String>,
    /// Whether some accepting state is reachable from the initial state.
    pub accepting_reachable: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Ldba {
    pub fn num_letters(&self) -> usize {
        1 << self.props.len()
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        0..(1u32 << self.props.len())
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn successors(&self, q: StateId, letter: Letter) -> &BTreeSet<StateId> {
        &self.delta[q][letter as usize]
    }

    pub fn letter_name(&self, letter: Letter) -> String {
        let names: Vec<&str> = self
            .props
            .iter()
            .enumerate()
            .filter(|(i, _)| letter & (1 << i) != 0)
            .map(|(_, p)| p.as_str())
            .collect();
        format!("{{{}}}", names.join(","))
    }

    pub fn is_nondeterministic(&self, q: StateId) -> bool {
        !self.deterministic.contains(&q)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for q in 0..self.states.len() {
            for l in self.letters() {
                let succ = self.successors(q, l);
                let letter = self.letter_name(l);
                if succ.is_empty() {
                    violations.push(Violation::Incomplete {
                        state: self.states[q].clone(),
                        letter: letter.clone(),
                    });
                }
                if !self.deterministic.contains(&q) {
                    continue;
                }
                if succ.len() > 1 {
                    violations.push(Violation::Nondeterministic {
                        state: self.states[q].clone(),
                        letter: letter.clone(),
                        successors: succ.iter().map(|&s| self.states[s].clone()).collect(),
                    });
                }
                for &s in succ {
                    if !self.deterministic.contains(&s) {
                        violations.push(Violation::LeavesDeterministicPart {
                            state: self.states[q].clone(),
                            letter: letter.clone(),
                            successor: self.states[s].clone(),
                        });
                    }
                }
            }
        }
        let names = |set: &BTreeSet<StateId>| set.iter().map(|&q| self.states[q].clone()).collect();
        let nondet: BTreeSet<StateId> = (0..self.states.len())
            .filter(|q| !self.deterministic.contains(q))
            .collect();
        let reach = self.reachable_from(self.initial);
        ValidationReport {
            violations,
            nondeterministic: names(&nondet),
            deterministic: names(&self.deterministic),
            rejecting: names(&self.rejecting_states()),
            accepting_reachable: self.accepting.iter().any(|f| reach.contains(f)),
        }
    }

    /// Edge relation of the state graph (all nondeterministic possibilities).
    pub fn edges(&self) -> Vec<BTreeSet<StateId>> {
        self.delta
            .iter()
            .map(|row| row.iter().flatten().copied().collect())
            .collect()
    }

    fn reachable_from(&self, q: StateId) -> BTreeSet<StateId> {
        let edges = self.edges();
        let mut seen = BTreeSet::from([q]);
        let mut stack = vec![q];
        while let Some(s) = stack.pop() {
            for &t in &edges[s] {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// States from which no accepting state is reachable.
    pub fn rejecting_states(&self) -> BTreeSet<StateId> {
        let n = self.states.len();
        let mut reverse = vec![Vec::new(); n];
        for (q, succ) in self.edges().iter().enumerate() {
            for &t in succ {
                reverse[t].push(q);
            }
        }
        let mut good: BTreeSet<StateId> = self.accepting.clone();
        let mut stack: Vec<StateId> = good.iter().copied().collect();
        while let Some(t) = stack.pop() {
            for &q in &reverse[t] {
                if good.insert(q) {
                    stack.push(q);
                }
            }
        }
        (0..n).filter(|q| !good.contains(q)).collect()
    }

    /// Largest set of states that is deterministic and closed.
    pub fn deterministic_part(delta: &[Vec<BTreeSet<StateId>>]) -> BTreeSet<StateId> {
        let mut part: BTreeSet<StateId> = (0..delta.len())
            .filter(|&q| delta[q].iter().all(|s| s.len() == 1))
            .collect();
        loop {
            let keep: BTreeSet<StateId> = part
                .iter()
                .copied()
                .filter(|&q| delta[q].iter().flatten().all(|s| part.contains(s)))
                .collect();
            if keep.len() == part.len() {
                return keep;
            }
            part = keep;
        }
    }

    /// Serialize back to the text format (the sink becomes an ordinary state).
    pub fn render(&self) -> String {
        let join = |ids: &mut dyn Iterator<Item = StateId>| {
            ids.map(|q| self.states[q].as_str()).collect::<Vec<_>>().join(", ")
        };
        let mut out = String::new();
        out.push_str(&format!("states: {}\n", self.states.join(", ")));
        out.push_str(&format!("init: {}\n", self.states[self.initial]));
        out.push_str(&format!("accepting: {}\n", join(&mut self.accepting.iter().copied())));
        out.push_str(&format!("props: {}\n", self.props.join(", ")));
        out.push_str(&format!(
            "deterministic: {}\n",
            join(&mut self.deterministic.iter().copied())
        ));
        for q in 0..self.states.len() {
            for l in self.letters() {
                let label = if l == 0 {
                    "~".to_string()
                } else {
                    let n = self.letter_name(l);
                    n[1..n.len() - 1].to_string()
                };
                for &t in self.successors(q, l) {
                    out.push_str(&format!("{} --{}--> {}\n", self.states[q], label, self.states[t]));
                }
            }
        }
        out
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parse an automaton, complete it with a sink if needed, and compute the
/// deterministic part when it is not given.
pub fn parse_ldba(text: &str) -> Result<Ldba, AutomatonError> {
    let mut states: Option<Vec<String>> = None;
    let mut init: Option<(usize, String)> = None;
    let mut accepting: Option<(usize, Vec<String>)> = None;
    let mut props: Option<Vec<String>> = None;
    let mut deterministic: Option<(usize, Vec<String>)> = None;
    let mut transitions: Vec<(usize, String, Vec<String>, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some((lhs, rest)) = content.split_once("--") {
            let Some((label, rhs)) = rest.split_once("-->") else {
                return Err(AutomatonError::Parse {
                    line,
                    message: "expected `q --letters--> q'`".into(),
                });
            };
            let (from, to) = (lhs.trim(), rhs.trim());
            if from.is_empty() || to.is_empty() || to.contains(char::is_whitespace) {
                return Err(AutomatonError::Parse {
                    line,
                    message: "expected `q --letters--> q'`".into(),
                });
            }
            let label = label.trim();
            let letter = if label == "~" {
                Vec::new()
            } else {
                let names = split_list(label);
                if names.iter().any(|n| matches!(n.as_str(), "eps" | "epsilon" | "ε")) {
                    return Err(AutomatonError::Epsilon { line });
                }
                if names.is_empty() {
                    return Err(AutomatonError::Parse {
                        line,
                        message: "empty letter must be written `~`".into(),
                    });
                }
                names
            };
            transitions.push((line, from.to_string(), letter, to.to_string()));
            continue;
        }
        let Some((key, value)) = content.split_once(':') else {
            return Err(AutomatonError::Parse {
                line,
                message: format!("unrecognized line `{content}`"),
            });
        };
        let items = split_list(value);
        match key.trim() {
            "states" => states = Some(items),
            "init" => {
                if items.len() != 1 {
                    return Err(AutomatonError::Parse {
                        line,
                        message: "exactly one initial state expected".into(),
                    });
                }
                init = Some((line, items[0].clone()));
            }
            "accepting" => accepting = Some((line, items)),
            "props" => props = Some(items),
            "deterministic" => deterministic = Some((line, items)),
            other => {
                return Err(AutomatonError::Parse {
                    line,
                    message: format!("unknown header `{other}`"),
                })
            }
        }
    }

    let mut states = states.ok_or(AutomatonError::MissingHeader("states"))?;
    let (init_line, init) = init.ok_or(AutomatonError::MissingHeader("init"))?;
    let (acc_line, accepting) = accepting.ok_or(AutomatonError::MissingHeader("accepting"))?;
    let mut seen = BTreeSet::new();
    for s in &states {
        if !seen.insert(s) {
            return Err(AutomatonError::Parse {
                line: 1,
                message: format!("state `{s}` listed twice"),
            });
        }
    }
    let id = |name: &str, line: usize, states: &[String]| {
        states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| AutomatonError::Parse {
                line,
                message: format!("unknown state `{name}`"),
            })
    };
    let initial = id(&init, init_line, &states)?;
    let accepting: BTreeSet<StateId> = accepting
        .iter()
        .map(|s| id(s, acc_line, &states))
        .collect::<Result<_, _>>()?;

    let props = match props {
        Some(p) => p,
        None => {
            let mut p: Vec<String> = Vec::new();
            for (_, _, letter, _) in &transitions {
                for n in letter {
                    if !p.contains(n) {
                        p.push(n.clone());
                    }
                }
            }
            p
        }
    };
    if props.len() > MAX_PROPS {
        return Err(AutomatonError::TooManyProps(props.len()));
    }
    let nletters = 1usize << props.len();
    let mut delta = vec![vec![BTreeSet::new(); nletters]; states.len()];
    for (line, from, letter, to) in &transitions {
        let q = id(from, *line, &states)?;
        let t = id(to, *line, &states)?;
        let mut mask: Letter = 0;
        for n in letter {
            let i = props.iter().position(|p| p == n).ok_or_else(|| AutomatonError::Parse {
                line: *line,
                message: format!("unknown proposition `{n}`"),
            })?;
            mask |= 1 << i;
        }
        delta[q][mask as usize].insert(t);
    }

    let mut sink = None;
    if delta.iter().flatten().any(BTreeSet::is_empty) {
        let mut name = "sink".to_string();
        let mut k = 1;
        while states.contains(&name) {
            name = format!("sink{k}");
            k += 1;
        }
        let s = states.len();
        states.push(name);
        delta.push(vec![BTreeSet::from([s]); nletters]);
        for row in delta.iter_mut() {
            for succ in row.iter_mut() {
                if succ.is_empty() {
                    succ.insert(s);
                }
            }
        }
        sink = Some(s);
    }

    let deterministic = match deterministic {
        Some((line, names)) => {
            let mut set: BTreeSet<StateId> = names
                .iter()
                .map(|s| id(s, line, &states))
                .collect::<Result<_, _>>()?;
            if let Some(s) = sink {
                set.insert(s);
            }
            set
        }
        None => Ldba::deterministic_part(&delta),
    };

    Ok(Ldba {
        states,
        initial,
        accepting,
        props,
        delta,
        deterministic,
        sink,
    })
}

/// Shipped automata for common specifications, keyed by a short name.
pub fn shipped() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("F a", include_str!("../data/automata/eventually_a.ldba")),
        ("GF a", include_str!("../data/automata/always_eventually_a.ldba")),
        ("b U a", include_str!("../data/automata/b_until_a.ldba")),
        ("G b", include_str!("../data/automata/always_b.ldba")),
        ("G b & F a", include_str!("../data/automata/always_b_eventually_a.ldba")),
        ("F a & F b", include_str!("../data/automata/eventually_a_and_b.ldba")),
        ("FG a", include_str!("../data/automata/eventually_always_a.ldba")),
    ])
}
