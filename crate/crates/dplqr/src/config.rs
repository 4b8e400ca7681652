//! Run configuration: a TOML document with `graph`, `agents`, `schedule`,
//! `privacy`, `lqr` and `sim` sections.
//!
//! The document is walked by hand rather than deserialized so that every
//! problem is reported, each with the path of the offending field.

use std::fmt;
use std::path::Path;

use dplqr_core::{DirectedGraph, FeasibleWeightSet, Matrix, PowerLawSchedule, SimConfig, WeightPair};
use serde::Serialize;
use toml::{Table, Value};

/// The four-agent scenario shipped with the crate.
pub const PAPER_CONFIG: &str = include_str!("../configs/paper.cfg");

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Refuse to simulate when a blocking schedule assumption fails.
    pub require_assumptions: bool,
}

/// One validation problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(transparent)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.0.len())?;
        for issue in &self.0 {
            let path = if issue.path.is_empty() { "<document>" } else { &issue.path };
            write!(f, "\n  {path}: {}", issue.message)?;
        }
        Ok(())
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigErrors(vec![ConfigIssue { path: String::new(), message: format!("cannot read {}: {e}", path.display()) }])
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigErrors> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![ConfigIssue { path: String::new(), message: e.to_string().trim_end().to_owned() }])
    })?;
    let mut walker = Walker::default();
    let config = walker.root(&root);
    match config {
        Some(config) if walker.issues.is_empty() => Ok(config),
        _ => Err(ConfigErrors(walker.issues)),
    }
}

#[derive(Default)]
struct Walker {
    issues: Vec<ConfigIssue>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

impl Walker {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue { path: path.into(), message: message.into() });
    }

    fn check_keys(&mut self, table: &Table, path: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.error(join(path, key), format!("unknown key (expected one of: {})", allowed.join(", ")));
            }
        }
    }

    fn field<'a>(&mut self, table: &'a Table, path: &str, key: &str) -> Option<&'a Value> {
        let value = table.get(key);
        if value.is_none() {
            self.error(join(path, key), "missing field");
        }
        value
    }

    fn section<'a>(&mut self, root: &'a Table, key: &str, allowed: &[&str]) -> Option<&'a Table> {
        match self.field(root, "", key)? {
            Value::Table(t) => {
                self.check_keys(t, key, allowed);
                Some(t)
            }
            other => {
                self.error(key, format!("expected a table, found {}", other.type_str()));
                None
            }
        }
    }

    fn real(&mut self, value: &Value, path: &str) -> Option<f64> {
        let x = match value {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            other => {
                self.error(path, format!("expected a number, found {}", other.type_str()));
                return None;
            }
        };
        if !x.is_finite() {
            self.error(path, "must be finite");
            return None;
        }
        Some(x)
    }

    fn integer(&mut self, value: &Value, path: &str, min: i64) -> Option<i64> {
        match value {
            Value::Integer(i) if *i >= min => Some(*i),
            Value::Integer(i) => {
                self.error(path, format!("must be at least {min}, got {i}"));
                None
            }
            other => {
                self.error(path, format!("expected an integer, found {}", other.type_str()));
                None
            }
        }
    }

    fn boolean(&mut self, value: &Value, path: &str) -> Option<bool> {
        match value {
            Value::Boolean(b) => Some(*b),
            other => {
                self.error(path, format!("expected a boolean, found {}", other.type_str()));
                None
            }
        }
    }

    fn array<'a>(&mut self, value: &'a Value, path: &str) -> Option<&'a [Value]> {
        match value {
            Value::Array(a) => Some(a),
            other => {
                self.error(path, format!("expected an array, found {}", other.type_str()));
                None
            }
        }
    }

    fn real_vector(&mut self, value: &Value, path: &str) -> Option<Vec<f64>> {
        let items = self.array(value, path)?;
        let parsed: Vec<Option<f64>> = items.iter().enumerate().map(|(i, v)| self.real(v, &index(path, i))).collect();
        parsed.into_iter().collect()
    }

    fn real_matrix(&mut self, value: &Value, path: &str) -> Option<Matrix> {
        let rows = self.array(value, path)?;
        let parsed: Vec<Option<Vec<f64>>> =
            rows.iter().enumerate().map(|(i, r)| self.real_vector(r, &index(path, i))).collect();
        let rows: Vec<Vec<f64>> = parsed.into_iter().collect::<Option<_>>()?;
        let n = rows.len();
        if n == 0 {
            self.error(path, "matrix must not be empty");
            return None;
        }
        let mut ok = true;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                self.error(index(path, i), format!("row has {} entries, expected {n} (square matrix)", r.len()));
                ok = false;
            }
        }
        ok.then(|| Matrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    fn root(&mut self, root: &Table) -> Option<RunConfig> {
        self.check_keys(root, "", &["graph", "agents", "schedule", "privacy", "lqr", "sim"]);
        let graph = self.graph(root);
        let agents = self.agents(root, graph.as_ref().map(DirectedGraph::num_agents));
        let schedule = self.schedule(root);
        let epsilon = self.privacy(root);
        let horizon = self.lqr(root);
        let sim = self.sim(root);

        let (graph, agents, schedule, epsilon, horizon, sim) = (graph?, agents?, schedule?, epsilon?, horizon?, sim?);
        Some(RunConfig {
            sim: SimConfig {
                graph,
                weights: agents.weights,
                feasible: agents.feasible,
                schedule,
                epsilon,
                horizon,
                steps: sim.steps,
                initial_states: agents.initial_states,
                trials: sim.trials,
                seed: sim.seed,
                noise_enabled: sim.noise_enabled,
            },
            require_assumptions: sim.require_assumptions,
        })
    }

    fn graph(&mut self, root: &Table) -> Option<DirectedGraph> {
        let t = self.section(root, "graph", &["N", "adjacency"])?;
        let n = self.field(t, "graph", "N").and_then(|v| self.integer(v, "graph.N", 2));
        let rows = self.field(t, "graph", "adjacency").and_then(|v| self.array(v, "graph.adjacency"));
        let (n, rows) = (n? as usize, rows?);

        let before = self.issues.len();
        if rows.len() != n {
            self.error("graph.adjacency", format!("has {} rows, expected N = {n}", rows.len()));
        }
        let mut matrix = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let path = index("graph.adjacency", i);
            let Some(row) = self.array(row, &path) else { continue };
            if row.len() != n {
                self.error(&path, format!("has {} entries, expected N = {n}", row.len()));
            }
            let mut parsed = Vec::with_capacity(row.len());
            for (j, v) in row.iter().enumerate() {
                let path = index(&path, j);
                match v {
                    Value::Integer(a @ (0 | 1)) => {
                        if *a == 1 && i == j {
                            self.error(&path, "diagonal entries must be zero (no self-loops)");
                        }
                        parsed.push(*a);
                    }
                    Value::Integer(a) => self.error(&path, format!("entries must be 0 or 1, got {a}")),
                    other => self.error(&path, format!("expected integer 0 or 1, found {}", other.type_str())),
                }
            }
            matrix.push(parsed);
        }
        if self.issues.len() > before {
            return None;
        }
        let graph = match DirectedGraph::from_rows(&matrix) {
            Ok(g) => g,
            Err(e) => {
                self.error("graph.adjacency", e.to_string());
                return None;
            }
        };
        if !graph.has_spanning_tree() {
            self.error(
                "graph.adjacency",
                "graph has no directed spanning tree: no agent's information reaches every other agent",
            );
            return None;
        }
        Some(graph)
    }

    fn weight_pair(&mut self, value: &Value, path: &str) -> Option<WeightPair> {
        let Value::Table(t) = value else {
            self.error(path, format!("expected a table, found {}", value.type_str()));
            return None;
        };
        self.check_keys(t, path, &["q_diag", "Q", "r_diag", "R"]);
        let q = self.weight_matrix(t, path, "q_diag", "Q");
        let r = self.weight_matrix(t, path, "r_diag", "R");
        let (q, r) = (q?, r?);
        if q.nrows() != r.nrows() {
            self.error(path, format!("Q is {0}x{0} but R is {1}x{1}", q.nrows(), r.nrows()));
            return None;
        }
        match WeightPair::new(q, r) {
            Ok(w) => Some(w),
            Err(e) => {
                self.error(path, e.to_string());
                None
            }
        }
    }

    fn weight_matrix(&mut self, t: &Table, path: &str, diag: &str, full: &str) -> Option<Matrix> {
        match (t.get(diag), t.get(full)) {
            (Some(v), None) => {
                let p = join(path, diag);
                let d = self.real_vector(v, &p)?;
                if d.is_empty() {
                    self.error(p, "diagonal must not be empty");
                    return None;
                }
                Some(Matrix::from_diagonal(&d.into()))
            }
            (None, Some(v)) => self.real_matrix(v, &join(path, full)),
            (Some(_), Some(_)) => {
                self.error(path, format!("give either {diag} or {full}, not both"));
                None
            }
            (None, None) => {
                self.error(join(path, diag), format!("missing field (or give {full})"));
                None
            }
        }
    }

    fn agents(&mut self, root: &Table, num_agents: Option<usize>) -> Option<Agents> {
        let list = self.field(root, "", "agents").and_then(|v| self.array(v, "agents"))?;
        if let Some(n) = num_agents {
            if list.len() != n {
                self.error("agents", format!("has {} entries, expected N = {n}", list.len()));
            }
        }
        if list.is_empty() {
            self.error("agents", "at least one agent is required");
            return None;
        }

        let mut initial_states = Vec::with_capacity(list.len());
        let mut weights = Vec::with_capacity(list.len());
        let mut feasible = Vec::with_capacity(list.len());
        let mut complete = true;
        for (i, entry) in list.iter().enumerate() {
            let path = index("agents", i);
            let Value::Table(t) = entry else {
                self.error(&path, format!("expected a table, found {}", entry.type_str()));
                complete = false;
                continue;
            };
            self.check_keys(t, &path, &["initial_state", "weights", "feasible"]);
            let x0 = self
                .field(t, &path, "initial_state")
                .and_then(|v| self.real_vector(v, &join(&path, "initial_state")));
            let w = self.field(t, &path, "weights").and_then(|v| self.weight_pair(v, &join(&path, "weights")));
            let f = self.field(t, &path, "feasible").and_then(|v| self.feasible(v, &join(&path, "feasible")));
            match (x0, w, f) {
                (Some(x0), Some(w), Some(f)) => {
                    initial_states.push(x0);
                    weights.push(w);
                    feasible.push(f);
                }
                _ => complete = false,
            }
        }
        if !complete {
            return None;
        }

        let dim = weights[0].dim();
        let before = self.issues.len();
        for i in 0..weights.len() {
            let path = index("agents", i);
            if initial_states[i].len() != dim {
                self.error(
                    join(&path, "initial_state"),
                    format!("has {} entries, expected state dimension n = {dim}", initial_states[i].len()),
                );
            }
            if weights[i].dim() != dim {
                self.error(join(&path, "weights"), format!("dimension {} differs from n = {dim}", weights[i].dim()));
            }
            if feasible[i].dim() != dim {
                self.error(join(&path, "feasible"), format!("dimension {} differs from n = {dim}", feasible[i].dim()));
            }
        }
        (self.issues.len() == before).then_some(Agents { initial_states, weights, feasible })
    }

    fn feasible(&mut self, value: &Value, path: &str) -> Option<FeasibleWeightSet> {
        let items = self.array(value, path)?;
        if items.is_empty() {
            self.error(path, "feasible weight set must not be empty");
            return None;
        }
        let pairs: Vec<Option<WeightPair>> =
            items.iter().enumerate().map(|(i, v)| self.weight_pair(v, &index(path, i))).collect();
        let pairs: Vec<WeightPair> = pairs.into_iter().collect::<Option<_>>()?;
        match FeasibleWeightSet::new(pairs) {
            Ok(f) => Some(f),
            Err(e) => {
                self.error(path, e.to_string());
                None
            }
        }
    }

    fn schedule(&mut self, root: &Table) -> Option<PowerLawSchedule> {
        let t = self.section(root, "schedule", &["alpha", "beta", "gamma"])?;
        let mut get = |key: &str| {
            let path = join("schedule", key);
            self.field(t, "schedule", key).and_then(|v| self.real(v, &path))
        };
        let (alpha, beta, gamma) = (get("alpha"), get("beta"), get("gamma"));
        let (alpha, beta, gamma) = (alpha?, beta?, gamma?);
        match PowerLawSchedule::new(alpha, beta, gamma) {
            Ok(s) => Some(s),
            Err(dplqr_core::schedule::ScheduleError::InvalidParameter { name, value, requirement }) => {
                self.error(join("schedule", name), format!("{value} out of range ({requirement})"));
                None
            }
            Err(e) => {
                self.error("schedule", e.to_string());
                None
            }
        }
    }

    fn privacy(&mut self, root: &Table) -> Option<f64> {
        let t = self.section(root, "privacy", &["epsilon"])?;
        let eps = self.field(t, "privacy", "epsilon").and_then(|v| self.real(v, "privacy.epsilon"))?;
        if eps <= 0.0 {
            self.error("privacy.epsilon", format!("privacy budget must be positive, got {eps}"));
            return None;
        }
        Some(eps)
    }

    fn lqr(&mut self, root: &Table) -> Option<usize> {
        let t = self.section(root, "lqr", &["horizon"])?;
        self.field(t, "lqr", "horizon").and_then(|v| self.integer(v, "lqr.horizon", 1)).map(|h| h as usize)
    }

    fn sim(&mut self, root: &Table) -> Option<SimSection> {
        let t = self.section(root, "sim", &["steps", "trials", "seed", "noise_enabled", "require_assumptions"])?;
        let steps = self.field(t, "sim", "steps").and_then(|v| self.integer(v, "sim.steps", 1));
        let trials = self.field(t, "sim", "trials").and_then(|v| self.integer(v, "sim.trials", 1));
        let seed = self.field(t, "sim", "seed").and_then(|v| self.integer(v, "sim.seed", 0));
        let noise = self.field(t, "sim", "noise_enabled").and_then(|v| self.boolean(v, "sim.noise_enabled"));
        let require = match t.get("require_assumptions") {
            Some(v) => self.boolean(v, "sim.require_assumptions"),
            None => Some(false),
        };
        Some(SimSection {
            steps: steps? as usize,
            trials: trials? as usize,
            seed: seed? as u64,
            noise_enabled: noise?,
            require_assumptions: require?,
        })
    }
}

struct Agents {
    initial_states: Vec<Vec<f64>>,
    weights: Vec<WeightPair>,
    feasible: Vec<FeasibleWeightSet>,
}

struct SimSection {
    steps: usize,
    trials: usize,
    seed: u64,
    noise_enabled: bool,
    require_assumptions: bool,
}
