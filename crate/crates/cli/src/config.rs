//! Experiment configuration files.
//!
//! ```text
//! [experiment]
//! env = stochastic_dp        # or four_rooms
//! depth = 3
//! runs = 10
//! episodes = 10000
//!
//! [agent]
//! options = 2, 2
//! lr_termination = 10.0
//! ```
//!
//! Only `env` and `depth` are required. Everything else defaults to the
//! tuned values for that environment and depth.

use std::fmt;
use std::path::{Path, PathBuf};

use hoc_core::{HierarchyConfig, TopPolicyMode};
use hoc_envs::{Environment, FourRooms, StochasticDP};
use hoc_learn::DEFAULT_STEP_CAP;

pub const DEFAULT_WINDOW: usize = 100;
pub const MAX_DEPTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    FourRooms,
    StochasticDP,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::FourRooms => "four_rooms",
            EnvKind::StochasticDP => "stochastic_dp",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "four_rooms" | "fourrooms" => Some(EnvKind::FourRooms),
            "stochastic_dp" | "stochasticdp" => Some(EnvKind::StochasticDP),
            _ => None,
        }
    }

    pub fn build(self) -> Box<dyn Environment + Send> {
        match self {
            EnvKind::FourRooms => Box::new(FourRooms::new()),
            EnvKind::StochasticDP => Box::new(StochasticDP::new()),
        }
    }

    pub fn num_states(self) -> usize {
        self.build().num_states()
    }

    pub fn num_actions(self) -> usize {
        self.build().num_actions()
    }

    /// The per-episode quantity reported in learning curves.
    pub fn metric(self) -> Metric {
        match self {
            EnvKind::FourRooms => Metric::Steps,
            EnvKind::StochasticDP => Metric::Reward,
        }
    }

    pub fn default_episodes(self) -> usize {
        match self {
            EnvKind::FourRooms => 20_000,
            EnvKind::StochasticDP => 10_000,
        }
    }

    pub fn default_runs(self) -> usize {
        match self {
            EnvKind::FourRooms => 50,
            EnvKind::StochasticDP => 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Steps,
    Reward,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Steps => "steps",
            Metric::Reward => "reward",
        }
    }
}

/// Everything needed to run and report one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub env: EnvKind,
    pub agent: HierarchyConfig,
    pub num_runs: usize,
    pub episodes: usize,
    pub report_window: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub step_cap: usize,
    pub label: String,
}

/// Tuned hyperparameters for `env` at `depth`, with the option counts used in the experiments.
///
/// Depth 4 and deeper reuse the depth-3 values with two options per level.
pub fn default_agent(env: EnvKind, depth: usize) -> HierarchyConfig {
    let options = match depth {
        1 => vec![],
        2 => vec![4],
        d => vec![2; d - 1],
    };
    let mut c = HierarchyConfig::new(env.num_states(), env.num_actions(), options);
    c.gamma = 0.99;
    c.epsilon = 0.1;
    c.eta = 0.0;
    c.top_policy_mode = TopPolicyMode::EpsilonGreedyOverCritic;
    c.policy_baseline = false;
    let (critic, policy, termination, tau) = match (env, depth) {
        (EnvKind::FourRooms, 1) => (0.01, 0.01, 0.0, 0.1),
        (EnvKind::FourRooms, _) => (0.5, 0.5, 0.25, 1.0),
        (EnvKind::StochasticDP, 1) => (0.25, 0.25, 0.0, 0.01),
        (EnvKind::StochasticDP, 2) => (0.5, 0.1, 0.01, 0.1),
        (EnvKind::StochasticDP, _) => (0.5, 1.0, 10.0, 1.0),
    };
    c.lr_critic = critic;
    c.lr_policy = policy;
    c.lr_termination = termination;
    c.temperature_per_level = vec![tau; depth];
    c
}

impl ExperimentSpec {
    /// The defaults for `env` at `depth`.
    pub fn new(env: EnvKind, depth: usize) -> Self {
        ExperimentSpec {
            env,
            agent: default_agent(env, depth),
            num_runs: env.default_runs(),
            episodes: env.default_episodes(),
            report_window: DEFAULT_WINDOW,
            base_seed: 0,
            output_dir: PathBuf::from("results"),
            step_cap: DEFAULT_STEP_CAP,
            label: format!("N={depth}"),
        }
    }

    pub fn depth(&self) -> usize {
        self.agent.depth()
    }

    pub fn checkpoints(&self) -> usize {
        self.episodes / self.report_window
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, or `None` for problems with the file as a whole.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Every problem found in a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const EXPERIMENT_KEYS: &[&str] = &[
    "env",
    "depth",
    "runs",
    "episodes",
    "report_window",
    "seed",
    "output",
    "step_cap",
    "label",
];
const AGENT_KEYS: &[&str] = &[
    "options",
    "gamma",
    "lr_critic",
    "lr_policy",
    "lr_termination",
    "temperature",
    "temperatures",
    "epsilon",
    "eta",
    "top_policy",
    "baseline",
];

struct Entry {
    key: String,
    value: String,
    line: usize,
}

struct Parser {
    entries: Vec<Entry>,
    errors: Vec<ConfigError>,
}

impl Parser {
    fn error(&mut self, line: usize, message: String) {
        self.errors.push(ConfigError {
            line: Some(line),
            message,
        });
    }

    fn take(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<(T, usize)> {
        let (value, line) = {
            let e = self.take(key)?;
            (e.value.clone(), e.line)
        };
        match value.parse::<T>() {
            Ok(v) => Some((v, line)),
            Err(_) => {
                self.error(line, format!("{key} = {value:?} is not {what}"));
                None
            }
        }
    }

    fn real(&mut self, key: &str) -> Option<(f64, usize)> {
        let (v, line) = self.number::<f64>(key, "a number")?;
        if !v.is_finite() {
            self.error(line, format!("{key} must be finite"));
            return None;
        }
        Some((v, line))
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<(Vec<T>, usize)> {
        let (value, line) = {
            let e = self.take(key)?;
            (e.value.clone(), e.line)
        };
        if value.trim().is_empty() {
            return Some((Vec::new(), line));
        }
        let mut out = Vec::new();
        for part in value.split(',') {
            match part.trim().parse::<T>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.error(line, format!("{key}: {:?} is not {what}", part.trim()));
                    return None;
                }
            }
        }
        Some((out, line))
    }
}

/// Parses and validates a configuration, filling in defaults.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigErrors> {
    let mut p = Parser {
        entries: Vec::new(),
        errors: Vec::new(),
    };
    let mut section = "experiment".to_string();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim();
            if name != "experiment" && name != "agent" {
                p.error(line, format!("unknown section [{name}]"));
            }
            section = name.to_string();
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            p.error(line, format!("expected `key = value`, found {content:?}"));
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        let allowed = match section.as_str() {
            "experiment" => EXPERIMENT_KEYS,
            "agent" => AGENT_KEYS,
            _ => continue,
        };
        if !allowed.contains(&key.as_str()) {
            p.error(line, format!("unknown key {key:?} in [{section}]"));
            continue;
        }
        if let Some(prev) = p.take(&key) {
            let first = prev.line;
            p.error(line, format!("duplicate key {key:?} (first set on line {first})"));
            continue;
        }
        p.entries.push(Entry { key, value, line });
    }

    let env = match p.take("env").map(|e| (e.value.clone(), e.line)) {
        Some((v, line)) => match EnvKind::parse(&v) {
            Some(k) => Some(k),
            None => {
                p.error(line, format!("env = {v:?} is not one of four_rooms, stochastic_dp"));
                None
            }
        },
        None => {
            p.errors.push(ConfigError {
                line: None,
                message: "missing required key `env`".into(),
            });
            None
        }
    };
    let depth = match p.number::<usize>("depth", "a positive integer") {
        Some((d, line)) if d == 0 || d > MAX_DEPTH => {
            p.error(line, format!("depth = {d} must lie in 1..={MAX_DEPTH}"));
            None
        }
        Some((d, _)) => Some(d),
        None => {
            if p.take("depth").is_none() {
                p.errors.push(ConfigError {
                    line: None,
                    message: "missing required key `depth`".into(),
                });
            }
            None
        }
    };
    let (Some(env), Some(depth)) = (env, depth) else {
        // still report problems in the remaining keys
        validate_rest(&mut p, &mut ExperimentSpec::new(EnvKind::StochasticDP, 1));
        return Err(ConfigErrors(p.errors));
    };
    let mut spec = ExperimentSpec::new(env, depth);
    validate_rest(&mut p, &mut spec);
    if p.errors.is_empty() {
        Ok(spec)
    } else {
        Err(ConfigErrors(p.errors))
    }
}

fn validate_rest(p: &mut Parser, spec: &mut ExperimentSpec) {
    let depth = spec.depth();
    if let Some((v, line)) = p.number::<usize>("runs", "a positive integer") {
        if v == 0 {
            p.error(line, "runs must be at least 1".into());
        }
        spec.num_runs = v;
    }
    if let Some((v, line)) = p.number::<usize>("episodes", "a positive integer") {
        if v == 0 {
            p.error(line, "episodes must be at least 1".into());
        }
        spec.episodes = v;
    }
    let window_line = p.take("report_window").map(|e| e.line);
    if let Some((v, line)) = p.number::<usize>("report_window", "a positive integer") {
        if v == 0 {
            p.error(line, "report_window must be at least 1".into());
        }
        spec.report_window = v;
    }
    if spec.report_window > 0 && spec.episodes > 0 && !spec.episodes.is_multiple_of(spec.report_window) {
        let line = window_line.or_else(|| p.take("episodes").map(|e| e.line));
        p.errors.push(ConfigError {
            line,
            message: format!(
                "report_window = {} does not divide episodes = {}",
                spec.report_window, spec.episodes
            ),
        });
    }
    if let Some((v, _)) = p.number::<u64>("seed", "a non-negative integer") {
        spec.base_seed = v;
    }
    if let Some(e) = p.take("output") {
        spec.output_dir = PathBuf::from(&e.value);
    }
    if let Some(e) = p.take("label") {
        spec.label = e.value.clone();
    }
    if let Some((v, line)) = p.number::<usize>("step_cap", "a positive integer") {
        if v == 0 {
            p.error(line, "step_cap must be at least 1".into());
        }
        spec.step_cap = v;
    }

    let agent = &mut spec.agent;
    if let Some((opts, line)) = p.list::<usize>("options", "a positive integer") {
        if opts.len() != depth - 1 {
            p.error(line, format!("options lists {} levels but depth {depth} needs {}", opts.len(), depth - 1));
        } else if opts.contains(&0) {
            p.error(line, "every option level needs at least one option".into());
        } else {
            agent.options_per_level = opts;
        }
    }
    if let Some((g, line)) = p.real("gamma") {
        if !(0.0..1.0).contains(&g) {
            p.error(line, format!("gamma = {g} must lie in [0, 1)"));
        }
        agent.gamma = g;
    }
    for key in ["lr_critic", "lr_policy", "lr_termination"] {
        if let Some((v, line)) = p.real(key) {
            if v < 0.0 {
                p.error(line, format!("{key} = {v} must be non-negative"));
            }
            match key {
                "lr_critic" => agent.lr_critic = v,
                "lr_policy" => agent.lr_policy = v,
                _ => agent.lr_termination = v,
            }
        }
    }
    if p.take("temperature").is_some() && p.take("temperatures").is_some() {
        let line = p.take("temperatures").map(|e| e.line).unwrap_or(0);
        p.error(line, "set either temperature or temperatures, not both".into());
    }
    if let Some((t, line)) = p.real("temperature") {
        if t <= 0.0 {
            p.error(line, format!("temperature = {t} must be positive"));
        }
        agent.temperature_per_level = vec![t; depth];
    }
    if let Some((ts, line)) = p.list::<f64>("temperatures", "a number") {
        if ts.len() != depth {
            p.error(line, format!("temperatures lists {} levels but depth is {depth}", ts.len()));
        } else if ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            p.error(line, "temperatures must be positive".into());
        } else {
            agent.temperature_per_level = ts;
        }
    }
    if let Some((e, line)) = p.real("epsilon") {
        if !(0.0..=1.0).contains(&e) {
            p.error(line, format!("epsilon = {e} must lie in [0, 1]"));
        }
        agent.epsilon = e;
    }
    if let Some((e, _)) = p.real("eta") {
        agent.eta = e;
    }
    if let Some(e) = p.take("top_policy") {
        let (v, line) = (e.value.clone(), e.line);
        match v.as_str() {
            "epsilon_greedy" => agent.top_policy_mode = TopPolicyMode::EpsilonGreedyOverCritic,
            "policy_gradient" => agent.top_policy_mode = TopPolicyMode::PolicyGradient,
            _ => p.error(line, format!("top_policy = {v:?} is not epsilon_greedy or policy_gradient")),
        }
    }
    if let Some(e) = p.take("baseline") {
        let (v, line) = (e.value.clone(), e.line);
        match v.as_str() {
            "true" => agent.policy_baseline = true,
            "false" => agent.policy_baseline = false,
            _ => p.error(line, format!("baseline = {v:?} is not true or false")),
        }
    }
}

/// Reads and parses a configuration file.
pub fn parse_config_file(path: &Path) -> anyhow::Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(parse_config(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_stochastic_dp_config_fills_defaults() {
        let spec = parse_config("env = stochastic_dp\ndepth = 3\n").unwrap();
        assert_eq!(spec.agent.temperature_per_level, vec![1.0, 1.0, 1.0]);
        assert_eq!(spec.agent.options_per_level, vec![2, 2]);
        assert_eq!(spec.agent.gamma, 0.99);
        assert_eq!((spec.num_runs, spec.episodes, spec.report_window), (10, 10_000, 100));
        assert_eq!(spec.agent.lr_termination, 10.0);
        for (depth, tau) in [(1, 0.01), (2, 0.1), (3, 1.0)] {
            let s = parse_config(&format!("env = stochastic_dp\ndepth = {depth}")).unwrap();
            assert!(s.agent.temperature_per_level.iter().all(|t| *t == tau));
        }
    }

    #[test]
    fn four_rooms_defaults() {
        let s = parse_config("[experiment]\nenv = four_rooms\ndepth = 2").unwrap();
        assert_eq!(s.agent.options_per_level, vec![4]);
        assert_eq!((s.agent.lr_critic, s.agent.lr_policy, s.agent.lr_termination), (0.5, 0.5, 0.25));
        assert_eq!((s.num_runs, s.episodes), (50, 20_000));
        let flat = parse_config("env = four_rooms\ndepth = 1").unwrap();
        assert_eq!((flat.agent.lr_critic, flat.agent.lr_policy), (0.01, 0.01));
    }

    #[test]
    fn gamma_out_of_range_names_the_bound() {
        let err = parse_config("env = four_rooms\ndepth = 2\n[agent]\ngamma = 1.5\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].line, Some(4));
        assert!(err.to_string().contains("[0, 1)"));
    }

    #[test]
    fn empty_file_lists_every_required_key() {
        let err = parse_config("").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("`env`") && text.contains("`depth`"), "{text}");
    }

    #[test]
    fn all_problems_are_reported_together() {
        let text = "env = mars\ndepth = x\nfoo = 1\n[agent]\nlr_critic = -1\nbaseline = maybe\n[extra]\nz = 1\n";
        let err = parse_config(text).unwrap_err();
        let lines: Vec<_> = err.0.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![Some(3), Some(7), Some(1), Some(2), Some(5), Some(6)]);
    }

    #[test]
    fn overrides_and_layout_checks() {
        let s = parse_config(
            "env = four_rooms\ndepth = 3\nruns = 2\nepisodes = 300\nseed = 9\n\n[agent]\noptions = 3, 2\ntemperatures = 0.5, 1, 2\ntop_policy = policy_gradient\nbaseline = true\n",
        )
        .unwrap();
        assert_eq!(s.agent.options_per_level, vec![3, 2]);
        assert_eq!(s.agent.temperature_per_level, vec![0.5, 1.0, 2.0]);
        assert_eq!(s.agent.top_policy_mode, TopPolicyMode::PolicyGradient);
        assert!(s.agent.policy_baseline);
        assert_eq!((s.num_runs, s.episodes, s.base_seed), (2, 300, 9));
        let bad = parse_config("env = four_rooms\ndepth = 3\nepisodes = 250\n[agent]\noptions = 2\n").unwrap_err();
        assert_eq!(bad.0.len(), 2);
        let dup = parse_config("env = four_rooms\ndepth = 1\ndepth = 2\n").unwrap_err();
        assert_eq!(dup.0[0].line, Some(3));
    }
}
