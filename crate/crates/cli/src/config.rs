//! Run configuration files.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment                 (also allowed after a value)
//! [section]                 synthetic | ensemble | solver | experiment
//! key = value
//! value := integer | float | "string" | true | false | [value, value, ...]
//! ```
//!
//! `[ensemble] blocks = [[level, index], ...]` restricts training to the
//! listed dyadic blocks.
//!
//! Keys before the first section header are top-level (`seed`,
//! `output_dir`). Arrays stay on one line and may nest. Unknown sections or
//! keys and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use minmax_mom::dataset::{BetaValues, SyntheticSpec};
use minmax_mom::ensemble::{EnsembleConfig, EnsembleError, FitFailurePolicy};
use minmax_mom::learners::{Learner, SolverSettings};
use minmax_mom::partition::{max_level, BlockId, MIN_LEVEL};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source, l, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Array(Vec<Value>),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::Bool(_) => "boolean",
            Value::Array(_) => "array",
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: Value,
    line: usize,
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("", &["seed", "output_dir"]),
    (
        "synthetic",
        &["n", "d", "sparsity", "n_outliers", "noise_sd", "beta"],
    ),
    (
        "ensemble",
        &[
            "v_count",
            "k_min",
            "k_max",
            "lambdas",
            "log_lambdas",
            "erm_subspaces",
            "on_fit_failure",
            "keep_comparator",
            "blocks",
        ],
    ),
    ("solver", &["tol", "max_sweeps", "kkt_tol", "standardize"]),
    ("experiment", &["outlier_grid", "repetitions"]),
];

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.char_indices().peekable(),
            text,
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some((_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn rest_is_empty(&mut self) -> bool {
        self.skip_ws();
        matches!(self.chars.peek(), None | Some((_, '#')))
    }

    fn value(&mut self) -> Result<Value, String> {
        self.skip_ws();
        match self.chars.peek().copied() {
            None => Err("missing value".into()),
            Some((_, '"')) => {
                self.chars.next();
                let mut s = String::new();
                loop {
                    match self.chars.next() {
                        None => return Err("unterminated string".into()),
                        Some((_, '"')) => return Ok(Value::Str(s)),
                        Some((_, '\\')) => match self.chars.next() {
                            Some((_, '"')) => s.push('"'),
                            Some((_, '\\')) => s.push('\\'),
                            Some((_, 'n')) => s.push('\n'),
                            Some((_, 't')) => s.push('\t'),
                            _ => return Err("unsupported escape in string".into()),
                        },
                        Some((_, c)) => s.push(c),
                    }
                }
            }
            Some((_, '[')) => {
                self.chars.next();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if let Some((_, ']')) = self.chars.peek() {
                        self.chars.next();
                        return Ok(Value::Array(items));
                    }
                    items.push(self.value()?);
                    self.skip_ws();
                    match self.chars.next() {
                        Some((_, ',')) => {}
                        Some((_, ']')) => return Ok(Value::Array(items)),
                        _ => return Err("expected `,` or `]` in array".into()),
                    }
                }
            }
            Some((start, _)) => {
                let mut end = self.text.len();
                while let Some(&(i, c)) = self.chars.peek() {
                    if c == ',' || c == ']' || c == '#' || c.is_whitespace() {
                        end = i;
                        break;
                    }
                    self.chars.next();
                }
                let tok = &self.text[start..end];
                match tok {
                    "true" => Ok(Value::Bool(true)),
                    "false" => Ok(Value::Bool(false)),
                    _ => {
                        let clean = tok.replace('_', "");
                        if let Ok(i) = clean.parse::<i64>() {
                            Ok(Value::Int(i))
                        } else if let Ok(f) = clean.parse::<f64>() {
                            if f.is_finite() {
                                Ok(Value::Float(f))
                            } else {
                                Err(format!("non-finite number `{tok}`"))
                            }
                        } else {
                            Err(format!("cannot parse value `{tok}`"))
                        }
                    }
                }
            }
        }
    }
}

fn is_key(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_document(text: &str, source: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let err = |line: usize, message: String| ConfigError {
        source: source.to_string(),
        line: Some(line),
        message,
    };
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    sections.insert(String::new(), Section::default());
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let (name, tail) = rest
                .split_once(']')
                .ok_or_else(|| err(line, "unterminated section header".into()))?;
            let tail = tail.trim();
            if !(tail.is_empty() || tail.starts_with('#')) {
                return Err(err(
                    line,
                    format!("unexpected text after section header: `{tail}`"),
                ));
            }
            let name = name.trim();
            if !SECTIONS.iter().any(|(s, _)| !s.is_empty() && *s == name) {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(err(line, format!("section [{name}] repeated")));
            }
            sections.insert(
                name.to_string(),
                Section {
                    line,
                    entries: BTreeMap::new(),
                },
            );
            current = name.to_string();
            continue;
        }
        let (key, rest) = trimmed
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{trimmed}`")))?;
        let key = key.trim();
        if !is_key(key) {
            return Err(err(line, format!("invalid key `{key}`")));
        }
        let allowed = SECTIONS
            .iter()
            .find(|(s, _)| *s == current)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        if !allowed.contains(&key) {
            let place = if current.is_empty() {
                "at top level".to_string()
            } else {
                format!("in [{current}]")
            };
            return Err(err(line, format!("unknown key `{key}` {place}")));
        }
        let mut p = Parser::new(rest);
        let value = p.value().map_err(|m| err(line, format!("{key}: {m}")))?;
        if !p.rest_is_empty() {
            return Err(err(line, format!("{key}: unexpected text after value")));
        }
        let section = sections.get_mut(&current).expect("current section exists");
        if section.entries.contains_key(key) {
            return Err(err(line, format!("key `{key}` repeated")));
        }
        section
            .entries
            .insert(key.to_string(), Entry { value, line });
    }
    Ok(sections)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSection {
    pub outlier_grid: Vec<usize>,
    pub repetitions: usize,
}

/// A validated configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// `seed` is filled in later from the run seed.
    pub synthetic: Option<SyntheticSpec>,
    pub ensemble: Option<EnsembleConfig>,
    pub experiment: Option<ExperimentSection>,
    pub source: String,
    ensemble_lines: BTreeMap<String, usize>,
}

struct Reader<'a> {
    source: &'a str,
    section: &'a str,
    data: Option<&'a Section>,
}

impl<'a> Reader<'a> {
    fn err(&self, line: usize, key: &str, message: impl fmt::Display) -> ConfigError {
        let name = if self.section.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.section)
        };
        ConfigError {
            source: self.source.to_string(),
            line: Some(line),
            message: format!("{name}: {message}"),
        }
    }

    fn header_line(&self) -> usize {
        self.data.map_or(0, |s| s.line)
    }

    fn entry(&self, key: &str) -> Option<&'a Entry> {
        self.data.and_then(|s| s.entries.get(key))
    }

    fn line(&self, key: &str) -> usize {
        self.entry(key).map_or(self.header_line(), |e| e.line)
    }

    fn require(&self, key: &str) -> Result<&'a Entry, ConfigError> {
        self.entry(key).ok_or_else(|| ConfigError {
            source: self.source.to_string(),
            line: Some(self.header_line()).filter(|l| *l > 0),
            message: format!("missing required key `{key}` in [{}]", self.section),
        })
    }

    fn uint_of(&self, key: &str, e: &Entry) -> Result<u64, ConfigError> {
        match e.value {
            Value::Int(i) if i >= 0 => Ok(i as u64),
            Value::Int(i) => Err(self.err(e.line, key, format!("must be nonnegative, got {i}"))),
            ref v => Err(self.err(
                e.line,
                key,
                format!("expected an integer, got {}", v.kind()),
            )),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.entry(key).map(|e| self.uint_of(key, e)).transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.uint(key)?
            .map(|v| usize::try_from(v).map_err(|_| self.err(self.line(key), key, "too large")))
            .transpose()
    }

    fn float_of(&self, key: &str, line: usize, v: &Value) -> Result<f64, ConfigError> {
        match *v {
            Value::Int(i) => Ok(i as f64),
            Value::Float(f) => Ok(f),
            ref v => Err(self.err(line, key, format!("expected a number, got {}", v.kind()))),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.entry(key)
            .map(|e| self.float_of(key, e.line, &e.value))
            .transpose()
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.entry(key)
            .map(|e| match e.value {
                Value::Bool(b) => Ok(b),
                ref v => Err(self.err(
                    e.line,
                    key,
                    format!("expected true or false, got {}", v.kind()),
                )),
            })
            .transpose()
    }

    fn string(&self, key: &str) -> Result<Option<(String, usize)>, ConfigError> {
        self.entry(key)
            .map(|e| match &e.value {
                Value::Str(s) => Ok((s.clone(), e.line)),
                v => Err(self.err(e.line, key, format!("expected a string, got {}", v.kind()))),
            })
            .transpose()
    }

    fn array(&self, key: &str) -> Result<Option<(&'a [Value], usize)>, ConfigError> {
        self.entry(key)
            .map(|e| match &e.value {
                Value::Array(a) => Ok((a.as_slice(), e.line)),
                v => Err(self.err(e.line, key, format!("expected an array, got {}", v.kind()))),
            })
            .transpose()
    }

    fn float_array(&self, key: &str) -> Result<Option<(Vec<f64>, usize)>, ConfigError> {
        self.array(key)?
            .map(|(a, line)| {
                a.iter()
                    .map(|v| self.float_of(key, line, v))
                    .collect::<Result<Vec<_>, _>>()
                    .map(|v| (v, line))
            })
            .transpose()
    }

    fn usize_list(&self, key: &str, line: usize, a: &[Value]) -> Result<Vec<usize>, ConfigError> {
        a.iter()
            .map(|v| match *v {
                Value::Int(i) if i >= 0 => Ok(i as usize),
                ref v => Err(self.err(
                    line,
                    key,
                    format!("expected nonnegative integers, got {v:?}"),
                )),
            })
            .collect()
    }
}

impl RunConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let doc = parse_document(text, source)?;
        let reader = |section: &'static str| Reader {
            source,
            section,
            data: doc.get(section),
        };

        let top = reader("");
        let seed = top.uint("seed")?;
        let output_dir = top.string("output_dir")?.map(|(s, _)| PathBuf::from(s));

        let synthetic = match doc.get("synthetic") {
            None => None,
            Some(_) => Some(parse_synthetic(&reader("synthetic"))?),
        };

        let mut ensemble_lines = BTreeMap::new();
        let ensemble = match doc.get("ensemble") {
            None => {
                if let Some(s) = doc.get("solver") {
                    return Err(ConfigError {
                        source: source.to_string(),
                        line: Some(s.line),
                        message: "[solver] requires an [ensemble] section".into(),
                    });
                }
                None
            }
            Some(section) => {
                for (k, e) in &section.entries {
                    ensemble_lines.insert(k.clone(), e.line);
                }
                ensemble_lines.insert(String::new(), section.line);
                Some(parse_ensemble(&reader("ensemble"), &reader("solver"))?)
            }
        };

        let experiment = match doc.get("experiment") {
            None => None,
            Some(_) => {
                let r = reader("experiment");
                let (grid, line) = r
                    .array("outlier_grid")?
                    .ok_or_else(|| r.require("outlier_grid").unwrap_err())?;
                let outlier_grid = r.usize_list("outlier_grid", line, grid)?;
                if outlier_grid.is_empty() {
                    return Err(r.err(line, "outlier_grid", "must not be empty"));
                }
                let mut seen = std::collections::HashSet::new();
                for &o in &outlier_grid {
                    if o % 2 != 0 {
                        return Err(r.err(
                            line,
                            "outlier_grid",
                            format!("{o} is odd; outliers split evenly"),
                        ));
                    }
                    if !seen.insert(o) {
                        return Err(r.err(line, "outlier_grid", format!("{o} repeated")));
                    }
                }
                let repetitions = r
                    .usize("repetitions")?
                    .unwrap_or(minmax_mom::experiment::DEFAULT_REPETITIONS);
                if repetitions == 0 {
                    return Err(r.err(r.line("repetitions"), "repetitions", "must be positive"));
                }
                if let Some(s) = &synthetic {
                    if let Some(o) = outlier_grid.iter().find(|&&o| o >= s.n) {
                        return Err(r.err(
                            line,
                            "outlier_grid",
                            format!("{o} is not below synthetic.n = {}", s.n),
                        ));
                    }
                }
                Some(ExperimentSection {
                    outlier_grid,
                    repetitions,
                })
            }
        };

        let cfg = RunConfig {
            seed,
            output_dir,
            synthetic,
            ensemble,
            experiment,
            source: source.to_string(),
            ensemble_lines,
        };
        if let Some(s) = &cfg.synthetic {
            cfg.check_ensemble_fits(s.n, s.d, "synthetic data")?;
        }
        Ok(cfg)
    }

    /// Checks the ensemble against a dataset shape, pointing at the
    /// offending config line.
    pub fn check_ensemble_fits(&self, n: usize, d: usize, what: &str) -> Result<(), ConfigError> {
        let Some(e) = &self.ensemble else {
            return Ok(());
        };
        let err = |key: &str, message: String| ConfigError {
            source: self.source.clone(),
            line: self
                .ensemble_lines
                .get(key)
                .or(self.ensemble_lines.get(""))
                .copied(),
            message: format!("ensemble.{key}: {message}"),
        };
        let top = max_level(n);
        if e.k_max > top {
            return Err(err(
                "k_max",
                format!(
                    "{} exceeds floor(log2 N) = {top} for the {n} rows of {what}",
                    e.k_max
                ),
            ));
        }
        if 8 * e.v_count > n {
            return Err(err(
                "v_count",
                format!(
                    "{} exceeds N/8 = {} for the {n} rows of {what}",
                    e.v_count,
                    n / 8
                ),
            ));
        }
        for l in &e.learners {
            if let Learner::Erm { subspace } = l {
                if let Some(j) = subspace.iter().find(|&&j| j >= d) {
                    return Err(err(
                        "erm_subspaces",
                        format!("coordinate {j} out of range for the {d} features of {what}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn parse_synthetic(r: &Reader<'_>) -> Result<SyntheticSpec, ConfigError> {
    let n = r.usize("n")?.ok_or_else(|| r.require("n").unwrap_err())?;
    let d = r.usize("d")?.ok_or_else(|| r.require("d").unwrap_err())?;
    let sparsity = r
        .usize("sparsity")?
        .ok_or_else(|| r.require("sparsity").unwrap_err())?;
    let n_outliers = r.usize("n_outliers")?.unwrap_or(0);
    let noise_sd = r.float("noise_sd")?.unwrap_or(1.0);
    let beta = match r.string("beta")? {
        None => BetaValues::Ones,
        Some((s, line)) => match s.as_str() {
            "ones" => BetaValues::Ones,
            "gaussian" => BetaValues::Gaussian,
            _ => {
                return Err(r.err(
                    line,
                    "beta",
                    format!("expected \"ones\" or \"gaussian\", got \"{s}\""),
                ))
            }
        },
    };
    let spec = SyntheticSpec {
        n,
        d,
        sparsity,
        n_outliers,
        noise_sd,
        seed: 0,
        beta,
    };
    if let Err(minmax_mom::dataset::DatasetError::InvalidSpec { field, reason }) = spec.validate() {
        return Err(r.err(r.line(field), field, reason));
    }
    Ok(spec)
}

fn parse_ensemble(r: &Reader<'_>, solver: &Reader<'_>) -> Result<EnsembleConfig, ConfigError> {
    let v_count = r
        .usize("v_count")?
        .ok_or_else(|| r.require("v_count").unwrap_err())?;
    if v_count < 3 {
        return Err(r.err(
            r.line("v_count"),
            "v_count",
            format!("must be >= 3, got {v_count}"),
        ));
    }
    let level = |key: &str, default: Option<u32>| -> Result<u32, ConfigError> {
        match r.uint(key)? {
            Some(v) => u32::try_from(v)
                .ok()
                .filter(|v| *v < 64)
                .ok_or_else(|| r.err(r.line(key), key, "too large")),
            None => default.ok_or_else(|| r.require(key).unwrap_err()),
        }
    };
    let k_min = level("k_min", Some(MIN_LEVEL))?;
    let k_max = level("k_max", None)?;
    if k_min < MIN_LEVEL {
        return Err(r.err(
            r.line("k_min"),
            "k_min",
            format!("must be >= {MIN_LEVEL}, got {k_min}"),
        ));
    }
    if k_max < k_min {
        return Err(r.err(
            r.line("k_max"),
            "k_max",
            format!("{k_max} is below k_min = {k_min}"),
        ));
    }

    let mut learners = Vec::new();
    match (r.float_array("lambdas")?, r.float_array("log_lambdas")?) {
        (Some(_), Some((_, line))) => {
            return Err(r.err(
                line,
                "log_lambdas",
                "give either lambdas or log_lambdas, not both",
            ))
        }
        (Some((v, line)), None) => {
            for l in v {
                if !(l.is_finite() && l >= 0.0) {
                    return Err(r.err(line, "lambdas", format!("{l} is not a finite value >= 0")));
                }
                learners.push(Learner::Lasso { lambda: l });
            }
        }
        (None, Some((v, _))) => {
            learners.extend(v.into_iter().map(|l| Learner::Lasso { lambda: l.exp() }))
        }
        (None, None) => {}
    }
    if let Some((subs, line)) = r.array("erm_subspaces")? {
        for s in subs {
            let Value::Array(items) = s else {
                return Err(r.err(line, "erm_subspaces", "expected an array of index arrays"));
            };
            let subspace = r.usize_list("erm_subspaces", line, items)?;
            let l = Learner::Erm { subspace };
            l.validate(usize::MAX)
                .map_err(|e| r.err(line, "erm_subspaces", e))?;
            learners.push(l);
        }
    }
    if learners.is_empty() {
        return Err(ConfigError {
            source: r.source.to_string(),
            line: Some(r.header_line()),
            message:
                "[ensemble] needs at least one learner (lambdas, log_lambdas or erm_subspaces)"
                    .into(),
        });
    }

    let on_fit_failure = match r.string("on_fit_failure")? {
        None => FitFailurePolicy::Abort,
        Some((s, line)) => match s.as_str() {
            "abort" => FitFailurePolicy::Abort,
            "exclude" => FitFailurePolicy::Exclude,
            _ => {
                return Err(r.err(
                    line,
                    "on_fit_failure",
                    format!("expected \"abort\" or \"exclude\", got \"{s}\""),
                ))
            }
        },
    };
    let keep_comparator = r.boolean("keep_comparator")?.unwrap_or(false);

    let mut settings = SolverSettings::default();
    if let Some(t) = solver.float("tol")? {
        if !(t.is_finite() && t > 0.0) {
            return Err(solver.err(solver.line("tol"), "tol", "must be > 0"));
        }
        settings.tol = t;
    }
    if let Some(t) = solver.float("kkt_tol")? {
        if !(t.is_finite() && t > 0.0) {
            return Err(solver.err(solver.line("kkt_tol"), "kkt_tol", "must be > 0"));
        }
        settings.kkt_tol = t;
    }
    if let Some(m) = solver.usize("max_sweeps")? {
        if m == 0 {
            return Err(solver.err(solver.line("max_sweeps"), "max_sweeps", "must be positive"));
        }
        settings.max_sweeps = m;
    }
    if let Some(s) = solver.boolean("standardize")? {
        settings.standardize = s;
    }

    let mut blocks = None;
    if let Some((items, line)) = r.array("blocks")? {
        let mut list = Vec::new();
        for b in items {
            let pair = match b {
                Value::Array(p) => r.usize_list("blocks", line, p)?,
                _ => Vec::new(),
            };
            let [level, index] = pair[..] else {
                return Err(r.err(line, "blocks", "expected an array of [level, index] pairs"));
            };
            let level = u32::try_from(level)
                .map_err(|_| r.err(line, "blocks", format!("level {level} is too large")))?;
            list.push(BlockId::new(level, index));
        }
        blocks = Some(list);
    }

    let config = EnsembleConfig {
        learners,
        v_count,
        k_min,
        k_max,
        settings,
        on_fit_failure,
        keep_comparator,
        blocks,
    };
    if let Err(e) = config.check_blocks() {
        let msg = match e {
            EnsembleError::Config(m) => m,
            other => other.to_string(),
        };
        return Err(r.err(r.line("blocks"), "blocks", msg));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
# desk study
seed = 7
output_dir = "out"   # relative to the working directory

[synthetic]
n = 400
d = 200
sparsity = 5
n_outliers = 8
noise_sd = 1.0

[ensemble]
v_count = 24
k_min = 3
k_max = 4
log_lambdas = [-1, -0.5, 0, 0.5, 1, 1.5, 2]
erm_subspaces = [[0, 1, 2], [3]]
on_fit_failure = "exclude"

[solver]
tol = 1e-8
max_sweeps = 20_000

[experiment]
outlier_grid = [0, 4, 8]
repetitions = 3
"#;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, "test.conf")
    }

    #[test]
    fn full_config() {
        let c = parse(FULL).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.output_dir, Some(PathBuf::from("out")));
        let s = c.synthetic.unwrap();
        assert_eq!((s.n, s.d, s.sparsity, s.n_outliers), (400, 200, 5, 8));
        let e = c.ensemble.unwrap();
        assert_eq!(e.learners.len(), 9);
        assert_eq!(
            e.learners[0],
            Learner::Lasso {
                lambda: (-1f64).exp()
            }
        );
        assert_eq!(e.learners[8], Learner::Erm { subspace: vec![3] });
        assert_eq!(e.on_fit_failure, FitFailurePolicy::Exclude);
        assert_eq!(e.settings.tol, 1e-8);
        assert_eq!(e.settings.max_sweeps, 20_000);
        let x = c.experiment.unwrap();
        assert_eq!(x.outlier_grid, vec![0, 4, 8]);
        assert_eq!(x.repetitions, 3);
    }

    fn error_at(text: &str) -> (usize, String) {
        let e = parse(text).unwrap_err();
        (e.line.unwrap_or(0), e.message)
    }

    #[test]
    fn line_precise_errors() {
        let (l, m) = error_at("[synthetic]\nn = 100\nd = 5\nsparsity = 2\nn_outliers = 3\n");
        assert_eq!(l, 5);
        assert!(m.contains("n_outliers"), "{m}");

        let (l, m) = error_at("seed = 1\n[bogus]\n");
        assert_eq!(l, 2);
        assert!(m.contains("unknown section"));

        let (l, m) = error_at("[ensemble]\nv_count = 3\nk_max = 3\nlambdas = [1, -2]\n");
        assert_eq!(l, 4);
        assert!(m.contains("lambdas"));

        let (l, _) = error_at("[ensemble]\nv_count = 3\nv_count = 4\n");
        assert_eq!(l, 3);

        let (l, m) = error_at("[synthetic]\nn = 64\nd = 5\nsparsity = 2\n[ensemble]\nv_count = 9\nk_max = 3\nlambdas = [1]\n");
        assert_eq!(l, 6);
        assert!(m.contains("N/8"), "{m}");

        let (l, m) = error_at("[synthetic]\nn = 64\nd = 5\nsparsity = 2\n[ensemble]\nv_count = 3\nk_max = 7\nlambdas = [1]\n");
        assert_eq!(l, 7);
        assert!(m.contains("floor(log2 N)"), "{m}");

        let (l, _) = error_at("seed = \"x\"\n");
        assert_eq!(l, 1);
        let (l, _) = error_at("seed = [1, 2\n");
        assert_eq!(l, 1);
        let (l, _) = error_at("\n\nnot a pair\n");
        assert_eq!(l, 3);
        let (l, _) = error_at("[synthetic]\nn = 10\n");
        assert_eq!(l, 1);
        let (l, m) = error_at(
            "[synthetic]\nn = 100\nd = 5\nsparsity = 2\n[experiment]\noutlier_grid = [0, 100]\n",
        );
        assert_eq!(l, 6);
        assert!(m.contains("below"), "{m}");
    }

    #[test]
    fn values() {
        let mut p = Parser::new(r#"[1, 2.5, "a\"b", true, [3]] # tail"#);
        let v = p.value().unwrap();
        assert_eq!(
            v,
            Value::Array(vec![
                Value::Int(1),
                Value::Float(2.5),
                Value::Str("a\"b".into()),
                Value::Bool(true),
                Value::Array(vec![Value::Int(3)]),
            ])
        );
        assert!(p.rest_is_empty());
        assert!(Parser::new("inf").value().is_err());
        assert!(Parser::new("\"open").value().is_err());
    }

    #[test]
    fn defaults() {
        let c = parse("[ensemble]\nv_count = 3\nk_max = 3\nlambdas = [0.1]\n").unwrap();
        let e = c.ensemble.unwrap();
        assert_eq!(e.k_min, 3);
        assert_eq!(e.settings, SolverSettings::default());
        assert!(c.seed.is_none());
        let c =
            parse("[synthetic]\nn=100\nd=3\nsparsity=1\n[experiment]\noutlier_grid=[0]\n").unwrap();
        assert_eq!(c.experiment.unwrap().repetitions, 100);
    }
}
