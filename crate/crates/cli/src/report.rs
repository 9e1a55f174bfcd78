//! Self-describing experiment output.
//!
//! CSV reports start with `#` comment lines: the subcommand, the resolved
//! configuration (every flag, defaults included), summary values, tolerance
//! checks and the run time. The table follows with a column header row.
//! Everything below the comments depends only on the configuration.

use std::fmt::Write as _;
use std::time::Duration;

use serde_json::{json, Map, Value};

pub const PROGRAM: &str = "kernel-lens";

/// A tolerance check; the run passes when every check does.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub summary: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Fields of a JSON report; when non-empty the report renders as JSON.
    pub json: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.to_string(), ..Default::default() }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn summary(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.summary.push((key.into(), value.to_string()));
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn verdict(&self) -> &'static str {
        if self.checks.is_empty() {
            "none"
        } else if self.passed() {
            "pass"
        } else {
            "fail"
        }
    }

    /// The command line that reproduces this run.
    pub fn command_line(&self) -> String {
        let mut s = format!("{PROGRAM} {}", self.command);
        for (k, v) in &self.config {
            write!(s, " --{k} {v}").unwrap();
        }
        s
    }

    pub fn render(&self, elapsed: Duration) -> String {
        if self.json.is_empty() {
            self.render_csv(elapsed)
        } else {
            self.render_json(elapsed)
        }
    }

    fn render_csv(&self, elapsed: Duration) -> String {
        let mut s = String::new();
        writeln!(s, "# {PROGRAM} {}", self.command).unwrap();
        writeln!(s, "# command: {}", self.command_line()).unwrap();
        for (k, v) in &self.config {
            writeln!(s, "# config {k} = {v}").unwrap();
        }
        for (k, v) in &self.summary {
            writeln!(s, "# summary {k} = {v}").unwrap();
        }
        for c in &self.checks {
            writeln!(
                s,
                "# check {} = {} (tolerance {}) {}",
                c.name,
                c.value,
                c.tolerance,
                if c.passed { "pass" } else { "fail" }
            )
            .unwrap();
        }
        writeln!(s, "# verdict = {}", self.verdict()).unwrap();
        writeln!(s, "# elapsed_s = {:.3}", elapsed.as_secs_f64()).unwrap();
        s.push_str(&self.body());
        s
    }

    /// Column header and rows, without comments.
    pub fn body(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    fn render_json(&self, elapsed: Duration) -> String {
        let mut obj = Map::new();
        obj.insert("command".into(), json!(self.command));
        obj.insert("command_line".into(), json!(self.command_line()));
        let config: Map<String, Value> = self.config.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        obj.insert("config".into(), Value::Object(config));
        for (k, v) in &self.json {
            obj.insert(k.clone(), v.clone());
        }
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| json!({"name": c.name, "value": c.value, "tolerance": c.tolerance, "passed": c.passed}))
            .collect();
        obj.insert("checks".into(), Value::Array(checks));
        obj.insert("verdict".into(), json!(self.verdict()));
        obj.insert("elapsed_s".into(), json!(elapsed.as_secs_f64()));
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("serializable");
        s.push('\n');
        s
    }
}

/// A run description recovered from a report's comment header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedHeader {
    pub command: String,
    pub config: Vec<(String, String)>,
}

impl ParsedHeader {
    /// Arguments (program name included) that rerun the described command.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec![PROGRAM.to_string(), self.command.clone()];
        for (k, v) in &self.config {
            args.push(format!("--{k}"));
            args.push(v.clone());
        }
        args
    }
}

/// Reads the subcommand and configuration back from a CSV report.
pub fn parse_header(text: &str) -> Option<ParsedHeader> {
    let mut lines = text.lines().take_while(|l| l.starts_with('#'));
    let command = lines.next()?.strip_prefix(&format!("# {PROGRAM} "))?.trim().to_string();
    let config = lines
        .filter_map(|l| l.strip_prefix("# config "))
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    Some(ParsedHeader { command, config })
}

/// Reads the subcommand and configuration back from a JSON report.
pub fn parse_json_header(text: &str) -> Option<ParsedHeader> {
    let v: Value = serde_json::from_str(text).ok()?;
    let command = v.get("command")?.as_str()?.to_string();
    let config = v
        .get("config")?
        .as_object()?
        .iter()
        .map(|(k, v)| Some((k.clone(), v.as_str()?.to_string())))
        .collect::<Option<Vec<_>>>()?;
    Some(ParsedHeader { command, config })
}

/// The table part of a CSV report.
pub fn strip_header(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map_or("", |(_, r)| r);
    }
    rest
}
