//! Line-delimited verification report.
//!
//! One line per check, `check=<name> measured=<v> threshold=<rel><v>
//! status=pass|fail`, then `overall=pass|fail`. Overall passes iff every
//! check does.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::Eq => "==",
        }
    }

    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Relation::Lt => measured < threshold,
            Relation::Le => measured <= threshold,
            Relation::Gt => measured > threshold,
            Relation::Ge => measured >= threshold,
            Relation::Eq => measured == threshold,
        }
    }

    /// Splits `"<=0.05"` into the relation and the number text.
    fn split(s: &str) -> Option<(Relation, &str)> {
        // two-character symbols first
        [Relation::Le, Relation::Ge, Relation::Eq, Relation::Lt, Relation::Gt]
            .into_iter()
            .find_map(|r| s.strip_prefix(r.symbol()).map(|rest| (r, rest)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> Self {
        Check { name: name.into(), measured, relation, threshold }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        self.relation.holds(self.measured, self.threshold)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(Check::passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Parses a rendered report, rejecting lines whose recorded status
    /// disagrees with their numbers.
    pub fn parse(text: &str) -> Result<Report, String> {
        let mut report = Report::default();
        let mut overall = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let at = |m: String| format!("report line {}: {m}", i + 1);
            if let Some(v) = line.strip_prefix("overall=") {
                overall = Some(match v.trim() {
                    "pass" => true,
                    "fail" => false,
                    other => return Err(at(format!("bad overall status `{other}`"))),
                });
                continue;
            }
            let mut fields = std::collections::HashMap::new();
            for part in line.split_whitespace() {
                let (k, v) = part.split_once('=').ok_or_else(|| at(format!("expected key=value, got `{part}`")))?;
                fields.insert(k, v);
            }
            let field = |k: &str| fields.get(k).copied().ok_or_else(|| at(format!("missing `{k}`")));
            let name = field("check")?.to_string();
            let measured: f64 = field("measured")?.parse().map_err(|_| at("bad measured value".into()))?;
            let (relation, thr) = Relation::split(field("threshold")?).ok_or_else(|| at("bad threshold relation".into()))?;
            let threshold: f64 = thr.parse().map_err(|_| at("bad threshold value".into()))?;
            let check = Check { name, measured, relation, threshold };
            let status = field("status")?;
            if (status == "pass") != check.passed() || !matches!(status, "pass" | "fail") {
                return Err(at(format!("status `{status}` contradicts {} {} {}", check.measured, relation.symbol(), threshold)));
            }
            report.push(check);
        }
        match overall {
            None => Err("report has no `overall=` line".into()),
            Some(o) if o != report.passed() => Err("overall status contradicts the individual checks".into()),
            Some(_) => Ok(report),
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "check={} measured={:e} threshold={}{:e} status={}",
                c.name,
                c.measured,
                c.relation.symbol(),
                c.threshold,
                if c.passed() { "pass" } else { "fail" }
            )?;
        }
        writeln!(f, "overall={}", if self.passed() { "pass" } else { "fail" })
    }
}
