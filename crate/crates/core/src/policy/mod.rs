//! Permit policies over subject attributes, resources, actions and time
//! context.
//!
//! Policies are written in a small textual language, one per `.pol` file:
//!
//! ```text
//! permit subjects with student, school_member, library_subscriber
//!   may read on resources of type audio
//!   when time between 08:00 and 18:00 and day in [mon,tue,wed,thu,fri]
//!   in domain library
//! ```

mod eval;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::is_token;

pub use eval::{evaluate, AccessRequest, Decision, Outcome, Reason};
pub use parser::{parse_policy, ParseError};

pub const MINUTES_PER_DAY: u16 = 1440;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("policy needs at least one subject attribute")]
    NoSubjects,
    #[error("invalid token {0:?}")]
    InvalidToken(String),
    #[error("time window {start}..{end} must satisfy 0 <= start < end <= 1440")]
    BadTimeWindow { start: u16, end: u16 },
    #[error("day set is empty")]
    EmptyDaySet,
    #[error("more than one {0} condition")]
    DuplicateCondition(&'static str),
}

/// `name` (attribute present) or `name="value"` (attribute with that value).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrTerm {
    pub name: String,
    pub value: Option<String>,
}

impl AttrTerm {
    pub fn named(name: impl Into<String>) -> Self {
        AttrTerm {
            name: name.into(),
            value: None,
        }
    }

    pub fn with_value(name: impl Into<String>, value: impl Into<String>) -> Self {
        AttrTerm {
            name: name.into(),
            value: Some(value.into()),
        }
    }
}

impl fmt::Display for AttrTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            None => f.write_str(&self.name),
            Some(v) => write!(f, "{}={}", self.name, parser::quote(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Day {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl Day {
    pub const ALL: [Day; 7] = [Day::Mon, Day::Tue, Day::Wed, Day::Thu, Day::Fri, Day::Sat, Day::Sun];

    pub fn as_str(self) -> &'static str {
        match self {
            Day::Mon => "mon",
            Day::Tue => "tue",
            Day::Wed => "wed",
            Day::Thu => "thu",
            Day::Fri => "fri",
            Day::Sat => "sat",
            Day::Sun => "sun",
        }
    }

    pub fn parse(s: &str) -> Option<Day> {
        Day::ALL.into_iter().find(|d| d.as_str() == s)
    }
}

impl From<chrono::Weekday> for Day {
    fn from(w: chrono::Weekday) -> Self {
        Day::ALL[w.num_days_from_monday() as usize]
    }
}

/// Context condition, evaluated in UTC.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// Half-open `[start, end)` in minutes of the day.
    TimeWindow { start: u16, end: u16 },
    DaySet(BTreeSet<Day>),
}

impl Condition {
    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            Condition::TimeWindow { start, end } => {
                if start < end && *end <= MINUTES_PER_DAY {
                    Ok(())
                } else {
                    Err(PolicyError::BadTimeWindow {
                        start: *start,
                        end: *end,
                    })
                }
            }
            Condition::DaySet(days) if days.is_empty() => Err(PolicyError::EmptyDaySet),
            Condition::DaySet(_) => Ok(()),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::TimeWindow { start, end } => write!(
                f,
                "time between {:02}:{:02} and {:02}:{:02}",
                start / 60,
                start % 60,
                end / 60,
                end % 60
            ),
            Condition::DaySet(days) => {
                let days: Vec<&str> = days.iter().map(|d| d.as_str()).collect();
                write!(f, "day in [{}]", days.join(","))
            }
        }
    }
}

/// A permit rule. The only effect is Permit; anything not permitted is
/// denied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Policy {
    subject_attrs: BTreeSet<AttrTerm>,
    action: String,
    resource_type: Option<String>,
    resource_name: Option<String>,
    context: Vec<Condition>,
    domain_id: String,
}

impl Policy {
    pub fn new(
        subject_attrs: impl IntoIterator<Item = AttrTerm>,
        action: impl Into<String>,
        resource_type: Option<String>,
        resource_name: Option<String>,
        context: Vec<Condition>,
        domain_id: impl Into<String>,
    ) -> Result<Self, PolicyError> {
        let policy = Policy {
            subject_attrs: subject_attrs.into_iter().collect(),
            action: action.into(),
            resource_type,
            resource_name,
            context,
            domain_id: domain_id.into(),
        };
        policy.validate()?;
        Ok(policy)
    }

    fn validate(&self) -> Result<(), PolicyError> {
        if self.subject_attrs.is_empty() {
            return Err(PolicyError::NoSubjects);
        }
        let tokens = self
            .subject_attrs
            .iter()
            .map(|t| t.name.as_str())
            .chain([self.action.as_str(), self.domain_id.as_str()])
            .chain(self.resource_type.as_deref());
        for t in tokens {
            if !is_token(t) || parser::is_reserved(t) {
                return Err(PolicyError::InvalidToken(t.to_owned()));
            }
        }
        let mut windows = 0;
        let mut day_sets = 0;
        for c in &self.context {
            c.validate()?;
            match c {
                Condition::TimeWindow { .. } => windows += 1,
                Condition::DaySet(_) => day_sets += 1,
            }
        }
        if windows > 1 {
            return Err(PolicyError::DuplicateCondition("time"));
        }
        if day_sets > 1 {
            return Err(PolicyError::DuplicateCondition("day"));
        }
        Ok(())
    }

    pub fn subject_attrs(&self) -> &BTreeSet<AttrTerm> {
        &self.subject_attrs
    }

    pub fn action(&self) -> &str {
        &self.action
    }

    pub fn resource_type(&self) -> Option<&str> {
        self.resource_type.as_deref()
    }

    pub fn resource_name(&self) -> Option<&str> {
        self.resource_name.as_deref()
    }

    pub fn context(&self) -> &[Condition] {
        &self.context
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    /// Canonical text form; `parse_policy` reads it back to an equal policy.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let attrs: Vec<String> = self.subject_attrs.iter().map(ToString::to_string).collect();
        write!(f, "permit subjects with {} may {} on resources", attrs.join(", "), self.action)?;
        if let Some(t) = &self.resource_type {
            write!(f, " of type {t}")?;
        }
        if let Some(n) = &self.resource_name {
            write!(f, " named {}", parser::quote(n))?;
        }
        if !self.context.is_empty() {
            let conds: Vec<String> = self.context.iter().map(ToString::to_string).collect();
            write!(f, " when {}", conds.join(" and "))?;
        }
        write!(f, " in domain {}", self.domain_id)
    }
}

/// Which resources a policy covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSelector {
    pub resource_type: Option<String>,
    pub resource_name: Option<String>,
}

impl fmt::Display for ResourceSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.resource_type, &self.resource_name) {
            (None, None) => f.write_str("all resources"),
            (Some(t), None) => write!(f, "those of type {t}"),
            (None, Some(n)) => write!(f, "those named {}", parser::quote(n)),
            (Some(t), Some(n)) => write!(f, "those of type {t} named {}", parser::quote(n)),
        }
    }
}

/// A policy split into subjects, objects, action, context and domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyComponents {
    pub subjects: BTreeSet<AttrTerm>,
    pub objects: ResourceSelector,
    pub action: String,
    pub context: Vec<Condition>,
    pub domain: String,
}

pub fn decompose_policy(p: &Policy) -> PolicyComponents {
    PolicyComponents {
        subjects: p.subject_attrs.clone(),
        objects: ResourceSelector {
            resource_type: p.resource_type.clone(),
            resource_name: p.resource_name.clone(),
        },
        action: p.action.clone(),
        context: p.context.clone(),
        domain: p.domain_id.clone(),
    }
}

pub fn recompose_policy(c: PolicyComponents) -> Result<Policy, PolicyError> {
    Policy::new(
        c.subjects,
        c.action,
        c.objects.resource_type,
        c.objects.resource_name,
        c.context,
        c.domain,
    )
}

impl fmt::Display for PolicyComponents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subjects: Vec<String> = self.subjects.iter().map(ToString::to_string).collect();
        writeln!(f, "subjects: {}", subjects.join(", "))?;
        writeln!(f, "objects: {}", self.objects)?;
        writeln!(f, "action: {}", self.action)?;
        if self.context.is_empty() {
            writeln!(f, "context: none")?;
        } else {
            let conds: Vec<String> = self.context.iter().map(ToString::to_string).collect();
            writeln!(f, "context: {}", conds.join("; "))?;
        }
        write!(f, "domain: {}", self.domain)
    }
}
