//! Deny-by-default, first-match-wins evaluation.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::{Condition, Day, Policy, PolicyError};
use crate::model::{is_token, Attribute};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub action: String,
    pub resource_type: String,
    pub resource_name: String,
    pub domain_id: String,
    pub at: DateTime<Utc>,
}

impl AccessRequest {
    pub fn new(
        action: impl Into<String>,
        resource_type: impl Into<String>,
        resource_name: impl Into<String>,
        domain_id: impl Into<String>,
        at: DateTime<Utc>,
    ) -> Result<Self, PolicyError> {
        let req = AccessRequest {
            action: action.into(),
            resource_type: resource_type.into(),
            resource_name: resource_name.into(),
            domain_id: domain_id.into(),
            at,
        };
        for t in [&req.action, &req.resource_type, &req.domain_id] {
            if !is_token(t) {
                return Err(PolicyError::InvalidToken(t.clone()));
            }
        }
        Ok(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Permit,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    NoPolicyForDomain,
    AttributeMissing(String),
    OutsideTimeWindow,
    DayNotAllowed,
    ActionMismatch,
    ResourceMismatch,
    /// A presented credential failed verification (set by the gate).
    PresentationInvalid,
    Permitted,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::AttributeMissing(name) => write!(f, "AttributeMissing({name})"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    /// Index of the permitting policy in the evaluated list.
    pub matched_policy: Option<usize>,
    /// On Deny, index of the policy the reasons describe.
    pub nearest_miss: Option<usize>,
    /// Ends with [`Reason::Permitted`] exactly when the outcome is Permit.
    pub reasons: Vec<Reason>,
}

impl Decision {
    pub fn is_permit(&self) -> bool {
        self.outcome == Outcome::Permit
    }

    pub(crate) fn deny(reasons: Vec<Reason>, nearest_miss: Option<usize>) -> Self {
        Decision {
            outcome: Outcome::Deny,
            matched_policy: None,
            nearest_miss,
            reasons,
        }
    }
}

/// Every check of `policy` that `req` fails, in a fixed order: action,
/// resource, subject attributes, then context conditions as listed.
fn failed_checks(policy: &Policy, attrs: &BTreeSet<Attribute>, req: &AccessRequest) -> Vec<Reason> {
    let mut reasons = Vec::new();
    if policy.action() != req.action {
        reasons.push(Reason::ActionMismatch);
    }
    let type_ok = policy.resource_type().is_none_or(|t| t == req.resource_type);
    let name_ok = policy.resource_name().is_none_or(|n| n == req.resource_name);
    if !(type_ok && name_ok) {
        reasons.push(Reason::ResourceMismatch);
    }
    for term in policy.subject_attrs() {
        let held = attrs
            .iter()
            .any(|a| a.name() == term.name && term.value.as_deref().is_none_or(|v| v == a.value()));
        if !held {
            reasons.push(Reason::AttributeMissing(term.name.clone()));
        }
    }
    for cond in policy.context() {
        match cond {
            Condition::TimeWindow { start, end } => {
                let minute = (req.at.hour() * 60 + req.at.minute()) as u16;
                if !(*start <= minute && minute < *end) {
                    reasons.push(Reason::OutsideTimeWindow);
                }
            }
            Condition::DaySet(days) => {
                if !days.contains(&Day::from(req.at.weekday())) {
                    reasons.push(Reason::DayNotAllowed);
                }
            }
        }
    }
    reasons
}

/// Decides `req` against `policies`, considering only policies of the
/// request's domain. The first policy whose checks all pass permits. On Deny
/// the reasons are those of the domain policy failing the fewest checks,
/// earliest first on ties.
pub fn evaluate(policies: &[Policy], attrs: &BTreeSet<Attribute>, req: &AccessRequest) -> Decision {
    let mut nearest: Option<(usize, Vec<Reason>)> = None;
    for (i, policy) in policies.iter().enumerate() {
        if policy.domain_id() != req.domain_id {
            continue;
        }
        let failed = failed_checks(policy, attrs, req);
        if failed.is_empty() {
            return Decision {
                outcome: Outcome::Permit,
                matched_policy: Some(i),
                nearest_miss: None,
                reasons: vec![Reason::Permitted],
            };
        }
        if nearest.as_ref().is_none_or(|(_, best)| failed.len() < best.len()) {
            nearest = Some((i, failed));
        }
    }
    match nearest {
        Some((i, reasons)) => Decision::deny(reasons, Some(i)),
        None => Decision::deny(vec![Reason::NoPolicyForDomain], None),
    }
}
