use serde::{Deserialize, Serialize};

use super::{RunStatus, VerificationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Pending,
    CompileFail,
    AllPass,
    Buggy,
    /// The run timed out; outcomes are partial and the variant is dropped.
    Unusable,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Pending => "pending",
            Classification::CompileFail => "compile_fail",
            Classification::AllPass => "all_pass",
            Classification::Buggy => "buggy",
            Classification::Unusable => "unusable",
        }
    }
}

pub fn classify_variant(result: &VerificationResult, syntax_ok: bool) -> Classification {
    if !syntax_ok || result.status == RunStatus::CollectionError {
        return Classification::CompileFail;
    }
    if result.status == RunStatus::TimedOut {
        return Classification::Unusable;
    }
    if result.failing.is_empty() {
        Classification::AllPass
    } else {
        Classification::Buggy
    }
}
