//! The closed vulnerability taxonomy used by the benchmark.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the eleven benchmark vulnerability categories.
///
/// Variants are declared in category-code order, which is also the order
/// used for reports and for appending every augmentation at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VulnCategory {
    Cmdi,
    Crypto,
    Hash,
    Ldapi,
    Pathtraver,
    Securecookie,
    Sqli,
    Trustbound,
    Weakrand,
    Xpathi,
    Xss,
}

/// The two kinds of analyzer mistakes used to group triage output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorClass {
    /// Verdict hinges on tracking data or control flow into a sink.
    CodeFlow,
    /// Verdict hinges on whether the algorithm in use is actually weak.
    WeakAlgorithm,
}

impl VulnCategory {
    pub const ALL: [VulnCategory; 11] = [
        VulnCategory::Cmdi,
        VulnCategory::Crypto,
        VulnCategory::Hash,
        VulnCategory::Ldapi,
        VulnCategory::Pathtraver,
        VulnCategory::Securecookie,
        VulnCategory::Sqli,
        VulnCategory::Trustbound,
        VulnCategory::Weakrand,
        VulnCategory::Xpathi,
        VulnCategory::Xss,
    ];

    pub fn code(self) -> &'static str {
        match self {
            VulnCategory::Cmdi => "cmdi",
            VulnCategory::Crypto => "crypto",
            VulnCategory::Hash => "hash",
            VulnCategory::Ldapi => "ldapi",
            VulnCategory::Pathtraver => "pathtraver",
            VulnCategory::Securecookie => "securecookie",
            VulnCategory::Sqli => "sqli",
            VulnCategory::Trustbound => "trustbound",
            VulnCategory::Weakrand => "weakrand",
            VulnCategory::Xpathi => "xpathi",
            VulnCategory::Xss => "xss",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            VulnCategory::Cmdi => "Command Injection",
            VulnCategory::Crypto => "Weak Cryptography",
            VulnCategory::Hash => "Weak Hashing",
            VulnCategory::Ldapi => "LDAP Injection",
            VulnCategory::Pathtraver => "Path Traversal",
            VulnCategory::Securecookie => "Secure Cookie Flag",
            VulnCategory::Sqli => "SQL Injection",
            VulnCategory::Trustbound => "Trust Boundary Violation",
            VulnCategory::Weakrand => "Weak Randomness",
            VulnCategory::Xpathi => "XPATH Injection",
            VulnCategory::Xss => "Cross-Site Scripting",
        }
    }

    /// CWE number the benchmark associates with the category.
    pub fn cwe(self) -> u32 {
        match self {
            VulnCategory::Cmdi => 78,
            VulnCategory::Crypto => 327,
            VulnCategory::Hash => 328,
            VulnCategory::Ldapi => 90,
            VulnCategory::Pathtraver => 22,
            VulnCategory::Securecookie => 614,
            VulnCategory::Sqli => 89,
            VulnCategory::Trustbound => 501,
            VulnCategory::Weakrand => 330,
            VulnCategory::Xpathi => 643,
            VulnCategory::Xss => 79,
        }
    }

    pub fn error_class(self) -> ErrorClass {
        error_class_of(self)
    }

    /// Position in [`VulnCategory::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: &str) -> Option<VulnCategory> {
        VulnCategory::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(code.trim()))
    }
}

/// Weak-algorithm categories are the three whose verdict depends on the
/// strength of a primitive; everything else is a flow question.
pub fn error_class_of(category: VulnCategory) -> ErrorClass {
    match category {
        VulnCategory::Crypto | VulnCategory::Hash | VulnCategory::Weakrand => {
            ErrorClass::WeakAlgorithm
        }
        _ => ErrorClass::CodeFlow,
    }
}

impl fmt::Display for VulnCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown category code `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for VulnCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VulnCategory::from_code(s).ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

impl ErrorClass {
    pub fn label(self) -> &'static str {
        match self {
            ErrorClass::CodeFlow => "Code Flow",
            ErrorClass::WeakAlgorithm => "Use of Weak Algorithms",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
