//! Prompt templates and per-category augmentations.
//!
//! The default prompts are compiled in from `prompts/`; a prompt directory
//! with the same layout (`base.txt`, `augment/<code>.txt`) can be loaded at
//! run time so prompts can be edited between runs without rebuilding.
//! A single trailing newline is stripped from every prompt file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::category::VulnCategory;
use crate::corpus::TestCase;
use crate::digest::sha256_hex;

pub const PLACEHOLDER: &str = "CODE_GOES_HERE";

const BASE: &str = include_str!("../prompts/base.txt");

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("template has no `{PLACEHOLDER}` placeholder")]
    MissingPlaceholder,
    #[error("template has {0} `{PLACEHOLDER}` placeholders, expected exactly one")]
    RepeatedPlaceholder(usize),
    #[error("augmentation for `{0}` is empty")]
    EmptyAugmentation(VulnCategory),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Template text holding the placeholder exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    body: String,
}

impl PromptTemplate {
    pub fn new(body: impl Into<String>) -> Result<Self, PromptError> {
        let body = body.into();
        match body.matches(PLACEHOLDER).count() {
            0 => Err(PromptError::MissingPlaceholder),
            1 => Ok(PromptTemplate { body }),
            n => Err(PromptError::RepeatedPlaceholder(n)),
        }
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn substitute(&self, source_text: &str) -> String {
        self.body.replacen(PLACEHOLDER, source_text, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmentation {
    pub category: VulnCategory,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptMode {
    /// The base template only.
    Base,
    /// Base template plus the augmentation for the case's labeled category.
    /// This reads the ground truth label; use `AugmentedAll` for runs that
    /// must not see it.
    AugmentedExpectedCategory,
    /// Base template plus every augmentation, in category-code order.
    AugmentedAll,
}

impl PromptMode {
    pub fn label(self) -> &'static str {
        match self {
            PromptMode::Base => "Base",
            PromptMode::AugmentedExpectedCategory => "Augmented",
            PromptMode::AugmentedAll => "Augmented-All",
        }
    }

    pub fn flag(self) -> &'static str {
        match self {
            PromptMode::Base => "base",
            PromptMode::AugmentedExpectedCategory => "augmented",
            PromptMode::AugmentedAll => "augmented-all",
        }
    }
}

impl FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "base" => Ok(PromptMode::Base),
            "augmented" | "augmented-expected" => Ok(PromptMode::AugmentedExpectedCategory),
            "augmented-all" => Ok(PromptMode::AugmentedAll),
            other => Err(format!(
                "unknown prompt mode `{other}` (expected base, augmented or augmented-all)"
            )),
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

/// The base template plus one augmentation per category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLibrary {
    base: PromptTemplate,
    augmentations: BTreeMap<VulnCategory, String>,
}

fn builtin_augmentation(category: VulnCategory) -> &'static str {
    match category {
        VulnCategory::Cmdi => include_str!("../prompts/augment/cmdi.txt"),
        VulnCategory::Crypto => include_str!("../prompts/augment/crypto.txt"),
        VulnCategory::Hash => include_str!("../prompts/augment/hash.txt"),
        VulnCategory::Ldapi => include_str!("../prompts/augment/ldapi.txt"),
        VulnCategory::Pathtraver => include_str!("../prompts/augment/pathtraver.txt"),
        VulnCategory::Securecookie => include_str!("../prompts/augment/securecookie.txt"),
        VulnCategory::Sqli => include_str!("../prompts/augment/sqli.txt"),
        VulnCategory::Trustbound => include_str!("../prompts/augment/trustbound.txt"),
        VulnCategory::Weakrand => include_str!("../prompts/augment/weakrand.txt"),
        VulnCategory::Xpathi => include_str!("../prompts/augment/xpathi.txt"),
        VulnCategory::Xss => include_str!("../prompts/augment/xss.txt"),
    }
}

fn strip_final_newline(text: &str) -> &str {
    text.strip_suffix("\r\n")
        .or_else(|| text.strip_suffix('\n'))
        .unwrap_or(text)
}

/// The stock base template.
pub fn base_prompt() -> PromptTemplate {
    PromptTemplate::new(strip_final_newline(BASE)).expect("bundled base prompt has a placeholder")
}

/// The stock augmentation for `category`.
pub fn augmentation_for(category: VulnCategory) -> Augmentation {
    Augmentation {
        category,
        text: strip_final_newline(builtin_augmentation(category)).to_string(),
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        PromptLibrary::builtin()
    }
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        PromptLibrary {
            base: base_prompt(),
            augmentations: VulnCategory::ALL
                .into_iter()
                .map(|c| (c, augmentation_for(c).text))
                .collect(),
        }
    }

    pub fn new(
        base: PromptTemplate,
        augmentations: BTreeMap<VulnCategory, String>,
    ) -> Result<Self, PromptError> {
        for category in VulnCategory::ALL {
            match augmentations.get(&category) {
                Some(text) if !text.trim().is_empty() => {}
                _ => return Err(PromptError::EmptyAugmentation(category)),
            }
        }
        Ok(PromptLibrary {
            base,
            augmentations,
        })
    }

    /// Loads `base.txt` and `augment/<code>.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |path: &Path| {
            fs::read_to_string(path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        let base = PromptTemplate::new(strip_final_newline(&read(&dir.join("base.txt"))?))?;
        let mut augmentations = BTreeMap::new();
        for category in VulnCategory::ALL {
            let path = dir.join("augment").join(format!("{}.txt", category.code()));
            augmentations.insert(category, strip_final_newline(&read(&path)?).to_string());
        }
        PromptLibrary::new(base, augmentations)
    }

    pub fn base(&self) -> &PromptTemplate {
        &self.base
    }

    pub fn augmentation(&self, category: VulnCategory) -> Augmentation {
        Augmentation {
            category,
            text: self.augmentations[&category].clone(),
        }
    }

    /// SHA-256 of every prompt text, keyed `base` and by category code.
    pub fn digests(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        out.insert("base".to_string(), sha256_hex(self.base.body.as_bytes()));
        for (category, text) in &self.augmentations {
            out.insert(category.code().to_string(), sha256_hex(text.as_bytes()));
        }
        out
    }

    pub fn assemble(&self, case: &TestCase, mode: PromptMode) -> String {
        assemble(&self.base, &self.augmentations, case, mode)
    }
}

/// Builds the full prompt text for one case.
///
/// The source text replaces the placeholder once. Augmentations are
/// appended after the whole base text, each preceded by a single `\n`.
pub fn assemble(
    template: &PromptTemplate,
    augmentations: &BTreeMap<VulnCategory, String>,
    case: &TestCase,
    mode: PromptMode,
) -> String {
    let mut prompt = template.substitute(&case.source_text);
    let mut append = |category: VulnCategory| {
        if let Some(text) = augmentations.get(&category) {
            prompt.push('\n');
            prompt.push_str(text);
        }
    };
    match mode {
        PromptMode::Base => {}
        PromptMode::AugmentedExpectedCategory => append(case.truth.category),
        PromptMode::AugmentedAll => VulnCategory::ALL.into_iter().for_each(append),
    }
    prompt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GroundTruth;

    fn case(category: VulnCategory, source: &str) -> TestCase {
        TestCase {
            id: "T".into(),
            source_text: source.into(),
            truth: GroundTruth {
                category,
                is_vulnerable: true,
                cwe: None,
            },
        }
    }

    #[test]
    fn base_prompt_text() {
        let body = base_prompt().body().to_string();
        assert!(body.starts_with("You are a security code analysis tool."));
        assert!(body.contains("Eg: weakhash,51,MD5 hash function is used for hashing."));
        assert_eq!(body.matches(PLACEHOLDER).count(), 1);
        assert!(!body.ends_with('\n'));
    }

    #[test]
    fn augmentation_texts() {
        assert!(augmentation_for(VulnCategory::Hash)
            .text
            .starts_with("Only SHA1 and MD5 are considered weak hashing algorithms."));
        assert!(augmentation_for(VulnCategory::Weakrand)
            .text
            .contains("java.util.Random means a weak cryptography vulnerability is present"));
        for c in VulnCategory::ALL {
            assert!(!augmentation_for(c).text.is_empty());
        }
    }

    #[test]
    fn template_requires_single_placeholder() {
        assert!(matches!(PromptTemplate::new("no slot"), Err(PromptError::MissingPlaceholder)));
        assert!(matches!(
            PromptTemplate::new("CODE_GOES_HERE CODE_GOES_HERE"),
            Err(PromptError::RepeatedPlaceholder(2))
        ));
    }

    #[test]
    fn base_mode_has_no_augmentation() {
        let lib = PromptLibrary::builtin();
        let out = lib.assemble(&case(VulnCategory::Sqli, "int x = 1;"), PromptMode::Base);
        assert_eq!(out, lib.base().substitute("int x = 1;"));
        assert_eq!(out.matches("int x = 1;").count(), 1);
        for c in VulnCategory::ALL {
            assert!(!out.contains(&lib.augmentation(c).text));
        }
    }

    #[test]
    fn expected_category_mode_appends_one_line() {
        let lib = PromptLibrary::builtin();
        let c = case(VulnCategory::Sqli, "query();");
        let base = lib.assemble(&c, PromptMode::Base);
        let aug = lib.assemble(&c, PromptMode::AugmentedExpectedCategory);
        assert!(aug.ends_with("can be safe from SQL Injection."));
        let text = lib.augmentation(VulnCategory::Sqli).text;
        assert_eq!(aug.len(), base.len() + 1 + text.len());
        assert_eq!(aug, format!("{base}\n{text}"));
    }

    #[test]
    fn all_mode_appends_in_code_order() {
        let lib = PromptLibrary::builtin();
        let c = case(VulnCategory::Xss, "x");
        let out = lib.assemble(&c, PromptMode::AugmentedAll);
        let mut expected = lib.assemble(&c, PromptMode::Base);
        for cat in VulnCategory::ALL {
            expected.push('\n');
            expected.push_str(&lib.augmentation(cat).text);
        }
        assert_eq!(out, expected);
    }

    #[test]
    fn load_dir_matches_builtin() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts");
        let lib = PromptLibrary::load_dir(&dir).unwrap();
        assert_eq!(lib, PromptLibrary::builtin());
        assert_eq!(lib.digests().len(), 12);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("augmented".parse::<PromptMode>().unwrap(), PromptMode::AugmentedExpectedCategory);
        assert_eq!("augmented-all".parse::<PromptMode>().unwrap(), PromptMode::AugmentedAll);
        assert!("fancy".parse::<PromptMode>().is_err());
    }
}
