//! Prompt construction for the baseline and UMR chain-of-thought methods.
//!
//! Templates live under `templates/` as plain text and are filled in a
//! single pass, so user text that happens to contain a placeholder name is
//! never substituted a second time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identical for both methods, so the method is the only varying factor.
pub const SYSTEM_INSTRUCTION: &str = "You are an expert assistant for aspect-based sentiment analysis. Be concise and accurate. Follow the requested output format exactly.";

pub const CATEGORIES: &str = "<CATEGORIES>";
pub const REVIEW_TEXT: &str = "<REVIEW_TEXT>";
pub const UMR_EXAMPLES: &str = "<UMR_EXAMPLES>";
pub const NEW_TEXT: &str = "<NEW_TEXT>";
pub const DOMAIN: &str = "<DOMAIN>";

pub const PLACEHOLDERS: [&str; 5] = [CATEGORIES, REVIEW_TEXT, UMR_EXAMPLES, NEW_TEXT, DOMAIN];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub version: &'static str,
    pub text: &'static str,
}

pub const BASELINE_TEMPLATE: Template = Template {
    version: "baseline-v1",
    text: include_str!("../templates/baseline_v1.txt"),
};

pub const UMR_TEMPLATE: Template = Template {
    version: "umr-v1",
    text: include_str!("../templates/umr_v1.txt"),
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Umr,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Baseline, Method::Umr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Umr => "umr",
        }
    }

    pub fn template(self) -> Template {
        match self {
            Method::Baseline => BASELINE_TEMPLATE,
            Method::Umr => UMR_TEMPLATE,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Method::Baseline),
            "umr" => Ok(Method::Umr),
            _ => Err(format!("unknown method `{s}` (expected baseline or umr)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("category inventory is empty")]
    EmptyCategories,
    #[error("UMR exemplars are empty")]
    EmptyExemplars,
    #[error("{0} is empty")]
    EmptyField(&'static str),
    #[error("no value supplied for placeholder {0}")]
    MissingValue(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub method: Method,
    pub exemplar_file_id: Option<String>,
    pub template_version: String,
}

impl Template {
    /// Replaces every placeholder occurrence in one left-to-right pass.
    pub fn fill(&self, values: &[(&'static str, &str)]) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.text.len() + 256);
        let mut rest = self.text;
        while let Some(start) = rest.find('<') {
            out.push_str(&rest[..start]);
            let tail = &rest[start..];
            match PLACEHOLDERS.iter().find(|p| tail.starts_with(**p)) {
                Some(&ph) => {
                    let value = values
                        .iter()
                        .find(|(k, _)| *k == ph)
                        .map(|(_, v)| *v)
                        .ok_or(PromptError::MissingValue(ph))?;
                    out.push_str(value);
                    rest = &tail[ph.len()..];
                }
                None => {
                    out.push('<');
                    rest = &tail[1..];
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }

    pub fn placeholders(&self) -> Vec<&'static str> {
        PLACEHOLDERS
            .iter()
            .copied()
            .filter(|p| self.text.contains(p))
            .collect()
    }
}

/// `'A', 'B', 'C'` in inventory order.
pub fn render_categories<S: AsRef<str>>(categories: &[S]) -> String {
    categories
        .iter()
        .map(|c| format!("'{}'", c.as_ref()))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn system_instruction() -> &'static str {
    SYSTEM_INSTRUCTION
}

pub fn build_baseline_prompt<S: AsRef<str>>(
    categories: &[S],
    review: &str,
) -> Result<PromptBundle, PromptError> {
    if categories.is_empty() {
        return Err(PromptError::EmptyCategories);
    }
    if review.trim().is_empty() {
        return Err(PromptError::EmptyField("review text"));
    }
    let rendered = render_categories(categories);
    let user = BASELINE_TEMPLATE.fill(&[(CATEGORIES, &rendered), (REVIEW_TEXT, review)])?;
    Ok(PromptBundle {
        system: SYSTEM_INSTRUCTION.to_string(),
        user,
        method: Method::Baseline,
        exemplar_file_id: None,
        template_version: BASELINE_TEMPLATE.version.to_string(),
    })
}

/// `exemplars` is the output of [`crate::umr::format_exemplars`].
pub fn build_umr_prompt<S: AsRef<str>>(
    exemplars: &str,
    new_text: &str,
    domain: &str,
    categories: &[S],
) -> Result<PromptBundle, PromptError> {
    if categories.is_empty() {
        return Err(PromptError::EmptyCategories);
    }
    if exemplars.trim().is_empty() {
        return Err(PromptError::EmptyExemplars);
    }
    if new_text.trim().is_empty() {
        return Err(PromptError::EmptyField("new text"));
    }
    if domain.trim().is_empty() {
        return Err(PromptError::EmptyField("domain"));
    }
    let rendered = render_categories(categories);
    let user = UMR_TEMPLATE.fill(&[
        (UMR_EXAMPLES, exemplars),
        (NEW_TEXT, new_text),
        (DOMAIN, domain),
        (CATEGORIES, &rendered),
    ])?;
    Ok(PromptBundle {
        system: SYSTEM_INSTRUCTION.to_string(),
        user,
        method: Method::Umr,
        exemplar_file_id: None,
        template_version: UMR_TEMPLATE.version.to_string(),
    })
}
