//! Hierarchical resource names such as `TRANSP` or `TRANSP/production`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("bad resource path {0:?}")]
pub struct ResourcePathError(pub String);

/// Slash-separated resource path. Segments are non-empty and carry no
/// leading or trailing slash.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ResourcePath(String);

impl ResourcePath {
    pub fn parse(text: &str) -> Result<Self, ResourcePathError> {
        if text.is_empty()
            || text.starts_with('/')
            || text.ends_with('/')
            || text.split('/').any(|s| s.is_empty() || s.chars().any(char::is_whitespace))
        {
            return Err(ResourcePathError(text.to_string()));
        }
        Ok(ResourcePath(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split('/')
    }

    pub fn root_segment(&self) -> &str {
        self.0.split('/').next().unwrap()
    }

    /// The chain of paths from the root segment down to this path.
    pub fn ancestry(&self) -> Vec<ResourcePath> {
        let mut out = Vec::new();
        let mut acc = String::new();
        for seg in self.segments() {
            if !acc.is_empty() {
                acc.push('/');
            }
            acc.push_str(seg);
            out.push(ResourcePath(acc.clone()));
        }
        out
    }

    pub fn is_proper_ancestor_of(&self, other: &ResourcePath) -> bool {
        other.0.len() > self.0.len()
            && other.0.starts_with(&self.0)
            && other.0.as_bytes()[self.0.len()] == b'/'
    }

    pub fn child(&self, segment: &str) -> Result<ResourcePath, ResourcePathError> {
        ResourcePath::parse(&format!("{}/{}", self.0, segment))
    }
}

impl fmt::Display for ResourcePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ResourcePath {
    type Error = ResourcePathError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        ResourcePath::parse(&value)
    }
}

impl From<ResourcePath> for String {
    fn from(p: ResourcePath) -> String {
        p.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ancestry_and_subtree() {
        let p = ResourcePath::parse("TRANSP/production").unwrap();
        let chain: Vec<String> = p.ancestry().iter().map(|r| r.to_string()).collect();
        assert_eq!(chain, vec!["TRANSP", "TRANSP/production"]);

        let root = ResourcePath::parse("TRANSP").unwrap();
        assert!(root.is_proper_ancestor_of(&p));
        assert!(!p.is_proper_ancestor_of(&root));
        assert!(!p.is_proper_ancestor_of(&p));
        let other = ResourcePath::parse("TRANSPX/production").unwrap();
        assert!(!root.is_proper_ancestor_of(&other));
    }

    #[test]
    fn rejects_malformed() {
        for s in ["", "/x", "x/", "a//b", "a b", "a/ b"] {
            assert!(ResourcePath::parse(s).is_err(), "accepted {s:?}");
        }
    }
}
