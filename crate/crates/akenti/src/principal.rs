//! Distinguished names and the (subject DN, issuing-CA DN) principal pair
//! that identifies every user and authority.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Component keys allowed in a distinguished name.
pub const DN_KEYS: [&str; 8] = ["O", "OU", "CN", "DC", "C", "L", "ST", "EMAIL"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DnError {
    #[error("distinguished name is empty")]
    Empty,
    #[error("distinguished name must begin with '/': {0:?}")]
    MissingLeadingSlash(String),
    #[error("bad DN component {component:?} in {dn:?}")]
    BadComponent { dn: String, component: String },
}

/// A slash-separated distinguished name such as
/// `/O=doesciencegrid.org/OU=People/CN=Mary R. Thompson`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Dn(String);

impl Dn {
    pub fn parse(text: &str) -> Result<Self, DnError> {
        if text.is_empty() {
            return Err(DnError::Empty);
        }
        let Some(rest) = text.strip_prefix('/') else {
            return Err(DnError::MissingLeadingSlash(text.to_string()));
        };
        if rest.is_empty() {
            return Err(DnError::Empty);
        }
        for component in rest.split('/') {
            let ok = component
                .split_once('=')
                .is_some_and(|(k, v)| DN_KEYS.contains(&k) && !v.is_empty());
            if !ok {
                return Err(DnError::BadComponent {
                    dn: text.to_string(),
                    component: component.to_string(),
                });
            }
        }
        Ok(Dn(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// (key, value) pairs in order of appearance. Keys may repeat.
    pub fn components(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0[1..].split('/').map(|c| c.split_once('=').unwrap())
    }

    /// Map from component key to every value it carries, plus the whole
    /// name under the reserved key `DN`.
    pub fn component_map(&self) -> BTreeMap<String, Vec<String>> {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (k, v) in self.components() {
            map.entry(k.to_string()).or_default().push(v.to_string());
        }
        map.insert("DN".to_string(), vec![self.0.clone()]);
        map
    }
}

impl fmt::Display for Dn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Dn {
    type Error = DnError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Dn::parse(&value)
    }
}

impl From<Dn> for String {
    fn from(dn: Dn) -> String {
        dn.0
    }
}

/// A user or authority: subject DN plus the DN of the CA that certified it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Principal {
    pub user_dn: Dn,
    pub ca_dn: Dn,
}

impl Principal {
    pub fn new(user_dn: Dn, ca_dn: Dn) -> Self {
        Principal { user_dn, ca_dn }
    }

    pub fn parse(user_dn: &str, ca_dn: &str) -> Result<Self, DnError> {
        Ok(Principal {
            user_dn: Dn::parse(user_dn)?,
            ca_dn: Dn::parse(ca_dn)?,
        })
    }
}

impl fmt::Display for Principal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (CA {})", self.user_dn, self.ca_dn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_figure_names() {
        let dn = Dn::parse("/O=doesciencegrid.org/OU=People/CN=Mary R. Thompson").unwrap();
        let map = dn.component_map();
        assert_eq!(map["CN"], vec!["Mary R. Thompson"]);
        assert_eq!(map["DN"], vec![dn.as_str()]);

        let ca = Dn::parse("/DC=net/DC=es/OU=Certificate Authorities/OU=DOE Science Grid/CN=pk1")
            .unwrap();
        assert_eq!(ca.component_map()["DC"], vec!["net", "es"]);
        assert_eq!(ca.component_map()["OU"].len(), 2);
    }

    #[test]
    fn rejects_bad_names() {
        assert!(Dn::parse("").is_err());
        assert!(Dn::parse("O=x").is_err());
        assert!(Dn::parse("/").is_err());
        assert!(Dn::parse("/X=unknownkey").is_err());
        assert!(Dn::parse("/O=").is_err());
        assert!(Dn::parse("/O=a/noequals").is_err());
    }
}
