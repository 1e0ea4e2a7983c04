//! Site mapping files: the grid-mapfile that admits DNs to local
//! accounts, and the executable-to-resource table.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::resource::ResourcePath;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapfileError {
    #[error("grid-mapfile line {line}: {detail}")]
    GridMap { line: usize, detail: String },
    #[error("mapping file line {line}: {detail}")]
    ExecMap { line: usize, detail: String },
}

/// `"<DN>" <localuser>` per line, `#` comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GridMap {
    entries: Vec<(String, String)>,
}

impl GridMap {
    pub fn parse(text: &str) -> Result<Self, MapfileError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: &str| MapfileError::GridMap {
                line: i + 1,
                detail: detail.to_string(),
            };
            let rest = line
                .strip_prefix('"')
                .ok_or_else(|| err("expected quoted DN"))?;
            let (dn, after) = rest.split_once('"').ok_or_else(|| err("unterminated DN quote"))?;
            let user = after.trim();
            if dn.is_empty() || user.is_empty() || user.contains(char::is_whitespace) {
                return Err(err("expected \"<DN>\" <localuser>"));
            }
            entries.push((dn.to_string(), user.to_string()));
        }
        Ok(GridMap { entries })
    }

    pub fn lookup(&self, dn: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(entry_dn, _)| entry_dn == dn)
            .map(|(_, user)| user.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Two whitespace-separated columns per line: executable path (or the
/// `jobclass` keyword) and the resource it maps to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecMap {
    map: BTreeMap<String, ResourcePath>,
    jobclass_root: Option<ResourcePath>,
}

impl ExecMap {
    pub fn parse(text: &str) -> Result<Self, MapfileError> {
        let mut map = BTreeMap::new();
        let mut jobclass_root = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| MapfileError::ExecMap {
                line: i + 1,
                detail,
            };
            let columns: Vec<&str> = line.split_whitespace().collect();
            let [first, second] = columns.as_slice() else {
                return Err(err(format!("expected two columns, got {}", columns.len())));
            };
            let resource = ResourcePath::parse(second).map_err(|e| err(e.to_string()))?;
            if *first == "jobclass" {
                if jobclass_root.replace(resource).is_some() {
                    return Err(err("duplicate jobclass row".to_string()));
                }
            } else if map.insert(first.to_string(), resource).is_some() {
                return Err(err(format!("duplicate executable {first:?}")));
            }
        }
        Ok(ExecMap { map, jobclass_root })
    }

    /// Exact-match lookup; no mapping means the start is denied.
    pub fn lookup(&self, executable: &str) -> Option<&ResourcePath> {
        self.map.get(executable)
    }

    pub fn jobclass_root(&self) -> Option<&ResourcePath> {
        self.jobclass_root.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SITE_MAPPING: &str = "\
/bin/date TRANSP/test
/bin/sleep TRANSP/test
/p/fusiongrid/trpstart TRANSP/production
/p/fusiongrid/trspkill TRANSP/production
/p/fusiongrid/new/trpstart TRANSP/development
jobclass TRANSP/jobs
";

    #[test]
    fn exec_map_lookups() {
        let map = ExecMap::parse(SITE_MAPPING).unwrap();
        assert_eq!(map.lookup("/bin/date").unwrap().as_str(), "TRANSP/test");
        assert_eq!(
            map.lookup("/p/fusiongrid/trpstart").unwrap().as_str(),
            "TRANSP/production"
        );
        assert_eq!(map.lookup("/bin/ls"), None);
        assert_eq!(map.jobclass_root().unwrap().as_str(), "TRANSP/jobs");
    }

    #[test]
    fn exec_map_rejects_bad_rows() {
        assert!(ExecMap::parse("/bin/date").is_err());
        assert!(ExecMap::parse("/bin/date TRANSP extra").is_err());
        assert!(ExecMap::parse("/bin/date TRANSP\n/bin/date TRANSP").is_err());
        assert!(ExecMap::parse("jobclass a\njobclass b").is_err());
    }

    #[test]
    fn grid_map_lookup() {
        let text = "# site accounts\n\"/O=doesciencegrid.org/OU=People/CN=Mary R. Thompson\" mrt\n";
        let map = GridMap::parse(text).unwrap();
        assert_eq!(
            map.lookup("/O=doesciencegrid.org/OU=People/CN=Mary R. Thompson"),
            Some("mrt")
        );
        assert_eq!(map.lookup("/O=elsewhere.org/CN=Nobody"), None);
    }

    #[test]
    fn grid_map_rejects_bad_lines() {
        assert!(GridMap::parse("/O=x/CN=y user").is_err());
        assert!(GridMap::parse("\"/O=x/CN=y\"").is_err());
        assert!(GridMap::parse("\"/O=x/CN=y\" two users").is_err());
        assert!(GridMap::parse("\"/O=x/CN=y").is_err());
    }
}
