//! Resource Specification Language requests: `&(name=value)(name=value)`
//! attribute lists describing a job.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RslError {
    #[error("rsl syntax error at byte {pos}: {detail}")]
    Syntax { pos: usize, detail: String },
    #[error("duplicate rsl attribute {0:?}")]
    DuplicateAttribute(String),
    #[error("rsl attribute {name:?} must be numeric, got {value:?}")]
    NotNumeric { name: String, value: String },
    #[error("start request carries no executable")]
    MissingExecutable,
}

/// Parsed request. Attribute names are case-insensitive and stored
/// lowercase; unrecognized names are preserved.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RslRequest {
    attributes: BTreeMap<String, String>,
}

impl RslRequest {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.attributes.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    pub fn set(&mut self, name: &str, value: &str) {
        self.attributes
            .insert(name.to_ascii_lowercase(), value.to_string());
    }

    pub fn executable(&self) -> Option<&str> {
        self.get("executable").filter(|v| !v.is_empty())
    }

    pub fn jobtag(&self) -> Option<&str> {
        self.get("jobtag")
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.attributes.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Renders back to the `&(name=value)` concrete syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::from("&");
        for (name, value) in &self.attributes {
            let quoted = if value.is_empty()
                || value.contains(')')
                || value.contains('(')
                || value.contains(char::is_whitespace)
            {
                format!("\"{value}\"")
            } else {
                value.clone()
            };
            out.push_str(&format!("({name}={quoted})"));
        }
        out
    }
}

/// Parses `&(name=value)(name=value)...`. Values may be double-quoted;
/// duplicate names are an error; `count` and `maxMemory` must be numeric.
pub fn parse_rsl(text: &str) -> Result<RslRequest, RslError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let syntax = |pos: usize, detail: &str| RslError::Syntax {
        pos,
        detail: detail.to_string(),
    };
    let skip_ws = |pos: &mut usize| {
        while bytes.get(*pos).is_some_and(|b| b.is_ascii_whitespace()) {
            *pos += 1;
        }
    };
    skip_ws(&mut pos);
    if bytes.get(pos) != Some(&b'&') {
        return Err(syntax(pos, "expected '&'"));
    }
    pos += 1;
    let mut request = RslRequest::default();
    loop {
        skip_ws(&mut pos);
        if pos >= bytes.len() {
            break;
        }
        if bytes[pos] != b'(' {
            return Err(syntax(pos, "expected '('"));
        }
        pos += 1;
        skip_ws(&mut pos);
        let name_start = pos;
        while bytes
            .get(pos)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            pos += 1;
        }
        if pos == name_start {
            return Err(syntax(pos, "expected attribute name"));
        }
        let name = std::str::from_utf8(&bytes[name_start..pos])
            .unwrap()
            .to_ascii_lowercase();
        skip_ws(&mut pos);
        if bytes.get(pos) != Some(&b'=') {
            return Err(syntax(pos, "expected '='"));
        }
        pos += 1;
        skip_ws(&mut pos);
        let value = if bytes.get(pos) == Some(&b'"') {
            pos += 1;
            let start = pos;
            while bytes.get(pos).is_some_and(|b| *b != b'"') {
                pos += 1;
            }
            if pos >= bytes.len() {
                return Err(syntax(pos, "unterminated quoted value"));
            }
            let v = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
            pos += 1;
            skip_ws(&mut pos);
            v
        } else {
            let start = pos;
            while bytes.get(pos).is_some_and(|b| *b != b')') {
                pos += 1;
            }
            String::from_utf8_lossy(&bytes[start..pos]).trim().to_string()
        };
        if bytes.get(pos) != Some(&b')') {
            return Err(syntax(pos, "expected ')'"));
        }
        pos += 1;
        if request.attributes.contains_key(&name) {
            return Err(RslError::DuplicateAttribute(name));
        }
        request.attributes.insert(name, value);
    }
    for numeric in ["count", "maxmemory"] {
        if let Some(value) = request.attributes.get(numeric) {
            if value.parse::<u64>().is_err() {
                return Err(RslError::NotNumeric {
                    name: numeric.to_string(),
                    value: value.clone(),
                });
            }
        }
    }
    Ok(request)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_request() {
        let rsl = parse_rsl("&(executable=/bin/date)(jobtag=testing)").unwrap();
        assert_eq!(rsl.get("executable"), Some("/bin/date"));
        assert_eq!(rsl.jobtag(), Some("testing"));
    }

    #[test]
    fn numeric_count() {
        let rsl = parse_rsl("&(executable=/p/fusiongrid/trpstart)(count=4)").unwrap();
        assert_eq!(rsl.executable(), Some("/p/fusiongrid/trpstart"));
        assert_eq!(rsl.get("count"), Some("4"));
        assert!(matches!(
            parse_rsl("&(executable=/bin/date)(count=four)"),
            Err(RslError::NotNumeric { .. })
        ));
    }

    #[test]
    fn duplicate_rejected() {
        assert_eq!(
            parse_rsl("&(executable=a)(executable=b)").unwrap_err(),
            RslError::DuplicateAttribute("executable".to_string())
        );
    }

    #[test]
    fn names_case_insensitive() {
        let rsl = parse_rsl("&(Executable=/bin/date)(MAXMEMORY=512)").unwrap();
        assert_eq!(rsl.executable(), Some("/bin/date"));
        assert_eq!(rsl.get("maxMemory"), Some("512"));
        assert!(matches!(
            parse_rsl("&(executable=a)(EXECUTABLE=b)"),
            Err(RslError::DuplicateAttribute(_))
        ));
    }

    #[test]
    fn quoted_values_and_whitespace() {
        let rsl = parse_rsl("& (executable = \"/bin/my app\") (queue=fast)").unwrap();
        assert_eq!(rsl.executable(), Some("/bin/my app"));
        assert_eq!(rsl.get("queue"), Some("fast"));
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "(a=b)", "&(a=b", "&a=b)", "&(=b)", "&(a b)", "&(a=\"x)"] {
            assert!(parse_rsl(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn round_trips_through_text() {
        let rsl = parse_rsl("&(executable=/bin/date)(jobtag=testing)(arguments=\"-u now\")").unwrap();
        let again = parse_rsl(&rsl.to_text()).unwrap();
        assert_eq!(rsl, again);
    }
}
