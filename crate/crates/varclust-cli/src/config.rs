//! JSON config file mirroring the command-line flags, plus candidate
//! range parsing. Precedence is flags > config file > built-in defaults.

use serde::Deserialize;
use varclust::error::{Error, Result};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub algo: Option<String>,
    pub k: Option<usize>,
    pub p: Option<usize>,
    pub orders: Option<Vec<usize>>,
    pub p_max: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub init: Option<String>,
    pub unnormalized: Option<bool>,
    pub gamma: Option<f64>,
    pub method: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidArgument(format!("config file: {e}")))
            }
        }
    }
}

/// Parses `a:i:b` (inclusive range with increment), a comma list, or a
/// single value.
pub fn parse_candidates(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "range `{text}` must be a:i:b"
            )));
        }
        let a: usize = parse_num(parts[0])?;
        let step: usize = parse_num(parts[1])?;
        let b: usize = parse_num(parts[2])?;
        if step == 0 {
            return Err(Error::InvalidArgument("range increment must be positive".into()));
        }
        if b < a {
            return Err(Error::InvalidArgument(format!(
                "range `{text}` is empty (b < a)"
            )));
        }
        Ok((a..=b).step_by(step).collect())
    } else if text.contains(',') {
        text.split(',').map(parse_num).collect()
    } else {
        Ok(vec![parse_num(text)?])
    }
}

fn parse_num(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{s}` is not a positive integer")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_forms() {
        assert_eq!(parse_candidates("2:2:20").unwrap(), vec![2, 4, 6, 8, 10, 12, 14, 16, 18, 20]);
        assert_eq!(parse_candidates("2:1:8").unwrap(), vec![2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(parse_candidates("4").unwrap(), vec![4]);
        assert_eq!(parse_candidates("1,3,9").unwrap(), vec![1, 3, 9]);
        assert!(parse_candidates("5:0:9").is_err());
        assert!(parse_candidates("9:1:5").is_err());
        assert!(parse_candidates("a:1:5").is_err());
    }
}
