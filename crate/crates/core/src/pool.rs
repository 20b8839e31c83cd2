//! Finite candidate pools and their CSV representation.
//!
//! CSV schema: a header `id,x1,..,xd[,y1,..,ym]` followed by one row per
//! candidate. Without `y` columns the pool has no ground truth and cannot be
//! used for benchmarking.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    ids: Vec<String>,
    features: Vec<Vec<f64>>,
    outcomes: Option<Vec<Vec<f64>>>,
    noise_std: f64,
}

impl Pool {
    pub fn new(
        ids: Vec<String>,
        features: Vec<Vec<f64>>,
        outcomes: Option<Vec<Vec<f64>>>,
        noise_std: f64,
    ) -> Result<Self> {
        if ids.len() != features.len() {
            return Err(Error::Schema(format!(
                "{} ids for {} feature rows",
                ids.len(),
                features.len()
            )));
        }
        if let Some(y) = &outcomes {
            if y.len() != features.len() {
                return Err(Error::Schema(format!(
                    "{} outcome rows for {} feature rows",
                    y.len(),
                    features.len()
                )));
            }
        }
        Ok(Self {
            ids,
            features,
            outcomes,
            noise_std,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Number of objectives, when ground truth is present.
    pub fn objectives(&self) -> Option<usize> {
        self.outcomes.as_ref().and_then(|y| y.first()).map(Vec::len)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn outcomes(&self) -> Option<&[Vec<f64>]> {
        self.outcomes.as_deref()
    }

    /// True when the pool carries no ground truth and needs an external oracle.
    pub fn is_live_oracle(&self) -> bool {
        self.outcomes.is_none()
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn latent(&self, index: usize) -> Result<&[f64]> {
        self.outcomes
            .as_ref()
            .map(|y| y[index].as_slice())
            .ok_or(Error::MissingOutcomes)
    }

    /// Latent outcome plus fresh Gaussian noise.
    pub fn observe<R: Rng>(&self, index: usize, rng: &mut R) -> Result<Vec<f64>> {
        let latent = self.latent(index)?;
        Ok(latent
            .iter()
            .map(|v| v + self.noise_std * rng.sample::<f64, _>(StandardNormal))
            .collect())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        Self::from_reader(reader)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        Self::from_reader(reader)
    }

    fn from_reader<R: std::io::Read>(mut reader: csv::Reader<R>) -> Result<Self> {
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let (x_cols, y_cols) = parse_header(&header)?;
        let mut ids = Vec::new();
        let mut seen = HashSet::new();
        let mut features = Vec::new();
        let mut outcomes = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let id = record.get(0).unwrap_or_default().to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId { id, line });
            }
            let cell = |col: usize| -> Result<f64> {
                let raw = record.get(col).unwrap_or_default();
                raw.parse::<f64>().map_err(|_| Error::NonNumericCell {
                    line,
                    column: header[col].clone(),
                    value: raw.to_string(),
                })
            };
            features.push(x_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?);
            if !y_cols.is_empty() {
                outcomes.push(y_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?);
            }
            ids.push(id);
        }
        let outcomes = (!y_cols.is_empty()).then_some(outcomes);
        Self::new(ids, features, outcomes, 0.0)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string()];
        header.extend((1..=self.dim()).map(|j| format!("x{j}")));
        if let Some(m) = self.objectives() {
            header.extend((1..=m).map(|i| format!("y{i}")));
        }
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.features[i].iter().map(f64::to_string));
            if let Some(y) = &self.outcomes {
                row.extend(y[i].iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column positions of `x1..xd` and `y1..ym`, in numeric order.
fn parse_header(header: &[String]) -> Result<(Vec<usize>, Vec<usize>)> {
    if header.first().map(String::as_str) != Some("id") {
        return Err(Error::Schema("first column must be `id`".into()));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (col, name) in header.iter().enumerate().skip(1) {
        let (prefix, rest) = name.split_at(name.len().min(1));
        let k: usize = rest
            .parse()
            .map_err(|_| Error::Schema(format!("unexpected column `{name}`")))?;
        match prefix {
            "x" => x.push((k, col)),
            "y" => y.push((k, col)),
            _ => return Err(Error::Schema(format!("unexpected column `{name}`"))),
        }
    }
    let ordered = |mut v: Vec<(usize, usize)>, p: &str| -> Result<Vec<usize>> {
        v.sort();
        for (expected, (k, _)) in (1..).zip(&v) {
            if *k != expected {
                return Err(Error::Schema(format!("missing column `{p}{expected}`")));
            }
        }
        Ok(v.into_iter().map(|(_, c)| c).collect())
    };
    let x = ordered(x, "x")?;
    if x.is_empty() {
        return Err(Error::Schema("missing column `x1`".into()));
    }
    Ok((x, ordered(y, "y")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loads_pool_with_outcomes() {
        let p = Pool::from_csv_str("id,x1,x2,y1,y2\na,0,1,0.5,0.25\nb,2,3,0.1,0.2\nc,4,5,0.9,0.8\n").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.dim(), 2);
        assert_eq!(p.objectives(), Some(2));
        assert_eq!(p.features()[1], vec![2.0, 3.0]);
        assert_eq!(p.latent(2).unwrap(), &[0.9, 0.8]);
        assert_eq!(p.ids(), &["a", "b", "c"]);
        assert!(!p.is_live_oracle());
    }

    #[test]
    fn loads_pool_without_outcomes() {
        let p = Pool::from_csv_str("id,x1\n1,0.5\n2,0.7\n").unwrap();
        assert!(p.is_live_oracle());
        assert!(matches!(p.latent(0), Err(Error::MissingOutcomes)));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            Pool::from_csv_str("id,x1\n1,0.5\n1,0.7\n"),
            Err(Error::DuplicateId { line: 3, .. })
        ));
        assert!(matches!(Pool::from_csv_str("id,x2\n1,0.5\n"), Err(Error::Schema(_))));
        assert!(matches!(Pool::from_csv_str("name,x1\n1,0.5\n"), Err(Error::Schema(_))));
        assert!(matches!(Pool::from_csv_str("id,y1\n1,0.5\n"), Err(Error::Schema(_))));
        match Pool::from_csv_str("id,x1,y1\n1,0.5,abc\n") {
            Err(Error::NonNumericCell { line, column, value }) => {
                assert_eq!((line, column.as_str(), value.as_str()), (2, "y1", "abc"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = Pool::from_csv_str("id,x1,x2,y1\nq,0.125,1e-3,0.3\nr,2,3,0.1\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.csv");
        p.write_csv(&path).unwrap();
        assert_eq!(Pool::load_csv(&path).unwrap(), p);
    }

    #[test]
    fn observations_are_noisy_around_latent() {
        let p = Pool::from_csv_str("id,x1,y1\n1,0.5,0.4\n").unwrap().with_noise_std(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = p.observe(0, &mut rng).unwrap();
        let b = p.observe(0, &mut rng).unwrap();
        assert_ne!(a, b);
        assert_eq!(p.latent(0).unwrap(), &[0.4]);
    }
}
