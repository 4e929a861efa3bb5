use std::path::Path;

use crate::assessment::StutterProfile;

use super::{TherapyCatalog, TherapyError};

const FEATURE_COLUMNS: [&str; 3] = ["prolongation", "repetition", "improvement"];

/// One `(prolongation, repetition, improvement)` profile with a label per therapy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDatasetRow {
    pub prolongation: u8,
    pub repetition: u8,
    pub improvement: u8,
    pub labels: Vec<bool>,
}

impl RuleDatasetRow {
    pub fn features(&self) -> Vec<f64> {
        vec![
            f64::from(self.prolongation),
            f64::from(self.repetition),
            f64::from(self.improvement),
        ]
    }
}

/// A labeled table with named therapy columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDataset {
    pub therapies: Vec<String>,
    pub rows: Vec<RuleDatasetRow>,
}

impl RuleDataset {
    pub fn column(&self, therapy: usize) -> Vec<bool> {
        self.rows.iter().map(|r| r.labels[therapy]).collect()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(RuleDatasetRow::features).collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, TherapyError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = FEATURE_COLUMNS
            .iter()
            .copied()
            .chain(self.therapies.iter().map(String::as_str))
            .collect();
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![
                row.prolongation.to_string(),
                row.repetition.to_string(),
                row.improvement.to_string(),
            ];
            rec.extend(row.labels.iter().map(|&l| u8::from(l).to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| TherapyError::Format(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self, TherapyError> {
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 4 || header.iter().take(3).ne(FEATURE_COLUMNS.iter().copied()) {
            return Err(TherapyError::Format(format!(
                "header must start with {} followed by therapy columns",
                FEATURE_COLUMNS.join(",")
            )));
        }
        let therapies: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| -> Result<u8, TherapyError> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| {
                        TherapyError::Format(format!(
                            "row {}: column {} is not an integer",
                            line + 1,
                            i + 1
                        ))
                    })
            };
            let level = |i: usize| -> Result<u8, TherapyError> {
                let v = field(i)?;
                if (1..=4).contains(&v) {
                    Ok(v)
                } else {
                    Err(TherapyError::Format(format!(
                        "row {}: level {v} outside 1..=4",
                        line + 1
                    )))
                }
            };
            let labels = (3..3 + therapies.len())
                .map(|i| match field(i)? {
                    0 => Ok(false),
                    1 => Ok(true),
                    v => Err(TherapyError::Format(format!(
                        "row {}: label {v} is not 0 or 1",
                        line + 1
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(RuleDatasetRow {
                prolongation: level(0)?,
                repetition: level(1)?,
                improvement: level(2)?,
                labels,
            });
        }
        Ok(Self { therapies, rows })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TherapyError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?)
            .map_err(|e| TherapyError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TherapyError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| TherapyError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv(&bytes)
    }
}

fn csv_err(e: csv::Error) -> TherapyError {
    TherapyError::Format(e.to_string())
}

/// All 64 profiles in `{1..4}³`, prolongation-major, labeled by the catalog's rules.
pub fn generate_rule_dataset(catalog: &TherapyCatalog) -> RuleDataset {
    let mut rows = Vec::with_capacity(64);
    for p in 1..=4u8 {
        for r in 1..=4u8 {
            for i in 1..=4u8 {
                let profile = StutterProfile::new(p, r, i).expect("levels in range");
                rows.push(RuleDatasetRow {
                    prolongation: p,
                    repetition: r,
                    improvement: i,
                    labels: catalog
                        .therapies
                        .iter()
                        .map(|t| t.rule_label(&profile))
                        .collect(),
                });
            }
        }
    }
    RuleDataset {
        therapies: catalog.names(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixty_four_distinct_rows() {
        let ds = generate_rule_dataset(&TherapyCatalog::default());
        assert_eq!(ds.rows.len(), 64);
        let mut keys: Vec<_> = ds
            .rows
            .iter()
            .map(|r| (r.prolongation, r.repetition, r.improvement))
            .collect();
        keys.dedup();
        assert_eq!(keys.len(), 64);
    }

    #[test]
    fn csv_round_trip() {
        let ds = generate_rule_dataset(&TherapyCatalog::default());
        let bytes = ds.to_csv().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text
            .starts_with("prolongation,repetition,improvement,Therapy 1,Therapy 2\n1,1,1,0,0\n"));
        assert_eq!(RuleDataset::from_csv(&bytes).unwrap(), ds);
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(RuleDataset::from_csv(b"a,b,c,d\n1,1,1,0\n").is_err());
        assert!(
            RuleDataset::from_csv(b"prolongation,repetition,improvement,T\n5,1,1,0\n").is_err()
        );
        assert!(
            RuleDataset::from_csv(b"prolongation,repetition,improvement,T\n1,1,1,2\n").is_err()
        );
    }
}
