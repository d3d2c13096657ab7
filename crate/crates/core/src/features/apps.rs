use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppCategory {
    Social,
    Communication,
    Entertainment,
    Other,
}

#[derive(Debug, thiserror::Error)]
pub enum AppTableError {
    #[error("app table header must be app_id,category")]
    BadHeader,
    #[error("app table row {row}: unknown category {category:?}")]
    UnknownCategory { row: usize, category: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Static app-id to category table. Unlisted apps are [`AppCategory::Other`].
#[derive(Debug, Clone, Default)]
pub struct AppCategoryTable {
    apps: HashMap<String, AppCategory>,
}

impl AppCategoryTable {
    pub fn bundled() -> Self {
        let mut t = Self::default();
        t.extend_from_csv(include_str!("../../assets/app_categories.csv").as_bytes())
            .expect("bundled app table is valid");
        t
    }

    /// Adds or overrides entries from `app_id,category` CSV.
    pub fn extend_from_csv(&mut self, reader: impl Read) -> Result<(), AppTableError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        if rdr.headers()?.iter().collect::<Vec<_>>() != ["app_id", "category"] {
            return Err(AppTableError::BadHeader);
        }
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let category = match &rec[1] {
                "social" => AppCategory::Social,
                "communication" => AppCategory::Communication,
                "entertainment" => AppCategory::Entertainment,
                "other" => AppCategory::Other,
                c => return Err(AppTableError::UnknownCategory { row: i + 1, category: c.to_string() }),
            };
            self.apps.insert(rec[0].to_string(), category);
        }
        Ok(())
    }

    pub fn category(&self, app_id: &str) -> AppCategory {
        self.apps.get(app_id).copied().unwrap_or(AppCategory::Other)
    }

    /// Listed apps sorted by id.
    pub fn entries(&self) -> Vec<(&str, AppCategory)> {
        let mut v: Vec<_> = self.apps.iter().map(|(k, c)| (k.as_str(), *c)).collect();
        v.sort();
        v
    }
}
