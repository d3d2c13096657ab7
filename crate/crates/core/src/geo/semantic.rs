use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{haversine_m, LatLon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceLabel {
    Home,
    Gym,
    Cafeteria,
    Library,
    Study,
    Leisure,
    Social,
    GreekHouse,
    Other,
}

impl PlaceLabel {
    pub const ALL: [PlaceLabel; 9] = [
        PlaceLabel::Home,
        PlaceLabel::Gym,
        PlaceLabel::Cafeteria,
        PlaceLabel::Library,
        PlaceLabel::Study,
        PlaceLabel::Leisure,
        PlaceLabel::Social,
        PlaceLabel::GreekHouse,
        PlaceLabel::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlaceLabel::Home => "home",
            PlaceLabel::Gym => "gym",
            PlaceLabel::Cafeteria => "cafeteria",
            PlaceLabel::Library => "library",
            PlaceLabel::Study => "study",
            PlaceLabel::Leisure => "leisure",
            PlaceLabel::Social => "social",
            PlaceLabel::GreekHouse => "greek_house",
            PlaceLabel::Other => "other",
        }
    }
}

impl fmt::Display for PlaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlaceLabel {
    type Err = MapError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| MapError::UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("unknown place label {0:?}")]
    UnknownLabel(String),
    #[error("map row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("map header must be label,lat,lon,radius_m")]
    BadHeader,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub label: PlaceLabel,
    pub center: LatLon,
    pub radius_m: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticMap {
    entries: Vec<MapEntry>,
}

impl SemanticMap {
    pub fn new(entries: Vec<MapEntry>) -> Result<Self, MapError> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.radius_m.is_finite() && e.radius_m > 0.0) {
                return Err(MapError::InvalidRow { row: i + 1, reason: "radius must be positive".into() });
            }
            if !(-90.0..=90.0).contains(&e.center.lat) || !(-180.0..=180.0).contains(&e.center.lon) {
                return Err(MapError::InvalidRow { row: i + 1, reason: "coordinates out of range".into() });
            }
        }
        Ok(Self { entries })
    }

    /// Reads `label,lat,lon,radius_m` CSV with a header row.
    pub fn from_csv(reader: impl Read) -> Result<Self, MapError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != ["label", "lat", "lon", "radius_m"] {
            return Err(MapError::BadHeader);
        }
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let num = |idx: usize| -> Result<f64, MapError> {
                rec[idx].parse::<f64>().map_err(|e| MapError::InvalidRow { row, reason: e.to_string() })
            };
            entries.push(MapEntry {
                label: rec[0].parse()?,
                center: LatLon::new(num(1)?, num(2)?),
                radius_m: num(3)?,
            });
        }
        Self::new(entries)
    }

    pub fn bundled_campus() -> Self {
        Self::from_csv(include_str!("../../assets/campus_map.csv").as_bytes()).expect("bundled map is valid")
    }

    pub fn with_entry(mut self, entry: MapEntry) -> Result<Self, MapError> {
        self.entries.push(entry);
        Self::new(self.entries)
    }

    pub fn entries(&self) -> &[MapEntry] {
        &self.entries
    }

    /// Label of the smallest entry whose radius contains `pos`; ties go to the
    /// entry listed first.
    pub fn label_at(&self, pos: LatLon) -> PlaceLabel {
        self.entries
            .iter()
            .filter(|e| haversine_m(e.center, pos) <= e.radius_m)
            .min_by(|a, b| a.radius_m.total_cmp(&b.radius_m))
            .map_or(PlaceLabel::Other, |e| e.label)
    }

    pub fn home(&self) -> Option<&MapEntry> {
        self.entries.iter().find(|e| e.label == PlaceLabel::Home)
    }
}
