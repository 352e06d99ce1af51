//! The pre-loaded study food list: FNDDS-style numeric codes, names and
//! energy densities, with name/code search and entry resolution.
//!
//! File format is UTF-8 CSV whose first line is exactly
//! `code,name,energy_kcal_per_100g`. A blank energy cell means unknown.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FOOD_LIST_HEADER: [&str; 3] = ["code", "name", "energy_kcal_per_100g"];

/// Numeric food code, 1 to 8 decimal digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FoodCode(String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("food code must be 1-8 decimal digits, got {0:?}")]
pub struct FoodCodeError(pub String);

impl FoodCode {
    pub fn parse(s: &str) -> Result<Self, FoodCodeError> {
        if (1..=8).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit()) {
            Ok(FoodCode(s.to_owned()))
        } else {
            Err(FoodCodeError(s.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for FoodCode {
    type Error = FoodCodeError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        FoodCode::parse(&s)
    }
}

impl From<FoodCode> for String {
    fn from(c: FoodCode) -> Self {
        c.0
    }
}

impl fmt::Display for FoodCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodItem {
    pub code: FoodCode,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_kcal_per_100g: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoodListError {
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("duplicate food code {0}")]
    DuplicateCode(FoodCode),
    #[error("cannot read food list: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("entry is blank")]
    EmptyEntry,
    #[error("name matches several foods: {}", codes_list(.0))]
    Ambiguous(Vec<FoodCode>),
}

fn codes_list(codes: &[FoodCode]) -> String {
    codes
        .iter()
        .map(FoodCode::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolution<'a> {
    Matched(&'a FoodItem),
    /// Not on the list; the entry itself becomes the label.
    FreeText(String),
}

/// Immutable after construction; cheap to share behind an `Arc`.
#[derive(Debug, Clone, Default)]
pub struct FoodDatabase {
    items: Vec<FoodItem>,
    lower_names: Vec<String>,
    by_code: HashMap<FoodCode, usize>,
    by_name: HashMap<String, Vec<usize>>,
}

impl FoodDatabase {
    pub fn from_items(items: Vec<FoodItem>) -> Result<Self, FoodListError> {
        let mut by_code = HashMap::with_capacity(items.len());
        let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
        let mut lower_names = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if by_code.insert(item.code.clone(), i).is_some() {
                return Err(FoodListError::DuplicateCode(item.code.clone()));
            }
            let lower = item.name.to_lowercase();
            by_name.entry(lower.clone()).or_default().push(i);
            lower_names.push(lower);
        }
        Ok(Self {
            items,
            lower_names,
            by_code,
            by_name,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, FoodListError> {
        let file =
            std::fs::File::open(path.as_ref()).map_err(|e| FoodListError::Io(e.to_string()))?;
        load_food_list(file)
    }

    pub fn items(&self) -> &[FoodItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn by_code(&self, code: &FoodCode) -> Option<&FoodItem> {
        self.by_code.get(code).map(|&i| &self.items[i])
    }

    /// SHA-256 over the canonical JSON of the item list. Clients compare it
    /// to decide whether their cached copy is current.
    pub fn content_hash(&self) -> String {
        let json = crate::canonical::to_vec(&self.items).expect("food items serialize");
        crate::model::content_hash(&json)
    }

    /// Every item whose name contains the query (case-insensitive), plus
    /// every item whose code starts with the query when it is all digits.
    ///
    /// Ranked exact match, then prefix match, then other substring match;
    /// within a tier by name, then code. A code match ranks by the same
    /// rule applied to the code. Blank queries return nothing.
    pub fn search(&self, query: &str) -> Vec<&FoodItem> {
        let q = query.trim().to_lowercase();
        if q.is_empty() {
            return Vec::new();
        }
        let numeric = q.bytes().all(|b| b.is_ascii_digit());
        let mut hits: Vec<(u8, usize)> = Vec::new();
        for (i, item) in self.items.iter().enumerate() {
            let name = &self.lower_names[i];
            let name_tier = if *name == q {
                Some(0)
            } else if name.starts_with(&q) {
                Some(1)
            } else if name.contains(&q) {
                Some(2)
            } else {
                None
            };
            let code_tier = if !numeric {
                None
            } else if item.code.as_str() == q {
                Some(0)
            } else if item.code.as_str().starts_with(&q) {
                Some(1)
            } else {
                None
            };
            if let Some(tier) = match (name_tier, code_tier) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            } {
                hits.push((tier, i));
            }
        }
        hits.sort_by(|(ta, a), (tb, b)| {
            ta.cmp(tb)
                .then_with(|| self.lower_names[*a].cmp(&self.lower_names[*b]))
                .then_with(|| self.items[*a].name.cmp(&self.items[*b].name))
                .then_with(|| self.items[*a].code.cmp(&self.items[*b].code))
        });
        hits.into_iter().map(|(_, i)| &self.items[i]).collect()
    }

    /// Resolves a typed entry to a list item: an exact code, or a unique
    /// case-insensitive name. Anything else is kept as free text.
    pub fn resolve(&self, entry: &str) -> Result<Resolution<'_>, ResolveError> {
        let entry = entry.trim();
        if entry.is_empty() {
            return Err(ResolveError::EmptyEntry);
        }
        if let Ok(code) = FoodCode::parse(entry) {
            if let Some(item) = self.by_code(&code) {
                return Ok(Resolution::Matched(item));
            }
        }
        match self.by_name.get(&entry.to_lowercase()).map(Vec::as_slice) {
            Some([only]) => Ok(Resolution::Matched(&self.items[*only])),
            Some(many) if !many.is_empty() => {
                let mut codes: Vec<FoodCode> =
                    many.iter().map(|&i| self.items[i].code.clone()).collect();
                codes.sort();
                Err(ResolveError::Ambiguous(codes))
            }
            _ => Ok(Resolution::FreeText(entry.to_owned())),
        }
    }
}

/// Parses a food-list CSV. Row order is kept as insertion order.
pub fn load_food_list(source: impl Read) -> Result<FoodDatabase, FoodListError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();
    match records.next() {
        None => {
            return Err(FoodListError::Parse {
                line: 1,
                reason: "missing header".into(),
            })
        }
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        Some(Ok(header)) => {
            if header.iter().ne(FOOD_LIST_HEADER) {
                return Err(parse_err(
                    1,
                    format!("header must be {:?}", FOOD_LIST_HEADER.join(",")),
                ));
            }
        }
    }
    let mut items = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let code = FoodCode::parse(record[0].trim()).map_err(|e| parse_err(line, e.to_string()))?;
        let name = record[1].trim();
        if name.is_empty() {
            return Err(parse_err(line, "name is empty".into()));
        }
        let energy = match record[2].trim() {
            "" => None,
            s => match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
                _ => return Err(parse_err(line, format!("invalid energy {s:?}"))),
            },
        };
        items.push(FoodItem {
            code,
            name: name.to_owned(),
            energy_kcal_per_100g: energy,
        });
    }
    FoodDatabase::from_items(items)
}

fn parse_err(line: u64, reason: String) -> FoodListError {
    FoodListError::Parse { line, reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "code,name,energy_kcal_per_100g\n\
        11100000,milk,61\n\
        71000100,potato,93\n\
        71401010,potato wedges,180\n\
        71301020,roast potato,149\n\
        61210220,juice,47\n\
        61210250,Juice,\n\
        64100110,water,0\n";

    fn db() -> FoodDatabase {
        load_food_list(SAMPLE.as_bytes()).unwrap()
    }

    fn names(items: &[&FoodItem]) -> Vec<String> {
        items.iter().map(|i| i.name.clone()).collect()
    }

    #[test]
    fn loads_two_rows() {
        let src = "code,name,energy_kcal_per_100g\n11100000,milk,61\n58100100,potato,93\n";
        let db = load_food_list(src.as_bytes()).unwrap();
        assert_eq!(db.len(), 2);
        assert_eq!(db.items()[0].name, "milk");
        assert_eq!(db.items()[1].energy_kcal_per_100g, Some(93.0));
    }

    #[test]
    fn header_only_gives_empty_database() {
        let db = load_food_list("code,name,energy_kcal_per_100g\n".as_bytes()).unwrap();
        assert!(db.is_empty());
        assert!(db.search("milk").is_empty());
    }

    #[test]
    fn duplicate_code_is_rejected() {
        let src = "code,name,energy_kcal_per_100g\n11100000,milk,61\n11100000,whole milk,64\n";
        assert_eq!(
            load_food_list(src.as_bytes()).unwrap_err(),
            FoodListError::DuplicateCode(FoodCode::parse("11100000").unwrap())
        );
    }

    #[test]
    fn malformed_rows_report_line() {
        let bad_header = "code,name\n1,milk\n";
        assert!(matches!(
            load_food_list(bad_header.as_bytes()),
            Err(FoodListError::Parse { line: 1, .. })
        ));
        let bad_code = "code,name,energy_kcal_per_100g\n1,milk,1\nabc,tea,1\n";
        assert!(matches!(
            load_food_list(bad_code.as_bytes()),
            Err(FoodListError::Parse { line: 3, .. })
        ));
        let bad_energy = "code,name,energy_kcal_per_100g\n1,milk,-4\n";
        assert!(matches!(
            load_food_list(bad_energy.as_bytes()),
            Err(FoodListError::Parse { line: 2, .. })
        ));
        let short = "code,name,energy_kcal_per_100g\n1,milk\n";
        assert!(matches!(
            load_food_list(short.as_bytes()),
            Err(FoodListError::Parse { line: 2, .. })
        ));
        assert!(load_food_list("".as_bytes()).is_err());
    }

    #[test]
    fn quoted_names_with_commas() {
        let src = "code,name,energy_kcal_per_100g\n1,\"rice, white\",130\n";
        let db = load_food_list(src.as_bytes()).unwrap();
        assert_eq!(db.items()[0].name, "rice, white");
    }

    #[test]
    fn potato_search_finds_all_three() {
        let db = db();
        assert_eq!(
            names(&db.search("potato")),
            ["potato", "potato wedges", "roast potato"]
        );
    }

    #[test]
    fn search_is_case_insensitive_and_trimmed() {
        let db = db();
        assert_eq!(names(&db.search("  POTATO ")).len(), 3);
    }

    #[test]
    fn empty_and_missing_queries() {
        let db = db();
        assert!(db.search("").is_empty());
        assert!(db.search("   ").is_empty());
        assert!(db.search("zzz").is_empty());
    }

    #[test]
    fn code_prefix_search() {
        let db = db();
        let hits = db.search("7140");
        assert_eq!(names(&hits), ["potato wedges"]);
        let hits = db.search("71");
        assert_eq!(hits.len(), 3);
        assert_eq!(db.search("71000100")[0].name, "potato");
    }

    #[test]
    fn duplicate_names_are_distinguished_by_code() {
        let db = db();
        let hits = db.search("juice");
        assert_eq!(hits.len(), 2);
        assert_ne!(hits[0].code, hits[1].code);
    }

    #[test]
    fn resolve_code_name_free_text_and_ambiguity() {
        let db = db();
        match db.resolve("71000100").unwrap() {
            Resolution::Matched(item) => assert_eq!(item.name, "potato"),
            other => panic!("{other:?}"),
        }
        match db.resolve("Roast Potato").unwrap() {
            Resolution::Matched(item) => assert_eq!(item.code.as_str(), "71301020"),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            db.resolve("dragonfruit smoothie").unwrap(),
            Resolution::FreeText("dragonfruit smoothie".into())
        );
        assert_eq!(
            db.resolve("juice").unwrap_err(),
            ResolveError::Ambiguous(vec![
                FoodCode::parse("61210220").unwrap(),
                FoodCode::parse("61210250").unwrap()
            ])
        );
        assert_eq!(db.resolve("  ").unwrap_err(), ResolveError::EmptyEntry);
    }

    #[test]
    fn unknown_numeric_entry_is_free_text() {
        assert_eq!(
            db().resolve("99999999").unwrap(),
            Resolution::FreeText("99999999".into())
        );
    }

    #[test]
    fn hash_changes_with_content() {
        let a = db();
        let b = load_food_list("code,name,energy_kcal_per_100g\n1,milk,61\n".as_bytes()).unwrap();
        assert_eq!(a.content_hash(), db().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
