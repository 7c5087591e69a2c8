//! The `.ptest.json` test-definition file.
//!
//! Decimal values are written as JSON strings so that no score or band
//! boundary ever passes through binary floating point.

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AnswerSet, Band, Category, DemographicField, DemographicKind, Item, ScaleBinding, ScoreTuple,
    TestDefinition,
};
use crate::validate::{errors, Violation};

pub const FORMAT_VERSION: u32 = 1;
pub const TEST_FILE_EXTENSION: &str = ".ptest.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestDocument {
    pub format_version: u32,
    pub test: TestDefinition,
}

impl TestDocument {
    pub fn new(test: TestDefinition) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("malformed test file: {0}")]
    Malformed(String),
    #[error("unsupported format_version {0} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("test definition is invalid: {}", ViolationList(.0))]
    Invalid(Vec<Violation>),
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.code, v.message)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct WireDocument {
    format_version: u32,
    test_id: String,
    title: String,
    #[serde(default)]
    instruction: String,
    answer_set: Vec<String>,
    items: Vec<WireItem>,
    categories: Vec<WireCategory>,
    bindings: Vec<WireBinding>,
    bands: Vec<WireBand>,
    #[serde(default)]
    demographics: Vec<WireDemographic>,
}

#[derive(Serialize, Deserialize)]
struct WireItem {
    id: String,
    ordinal: u32,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct WireCategory {
    id: String,
    name: String,
}

#[derive(Serialize, Deserialize)]
struct WireBinding {
    category_id: String,
    item_id: String,
    values: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct WireBand {
    category_id: String,
    index: u32,
    lower: String,
    upper: String,
    interpretation: String,
}

#[derive(Serialize, Deserialize)]
struct WireDemographic {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<String>>,
}

fn decimal(s: &str, what: &str) -> Result<Decimal, FormatError> {
    Decimal::from_str(s.trim())
        .map_err(|e| FormatError::Malformed(format!("{what}: `{s}` is not a decimal ({e})")))
}

fn to_wire(doc: &TestDocument) -> WireDocument {
    let t = &doc.test;
    WireDocument {
        format_version: doc.format_version,
        test_id: t.test_id.clone(),
        title: t.title.clone(),
        instruction: t.instruction.clone(),
        answer_set: t.answer_set.options.clone(),
        items: t
            .items_in_order()
            .into_iter()
            .map(|i| WireItem {
                id: i.id.0.clone(),
                ordinal: i.ordinal,
                text: i.text.clone(),
            })
            .collect(),
        categories: t
            .categories
            .iter()
            .map(|c| WireCategory {
                id: c.id.0.clone(),
                name: c.name.clone(),
            })
            .collect(),
        bindings: t
            .bindings
            .iter()
            .map(|b| WireBinding {
                category_id: b.category_id.0.clone(),
                item_id: b.item_id.0.clone(),
                values: b.tuple.values.iter().map(Decimal::to_string).collect(),
            })
            .collect(),
        bands: t
            .bands
            .iter()
            .map(|b| WireBand {
                category_id: b.category_id.0.clone(),
                index: b.index,
                lower: b.lower.to_string(),
                upper: b.upper.to_string(),
                interpretation: b.interpretation.clone(),
            })
            .collect(),
        demographics: t
            .demographics
            .iter()
            .map(|d| WireDemographic {
                name: d.name.clone(),
                kind: d.kind.name().to_owned(),
                choices: match &d.kind {
                    DemographicKind::Choice(c) => Some(c.clone()),
                    _ => None,
                },
            })
            .collect(),
    }
}

fn from_wire(w: WireDocument) -> Result<TestDocument, FormatError> {
    let bindings = w
        .bindings
        .into_iter()
        .map(|b| {
            let values = b
                .values
                .iter()
                .map(|v| decimal(v, "binding value"))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ScaleBinding {
                category_id: b.category_id.into(),
                item_id: b.item_id.into(),
                tuple: ScoreTuple::new(values),
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let bands = w
        .bands
        .into_iter()
        .map(|b| {
            Ok(Band {
                category_id: b.category_id.into(),
                index: b.index,
                lower: decimal(&b.lower, "band lower bound")?,
                upper: decimal(&b.upper, "band upper bound")?,
                interpretation: b.interpretation,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let demographics = w
        .demographics
        .into_iter()
        .map(|d| {
            let kind = match (d.kind.as_str(), d.choices) {
                ("text", None) => DemographicKind::Text,
                ("integer", None) => DemographicKind::Integer,
                ("choice", Some(c)) => DemographicKind::Choice(c),
                ("choice", None) => {
                    return Err(FormatError::Malformed(format!(
                        "demographic field `{}` of kind choice lists no choices",
                        d.name
                    )))
                }
                ("text" | "integer", Some(_)) => {
                    return Err(FormatError::Malformed(format!(
                        "demographic field `{}` has choices but kind {}",
                        d.name, d.kind
                    )))
                }
                (other, _) => {
                    return Err(FormatError::Malformed(format!(
                        "demographic field `{}` has unknown kind `{other}`",
                        d.name
                    )))
                }
            };
            Ok(DemographicField { name: d.name, kind })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;

    let test = TestDefinition {
        test_id: w.test_id,
        title: w.title,
        instruction: w.instruction,
        answer_set: AnswerSet::new(w.answer_set),
        items: w
            .items
            .into_iter()
            .map(|i| Item {
                id: i.id.into(),
                ordinal: i.ordinal,
                text: i.text,
            })
            .collect(),
        categories: w
            .categories
            .into_iter()
            .map(|c| Category {
                id: c.id.into(),
                name: c.name,
            })
            .collect(),
        bindings,
        bands,
        demographics,
    };
    Ok(TestDocument {
        format_version: w.format_version,
        test,
    })
}

fn reject_invalid(test: &TestDefinition) -> Result<(), FormatError> {
    let errs = errors(test);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(FormatError::Invalid(errs))
    }
}

/// Writes a document that validates cleanly.
pub fn serialize_test(doc: &TestDocument) -> Result<Vec<u8>, FormatError> {
    reject_invalid(&doc.test)?;
    Ok(serialize_test_unchecked(doc))
}

/// Writes a document without validating it. Used for drafts mid-authoring.
pub fn serialize_test_unchecked(doc: &TestDocument) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&to_wire(doc)).expect("wire types always serialize");
    out.push(b'\n');
    out
}

/// Reads a document and rejects it unless it validates cleanly.
pub fn parse_test(bytes: &[u8]) -> Result<TestDocument, FormatError> {
    let doc = parse_test_unchecked(bytes)?;
    reject_invalid(&doc.test)?;
    Ok(doc)
}

/// Reads a well-formed document of a supported version without validating
/// its contents.
pub fn parse_test_unchecked(bytes: &[u8]) -> Result<TestDocument, FormatError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| FormatError::Malformed("missing integer `format_version`".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(FormatError::UnsupportedVersion(
            u32::try_from(version).unwrap_or(u32::MAX),
        ));
    }
    let wire: WireDocument =
        serde_json::from_value(value).map_err(|e| FormatError::Malformed(e.to_string()))?;
    from_wire(wire)
}
