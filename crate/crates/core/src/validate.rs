//! Rule checks over a [`TestDefinition`].
//!
//! [`validate`] never fails: it returns every violated rule. Violations of
//! [`Severity::Warning`] (inert items) do not make a test invalid.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::model::{CategoryId, DemographicKind, TestDefinition};
use crate::scoring::{score_bounds, ScoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    MissingTestId,
    AnswerSetTooSmall,
    EmptyAnswerLabel,
    DuplicateAnswerLabel,
    EmptyItemText,
    DuplicateItemId,
    OrdinalDuplicate,
    OrdinalGap,
    EmptyCategoryName,
    DuplicateCategoryId,
    DuplicateCategoryName,
    UnknownBindingItem,
    UnknownBindingCategory,
    DuplicateBinding,
    TupleLengthMismatch,
    CategoryUnbound,
    DegenerateScale,
    UnknownBandCategory,
    MissingBands,
    BandIndexGap,
    BandEmptyInterval,
    BandGap,
    BandOverlap,
    BandBoundsMismatch,
    EmptyInterpretation,
    EmptyDemographicName,
    DuplicateDemographicField,
    EmptyChoiceList,
    InertItem,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            MissingTestId => "MISSING_TEST_ID",
            AnswerSetTooSmall => "ANSWER_SET_TOO_SMALL",
            EmptyAnswerLabel => "EMPTY_ANSWER_LABEL",
            DuplicateAnswerLabel => "DUPLICATE_ANSWER_LABEL",
            EmptyItemText => "EMPTY_ITEM_TEXT",
            DuplicateItemId => "DUPLICATE_ITEM_ID",
            OrdinalDuplicate => "ORDINAL_DUPLICATE",
            OrdinalGap => "ORDINAL_GAP",
            EmptyCategoryName => "EMPTY_CATEGORY_NAME",
            DuplicateCategoryId => "DUPLICATE_CATEGORY_ID",
            DuplicateCategoryName => "DUPLICATE_CATEGORY_NAME",
            UnknownBindingItem => "UNKNOWN_BINDING_ITEM",
            UnknownBindingCategory => "UNKNOWN_BINDING_CATEGORY",
            DuplicateBinding => "DUPLICATE_BINDING",
            TupleLengthMismatch => "TUPLE_LENGTH_MISMATCH",
            CategoryUnbound => "CATEGORY_UNBOUND",
            DegenerateScale => "DEGENERATE_SCALE",
            UnknownBandCategory => "UNKNOWN_BAND_CATEGORY",
            MissingBands => "MISSING_BANDS",
            BandIndexGap => "BAND_INDEX_GAP",
            BandEmptyInterval => "BAND_EMPTY_INTERVAL",
            BandGap => "BAND_GAP",
            BandOverlap => "BAND_OVERLAP",
            BandBoundsMismatch => "BAND_BOUNDS_MISMATCH",
            EmptyInterpretation => "EMPTY_INTERPRETATION",
            EmptyDemographicName => "EMPTY_DEMOGRAPHIC_NAME",
            DuplicateDemographicField => "DUPLICATE_DEMOGRAPHIC_FIELD",
            EmptyChoiceList => "EMPTY_CHOICE_LIST",
            InertItem => "INERT_ITEM",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            ViolationCode::InertItem => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: code.severity(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level} {}: {}", self.code, self.message)
    }
}

/// Checks every structural rule of a test.
pub fn validate(test: &TestDefinition) -> Vec<Violation> {
    let mut out = Vec::new();
    check_header(test, &mut out);
    check_items(test, &mut out);
    check_categories(test, &mut out);
    check_bindings(test, &mut out);
    check_bands(test, &mut out);
    check_demographics(test, &mut out);
    for item in test.inert_items() {
        out.push(Violation::new(
            ViolationCode::InertItem,
            format!(
                "item {} (`{}`) is bound to no category and will not be scored",
                item.ordinal, item.id
            ),
        ));
    }
    out
}

/// True when no error-level violation exists.
pub fn is_valid(test: &TestDefinition) -> bool {
    validate(test).iter().all(|v| !v.is_error())
}

/// Only the error-level violations.
pub fn errors(test: &TestDefinition) -> Vec<Violation> {
    validate(test)
        .into_iter()
        .filter(Violation::is_error)
        .collect()
}

fn check_header(test: &TestDefinition, out: &mut Vec<Violation>) {
    use ViolationCode::*;
    if test.test_id.trim().is_empty() {
        out.push(Violation::new(MissingTestId, "test id is empty"));
    }
    let options = &test.answer_set.options;
    if options.len() < 2 {
        out.push(Violation::new(
            AnswerSetTooSmall,
            format!(
                "answer set has {} option(s), at least 2 required",
                options.len()
            ),
        ));
    }
    let mut seen = HashSet::new();
    for (i, label) in options.iter().enumerate() {
        if label.trim().is_empty() {
            out.push(Violation::new(
                EmptyAnswerLabel,
                format!("answer option {i} has an empty label"),
            ));
        } else if !seen.insert(label) {
            out.push(Violation::new(
                DuplicateAnswerLabel,
                format!("answer label `{label}` appears more than once"),
            ));
        }
    }
}

fn check_items(test: &TestDefinition, out: &mut Vec<Violation>) {
    use ViolationCode::*;
    let mut ids = HashSet::new();
    let mut ordinals: HashMap<u32, usize> = HashMap::new();
    for item in &test.items {
        if !ids.insert(&item.id) {
            out.push(Violation::new(
                DuplicateItemId,
                format!("item id `{}` is used more than once", item.id),
            ));
        }
        if item.text.trim().is_empty() {
            out.push(Violation::new(
                EmptyItemText,
                format!("item `{}` has empty text", item.id),
            ));
        }
        *ordinals.entry(item.ordinal).or_default() += 1;
    }
    let mut dupes: Vec<u32> = ordinals
        .iter()
        .filter(|(_, &n)| n > 1)
        .map(|(&o, _)| o)
        .collect();
    dupes.sort_unstable();
    for ordinal in dupes {
        out.push(Violation::new(
            OrdinalDuplicate,
            format!("ordinal {ordinal} is assigned to more than one item"),
        ));
    }
    let m = test.items.len() as u32;
    let missing: Vec<String> = (1..=m)
        .filter(|o| !ordinals.contains_key(o))
        .map(|o| o.to_string())
        .collect();
    if !missing.is_empty() {
        out.push(Violation::new(
            OrdinalGap,
            format!(
                "ordinals must be exactly 1..={m}; missing {}",
                missing.join(", ")
            ),
        ));
    }
}

fn check_categories(test: &TestDefinition, out: &mut Vec<Violation>) {
    use ViolationCode::*;
    let mut ids = HashSet::new();
    let mut names = HashSet::new();
    for c in &test.categories {
        if !ids.insert(&c.id) {
            out.push(Violation::new(
                DuplicateCategoryId,
                format!("category id `{}` is used more than once", c.id),
            ));
        }
        if c.name.trim().is_empty() {
            out.push(Violation::new(
                EmptyCategoryName,
                format!("category `{}` has an empty name", c.id),
            ));
        } else if !names.insert(&c.name) {
            out.push(Violation::new(
                DuplicateCategoryName,
                format!("category name `{}` is used more than once", c.name),
            ));
        }
    }
}

fn check_bindings(test: &TestDefinition, out: &mut Vec<Violation>) {
    use ViolationCode::*;
    let k = test.answer_set.len();
    let mut pairs = HashSet::new();
    for b in &test.bindings {
        if test.item(&b.item_id).is_none() {
            out.push(Violation::new(
                UnknownBindingItem,
                format!("binding references unknown item `{}`", b.item_id),
            ));
        }
        if test.category(&b.category_id).is_none() {
            out.push(Violation::new(
                UnknownBindingCategory,
                format!("binding references unknown category `{}`", b.category_id),
            ));
        }
        if !pairs.insert((&b.category_id, &b.item_id)) {
            out.push(Violation::new(
                DuplicateBinding,
                format!(
                    "category `{}` has more than one scale value for item `{}`",
                    b.category_id, b.item_id
                ),
            ));
        }
        if b.tuple.len() != k {
            out.push(Violation::new(
                TupleLengthMismatch,
                format!(
                    "tuple for category `{}`, item `{}` has {} values, answer set has {k}",
                    b.category_id,
                    b.item_id,
                    b.tuple.len()
                ),
            ));
        }
    }
    for c in &test.categories {
        if test.bindings_of(&c.id).next().is_none() {
            out.push(Violation::new(
                CategoryUnbound,
                format!("category `{}` has no scale bindings", c.id),
            ));
        }
    }
}

fn check_bands(test: &TestDefinition, out: &mut Vec<Violation>) {
    use ViolationCode::*;
    let known: HashSet<&CategoryId> = test.categories.iter().map(|c| &c.id).collect();
    let mut reported_unknown = BTreeSet::new();
    for band in &test.bands {
        if !known.contains(&band.category_id) && reported_unknown.insert(&band.category_id) {
            out.push(Violation::new(
                UnknownBandCategory,
                format!("bands reference unknown category `{}`", band.category_id),
            ));
        }
        if band.interpretation.trim().is_empty() {
            out.push(Violation::new(
                EmptyInterpretation,
                format!(
                    "band {} of category `{}` has an empty interpretation",
                    band.index, band.category_id
                ),
            ));
        }
    }

    for c in &test.categories {
        let bands = test.bands_of(&c.id);
        let bounds = match score_bounds(test, &c.id) {
            Ok(b) => Some(b),
            // Reported by check_bindings.
            Err(ScoreError::NoBindings(_)) => None,
            Err(_) => None,
        };
        if let Some((min, max)) = bounds {
            if min == max {
                out.push(Violation::new(
                    DegenerateScale,
                    format!(
                        "category `{}` has minimum score equal to maximum score ({min})",
                        c.id
                    ),
                ));
            }
        }
        if bands.is_empty() {
            out.push(Violation::new(
                MissingBands,
                format!("category `{}` has no interpretation bands", c.id),
            ));
            continue;
        }

        let indices_ok = bands
            .iter()
            .enumerate()
            .all(|(i, b)| b.index == i as u32 + 1);
        if !indices_ok {
            let got: Vec<String> = bands.iter().map(|b| b.index.to_string()).collect();
            out.push(Violation::new(
                BandIndexGap,
                format!(
                    "band indices of category `{}` must be 1..={}; got {}",
                    c.id,
                    bands.len(),
                    got.join(", ")
                ),
            ));
        }
        for b in &bands {
            if b.lower >= b.upper {
                out.push(Violation::new(
                    BandEmptyInterval,
                    format!(
                        "band {} of category `{}` has lower {} not below upper {}",
                        b.index, c.id, b.lower, b.upper
                    ),
                ));
            }
        }
        for pair in bands.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            if next.lower > prev.upper {
                out.push(Violation::new(
                    BandGap,
                    format!(
                        "category `{}`: scores in ({}, {}] between bands {} and {} are uncovered",
                        c.id, prev.upper, next.lower, prev.index, next.index
                    ),
                ));
            } else if next.lower < prev.upper {
                out.push(Violation::new(
                    BandOverlap,
                    format!(
                        "category `{}`: bands {} and {} overlap on ({}, {}]",
                        c.id, prev.index, next.index, next.lower, prev.upper
                    ),
                ));
            }
        }
        if let Some((min, max)) = bounds {
            let first = bands[0];
            let last = bands[bands.len() - 1];
            if first.lower != min || last.upper != max {
                out.push(Violation::new(
                    BandBoundsMismatch,
                    format!(
                        "category `{}`: bands span [{}, {}] but achievable scores span [{min}, {max}]",
                        c.id, first.lower, last.upper
                    ),
                ));
            }
        }
    }
}

fn check_demographics(test: &TestDefinition, out: &mut Vec<Violation>) {
    use ViolationCode::*;
    let mut names = HashSet::new();
    for field in &test.demographics {
        if field.name.trim().is_empty() {
            out.push(Violation::new(
                EmptyDemographicName,
                "demographic field with empty name",
            ));
        } else if !names.insert(&field.name) {
            out.push(Violation::new(
                DuplicateDemographicField,
                format!("demographic field `{}` is declared twice", field.name),
            ));
        }
        if let DemographicKind::Choice(choices) = &field.kind {
            if choices.is_empty() {
                out.push(Violation::new(
                    EmptyChoiceList,
                    format!("choice field `{}` offers no choices", field.name),
                ));
            }
        }
    }
}
